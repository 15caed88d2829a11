//! Bidirectional gated recurrent network with hand-rolled backprop.
//!
//! The sequence reducer is a stack of bidirectional layers of a single-gate
//! recurrent cell (update gate plus tanh candidate):
//!
//! ```text
//! u_t = sigmoid(W_u x_t + U_u h_{t-1} + b_u)
//! c_t = tanh   (W_c x_t + U_c h_{t-1} + b_c)
//! h_t = u_t * c_t + (1 - u_t) * h_{t-1}
//! ```
//!
//! Each layer runs the cell in both directions; lower layers feed their
//! per-step concatenated states upward, and the top layer's two final
//! states concatenate into the fixed-size aggregate consumed by the head.
//! Feature vectors are constants: no gradient is ever produced for them,
//! only for the weights in [`WeightSet`].

use crate::error::{QcError, Result};
use crate::features::{FeatureLayout, SentenceFeatureSequence};
use crate::rng::Rng;

use super::config::{HeadKind, LossKind, ModelConfig};
use super::math::{dot, sigmoid, softplus, Matrix};

/// Weights of one recurrent cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellWeights {
    pub w_in_update: Matrix,
    pub w_rec_update: Matrix,
    pub b_update: Vec<f64>,
    pub w_in_cand: Matrix,
    pub w_rec_cand: Matrix,
    pub b_cand: Vec<f64>,
}

impl CellWeights {
    fn new(hidden: usize, input: usize, mut draw: impl FnMut() -> f64) -> Self {
        CellWeights {
            w_in_update: Matrix::from_fn(hidden, input, &mut draw),
            w_rec_update: Matrix::from_fn(hidden, hidden, &mut draw),
            b_update: (0..hidden).map(|_| draw()).collect(),
            w_in_cand: Matrix::from_fn(hidden, input, &mut draw),
            w_rec_cand: Matrix::from_fn(hidden, hidden, &mut draw),
            b_cand: (0..hidden).map(|_| draw()).collect(),
        }
    }

    fn zeros(hidden: usize, input: usize) -> Self {
        Self::new(hidden, input, || 0.0)
    }

    fn visit_mut(&mut self, f: &mut impl FnMut(&mut f64)) {
        for m in [&mut self.w_in_update, &mut self.w_rec_update] {
            m.data.iter_mut().for_each(&mut *f);
        }
        self.b_update.iter_mut().for_each(&mut *f);
        for m in [&mut self.w_in_cand, &mut self.w_rec_cand] {
            m.data.iter_mut().for_each(&mut *f);
        }
        self.b_cand.iter_mut().for_each(&mut *f);
    }

    fn zip_apply(&mut self, other: &CellWeights, f: &mut impl FnMut(&mut f64, f64)) {
        for (a, b) in [
            (&mut self.w_in_update, &other.w_in_update),
            (&mut self.w_rec_update, &other.w_rec_update),
        ] {
            a.data
                .iter_mut()
                .zip(b.data.iter())
                .for_each(|(x, &y)| f(x, y));
        }
        self.b_update
            .iter_mut()
            .zip(other.b_update.iter())
            .for_each(|(x, &y)| f(x, y));
        for (a, b) in [
            (&mut self.w_in_cand, &other.w_in_cand),
            (&mut self.w_rec_cand, &other.w_rec_cand),
        ] {
            a.data
                .iter_mut()
                .zip(b.data.iter())
                .for_each(|(x, &y)| f(x, y));
        }
        self.b_cand
            .iter_mut()
            .zip(other.b_cand.iter())
            .for_each(|(x, &y)| f(x, y));
    }
}

/// Forward and backward cells of one bidirectional layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerWeights {
    pub forward: CellWeights,
    pub backward: CellWeights,
}

/// Every trainable number in the model. Gradients use the same shape, so a
/// gradient carries exactly one entry per weight and none for the inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSet {
    pub layers: Vec<LayerWeights>,
    pub head_w: Vec<f64>,
    pub head_b: f64,
}

impl WeightSet {
    pub fn zeros_like(&self) -> WeightSet {
        let mut out = self.clone();
        out.visit_mut(&mut |w| *w = 0.0);
        out
    }

    /// Apply `f` to every weight in a fixed order.
    pub fn visit_mut(&mut self, f: &mut impl FnMut(&mut f64)) {
        for layer in &mut self.layers {
            layer.forward.visit_mut(f);
            layer.backward.visit_mut(f);
        }
        self.head_w.iter_mut().for_each(&mut *f);
        f(&mut self.head_b);
    }

    /// Pair every weight of `self` with the matching entry of `other`.
    pub fn zip_apply(&mut self, other: &WeightSet, f: &mut impl FnMut(&mut f64, f64)) {
        for (a, b) in self.layers.iter_mut().zip(other.layers.iter()) {
            a.forward.zip_apply(&b.forward, f);
            a.backward.zip_apply(&b.backward, f);
        }
        self.head_w
            .iter_mut()
            .zip(other.head_w.iter())
            .for_each(|(x, &y)| f(x, y));
        f(&mut self.head_b, other.head_b);
    }

    /// self += scale * other
    pub fn add_scaled(&mut self, other: &WeightSet, scale: f64) {
        self.zip_apply(other, &mut |x, y| *x += scale * y);
    }

    pub fn param_count(&self) -> usize {
        let mut n = 0;
        let mut probe = self.clone();
        probe.visit_mut(&mut |_| n += 1);
        n
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut flat = Vec::new();
        let mut probe = self.clone();
        probe.visit_mut(&mut |w| flat.push(*w));
        flat
    }

    pub fn set_from_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(QcError::Shape(format!(
                "expected {} weights, got {}",
                self.param_count(),
                flat.len()
            )));
        }
        let mut it = flat.iter();
        self.visit_mut(&mut |w| *w = *it.next().expect("length checked"));
        Ok(())
    }

    pub fn all_finite(&self) -> bool {
        let mut finite = true;
        let mut probe = self.clone();
        probe.visit_mut(&mut |w| finite &= w.is_finite());
        finite
    }
}

/// Trained (or freshly initialized) model: configuration, the feature
/// layout it expects, and the weights.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub config: ModelConfig,
    pub layout: FeatureLayout,
    pub weights: WeightSet,
}

impl ModelParams {
    /// Input width of layer `l`.
    fn layer_input_dim(config: &ModelConfig, layout: &FeatureLayout, l: usize) -> usize {
        if l == 0 {
            layout.dim()
        } else {
            2 * config.hidden_size
        }
    }

    /// Initialize all weights from uniform(-0.1, 0.1) seeded by
    /// `config.seed`.
    pub fn init(config: ModelConfig, layout: FeatureLayout) -> Result<ModelParams> {
        config.validate()?;
        if layout.dim() == 0 {
            return Err(QcError::Shape("feature layout has zero width".into()));
        }
        let mut rng = Rng::new(config.seed);
        Ok(Self::init_with_rng(config, layout, &mut rng))
    }

    pub(crate) fn init_with_rng(
        config: ModelConfig,
        layout: FeatureLayout,
        rng: &mut Rng,
    ) -> ModelParams {
        let hidden = config.hidden_size;
        let draw = |rng: &mut Rng| rng.uniform(-0.1, 0.1);
        let layers = (0..config.num_layers)
            .map(|l| {
                let input = Self::layer_input_dim(&config, &layout, l);
                LayerWeights {
                    forward: CellWeights::new(hidden, input, || draw(rng)),
                    backward: CellWeights::new(hidden, input, || draw(rng)),
                }
            })
            .collect();
        let head_w = (0..2 * hidden).map(|_| draw(rng)).collect();
        let head_b = draw(rng);
        ModelParams {
            config,
            layout,
            weights: WeightSet {
                layers,
                head_w,
                head_b,
            },
        }
    }

    /// Same shapes as `init`, all weights zero.
    pub fn zeros(config: ModelConfig, layout: FeatureLayout) -> Result<ModelParams> {
        config.validate()?;
        let hidden = config.hidden_size;
        let layers = (0..config.num_layers)
            .map(|l| {
                let input = Self::layer_input_dim(&config, &layout, l);
                LayerWeights {
                    forward: CellWeights::zeros(hidden, input),
                    backward: CellWeights::zeros(hidden, input),
                }
            })
            .collect();
        Ok(ModelParams {
            weights: WeightSet {
                layers,
                head_w: vec![0.0; 2 * hidden],
                head_b: 0.0,
            },
            config,
            layout,
        })
    }
}

/// Per-layer inverted-dropout masks, sampled once per training example.
#[derive(Debug, Clone)]
pub(crate) struct DropoutMasks {
    /// masks[layer][t][unit]; multiplied into the layer input.
    masks: Vec<Vec<Vec<f64>>>,
}

impl DropoutMasks {
    pub(crate) fn sample(
        config: &ModelConfig,
        layout: &FeatureLayout,
        seq_len: usize,
        rng: &mut Rng,
    ) -> DropoutMasks {
        let keep = 1.0 - config.dropout;
        let masks = (0..config.num_layers)
            .map(|l| {
                let dim = ModelParams::layer_input_dim(config, layout, l);
                (0..seq_len)
                    .map(|_| {
                        (0..dim)
                            .map(|_| if rng.bernoulli(keep) { 1.0 / keep } else { 0.0 })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        DropoutMasks { masks }
    }
}

struct DirectionTrace {
    /// States in processing order; `h[s]` is the state after step s.
    h: Vec<Vec<f64>>,
    u: Vec<Vec<f64>>,
    c: Vec<Vec<f64>>,
}

struct LayerTrace {
    /// Layer inputs after dropout, indexed by sequence position.
    inputs: Vec<Vec<f64>>,
    fwd: DirectionTrace,
    bwd: DirectionTrace,
}

pub(crate) struct ForwardTrace {
    layers: Vec<LayerTrace>,
    pub(crate) aggregate: Vec<f64>,
    /// Head pre-activation.
    pub(crate) z: f64,
}

fn run_direction(
    cell: &CellWeights,
    inputs: &[Vec<f64>],
    reversed: bool,
    hidden: usize,
) -> DirectionTrace {
    let steps = inputs.len();
    let mut h = Vec::with_capacity(steps);
    let mut u_all = Vec::with_capacity(steps);
    let mut c_all = Vec::with_capacity(steps);
    let mut h_prev = vec![0.0; hidden];
    for s in 0..steps {
        let idx = if reversed { steps - 1 - s } else { s };
        let x = &inputs[idx];
        let mut a_u = cell.w_in_update.matvec(x);
        let rec_u = cell.w_rec_update.matvec(&h_prev);
        let mut a_c = cell.w_in_cand.matvec(x);
        let rec_c = cell.w_rec_cand.matvec(&h_prev);
        let mut u = vec![0.0; hidden];
        let mut c = vec![0.0; hidden];
        let mut h_t = vec![0.0; hidden];
        for i in 0..hidden {
            a_u[i] += rec_u[i] + cell.b_update[i];
            a_c[i] += rec_c[i] + cell.b_cand[i];
            u[i] = sigmoid(a_u[i]);
            c[i] = a_c[i].tanh();
            h_t[i] = u[i] * c[i] + (1.0 - u[i]) * h_prev[i];
        }
        h_prev = h_t.clone();
        h.push(h_t);
        u_all.push(u);
        c_all.push(c);
    }
    DirectionTrace {
        h,
        u: u_all,
        c: c_all,
    }
}

fn validate_sequence(params: &ModelParams, seq: &SentenceFeatureSequence) -> Result<()> {
    if seq.vectors.is_empty() {
        return Err(QcError::EmptySentence(format!("sample {}", seq.sample_id)));
    }
    let expect = params.layout.dim();
    for v in &seq.vectors {
        if v.len() != expect {
            return Err(QcError::Shape(format!(
                "sample {} has a vector of dim {}, model expects {}",
                seq.sample_id,
                v.len(),
                expect
            )));
        }
    }
    Ok(())
}

/// Full forward pass, optionally under dropout masks.
pub(crate) fn forward_trace(
    params: &ModelParams,
    seq: &SentenceFeatureSequence,
    masks: Option<&DropoutMasks>,
) -> Result<ForwardTrace> {
    validate_sequence(params, seq)?;
    let hidden = params.config.hidden_size;
    let steps = seq.vectors.len();

    let mut layer_in: Vec<Vec<f64>> = seq.vectors.clone();
    let mut layers = Vec::with_capacity(params.weights.layers.len());
    for (l, layer) in params.weights.layers.iter().enumerate() {
        let inputs: Vec<Vec<f64>> = match masks {
            Some(m) => layer_in
                .iter()
                .enumerate()
                .map(|(t, x)| {
                    x.iter()
                        .zip(m.masks[l][t].iter())
                        .map(|(v, mask)| v * mask)
                        .collect()
                })
                .collect(),
            None => layer_in,
        };
        let fwd = run_direction(&layer.forward, &inputs, false, hidden);
        let bwd = run_direction(&layer.backward, &inputs, true, hidden);
        // Per-position outputs feed the next layer: forward state at t next
        // to the backward state that consumed the suffix starting at t.
        layer_in = (0..steps)
            .map(|t| {
                let mut v = Vec::with_capacity(2 * hidden);
                v.extend_from_slice(&fwd.h[t]);
                v.extend_from_slice(&bwd.h[steps - 1 - t]);
                v
            })
            .collect();
        layers.push(LayerTrace { inputs, fwd, bwd });
    }

    let top = layers.last().expect("at least one layer");
    let mut aggregate = Vec::with_capacity(2 * hidden);
    aggregate.extend_from_slice(&top.fwd.h[steps - 1]);
    aggregate.extend_from_slice(&top.bwd.h[steps - 1]);
    let z = dot(&params.weights.head_w, &aggregate) + params.weights.head_b;
    Ok(ForwardTrace {
        layers,
        aggregate,
        z,
    })
}

/// BPTT through one direction. `dh_out[s]` is the gradient arriving at the
/// state produced by processing step s from outside the recurrence.
/// Gradients w.r.t. the (masked) inputs accumulate into `d_inputs` by
/// sequence position.
fn backprop_direction(
    cell: &CellWeights,
    grads: &mut CellWeights,
    inputs: &[Vec<f64>],
    trace: &DirectionTrace,
    reversed: bool,
    dh_out: &[Vec<f64>],
    d_inputs: &mut [Vec<f64>],
) {
    let steps = inputs.len();
    let hidden = cell.b_update.len();
    let zero = vec![0.0; hidden];
    let mut g_h = vec![0.0; hidden];
    for s in (0..steps).rev() {
        for i in 0..hidden {
            g_h[i] += dh_out[s][i];
        }
        let idx = if reversed { steps - 1 - s } else { s };
        let x = &inputs[idx];
        let h_prev = if s == 0 { &zero } else { &trace.h[s - 1] };
        let u = &trace.u[s];
        let c = &trace.c[s];

        let mut da_u = vec![0.0; hidden];
        let mut da_c = vec![0.0; hidden];
        for i in 0..hidden {
            let du = g_h[i] * (c[i] - h_prev[i]);
            let dc = g_h[i] * u[i];
            da_u[i] = du * u[i] * (1.0 - u[i]);
            da_c[i] = dc * (1.0 - c[i] * c[i]);
        }

        grads.w_in_update.add_outer(&da_u, x);
        grads.w_rec_update.add_outer(&da_u, h_prev);
        grads.w_in_cand.add_outer(&da_c, x);
        grads.w_rec_cand.add_outer(&da_c, h_prev);
        for i in 0..hidden {
            grads.b_update[i] += da_u[i];
            grads.b_cand[i] += da_c[i];
        }

        cell.w_in_update.add_t_matvec(&da_u, &mut d_inputs[idx]);
        cell.w_in_cand.add_t_matvec(&da_c, &mut d_inputs[idx]);

        let mut g_prev = vec![0.0; hidden];
        for i in 0..hidden {
            g_prev[i] = g_h[i] * (1.0 - u[i]);
        }
        cell.w_rec_update.add_t_matvec(&da_u, &mut g_prev);
        cell.w_rec_cand.add_t_matvec(&da_c, &mut g_prev);
        g_h = g_prev;
    }
}

/// Backprop from a head pre-activation gradient down to every weight.
pub(crate) fn backward_trace(
    params: &ModelParams,
    trace: &ForwardTrace,
    masks: Option<&DropoutMasks>,
    dz: f64,
) -> WeightSet {
    let hidden = params.config.hidden_size;
    let num_layers = params.weights.layers.len();
    let steps = trace.layers[0].inputs.len();
    let mut grads = params.weights.zeros_like();

    grads.head_b = dz;
    for (g, a) in grads.head_w.iter_mut().zip(trace.aggregate.iter()) {
        *g = dz * a;
    }

    // Gradient flowing into each layer's per-step outputs, stored as
    // (forward part by processing step, backward part by processing step).
    let mut dh_fwd = vec![vec![0.0; hidden]; steps];
    let mut dh_bwd = vec![vec![0.0; hidden]; steps];
    for i in 0..hidden {
        dh_fwd[steps - 1][i] = dz * params.weights.head_w[i];
        dh_bwd[steps - 1][i] = dz * params.weights.head_w[hidden + i];
    }

    for l in (0..num_layers).rev() {
        let layer = &params.weights.layers[l];
        let trace_l = &trace.layers[l];
        let in_dim = trace_l.inputs[0].len();
        let mut d_inputs = vec![vec![0.0; in_dim]; steps];

        backprop_direction(
            &layer.forward,
            &mut grads.layers[l].forward,
            &trace_l.inputs,
            &trace_l.fwd,
            false,
            &dh_fwd,
            &mut d_inputs,
        );
        backprop_direction(
            &layer.backward,
            &mut grads.layers[l].backward,
            &trace_l.inputs,
            &trace_l.bwd,
            true,
            &dh_bwd,
            &mut d_inputs,
        );

        if l == 0 {
            // Inputs of the bottom layer are feature constants: their
            // gradient is dropped here by design.
            break;
        }

        // Undo the dropout scaling, then route each position's gradient to
        // the producing direction of the layer below.
        let mut next_fwd = vec![vec![0.0; hidden]; steps];
        let mut next_bwd = vec![vec![0.0; hidden]; steps];
        for (t, d_in) in d_inputs.iter().enumerate() {
            for (unit, &g) in d_in.iter().enumerate() {
                let g = match masks {
                    Some(m) => g * m.masks[l][t][unit],
                    None => g,
                };
                if unit < hidden {
                    next_fwd[t][unit] += g;
                } else {
                    next_bwd[steps - 1 - t][unit - hidden] += g;
                }
            }
        }
        dh_fwd = next_fwd;
        dh_bwd = next_bwd;
    }
    grads
}

/// Reduce a feature sequence to the fixed-size vector fed to the head:
/// the concatenated final states of the top layer's two directions.
pub fn forward_aggregate(params: &ModelParams, seq: &SentenceFeatureSequence) -> Result<Vec<f64>> {
    Ok(forward_trace(params, seq, None)?.aggregate)
}

/// Probability that the sample is good. Requires a classification head.
pub fn classify(params: &ModelParams, seq: &SentenceFeatureSequence) -> Result<f64> {
    if params.config.head != HeadKind::Classification {
        return Err(QcError::Config(
            "classify requires a classification head".into(),
        ));
    }
    Ok(sigmoid(forward_trace(params, seq, None)?.z))
}

/// Predicted edit rate, clamped to be non-negative at inference. Requires
/// a regression head.
pub fn regress(params: &ModelParams, seq: &SentenceFeatureSequence) -> Result<f64> {
    if params.config.head != HeadKind::Regression {
        return Err(QcError::Config("regress requires a regression head".into()));
    }
    Ok(forward_trace(params, seq, None)?.z.max(0.0))
}

/// Scalar loss between a prediction and a gold value.
///
/// Cross-entropy takes a probability strictly inside (0, 1); the regression
/// losses take unconstrained reals.
pub fn loss(prediction: f64, gold: f64, kind: LossKind) -> Result<f64> {
    match kind {
        LossKind::CrossEntropy => {
            if !(prediction > 0.0 && prediction < 1.0) {
                return Err(QcError::Domain(format!(
                    "cross-entropy needs a probability in (0, 1), got {prediction}"
                )));
            }
            Ok(-(gold * prediction.ln() + (1.0 - gold) * (1.0 - prediction).ln()))
        }
        LossKind::Mae => Ok((prediction - gold).abs()),
        LossKind::Mse => Ok((prediction - gold) * (prediction - gold)),
    }
}

/// Training loss as a function of the head pre-activation. Numerically
/// stable for saturated logistic outputs; `positive_weight` scales the
/// positive-class term of the cross-entropy.
pub(crate) fn loss_from_z(z: f64, gold: f64, kind: LossKind, positive_weight: f64) -> f64 {
    match kind {
        LossKind::CrossEntropy => {
            positive_weight * gold * softplus(-z) + (1.0 - gold) * softplus(z)
        }
        LossKind::Mae => (z - gold).abs(),
        LossKind::Mse => (z - gold) * (z - gold),
    }
}

/// Derivative of [`loss_from_z`] w.r.t. z. The MAE subgradient at zero
/// error is taken as zero.
pub(crate) fn dloss_dz(z: f64, gold: f64, kind: LossKind, positive_weight: f64) -> f64 {
    match kind {
        LossKind::CrossEntropy => {
            let p = sigmoid(z);
            (1.0 - gold) * p - positive_weight * gold * (1.0 - p)
        }
        LossKind::Mae => {
            let d = z - gold;
            if d > 0.0 {
                1.0
            } else if d < 0.0 {
                -1.0
            } else {
                0.0
            }
        }
        LossKind::Mse => 2.0 * (z - gold),
    }
}

/// Loss of one sample under the model's training objective (no dropout).
/// This is exactly the function whose gradient [`backward`] returns.
pub fn sample_loss(
    params: &ModelParams,
    seq: &SentenceFeatureSequence,
    gold: f64,
    kind: LossKind,
) -> Result<f64> {
    let trace = forward_trace(params, seq, None)?;
    Ok(loss_from_z(
        trace.z,
        gold,
        kind,
        params.config.positive_weight,
    ))
}

/// Exact gradient of [`sample_loss`] w.r.t. every weight. Features are
/// constants: the returned set carries one entry per weight and nothing
/// else.
pub fn backward(
    params: &ModelParams,
    seq: &SentenceFeatureSequence,
    gold: f64,
    kind: LossKind,
) -> Result<WeightSet> {
    let trace = forward_trace(params, seq, None)?;
    let dz = dloss_dz(trace.z, gold, kind, params.config.positive_weight);
    Ok(backward_trace(params, &trace, None, dz))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::config::RegressionLoss;

    fn layout(dim: usize) -> FeatureLayout {
        FeatureLayout {
            z_left: dim,
            z_right: 0,
            e_prev: 0,
            e_next: 0,
            f_mm: 0,
        }
    }

    fn seq(vectors: Vec<Vec<f64>>) -> SentenceFeatureSequence {
        SentenceFeatureSequence {
            sample_id: 0,
            dim: vectors[0].len(),
            vectors,
        }
    }

    fn small_config(hidden: usize, layers: usize) -> ModelConfig {
        ModelConfig {
            hidden_size: hidden,
            num_layers: layers,
            ..ModelConfig::default()
        }
    }

    #[test]
    fn zero_weights_give_zero_aggregate() {
        let params = ModelParams::zeros(small_config(3, 2), layout(4)).unwrap();
        let s = seq(vec![vec![1.0, -2.0, 0.5, 3.0], vec![0.1, 0.2, 0.3, 0.4]]);
        let agg = forward_aggregate(&params, &s).unwrap();
        assert_eq!(agg, vec![0.0; 6]);
    }

    #[test]
    fn aggregate_length_is_twice_hidden() {
        let params = ModelParams::init(small_config(5, 1), layout(3)).unwrap();
        for len in [1, 2, 7] {
            let s = seq((0..len).map(|i| vec![i as f64, 0.5, -0.5]).collect());
            assert_eq!(forward_aggregate(&params, &s).unwrap().len(), 10);
        }
    }

    #[test]
    fn empty_sequence_rejected() {
        let params = ModelParams::init(small_config(2, 1), layout(3)).unwrap();
        let s = SentenceFeatureSequence {
            sample_id: 9,
            dim: 3,
            vectors: vec![],
        };
        assert!(matches!(
            forward_aggregate(&params, &s),
            Err(QcError::EmptySentence(_))
        ));
    }

    #[test]
    fn dim_mismatch_rejected() {
        let params = ModelParams::init(small_config(2, 1), layout(3)).unwrap();
        let s = seq(vec![vec![1.0, 2.0]]);
        assert!(matches!(
            forward_aggregate(&params, &s),
            Err(QcError::Shape(_))
        ));
    }

    #[test]
    fn single_token_directions_agree_under_shared_weights() {
        // With the backward cell set equal to the forward cell, a one-token
        // sequence makes both directions perform the identical step.
        let mut params = ModelParams::init(small_config(3, 1), layout(2)).unwrap();
        params.weights.layers[0].backward = params.weights.layers[0].forward.clone();
        let s = seq(vec![vec![0.3, -0.7]]);
        let agg = forward_aggregate(&params, &s).unwrap();
        assert_eq!(agg[..3], agg[3..]);
    }

    #[test]
    fn single_step_matches_hand_computation() {
        // One hidden unit, one input, one token: h = u * c with
        // u = sigmoid(w_u x + b_u), c = tanh(w_c x + b_c).
        let mut params = ModelParams::zeros(small_config(1, 1), layout(1)).unwrap();
        let cell = &mut params.weights.layers[0].forward;
        cell.w_in_update.data[0] = 0.5;
        cell.b_update[0] = -0.2;
        cell.w_in_cand.data[0] = -1.0;
        cell.b_cand[0] = 0.3;
        let x = 0.8;
        let s = seq(vec![vec![x]]);
        let agg = forward_aggregate(&params, &s).unwrap();
        let u = sigmoid(0.5 * x - 0.2);
        let c = (-x + 0.3f64).tanh();
        assert!((agg[0] - u * c).abs() < 1e-15);
        // Backward cell is all zeros: u = 0.5, c = 0, h = 0.
        assert_eq!(agg[1], 0.0);
    }

    #[test]
    fn classify_is_half_for_zero_weights() {
        let params = ModelParams::zeros(small_config(4, 1), layout(2)).unwrap();
        let s = seq(vec![vec![0.4, -0.9], vec![2.0, 1.0]]);
        assert_eq!(classify(&params, &s).unwrap(), 0.5);
    }

    #[test]
    fn classify_stays_strictly_inside_unit_interval() {
        let config = small_config(4, 2);
        let params = ModelParams::init(config, layout(3)).unwrap();
        let s = seq(vec![vec![5.0, -3.0, 2.0]; 4]);
        let p = classify(&params, &s).unwrap();
        assert!(p > 0.0 && p < 1.0);
    }

    #[test]
    fn classify_monotone_in_head_bias() {
        let mut params = ModelParams::init(small_config(3, 1), layout(2)).unwrap();
        let s = seq(vec![vec![0.2, 0.6], vec![-0.4, 0.1]]);
        let p0 = classify(&params, &s).unwrap();
        params.weights.head_b += 1.0;
        let p1 = classify(&params, &s).unwrap();
        assert!(p1 > p0);
    }

    #[test]
    fn heads_enforce_their_kind() {
        let params = ModelParams::init(small_config(2, 1), layout(2)).unwrap();
        let s = seq(vec![vec![0.1, 0.2]]);
        assert!(classify(&params, &s).is_ok());
        assert!(matches!(regress(&params, &s), Err(QcError::Config(_))));
    }

    #[test]
    fn regress_clamps_to_non_negative() {
        let mut config = small_config(2, 1);
        config.head = HeadKind::Regression;
        let mut params = ModelParams::zeros(config, layout(2)).unwrap();
        params.weights.head_b = -3.0;
        let s = seq(vec![vec![0.1, 0.2]]);
        assert_eq!(regress(&params, &s).unwrap(), 0.0);
    }

    #[test]
    fn loss_fixed_values() {
        let ce = loss(0.5, 1.0, LossKind::CrossEntropy).unwrap();
        assert!((ce - std::f64::consts::LN_2).abs() < 1e-9);
        assert!((loss(0.2, 0.0, LossKind::Mae).unwrap() - 0.2).abs() < 1e-15);
        assert!((loss(0.2, 0.0, LossKind::Mse).unwrap() - 0.04).abs() < 1e-15);
        assert_eq!(loss(0.7, 0.7, LossKind::Mae).unwrap(), 0.0);
        assert_eq!(loss(0.7, 0.7, LossKind::Mse).unwrap(), 0.0);
    }

    #[test]
    fn cross_entropy_domain_is_open() {
        assert!(matches!(
            loss(0.0, 1.0, LossKind::CrossEntropy),
            Err(QcError::Domain(_))
        ));
        assert!(matches!(
            loss(1.0, 1.0, LossKind::CrossEntropy),
            Err(QcError::Domain(_))
        ));
    }

    #[test]
    fn stable_loss_matches_public_loss() {
        for z in [-3.0, -0.5, 0.0, 0.7, 4.0] {
            for gold in [0.0, 1.0] {
                let p = sigmoid(z);
                let public = loss(p, gold, LossKind::CrossEntropy).unwrap();
                let stable = loss_from_z(z, gold, LossKind::CrossEntropy, 1.0);
                assert!((public - stable).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn cross_entropy_head_bias_gradient_is_p_minus_g() {
        let params = ModelParams::init(small_config(3, 1), layout(2)).unwrap();
        let s = seq(vec![vec![0.4, -0.2], vec![0.9, 0.3]]);
        let trace = forward_trace(&params, &s, None).unwrap();
        let p = sigmoid(trace.z);
        for gold in [0.0, 1.0] {
            let grads = backward(&params, &s, gold, LossKind::CrossEntropy).unwrap();
            assert!((grads.head_b - (p - gold)).abs() < 1e-12);
        }
    }

    #[test]
    fn mse_gradient_vanishes_at_fit() {
        let mut config = small_config(2, 1);
        config.head = HeadKind::Regression;
        config.regression_loss = RegressionLoss::Mse;
        let params = ModelParams::init(config, layout(2)).unwrap();
        let s = seq(vec![vec![0.5, -0.5]]);
        let trace = forward_trace(&params, &s, None).unwrap();
        let grads = backward(&params, &s, trace.z, LossKind::Mse).unwrap();
        let mut max_abs: f64 = 0.0;
        let mut probe = grads.clone();
        probe.visit_mut(&mut |w| max_abs = max_abs.max(w.abs()));
        assert_eq!(max_abs, 0.0);
    }

    #[test]
    fn gradient_matches_finite_differences_small_model() {
        // Spot check; the acceptance suite runs the full randomized sweep.
        let mut config = small_config(3, 2);
        config.seed = 5;
        let params = ModelParams::init(config, layout(4)).unwrap();
        let s = seq(vec![
            vec![0.3, -0.8, 0.2, 0.5],
            vec![-0.1, 0.4, 0.9, -0.6],
            vec![0.7, 0.0, -0.3, 0.2],
        ]);
        let gold = 1.0;
        let kind = LossKind::CrossEntropy;
        let analytic = backward(&params, &s, gold, kind).unwrap().to_flat();
        let base = params.weights.to_flat();
        let step = 1e-5;
        for (i, &g) in analytic.iter().enumerate() {
            let mut plus = params.clone();
            let mut minus = params.clone();
            let mut flat = base.clone();
            flat[i] += step;
            plus.weights.set_from_flat(&flat).unwrap();
            flat[i] = base[i] - step;
            minus.weights.set_from_flat(&flat).unwrap();
            let numeric = (sample_loss(&plus, &s, gold, kind).unwrap()
                - sample_loss(&minus, &s, gold, kind).unwrap())
                / (2.0 * step);
            // The floor keeps the comparison meaningful where the central
            // difference bottoms out (noise ~1e-11 at this step size).
            let denom = g.abs().max(numeric.abs()).max(1e-6);
            assert!(
                ((g - numeric) / denom).abs() < 1e-4,
                "param {i}: analytic {g}, numeric {numeric}"
            );
        }
    }

    #[test]
    fn gradient_set_has_exactly_one_entry_per_weight() {
        let params = ModelParams::init(small_config(3, 2), layout(4)).unwrap();
        let s = seq(vec![vec![0.1, 0.2, 0.3, 0.4]]);
        let grads = backward(&params, &s, 1.0, LossKind::CrossEntropy).unwrap();
        assert_eq!(grads.param_count(), params.weights.param_count());
    }

    #[test]
    fn dropout_masks_affect_training_path_only() {
        let mut config = small_config(3, 2);
        config.dropout = 0.5;
        let params = ModelParams::init(config.clone(), layout(4)).unwrap();
        let s = seq(vec![vec![0.3, -0.8, 0.2, 0.5]; 3]);
        let clean = forward_trace(&params, &s, None).unwrap().z;
        let mut rng = Rng::new(99);
        let masks = DropoutMasks::sample(&config, &params.layout, 3, &mut rng);
        let masked = forward_trace(&params, &s, Some(&masks)).unwrap().z;
        assert_ne!(clean, masked);
        // Inference ignores dropout entirely.
        assert_eq!(classify(&params, &s).unwrap(), sigmoid(clean));
    }

    #[test]
    fn masked_gradient_matches_masked_finite_differences() {
        let mut config = small_config(2, 2);
        config.dropout = 0.4;
        config.seed = 11;
        let params = ModelParams::init(config.clone(), layout(3)).unwrap();
        let s = seq(vec![vec![0.5, -0.2, 0.8], vec![-0.4, 0.3, 0.1]]);
        let mut rng = Rng::new(4);
        let masks = DropoutMasks::sample(&config, &params.layout, 2, &mut rng);

        let loss_with = |p: &ModelParams| {
            let trace = forward_trace(p, &s, Some(&masks)).unwrap();
            loss_from_z(trace.z, 1.0, LossKind::CrossEntropy, 1.0)
        };
        let trace = forward_trace(&params, &s, Some(&masks)).unwrap();
        let dz = dloss_dz(trace.z, 1.0, LossKind::CrossEntropy, 1.0);
        let analytic = backward_trace(&params, &trace, Some(&masks), dz).to_flat();

        let base = params.weights.to_flat();
        let step = 1e-5;
        for (i, &g) in analytic.iter().enumerate() {
            let mut plus = params.clone();
            let mut minus = params.clone();
            let mut flat = base.clone();
            flat[i] += step;
            plus.weights.set_from_flat(&flat).unwrap();
            flat[i] = base[i] - step;
            minus.weights.set_from_flat(&flat).unwrap();
            let numeric = (loss_with(&plus) - loss_with(&minus)) / (2.0 * step);
            let denom = g.abs().max(numeric.abs()).max(1e-6);
            assert!(
                ((g - numeric) / denom).abs() < 1e-4,
                "param {i}: analytic {g}, numeric {numeric}"
            );
        }
    }

    #[test]
    fn aggregate_is_head_independent() {
        let c_cls = small_config(3, 1);
        let mut c_reg = c_cls.clone();
        c_reg.head = HeadKind::Regression;
        let p_cls = ModelParams::init(c_cls, layout(2)).unwrap();
        let mut p_reg = ModelParams::init(c_reg, layout(2)).unwrap();
        p_reg.weights = p_cls.weights.clone();
        let s = seq(vec![vec![0.3, 0.9], vec![-0.2, 0.4]]);
        assert_eq!(
            forward_aggregate(&p_cls, &s).unwrap(),
            forward_aggregate(&p_reg, &s).unwrap()
        );
    }
}
