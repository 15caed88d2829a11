//! Mini-batch gradient-descent training with best-dev-epoch selection.
//!
//! A single seed drives initialization, epoch shuffling, and dropout masks,
//! so a (config, data) pair always reproduces the same run. The dev set is
//! scored after every epoch: classification by recall at the configured
//! precision floor, regression by mean absolute error of the clamped
//! predictions. The returned weights are the snapshot from the best epoch.

use std::fmt::Write as _;

use crate::error::{QcError, Result};
use crate::features::{FeatureLayout, SentenceFeatureSequence};
use crate::metrics;
use crate::rng::Rng;

use super::config::{HeadKind, ModelConfig};
use super::math::sigmoid;
use super::net::{
    backward_trace, dloss_dz, forward_trace, loss_from_z, regress, DropoutMasks, ModelParams,
};

/// Per-epoch history of one training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Mean training loss per epoch.
    pub train_loss: Vec<f64>,
    /// Dev metric per epoch: recall at the precision floor for
    /// classification, MAE for regression.
    pub dev_metric: Vec<f64>,
    /// Epoch whose weights were kept: argmax of the dev metric for
    /// classification, argmin for regression; earliest epoch on ties.
    pub best_epoch: usize,
}

impl TrainReport {
    /// Stable text rendering, used for run-to-run byte comparison.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (epoch, (loss, dev)) in self
            .train_loss
            .iter()
            .zip(self.dev_metric.iter())
            .enumerate()
        {
            writeln!(out, "epoch\t{epoch}\ttrain_loss\t{loss}\tdev_metric\t{dev}")
                .expect("string write");
        }
        writeln!(out, "best_epoch\t{}", self.best_epoch).expect("string write");
        out
    }
}

fn validate_dataset(
    layout: &FeatureLayout,
    seqs: &[SentenceFeatureSequence],
    targets: &[f64],
    what: &str,
) -> Result<()> {
    if seqs.is_empty() {
        return Err(QcError::EmptySplit);
    }
    if seqs.len() != targets.len() {
        return Err(QcError::Shape(format!(
            "{what}: {} sequences vs {} targets",
            seqs.len(),
            targets.len()
        )));
    }
    for seq in seqs {
        if seq.dim != layout.dim() {
            return Err(QcError::Shape(format!(
                "{what}: sample {} has dim {}, expected {}",
                seq.sample_id,
                seq.dim,
                layout.dim()
            )));
        }
        if seq.vectors.is_empty() {
            return Err(QcError::EmptySentence(format!(
                "{what}: sample {}",
                seq.sample_id
            )));
        }
    }
    Ok(())
}

/// Dev-set score under the config's objective. Classification returns
/// recall at the precision floor (higher is better); regression returns
/// MAE of clamped predictions (lower is better).
pub fn evaluate_dev(
    params: &ModelParams,
    seqs: &[SentenceFeatureSequence],
    targets: &[f64],
) -> Result<f64> {
    match params.config.head {
        HeadKind::Classification => {
            let mut scores = Vec::with_capacity(seqs.len());
            for seq in seqs {
                scores.push(sigmoid(forward_trace(params, seq, None)?.z));
            }
            let labels: Vec<bool> = targets.iter().map(|&t| t > 0.5).collect();
            metrics::r_at_p(&scores, &labels, params.config.precision_target)
        }
        HeadKind::Regression => {
            let mut preds = Vec::with_capacity(seqs.len());
            for seq in seqs {
                preds.push(regress(params, seq)?);
            }
            metrics::mae(&preds, targets)
        }
    }
}

/// Train a model from scratch.
///
/// `targets` are 0/1 for classification (1 = good) and edit rates for
/// regression. Returns the parameters of the best dev epoch together with
/// the full per-epoch report.
pub fn train(
    config: &ModelConfig,
    layout: FeatureLayout,
    train_seqs: &[SentenceFeatureSequence],
    train_targets: &[f64],
    dev_seqs: &[SentenceFeatureSequence],
    dev_targets: &[f64],
) -> Result<(ModelParams, TrainReport)> {
    config.validate()?;
    validate_dataset(&layout, train_seqs, train_targets, "train")?;
    validate_dataset(&layout, dev_seqs, dev_targets, "dev")?;

    let mut rng = Rng::new(config.seed);
    let mut params = ModelParams::init_with_rng(config.clone(), layout, &mut rng);
    let kind = config.training_loss();
    let use_dropout = config.dropout > 0.0;

    let mut order: Vec<usize> = (0..train_seqs.len()).collect();
    let mut train_loss = Vec::with_capacity(config.epochs);
    let mut dev_metric = Vec::with_capacity(config.epochs);
    let mut best_epoch = 0usize;
    let mut best_metric = f64::NAN;
    let mut best_weights = params.weights.clone();

    // Per-sample losses, summed in sample order so the reported epoch loss
    // does not depend on the shuffle.
    let mut sample_losses = vec![0.0; train_seqs.len()];

    for epoch in 0..config.epochs {
        rng.shuffle(&mut order);
        for (batch_idx, batch) in order.chunks(config.batch_size).enumerate() {
            let mut grads = params.weights.zeros_like();
            let mut batch_loss = 0.0;
            for &i in batch {
                let seq = &train_seqs[i];
                let gold = train_targets[i];
                let masks = if use_dropout {
                    Some(DropoutMasks::sample(
                        config,
                        &params.layout,
                        seq.vectors.len(),
                        &mut rng,
                    ))
                } else {
                    None
                };
                let trace = forward_trace(&params, seq, masks.as_ref())?;
                let loss = loss_from_z(trace.z, gold, kind, config.positive_weight);
                batch_loss += loss;
                sample_losses[i] = loss;
                let dz = dloss_dz(trace.z, gold, kind, config.positive_weight);
                let sample_grads = backward_trace(&params, &trace, masks.as_ref(), dz);
                grads.add_scaled(&sample_grads, 1.0);
            }
            let scale = 1.0 / batch.len() as f64;
            if !(batch_loss * scale).is_finite() {
                return Err(QcError::Divergence {
                    epoch,
                    batch: batch_idx,
                });
            }
            params
                .weights
                .add_scaled(&grads, -config.learning_rate * scale);
        }
        let mean_loss = sample_losses.iter().sum::<f64>() / train_seqs.len() as f64;
        if !mean_loss.is_finite() || !params.weights.all_finite() {
            return Err(QcError::Divergence { epoch, batch: 0 });
        }
        train_loss.push(mean_loss);

        let metric = evaluate_dev(&params, dev_seqs, dev_targets)?;
        dev_metric.push(metric);
        let improved = match config.head {
            HeadKind::Classification => best_metric.is_nan() || metric > best_metric,
            HeadKind::Regression => best_metric.is_nan() || metric < best_metric,
        };
        if improved {
            best_metric = metric;
            best_epoch = epoch;
            best_weights = params.weights.clone();
        }
    }

    params.weights = best_weights;
    Ok((
        params,
        TrainReport {
            train_loss,
            dev_metric,
            best_epoch,
        },
    ))
}
