//! Classification and regression metrics, centered on recall at a
//! precision floor.
//!
//! The headline metric is `r_at_p`: the highest recall among operating
//! points whose precision meets a threshold `t`. Operating points come from
//! sweeping a decision threshold over the distinct classifier scores with
//! the rule `score >= threshold`; tied scores enter together. Precision is
//! undefined (not 1.0) when nothing is predicted positive, and such points
//! never qualify. When no operating point reaches the precision floor the
//! metric is 0.0.
//!
//! `regression_threshold_sweep` is the baseline that thresholds a predicted
//! edit rate instead: a sample is called good when its prediction is at or
//! below a cutoff swept over a fixed grid.

use crate::error::{QcError, Result};

/// Precision/recall at one decision threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatingPoint {
    pub threshold: f64,
    pub predicted_positive: usize,
    pub true_positive: usize,
    /// `None` when nothing is predicted positive.
    pub precision: Option<f64>,
    pub recall: f64,
}

/// Operating points at every distinct score value, descending threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct PrCurve {
    pub points: Vec<OperatingPoint>,
}

/// 2x2 confusion counts for the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConfusionCounts {
    pub true_positive: usize,
    pub false_positive: usize,
    pub false_negative: usize,
    pub true_negative: usize,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.true_positive + self.false_positive + self.false_negative + self.true_negative
    }
}

fn validate_scored(scores: &[f64], labels: &[bool]) -> Result<usize> {
    if scores.len() != labels.len() {
        return Err(QcError::Shape(format!(
            "{} scores vs {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.is_empty() {
        return Err(QcError::Shape("empty evaluation set".into()));
    }
    let positives = labels.iter().filter(|&&l| l).count();
    if positives == 0 {
        return Err(QcError::NoPositives);
    }
    Ok(positives)
}

/// Precision/recall curve over the distinct score values.
pub fn pr_curve(scores: &[f64], labels: &[bool]) -> Result<PrCurve> {
    let positives = validate_scored(scores, labels)?;

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut points = Vec::new();
    let mut tp = 0usize;
    let mut predicted = 0usize;
    let mut i = 0;
    while i < order.len() {
        let threshold = scores[order[i]];
        // Tied scores cross the threshold together.
        while i < order.len() && scores[order[i]] == threshold {
            predicted += 1;
            if labels[order[i]] {
                tp += 1;
            }
            i += 1;
        }
        points.push(OperatingPoint {
            threshold,
            predicted_positive: predicted,
            true_positive: tp,
            precision: Some(tp as f64 / predicted as f64),
            recall: tp as f64 / positives as f64,
        });
    }
    Ok(PrCurve { points })
}

/// Maximum recall among operating points whose precision is at least `t`;
/// 0.0 when no point qualifies.
pub fn r_at_p(scores: &[f64], labels: &[bool], t: f64) -> Result<f64> {
    let curve = pr_curve(scores, labels)?;
    Ok(curve
        .points
        .iter()
        .filter(|p| p.precision.is_some_and(|prec| prec >= t))
        .map(|p| p.recall)
        .fold(0.0, f64::max))
}

/// Confusion counts at a fixed threshold with the `score >= threshold` rule.
pub fn confusion(scores: &[f64], labels: &[bool], threshold: f64) -> Result<ConfusionCounts> {
    validate_scored(scores, labels)?;
    let mut counts = ConfusionCounts {
        true_positive: 0,
        false_positive: 0,
        false_negative: 0,
        true_negative: 0,
    };
    for (&score, &label) in scores.iter().zip(labels.iter()) {
        match (score >= threshold, label) {
            (true, true) => counts.true_positive += 1,
            (true, false) => counts.false_positive += 1,
            (false, true) => counts.false_negative += 1,
            (false, false) => counts.true_negative += 1,
        }
    }
    Ok(counts)
}

/// (precision, recall, F1) at a fixed threshold. Precision is `None` with
/// zero predictions; F1 falls back to 0.0 whenever precision is undefined
/// or precision + recall is zero.
pub fn f1(scores: &[f64], labels: &[bool], threshold: f64) -> Result<(Option<f64>, f64, f64)> {
    let c = confusion(scores, labels, threshold)?;
    let predicted = c.true_positive + c.false_positive;
    let positives = c.true_positive + c.false_negative;
    let precision = if predicted > 0 {
        Some(c.true_positive as f64 / predicted as f64)
    } else {
        None
    };
    let recall = c.true_positive as f64 / positives as f64;
    let f1 = match precision {
        Some(p) if p + recall > 0.0 => 2.0 * p * recall / (p + recall),
        _ => 0.0,
    };
    Ok((precision, recall, f1))
}

fn validate_paired(preds: &[f64], golds: &[f64], min_len: usize) -> Result<()> {
    if preds.len() != golds.len() {
        return Err(QcError::Shape(format!(
            "{} predictions vs {} golds",
            preds.len(),
            golds.len()
        )));
    }
    if preds.len() < min_len {
        return Err(QcError::Shape(format!(
            "need at least {min_len} pairs, got {}",
            preds.len()
        )));
    }
    Ok(())
}

pub fn mae(preds: &[f64], golds: &[f64]) -> Result<f64> {
    validate_paired(preds, golds, 1)?;
    let sum: f64 = preds
        .iter()
        .zip(golds.iter())
        .map(|(p, g)| (p - g).abs())
        .sum();
    Ok(sum / preds.len() as f64)
}

pub fn rmse(preds: &[f64], golds: &[f64]) -> Result<f64> {
    validate_paired(preds, golds, 1)?;
    let sum: f64 = preds
        .iter()
        .zip(golds.iter())
        .map(|(p, g)| (p - g) * (p - g))
        .sum();
    Ok((sum / preds.len() as f64).sqrt())
}

/// Sample Pearson correlation. Errors when either side has zero variance.
pub fn pearson(preds: &[f64], golds: &[f64]) -> Result<f64> {
    validate_paired(preds, golds, 2)?;
    let n = preds.len() as f64;
    let mean_p = preds.iter().sum::<f64>() / n;
    let mean_g = golds.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var_p = 0.0;
    let mut var_g = 0.0;
    for (p, g) in preds.iter().zip(golds.iter()) {
        let dp = p - mean_p;
        let dg = g - mean_g;
        cov += dp * dg;
        var_p += dp * dp;
        var_g += dg * dg;
    }
    if var_p == 0.0 || var_g == 0.0 {
        return Err(QcError::DegenerateVariance);
    }
    Ok(cov / (var_p.sqrt() * var_g.sqrt()))
}

/// Result of thresholding a predicted edit rate at each grid cutoff.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdSweep {
    /// One point per cutoff, ascending; `threshold` holds the cutoff and a
    /// sample is called good when its prediction is `<=` that value.
    pub points: Vec<OperatingPoint>,
    /// Highest defined precision across the sweep.
    pub max_precision: Option<f64>,
}

impl ThresholdSweep {
    /// Maximum recall among sweep points with precision at least `t`.
    pub fn r_at_p(&self, t: f64) -> f64 {
        self.points
            .iter()
            .filter(|p| p.precision.is_some_and(|prec| prec >= t))
            .map(|p| p.recall)
            .fold(0.0, f64::max)
    }
}

/// Sweep a good/bad cutoff over predicted edit rates.
///
/// For each cutoff tau in `[lo, hi]` stepped by `step`, a sample is
/// classified good when its predicted rate is at most tau; precision and
/// recall are reported for the good class.
pub fn regression_threshold_sweep(
    predicted: &[f64],
    labels: &[bool],
    lo: f64,
    hi: f64,
    step: f64,
) -> Result<ThresholdSweep> {
    let positives = validate_scored(predicted, labels)?;
    if step <= 0.0 || hi < lo {
        return Err(QcError::Config(format!(
            "bad sweep grid [{lo}, {hi}] step {step}"
        )));
    }

    let mut points = Vec::new();
    let mut max_precision: Option<f64> = None;
    let steps = ((hi - lo) / step).round() as usize;
    for k in 0..=steps {
        let tau = lo + step * k as f64;
        let mut tp = 0usize;
        let mut predicted_positive = 0usize;
        for (&pred, &label) in predicted.iter().zip(labels.iter()) {
            if pred <= tau {
                predicted_positive += 1;
                if label {
                    tp += 1;
                }
            }
        }
        let precision = if predicted_positive > 0 {
            Some(tp as f64 / predicted_positive as f64)
        } else {
            None
        };
        if let Some(p) = precision {
            max_precision = Some(max_precision.map_or(p, |m: f64| m.max(p)));
        }
        points.push(OperatingPoint {
            threshold: tau,
            predicted_positive,
            true_positive: tp,
            precision,
            recall: tp as f64 / positives as f64,
        });
    }
    Ok(ThresholdSweep {
        points,
        max_precision,
    })
}
