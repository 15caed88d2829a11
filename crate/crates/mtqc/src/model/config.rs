//! Model and training configuration.

use std::fmt;
use std::str::FromStr;

use crate::error::{QcError, Result};

/// Output-layer choice: binary quality classification or edit-rate
/// regression.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeadKind {
    Classification,
    Regression,
}

impl fmt::Display for HeadKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HeadKind::Classification => write!(f, "classification"),
            HeadKind::Regression => write!(f, "regression"),
        }
    }
}

impl FromStr for HeadKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "classification" => Ok(HeadKind::Classification),
            "regression" => Ok(HeadKind::Regression),
            other => Err(format!("unknown head {other:?}")),
        }
    }
}

/// Loss used when the head is a regression layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegressionLoss {
    Mae,
    Mse,
}

impl fmt::Display for RegressionLoss {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RegressionLoss::Mae => write!(f, "mae"),
            RegressionLoss::Mse => write!(f, "mse"),
        }
    }
}

impl FromStr for RegressionLoss {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "mae" => Ok(RegressionLoss::Mae),
            "mse" => Ok(RegressionLoss::Mse),
            other => Err(format!("unknown regression loss {other:?}")),
        }
    }
}

/// Loss selector for the scalar loss/gradient operations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    CrossEntropy,
    Mae,
    Mse,
}

/// Everything that determines a training run besides the data.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub head: HeadKind,
    pub regression_loss: RegressionLoss,
    pub num_layers: usize,
    pub hidden_size: usize,
    /// Probability of dropping a layer-input unit during training.
    pub dropout: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Optional weight on the positive (good) class in the cross-entropy
    /// loss; 1.0 leaves the loss unweighted.
    pub positive_weight: f64,
    /// Precision floor used for the per-epoch dev metric when classifying.
    pub precision_target: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            head: HeadKind::Classification,
            regression_loss: RegressionLoss::Mse,
            num_layers: 1,
            hidden_size: 64,
            dropout: 0.0,
            learning_rate: 1e-5,
            epochs: 30,
            batch_size: 32,
            seed: 1,
            positive_weight: 1.0,
            precision_target: 0.9,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_layers == 0 {
            return Err(QcError::Config("num_layers must be at least 1".into()));
        }
        if self.hidden_size == 0 {
            return Err(QcError::Config("hidden_size must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(QcError::Config(format!(
                "dropout must be in [0, 1), got {}",
                self.dropout
            )));
        }
        if self.learning_rate < 0.0 || !self.learning_rate.is_finite() {
            return Err(QcError::Config(format!(
                "learning_rate must be finite and non-negative, got {}",
                self.learning_rate
            )));
        }
        if self.epochs == 0 {
            return Err(QcError::Config("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(QcError::Config("batch_size must be at least 1".into()));
        }
        if self.positive_weight <= 0.0 {
            return Err(QcError::Config("positive_weight must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.precision_target) || self.precision_target == 0.0 {
            return Err(QcError::Config(format!(
                "precision_target must be in (0, 1], got {}",
                self.precision_target
            )));
        }
        Ok(())
    }

    /// Loss the configured head trains with.
    pub fn training_loss(&self) -> LossKind {
        match self.head {
            HeadKind::Classification => LossKind::CrossEntropy,
            HeadKind::Regression => match self.regression_loss {
                RegressionLoss::Mae => LossKind::Mae,
                RegressionLoss::Mse => LossKind::Mse,
            },
        }
    }
}
