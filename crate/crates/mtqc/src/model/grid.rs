//! Exhaustive hyper-parameter search on the dev metric.

use crate::error::{QcError, Result};
use crate::features::{FeatureLayout, SentenceFeatureSequence};

use super::config::{HeadKind, ModelConfig};
use super::net::ModelParams;
use super::train::{train, TrainReport};

/// Value lists forming the Cartesian product to search. The defaults are
/// the standard tuning ranges: 2 layer counts x 3 sizes x 4 dropouts x 3
/// learning rates = 72 configurations.
#[derive(Debug, Clone, PartialEq)]
pub struct GridRanges {
    pub num_layers: Vec<usize>,
    pub hidden_size: Vec<usize>,
    pub dropout: Vec<f64>,
    pub learning_rate: Vec<f64>,
}

impl Default for GridRanges {
    fn default() -> Self {
        GridRanges {
            num_layers: vec![1, 2],
            hidden_size: vec![64, 128, 256],
            dropout: vec![0.0, 0.1, 0.2, 0.3],
            learning_rate: vec![1e-6, 1e-5, 1e-4],
        }
    }
}

impl GridRanges {
    pub fn len(&self) -> usize {
        self.num_layers.len()
            * self.hidden_size.len()
            * self.dropout.len()
            * self.learning_rate.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All configurations in a fixed order (layers outermost, learning rate
    /// innermost). Each gets a seed derived from the base seed plus its
    /// index.
    pub fn configs(&self, base: &ModelConfig) -> Vec<ModelConfig> {
        let mut out = Vec::with_capacity(self.len());
        let mut index = 0u64;
        for &num_layers in &self.num_layers {
            for &hidden_size in &self.hidden_size {
                for &dropout in &self.dropout {
                    for &learning_rate in &self.learning_rate {
                        let mut config = base.clone();
                        config.num_layers = num_layers;
                        config.hidden_size = hidden_size;
                        config.dropout = dropout;
                        config.learning_rate = learning_rate;
                        config.seed = base.seed.wrapping_add(index);
                        out.push(config);
                        index += 1;
                    }
                }
            }
        }
        out
    }
}

/// One trained configuration with its best-epoch dev metric.
#[derive(Debug, Clone)]
pub struct GridEntry {
    pub config: ModelConfig,
    pub report: TrainReport,
    pub dev_metric: f64,
}

/// Result of a full sweep: the winner and every trained entry in grid
/// order.
#[derive(Debug, Clone)]
pub struct GridOutcome {
    pub best_index: usize,
    pub best_params: ModelParams,
    pub entries: Vec<GridEntry>,
}

impl GridOutcome {
    pub fn best_config(&self) -> &ModelConfig {
        &self.entries[self.best_index].config
    }
}

/// Train every configuration in the product and keep the one with the best
/// dev metric at its best epoch: highest recall-at-precision for
/// classification, lowest MAE for regression. Ties break toward the
/// smaller hidden size, then fewer layers, then lower dropout, then lower
/// learning rate.
pub fn grid_search(
    ranges: &GridRanges,
    base: &ModelConfig,
    layout: FeatureLayout,
    train_seqs: &[SentenceFeatureSequence],
    train_targets: &[f64],
    dev_seqs: &[SentenceFeatureSequence],
    dev_targets: &[f64],
) -> Result<GridOutcome> {
    if ranges.is_empty() {
        return Err(QcError::Config("empty hyper-parameter ranges".into()));
    }

    let higher_is_better = base.head == HeadKind::Classification;
    let mut entries = Vec::with_capacity(ranges.len());
    let mut best: Option<(usize, ModelParams)> = None;

    for (index, config) in ranges.configs(base).into_iter().enumerate() {
        let (params, report) = train(
            &config,
            layout,
            train_seqs,
            train_targets,
            dev_seqs,
            dev_targets,
        )?;
        let dev_metric = report.dev_metric[report.best_epoch];
        entries.push(GridEntry {
            config,
            report,
            dev_metric,
        });

        let is_better = match &best {
            None => true,
            Some((current, _)) => {
                let cur = &entries[*current];
                let new = &entries[index];
                let primary = if higher_is_better {
                    new.dev_metric.partial_cmp(&cur.dev_metric)
                } else {
                    cur.dev_metric.partial_cmp(&new.dev_metric)
                };
                match primary {
                    Some(std::cmp::Ordering::Greater) => true,
                    Some(std::cmp::Ordering::Less) => false,
                    _ => {
                        let key = |c: &ModelConfig| {
                            (
                                c.hidden_size,
                                c.num_layers,
                                // Total orders for the f64 tie-break keys.
                                c.dropout.to_bits(),
                                c.learning_rate.to_bits(),
                            )
                        };
                        key(&new.config) < key(&cur.config)
                    }
                }
            }
        };
        if is_better {
            best = Some((index, params));
        }
    }

    let (best_index, best_params) = best.expect("non-empty grid");
    Ok(GridOutcome {
        best_index,
        best_params,
        entries,
    })
}
