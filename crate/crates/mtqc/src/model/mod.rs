//! Sequence model: bidirectional recurrent aggregation with a
//! classification or regression head, trained by seeded mini-batch
//! gradient descent and tuned by grid search on the dev metric.

mod config;
mod grid;
mod io;
mod math;
mod net;
mod train;

pub use config::{HeadKind, LossKind, ModelConfig, RegressionLoss};
pub use grid::{grid_search, GridEntry, GridOutcome, GridRanges};
pub use io::{load_model, save_model};
pub use math::Matrix;
pub use net::{
    backward, classify, forward_aggregate, loss, regress, sample_loss, CellWeights, LayerWeights,
    ModelParams, WeightSet,
};
pub use train::{evaluate_dev, train, TrainReport};
