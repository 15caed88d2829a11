//! Quality classification for machine translation output.
//!
//! Given (source, translation) pairs with post-edits or edit-rate scores,
//! this crate derives binary good/bad labels, extracts per-token feature
//! sequences, trains a recurrent classifier (or a regression baseline) over
//! them, and evaluates with recall-at-precision metrics. The `mtqc` binary
//! exposes the full pipeline as subcommands; see the crate README.

pub mod cli;
pub mod corpus;
pub mod error;
pub mod features;
pub mod metrics;
pub mod model;
pub mod rng;
pub mod ter;

pub use error::{QcError, Result};
