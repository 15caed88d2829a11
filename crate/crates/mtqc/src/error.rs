//! Error type shared across the toolkit.

use thiserror::Error;

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, QcError>;

/// All failure modes surfaced by the toolkit.
#[derive(Debug, Error)]
pub enum QcError {
    /// Input text was empty or contained only whitespace.
    #[error("empty sentence: {0}")]
    EmptySentence(String),

    /// Line-aligned input files diverged.
    #[error("alignment error at line {line}: {message}")]
    Alignment { line: usize, message: String },

    /// A row or line could not be parsed.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// A sample is missing its edit-rate score.
    #[error("missing score for sample {id}")]
    MissingScore { id: usize },

    /// Operation requires a non-empty split.
    #[error("empty split")]
    EmptySplit,

    /// Edit-rate computation against an empty reference.
    #[error("empty reference")]
    EmptyReference,

    /// Model training requires a non-empty corpus.
    #[error("empty corpus")]
    EmptyCorpus,

    /// Token index out of bounds.
    #[error("index {index} out of bounds for length {len}")]
    Index { index: usize, len: usize },

    /// Structured file violates its declared schema.
    #[error("schema error: {0}")]
    Schema(String),

    /// A value was outside its permitted domain (NaN, infinite, ...).
    #[error("value error: {0}")]
    Value(String),

    /// Dimension or length mismatch between tensors or sequences.
    #[error("shape error: {0}")]
    Shape(String),

    /// Invalid or inconsistent configuration.
    #[error("config error: {0}")]
    Config(String),

    /// Argument outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Training produced a non-finite loss.
    #[error("divergence at epoch {epoch}, batch {batch}: loss is not finite")]
    Divergence { epoch: usize, batch: usize },

    /// Metric requires at least one positive label.
    #[error("no positive labels in evaluation set")]
    NoPositives,

    /// Correlation is undefined when either side has zero variance.
    #[error("degenerate variance: correlation undefined")]
    DegenerateVariance,

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
