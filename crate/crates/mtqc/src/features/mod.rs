//! Token feature extraction.
//!
//! Produces the per-token vectors the sequence model consumes: directional
//! language-model summaries of both contexts, neighbor embeddings, and a
//! mismatching feature combining predictor disagreement with lexical
//! support from the source. Precomputed neural features can be imported
//! through the same file format instead.

mod embedding;
mod extract;
mod io;
mod lexical;
mod lm;

pub use embedding::{EmbeddingTable, DEFAULT_DIM};
pub use extract::{
    extract_features, mismatch_features, FeatureLayout, SentenceFeatureSequence,
    TokenFeatureVector, LM_BLOCK_WIDTH, MISMATCH_WIDTH,
};
pub use io::{export_features, import_features, FeatureExtractor};
pub use lexical::LexicalTable;
pub use lm::{
    train_directional_lms, Direction, DirectionalLm, LmTokenFeatures, BOS, DEFAULT_ALPHA,
    DEFAULT_ORDER, UNK,
};
