//! Per-token feature assembly.
//!
//! Each target token j maps to the concatenation of five blocks: forward
//! context-predictor summaries, backward summaries, embeddings of the
//! neighbor tokens j-1 and j+1 (boundary vector at the edges), and the
//! mismatching feature describing how the actual token disagrees with what
//! the predictors expected. The block order and widths are declared once in
//! [`FeatureLayout`] and enforced everywhere downstream.

use crate::corpus::QcSample;
use crate::error::{QcError, Result};

use super::embedding::EmbeddingTable;
use super::lexical::LexicalTable;
use super::lm::DirectionalLm;

/// Width of each block in a concatenated token vector, in declaration
/// order: forward context, backward context, previous-token embedding,
/// next-token embedding, mismatching feature.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureLayout {
    pub z_left: usize,
    pub z_right: usize,
    pub e_prev: usize,
    pub e_next: usize,
    pub f_mm: usize,
}

/// Width of the language-model summaries: log-probability, entropy,
/// observed context order.
pub const LM_BLOCK_WIDTH: usize = 3;
/// Width of the mismatching feature block.
pub const MISMATCH_WIDTH: usize = 4;

impl FeatureLayout {
    /// Layout produced by the desk-scale extractor for a given embedding
    /// dimension.
    pub fn for_embedding_dim(embed_dim: usize) -> Self {
        FeatureLayout {
            z_left: LM_BLOCK_WIDTH,
            z_right: LM_BLOCK_WIDTH,
            e_prev: embed_dim,
            e_next: embed_dim,
            f_mm: MISMATCH_WIDTH,
        }
    }

    pub fn dim(&self) -> usize {
        self.z_left + self.z_right + self.e_prev + self.e_next + self.f_mm
    }

    /// Block widths in declaration order.
    pub fn widths(&self) -> [usize; 5] {
        [
            self.z_left,
            self.z_right,
            self.e_prev,
            self.e_next,
            self.f_mm,
        ]
    }

    pub fn from_widths(widths: [usize; 5]) -> Self {
        FeatureLayout {
            z_left: widths[0],
            z_right: widths[1],
            e_prev: widths[2],
            e_next: widths[3],
            f_mm: widths[4],
        }
    }

    /// Slice a concatenated vector back into its five blocks.
    pub fn split<'a>(&self, flat: &'a [f64]) -> Result<[&'a [f64]; 5]> {
        if flat.len() != self.dim() {
            return Err(QcError::Shape(format!(
                "vector of length {} does not match layout dim {}",
                flat.len(),
                self.dim()
            )));
        }
        let mut offset = 0;
        let mut blocks = [&flat[0..0]; 5];
        for (slot, width) in blocks.iter_mut().zip(self.widths()) {
            *slot = &flat[offset..offset + width];
            offset += width;
        }
        Ok(blocks)
    }
}

/// One token's feature blocks before concatenation.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenFeatureVector {
    pub z_left: Vec<f64>,
    pub z_right: Vec<f64>,
    pub e_prev: Vec<f64>,
    pub e_next: Vec<f64>,
    pub f_mm: Vec<f64>,
}

impl TokenFeatureVector {
    pub fn layout(&self) -> FeatureLayout {
        FeatureLayout {
            z_left: self.z_left.len(),
            z_right: self.z_right.len(),
            e_prev: self.e_prev.len(),
            e_next: self.e_next.len(),
            f_mm: self.f_mm.len(),
        }
    }

    /// Concatenate the blocks in declaration order.
    pub fn concat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.layout().dim());
        out.extend_from_slice(&self.z_left);
        out.extend_from_slice(&self.z_right);
        out.extend_from_slice(&self.e_prev);
        out.extend_from_slice(&self.e_next);
        out.extend_from_slice(&self.f_mm);
        out
    }
}

/// Concatenated per-token vectors for one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct SentenceFeatureSequence {
    pub sample_id: usize,
    pub dim: usize,
    pub vectors: Vec<Vec<f64>>,
}

impl SentenceFeatureSequence {
    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }
}

/// Mismatching feature for target position `j`:
/// whether the actual token is the forward model's argmax, its
/// log-probability, the probability gap to the argmax, and the strongest
/// lexical support from any source token.
pub fn mismatch_features(
    source: &[String],
    target: &[String],
    forward: &DirectionalLm,
    lexical: &LexicalTable,
    j: usize,
) -> Result<[f64; 4]> {
    if j >= target.len() {
        return Err(QcError::Index {
            index: j,
            len: target.len(),
        });
    }
    let context = forward.context_for(target, j);
    let actual = &target[j];
    let p_actual = forward.prob(actual, &context);
    let (predicted, p_best) = forward.argmax(&context);
    let indicator = if *actual == predicted { 1.0 } else { 0.0 };
    let gap = p_best - p_actual;
    let lexical_support = lexical.max_support(actual, source);
    Ok([indicator, p_actual.ln(), gap, lexical_support])
}

/// Build the full feature sequence for one labeled sample.
pub fn extract_features(
    sample: &QcSample,
    forward: &DirectionalLm,
    backward: &DirectionalLm,
    lexical: &LexicalTable,
    embeddings: &EmbeddingTable,
) -> Result<SentenceFeatureSequence> {
    let target = &sample.target;
    if target.is_empty() {
        return Err(QcError::EmptySentence(format!("sample {}", sample.id)));
    }
    let layout = FeatureLayout::for_embedding_dim(embeddings.dim());
    let mut vectors = Vec::with_capacity(target.len());
    for j in 0..target.len() {
        let fwd = forward.token_features(target, j)?;
        let bwd = backward.token_features(target, j)?;
        let e_prev = if j == 0 {
            embeddings.boundary().to_vec()
        } else {
            embeddings.lookup(&target[j - 1]).to_vec()
        };
        let e_next = if j + 1 == target.len() {
            embeddings.boundary().to_vec()
        } else {
            embeddings.lookup(&target[j + 1]).to_vec()
        };
        let f_mm = mismatch_features(&sample.source, target, forward, lexical, j)?;
        let vector = TokenFeatureVector {
            z_left: vec![fwd.log_prob, fwd.entropy, fwd.backoff_order as f64],
            z_right: vec![bwd.log_prob, bwd.entropy, bwd.backoff_order as f64],
            e_prev,
            e_next,
            f_mm: f_mm.to_vec(),
        };
        debug_assert_eq!(vector.layout(), layout);
        vectors.push(vector.concat());
    }
    Ok(SentenceFeatureSequence {
        sample_id: sample.id,
        dim: layout.dim(),
        vectors,
    })
}
