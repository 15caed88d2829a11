//! Directional n-gram language models with additive smoothing.
//!
//! These are the desk-scale stand-ins for the pre-trained unidirectional
//! context encoders: a forward model reads the left context of each token
//! and a backward model reads the right context (it is the forward
//! construction trained on reversed sentences). Probabilities are add-alpha
//! smoothed over the training vocabulary plus a single unknown slot, so
//! every distribution is normalized by construction and an unseen context
//! falls back to the uniform distribution.

use std::collections::BTreeMap;

use crate::error::{QcError, Result};

/// Sentence-boundary padding token used to the left of position 0 (or the
/// right of the last position for the backward model).
pub const BOS: &str = "<s>";
/// Unknown-token slot; shares the vocabulary with the observed tokens.
pub const UNK: &str = "<unk>";

/// Default n-gram order.
pub const DEFAULT_ORDER: usize = 3;
/// Default additive smoothing mass.
pub const DEFAULT_ALPHA: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

#[derive(Debug, Clone, Default)]
struct ContextCounts {
    total: u64,
    by_token: BTreeMap<String, u64>,
}

/// Per-position summary produced for the feature layout.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmTokenFeatures {
    /// Natural log of the smoothed probability of the actual token.
    pub log_prob: f64,
    /// Entropy (nats) of the predictive distribution at this context.
    pub entropy: f64,
    /// Longest suffix of the context that was observed in training, in
    /// tokens; the empty context always counts as observed.
    pub backoff_order: usize,
}

/// Add-alpha smoothed n-gram model over one reading direction.
#[derive(Debug, Clone)]
pub struct DirectionalLm {
    order: usize,
    alpha: f64,
    direction: Direction,
    vocab: Vec<String>,
    /// tables[k] holds counts for contexts of exactly k tokens, 0 <= k < order.
    tables: Vec<BTreeMap<Vec<String>, ContextCounts>>,
}

impl DirectionalLm {
    /// Train on tokenized sentences. The backward direction reverses each
    /// sentence before counting.
    pub fn train(
        corpus: &[Vec<String>],
        order: usize,
        alpha: f64,
        direction: Direction,
    ) -> Result<Self> {
        if corpus.is_empty() || corpus.iter().all(|s| s.is_empty()) {
            return Err(QcError::EmptyCorpus);
        }
        if order == 0 {
            return Err(QcError::Config("n-gram order must be at least 1".into()));
        }
        if alpha <= 0.0 {
            return Err(QcError::Config("smoothing alpha must be positive".into()));
        }

        let mut vocab_set: std::collections::BTreeSet<String> = std::collections::BTreeSet::new();
        let mut tables = vec![BTreeMap::<Vec<String>, ContextCounts>::new(); order];

        for sentence in corpus {
            let oriented: Vec<String> = match direction {
                Direction::Forward => sentence.clone(),
                Direction::Backward => sentence.iter().rev().cloned().collect(),
            };
            for (j, token) in oriented.iter().enumerate() {
                vocab_set.insert(token.clone());
                for (k, table) in tables.iter_mut().enumerate() {
                    let ctx = context_at(&oriented, j, k);
                    let entry = table.entry(ctx).or_default();
                    entry.total += 1;
                    *entry.by_token.entry(token.clone()).or_insert(0) += 1;
                }
            }
        }

        Ok(DirectionalLm {
            order,
            alpha,
            direction,
            vocab: vocab_set.into_iter().collect(),
            tables,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    /// Observed tokens, sorted; the unknown slot is not included.
    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    /// Size of the event space: vocabulary plus the unknown slot.
    pub fn event_count(&self) -> usize {
        self.vocab.len() + 1
    }

    /// Smoothed probability of `token` given the full-length context, in
    /// the model's own orientation. An out-of-vocabulary token scores as
    /// the unknown slot.
    pub fn prob(&self, token: &str, context: &[String]) -> f64 {
        let token = self.map_token(token);
        let table = &self.tables[self.order - 1];
        let (total, count) = match table.get(context) {
            Some(c) => (c.total, c.by_token.get(token).copied().unwrap_or(0)),
            None => (0, 0),
        };
        let v = self.event_count() as f64;
        (count as f64 + self.alpha) / (total as f64 + self.alpha * v)
    }

    fn map_token<'a>(&self, token: &'a str) -> &'a str {
        if self
            .vocab
            .binary_search_by(|v| v.as_str().cmp(token))
            .is_ok()
        {
            token
        } else {
            UNK
        }
    }

    /// Highest-probability vocabulary token for a context, ties broken
    /// lexicographically. The unknown slot never wins.
    pub fn argmax(&self, context: &[String]) -> (String, f64) {
        let table = &self.tables[self.order - 1];
        let best = table
            .get(context)
            .and_then(|c| {
                // BTreeMap iterates in key order, so the first maximum is
                // the lexicographically smallest.
                c.by_token
                    .iter()
                    .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
                    .map(|(tok, _)| tok.clone())
            })
            .or_else(|| self.vocab.first().cloned())
            .expect("non-empty vocabulary");
        let p = self.prob(&best, context);
        (best, p)
    }

    /// Entropy (nats) of the smoothed distribution at a context, summed
    /// over the vocabulary and the unknown slot.
    pub fn entropy(&self, context: &[String]) -> f64 {
        let table = &self.tables[self.order - 1];
        let v = self.event_count() as f64;
        let (total, counts) = match table.get(context) {
            Some(c) => (c.total, Some(&c.by_token)),
            None => (0, None),
        };
        let denom = total as f64 + self.alpha * v;
        let mut entropy = 0.0;
        let mut seen_mass = 0u64;
        if let Some(counts) = counts {
            for &count in counts.values() {
                let p = (count as f64 + self.alpha) / denom;
                entropy -= p * p.ln();
                seen_mass += 1;
            }
        }
        // Remaining events (unseen vocab + unknown slot) share one value.
        let unseen = v - seen_mass as f64;
        if unseen > 0.0 {
            let p = self.alpha / denom;
            entropy -= unseen * p * p.ln();
        }
        entropy
    }

    /// Longest suffix of `context` observed during training.
    pub fn observed_suffix_len(&self, context: &[String]) -> usize {
        let mut best = 0;
        for k in 1..self.order {
            if k > context.len() {
                break;
            }
            let suffix = &context[context.len() - k..];
            if self.tables[k].contains_key(suffix) {
                best = k;
            }
        }
        best
    }

    /// Context preceding position `j` of `sentence` in the model's own
    /// orientation: the backward model expects the sentence already
    /// reversed. Length is always `order - 1`, padded with [`BOS`].
    pub fn context_for(&self, oriented_sentence: &[String], j: usize) -> Vec<String> {
        context_at(oriented_sentence, j, self.order - 1)
    }

    /// Per-token features at position `j` of an (unreversed) sentence. The
    /// backward model reverses internally so callers always pass the
    /// sentence in reading order.
    pub fn token_features(&self, sentence: &[String], j: usize) -> Result<LmTokenFeatures> {
        if j >= sentence.len() {
            return Err(QcError::Index {
                index: j,
                len: sentence.len(),
            });
        }
        let oriented: Vec<String>;
        let (sent, pos) = match self.direction {
            Direction::Forward => (sentence, j),
            Direction::Backward => {
                oriented = sentence.iter().rev().cloned().collect();
                (&oriented[..], sentence.len() - 1 - j)
            }
        };
        let context = self.context_for(sent, pos);
        Ok(LmTokenFeatures {
            log_prob: self.prob(&sent[pos], &context).ln(),
            entropy: self.entropy(&context),
            backoff_order: self.observed_suffix_len(&context),
        })
    }
}

/// Context-order, context tokens, total count, per-token counts.
pub(crate) type LmCountEntries = Vec<(usize, Vec<String>, u64, BTreeMap<String, u64>)>;

/// The `k` tokens preceding position `j`, padded on the left with [`BOS`].
fn context_at(sentence: &[String], j: usize, k: usize) -> Vec<String> {
    let mut ctx = Vec::with_capacity(k);
    for offset in (1..=k).rev() {
        if j >= offset {
            ctx.push(sentence[j - offset].clone());
        } else {
            ctx.push(BOS.to_string());
        }
    }
    ctx
}

/// Train the forward/backward pair used for feature extraction.
pub fn train_directional_lms(
    corpus: &[Vec<String>],
    order: usize,
    alpha: f64,
) -> Result<(DirectionalLm, DirectionalLm)> {
    let forward = DirectionalLm::train(corpus, order, alpha, Direction::Forward)?;
    let backward = DirectionalLm::train(corpus, order, alpha, Direction::Backward)?;
    Ok((forward, backward))
}

impl DirectionalLm {
    /// Internal table access for serialization.
    pub(crate) fn tables_for_io(
        &self,
    ) -> impl Iterator<Item = (usize, &Vec<String>, u64, &BTreeMap<String, u64>)> {
        self.tables.iter().enumerate().flat_map(|(k, table)| {
            table
                .iter()
                .map(move |(ctx, counts)| (k, ctx, counts.total, &counts.by_token))
        })
    }

    /// Reassemble a model from serialized parts.
    pub(crate) fn from_parts(
        order: usize,
        alpha: f64,
        direction: Direction,
        vocab: Vec<String>,
        entries: LmCountEntries,
    ) -> Result<Self> {
        let mut tables = vec![BTreeMap::<Vec<String>, ContextCounts>::new(); order];
        for (k, ctx, total, by_token) in entries {
            if k >= order || ctx.len() != k {
                return Err(QcError::Schema(format!(
                    "context of length {} in order-{k} table",
                    ctx.len()
                )));
            }
            tables[k].insert(ctx, ContextCounts { total, by_token });
        }
        Ok(DirectionalLm {
            order,
            alpha,
            direction,
            vocab,
            tables,
        })
    }
}
