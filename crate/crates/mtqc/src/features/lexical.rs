//! Lexical translation probabilities from sentence-aligned parallel data.
//!
//! `t(target | source)` is estimated from co-occurrence counts within
//! aligned pairs, with the same add-alpha smoothing as the language models,
//! so each source token conditions a proper distribution over the target
//! vocabulary plus an unknown slot. A source token never seen in training
//! conditions the uniform distribution.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{QcError, Result};

/// Conditional target-given-source token probabilities.
#[derive(Debug, Clone)]
pub struct LexicalTable {
    alpha: f64,
    /// source -> (target -> co-occurrence count)
    counts: BTreeMap<String, BTreeMap<String, u64>>,
    /// source -> sum of its co-occurrence counts
    totals: BTreeMap<String, u64>,
    target_vocab: BTreeSet<String>,
}

impl LexicalTable {
    /// Count co-occurrences over aligned (source, target) token sequences.
    pub fn train(pairs: &[(Vec<String>, Vec<String>)], alpha: f64) -> Result<Self> {
        if pairs.is_empty() {
            return Err(QcError::EmptyCorpus);
        }
        if alpha <= 0.0 {
            return Err(QcError::Config("smoothing alpha must be positive".into()));
        }
        let mut counts: BTreeMap<String, BTreeMap<String, u64>> = BTreeMap::new();
        let mut totals: BTreeMap<String, u64> = BTreeMap::new();
        let mut target_vocab = BTreeSet::new();
        for (source, target) in pairs {
            for tgt in target {
                target_vocab.insert(tgt.clone());
            }
            for src in source {
                let by_target = counts.entry(src.clone()).or_default();
                for tgt in target {
                    *by_target.entry(tgt.clone()).or_insert(0) += 1;
                    *totals.entry(src.clone()).or_insert(0) += 1;
                }
            }
        }
        Ok(LexicalTable {
            alpha,
            counts,
            totals,
            target_vocab,
        })
    }

    /// Number of target events: vocabulary plus the unknown slot.
    pub fn event_count(&self) -> usize {
        self.target_vocab.len() + 1
    }

    /// Smoothed `t(target | source)`.
    pub fn prob(&self, target: &str, source: &str) -> f64 {
        let count = self
            .counts
            .get(source)
            .and_then(|m| m.get(target))
            .copied()
            .unwrap_or(0);
        let total = self.totals.get(source).copied().unwrap_or(0);
        let v = self.event_count() as f64;
        (count as f64 + self.alpha) / (total as f64 + self.alpha * v)
    }

    /// Best-supported translation of `source`: highest smoothed probability
    /// over the target vocabulary, ties broken lexicographically.
    pub fn argmax(&self, source: &str) -> Option<(String, f64)> {
        let best = match self.counts.get(source) {
            Some(by_target) => by_target
                .iter()
                .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
                .map(|(t, _)| t.clone()),
            None => self.target_vocab.iter().next().cloned(),
        }?;
        let p = self.prob(&best, source);
        Some((best, p))
    }

    /// Strongest lexical support for a target token from any source token
    /// of the sentence.
    pub fn max_support(&self, target: &str, source_tokens: &[String]) -> f64 {
        source_tokens
            .iter()
            .map(|src| self.prob(target, src))
            .fold(0.0, f64::max)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub(crate) fn parts_for_io(
        &self,
    ) -> (
        &BTreeSet<String>,
        impl Iterator<Item = (&String, &BTreeMap<String, u64>)>,
    ) {
        (&self.target_vocab, self.counts.iter())
    }

    pub(crate) fn from_parts(
        alpha: f64,
        target_vocab: BTreeSet<String>,
        counts: BTreeMap<String, BTreeMap<String, u64>>,
    ) -> Self {
        let totals = counts
            .iter()
            .map(|(src, by_target)| (src.clone(), by_target.values().sum()))
            .collect();
        LexicalTable {
            alpha,
            counts,
            totals,
            target_vocab,
        }
    }
}
