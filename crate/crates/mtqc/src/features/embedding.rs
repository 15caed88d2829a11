//! Frozen token embeddings.
//!
//! Vectors are drawn once from a seeded uniform(-0.1, 0.1) and never
//! trained: gradient is stopped at the feature extractor, so these behave
//! like any other fixed feature. Lookup is total via dedicated boundary and
//! unknown vectors.

use std::collections::BTreeMap;

use crate::rng::Rng;

pub const DEFAULT_DIM: usize = 16;

/// Fixed-dimension vectors for a closed vocabulary.
#[derive(Debug, Clone)]
pub struct EmbeddingTable {
    dim: usize,
    seed: u64,
    vectors: BTreeMap<String, Vec<f64>>,
    boundary: Vec<f64>,
    unknown: Vec<f64>,
}

impl EmbeddingTable {
    /// Generate vectors for a vocabulary. Generation order is fixed
    /// (boundary, unknown, then the vocabulary sorted), so the same seed
    /// and vocabulary reproduce identical tables.
    pub fn build<S: AsRef<str>>(vocab: &[S], dim: usize, seed: u64) -> Self {
        let mut sorted: Vec<String> = vocab.iter().map(|t| t.as_ref().to_string()).collect();
        sorted.sort();
        sorted.dedup();

        let mut rng = Rng::new(seed);
        let draw =
            |rng: &mut Rng| -> Vec<f64> { (0..dim).map(|_| rng.uniform(-0.1, 0.1)).collect() };
        let boundary = draw(&mut rng);
        let unknown = draw(&mut rng);
        let vectors = sorted
            .into_iter()
            .map(|token| {
                let v = draw(&mut rng);
                (token, v)
            })
            .collect();
        EmbeddingTable {
            dim,
            seed,
            vectors,
            boundary,
            unknown,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn vocab_len(&self) -> usize {
        self.vectors.len()
    }

    /// Vector for a token; unknown tokens share one fallback vector.
    pub fn lookup(&self, token: &str) -> &[f64] {
        self.vectors.get(token).map_or(&self.unknown, |v| v)
    }

    /// Vector standing in for a position outside the sentence.
    pub fn boundary(&self) -> &[f64] {
        &self.boundary
    }

    pub(crate) fn vocab_for_io(&self) -> impl Iterator<Item = &String> {
        self.vectors.keys()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lookup_is_total() {
        let table = EmbeddingTable::build(&["a", "b"], 4, 42);
        assert_eq!(table.lookup("a").len(), 4);
        assert_eq!(table.lookup("zzz"), table.lookup("missing"));
        assert_eq!(table.boundary().len(), 4);
    }

    #[test]
    fn same_seed_reproduces_vectors() {
        let t1 = EmbeddingTable::build(&["b", "a"], 8, 7);
        let t2 = EmbeddingTable::build(&["a", "b"], 8, 7);
        assert_eq!(t1.lookup("a"), t2.lookup("a"));
        assert_eq!(t1.boundary(), t2.boundary());
    }

    #[test]
    fn values_stay_in_init_range() {
        let table = EmbeddingTable::build(&["a", "b", "c"], 16, 3);
        for token in ["a", "b", "c"] {
            assert!(table.lookup(token).iter().all(|x| x.abs() < 0.1));
        }
    }

    #[test]
    fn distinct_tokens_get_distinct_vectors() {
        let table = EmbeddingTable::build(&["a", "b"], 16, 5);
        assert_ne!(table.lookup("a"), table.lookup("b"));
    }
}
