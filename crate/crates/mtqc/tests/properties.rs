//! Property tests for the module-level invariants: metric equivalences and
//! invariances, edit-rate bounds, serialization round trips, and the
//! direction symmetry of the feature extractors.

mod common;

use proptest::prelude::*;

use common::{lev_oracle, r_at_p_exhaustive, sym_tokens};
use mtqc::corpus::{derive_labels, read_qc_tsv, write_qc_tsv, DatasetSplit, QeSample, SplitName};
use mtqc::features::{
    extract_features, train_directional_lms, DirectionalLm, EmbeddingTable, FeatureLayout,
    LexicalTable, SentenceFeatureSequence, UNK,
};
use mtqc::metrics::{pr_curve, r_at_p, regression_threshold_sweep};
use mtqc::model::{classify, ModelConfig, ModelParams};
use mtqc::ter;

fn scored_set(max_n: usize) -> impl Strategy<Value = (Vec<f64>, Vec<bool>)> {
    prop::collection::vec((0usize..10, any::<bool>()), 1..=max_n).prop_map(|items| {
        let mut scores = Vec::with_capacity(items.len());
        let mut labels = Vec::with_capacity(items.len());
        for (grid_idx, label) in &items {
            scores.push(*grid_idx as f64 / 10.0);
            labels.push(*label);
        }
        // Guarantee at least one positive.
        if !labels.iter().any(|&l| l) {
            labels[0] = true;
        }
        (scores, labels)
    })
}

fn token_seq(max_len: usize) -> impl Strategy<Value = Vec<u8>> {
    prop::collection::vec(0u8..4, 1..=max_len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn r_at_p_matches_exhaustive_enumeration((scores, labels) in scored_set(12)) {
        for t in [0.5, 0.8, 0.9, 1.0] {
            let got = r_at_p(&scores, &labels, t).unwrap();
            prop_assert_eq!(got, r_at_p_exhaustive(&scores, &labels, t));
        }
    }

    #[test]
    fn r_at_p_non_increasing_in_t((scores, labels) in scored_set(16)) {
        let mut last = f64::INFINITY;
        for t in [0.1, 0.3, 0.5, 0.7, 0.9, 1.0] {
            let value = r_at_p(&scores, &labels, t).unwrap();
            prop_assert!(value <= last);
            last = value;
        }
    }

    #[test]
    fn pr_curve_invariant_under_monotone_rescaling((scores, labels) in scored_set(16)) {
        let transformed: Vec<f64> = scores.iter().map(|s| (2.0 * s + 1.0).exp()).collect();
        let base = pr_curve(&scores, &labels).unwrap();
        let scaled = pr_curve(&transformed, &labels).unwrap();
        prop_assert_eq!(base.points.len(), scaled.points.len());
        for (a, b) in base.points.iter().zip(scaled.points.iter()) {
            prop_assert_eq!(a.predicted_positive, b.predicted_positive);
            prop_assert_eq!(a.true_positive, b.true_positive);
            prop_assert_eq!(a.precision, b.precision);
            prop_assert_eq!(a.recall, b.recall);
        }
    }

    #[test]
    fn pr_curve_invariant_under_permutation(
        (scores, labels) in scored_set(16),
        seed in 0u64..1000,
    ) {
        let mut order: Vec<usize> = (0..scores.len()).collect();
        let mut rng = mtqc::rng::Rng::new(seed);
        rng.shuffle(&mut order);
        let shuffled_scores: Vec<f64> = order.iter().map(|&i| scores[i]).collect();
        let shuffled_labels: Vec<bool> = order.iter().map(|&i| labels[i]).collect();
        let base = pr_curve(&scores, &labels).unwrap();
        let shuffled = pr_curve(&shuffled_scores, &shuffled_labels).unwrap();
        prop_assert_eq!(base, shuffled);
        for t in [0.5, 0.9] {
            prop_assert_eq!(
                r_at_p(&scores, &labels, t).unwrap(),
                r_at_p(&shuffled_scores, &shuffled_labels, t).unwrap()
            );
        }
    }

    #[test]
    fn sweep_agrees_with_pr_curve_on_negated_scores(
        items in prop::collection::vec((0usize..=50, any::<bool>()), 1..=20),
    ) {
        let mut preds = Vec::with_capacity(items.len());
        let mut labels = Vec::with_capacity(items.len());
        for (k, label) in &items {
            preds.push(0.0 + 0.01 * *k as f64);
            labels.push(*label);
        }
        if !labels.iter().any(|&l| l) {
            labels[0] = true;
        }
        let sweep = regression_threshold_sweep(&preds, &labels, 0.0, 0.5, 0.01).unwrap();
        let curve = pr_curve(
            &preds.iter().map(|p| -p).collect::<Vec<_>>(),
            &labels,
        )
        .unwrap();
        // Every sweep cutoff that an actual prediction attains must match
        // the curve point at the negated threshold exactly.
        for point in &sweep.points {
            if !preds.contains(&point.threshold) {
                continue;
            }
            let matching = curve
                .points
                .iter()
                .find(|c| c.threshold == -point.threshold);
            prop_assert!(matching.is_some());
            let c = matching.unwrap();
            prop_assert_eq!(c.predicted_positive, point.predicted_positive);
            prop_assert_eq!(c.true_positive, point.true_positive);
            prop_assert_eq!(c.precision, point.precision);
            prop_assert_eq!(c.recall, point.recall);
        }
    }

    #[test]
    fn ter_is_zero_on_identity(tokens in token_seq(10)) {
        let t = sym_tokens(&tokens);
        let r = ter::ter(&t, &t).unwrap();
        prop_assert_eq!(r.score, 0.0);
        prop_assert_eq!(r.total_edits(), 0);
    }

    #[test]
    fn ter_never_exceeds_edit_distance(hyp in token_seq(7), reference in token_seq(7)) {
        let h = sym_tokens(&hyp);
        let r = sym_tokens(&reference);
        let score = ter::ter(&h, &r).unwrap().score;
        let bound = lev_oracle(&hyp, &reference) as f64 / reference.len() as f64;
        prop_assert!(score <= bound + 1e-12);
    }

    #[test]
    fn ter_is_deterministic(hyp in token_seq(6), reference in token_seq(6)) {
        let h = sym_tokens(&hyp);
        let r = sym_tokens(&reference);
        prop_assert_eq!(ter::ter(&h, &r).unwrap(), ter::ter(&h, &r).unwrap());
    }
}

fn grid_hter() -> impl Strategy<Value = f64> {
    // Values exactly representable at the TSV's six printed decimals.
    (0u32..2_000_000).prop_map(|k| k as f64 / 1e6)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn qc_tsv_round_trip_is_identity(hters in prop::collection::vec(grid_hter(), 1..=20)) {
        let qe = DatasetSplit {
            name: SplitName::Dev,
            language_pair: "En-De".to_string(),
            samples: hters
                .iter()
                .enumerate()
                .map(|(id, &hter)| QeSample {
                    id,
                    source: vec![format!("s{id}")],
                    target: vec![format!("t{id}"), "x".to_string()],
                    post_edit: None,
                    hter: Some(hter),
                })
                .collect(),
        };
        let split = derive_labels(&qe, 1e-9).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("split.tsv");
        write_qc_tsv(&split, &path).unwrap();
        let back = read_qc_tsv(&path, SplitName::Dev, "En-De").unwrap();
        prop_assert_eq!(back, split);
    }

    #[test]
    fn label_sets_grow_with_epsilon(hters in prop::collection::vec(0.0f64..0.01, 1..=20)) {
        let qe = DatasetSplit {
            name: SplitName::Train,
            language_pair: "x".to_string(),
            samples: hters
                .iter()
                .enumerate()
                .map(|(id, &hter)| QeSample {
                    id,
                    source: vec!["s".to_string()],
                    target: vec!["t".to_string()],
                    post_edit: None,
                    hter: Some(hter),
                })
                .collect(),
        };
        let mut previous = 0usize;
        for eps in [0.0, 1e-9, 1e-6, 1e-3, 1e-2] {
            let labeled = derive_labels(&qe, eps).unwrap();
            let good = labeled.samples.iter().filter(|s| s.label.is_good()).count();
            prop_assert!(good >= previous);
            previous = good;
        }
    }
}

fn small_corpus() -> impl Strategy<Value = Vec<Vec<String>>> {
    prop::collection::vec(prop::collection::vec(0u8..5, 1..=6), 1..=8)
        .prop_map(|sents| sents.iter().map(|s| sym_tokens(s)).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn lm_distributions_are_normalized(corpus in small_corpus(), ctx in prop::collection::vec(0u8..6, 2)) {
        let (fwd, bwd) = train_directional_lms(&corpus, 3, 0.1).unwrap();
        let context = sym_tokens(&ctx);
        for lm in [&fwd, &bwd] {
            let mut sum = lm.prob(UNK, &context);
            for token in lm.vocab() {
                sum += lm.prob(token, &context);
            }
            prop_assert!((sum - 1.0).abs() < 1e-9, "sum {} for {:?}", sum, context);
        }
    }

    #[test]
    fn backward_features_mirror_forward_on_reversed_corpus(
        corpus in small_corpus(),
        pick in any::<prop::sample::Index>(),
    ) {
        let reversed: Vec<Vec<String>> = corpus
            .iter()
            .map(|s| s.iter().rev().cloned().collect())
            .collect();
        let (_, bwd) = train_directional_lms(&corpus, 3, 0.1).unwrap();
        let (fwd_rev, _) = train_directional_lms(&reversed, 3, 0.1).unwrap();
        let sentence = &corpus[pick.index(corpus.len())];
        let flipped: Vec<String> = sentence.iter().rev().cloned().collect();
        for j in 0..sentence.len() {
            let b = bwd.token_features(sentence, j).unwrap();
            let f = fwd_rev
                .token_features(&flipped, sentence.len() - 1 - j)
                .unwrap();
            prop_assert_eq!(b, f);
        }
    }

    #[test]
    fn extraction_is_deterministic(corpus in small_corpus(), seed in 0u64..500) {
        let (fwd, bwd) = train_directional_lms(&corpus, 2, 0.1).unwrap();
        let pairs: Vec<(Vec<String>, Vec<String>)> = corpus
            .iter()
            .map(|t| (vec!["src".to_string()], t.clone()))
            .collect();
        let lex = LexicalTable::train(&pairs, 0.1).unwrap();
        let vocab: Vec<String> = fwd.vocab().to_vec();
        let emb1 = EmbeddingTable::build(&vocab, 4, seed);
        let emb2 = EmbeddingTable::build(&vocab, 4, seed);
        let sample = mtqc::corpus::QcSample {
            id: 0,
            source: vec!["src".to_string()],
            target: corpus[0].clone(),
            post_edit: None,
            hter: 0.0,
            label: mtqc::corpus::Label::Good,
        };
        let a = extract_features(&sample, &fwd, &bwd, &lex, &emb1).unwrap();
        let b = extract_features(&sample, &fwd, &bwd, &lex, &emb2).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn eq1_blocks_recover_from_concatenation(
        corpus in small_corpus(),
        pick in any::<prop::sample::Index>(),
    ) {
        let (fwd, bwd) = train_directional_lms(&corpus, 2, 0.1).unwrap();
        let pairs: Vec<(Vec<String>, Vec<String>)> = corpus
            .iter()
            .map(|t| (vec!["src".to_string()], t.clone()))
            .collect();
        let lex = LexicalTable::train(&pairs, 0.1).unwrap();
        let emb = EmbeddingTable::build(fwd.vocab(), 3, 7);
        let target = corpus[pick.index(corpus.len())].clone();
        let sample = mtqc::corpus::QcSample {
            id: 0,
            source: vec!["src".to_string()],
            target: target.clone(),
            post_edit: None,
            hter: 0.0,
            label: mtqc::corpus::Label::Good,
        };
        let seq = extract_features(&sample, &fwd, &bwd, &lex, &emb).unwrap();
        let layout = FeatureLayout::for_embedding_dim(3);
        for (j, flat) in seq.vectors.iter().enumerate() {
            let blocks = layout.split(flat).unwrap();
            // Forward log-probability occupies block 0; the embedding of
            // the next token (or the boundary) occupies block 3.
            let fwd_feats = fwd.token_features(&target, j).unwrap();
            prop_assert_eq!(blocks[0][0], fwd_feats.log_prob);
            let expected_next: &[f64] = if j + 1 == target.len() {
                emb.boundary()
            } else {
                emb.lookup(&target[j + 1])
            };
            prop_assert_eq!(blocks[3], expected_next);
        }
    }

    #[test]
    fn inference_ignores_dropout_setting(dropout_idx in 0usize..4, seed in 0u64..200) {
        let dropouts = [0.0, 0.1, 0.2, 0.3];
        let layout = FeatureLayout {
            z_left: 3,
            z_right: 0,
            e_prev: 0,
            e_next: 0,
            f_mm: 0,
        };
        let base = ModelConfig {
            hidden_size: 4,
            num_layers: 2,
            seed,
            ..ModelConfig::default()
        };
        let params_clean = ModelParams::init(base.clone(), layout).unwrap();
        let mut with_dropout = params_clean.clone();
        with_dropout.config.dropout = dropouts[dropout_idx];
        let seq = SentenceFeatureSequence {
            sample_id: 0,
            dim: 3,
            vectors: vec![vec![0.3, -0.2, 0.8], vec![0.1, 0.0, -0.5]],
        };
        prop_assert_eq!(
            classify(&params_clean, &seq).unwrap(),
            classify(&with_dropout, &seq).unwrap()
        );
    }
}

#[test]
fn lm_training_is_deterministic() {
    let corpus: Vec<Vec<String>> = vec![
        sym_tokens(&[0, 1, 2]),
        sym_tokens(&[2, 1]),
        sym_tokens(&[3, 0, 0, 1]),
    ];
    let (f1, b1) = train_directional_lms(&corpus, 3, 0.1).unwrap();
    let (f2, b2) = train_directional_lms(&corpus, 3, 0.1).unwrap();
    let ctx = sym_tokens(&[0, 1]);
    for (a, b) in [(&f1, &f2), (&b1, &b2)] {
        assert_eq!(a.vocab(), b.vocab());
        assert_eq!(a.prob("c", &ctx), b.prob("c", &ctx));
        assert_eq!(a.argmax(&ctx), b.argmax(&ctx));
        assert_eq!(a.entropy(&ctx), b.entropy(&ctx));
    }
    let _ = DirectionalLm::train(&corpus, 2, 0.1, mtqc::features::Direction::Forward).unwrap();
}
