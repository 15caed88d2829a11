//! `train-fe` and `extract`: build the desk-scale extractor and produce
//! feature files for labeled splits.

use crate::corpus::{self, read_qc_tsv, SplitName};
use crate::error::{QcError, Result};
use crate::features::{
    export_features, extract_features, train_directional_lms, EmbeddingTable, FeatureExtractor,
    LexicalTable, DEFAULT_ALPHA, DEFAULT_DIM, DEFAULT_ORDER,
};

use super::data::{require, split_name, tokenizer};
use super::kv::KvMap;
use super::{ExtractArgs, TrainFeArgs};

pub fn cmd_train_fe(args: TrainFeArgs) -> Result<()> {
    let cfg = KvMap::load_optional(args.config.as_deref())?;
    let src_path = require(args.parallel_src, &cfg, "parallel_src")?;
    let tgt_path = require(args.parallel_tgt, &cfg, "parallel_tgt")?;
    let out = require(args.out, &cfg, "out")?;
    let order = cfg.resolve(args.order, "order", DEFAULT_ORDER)?;
    let alpha = cfg.resolve(args.alpha, "alpha", DEFAULT_ALPHA)?;
    let embed_dim = cfg.resolve(args.embed_dim, "embed_dim", DEFAULT_DIM)?;
    let seed = cfg.resolve(args.seed, "seed", 1)?;
    let tok = tokenizer(args.keep_case, &cfg)?;

    let src_text = std::fs::read_to_string(&src_path)?;
    let tgt_text = std::fs::read_to_string(&tgt_path)?;
    let src_lines: Vec<&str> = corpus_lines(&src_text);
    let tgt_lines: Vec<&str> = corpus_lines(&tgt_text);
    if src_lines.len() != tgt_lines.len() {
        let line = src_lines.len().min(tgt_lines.len()) + 1;
        return Err(QcError::Alignment {
            line,
            message: format!(
                "parallel corpus misaligned: {} source lines vs {} target lines",
                src_lines.len(),
                tgt_lines.len()
            ),
        });
    }

    let mut pairs = Vec::with_capacity(src_lines.len());
    for (idx, (s, t)) in src_lines.iter().zip(tgt_lines.iter()).enumerate() {
        let line = idx + 1;
        let with_line = |e: QcError| match e {
            QcError::EmptySentence(what) => QcError::Parse {
                line,
                message: format!("empty sentence {what}"),
            },
            other => other,
        };
        let source = corpus::tokenize(s, tok).map_err(with_line)?;
        let target = corpus::tokenize(t, tok).map_err(with_line)?;
        pairs.push((source, target));
    }

    let targets: Vec<Vec<String>> = pairs.iter().map(|(_, t)| t.clone()).collect();
    let (forward, backward) = train_directional_lms(&targets, order, alpha)?;
    let lexical = LexicalTable::train(&pairs, alpha)?;
    let vocab = forward.vocab().to_vec();
    let embeddings = EmbeddingTable::build(&vocab, embed_dim, seed);

    let fe = FeatureExtractor {
        tokenizer: tok,
        forward,
        backward,
        lexical,
        embeddings,
    };
    fe.save(&out)?;
    println!(
        "extractor: {} sentence pairs, vocab {}, layout dim {}",
        pairs.len(),
        vocab.len(),
        fe.layout().dim()
    );
    Ok(())
}

fn corpus_lines(text: &str) -> Vec<&str> {
    let mut lines: Vec<&str> = text.split('\n').collect();
    if lines.last().is_some_and(|l| l.is_empty()) {
        lines.pop();
    }
    lines
}

pub fn cmd_extract(args: ExtractArgs) -> Result<()> {
    let cfg = KvMap::load_optional(args.config.as_deref())?;
    let fe_path = require(args.fe, &cfg, "fe")?;
    let data_path = require(args.data, &cfg, "data")?;
    let out = require(args.out, &cfg, "out")?;
    let split = split_name(args.split, &cfg, SplitName::Train)?;
    let lang = args
        .lang
        .or_else(|| cfg.raw("lang").map(str::to_string))
        .unwrap_or_else(|| "unspecified".to_string());

    let fe = FeatureExtractor::load(&fe_path)?;
    let data = read_qc_tsv(&data_path, split, &lang)?;
    let layout = fe.layout();
    let mut seqs = Vec::with_capacity(data.samples.len());
    for sample in &data.samples {
        seqs.push(extract_features(
            sample,
            &fe.forward,
            &fe.backward,
            &fe.lexical,
            &fe.embeddings,
        )?);
    }
    export_features(&layout, &seqs, &out)?;
    println!(
        "extracted {} sequences of dim {} -> {}",
        seqs.len(),
        layout.dim(),
        out.display()
    );
    Ok(())
}
