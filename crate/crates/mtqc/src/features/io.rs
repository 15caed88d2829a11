//! On-disk formats for feature sequences and trained extractors.
//!
//! The feature file is line-oriented text. A header declares the vector
//! dimension and the five block widths; every following line is one record:
//! sample id, dimension, then one comma-joined float list per token.
//! Values are 32-bit floats, so import after export reproduces sequences to
//! f32 precision. Dimension consistency is enforced across the whole file
//! and non-finite entries are rejected in both directions.
//!
//! The extractor bundle stores the tokenizer flag, both language models
//! (as count tables), the lexical table, and the embedding vocabulary with
//! its seed. Everything is written in sorted order so identical models
//! serialize to identical bytes.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::corpus::TokenizerConfig;
use crate::error::{QcError, Result};

use super::embedding::EmbeddingTable;
use super::extract::{FeatureLayout, SentenceFeatureSequence};
use super::lexical::LexicalTable;
use super::lm::{Direction, DirectionalLm};

const FEATURE_MAGIC: &str = "#mtqc-features\tv1";
const FE_MAGIC: &str = "#mtqc-fe\tv1";

/// Write sequences with their layout header.
pub fn export_features(
    layout: &FeatureLayout,
    seqs: &[SentenceFeatureSequence],
    path: &Path,
) -> Result<()> {
    let mut out = String::new();
    let widths = layout.widths();
    writeln!(
        out,
        "{FEATURE_MAGIC}\tdim={}\tblocks={},{},{},{},{}",
        layout.dim(),
        widths[0],
        widths[1],
        widths[2],
        widths[3],
        widths[4]
    )
    .expect("string write");
    for seq in seqs {
        if seq.dim != layout.dim() {
            return Err(QcError::Shape(format!(
                "sequence {} has dim {} but layout declares {}",
                seq.sample_id,
                seq.dim,
                layout.dim()
            )));
        }
        if seq.vectors.is_empty() {
            return Err(QcError::Value(format!(
                "sequence {} has no token vectors",
                seq.sample_id
            )));
        }
        write!(out, "{}\t{}", seq.sample_id, seq.dim).expect("string write");
        for vector in &seq.vectors {
            if vector.len() != seq.dim {
                return Err(QcError::Shape(format!(
                    "sequence {} has a vector of length {}",
                    seq.sample_id,
                    vector.len()
                )));
            }
            out.push('\t');
            for (i, &value) in vector.iter().enumerate() {
                if !value.is_finite() {
                    return Err(QcError::Value(format!(
                        "non-finite feature in sequence {}",
                        seq.sample_id
                    )));
                }
                if i > 0 {
                    out.push(',');
                }
                write!(out, "{}", value as f32).expect("string write");
            }
        }
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// Read a feature file back: the declared layout plus all sequences.
pub fn import_features(path: &Path) -> Result<(FeatureLayout, Vec<SentenceFeatureSequence>)> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();

    let (_, header) = lines
        .next()
        .ok_or_else(|| QcError::Schema("empty feature file".into()))?;
    let layout = parse_feature_header(header)?;

    let mut seqs = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        let mut fields = line.split('\t');
        let id: usize =
            fields
                .next()
                .and_then(|f| f.parse().ok())
                .ok_or_else(|| QcError::Parse {
                    line: line_no,
                    message: "bad record id".into(),
                })?;
        let dim: usize =
            fields
                .next()
                .and_then(|f| f.parse().ok())
                .ok_or_else(|| QcError::Parse {
                    line: line_no,
                    message: "bad record dim".into(),
                })?;
        if dim != layout.dim() {
            return Err(QcError::Schema(format!(
                "record {id} has dim {dim} but the header declares {}",
                layout.dim()
            )));
        }
        let mut vectors = Vec::new();
        for token_field in fields {
            let mut vector = Vec::with_capacity(dim);
            for raw in token_field.split(',') {
                let value: f32 = raw.parse().map_err(|_| QcError::Parse {
                    line: line_no,
                    message: format!("bad float {raw:?}"),
                })?;
                if !value.is_finite() {
                    return Err(QcError::Value(format!("non-finite feature in record {id}")));
                }
                vector.push(value as f64);
            }
            if vector.len() != dim {
                return Err(QcError::Schema(format!(
                    "record {id} has a vector of length {} (dim {dim})",
                    vector.len()
                )));
            }
            vectors.push(vector);
        }
        if vectors.is_empty() {
            return Err(QcError::Schema(format!("record {id} has no tokens")));
        }
        seqs.push(SentenceFeatureSequence {
            sample_id: id,
            dim,
            vectors,
        });
    }
    Ok((layout, seqs))
}

fn parse_feature_header(header: &str) -> Result<FeatureLayout> {
    let mut fields = header.split('\t');
    let magic: String = fields.by_ref().take(2).collect::<Vec<_>>().join("\t");
    if magic != FEATURE_MAGIC {
        return Err(QcError::Schema(format!("bad feature header {header:?}")));
    }
    let mut dim: Option<usize> = None;
    let mut widths: Option<[usize; 5]> = None;
    for field in fields {
        if let Some(raw) = field.strip_prefix("dim=") {
            dim = raw.parse().ok();
        } else if let Some(raw) = field.strip_prefix("blocks=") {
            let parts: Vec<usize> = raw.split(',').filter_map(|p| p.parse().ok()).collect();
            if parts.len() == 5 {
                widths = Some([parts[0], parts[1], parts[2], parts[3], parts[4]]);
            }
        }
    }
    let (dim, widths) = match (dim, widths) {
        (Some(d), Some(w)) => (d, w),
        _ => {
            return Err(QcError::Schema(
                "feature header missing dim or blocks".into(),
            ))
        }
    };
    let layout = FeatureLayout::from_widths(widths);
    if layout.dim() != dim {
        return Err(QcError::Schema(format!(
            "block widths sum to {} but dim says {dim}",
            layout.dim()
        )));
    }
    Ok(layout)
}

/// A trained feature extractor: both language models, the lexical table,
/// and the embedding table, with the tokenizer flag they were built under.
#[derive(Debug, Clone)]
pub struct FeatureExtractor {
    pub tokenizer: TokenizerConfig,
    pub forward: DirectionalLm,
    pub backward: DirectionalLm,
    pub lexical: LexicalTable,
    pub embeddings: EmbeddingTable,
}

impl FeatureExtractor {
    pub fn layout(&self) -> FeatureLayout {
        FeatureLayout::for_embedding_dim(self.embeddings.dim())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        out.push_str(FE_MAGIC);
        out.push('\n');
        writeln!(out, "lowercase\t{}", self.tokenizer.lowercase).expect("string write");
        writeln!(out, "order\t{}", self.forward.order()).expect("string write");
        writeln!(out, "alpha\t{}", self.forward.alpha()).expect("string write");
        writeln!(out, "embed_dim\t{}", self.embeddings.dim()).expect("string write");
        writeln!(out, "embed_seed\t{}", self.embeddings.seed()).expect("string write");

        for (name, lm) in [("forward", &self.forward), ("backward", &self.backward)] {
            writeln!(out, "lm\t{name}\tvocab\t{}", lm.vocab().len()).expect("string write");
            for token in lm.vocab() {
                writeln!(out, "v\t{token}").expect("string write");
            }
            for (k, ctx, total, by_token) in lm.tables_for_io() {
                write!(out, "c\t{k}\t{total}\t{}", ctx.join(" ")).expect("string write");
                for (token, count) in by_token {
                    write!(out, "\t{token} {count}").expect("string write");
                }
                out.push('\n');
            }
            writeln!(out, "end\t{name}").expect("string write");
        }

        let (target_vocab, counts) = self.lexical.parts_for_io();
        writeln!(
            out,
            "lex\talpha\t{}\tvocab\t{}",
            self.lexical.alpha(),
            target_vocab.len()
        )
        .expect("string write");
        for token in target_vocab {
            writeln!(out, "v\t{token}").expect("string write");
        }
        for (src, by_target) in counts {
            write!(out, "c\t{src}").expect("string write");
            for (tgt, count) in by_target {
                write!(out, "\t{tgt} {count}").expect("string write");
            }
            out.push('\n');
        }
        writeln!(out, "end\tlex").expect("string write");

        writeln!(out, "emb\tvocab\t{}", self.embeddings.vocab_len()).expect("string write");
        for token in self.embeddings.vocab_for_io() {
            writeln!(out, "v\t{token}").expect("string write");
        }
        writeln!(out, "end\temb").expect("string write");

        fs::write(path, out)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let mut lines = text.lines();
        if lines.next() != Some(FE_MAGIC) {
            return Err(QcError::Schema("bad extractor file header".into()));
        }

        let mut lowercase = true;
        let mut order = 0usize;
        let mut alpha = 0.0f64;
        let mut embed_dim = 0usize;
        let mut embed_seed = 0u64;
        let mut lms: BTreeMap<String, DirectionalLm> = BTreeMap::new();
        let mut lexical: Option<LexicalTable> = None;
        let mut emb_vocab: Vec<String> = Vec::new();

        let fail = |msg: &str| QcError::Schema(format!("extractor file: {msg}"));

        let mut lines = lines.peekable();
        while let Some(line) = lines.next() {
            let fields: Vec<&str> = line.split('\t').collect();
            match fields.first().copied() {
                Some("lowercase") => {
                    lowercase = fields.get(1) == Some(&"true");
                }
                Some("order") => {
                    order = fields
                        .get(1)
                        .and_then(|f| f.parse().ok())
                        .ok_or_else(|| fail("bad order"))?;
                }
                Some("alpha") => {
                    alpha = fields
                        .get(1)
                        .and_then(|f| f.parse().ok())
                        .ok_or_else(|| fail("bad alpha"))?;
                }
                Some("embed_dim") => {
                    embed_dim = fields
                        .get(1)
                        .and_then(|f| f.parse().ok())
                        .ok_or_else(|| fail("bad embed_dim"))?;
                }
                Some("embed_seed") => {
                    embed_seed = fields
                        .get(1)
                        .and_then(|f| f.parse().ok())
                        .ok_or_else(|| fail("bad embed_seed"))?;
                }
                Some("lm") => {
                    let name = fields.get(1).copied().ok_or_else(|| fail("unnamed lm"))?;
                    let (vocab, entries) = read_lm_section(&mut lines, &fail)?;
                    let direction = if name == "forward" {
                        Direction::Forward
                    } else {
                        Direction::Backward
                    };
                    let lm = DirectionalLm::from_parts(order, alpha, direction, vocab, entries)?;
                    lms.insert(name.to_string(), lm);
                }
                Some("lex") => {
                    lexical = Some(read_lex_section(&mut lines, alpha, &fail)?);
                }
                Some("emb") => {
                    emb_vocab = read_vocab_section(&mut lines, "emb", &fail)?;
                }
                Some(other) => return Err(fail(&format!("unexpected line kind {other:?}"))),
                None => return Err(fail("blank line")),
            }
        }

        let forward = lms
            .remove("forward")
            .ok_or_else(|| fail("missing forward lm"))?;
        let backward = lms
            .remove("backward")
            .ok_or_else(|| fail("missing backward lm"))?;
        let lexical = lexical.ok_or_else(|| fail("missing lexical table"))?;
        let embeddings = EmbeddingTable::build(&emb_vocab, embed_dim, embed_seed);
        Ok(FeatureExtractor {
            tokenizer: TokenizerConfig { lowercase },
            forward,
            backward,
            lexical,
            embeddings,
        })
    }
}

fn read_lm_section<'a, I: Iterator<Item = &'a str>>(
    lines: &mut std::iter::Peekable<I>,
    fail: &dyn Fn(&str) -> QcError,
) -> Result<(Vec<String>, crate::features::lm::LmCountEntries)> {
    let mut vocab = Vec::new();
    let mut entries = Vec::new();
    for line in lines.by_ref() {
        let fields: Vec<&str> = line.split('\t').collect();
        match fields.first().copied() {
            Some("v") => vocab.push(fields.get(1).copied().unwrap_or_default().to_string()),
            Some("c") => {
                let k: usize = fields
                    .get(1)
                    .and_then(|f| f.parse().ok())
                    .ok_or_else(|| fail("bad context order"))?;
                let total: u64 = fields
                    .get(2)
                    .and_then(|f| f.parse().ok())
                    .ok_or_else(|| fail("bad context total"))?;
                let ctx: Vec<String> = fields
                    .get(3)
                    .map(|f| f.split_whitespace().map(str::to_string).collect())
                    .unwrap_or_default();
                let mut by_token = BTreeMap::new();
                for pair in &fields[4..] {
                    let (token, count) = pair
                        .rsplit_once(' ')
                        .ok_or_else(|| fail("bad token count pair"))?;
                    let count: u64 = count.parse().map_err(|_| fail("bad count"))?;
                    by_token.insert(token.to_string(), count);
                }
                entries.push((k, ctx, total, by_token));
            }
            Some("end") => return Ok((vocab, entries)),
            _ => return Err(fail("unexpected line in lm section")),
        }
    }
    Err(fail("unterminated lm section"))
}

fn read_lex_section<'a, I: Iterator<Item = &'a str>>(
    lines: &mut std::iter::Peekable<I>,
    alpha: f64,
    fail: &dyn Fn(&str) -> QcError,
) -> Result<LexicalTable> {
    let mut vocab = BTreeSet::new();
    let mut counts: BTreeMap<String, BTreeMap<String, u64>> = BTreeMap::new();
    for line in lines.by_ref() {
        let fields: Vec<&str> = line.split('\t').collect();
        match fields.first().copied() {
            Some("v") => {
                vocab.insert(fields.get(1).copied().unwrap_or_default().to_string());
            }
            Some("c") => {
                let src = fields
                    .get(1)
                    .copied()
                    .ok_or_else(|| fail("missing source token"))?;
                let mut by_target = BTreeMap::new();
                for pair in &fields[2..] {
                    let (token, count) = pair
                        .rsplit_once(' ')
                        .ok_or_else(|| fail("bad token count pair"))?;
                    let count: u64 = count.parse().map_err(|_| fail("bad count"))?;
                    by_target.insert(token.to_string(), count);
                }
                counts.insert(src.to_string(), by_target);
            }
            Some("end") => return Ok(LexicalTable::from_parts(alpha, vocab, counts)),
            _ => return Err(fail("unexpected line in lex section")),
        }
    }
    Err(fail("unterminated lex section"))
}

fn read_vocab_section<'a, I: Iterator<Item = &'a str>>(
    lines: &mut std::iter::Peekable<I>,
    section: &str,
    fail: &dyn Fn(&str) -> QcError,
) -> Result<Vec<String>> {
    let mut vocab = Vec::new();
    for line in lines.by_ref() {
        let fields: Vec<&str> = line.split('\t').collect();
        match fields.first().copied() {
            Some("v") => vocab.push(fields.get(1).copied().unwrap_or_default().to_string()),
            Some("end") => return Ok(vocab),
            _ => return Err(fail(&format!("unexpected line in {section} section"))),
        }
    }
    Err(fail(&format!("unterminated {section} section")))
}
