//! `convert` and `ter`: dataset ingestion and edit-rate scoring.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::corpus::{
    self, derive_labels, load_qe_dataset, split_stats, write_qc_tsv, SplitName, TokenizerConfig,
};
use crate::error::{QcError, Result};
use crate::ter;

use super::kv::KvMap;
use super::{ConvertArgs, TerArgs};

pub(crate) fn require(path: Option<PathBuf>, cfg: &KvMap, key: &str) -> Result<PathBuf> {
    match path {
        Some(p) => Ok(p),
        None => match cfg.raw(key) {
            Some(raw) => Ok(PathBuf::from(raw)),
            None => Err(QcError::Config(format!("missing required --{key}"))),
        },
    }
}

pub(crate) fn optional_path(path: Option<PathBuf>, cfg: &KvMap, key: &str) -> Option<PathBuf> {
    path.or_else(|| cfg.raw(key).map(PathBuf::from))
}

pub(crate) fn split_name(
    flag: Option<String>,
    cfg: &KvMap,
    default: SplitName,
) -> Result<SplitName> {
    let raw = match flag.or_else(|| cfg.raw("split").map(str::to_string)) {
        Some(raw) => raw,
        None => return Ok(default),
    };
    SplitName::from_str(&raw).map_err(QcError::Config)
}

pub(crate) fn tokenizer(keep_case: bool, cfg: &KvMap) -> Result<TokenizerConfig> {
    let lowercase = if keep_case {
        false
    } else {
        cfg.resolve(None, "lowercase", true)?
    };
    Ok(TokenizerConfig { lowercase })
}

pub fn cmd_convert(args: ConvertArgs) -> Result<()> {
    let cfg = KvMap::load_optional(args.config.as_deref())?;
    let src = require(args.src, &cfg, "src")?;
    let mt = require(args.mt, &cfg, "mt")?;
    let pe = optional_path(args.pe, &cfg, "pe");
    let hter = optional_path(args.hter, &cfg, "hter");
    let out = require(args.out, &cfg, "out")?;
    let split = split_name(args.split, &cfg, SplitName::Train)?;
    let lang = args
        .lang
        .or_else(|| cfg.raw("lang").map(str::to_string))
        .unwrap_or_else(|| "unspecified".to_string());
    let epsilon = cfg.resolve(args.epsilon, "epsilon", corpus::GOOD_EPSILON)?;
    let tok = tokenizer(args.keep_case, &cfg)?;

    let qe = load_qe_dataset(split, &lang, &src, &mt, pe.as_deref(), hter.as_deref(), tok)?;
    let labeled = derive_labels(&qe, epsilon)?;
    write_qc_tsv(&labeled, &out)?;
    let stats = split_stats(&labeled)?;
    println!("{lang} {split}: {}", stats.format_compact());
    Ok(())
}

fn read_nonempty_lines(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path)?;
    let mut lines: Vec<String> = text.split('\n').map(str::to_string).collect();
    if lines.last().is_some_and(|l| l.is_empty()) {
        lines.pop();
    }
    Ok(lines)
}

pub fn cmd_ter(args: TerArgs) -> Result<()> {
    let cfg = KvMap::load_optional(args.config.as_deref())?;
    let hyp_path = require(args.hyp, &cfg, "hyp")?;
    let ref_path = require(args.reference, &cfg, "ref")?;
    let out = optional_path(args.out, &cfg, "out");
    let tok = tokenizer(args.keep_case, &cfg)?;

    let hyp_lines = read_nonempty_lines(&hyp_path)?;
    let ref_lines = read_nonempty_lines(&ref_path)?;
    if hyp_lines.len() != ref_lines.len() {
        let line = hyp_lines.len().min(ref_lines.len()) + 1;
        return Err(QcError::Alignment {
            line,
            message: format!(
                "hypothesis has {} lines, reference has {}",
                hyp_lines.len(),
                ref_lines.len()
            ),
        });
    }

    let mut table = String::from("line\tins\tdel\tsub\tshift\tref_len\tscore\n");
    let mut total_edits = 0usize;
    let mut total_ref = 0usize;
    for (idx, (hyp_line, ref_line)) in hyp_lines.iter().zip(ref_lines.iter()).enumerate() {
        let line = idx + 1;
        let with_line = |e: QcError| match e {
            QcError::EmptySentence(what) => QcError::Parse {
                line,
                message: format!("empty sentence {what}"),
            },
            QcError::EmptyReference => QcError::Parse {
                line,
                message: "empty reference".into(),
            },
            other => other,
        };
        let hyp = corpus::tokenize(hyp_line, tok).map_err(with_line)?;
        let reference = corpus::tokenize(ref_line, tok).map_err(with_line)?;
        let result = ter::ter(&hyp, &reference).map_err(with_line)?;
        total_edits += result.total_edits();
        total_ref += result.ref_len;
        writeln!(
            table,
            "{line}\t{}\t{}\t{}\t{}\t{}\t{:.4}",
            result.insertions,
            result.deletions,
            result.substitutions,
            result.shifts,
            result.ref_len,
            result.score
        )
        .expect("string write");
    }
    writeln!(
        table,
        "corpus\t\t\t\t\t{}\t{:.4}",
        total_ref,
        total_edits as f64 / total_ref as f64
    )
    .expect("string write");

    match out {
        Some(path) => fs::write(path, table)?,
        None => print!("{table}"),
    }
    Ok(())
}
