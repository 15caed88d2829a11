//! Dataset ingestion, label derivation, and the QC TSV format.
//!
//! Quality-estimation data arrives as line-aligned text files: source
//! sentences, machine output, and either human post-edits or precomputed
//! edit-rate scores. This module turns those into labeled splits. A sample
//! is `good` exactly when its edit rate is zero (up to a tiny parsing
//! tolerance); everything else needs post-editing and is `bad`.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{QcError, Result};
use crate::ter;

/// Tolerance under which an edit rate counts as exactly zero. Absorbs
/// decimal-parsing artifacts only; any real edit work makes a sample bad.
pub const GOOD_EPSILON: f64 = 1e-9;

/// Difference between a provided score and its recomputation that triggers
/// a provenance warning during ingestion.
pub const HTER_MISMATCH_TOLERANCE: f64 = 0.01;

/// Tokenizer options shared by ingestion and edit-rate computation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TokenizerConfig {
    /// Lowercase before splitting. On by default so recomputed edit rates
    /// are case-insensitive, matching common practice.
    pub lowercase: bool,
}

impl Default for TokenizerConfig {
    fn default() -> Self {
        TokenizerConfig { lowercase: true }
    }
}

/// Whitespace tokenization with optional lowercasing.
///
/// Splits on runs of whitespace and never splits punctuation. Rejects
/// empty or whitespace-only input.
pub fn tokenize(text: &str, config: TokenizerConfig) -> Result<Vec<String>> {
    let text = if config.lowercase {
        text.to_lowercase()
    } else {
        text.to_string()
    };
    let tokens: Vec<String> = text.split_whitespace().map(str::to_string).collect();
    if tokens.is_empty() {
        return Err(QcError::EmptySentence(format!("{text:?}")));
    }
    Ok(tokens)
}

/// Binary quality label: usable as-is, or in need of post-editing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Good,
    Bad,
}

impl Label {
    pub fn is_good(self) -> bool {
        self == Label::Good
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Good => write!(f, "good"),
            Label::Bad => write!(f, "bad"),
        }
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "good" => Ok(Label::Good),
            "bad" => Ok(Label::Bad),
            other => Err(format!("unknown label {other:?}")),
        }
    }
}

/// Which split of a dataset a file belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitName {
    Train,
    Dev,
    Test,
}

impl fmt::Display for SplitName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SplitName::Train => write!(f, "train"),
            SplitName::Dev => write!(f, "dev"),
            SplitName::Test => write!(f, "test"),
        }
    }
}

impl FromStr for SplitName {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "train" => Ok(SplitName::Train),
            "dev" => Ok(SplitName::Dev),
            "test" => Ok(SplitName::Test),
            other => Err(format!("unknown split {other:?} (expected train/dev/test)")),
        }
    }
}

/// Unlabeled sample: sentence pair with its edit-rate score.
///
/// `hter` is `None` only between ingestion steps; `load_qe_dataset` always
/// resolves it, either from a score file or by recomputation against the
/// post-edit.
#[derive(Debug, Clone, PartialEq)]
pub struct QeSample {
    pub id: usize,
    pub source: Vec<String>,
    pub target: Vec<String>,
    pub post_edit: Option<Vec<String>>,
    pub hter: Option<f64>,
}

/// Labeled sample ready for classification.
#[derive(Debug, Clone, PartialEq)]
pub struct QcSample {
    pub id: usize,
    pub source: Vec<String>,
    pub target: Vec<String>,
    pub post_edit: Option<Vec<String>>,
    pub hter: f64,
    pub label: Label,
}

/// An ordered collection of samples with ids 0..n-1.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit<S> {
    pub name: SplitName,
    pub language_pair: String,
    pub samples: Vec<S>,
}

pub type QeSplit = DatasetSplit<QeSample>;
pub type QcSplit = DatasetSplit<QcSample>;

/// Count and positive rate of a labeled split.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitStats {
    pub count: usize,
    pub good_fraction: f64,
}

impl SplitStats {
    /// Report rendering: counts in rounded thousands, whole-percent rate,
    /// e.g. `25k (42%)`.
    pub fn format_compact(&self) -> String {
        let count = if self.count >= 1000 {
            format!("{}k", (self.count as f64 / 1000.0).round() as u64)
        } else {
            self.count.to_string()
        };
        format!("{} ({:.0}%)", count, self.good_fraction * 100.0)
    }
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path)?;
    let mut lines: Vec<String> = text.split('\n').map(str::to_string).collect();
    // A trailing newline produces one empty tail entry, not a data line.
    if lines.last().is_some_and(|l| l.is_empty()) {
        lines.pop();
    }
    Ok(lines)
}

fn check_alignment(counts: &[(String, usize)]) -> Result<()> {
    let min = counts.iter().map(|(_, n)| *n).min().unwrap_or(0);
    for (name, n) in counts {
        if *n != min {
            return Err(QcError::Alignment {
                line: min + 1,
                message: format!("{name} has {n} lines but another input ends at line {min}"),
            });
        }
    }
    Ok(())
}

/// True when a provided score disagrees with its recomputation by more than
/// the provenance tolerance.
pub fn hter_mismatch(file_value: f64, recomputed: f64) -> bool {
    (file_value - recomputed).abs() > HTER_MISMATCH_TOLERANCE
}

/// Load a line-aligned QE dataset.
///
/// At least one of `pe_path` and `hter_path` must be given. Scores from the
/// file win when both are present; a recomputation that disagrees by more
/// than [`HTER_MISMATCH_TOLERANCE`] is reported on stderr but does not
/// change the stored value.
pub fn load_qe_dataset(
    name: SplitName,
    language_pair: &str,
    src_path: &Path,
    mt_path: &Path,
    pe_path: Option<&Path>,
    hter_path: Option<&Path>,
    tokenizer: TokenizerConfig,
) -> Result<QeSplit> {
    if pe_path.is_none() && hter_path.is_none() {
        return Err(QcError::Config(
            "need a post-edit file or a score file to derive edit rates".into(),
        ));
    }

    let src_lines = read_lines(src_path)?;
    let mt_lines = read_lines(mt_path)?;
    let pe_lines = pe_path.map(read_lines).transpose()?;
    let hter_lines = hter_path.map(read_lines).transpose()?;

    let mut counts = vec![
        ("source file".to_string(), src_lines.len()),
        ("mt file".to_string(), mt_lines.len()),
    ];
    if let Some(pe) = &pe_lines {
        counts.push(("post-edit file".to_string(), pe.len()));
    }
    if let Some(ht) = &hter_lines {
        counts.push(("score file".to_string(), ht.len()));
    }
    check_alignment(&counts)?;

    let mut samples = Vec::with_capacity(src_lines.len());
    for (idx, (src, mt)) in src_lines.iter().zip(mt_lines.iter()).enumerate() {
        let line = idx + 1;
        let wrap = |e: QcError| match e {
            QcError::EmptySentence(what) => QcError::Parse {
                line,
                message: format!("empty sentence {what}"),
            },
            other => other,
        };
        let source = tokenize(src, tokenizer).map_err(wrap)?;
        let target = tokenize(mt, tokenizer).map_err(wrap)?;
        let post_edit = match &pe_lines {
            Some(pe) => Some(tokenize(&pe[idx], tokenizer).map_err(wrap)?),
            None => None,
        };

        let file_hter = match &hter_lines {
            Some(lines) => {
                let raw = lines[idx].trim();
                let value: f64 = raw.parse().map_err(|_| QcError::Parse {
                    line,
                    message: format!("unparseable decimal {raw:?}"),
                })?;
                if !value.is_finite() || value < 0.0 {
                    return Err(QcError::Parse {
                        line,
                        message: format!("edit rate must be finite and non-negative, got {raw}"),
                    });
                }
                Some(value)
            }
            None => None,
        };

        let hter = match (file_hter, &post_edit) {
            (Some(value), Some(pe)) => {
                let recomputed = ter::hter(&target, pe)?;
                if hter_mismatch(value, recomputed) {
                    eprintln!(
                        "warning: line {line}: score file says {value:.6} but recomputation gives {recomputed:.6}; keeping the file value"
                    );
                }
                value
            }
            (Some(value), None) => value,
            (None, Some(pe)) => ter::hter(&target, pe)?,
            (None, None) => unreachable!("validated above"),
        };

        samples.push(QeSample {
            id: idx,
            source,
            target,
            post_edit,
            hter: Some(hter),
        });
    }

    Ok(DatasetSplit {
        name,
        language_pair: language_pair.to_string(),
        samples,
    })
}

/// Attach binary labels: `good` iff the edit rate is within `epsilon` of
/// zero. Order and ids are preserved.
pub fn derive_labels(split: &QeSplit, epsilon: f64) -> Result<QcSplit> {
    let mut samples = Vec::with_capacity(split.samples.len());
    for sample in &split.samples {
        let hter = sample.hter.ok_or(QcError::MissingScore { id: sample.id })?;
        let label = if hter <= epsilon {
            Label::Good
        } else {
            Label::Bad
        };
        samples.push(QcSample {
            id: sample.id,
            source: sample.source.clone(),
            target: sample.target.clone(),
            post_edit: sample.post_edit.clone(),
            hter,
            label,
        });
    }
    Ok(DatasetSplit {
        name: split.name,
        language_pair: split.language_pair.clone(),
        samples,
    })
}

/// Count and positive rate of a labeled split.
pub fn split_stats(split: &QcSplit) -> Result<SplitStats> {
    if split.samples.is_empty() {
        return Err(QcError::EmptySplit);
    }
    let good = split.samples.iter().filter(|s| s.label.is_good()).count();
    Ok(SplitStats {
        count: split.samples.len(),
        good_fraction: good as f64 / split.samples.len() as f64,
    })
}

const TSV_HEADER: &str = "id\tsource\ttarget\thter\tlabel";

/// Serialize a labeled split. Edit rates are written with six decimal
/// places; the post-edit column is not part of the schema.
pub fn write_qc_tsv(split: &QcSplit, path: &Path) -> Result<()> {
    let mut out = String::with_capacity(split.samples.len() * 64);
    out.push_str(TSV_HEADER);
    out.push('\n');
    for sample in &split.samples {
        out.push_str(&format!(
            "{}\t{}\t{}\t{:.6}\t{}\n",
            sample.id,
            sample.source.join(" "),
            sample.target.join(" "),
            sample.hter,
            sample.label,
        ));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Read a labeled split back. The file does not carry split metadata, so
/// the caller names the split and language pair.
pub fn read_qc_tsv(path: &Path, name: SplitName, language_pair: &str) -> Result<QcSplit> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == TSV_HEADER => {}
        Some((_, other)) => {
            return Err(QcError::Parse {
                line: 1,
                message: format!("bad header {other:?}"),
            })
        }
        None => return Err(QcError::EmptySplit),
    }

    let mut samples = Vec::new();
    for (idx, row) in lines {
        let line = idx + 1;
        let fields: Vec<&str> = row.split('\t').collect();
        if fields.len() != 5 {
            return Err(QcError::Parse {
                line,
                message: format!("expected 5 columns, got {}", fields.len()),
            });
        }
        let id: usize = fields[0].parse().map_err(|_| QcError::Parse {
            line,
            message: format!("bad id {:?}", fields[0]),
        })?;
        if id != samples.len() {
            return Err(QcError::Parse {
                line,
                message: format!("id {id} out of order (expected {})", samples.len()),
            });
        }
        let source: Vec<String> = fields[1].split_whitespace().map(str::to_string).collect();
        let target: Vec<String> = fields[2].split_whitespace().map(str::to_string).collect();
        if source.is_empty() || target.is_empty() {
            return Err(QcError::Parse {
                line,
                message: "empty source or target".into(),
            });
        }
        let hter: f64 = fields[3].parse().map_err(|_| QcError::Parse {
            line,
            message: format!("bad edit rate {:?}", fields[3]),
        })?;
        let label: Label = fields[4]
            .parse()
            .map_err(|message| QcError::Parse { line, message })?;
        samples.push(QcSample {
            id,
            source,
            target,
            post_edit: None,
            hter,
            label,
        });
    }

    if samples.is_empty() {
        return Err(QcError::EmptySplit);
    }
    Ok(DatasetSplit {
        name,
        language_pair: language_pair.to_string(),
        samples,
    })
}
