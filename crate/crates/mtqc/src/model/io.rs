//! Versioned text format for trained models.
//!
//! The file carries the full configuration, the feature block widths the
//! model was trained against, and every weight array with its declared
//! shape. Floats are written in shortest round-trip form, so identical
//! parameters always serialize to identical bytes. Loading rebuilds the
//! model and validates every shape against the configuration.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{QcError, Result};
use crate::features::FeatureLayout;

use super::config::{HeadKind, ModelConfig, RegressionLoss};
use super::math::Matrix;
use super::net::ModelParams;

const MODEL_MAGIC: &str = "#mtqc-model\tv1";

fn write_matrix(out: &mut String, name: &str, m: &Matrix) {
    writeln!(out, "weights\t{name}\t{}\t{}", m.rows, m.cols).expect("string write");
    for (i, w) in m.data.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        write!(out, "{w}").expect("string write");
    }
    out.push('\n');
}

fn write_vector(out: &mut String, name: &str, v: &[f64]) {
    writeln!(out, "weights\t{name}\t1\t{}", v.len()).expect("string write");
    for (i, w) in v.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        write!(out, "{w}").expect("string write");
    }
    out.push('\n');
}

/// Serialize a model to its text format.
pub fn save_model(params: &ModelParams, path: &Path) -> Result<()> {
    let c = &params.config;
    let mut out = String::new();
    out.push_str(MODEL_MAGIC);
    out.push('\n');
    writeln!(out, "head\t{}", c.head).expect("string write");
    writeln!(out, "regression_loss\t{}", c.regression_loss).expect("string write");
    writeln!(out, "num_layers\t{}", c.num_layers).expect("string write");
    writeln!(out, "hidden_size\t{}", c.hidden_size).expect("string write");
    writeln!(out, "dropout\t{}", c.dropout).expect("string write");
    writeln!(out, "learning_rate\t{}", c.learning_rate).expect("string write");
    writeln!(out, "epochs\t{}", c.epochs).expect("string write");
    writeln!(out, "batch_size\t{}", c.batch_size).expect("string write");
    writeln!(out, "seed\t{}", c.seed).expect("string write");
    writeln!(out, "positive_weight\t{}", c.positive_weight).expect("string write");
    writeln!(out, "precision_target\t{}", c.precision_target).expect("string write");
    let w = params.layout.widths();
    writeln!(out, "blocks\t{},{},{},{},{}", w[0], w[1], w[2], w[3], w[4]).expect("string write");
    writeln!(out, "input_dim\t{}", params.layout.dim()).expect("string write");

    for (l, layer) in params.weights.layers.iter().enumerate() {
        for (dir, cell) in [("fwd", &layer.forward), ("bwd", &layer.backward)] {
            write_matrix(
                &mut out,
                &format!("layer{l}.{dir}.w_in_update"),
                &cell.w_in_update,
            );
            write_matrix(
                &mut out,
                &format!("layer{l}.{dir}.w_rec_update"),
                &cell.w_rec_update,
            );
            write_vector(
                &mut out,
                &format!("layer{l}.{dir}.b_update"),
                &cell.b_update,
            );
            write_matrix(
                &mut out,
                &format!("layer{l}.{dir}.w_in_cand"),
                &cell.w_in_cand,
            );
            write_matrix(
                &mut out,
                &format!("layer{l}.{dir}.w_rec_cand"),
                &cell.w_rec_cand,
            );
            write_vector(&mut out, &format!("layer{l}.{dir}.b_cand"), &cell.b_cand);
        }
    }
    write_vector(&mut out, "head_w", &params.weights.head_w);
    write_vector(&mut out, "head_b", &[params.weights.head_b]);
    out.push_str("end\n");

    fs::write(path, out)?;
    Ok(())
}

struct NamedArray {
    name: String,
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

/// Load a model and validate its shapes.
pub fn load_model(path: &Path) -> Result<ModelParams> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    if lines.next() != Some(MODEL_MAGIC) {
        return Err(QcError::Schema("bad model file header".into()));
    }

    let mut config = ModelConfig::default();
    let mut layout: Option<FeatureLayout> = None;
    let mut declared_dim: Option<usize> = None;
    let mut arrays: Vec<NamedArray> = Vec::new();
    let mut saw_end = false;

    let fail = |msg: String| QcError::Schema(format!("model file: {msg}"));

    while let Some(line) = lines.next() {
        let fields: Vec<&str> = line.split('\t').collect();
        match fields.first().copied() {
            Some("head") => {
                config.head = fields
                    .get(1)
                    .and_then(|f| f.parse::<HeadKind>().ok())
                    .ok_or_else(|| fail("bad head".into()))?;
            }
            Some("regression_loss") => {
                config.regression_loss = fields
                    .get(1)
                    .and_then(|f| f.parse::<RegressionLoss>().ok())
                    .ok_or_else(|| fail("bad regression_loss".into()))?;
            }
            Some("num_layers") => config.num_layers = parse_field(&fields, &fail)?,
            Some("hidden_size") => config.hidden_size = parse_field(&fields, &fail)?,
            Some("dropout") => config.dropout = parse_field(&fields, &fail)?,
            Some("learning_rate") => config.learning_rate = parse_field(&fields, &fail)?,
            Some("epochs") => config.epochs = parse_field(&fields, &fail)?,
            Some("batch_size") => config.batch_size = parse_field(&fields, &fail)?,
            Some("seed") => config.seed = parse_field(&fields, &fail)?,
            Some("positive_weight") => config.positive_weight = parse_field(&fields, &fail)?,
            Some("precision_target") => config.precision_target = parse_field(&fields, &fail)?,
            Some("blocks") => {
                let widths: Vec<usize> = fields
                    .get(1)
                    .map(|f| f.split(',').filter_map(|p| p.parse().ok()).collect())
                    .unwrap_or_default();
                if widths.len() != 5 {
                    return Err(fail("blocks must list five widths".into()));
                }
                layout = Some(FeatureLayout::from_widths([
                    widths[0], widths[1], widths[2], widths[3], widths[4],
                ]));
            }
            Some("input_dim") => declared_dim = Some(parse_field(&fields, &fail)?),
            Some("weights") => {
                let name = fields
                    .get(1)
                    .copied()
                    .ok_or_else(|| fail("unnamed weight array".into()))?;
                let rows: usize = fields
                    .get(2)
                    .and_then(|f| f.parse().ok())
                    .ok_or_else(|| fail(format!("bad rows for {name}")))?;
                let cols: usize = fields
                    .get(3)
                    .and_then(|f| f.parse().ok())
                    .ok_or_else(|| fail(format!("bad cols for {name}")))?;
                let data_line = lines
                    .next()
                    .ok_or_else(|| fail(format!("missing data for {name}")))?;
                let data: Vec<f64> = data_line
                    .split(' ')
                    .map(|p| p.parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| fail(format!("bad float in {name}")))?;
                if data.len() != rows * cols {
                    return Err(QcError::Shape(format!(
                        "{name}: declared {rows}x{cols} but {} values present",
                        data.len()
                    )));
                }
                if data.iter().any(|w| !w.is_finite()) {
                    return Err(QcError::Value(format!("non-finite weight in {name}")));
                }
                arrays.push(NamedArray {
                    name: name.to_string(),
                    rows,
                    cols,
                    data,
                });
            }
            Some("end") => {
                saw_end = true;
                break;
            }
            Some(other) => return Err(fail(format!("unexpected line kind {other:?}"))),
            None => return Err(fail("blank line".into())),
        }
    }
    if !saw_end {
        return Err(fail("truncated file (no end marker)".into()));
    }

    let layout = layout.ok_or_else(|| fail("missing blocks line".into()))?;
    if declared_dim != Some(layout.dim()) {
        return Err(QcError::Shape(format!(
            "input_dim {:?} disagrees with block widths (sum {})",
            declared_dim,
            layout.dim()
        )));
    }
    config.validate()?;

    // Assemble weights at the right shapes, then fill from the arrays.
    let mut params = ModelParams::zeros(config, layout)?;
    let mut take = |name: String, rows: usize, cols: usize| -> Result<Vec<f64>> {
        let pos = arrays
            .iter()
            .position(|a| a.name == name)
            .ok_or_else(|| QcError::Schema(format!("model file: missing array {name}")))?;
        let a = arrays.remove(pos);
        if a.rows != rows || a.cols != cols {
            return Err(QcError::Shape(format!(
                "{name}: expected {rows}x{cols}, file has {}x{}",
                a.rows, a.cols
            )));
        }
        Ok(a.data)
    };

    let hidden = params.config.hidden_size;
    for l in 0..params.config.num_layers {
        let input = if l == 0 {
            params.layout.dim()
        } else {
            2 * hidden
        };
        for dir in ["fwd", "bwd"] {
            let cell = if dir == "fwd" {
                &mut params.weights.layers[l].forward
            } else {
                &mut params.weights.layers[l].backward
            };
            cell.w_in_update.data = take(format!("layer{l}.{dir}.w_in_update"), hidden, input)?;
            cell.w_rec_update.data = take(format!("layer{l}.{dir}.w_rec_update"), hidden, hidden)?;
            cell.b_update = take(format!("layer{l}.{dir}.b_update"), 1, hidden)?;
            cell.w_in_cand.data = take(format!("layer{l}.{dir}.w_in_cand"), hidden, input)?;
            cell.w_rec_cand.data = take(format!("layer{l}.{dir}.w_rec_cand"), hidden, hidden)?;
            cell.b_cand = take(format!("layer{l}.{dir}.b_cand"), 1, hidden)?;
        }
    }
    params.weights.head_w = take("head_w".into(), 1, 2 * hidden)?;
    params.weights.head_b = take("head_b".into(), 1, 1)?[0];
    if !arrays.is_empty() {
        return Err(QcError::Schema(format!(
            "model file: {} unexpected weight arrays (first: {})",
            arrays.len(),
            arrays[0].name
        )));
    }
    Ok(params)
}

fn parse_field<T: std::str::FromStr>(
    fields: &[&str],
    fail: &dyn Fn(String) -> QcError,
) -> Result<T> {
    fields
        .get(1)
        .and_then(|f| f.parse().ok())
        .ok_or_else(|| fail(format!("bad value in {fields:?}")))
}
