//! `eval`, `sweep`, and `report`: score a trained model, run the
//! regression-threshold baseline, and render results tables.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::corpus::SplitName;
use crate::error::{QcError, Result};
use crate::metrics;
use crate::model::{classify, load_model, regress, HeadKind};

use super::data::{require, split_name};
use super::kv::{threshold_key, KvMap};
use super::modeling::load_split;
use super::{parse_thresholds, EvalArgs, ReportArgs, SweepArgs, DEFAULT_THRESHOLDS};

fn resolve_thresholds(flag: Option<String>, cfg: &KvMap) -> Result<Vec<f64>> {
    let raw = flag
        .or_else(|| cfg.raw("thresholds").map(str::to_string))
        .unwrap_or_else(|| DEFAULT_THRESHOLDS.to_string());
    parse_thresholds(&raw)
}

pub fn cmd_eval(args: EvalArgs) -> Result<()> {
    let cfg = KvMap::load_optional(args.config.as_deref())?;
    let model_path = require(args.model, &cfg, "model")?;
    let features = require(args.features, &cfg, "features")?;
    let data = require(args.data, &cfg, "data")?;
    let scores_out = require(args.scores_out, &cfg, "scores_out")?;
    let metrics_out = require(args.metrics_out, &cfg, "metrics_out")?;
    let split = split_name(args.split, &cfg, SplitName::Test)?;
    let lang = args
        .lang
        .or_else(|| cfg.raw("lang").map(str::to_string))
        .unwrap_or_else(|| "unspecified".to_string());
    let model_name = args
        .model_name
        .or_else(|| cfg.raw("model_name").map(str::to_string))
        .unwrap_or_else(|| {
            model_path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "model".to_string())
        });
    let thresholds = resolve_thresholds(args.thresholds, &cfg)?;

    let params = load_model(&model_path)?;
    let loaded = load_split(&features, &data, split, &lang)?;
    if loaded.layout != params.layout {
        return Err(QcError::Shape(format!(
            "feature file {} has dim {} but the model expects {}",
            features.display(),
            loaded.layout.dim(),
            params.layout.dim()
        )));
    }

    // Raw per-sample predictions: probability of good, or predicted rate.
    let mut predictions = Vec::with_capacity(loaded.seqs.len());
    for seq in &loaded.seqs {
        let value = match params.config.head {
            HeadKind::Classification => classify(&params, seq)?,
            HeadKind::Regression => regress(&params, seq)?,
        };
        predictions.push(value);
    }

    let mut scores_text = String::from("id\tscore\tlabel\thter\n");
    for ((seq, &pred), (&good, &hter)) in loaded
        .seqs
        .iter()
        .zip(predictions.iter())
        .zip(loaded.labels.iter().zip(loaded.hters.iter()))
    {
        writeln!(
            scores_text,
            "{}\t{}\t{}\t{:.6}",
            seq.sample_id,
            pred,
            if good { "good" } else { "bad" },
            hter
        )
        .expect("string write");
    }
    fs::write(&scores_out, scores_text)?;

    // Goodness scores for threshold metrics: the classifier probability as
    // is; regression predictions negated so that higher still means better.
    let goodness: Vec<f64> = match params.config.head {
        HeadKind::Classification => predictions.clone(),
        HeadKind::Regression => predictions.iter().map(|p| -p).collect(),
    };

    let mut block = KvMap::default();
    block.set("model", model_name);
    block.set("lang", lang);
    block.set("split", split.to_string());
    block.set("head", params.config.head.to_string());
    block.set("n", loaded.seqs.len().to_string());
    block.set(
        "thresholds",
        thresholds
            .iter()
            .map(|t| threshold_key(*t))
            .collect::<Vec<_>>()
            .join(","),
    );
    for &t in &thresholds {
        let value = metrics::r_at_p(&goodness, &loaded.labels, t)?;
        block.set(
            &format!("r_at_p_{}", threshold_key(t)),
            format!("{value:.4}"),
        );
    }
    match params.config.head {
        HeadKind::Classification => {
            let (precision, recall, f1) = metrics::f1(&goodness, &loaded.labels, 0.5)?;
            block.set(
                "precision_0.5",
                precision.map_or("undefined".to_string(), |p| format!("{p:.4}")),
            );
            block.set("recall_0.5", format!("{recall:.4}"));
            block.set("f1_0.5", format!("{f1:.4}"));
        }
        HeadKind::Regression => {
            block.set(
                "mae",
                format!("{:.4}", metrics::mae(&predictions, &loaded.hters)?),
            );
            block.set(
                "rmse",
                format!("{:.4}", metrics::rmse(&predictions, &loaded.hters)?),
            );
            match metrics::pearson(&predictions, &loaded.hters) {
                Ok(r) => block.set("pearson", format!("{r:.4}")),
                Err(QcError::DegenerateVariance) => block.set("pearson", "undefined".to_string()),
                Err(e) => return Err(e),
            }
        }
    }
    block.save(&metrics_out)?;
    print!("{}", block.to_text());
    Ok(())
}

pub fn cmd_sweep(args: SweepArgs) -> Result<()> {
    let cfg = KvMap::load_optional(args.config.as_deref())?;
    let model_path = require(args.model, &cfg, "model")?;
    let features = require(args.features, &cfg, "features")?;
    let data = require(args.data, &cfg, "data")?;
    let out = args
        .out
        .or_else(|| cfg.raw("out").map(std::path::PathBuf::from));
    let split = split_name(args.split, &cfg, SplitName::Dev)?;
    let lang = args
        .lang
        .or_else(|| cfg.raw("lang").map(str::to_string))
        .unwrap_or_else(|| "unspecified".to_string());
    let lo = cfg.resolve(args.lo, "lo", 0.0)?;
    let hi = cfg.resolve(args.hi, "hi", 0.5)?;
    let step = cfg.resolve(args.step, "step", 0.01)?;
    let thresholds = resolve_thresholds(args.thresholds, &cfg)?;

    let params = load_model(&model_path)?;
    if params.config.head != HeadKind::Regression {
        return Err(QcError::Config(
            "sweep requires a regression model; train one with --head regression".into(),
        ));
    }
    let loaded = load_split(&features, &data, split, &lang)?;
    if loaded.layout != params.layout {
        return Err(QcError::Shape(format!(
            "feature file {} has dim {} but the model expects {}",
            features.display(),
            loaded.layout.dim(),
            params.layout.dim()
        )));
    }

    let mut predictions = Vec::with_capacity(loaded.seqs.len());
    for seq in &loaded.seqs {
        predictions.push(regress(&params, seq)?);
    }
    let sweep = metrics::regression_threshold_sweep(&predictions, &loaded.labels, lo, hi, step)?;

    let mut table = String::from("tau\tpredicted_good\ttrue_good\tprecision\trecall\n");
    for point in &sweep.points {
        writeln!(
            table,
            "{:.2}\t{}\t{}\t{}\t{:.4}",
            point.threshold,
            point.predicted_positive,
            point.true_positive,
            point
                .precision
                .map_or("undefined".to_string(), |p| format!("{p:.4}")),
            point.recall
        )
        .expect("string write");
    }
    writeln!(
        table,
        "max_precision\t\t\t{}\t",
        sweep
            .max_precision
            .map_or("undefined".to_string(), |p| format!("{p:.4}"))
    )
    .expect("string write");
    for &t in &thresholds {
        writeln!(
            table,
            "r_at_p_{}\t\t\t\t{:.4}",
            threshold_key(t),
            sweep.r_at_p(t)
        )
        .expect("string write");
    }

    if let Some(path) = out {
        fs::write(path, &table)?;
    }
    print!("{table}");
    Ok(())
}

/// Render the results table from metric blocks written by `eval`.
pub fn render_report(blocks: &[KvMap]) -> Result<String> {
    if blocks.is_empty() {
        return Err(QcError::Config("report needs at least one input".into()));
    }
    let threshold_list = blocks[0]
        .raw("thresholds")
        .ok_or_else(|| QcError::Config("metric block missing thresholds key".into()))?
        .to_string();
    for block in blocks {
        if block.raw("thresholds") != Some(threshold_list.as_str()) {
            return Err(QcError::Config(format!(
                "inconsistent threshold sets across inputs: {:?} vs {:?}",
                threshold_list,
                block.raw("thresholds").unwrap_or("<missing>")
            )));
        }
    }
    let keys: Vec<String> = threshold_list.split(',').map(str::to_string).collect();

    let mut out = String::from("Model\tLang\tSplit");
    for key in &keys {
        write!(out, "\tR@P_{key}").expect("string write");
    }
    out.push('\n');
    for block in blocks {
        let field = |k: &str| -> Result<&str> {
            block
                .raw(k)
                .ok_or_else(|| QcError::Config(format!("metric block missing key {k:?}")))
        };
        write!(
            out,
            "{}\t{}\t{}",
            field("model")?,
            field("lang")?,
            field("split")?
        )
        .expect("string write");
        for key in &keys {
            let value: f64 = block
                .get(&format!("r_at_p_{key}"))?
                .ok_or_else(|| QcError::Config(format!("metric block missing r_at_p_{key}")))?;
            write!(out, "\t{value:.4}").expect("string write");
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn cmd_report(args: ReportArgs) -> Result<()> {
    let cfg = KvMap::load_optional(args.config.as_deref())?;
    let mut inputs = args.inputs;
    if inputs.is_empty() {
        if let Some(raw) = cfg.raw("inputs") {
            inputs = raw.split(',').map(std::path::PathBuf::from).collect();
        }
    }
    if inputs.is_empty() {
        return Err(QcError::Config("report needs at least one input".into()));
    }
    let out = args
        .out
        .or_else(|| cfg.raw("out").map(std::path::PathBuf::from));

    let blocks = inputs
        .iter()
        .map(|p| KvMap::load(Path::new(p)))
        .collect::<Result<Vec<_>>>()?;
    let table = render_report(&blocks)?;
    if let Some(path) = out {
        fs::write(path, &table)?;
    }
    print!("{table}");
    Ok(())
}
