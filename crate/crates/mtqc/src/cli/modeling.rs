//! `train` and `grid`: fit models on extracted features.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::corpus::{read_qc_tsv, SplitName};
use crate::error::{QcError, Result};
use crate::features::{import_features, FeatureLayout, SentenceFeatureSequence};
use crate::model::{
    grid_search, save_model, train, GridRanges, HeadKind, ModelConfig, RegressionLoss,
};

use super::data::require;
use super::kv::KvMap;
use super::{GridArgs, TrainArgs};

pub(crate) struct LoadedSplit {
    pub layout: FeatureLayout,
    pub seqs: Vec<SentenceFeatureSequence>,
    /// true = good.
    pub labels: Vec<bool>,
    pub hters: Vec<f64>,
}

impl LoadedSplit {
    pub fn targets(&self, head: HeadKind) -> Vec<f64> {
        match head {
            HeadKind::Classification => self
                .labels
                .iter()
                .map(|&good| if good { 1.0 } else { 0.0 })
                .collect(),
            HeadKind::Regression => self.hters.clone(),
        }
    }
}

/// Load a feature file and its TSV side by side, checking that record ids
/// line up with sample ids.
pub(crate) fn load_split(
    features: &Path,
    data: &Path,
    split: SplitName,
    lang: &str,
) -> Result<LoadedSplit> {
    let (layout, seqs) = import_features(features)?;
    let tsv = read_qc_tsv(data, split, lang)?;
    if seqs.len() != tsv.samples.len() {
        return Err(QcError::Shape(format!(
            "{} feature records vs {} samples in {}",
            seqs.len(),
            tsv.samples.len(),
            data.display()
        )));
    }
    for (seq, sample) in seqs.iter().zip(tsv.samples.iter()) {
        if seq.sample_id != sample.id {
            return Err(QcError::Schema(format!(
                "feature record {} does not match sample {}",
                seq.sample_id, sample.id
            )));
        }
    }
    let labels = tsv.samples.iter().map(|s| s.label.is_good()).collect();
    let hters = tsv.samples.iter().map(|s| s.hter).collect();
    Ok(LoadedSplit {
        layout,
        seqs,
        labels,
        hters,
    })
}

pub(crate) fn build_config(args: &TrainArgs, cfg: &KvMap) -> Result<ModelConfig> {
    let defaults = ModelConfig::default();
    let head = match args
        .head
        .clone()
        .or_else(|| cfg.raw("head").map(str::to_string))
    {
        Some(raw) => HeadKind::from_str(&raw).map_err(QcError::Config)?,
        None => defaults.head,
    };
    let regression_loss = match args
        .loss
        .clone()
        .or_else(|| cfg.raw("loss").map(str::to_string))
    {
        Some(raw) => RegressionLoss::from_str(&raw).map_err(QcError::Config)?,
        None => defaults.regression_loss,
    };
    let config = ModelConfig {
        head,
        regression_loss,
        num_layers: cfg.resolve(args.layers, "layers", defaults.num_layers)?,
        hidden_size: cfg.resolve(args.hidden, "hidden", defaults.hidden_size)?,
        dropout: cfg.resolve(args.dropout, "dropout", defaults.dropout)?,
        learning_rate: cfg.resolve(args.lr, "lr", defaults.learning_rate)?,
        epochs: cfg.resolve(args.epochs, "epochs", defaults.epochs)?,
        batch_size: cfg.resolve(args.batch, "batch", defaults.batch_size)?,
        seed: cfg.resolve(args.seed, "seed", defaults.seed)?,
        positive_weight: cfg.resolve(args.pos_weight, "pos_weight", defaults.positive_weight)?,
        precision_target: cfg.resolve(
            args.precision_target,
            "precision_target",
            defaults.precision_target,
        )?,
    };
    config.validate()?;
    Ok(config)
}

pub(crate) struct TrainInputs {
    pub train: LoadedSplit,
    pub dev: LoadedSplit,
}

pub(crate) fn load_train_inputs(args: &TrainArgs, cfg: &KvMap) -> Result<TrainInputs> {
    let train_features = require(args.train_features.clone(), cfg, "train_features")?;
    let train_data = require(args.train_data.clone(), cfg, "train_data")?;
    let dev_features = require(args.dev_features.clone(), cfg, "dev_features")?;
    let dev_data = require(args.dev_data.clone(), cfg, "dev_data")?;
    let train = load_split(
        &train_features,
        &train_data,
        SplitName::Train,
        "unspecified",
    )?;
    let dev = load_split(&dev_features, &dev_data, SplitName::Dev, "unspecified")?;
    if train.layout != dev.layout {
        return Err(QcError::Shape(format!(
            "train features have dim {} but dev features have dim {}",
            train.layout.dim(),
            dev.layout.dim()
        )));
    }
    Ok(TrainInputs { train, dev })
}

pub fn cmd_train(args: TrainArgs) -> Result<()> {
    let cfg = KvMap::load_optional(args.config.as_deref())?;
    let model_out = require(args.model.clone(), &cfg, "model")?;
    let report_out = args
        .report
        .clone()
        .or_else(|| cfg.raw("report").map(std::path::PathBuf::from));
    let config = build_config(&args, &cfg)?;
    let inputs = load_train_inputs(&args, &cfg)?;

    let train_targets = inputs.train.targets(config.head);
    let dev_targets = inputs.dev.targets(config.head);
    let (params, report) = train(
        &config,
        inputs.train.layout,
        &inputs.train.seqs,
        &train_targets,
        &inputs.dev.seqs,
        &dev_targets,
    )?;

    save_model(&params, &model_out)?;
    let text = report.to_text();
    if let Some(path) = report_out {
        fs::write(path, &text)?;
    }
    print!("{text}");
    Ok(())
}

fn parse_list<T: FromStr>(raw: &str, what: &str) -> Result<Vec<T>> {
    raw.split(',')
        .map(|p| {
            p.trim()
                .parse::<T>()
                .map_err(|_| QcError::Config(format!("bad {what} value {p:?}")))
        })
        .collect()
}

pub fn cmd_grid(args: GridArgs) -> Result<()> {
    let cfg = KvMap::load_optional(args.train.config.as_deref())?;
    let model_out = require(args.train.model.clone(), &cfg, "model")?;
    let results_out = args
        .results
        .clone()
        .or_else(|| cfg.raw("results").map(std::path::PathBuf::from));
    let base = build_config(&args.train, &cfg)?;
    let inputs = load_train_inputs(&args.train, &cfg)?;

    let defaults = GridRanges::default();
    let pick = |flag: &Option<String>, key: &str| -> Option<String> {
        flag.clone().or_else(|| cfg.raw(key).map(str::to_string))
    };
    let ranges = GridRanges {
        num_layers: match pick(&args.grid_layers, "grid_layers") {
            Some(raw) => parse_list(&raw, "grid_layers")?,
            None => defaults.num_layers,
        },
        hidden_size: match pick(&args.grid_hidden, "grid_hidden") {
            Some(raw) => parse_list(&raw, "grid_hidden")?,
            None => defaults.hidden_size,
        },
        dropout: match pick(&args.grid_dropout, "grid_dropout") {
            Some(raw) => parse_list(&raw, "grid_dropout")?,
            None => defaults.dropout,
        },
        learning_rate: match pick(&args.grid_lr, "grid_lr") {
            Some(raw) => parse_list(&raw, "grid_lr")?,
            None => defaults.learning_rate,
        },
    };

    let train_targets = inputs.train.targets(base.head);
    let dev_targets = inputs.dev.targets(base.head);
    let outcome = grid_search(
        &ranges,
        &base,
        inputs.train.layout,
        &inputs.train.seqs,
        &train_targets,
        &inputs.dev.seqs,
        &dev_targets,
    )?;

    let mut table = String::from(
        "index\tlayers\thidden\tdropout\tlearning_rate\tseed\tbest_epoch\tdev_metric\tselected\n",
    );
    for (index, entry) in outcome.entries.iter().enumerate() {
        writeln!(
            table,
            "{index}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            entry.config.num_layers,
            entry.config.hidden_size,
            entry.config.dropout,
            entry.config.learning_rate,
            entry.config.seed,
            entry.report.best_epoch,
            entry.dev_metric,
            if index == outcome.best_index { "*" } else { "" }
        )
        .expect("string write");
    }
    save_model(&outcome.best_params, &model_out)?;
    if let Some(path) = results_out {
        fs::write(path, &table)?;
    }
    print!("{table}");
    println!(
        "best config: index {} of {} (dev metric {})",
        outcome.best_index,
        outcome.entries.len(),
        outcome.entries[outcome.best_index].dev_metric
    );
    Ok(())
}
