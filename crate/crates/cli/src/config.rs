//! Resolution of settings: flag/env > config file > default.

use std::fs;
use std::path::{Path, PathBuf};

use plume::data::{read_csv_features, read_features, FeatureFile, LabelColumn};
use plume::losses::Guidance;
use plume::perturbator::StrategyKind;
use plume::trainer::TrainConfig;
use serde::Deserialize;

use crate::args::{DataArgs, TrainOverrides};
use crate::error::{CliError, CliResult};

pub const DEFAULT_OUT_DIR: &str = "plume-out";

/// Config-file keys that are not training hyperparameters.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileExtras {
    pub train_features: Option<PathBuf>,
    pub val_features: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub normal_classes: Option<Vec<i32>>,
    pub label_column: Option<usize>,
    pub strategies: Option<Vec<StrategyKind>>,
    pub guidances: Option<Vec<Guidance>>,
    pub classes: Option<Vec<i32>>,
}

const EXTRA_KEYS: [&str; 8] = [
    "train_features",
    "val_features",
    "out_dir",
    "normal_classes",
    "label_column",
    "strategies",
    "guidances",
    "classes",
];

/// A parsed config file. `dim_set` records whether the file fixed `dim`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FileConfig {
    pub train: TrainConfig,
    pub extras: FileExtras,
    pub dim_set: bool,
}

/// Paths in the file are taken relative to the file's directory.
pub fn load_file(path: &Path) -> CliResult<FileConfig> {
    let text = fs::read_to_string(path).map_err(|e| plume::PlumeError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let mut cfg = parse_file(&text, path)?;
    let base = path.parent().unwrap_or(Path::new(""));
    for p in [
        &mut cfg.extras.train_features,
        &mut cfg.extras.val_features,
        &mut cfg.extras.out_dir,
    ]
    .into_iter()
    .flatten()
    {
        if p.is_relative() {
            *p = base.join(&*p);
        }
    }
    Ok(cfg)
}

pub fn parse_file(text: &str, path: &Path) -> CliResult<FileConfig> {
    let bad = |detail: String| CliError::ConfigFile {
        path: path.to_path_buf(),
        detail,
    };
    let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| bad(e.to_string()))?;
    let mut extras = toml::Table::new();
    for key in EXTRA_KEYS {
        if let Some(v) = table.remove(key) {
            extras.insert(key.to_string(), v);
        }
    }
    let dim_set = table.contains_key("dim");
    let train: TrainConfig = toml::Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| bad(e.to_string()))?;
    let extras: FileExtras = toml::Value::Table(extras)
        .try_into()
        .map_err(|e: toml::de::Error| bad(e.to_string()))?;
    Ok(FileConfig { train, extras, dim_set })
}

/// Everything a training-style command needs after merging all sources.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub train: TrainConfig,
    /// False when `dim` should be taken from the data.
    pub dim_set: bool,
    pub train_features: Option<PathBuf>,
    pub val_features: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub normal_classes: Vec<i32>,
    pub label_column: LabelColumn,
    pub extras: FileExtras,
}

macro_rules! overlay {
    ($cfg:expr, $ov:expr, $($field:ident),+ $(,)?) => {
        $(if let Some(v) = $ov.$field.clone() { $cfg.$field = v; })+
    };
}

impl TrainOverrides {
    pub fn apply(&self, cfg: &mut TrainConfig) {
        overlay!(
            cfg, self, dim, hidden1, hidden2, batch_size, epochs, lambda, nu, gamma, tau, strategy,
            gaussian_sigma, guidance, seed, runs, beta1, beta2, adam_eps, weight_decay, base_lr, max_lr,
            step_size_epochs, clr_policy, threads,
        );
    }
}

pub fn resolve(data: &DataArgs, overrides: &TrainOverrides) -> CliResult<Settings> {
    let file = match &data.config {
        Some(path) => load_file(path)?,
        None => FileConfig::default(),
    };
    let mut train = file.train;
    overrides.apply(&mut train);
    let extras = file.extras;
    Ok(Settings {
        train,
        dim_set: file.dim_set || overrides.dim.is_some(),
        train_features: data.train_features.clone().or_else(|| extras.train_features.clone()),
        val_features: data.val_features.clone().or_else(|| extras.val_features.clone()),
        out_dir: data
            .out_dir
            .clone()
            .or_else(|| extras.out_dir.clone())
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR)),
        normal_classes: data
            .normal_classes
            .clone()
            .or_else(|| extras.normal_classes.clone())
            .unwrap_or_else(|| vec![0]),
        label_column: data
            .label_column
            .or(extras.label_column)
            .map_or(LabelColumn::Last, LabelColumn::Index),
        extras,
    })
}

/// Reads PLMF, or CSV when the extension is `.csv`.
pub fn read_any(path: &Path, label_column: LabelColumn) -> CliResult<FeatureFile> {
    let is_csv = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    Ok(if is_csv {
        read_csv_features(path, label_column)?
    } else {
        read_features(path)?
    })
}

pub fn require<'a>(path: &'a Option<PathBuf>, what: &str) -> CliResult<&'a Path> {
    path.as_deref()
        .ok_or_else(|| CliError::Usage(format!("{what} is required (flag, PLUME_* variable, or config key)")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_keys_split_into_training_and_extras() {
        let text = r#"
            epochs = 7
            lambda = 10.0
            strategy = "addmult"
            guidance = "mean"
            train_features = "a.plmf"
            normal_classes = [1, 2]
        "#;
        let f = parse_file(text, Path::new("c.toml")).unwrap();
        assert_eq!(f.train.epochs, 7);
        assert_eq!(f.train.lambda, 10.0);
        assert_eq!(f.train.strategy, StrategyKind::AddMult);
        assert_eq!(f.train.guidance, Guidance::Mean);
        assert_eq!(f.train.batch_size, 32);
        assert_eq!(f.extras.normal_classes, Some(vec![1, 2]));
        assert!(!f.dim_set);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        for text in ["epoch = 3", "[train]\nepochs = 3", "strategies = 3"] {
            let err = parse_file(text, Path::new("c.toml")).unwrap_err();
            assert_eq!(err.category(), "config", "{text}");
        }
    }

    #[test]
    fn overrides_win() {
        let mut cfg = TrainConfig { epochs: 7, ..TrainConfig::default() };
        let ov = TrainOverrides { epochs: Some(3), tau: Some(0.1), ..TrainOverrides::default() };
        ov.apply(&mut cfg);
        assert_eq!((cfg.epochs, cfg.tau, cfg.lambda), (3, 0.1, 5.0));
    }
}
