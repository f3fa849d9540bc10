pub mod ablate;
pub mod eval;
pub mod synth;
pub mod train;

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use plume::data::{one_class_split, FeatureDataset, OneClassSplit};

use crate::config::{read_any, require, Settings};
use crate::error::{CliError, CliResult};

/// Loads both feature files and fixes `dim` from the data unless it was set.
pub(crate) fn load_split(settings: &mut Settings, normal_classes: &[i32]) -> CliResult<OneClassSplit> {
    let train = read_any(require(&settings.train_features, "train_features")?, settings.label_column)?;
    let val = read_any(require(&settings.val_features, "val_features")?, settings.label_column)?;
    let dataset = FeatureDataset::from_files(&train, &val)?;
    if !settings.dim_set {
        settings.train.dim = dataset.dim();
    }
    Ok(one_class_split(&dataset, normal_classes)?)
}

pub(crate) fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::output(dir, e))
}

pub(crate) fn write_text(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| CliError::output(path, e))
}

pub(crate) fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let file = File::create(path).map_err(|e| CliError::output(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| CliError::output(path, e))?;
    w.write_all(b"\n").and_then(|_| w.flush()).map_err(|e| CliError::output(path, e))
}
