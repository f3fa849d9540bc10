//! One-class split construction.

use serde::{Deserialize, Serialize};

use crate::data::format::FeatureFile;
use crate::error::{PlumeError, Result};
use crate::tensor::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitTag {
    Train,
    Val,
}

/// Feature rows with class labels and a split tag per row.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureDataset {
    pub features: Matrix,
    pub labels: Vec<i32>,
    pub splits: Vec<SplitTag>,
}

impl FeatureDataset {
    /// Tags every row of `train` as training and every row of `val` as validation.
    pub fn from_files(train: &FeatureFile, val: &FeatureFile) -> Result<Self> {
        let features = Matrix::vstack(&train.features, &val.features)?;
        let labels = train.labels.iter().chain(&val.labels).copied().collect();
        let splits = std::iter::repeat_n(SplitTag::Train, train.count())
            .chain(std::iter::repeat_n(SplitTag::Val, val.count()))
            .collect();
        Ok(Self {
            features,
            labels,
            splits,
        })
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }
}

/// Training rows are normal-only; validation rows carry a binary normal flag.
#[derive(Debug, Clone, PartialEq)]
pub struct OneClassSplit {
    pub train: Matrix,
    pub val: Matrix,
    pub val_is_normal: Vec<bool>,
    /// Original class label of each validation row.
    pub val_labels: Vec<i32>,
    pub normal_classes: Vec<i32>,
}

impl OneClassSplit {
    pub fn dim(&self) -> usize {
        self.train.cols()
    }
}

/// Uses the classes in `normal_classes` as the normal set (several classes
/// may be merged into one normal class) and every other label as anomalous.
pub fn one_class_split(dataset: &FeatureDataset, normal_classes: &[i32]) -> Result<OneClassSplit> {
    if normal_classes.is_empty() {
        return Err(PlumeError::Config("normal class set is empty".into()));
    }
    let is_normal = |label: i32| normal_classes.contains(&label);
    let mut train_rows = Vec::new();
    let mut val_rows = Vec::new();
    let mut val_is_normal = Vec::new();
    let mut val_labels = Vec::new();
    for (i, (&label, &tag)) in dataset.labels.iter().zip(&dataset.splits).enumerate() {
        match tag {
            SplitTag::Train if is_normal(label) => train_rows.push(i),
            SplitTag::Train => {}
            SplitTag::Val => {
                val_rows.push(i);
                val_is_normal.push(is_normal(label));
                val_labels.push(label);
            }
        }
    }
    if train_rows.is_empty() {
        return Err(PlumeError::AbsentClass(normal_classes.to_vec()));
    }
    if val_rows.is_empty() {
        return Err(PlumeError::NoData("validation partition is empty".into()));
    }
    Ok(OneClassSplit {
        train: dataset.features.select_rows(&train_rows),
        val: dataset.features.select_rows(&val_rows),
        val_is_normal,
        val_labels,
        normal_classes: normal_classes.to_vec(),
    })
}
