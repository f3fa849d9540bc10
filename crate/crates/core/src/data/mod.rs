//! Feature files, one-class splits, batching, and synthetic features.

pub mod batch;
pub mod csv;
pub mod format;
pub mod split;
pub mod synth;

pub use batch::{epoch_indices, BatchIterator};
pub use csv::{read_csv_features, LabelColumn};
pub use format::{read_features, write_features, Dtype, FeatureFile};
pub use split::{one_class_split, FeatureDataset, OneClassSplit, SplitTag};
pub use synth::{synth_blobs, Covariance, SynthSpec};
