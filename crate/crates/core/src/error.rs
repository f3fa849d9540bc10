use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = PlumeError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum PlumeError {
    #[error("dimension mismatch in {op}: {left:?} vs {right:?}")]
    Dimension {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("batch too small: {op} needs at least {required} rows, got {actual}")]
    BatchTooSmall {
        op: &'static str,
        required: usize,
        actual: usize,
    },

    #[error("degenerate embedding: zero-norm vector in {0}")]
    DegenerateEmbedding(&'static str),

    #[error("AUC undefined: need at least one normal and one anomalous sample ({normals} normal, {anomalies} anomalous)")]
    AucUndefined { normals: usize, anomalies: usize },

    #[error("gradient check invalid: {0}")]
    CheckInvalid(String),

    #[error("model not trained: {0}")]
    ModelNotTrained(&'static str),

    #[error("no data: {0}")]
    NoData(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("normal class set {0:?} not present in labels")]
    AbsentClass(Vec<i32>),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("bad magic in {path}: expected {expected:?}, found {found:?}")]
    BadMagic {
        path: PathBuf,
        expected: [u8; 4],
        found: [u8; 4],
    },

    #[error("unsupported format version {found} in {path} (supported: {supported})")]
    VersionMismatch {
        path: PathBuf,
        found: u32,
        supported: u32,
    },

    #[error("truncated file {path}: {detail}")]
    Truncated { path: PathBuf, detail: String },

    #[error("malformed file {path}: {detail}")]
    Malformed { path: PathBuf, detail: String },

    #[error("csv parse error in {path} at line {line}: {detail}")]
    Csv {
        path: PathBuf,
        line: usize,
        detail: String,
    },

    #[error("checkpoint has no {0} section")]
    MissingSection(&'static str),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl PlumeError {
    /// Stable machine-parsable category, used by the CLI on stderr.
    pub fn category(&self) -> &'static str {
        match self {
            PlumeError::Dimension { .. } => "dimension",
            PlumeError::BatchTooSmall { .. } => "batch-too-small",
            PlumeError::DegenerateEmbedding(_) => "degenerate-embedding",
            PlumeError::AucUndefined { .. } => "auc-undefined",
            PlumeError::CheckInvalid(_) => "check-invalid",
            PlumeError::ModelNotTrained(_) => "model-not-trained",
            PlumeError::NoData(_) => "no-data",
            PlumeError::Empty(_) => "empty",
            PlumeError::AbsentClass(_) => "absent-class",
            PlumeError::Config(_) => "config",
            PlumeError::NonFinite(_) => "non-finite",
            PlumeError::BadMagic { .. } => "bad-magic",
            PlumeError::VersionMismatch { .. } => "version-mismatch",
            PlumeError::Truncated { .. } => "truncated",
            PlumeError::Malformed { .. } => "malformed",
            PlumeError::Csv { .. } => "csv",
            PlumeError::MissingSection(_) => "missing-section",
            PlumeError::Io { .. } => "io",
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        PlumeError::Io {
            path: path.into(),
            source,
        }
    }
}
