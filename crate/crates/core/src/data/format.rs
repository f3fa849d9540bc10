//! The `PLMF` binary feature file.
//!
//! All integers and floats are little-endian.
//!
//! ```text
//! offset  size  field
//!      0     4  magic "PLMF"
//!      4     4  version (u32) = 1
//!      8     8  count (u64)
//!     16     4  dim (u32)
//!     20     1  dtype: 0 = f32, 1 = f64
//!     21     1  label width in bytes = 4 (signed)
//!     22     2  reserved, zero
//!     24     …  count × dim floats, row-major
//!      …     …  count × i32 class labels
//! ```

use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{PlumeError, Result};
use crate::tensor::Matrix;

pub const FEATURE_MAGIC: [u8; 4] = *b"PLMF";
pub const FEATURE_VERSION: u32 = 1;
pub const FEATURE_HEADER_LEN: usize = 24;
const LABEL_WIDTH: u8 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dtype {
    F32,
    F64,
}

impl Dtype {
    pub fn width(self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::F64 => 8,
        }
    }

    fn flag(self) -> u8 {
        match self {
            Dtype::F32 => 0,
            Dtype::F64 => 1,
        }
    }
}

impl FromStr for Dtype {
    type Err = PlumeError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "f32" => Ok(Dtype::F32),
            "f64" => Ok(Dtype::F64),
            other => Err(PlumeError::Config(format!("unknown dtype {other:?} (f32|f64)"))),
        }
    }
}

/// Feature rows with one class label each. Values are always held as `f64`;
/// `dtype` records the on-disk precision.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureFile {
    pub dtype: Dtype,
    pub features: Matrix,
    pub labels: Vec<i32>,
}

impl FeatureFile {
    pub fn new(features: Matrix, labels: Vec<i32>, dtype: Dtype) -> Result<Self> {
        if labels.len() != features.rows() {
            return Err(PlumeError::Dimension {
                op: "FeatureFile::new",
                left: features.shape(),
                right: (labels.len(), 1),
            });
        }
        Ok(Self {
            dtype,
            features,
            labels,
        })
    }

    pub fn count(&self) -> usize {
        self.features.rows()
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    /// Exact byte size of the serialized file.
    pub fn encoded_len(count: usize, dim: usize, dtype: Dtype) -> usize {
        FEATURE_HEADER_LEN + count * dim * dtype.width() + count * LABEL_WIDTH as usize
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let dim = u32::try_from(self.dim())
            .map_err(|_| PlumeError::Config(format!("dim {} exceeds u32", self.dim())))?;
        let mut out = Vec::with_capacity(Self::encoded_len(self.count(), self.dim(), self.dtype));
        out.extend_from_slice(&FEATURE_MAGIC);
        out.extend_from_slice(&FEATURE_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.count() as u64).to_le_bytes());
        out.extend_from_slice(&dim.to_le_bytes());
        out.push(self.dtype.flag());
        out.push(LABEL_WIDTH);
        out.extend_from_slice(&[0, 0]);
        match self.dtype {
            Dtype::F32 => {
                for v in self.features.as_slice() {
                    out.extend_from_slice(&(*v as f32).to_le_bytes());
                }
            }
            Dtype::F64 => {
                for v in self.features.as_slice() {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
        for l in &self.labels {
            out.extend_from_slice(&l.to_le_bytes());
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let truncated = |detail: String| PlumeError::Truncated {
            path: path.to_path_buf(),
            detail,
        };
        if bytes.len() < 4 {
            return Err(truncated(format!("{} bytes, no magic", bytes.len())));
        }
        let magic: [u8; 4] = bytes[..4].try_into().expect("4 bytes");
        if magic != FEATURE_MAGIC {
            return Err(PlumeError::BadMagic {
                path: path.to_path_buf(),
                expected: FEATURE_MAGIC,
                found: magic,
            });
        }
        if bytes.len() < FEATURE_HEADER_LEN {
            return Err(truncated(format!("header needs {FEATURE_HEADER_LEN} bytes, got {}", bytes.len())));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
        if version != FEATURE_VERSION {
            return Err(PlumeError::VersionMismatch {
                path: path.to_path_buf(),
                found: version,
                supported: FEATURE_VERSION,
            });
        }
        let count = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes"));
        let dim = u32::from_le_bytes(bytes[16..20].try_into().expect("4 bytes")) as usize;
        let malformed = |detail: String| PlumeError::Malformed {
            path: path.to_path_buf(),
            detail,
        };
        let dtype = match bytes[20] {
            0 => Dtype::F32,
            1 => Dtype::F64,
            f => return Err(malformed(format!("unknown dtype flag {f}"))),
        };
        if bytes[21] != LABEL_WIDTH {
            return Err(malformed(format!("unsupported label width {}", bytes[21])));
        }
        let count = usize::try_from(count).map_err(|_| malformed(format!("count {count} too large")))?;
        let expected = count
            .checked_mul(dim)
            .and_then(|n| n.checked_mul(dtype.width()))
            .and_then(|n| n.checked_add(FEATURE_HEADER_LEN + count * LABEL_WIDTH as usize))
            .ok_or_else(|| malformed("size overflow".into()))?;
        if bytes.len() < expected {
            return Err(truncated(format!(
                "expected {expected} bytes for {count}x{dim} {dtype:?}, got {}",
                bytes.len()
            )));
        }
        if bytes.len() > expected {
            return Err(malformed(format!("{} trailing bytes", bytes.len() - expected)));
        }
        let payload_end = FEATURE_HEADER_LEN + count * dim * dtype.width();
        let payload = &bytes[FEATURE_HEADER_LEN..payload_end];
        let values: Vec<f64> = match dtype {
            Dtype::F32 => payload
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
                .collect(),
            Dtype::F64 => payload
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect(),
        };
        let labels = bytes[payload_end..]
            .chunks_exact(4)
            .map(|c| i32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        Ok(Self {
            dtype,
            features: Matrix::new(count, dim, values)?,
            labels,
        })
    }
}

pub fn read_features(path: impl AsRef<Path>) -> Result<FeatureFile> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| PlumeError::io(path, e))?;
    FeatureFile::from_bytes(&bytes, path)
}

pub fn write_features(path: impl AsRef<Path>, file: &FeatureFile) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, file.to_bytes()?).map_err(|e| PlumeError::io(path, e))
}
