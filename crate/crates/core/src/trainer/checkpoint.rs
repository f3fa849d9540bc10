//! The `PLMC` model file.
//!
//! Little-endian throughout:
//!
//! ```text
//! "PLMC" | version u32 | meta_len u32 | meta (UTF-8 JSON) | section_count u32 | sections…
//! section  = tag [u8; 4] | body_len u64 | body
//! "CLSF"   = dim u32 | score_convention u8 | tensor_count u32 | tensors…
//! "PERT"   = strategy u8 | tensor_count u32 | tensors…
//! tensor   = name_len u16 | name | rows u64 | cols u64 | rows·cols × f64
//! ```
//!
//! The classifier section is always present. The perturbator section is only
//! written for training checkpoints; inference never needs it.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use crate::classifier::Classifier;
use crate::error::{PlumeError, Result};
use crate::perturbator::{Perturbator, StrategyKind};
use crate::tensor::{BatchNormState, Matrix};

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"PLMC";
pub const CHECKPOINT_VERSION: u32 = 1;
const CLASSIFIER_TAG: [u8; 4] = *b"CLSF";
const PERTURBATOR_TAG: [u8; 4] = *b"PERT";
/// `ŷ` close to 1 means normal; anomaly score = 1 − ŷ.
pub const SCORE_HIGH_IS_NORMAL: u8 = 0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub config: TrainConfig,
    pub normal_classes: Vec<i32>,
    pub run_id: usize,
    pub epoch: usize,
    pub val_auc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub meta: CheckpointMeta,
    pub classifier: Classifier,
    pub perturbator: Option<Perturbator>,
}

fn strategy_code(kind: StrategyKind) -> u8 {
    match kind {
        StrategyKind::LinearMap => 0,
        StrategyKind::AddMult => 1,
        StrategyKind::Add => 2,
        StrategyKind::Mult => 3,
        StrategyKind::Gaussian => 4,
    }
}

fn strategy_from_code(code: u8) -> Option<StrategyKind> {
    StrategyKind::ALL.into_iter().find(|&k| strategy_code(k) == code)
}

fn bn_tensors(prefix: &str, bn: &BatchNormState, out: &mut Vec<(String, Matrix)>) {
    out.push((format!("{prefix}.running_mean"), Matrix::row_vector(&bn.running_mean)));
    out.push((format!("{prefix}.running_var"), Matrix::row_vector(&bn.running_var)));
    out.push((format!("{prefix}.tracked_batches"), Matrix::row_vector(&[bn.tracked_batches as f64])));
}

fn classifier_tensors(c: &Classifier) -> Vec<(String, Matrix)> {
    let mut t = Vec::new();
    bn_tensors("input_norm", &c.input_norm, &mut t);
    t.push(("lin1.weight".into(), c.lin1.weight.value.clone()));
    bn_tensors("bn1", &c.bn1, &mut t);
    t.push(("lin2.weight".into(), c.lin2.weight.value.clone()));
    bn_tensors("bn2", &c.bn2, &mut t);
    t.push(("lin3.weight".into(), c.lin3.weight.value.clone()));
    t
}

fn perturbator_tensors(p: &Perturbator) -> Vec<(String, Matrix)> {
    let layers = [
        ("layer1", &p.layer1),
        ("head_mu", &p.head_mu),
        ("head_logvar", &p.head_logvar),
        ("dec1", &p.dec1),
        ("dec2", &p.dec2),
    ];
    let mut t = Vec::new();
    for (name, l) in layers {
        t.push((format!("{name}.weight"), l.weight.value.clone()));
        if let Some(b) = &l.bias {
            t.push((format!("{name}.bias"), b.value.clone()));
        }
    }
    t
}

fn put_tensors(out: &mut Vec<u8>, tensors: &[(String, Matrix)]) {
    out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for (name, m) in tensors {
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(m.rows() as u64).to_le_bytes());
        out.extend_from_slice(&(m.cols() as u64).to_le_bytes());
        for v in m.as_slice() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
}

fn put_section(out: &mut Vec<u8>, tag: [u8; 4], body: Vec<u8>) {
    out.extend_from_slice(&tag);
    out.extend_from_slice(&(body.len() as u64).to_le_bytes());
    out.extend_from_slice(&body);
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(PlumeError::Truncated {
                path: self.path.to_path_buf(),
                detail: format!("needed {n} bytes at offset {}", self.pos),
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn malformed(&self, detail: impl Into<String>) -> PlumeError {
        PlumeError::Malformed {
            path: self.path.to_path_buf(),
            detail: detail.into(),
        }
    }

    fn tensors(&mut self) -> Result<BTreeMap<String, Matrix>> {
        let count = self.u32()?;
        let mut out = BTreeMap::new();
        for _ in 0..count {
            let len = self.u16()? as usize;
            let name = std::str::from_utf8(self.take(len)?)
                .map_err(|_| self.malformed("tensor name is not UTF-8"))?
                .to_string();
            let rows = self.u64()? as usize;
            let cols = self.u64()? as usize;
            let n = rows.checked_mul(cols).ok_or_else(|| self.malformed("tensor too large"))?;
            let raw = self.take(n.checked_mul(8).ok_or_else(|| self.malformed("tensor too large"))?)?;
            let data = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect();
            out.insert(name, Matrix::new(rows, cols, data)?);
        }
        Ok(out)
    }
}

struct TensorTable<'a> {
    tensors: BTreeMap<String, Matrix>,
    path: &'a Path,
}

impl TensorTable<'_> {
    fn take(&mut self, name: &str, shape: (usize, usize)) -> Result<Matrix> {
        let m = self.tensors.remove(name).ok_or_else(|| PlumeError::Malformed {
            path: self.path.to_path_buf(),
            detail: format!("missing tensor {name}"),
        })?;
        if m.shape() != shape {
            return Err(PlumeError::Malformed {
                path: self.path.to_path_buf(),
                detail: format!("tensor {name} has shape {:?}, expected {shape:?}", m.shape()),
            });
        }
        Ok(m)
    }

    fn bn(&mut self, prefix: &str, dim: usize) -> Result<BatchNormState> {
        let mut bn = BatchNormState::new(dim);
        bn.running_mean = self.take(&format!("{prefix}.running_mean"), (1, dim))?.into_vec();
        bn.running_var = self.take(&format!("{prefix}.running_var"), (1, dim))?.into_vec();
        bn.tracked_batches = self.take(&format!("{prefix}.tracked_batches"), (1, 1))?.get(0, 0) as u64;
        Ok(bn)
    }
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let meta = serde_json::to_vec(&self.meta)
            .map_err(|e| PlumeError::Config(format!("cannot encode checkpoint metadata: {e}")))?;
        let mut out = Vec::new();
        out.extend_from_slice(&CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(meta.len() as u32).to_le_bytes());
        out.extend_from_slice(&meta);
        let sections = 1 + u32::from(self.perturbator.is_some());
        out.extend_from_slice(&sections.to_le_bytes());

        let mut body = Vec::new();
        body.extend_from_slice(&(self.classifier.shape().dim as u32).to_le_bytes());
        body.push(SCORE_HIGH_IS_NORMAL);
        put_tensors(&mut body, &classifier_tensors(&self.classifier));
        put_section(&mut out, CLASSIFIER_TAG, body);

        if let Some(p) = &self.perturbator {
            let mut body = vec![strategy_code(p.kind)];
            put_tensors(&mut body, &perturbator_tensors(p));
            put_section(&mut out, PERTURBATOR_TAG, body);
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0, path };
        let magic: [u8; 4] = r.take(4).map_err(|_| PlumeError::Truncated {
            path: path.to_path_buf(),
            detail: "no magic".into(),
        })?
        .try_into()
        .expect("4 bytes");
        if magic != CHECKPOINT_MAGIC {
            return Err(PlumeError::BadMagic {
                path: path.to_path_buf(),
                expected: CHECKPOINT_MAGIC,
                found: magic,
            });
        }
        let version = r.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(PlumeError::VersionMismatch {
                path: path.to_path_buf(),
                found: version,
                supported: CHECKPOINT_VERSION,
            });
        }
        let meta_len = r.u32()? as usize;
        let meta: CheckpointMeta = serde_json::from_slice(r.take(meta_len)?)
            .map_err(|e| r.malformed(format!("metadata: {e}")))?;
        let sections = r.u32()?;
        let mut classifier = None;
        let mut perturbator = None;
        for _ in 0..sections {
            let tag: [u8; 4] = r.take(4)?.try_into().expect("4 bytes");
            let len = r.u64()? as usize;
            let body = r.take(len)?;
            let mut s = Reader { bytes: body, pos: 0, path };
            match tag {
                CLASSIFIER_TAG => {
                    let dim = s.u32()? as usize;
                    let convention = s.u8()?;
                    if convention != SCORE_HIGH_IS_NORMAL {
                        return Err(s.malformed(format!("unknown score convention {convention}")));
                    }
                    let mut t = TensorTable { tensors: s.tensors()?, path };
                    let (h1, h2) = (meta.config.hidden1, meta.config.hidden2);
                    let input_norm = t.bn("input_norm", dim)?;
                    let mut c = Classifier::zeros(crate::classifier::ClassifierShape { dim, hidden1: h1, hidden2: h2 });
                    c.input_norm = input_norm;
                    c.lin1.weight.value = t.take("lin1.weight", (dim, h1))?;
                    c.bn1 = t.bn("bn1", h1)?;
                    c.lin2.weight.value = t.take("lin2.weight", (h1, h2))?;
                    c.bn2 = t.bn("bn2", h2)?;
                    c.lin3.weight.value = t.take("lin3.weight", (h2, 1))?;
                    classifier = Some(c);
                }
                PERTURBATOR_TAG => {
                    let kind = strategy_from_code(s.u8()?)
                        .filter(|k| k.is_adaptive())
                        .ok_or_else(|| s.malformed("bad perturbator strategy code"))?;
                    let mut t = TensorTable { tensors: s.tensors()?, path };
                    let dim = meta.config.dim;
                    let out = dim * kind.decoder_width_factor();
                    let mut p = Perturbator::zeros(dim, kind);
                    for (name, layer, fan_out) in [
                        ("layer1", &mut p.layer1, dim),
                        ("head_mu", &mut p.head_mu, dim),
                        ("head_logvar", &mut p.head_logvar, dim),
                        ("dec1", &mut p.dec1, dim),
                        ("dec2", &mut p.dec2, out),
                    ] {
                        layer.weight.value = t.take(&format!("{name}.weight"), (dim, fan_out))?;
                        if let Some(b) = layer.bias.as_mut() {
                            b.value = t.take(&format!("{name}.bias"), (1, fan_out))?;
                        }
                    }
                    perturbator = Some(p);
                }
                other => return Err(r.malformed(format!("unknown section tag {other:?}"))),
            }
        }
        if r.pos != bytes.len() {
            return Err(r.malformed(format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        let classifier = classifier.ok_or(PlumeError::MissingSection("classifier"))?;
        Ok(Self {
            meta,
            classifier,
            perturbator,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_bytes()?).map_err(|e| PlumeError::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| PlumeError::io(path, e))?;
        Self::from_bytes(&bytes, path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::ClassifierShape;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample(with_perturbator: bool) -> Checkpoint {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let config = TrainConfig { dim: 4, hidden1: 6, hidden2: 3, ..Default::default() };
        let mut classifier = Classifier::init(ClassifierShape { dim: 4, hidden1: 6, hidden2: 3 }, &mut rng);
        classifier.bn1.running_mean[2] = 0.75;
        classifier.input_norm.tracked_batches = 17;
        let perturbator = with_perturbator.then(|| Perturbator::init(4, StrategyKind::LinearMap, &mut rng).unwrap());
        Checkpoint {
            meta: CheckpointMeta { config, normal_classes: vec![0], run_id: 2, epoch: 7, val_auc: Some(0.875) },
            classifier,
            perturbator,
        }
    }

    #[test]
    fn round_trip() {
        for with in [false, true] {
            let c = sample(with);
            let back = Checkpoint::from_bytes(&c.to_bytes().unwrap(), Path::new("mem")).unwrap();
            assert_eq!(back, c);
        }
    }

    #[test]
    fn inference_checkpoint_is_smaller() {
        let a = sample(false).to_bytes().unwrap();
        let b = sample(true).to_bytes().unwrap();
        assert!(a.len() < b.len());
        assert_eq!(&a[..4], b"PLMC");
    }

    #[test]
    fn missing_classifier_section() {
        let c = sample(true);
        let bytes = c.to_bytes().unwrap();
        // keep only the perturbator section
        let meta_len = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let head = 12 + meta_len;
        let cls_len = u64::from_le_bytes(bytes[head + 8..head + 16].try_into().unwrap()) as usize;
        let mut fixed = bytes[..head].to_vec();
        fixed.extend_from_slice(&1u32.to_le_bytes());
        fixed.extend_from_slice(&bytes[head + 4 + 12 + cls_len..]);
        let err = Checkpoint::from_bytes(&fixed, Path::new("mem")).unwrap_err();
        assert!(matches!(err, PlumeError::MissingSection("classifier")), "{err:?}");
    }

    #[test]
    fn bad_magic_and_version() {
        let mut bytes = sample(false).to_bytes().unwrap();
        bytes[4] = 2;
        assert!(matches!(
            Checkpoint::from_bytes(&bytes, Path::new("mem")),
            Err(PlumeError::VersionMismatch { found: 2, .. })
        ));
        bytes[0] = b'Q';
        assert!(matches!(Checkpoint::from_bytes(&bytes, Path::new("mem")), Err(PlumeError::BadMagic { .. })));
    }
}
