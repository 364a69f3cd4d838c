//! Flat binary network weights:
//!
//! ```text
//! b"FTSW" | version u32 | layer count u32 |
//! per layer: in u32 | out u32 | residual u8 | has_slope u8
//! per layer: weight (in·out, row-major) | bias (out) | slope (if present)
//! ```
//!
//! All integers and reals are little-endian.

use std::path::Path;

use ftsbench_numeric::{DenseMatrix, FeedForwardNet, Layer};
use serde::{Deserialize, Serialize};

use super::{ArFnnModel, CheckRecord, DgmError, TrainConfig};
use crate::io::{read_text, sha256_hex, sidecar, write_text};

pub const WEIGHTS_MAGIC: [u8; 4] = *b"FTSW";
pub const WEIGHTS_VERSION: u32 = 1;
const MAX_LAYERS: usize = 1024;

pub fn encode_weights(net: &FeedForwardNet) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&WEIGHTS_MAGIC);
    out.extend_from_slice(&WEIGHTS_VERSION.to_le_bytes());
    out.extend_from_slice(&(net.layers().len() as u32).to_le_bytes());
    for l in net.layers() {
        out.extend_from_slice(&(l.in_dim() as u32).to_le_bytes());
        out.extend_from_slice(&(l.out_dim() as u32).to_le_bytes());
        out.push(l.residual as u8);
        out.push(l.prelu_slope.is_some() as u8);
    }
    for l in net.layers() {
        for v in l.weight.as_slice().iter().chain(l.bias.as_slice()).chain(l.prelu_slope.as_slice()) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8], DgmError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| DgmError::Weights(format!("truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, DgmError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn flag(&mut self) -> Result<bool, DgmError> {
        match self.take(1)?[0] {
            0 => Ok(false),
            1 => Ok(true),
            b => Err(DgmError::Weights(format!("invalid flag byte {b}"))),
        }
    }

    fn reals(&mut self, n: usize) -> Result<Vec<f64>, DgmError> {
        let bytes = n.checked_mul(8).ok_or_else(|| DgmError::Weights("size overflow".into()))?;
        let raw = self.take(bytes)?;
        let values: Vec<f64> = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(DgmError::Weights("non-finite weight".into()));
        }
        Ok(values)
    }
}

pub fn decode_weights(bytes: &[u8]) -> Result<FeedForwardNet, DgmError> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != WEIGHTS_MAGIC {
        return Err(DgmError::Weights("bad magic".into()));
    }
    let version = r.u32()?;
    if version != WEIGHTS_VERSION {
        return Err(DgmError::Weights(format!("unsupported version {version}")));
    }
    let count = r.u32()? as usize;
    if count == 0 || count > MAX_LAYERS {
        return Err(DgmError::Weights(format!("layer count {count}")));
    }
    let mut headers = Vec::with_capacity(count);
    for _ in 0..count {
        headers.push((r.u32()? as usize, r.u32()? as usize, r.flag()?, r.flag()?));
    }
    let mut layers = Vec::with_capacity(count);
    for (inp, out, residual, slope) in headers {
        if inp == 0 || out == 0 {
            return Err(DgmError::Weights("zero-width layer".into()));
        }
        let n = inp.checked_mul(out).ok_or_else(|| DgmError::Weights("size overflow".into()))?;
        let weight = DenseMatrix::from_vec(inp, out, r.reals(n)?)?;
        let bias = DenseMatrix::from_vec(1, out, r.reals(out)?)?;
        let prelu_slope = if slope { Some(r.reals(1)?[0]) } else { None };
        layers.push(Layer { weight, bias, prelu_slope, residual });
    }
    if r.pos != bytes.len() {
        return Err(DgmError::Weights(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    Ok(FeedForwardNet::new(layers)?)
}

/// Metadata sidecar stored next to the weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub schema_version: u32,
    pub name: String,
    pub instruments: usize,
    pub window: usize,
    pub noise_dim: usize,
    pub scale: f64,
    pub weights_sha256: String,
    pub best_step: Option<usize>,
    pub config: Option<TrainConfig>,
    #[serde(default)]
    pub history: Vec<CheckRecord>,
}

impl ModelMeta {
    pub fn for_model(model: &ArFnnModel, config: Option<TrainConfig>, history: Vec<CheckRecord>, best_step: Option<usize>) -> Self {
        Self {
            schema_version: WEIGHTS_VERSION,
            name: model.name.clone(),
            instruments: model.instruments,
            window: model.window,
            noise_dim: model.noise_dim,
            scale: model.scale,
            weights_sha256: sha256_hex(&encode_weights(&model.net)),
            best_step,
            config,
            history,
        }
    }
}

impl ArFnnModel {
    /// Writes `path` (binary weights) and `path.toml` (metadata).
    pub fn save(&self, path: &Path, meta: &ModelMeta) -> Result<(), DgmError> {
        let bytes = encode_weights(&self.net);
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| DgmError::Weights(format!("{}: {e}", path.display())))?;
        }
        std::fs::write(path, &bytes).map_err(|e| DgmError::Weights(format!("{}: {e}", path.display())))?;
        let meta = ModelMeta { weights_sha256: sha256_hex(&bytes), ..meta.clone() };
        let text = toml::to_string(&meta).map_err(|e| DgmError::Weights(e.to_string()))?;
        write_text(&sidecar(path, "toml"), &text).map_err(|e| DgmError::Weights(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<(Self, ModelMeta), DgmError> {
        let bytes = std::fs::read(path).map_err(|e| DgmError::Weights(format!("{}: {e}", path.display())))?;
        let text = read_text(&sidecar(path, "toml")).map_err(|e| DgmError::Weights(e.to_string()))?;
        let meta: ModelMeta = toml::from_str(&text).map_err(|e| DgmError::Weights(e.to_string()))?;
        if meta.weights_sha256 != sha256_hex(&bytes) {
            return Err(DgmError::Weights("weights hash does not match metadata".into()));
        }
        let net = decode_weights(&bytes)?;
        let model = ArFnnModel::from_net(&meta.name, net, meta.instruments, meta.window, meta.noise_dim, meta.scale)?;
        Ok((model, meta))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dgm::ArFnnShape;
    use crate::rng;

    fn model() -> ArFnnModel {
        ArFnnModel::new(&mut rng::stream(1), "m", 2, 4, 3, 0.02, ArFnnShape { hidden: 5, residual_blocks: 2 })
    }

    #[test]
    fn round_trip_is_exact() {
        let m = model();
        let bytes = encode_weights(&m.net);
        assert_eq!(&bytes[..4], b"FTSW");
        assert_eq!(decode_weights(&bytes).unwrap(), m.net);
    }

    #[test]
    fn rejects_corruption() {
        let bytes = encode_weights(&model().net);
        assert!(decode_weights(&bytes[..bytes.len() - 1]).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(decode_weights(&extra).is_err());
        let mut magic = bytes.clone();
        magic[0] = b'X';
        assert!(decode_weights(&magic).is_err());
        let mut version = bytes.clone();
        version[4] = 9;
        assert!(decode_weights(&version).is_err());
        let mut huge = bytes.clone();
        huge[12..16].copy_from_slice(&u32::MAX.to_le_bytes());
        assert!(decode_weights(&huge).is_err());
        assert!(decode_weights(&[]).is_err());
    }

    #[test]
    fn save_and_load_with_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("models/gmmn.bin");
        let m = model();
        let history = vec![CheckRecord { step: 0, loss: 1.5, validation: 0.25 }];
        let meta = ModelMeta::for_model(&m, Some(TrainConfig::default()), history, Some(0));
        m.save(&path, &meta).unwrap();
        let (back, meta_back) = ArFnnModel::load(&path).unwrap();
        assert_eq!(back, m);
        assert_eq!(meta_back, meta);
        std::fs::write(&path, encode_weights(&model().net)[..20].to_vec()).unwrap();
        assert!(ArFnnModel::load(&path).is_err());
    }
}
