//! Binary checkpoint container.
//!
//! Layout: the 8-byte magic `TCCKPT1\n`, a little-endian `u64` header
//! length, a UTF-8 JSON header, then the raw little-endian `f64` data of
//! every tensor in header order. The header records the format version,
//! toolkit version, seed, update count, model config, vocabularies and a
//! `(name, shape, offset)` index; `extra` carries caller state such as the
//! optimizer step. Reading back yields bit-identical tensors.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::ModelConfig;
use super::params::ModelParams;
use crate::autodiff::Tensor;
use crate::data::Vocab;
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"TCCKPT1\n";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
    /// Offset in `f64` elements from the start of the data section.
    offset: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub format_version: u32,
    pub toolkit_version: String,
    pub seed: u64,
    pub step: usize,
    pub model: ModelConfig,
    pub source_vocab: Vocab,
    pub target_vocab: Vocab,
    #[serde(default)]
    pub extra: serde_json::Value,
}

/// Model parameters plus optional auxiliary tensors (optimizer moments).
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub header: CheckpointHeader,
    pub params: ModelParams,
    pub aux: BTreeMap<String, Tensor>,
}

const PARAM_PREFIX: &str = "param/";

impl Checkpoint {
    pub fn new(params: ModelParams, source_vocab: Vocab, target_vocab: Vocab, step: usize) -> Self {
        let header = CheckpointHeader {
            format_version: CHECKPOINT_VERSION,
            toolkit_version: env!("CARGO_PKG_VERSION").to_string(),
            seed: params.config().seed,
            step,
            model: params.config().clone(),
            source_vocab,
            target_vocab,
            extra: serde_json::Value::Null,
        };
        Self {
            header,
            params,
            aux: BTreeMap::new(),
        }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut entries = Vec::new();
        let mut data: Vec<&Tensor> = Vec::new();
        let mut offset = 0;
        let named = self
            .params
            .tensors()
            .iter()
            .map(|(n, t)| (format!("{PARAM_PREFIX}{n}"), t))
            .chain(self.aux.iter().map(|(n, t)| (n.clone(), t)));
        for (name, t) in named {
            entries.push(TensorEntry {
                name,
                shape: t.shape().to_vec(),
                offset,
            });
            offset += t.numel();
            data.push(t);
        }
        let header = serde_json::json!({ "meta": self.header, "tensors": entries });
        let header = serde_json::to_vec(&header)?;
        let mut out = Vec::with_capacity(16 + header.len() + offset * 8);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(&header);
        for t in data {
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 16 || &bytes[..8] != MAGIC {
            return Err(Error::Checkpoint("bad magic".into()));
        }
        let hlen = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
        let body = bytes
            .get(16..16 + hlen)
            .ok_or_else(|| Error::Checkpoint("truncated header".into()))?;
        #[derive(Deserialize)]
        struct Raw {
            meta: CheckpointHeader,
            tensors: Vec<TensorEntry>,
        }
        let raw: Raw = serde_json::from_slice(body)?;
        if raw.meta.format_version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported format version {}", raw.meta.format_version)));
        }
        let data = &bytes[16 + hlen..];
        let mut params = BTreeMap::new();
        let mut aux = BTreeMap::new();
        for e in raw.tensors {
            let n: usize = e.shape.iter().product();
            let chunk = data
                .get(e.offset * 8..(e.offset + n) * 8)
                .ok_or_else(|| Error::Checkpoint(format!("tensor `{}` runs past the end of the file", e.name)))?;
            let values = chunk.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
            let t = Tensor::new(e.shape, values)?;
            match e.name.strip_prefix(PARAM_PREFIX) {
                Some(p) => params.insert(p.to_string(), t),
                None => aux.insert(e.name, t),
            };
        }
        let params = ModelParams::from_tensors(raw.meta.model.clone(), params)?;
        Ok(Self {
            header: raw.meta,
            params,
            aux,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

/// SHA-256 of a file, hex encoded.
pub fn file_hash(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::init_params;

    #[test]
    fn round_trip_is_bit_exact() {
        let cfg = ModelConfig {
            source_vocab: 6,
            target_vocab: 7,
            embed: 3,
            hidden: 4,
            layers: 1,
            ..ModelConfig::default()
        };
        let p = init_params(&cfg).unwrap();
        let src = Vocab::from_tokens(["a", "b"]);
        let tgt = Vocab::from_tokens(["x", "y", "z"]);
        let mut ck = Checkpoint::new(p.clone(), src, tgt, 12);
        ck.aux.insert("adam.m/out.b".into(), Tensor::full(&[7], 0.1 + 0.2));
        ck.header.extra = serde_json::json!({"epoch": 3});
        let bytes = ck.to_bytes().unwrap();
        let back = Checkpoint::from_bytes(&bytes).unwrap();
        assert!(back.params.bit_eq(&p));
        assert_eq!(back, ck);
        assert_eq!(back.to_bytes().unwrap(), bytes);
        assert!(Checkpoint::from_bytes(&bytes[..20]).is_err());
        assert!(Checkpoint::from_bytes(b"not a checkpoint").is_err());
    }
}
