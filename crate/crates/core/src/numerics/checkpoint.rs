//! Binary checkpoint container.
//!
//! Layout: version byte, magic `RGCK`, u32 LE header length, JSON header
//! `{"config": .., "params": [{"name", "shape"}, ..]}`, then each parameter's
//! values as little-endian f64 in header order.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{NumericsError, ParamStore, Result, Tensor};

pub const CHECKPOINT_VERSION: u8 = 1;
const MAGIC: &[u8; 4] = b"RGCK";

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub config: serde_json::Value,
    pub params: Vec<(String, Tensor)>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    config: serde_json::Value,
    params: Vec<ParamHeader>,
}

#[derive(Serialize, Deserialize)]
struct ParamHeader {
    name: String,
    shape: Vec<usize>,
}

impl Checkpoint {
    pub fn from_store(config: serde_json::Value, store: &ParamStore) -> Self {
        Checkpoint {
            config,
            params: store
                .params()
                .iter()
                .map(|p| (p.name.clone(), p.value.clone()))
                .collect(),
        }
    }

    /// Copies values into an existing store with the same names and shapes.
    pub fn load_into(&self, store: &mut ParamStore) -> Result<()> {
        if self.params.len() != store.len() {
            return Err(NumericsError::Checkpoint(format!(
                "{} parameters in checkpoint, model has {}",
                self.params.len(),
                store.len()
            )));
        }
        for (name, t) in &self.params {
            let id = store.id(name)?;
            let dst = store.value_mut(id);
            if dst.shape() != t.shape() {
                return Err(NumericsError::ShapeMismatch {
                    op: "checkpoint",
                    left: dst.shape().to_vec(),
                    right: t.shape().to_vec(),
                });
            }
            dst.data_mut().copy_from_slice(t.data());
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header = Header {
            config: self.config.clone(),
            params: self
                .params
                .iter()
                .map(|(name, t)| ParamHeader {
                    name: name.clone(),
                    shape: t.shape().to_vec(),
                })
                .collect(),
        };
        let json = serde_json::to_vec(&header).expect("header serializes");
        let payload: usize = self.params.iter().map(|(_, t)| t.len() * 8).sum();
        let mut out = Vec::with_capacity(9 + json.len() + payload);
        out.push(CHECKPOINT_VERSION);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(json.len() as u32).to_le_bytes());
        out.extend_from_slice(&json);
        for (_, t) in &self.params {
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| NumericsError::Checkpoint(m.to_string());
        if bytes.len() < 9 {
            return Err(bad("truncated header"));
        }
        if bytes[0] != CHECKPOINT_VERSION {
            return Err(NumericsError::Checkpoint(format!(
                "unsupported version {} (expected {CHECKPOINT_VERSION})",
                bytes[0]
            )));
        }
        if &bytes[1..5] != MAGIC {
            return Err(bad("bad magic"));
        }
        let hlen = u32::from_le_bytes(bytes[5..9].try_into().unwrap()) as usize;
        let body = &bytes[9..];
        if body.len() < hlen {
            return Err(bad("truncated header"));
        }
        let header: Header =
            serde_json::from_slice(&body[..hlen]).map_err(|e| NumericsError::Checkpoint(e.to_string()))?;
        let mut rest = &body[hlen..];
        let mut params = Vec::with_capacity(header.params.len());
        for p in header.params {
            let n: usize = p.shape.iter().product();
            if rest.len() < n * 8 {
                return Err(NumericsError::Checkpoint(format!("truncated payload for {}", p.name)));
            }
            let data = rest[..n * 8]
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            rest = &rest[n * 8..];
            params.push((p.name, Tensor::new(p.shape, data)?));
        }
        if !rest.is_empty() {
            return Err(bad("trailing bytes after payload"));
        }
        Ok(Checkpoint {
            config: header.config,
            params,
        })
    }
}

pub fn write_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    let io = |source| NumericsError::Io {
        path: path.to_path_buf(),
        source,
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io)?;
    }
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, ckpt.to_bytes()).map_err(io)?;
    std::fs::rename(&tmp, path).map_err(io)
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = std::fs::read(path).map_err(|source| NumericsError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Checkpoint::from_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Checkpoint {
        Checkpoint {
            config: serde_json::json!({"d_model": 8}),
            params: vec![
                ("a".into(), Tensor::matrix(2, 2, vec![1.0, -0.5, 1e-300, f64::MAX]).unwrap()),
                ("b".into(), Tensor::scalar(3.25)),
            ],
        }
    }

    #[test]
    fn roundtrip() {
        let c = sample();
        let bytes = c.to_bytes();
        assert_eq!(bytes[0], CHECKPOINT_VERSION);
        assert_eq!(&bytes[1..5], b"RGCK");
        assert_eq!(Checkpoint::from_bytes(&bytes).unwrap(), c);
    }

    #[test]
    fn rejects_corruption() {
        let mut bytes = sample().to_bytes();
        assert!(Checkpoint::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        bytes[0] = 9;
        assert!(Checkpoint::from_bytes(&bytes).is_err());
    }

    #[test]
    fn file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub/model.ckpt");
        write_checkpoint(&p, &sample()).unwrap();
        assert_eq!(read_checkpoint(&p).unwrap(), sample());
    }
}
