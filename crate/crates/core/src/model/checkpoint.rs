//! Binary checkpoint: `"ASKM"`, u32 version, u32 tensor count, then per
//! tensor a u16 name length, the UTF-8 name, a u8 rank, u32 dims and a
//! little-endian f64 payload, followed by a CRC32 of everything before it.
//!
//! Architecture settings travel as `meta.*` tensors ahead of the weights.

use std::path::Path;

use super::network::{Model, ModelSpec};
use super::variant::Variant;
use crate::config::GroupWeighting;
use crate::encoders::EmbeddingTable;
use crate::error::{Error, Result};
use crate::numcore::{ParamSet, Tensor};

pub const MAGIC: &[u8; 4] = b"ASKM";
pub const VERSION: u32 = 1;

const META: &str = "meta.";

/// Weights and settings, without the frozen embedding block.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub spec: ModelSpec,
    pub params: ParamSet,
}

impl Checkpoint {
    pub fn of(model: &Model) -> Self {
        Self {
            spec: model.spec.clone(),
            params: model.params.clone(),
        }
    }

    pub fn into_model(self, embeddings: EmbeddingTable) -> Result<Model> {
        Model::new(self.spec, embeddings, self.params)
    }

    fn meta(&self) -> Vec<(&'static str, Tensor)> {
        let s = &self.spec;
        let v = |x: Vec<f64>| Tensor::vector(x);
        vec![
            ("meta.variant", v(vec![f64::from(s.variant.code())])),
            ("meta.dims", v(vec![s.fixed_dim as f64, s.learned_dim as f64])),
            ("meta.segment_len", v(vec![s.segment_len as f64])),
            ("meta.similar_users", v(vec![s.similar_users as f64])),
            ("meta.max_history", v(vec![s.max_history.unwrap_or(0) as f64])),
            (
                "meta.group_weights",
                v(vec![match s.group_weighting {
                    GroupWeighting::Softmax => 0.0,
                    GroupWeighting::Raw => 1.0,
                }]),
            ),
            ("meta.lambda", v(vec![s.lambda])),
        ]
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let meta = self.meta();
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&((meta.len() + self.params.len()) as u32).to_le_bytes());
        let tensors = meta.iter().map(|(n, t)| (*n, t)).chain(self.params.iter());
        for (name, t) in tensors {
            out.extend_from_slice(&(name.len() as u16).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.push(t.rank() as u8);
            for &d in t.shape() {
                out.extend_from_slice(&(d as u32).to_le_bytes());
            }
            for &x in t.data() {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        let crc = crc32fast::hash(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 16 {
            return Err(Error::Corrupt("checkpoint truncated".into()));
        }
        let (body, tail) = bytes.split_at(bytes.len() - 4);
        let stored = u32::from_le_bytes(tail.try_into().expect("4 bytes"));
        if crc32fast::hash(body) != stored {
            return Err(Error::Corrupt("checkpoint CRC mismatch".into()));
        }
        let mut r = Reader { buf: body, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::Corrupt("not a checkpoint (bad magic)".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Corrupt(format!("unsupported checkpoint version {version}")));
        }
        let count = r.u32()? as usize;
        let mut meta = std::collections::HashMap::new();
        let mut params = ParamSet::new();
        for _ in 0..count {
            let len = r.u16()? as usize;
            let name = std::str::from_utf8(r.take(len)?)
                .map_err(|_| Error::Corrupt("tensor name is not UTF-8".into()))?
                .to_string();
            let rank = r.take(1)?[0] as usize;
            let mut shape = Vec::with_capacity(rank);
            for _ in 0..rank {
                shape.push(r.u32()? as usize);
            }
            let n: usize = shape.iter().product();
            let raw = r.take(n.checked_mul(8).ok_or_else(|| Error::Corrupt("tensor too large".into()))?)?;
            let data = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect();
            let t = Tensor::new(shape, data).map_err(|e| Error::Corrupt(format!("tensor {name}: {e}")))?;
            if name.starts_with(META) {
                meta.insert(name, t);
            } else {
                params.insert(name, t).map_err(|e| Error::Corrupt(e.to_string()))?;
            }
        }
        if r.pos != body.len() {
            return Err(Error::Corrupt("trailing bytes after the last tensor".into()));
        }
        let get = |k: &str| -> Result<&[f64]> {
            meta.get(k)
                .map(|t| t.data())
                .ok_or_else(|| Error::Corrupt(format!("checkpoint lacks {k}")))
        };
        let first = |k: &str| -> Result<f64> { Ok(get(k)?[0]) };
        let count_of = |x: f64| -> Result<usize> {
            if x >= 0.0 && x.fract() == 0.0 {
                Ok(x as usize)
            } else {
                Err(Error::Corrupt(format!("bad count {x}")))
            }
        };
        let variant = Variant::from_code(first("meta.variant")? as u8)
            .ok_or_else(|| Error::Corrupt("unknown variant code".into()))?;
        let dims = get("meta.dims")?;
        if dims.len() != 2 {
            return Err(Error::Corrupt("meta.dims must hold two values".into()));
        }
        let max_history = count_of(first("meta.max_history")?)?;
        let spec = ModelSpec {
            variant,
            fixed_dim: count_of(dims[0])?,
            learned_dim: count_of(dims[1])?,
            segment_len: count_of(first("meta.segment_len")?)?,
            similar_users: count_of(first("meta.similar_users")?)?,
            max_history: (max_history > 0).then_some(max_history),
            group_weighting: if first("meta.group_weights")? == 0.0 {
                GroupWeighting::Softmax
            } else {
                GroupWeighting::Raw
            },
            lambda: first("meta.lambda")?,
        };
        Ok(Self { spec, params })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::Corrupt("checkpoint truncated".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
}
