//! Binary model container.
//!
//! Layout (little endian): magic `AVCK`, u32 version, u32 descriptor length,
//! JSON architecture descriptor, u32 tensor count, then per tensor: u16 name
//! length, UTF-8 name, u8 rank, u32 dims, f64 values.

use std::collections::HashMap;
use std::path::Path;

use super::model::{Architecture, Matrix, Parameters, RnnLayer, VictimModel};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"AVCK";
pub const VERSION: u32 = 1;

pub fn encode(model: &VictimModel) -> Result<Vec<u8>> {
    let desc = serde_json::to_vec(model.architecture())?;
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(desc.len() as u32).to_le_bytes());
    out.extend_from_slice(&desc);
    let tensors = model.params().named();
    out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for (name, shape, data) in tensors {
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.push(shape.len() as u8);
        for d in shape {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if n > self.buf.len() {
            return Err(Error::Checkpoint("truncated".into()));
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Ok(head)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
}

struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

pub fn decode(bytes: &[u8]) -> Result<VictimModel> {
    let mut r = Reader { buf: bytes };
    if r.take(4)? != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let desc_len = r.u32()? as usize;
    let arch: Architecture = serde_json::from_slice(r.take(desc_len)?)?;
    arch.validate()?;
    let count = r.u32()? as usize;
    let mut tensors = HashMap::new();
    for _ in 0..count {
        let name_len = u16::from_le_bytes(r.take(2)?.try_into().expect("2 bytes")) as usize;
        let name = std::str::from_utf8(r.take(name_len)?)
            .map_err(|_| Error::Checkpoint("tensor name is not UTF-8".into()))?
            .to_owned();
        let rank = r.take(1)?[0] as usize;
        let mut shape = Vec::with_capacity(rank);
        let mut numel = 1usize;
        for _ in 0..rank {
            let d = r.u32()? as usize;
            numel = numel.checked_mul(d).ok_or_else(|| Error::Checkpoint("tensor too large".into()))?;
            shape.push(d);
        }
        let bytes_needed = numel.checked_mul(8).ok_or_else(|| Error::Checkpoint("tensor too large".into()))?;
        let data = r
            .take(bytes_needed)?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        if tensors.insert(name.clone(), Tensor { shape, data }).is_some() {
            return Err(Error::Checkpoint(format!("duplicate tensor {name}")));
        }
    }
    if !r.buf.is_empty() {
        return Err(Error::Checkpoint("trailing bytes".into()));
    }

    let mut get = |name: &str| tensors.remove(name).ok_or_else(|| Error::Checkpoint(format!("missing tensor {name}")));
    let vector = |t: Tensor| -> Result<Vec<f64>> {
        if t.shape.len() != 1 {
            return Err(Error::Checkpoint("expected a vector".into()));
        }
        Ok(t.data)
    };
    let matrix = |t: Tensor| -> Result<Matrix> {
        if t.shape.len() != 2 {
            return Err(Error::Checkpoint("expected a matrix".into()));
        }
        Ok(Matrix { rows: t.shape[0], cols: t.shape[1], data: t.data })
    };
    let feature_scale = vector(get("feature_scale")?)?;
    let mut layers = Vec::with_capacity(arch.layers);
    for i in 0..arch.layers {
        layers.push(RnnLayer {
            w: matrix(get(&format!("rnn.{i}.w"))?)?,
            u: matrix(get(&format!("rnn.{i}.u"))?)?,
            b: vector(get(&format!("rnn.{i}.b"))?)?,
        });
    }
    let out_w = matrix(get("out.w")?)?;
    let out_b = vector(get("out.b")?)?;
    if let Some(extra) = tensors.keys().next() {
        return Err(Error::Checkpoint(format!("unexpected tensor {extra}")));
    }
    VictimModel::from_parts(arch, Parameters { feature_scale, layers, out_w, out_b })
}

pub fn save(path: impl AsRef<Path>, model: &VictimModel) -> Result<()> {
    std::fs::write(path, encode(model)?)?;
    Ok(())
}

pub fn load(path: impl AsRef<Path>) -> Result<VictimModel> {
    decode(&std::fs::read(path)?)
}
