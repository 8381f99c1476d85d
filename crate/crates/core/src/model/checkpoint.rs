//! `PXCK` checkpoints: magic, `u32` length plus config JSON, then named
//! tensors (`u32` name length, name, `u32` rank, `u32` dims, `f32` values),
//! all little-endian, until end of file.

use std::io::{ErrorKind, Read, Write};

use super::config::ModelConfig;
use super::mae::Model;
use super::params::Params;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"PXCK";

pub fn write_checkpoint<T: Scalar, W: Write>(model: &Model<T>, mut w: W) -> Result<()> {
    w.write_all(CHECKPOINT_MAGIC)?;
    let json = serde_json::to_vec(&model.config)?;
    w.write_all(&(json.len() as u32).to_le_bytes())?;
    w.write_all(&json)?;
    for (name, t) in model.params.tensors() {
        w.write_all(&(name.len() as u32).to_le_bytes())?;
        w.write_all(name.as_bytes())?;
        w.write_all(&(t.shape.len() as u32).to_le_bytes())?;
        for &d in &t.shape {
            w.write_all(&(d as u32).to_le_bytes())?;
        }
        let mut buf = Vec::with_capacity(t.len() * 4);
        for v in &t.data {
            buf.extend_from_slice(&v.as_f32().to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    Ok(())
}

fn bad(detail: impl Into<String>) -> Error {
    Error::format("checkpoint", detail)
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(|_| bad("truncated"))?;
    Ok(u32::from_le_bytes(b))
}

/// Reads a checkpoint; every tensor of the config must be present exactly
/// once with the expected shape.
pub fn read_checkpoint<T: Scalar, R: Read>(mut r: R) -> Result<Model<T>> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(|_| bad("missing magic"))?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(bad("wrong magic"));
    }
    let len = read_u32(&mut r)? as usize;
    let mut json = vec![0u8; len];
    r.read_exact(&mut json).map_err(|_| bad("truncated config"))?;
    let config: ModelConfig = serde_json::from_slice(&json)?;
    config.validate()?;
    let mut params = Params::<T>::init(&config, 0);
    let names: Vec<String> = params.tensors().into_iter().map(|(n, _)| n).collect();
    let mut seen = vec![false; names.len()];
    let mut slots = params.tensors_mut();
    loop {
        let mut b = [0u8; 4];
        match r.read_exact(&mut b) {
            Ok(()) => {}
            Err(e) if e.kind() == ErrorKind::UnexpectedEof => break,
            Err(e) => return Err(e.into()),
        }
        let name_len = u32::from_le_bytes(b) as usize;
        let mut name = vec![0u8; name_len];
        r.read_exact(&mut name).map_err(|_| bad("truncated tensor name"))?;
        let name = String::from_utf8(name).map_err(|_| bad("tensor name is not UTF-8"))?;
        let idx = names.iter().position(|n| *n == name).ok_or_else(|| bad(format!("unknown tensor {name}")))?;
        if std::mem::replace(&mut seen[idx], true) {
            return Err(bad(format!("duplicate tensor {name}")));
        }
        let rank = read_u32(&mut r)? as usize;
        let shape = (0..rank).map(|_| read_u32(&mut r).map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
        let slot = &mut slots[idx];
        if shape != slot.shape {
            return Err(bad(format!("tensor {name} has shape {shape:?}, expected {:?}", slot.shape)));
        }
        let mut buf = vec![0u8; slot.len() * 4];
        r.read_exact(&mut buf).map_err(|_| bad(format!("truncated values of {name}")))?;
        for (v, c) in slot.data.iter_mut().zip(buf.chunks_exact(4)) {
            *v = T::of(f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64);
        }
    }
    if let Some(i) = seen.iter().position(|s| !s) {
        return Err(bad(format!("missing tensor {}", names[i])));
    }
    drop(slots);
    Model::from_params(config, params)
}
