//! Model files.
//!
//! Layout, little-endian: `"ZNN1"`, kind tag `u32`, input channels `u32`,
//! input length `u32`, tensor count `u32`, then per tensor its name (`u32`
//! length + UTF-8), dtype code `u8`, rank `u32`, dims `u32` each and the raw
//! values; finally the FNV-1a 64 checksum of every preceding byte.
//!
//! An ensemble file is `"ZEN1"`, member count `u32`, each member as a
//! length-prefixed (`u64`) model file, and the same trailing checksum.

use std::path::Path;

use super::codec::{read_file, write_file, Reader, Writer};
use crate::error::{Error, Result};
use crate::models::{build_model_with, ModelConfig, ModelGraph, ModelKind};
use crate::nn::{DType, Param, RngState, Scalar};
use crate::util::fnv64;

const MODEL_MAGIC: &[u8; 4] = b"ZNN1";
const ENSEMBLE_MAGIC: &[u8; 4] = b"ZEN1";

fn seal(mut w: Writer) -> Vec<u8> {
    let sum = fnv64(&w.buf);
    w.u64(sum);
    w.buf
}

/// Splits off and verifies the trailing checksum.
fn unseal<'a>(path: &Path, bytes: &'a [u8]) -> Result<&'a [u8]> {
    if bytes.len() < 12 {
        return Err(Error::Truncated {
            path: path.to_path_buf(),
            offset: bytes.len() as u64,
            what: "file shorter than magic and checksum".into(),
        });
    }
    let (body, tail) = bytes.split_at(bytes.len() - 8);
    let stored = u64::from_le_bytes(tail.try_into().expect("8 bytes"));
    let computed = fnv64(body);
    if stored != computed {
        return Err(Error::Checksum {
            path: path.to_path_buf(),
            stored,
            computed,
        });
    }
    Ok(body)
}

pub fn encode_model<T: Scalar>(model: &ModelGraph<T>) -> Vec<u8> {
    let mut w = Writer::default();
    w.bytes(MODEL_MAGIC);
    w.u32(model.kind.tag());
    w.u32(model.config.in_channels as u32);
    w.u32(model.config.input_len as u32);
    let tensors: Vec<&Param<T>> = model.graph.params().chain(model.graph.buffers()).collect();
    w.u32(tensors.len() as u32);
    for t in tensors {
        w.string(&t.name);
        w.u8(T::DTYPE as u8);
        w.u32(t.dims.len() as u32);
        for &d in &t.dims {
            w.u32(d as u32);
        }
        for &v in &t.value {
            v.write_le(&mut w.buf);
        }
    }
    seal(w)
}

/// Decodes a model file. With `expected`, a file of another kind is rejected.
pub fn decode_model<T: Scalar>(
    path: &Path,
    bytes: &[u8],
    expected: Option<ModelKind>,
) -> Result<ModelGraph<T>> {
    let body = unseal(path, bytes)?;
    let mut r = Reader::new(path, body);
    r.magic(MODEL_MAGIC)?;
    let kind = ModelKind::from_tag(r.u32("model kind")?)?;
    if let Some(e) = expected {
        if e != kind {
            return Err(Error::KindMismatch {
                expected: e.to_string(),
                found: kind.to_string(),
            });
        }
    }
    let config = ModelConfig {
        in_channels: r.u32("input channels")? as usize,
        input_len: r.u32("input length")? as usize,
    };
    if config.in_channels == 0 || config.input_len < 2 {
        return Err(r.malformed(format!(
            "input geometry {} x {} is not buildable",
            config.in_channels, config.input_len
        )));
    }
    let mut model = build_model_with::<T>(kind, config, &mut RngState::new(0));
    let count = r.u32("tensor count")? as usize;
    let expected_count = model.graph.params().count() + model.graph.buffers().count();
    if count != expected_count {
        return Err(r.malformed(format!(
            "{count} tensors, model {kind} has {expected_count}"
        )));
    }
    // Parameters first, then buffers, each in graph order.
    let names: Vec<(String, Vec<usize>)> = model
        .graph
        .params()
        .chain(model.graph.buffers())
        .map(|p| (p.name.clone(), p.dims.clone()))
        .collect();
    let mut values: Vec<Vec<T>> = Vec::with_capacity(count);
    for (name, dims) in &names {
        let at = r.pos();
        let found = r.string("tensor name")?;
        if &found != name {
            return Err(r.malformed_at(at, format!("tensor {found:?} where {name:?} belongs")));
        }
        let code = r.u8("dtype")?;
        let dtype = DType::from_code(code)
            .ok_or_else(|| r.malformed(format!("unknown dtype code {code}")))?;
        let rank = r.u32("rank")? as usize;
        let at = r.pos();
        let file_dims = (0..rank)
            .map(|_| r.u32("dim").map(|d| d as usize))
            .collect::<Result<Vec<usize>>>()?;
        if &file_dims != dims {
            return Err(r.malformed_at(
                at,
                format!("tensor {name} has dims {file_dims:?}, model expects {dims:?}"),
            ));
        }
        let n: usize = dims.iter().product();
        let raw = r.take(n * dtype.size(), name)?;
        let v: Vec<T> = match dtype {
            _ if dtype == T::DTYPE => raw.chunks_exact(dtype.size()).map(T::read_le).collect(),
            DType::F32 => raw
                .chunks_exact(4)
                .map(|c| T::of(f32::read_le(c) as f64))
                .collect(),
            DType::F64 => raw
                .chunks_exact(8)
                .map(|c| T::of(f64::read_le(c)))
                .collect(),
        };
        values.push(v);
    }
    r.finish()?;
    let mut values = values.into_iter();
    for p in model.graph.params_mut() {
        p.value = values.next().expect("counted");
    }
    for b in model.graph.buffers_mut() {
        b.value = values.next().expect("counted");
    }
    Ok(model)
}

pub fn save_model<T: Scalar>(path: &Path, model: &ModelGraph<T>) -> Result<()> {
    write_file(path, &encode_model(model))
}

pub fn load_model<T: Scalar>(path: &Path, expected: Option<ModelKind>) -> Result<ModelGraph<T>> {
    decode_model(path, &read_file(path)?, expected)
}

pub fn encode_ensemble<T: Scalar>(members: &[ModelGraph<T>]) -> Vec<u8> {
    let mut w = Writer::default();
    w.bytes(ENSEMBLE_MAGIC);
    w.u32(members.len() as u32);
    for m in members {
        let blob = encode_model(m);
        w.u64(blob.len() as u64);
        w.bytes(&blob);
    }
    seal(w)
}

pub fn save_ensemble<T: Scalar>(path: &Path, members: &[ModelGraph<T>]) -> Result<()> {
    if members.is_empty() {
        return Err(Error::invalid("an ensemble needs at least one member"));
    }
    write_file(path, &encode_ensemble(members))
}

/// Loads a single model or an ensemble file as a list of members.
pub fn load_members<T: Scalar>(
    path: &Path,
    expected: Option<ModelKind>,
) -> Result<Vec<ModelGraph<T>>> {
    let bytes = read_file(path)?;
    if bytes.starts_with(MODEL_MAGIC) {
        return Ok(vec![decode_model(path, &bytes, expected)?]);
    }
    let body = unseal(path, &bytes)?;
    let mut r = Reader::new(path, body);
    r.magic(ENSEMBLE_MAGIC)?;
    let n = r.u32("member count")? as usize;
    if n == 0 {
        return Err(r.malformed("ensemble without members"));
    }
    let mut members = Vec::with_capacity(n);
    for i in 0..n {
        let len = r.count(1, "member length")?;
        let blob = r.take(len, &format!("member {i}"))?;
        members.push(decode_model(path, blob, expected)?);
    }
    r.finish()?;
    Ok(members)
}
