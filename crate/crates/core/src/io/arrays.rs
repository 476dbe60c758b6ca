//! Window files (`.win`, magic `ZWS1`) and prediction files (`.pred`,
//! magic `ZPR1`).

use std::path::Path;

use super::codec::{read_file, write_file, Reader, Writer};
use super::records::list_with_extension;
use crate::error::{Error, Result};
use crate::nn::Tensor3;
use crate::prep::{Provenance, WindowSet};

const WINDOW_MAGIC: &[u8; 4] = b"ZWS1";
const PRED_MAGIC: &[u8; 4] = b"ZPR1";

pub fn encode_windows(set: &WindowSet) -> Vec<u8> {
    let mut w = Writer::default();
    w.bytes(WINDOW_MAGIC);
    w.u32(set.channels() as u32);
    w.u32(set.window_len() as u32);
    w.u64(set.len() as u64);
    for (p, &l) in set.provenance.iter().zip(&set.labels) {
        w.string(&p.record_id);
        w.u64(p.start as u64);
        w.u8(l);
    }
    w.f32s(set.data.data());
    w.buf
}

pub fn decode_windows(path: &Path, bytes: &[u8]) -> Result<WindowSet> {
    let mut r = Reader::new(path, bytes);
    r.magic(WINDOW_MAGIC)?;
    let channels = r.u32("channel count")? as usize;
    let len = r.u32("window length")? as usize;
    let n = r.count(13, "window count")?;
    let mut labels = Vec::with_capacity(n);
    let mut provenance = Vec::with_capacity(n);
    for _ in 0..n {
        let record_id = r.string("record id")?;
        let start = r.u64("window start")? as usize;
        let at = r.pos();
        let label = r.u8("window label")?;
        if label > 1 {
            return Err(r.malformed_at(at, format!("window label {label} is not 0 or 1")));
        }
        labels.push(label);
        provenance.push(Provenance { record_id, start });
    }
    let values = n
        .checked_mul(channels)
        .and_then(|v| v.checked_mul(len))
        .ok_or_else(|| r.malformed("window payload size overflows"))?;
    if r.remaining() != values * 4 {
        return Err(Error::SizeMismatch {
            path: path.to_path_buf(),
            expected: (r.pos() + values * 4) as u64,
            actual: bytes.len() as u64,
        });
    }
    let data = Tensor3::from_vec([n, channels, len], r.f32s(values, "window samples")?)?;
    r.finish()?;
    WindowSet::new(data, labels, provenance)
}

pub fn write_windows(path: &Path, set: &WindowSet) -> Result<()> {
    write_file(path, &encode_windows(set))
}

pub fn read_windows(path: &Path) -> Result<WindowSet> {
    decode_windows(path, &read_file(path)?)
}

/// Every `.win` file of `dir`, in file-name order, as one set.
pub fn read_window_dir(dir: &Path) -> Result<WindowSet> {
    let stems = list_with_extension(dir, "win")?;
    if stems.is_empty() {
        return Err(Error::invalid(format!(
            "no .win files in {}",
            dir.display()
        )));
    }
    let mut all: Option<WindowSet> = None;
    for s in stems {
        let set = read_windows(&dir.join(format!("{s}.win")))?;
        match &mut all {
            None => all = Some(set),
            Some(a) => a.extend(set)?,
        }
    }
    Ok(all.expect("at least one file"))
}

/// Per-sample probabilities of one record at the recording rate.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub record_id: String,
    pub probs: Vec<f32>,
}

pub fn encode_prediction(p: &Prediction) -> Vec<u8> {
    let mut w = Writer::default();
    w.bytes(PRED_MAGIC);
    w.string(&p.record_id);
    w.u64(p.probs.len() as u64);
    w.f32s(&p.probs);
    w.buf
}

pub fn decode_prediction(path: &Path, bytes: &[u8]) -> Result<Prediction> {
    let mut r = Reader::new(path, bytes);
    r.magic(PRED_MAGIC)?;
    let record_id = r.string("record id")?;
    let at = r.pos();
    let n = r.u64("sample count")?;
    if r.remaining() as u64 != n.saturating_mul(4) {
        return Err(Error::SizeMismatch {
            path: path.to_path_buf(),
            expected: (at as u64 + 8).saturating_add(n.saturating_mul(4)),
            actual: bytes.len() as u64,
        });
    }
    let probs = r.f32s(n as usize, "probabilities")?;
    if let Some(i) = probs.iter().position(|p| !(0.0..=1.0).contains(p)) {
        return Err(r.malformed_at(
            at + 8 + 4 * i,
            format!("probability {} outside [0, 1]", probs[i]),
        ));
    }
    Ok(Prediction { record_id, probs })
}

pub fn write_prediction(path: &Path, p: &Prediction) -> Result<()> {
    write_file(path, &encode_prediction(p))
}

pub fn read_prediction(path: &Path) -> Result<Prediction> {
    decode_prediction(path, &read_file(path)?)
}
