//! Record files: `<id>.hdr` (text header), `<id>.sig` (little-endian f32,
//! channel-major) and `<id>.lab` (one signed byte per sample).

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::codec::{read_file, write_file};
use crate::error::{Error, Result};
use crate::prep::{Channel, Record};

const HEADER_MAGIC: &str = "ZREC 1";

fn paths(dir: &Path, id: &str) -> (PathBuf, PathBuf, PathBuf) {
    (
        dir.join(format!("{id}.hdr")),
        dir.join(format!("{id}.sig")),
        dir.join(format!("{id}.lab")),
    )
}

pub(crate) fn check_id(id: &str) -> Result<()> {
    let ok = !id.is_empty()
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c))
        && !id.starts_with('.');
    if ok {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "record id {id:?} must be non-empty ASCII letters, digits, '-', '_' or '.'"
        )))
    }
}

pub fn write_record(dir: &Path, record: &Record) -> Result<()> {
    check_id(&record.id)?;
    if let Some(c) = record
        .channels
        .iter()
        .find(|c| c.name.is_empty() || c.name.contains(['\n', '\r']))
    {
        return Err(Error::invalid(format!(
            "channel name {:?} must be one non-empty line",
            c.name
        )));
    }
    let (hdr, sig, lab) = paths(dir, &record.id);
    let mut h = String::new();
    let _ = writeln!(h, "{HEADER_MAGIC}");
    let _ = writeln!(h, "id {}", record.id);
    let _ = writeln!(h, "fs {}", record.fs);
    let _ = writeln!(h, "length {}", record.len());
    let _ = writeln!(h, "channels {}", record.channels.len());
    for (i, c) in record.channels.iter().enumerate() {
        let _ = writeln!(h, "channel {i} {}", c.name);
    }
    write_file(&hdr, h.as_bytes())?;
    let mut bytes = Vec::with_capacity(4 * record.channels.len() * record.len());
    for c in &record.channels {
        for x in &c.samples {
            bytes.extend_from_slice(&x.to_le_bytes());
        }
    }
    write_file(&sig, &bytes)?;
    write_file(
        &lab,
        &record.labels.iter().map(|&l| l as u8).collect::<Vec<u8>>(),
    )
}

struct Header {
    id: String,
    fs: f64,
    length: usize,
    names: Vec<String>,
}

fn parse_header(path: &Path, text: &str) -> Result<Header> {
    let mut offset = 0usize;
    let mut lines = text.split_inclusive('\n').map(|l| {
        let at = offset;
        offset += l.len();
        (at, l.trim_end_matches(['\n', '\r']))
    });
    let bad = |at: usize, what: String| Error::Malformed {
        path: path.to_path_buf(),
        offset: at as u64,
        what,
    };
    match lines.next() {
        Some((_, HEADER_MAGIC)) => {}
        other => {
            return Err(Error::BadMagic {
                path: path.to_path_buf(),
                expected: HEADER_MAGIC.into(),
                found: other.map(|(_, l)| l.to_string()).unwrap_or_default(),
            })
        }
    }
    let mut field = |key: &str| -> Result<(usize, String)> {
        let (at, line) = lines
            .next()
            .ok_or_else(|| bad(text.len(), format!("missing '{key}' line")))?;
        let value = line
            .strip_prefix(key)
            .and_then(|r| r.strip_prefix(' '))
            .ok_or_else(|| bad(at, format!("expected '{key} <value>', found {line:?}")))?;
        Ok((at, value.to_string()))
    };
    let (_, id) = field("id")?;
    let (at, fs) = field("fs")?;
    let fs: f64 = fs
        .parse()
        .map_err(|_| bad(at, format!("fs {fs:?} is not a number")))?;
    let (at, length) = field("length")?;
    let length: usize = length
        .parse()
        .map_err(|_| bad(at, format!("length {length:?} is not a count")))?;
    let (at, channels) = field("channels")?;
    let channels: usize = channels
        .parse()
        .map_err(|_| bad(at, format!("channels {channels:?} is not a count")))?;
    let mut names = Vec::with_capacity(channels);
    for i in 0..channels {
        let (at, rest) = field("channel")?;
        let name = rest
            .strip_prefix(&format!("{i} "))
            .ok_or_else(|| bad(at, format!("expected 'channel {i} <name>'")))?;
        names.push(name.to_string());
    }
    Ok(Header {
        id,
        fs,
        length,
        names,
    })
}

/// Reads record `id` from `dir`, checking payload sizes against the header.
pub fn read_record(dir: &Path, id: &str) -> Result<Record> {
    check_id(id)?;
    let (hdr, sig, lab) = paths(dir, id);
    let text = String::from_utf8(read_file(&hdr)?).map_err(|_| Error::Malformed {
        path: hdr.clone(),
        offset: 0,
        what: "header is not UTF-8".into(),
    })?;
    let h = parse_header(&hdr, &text)?;
    if h.id != id {
        return Err(Error::Malformed {
            path: hdr,
            offset: 0,
            what: format!("header names record {:?}, file is {id:?}", h.id),
        });
    }
    let raw = read_file(&sig)?;
    let expected = 4 * h.names.len() as u64 * h.length as u64;
    if raw.len() as u64 != expected {
        return Err(Error::SizeMismatch {
            path: sig,
            expected,
            actual: raw.len() as u64,
        });
    }
    let labels_raw = read_file(&lab)?;
    if labels_raw.len() != h.length {
        return Err(Error::SizeMismatch {
            path: lab,
            expected: h.length as u64,
            actual: labels_raw.len() as u64,
        });
    }
    let labels: Vec<i8> = labels_raw.iter().map(|&b| b as i8).collect();
    if let Some(i) = labels.iter().position(|l| !(-1..=1).contains(l)) {
        return Err(Error::LabelDomain {
            path: lab,
            offset: i as u64,
            value: labels[i],
        });
    }
    let channels = h
        .names
        .into_iter()
        .enumerate()
        .map(|(c, name)| Channel {
            name,
            samples: raw[c * 4 * h.length..(c + 1) * 4 * h.length]
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")))
                .collect(),
        })
        .collect();
    Record::new(id, h.fs, channels, labels)
}

/// Ids of all records in `dir` (by `.hdr` file), sorted.
pub fn list_records(dir: &Path) -> Result<Vec<String>> {
    list_with_extension(dir, "hdr")
}

pub(crate) fn list_with_extension(dir: &Path, ext: &str) -> Result<Vec<String>> {
    let mut ids = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.extension().and_then(|e| e.to_str()) == Some(ext) {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                ids.push(stem.to_string());
            }
        }
    }
    ids.sort();
    Ok(ids)
}
