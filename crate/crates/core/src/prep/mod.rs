//! Polysomnography preprocessing: per-record normalization, anti-alias
//! decimation 200 → 100 Hz, 30 s windowing with majority relabeling, and the
//! inverse mapping from window probabilities back to per-sample streams.

mod filter;
mod windows;

pub use filter::{decimate, decimate_labels, design_antialias_fir, FirFilter};
pub use windows::{
    extract_windows, inference_windows, majority_label, upsample_predictions, window_count,
    Provenance, WindowSet, WINDOW_LEN, WINDOW_STEP,
};

use crate::error::{Error, Result};

/// Rate of the recorded signals and annotations.
pub const FS_RECORD: f64 = 200.0;
/// Rate the models consume.
pub const FS_MODEL: f64 = 100.0;
/// `FS_RECORD / FS_MODEL`.
pub const DECIMATION: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    pub name: String,
    pub samples: Vec<f32>,
}

/// A multichannel recording with one annotation per sample:
/// `1` target arousal, `0` non-arousal, `-1` not scored.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub id: String,
    pub fs: f64,
    pub channels: Vec<Channel>,
    pub labels: Vec<i8>,
}

impl Record {
    /// Validates equal channel lengths, label domain and a positive rate.
    pub fn new(
        id: impl Into<String>,
        fs: f64,
        channels: Vec<Channel>,
        labels: Vec<i8>,
    ) -> Result<Record> {
        let id = id.into();
        if !(fs > 0.0) || !fs.is_finite() {
            return Err(Error::invalid(format!(
                "record {id}: sampling rate {fs} must be positive"
            )));
        }
        if let Some(c) = channels.iter().find(|c| c.samples.len() != labels.len()) {
            return Err(Error::shape(
                format!("record {id} channel '{}' length", c.name),
                labels.len(),
                c.samples.len(),
            ));
        }
        if let Some(i) = labels.iter().position(|l| !(-1..=1).contains(l)) {
            return Err(Error::invalid(format!(
                "record {id}: label {} at sample {i} is outside {{-1, 0, 1}}",
                labels[i]
            )));
        }
        Ok(Record {
            id,
            fs,
            channels,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Per-sample probabilities aligned with a record's annotations.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreStream {
    pub record_id: String,
    pub probs: Vec<f32>,
    pub labels: Vec<i8>,
}

impl ScoreStream {
    pub fn new(
        record_id: impl Into<String>,
        probs: Vec<f32>,
        labels: Vec<i8>,
    ) -> Result<ScoreStream> {
        let record_id = record_id.into();
        if probs.len() != labels.len() {
            return Err(Error::shape(
                format!("score stream {record_id}"),
                labels.len(),
                probs.len(),
            ));
        }
        if let Some(i) = probs.iter().position(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::invalid(format!(
                "score stream {record_id}: probability {} at {i} outside [0, 1]",
                probs[i]
            )));
        }
        if let Some(i) = labels.iter().position(|l| !(-1..=1).contains(l)) {
            return Err(Error::invalid(format!(
                "score stream {record_id}: label {} at {i}",
                labels[i]
            )));
        }
        Ok(ScoreStream {
            record_id,
            probs,
            labels,
        })
    }
}

/// `(x − min)/(max − min)`; a constant signal maps to all zeros.
pub fn normalize_minmax(signal: &[f32]) -> Result<Vec<f32>> {
    if signal.is_empty() {
        return Err(Error::invalid("normalize_minmax: empty signal"));
    }
    if let Some(i) = signal.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFinite {
            context: format!("normalize_minmax input at sample {i} ({})", signal[i]),
        });
    }
    let (lo, hi) = signal
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
            (lo.min(x as f64), hi.max(x as f64))
        });
    if lo == hi {
        return Ok(vec![0.0; signal.len()]);
    }
    let span = hi - lo;
    Ok(signal
        .iter()
        .map(|&x| ((x as f64 - lo) / span) as f32)
        .collect())
}

/// Normalizes every channel, filters and decimates it to 100 Hz, and keeps
/// every second annotation.
pub fn downsample_record(record: &Record) -> Result<Record> {
    if record.fs != FS_RECORD {
        return Err(Error::invalid(format!(
            "record {}: expected {FS_RECORD} Hz, got {}",
            record.id, record.fs
        )));
    }
    let fir = design_antialias_fir(FS_RECORD, FS_MODEL)?;
    let channels = record
        .channels
        .iter()
        .map(|c| {
            let norm = normalize_minmax(&c.samples).map_err(|e| match e {
                Error::NonFinite { context } => Error::NonFinite {
                    context: format!("record {} channel '{}': {context}", record.id, c.name),
                },
                other => other,
            })?;
            Ok(Channel {
                name: c.name.clone(),
                samples: decimate(&norm, &fir, DECIMATION)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let labels = decimate_labels(&record.labels, DECIMATION)?;
    Record::new(record.id.clone(), FS_MODEL, channels, labels)
}

/// The full preparation of one raw record: downsample then window.
pub fn prepare_record(record: &Record) -> Result<WindowSet> {
    Ok(extract_windows(&downsample_record(record)?))
}

/// All windows of a recording at the model rate, with their 100 Hz starts.
pub fn prepare_inference(record: &Record) -> Result<(crate::nn::Tensor3<f32>, Vec<usize>)> {
    Ok(inference_windows(&downsample_record(record)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minmax_examples() {
        assert_eq!(
            normalize_minmax(&[2.0, 4.0, 6.0]).unwrap(),
            vec![0.0, 0.5, 1.0]
        );
        assert_eq!(normalize_minmax(&[5.0, 5.0, 5.0]).unwrap(), vec![0.0; 3]);
        assert!(normalize_minmax(&[]).is_err());
        let err = normalize_minmax(&[1.0, f32::NAN]).unwrap_err().to_string();
        assert!(err.contains("sample 1"), "{err}");
    }

    #[test]
    fn record_invariants() {
        let ch = |n: usize| Channel {
            name: "eeg".into(),
            samples: vec![0.0; n],
        };
        assert!(Record::new("a", 200.0, vec![ch(4)], vec![0; 4]).is_ok());
        assert!(Record::new("a", 200.0, vec![ch(5)], vec![0; 4]).is_err());
        assert!(Record::new("a", 0.0, vec![ch(4)], vec![0; 4]).is_err());
        assert!(Record::new("a", 200.0, vec![ch(2)], vec![0, 2]).is_err());
    }

    #[test]
    fn downsampled_record_halves_length() {
        let n = 6001;
        let samples: Vec<f32> = (0..n).map(|i| (i as f32 * 0.01).sin()).collect();
        let labels: Vec<i8> = (0..n).map(|i| (i / 1000 % 2) as i8).collect();
        let r = Record::new(
            "r",
            200.0,
            vec![Channel {
                name: "x".into(),
                samples,
            }],
            labels.clone(),
        )
        .unwrap();
        let d = downsample_record(&r).unwrap();
        assert_eq!(d.len(), 3001);
        assert_eq!(d.fs, 100.0);
        for (k, l) in d.labels.iter().enumerate() {
            assert_eq!(*l, labels[2 * k]);
        }
    }
}
