use crate::error::{Error, Result};
use crate::nn::Tensor3;

use super::{Record, DECIMATION};

/// 30 s at 100 Hz.
pub const WINDOW_LEN: usize = 3000;
/// 5 s hop, i.e. 25 s overlap.
pub const WINDOW_STEP: usize = 500;

/// Where a window came from.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Provenance {
    pub record_id: String,
    /// First sample at 100 Hz.
    pub start: usize,
}

/// Labeled fixed-length windows, `data` shaped `(windows, channels, WINDOW_LEN)`.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowSet {
    pub data: Tensor3<f32>,
    pub labels: Vec<u8>,
    pub provenance: Vec<Provenance>,
}

impl WindowSet {
    pub fn empty(channels: usize) -> WindowSet {
        WindowSet {
            data: Tensor3::zeros(0, channels, WINDOW_LEN),
            labels: Vec::new(),
            provenance: Vec::new(),
        }
    }

    pub fn new(
        data: Tensor3<f32>,
        labels: Vec<u8>,
        provenance: Vec<Provenance>,
    ) -> Result<WindowSet> {
        if data.batch() != labels.len() || labels.len() != provenance.len() {
            return Err(Error::shape(
                "window set (windows, labels, provenance)",
                data.batch(),
                format!(
                    "{} labels, {} provenance entries",
                    labels.len(),
                    provenance.len()
                ),
            ));
        }
        if let Some(l) = labels.iter().find(|l| **l > 1) {
            return Err(Error::invalid(format!("window label {l} is not binary")));
        }
        Ok(WindowSet {
            data,
            labels,
            provenance,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn channels(&self) -> usize {
        self.data.channels()
    }

    pub fn window_len(&self) -> usize {
        self.data.length()
    }

    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|l| **l == 1).count()
    }

    /// Windows at `rows`, in that order.
    pub fn subset(&self, rows: &[usize]) -> WindowSet {
        WindowSet {
            data: self.data.gather(rows),
            labels: rows.iter().map(|&r| self.labels[r]).collect(),
            provenance: rows.iter().map(|&r| self.provenance[r].clone()).collect(),
        }
    }

    /// Appends another set with the same channel count and window length.
    pub fn extend(&mut self, other: WindowSet) -> Result<()> {
        let [_, c, l] = self.data.dims();
        let [n2, c2, l2] = other.data.dims();
        if (c, l) != (c2, l2) {
            return Err(Error::shape(
                "window set concatenation",
                format!("{c}x{l}"),
                format!("{c2}x{l2}"),
            ));
        }
        let n = self.len() + n2;
        let mut data = std::mem::replace(&mut self.data, Tensor3::zeros(0, c, l)).into_vec();
        data.extend_from_slice(other.data.data());
        self.data = Tensor3::from_vec([n, c, l], data)?;
        self.labels.extend(other.labels);
        self.provenance.extend(other.provenance);
        Ok(())
    }
}

/// Number of windows in a 100 Hz record of length `len`.
pub fn window_count(len: usize) -> usize {
    if len < WINDOW_LEN {
        0
    } else {
        (len - WINDOW_LEN) / WINDOW_STEP + 1
    }
}

/// Most frequent annotation of a window: `None` when `-1` is strictly the
/// most frequent value (the window is discarded), otherwise the more frequent
/// of 0 and 1, with a tie going to 1.
pub fn majority_label(labels: &[i8]) -> Result<Option<u8>> {
    if labels.is_empty() {
        return Err(Error::invalid("majority_label: empty window"));
    }
    let mut counts = [0usize; 3];
    for (i, &l) in labels.iter().enumerate() {
        match l {
            -1..=1 => counts[(l + 1) as usize] += 1,
            _ => {
                return Err(Error::invalid(format!(
                    "majority_label: value {l} at {i} is outside {{-1, 0, 1}}"
                )))
            }
        }
    }
    let [unscored, neg, pos] = counts;
    if unscored > neg && unscored > pos {
        return Ok(None);
    }
    Ok(Some((pos >= neg) as u8))
}

/// Slides 3000-sample windows with a 500-sample hop over a 100 Hz record and
/// keeps those whose majority label is 0 or 1.
pub fn extract_windows(record: &Record) -> WindowSet {
    let channels = record.channels.len();
    let n = window_count(record.len());
    let mut data = Vec::new();
    let mut labels = Vec::new();
    let mut provenance = Vec::new();
    for w in 0..n {
        let start = w * WINDOW_STEP;
        let span = start..start + WINDOW_LEN;
        let label = majority_label(&record.labels[span.clone()])
            .expect("record labels validated on construction");
        let Some(label) = label else { continue };
        for c in &record.channels {
            data.extend_from_slice(&c.samples[span.clone()]);
        }
        labels.push(label);
        provenance.push(Provenance {
            record_id: record.id.clone(),
            start,
        });
    }
    let data = Tensor3::from_vec([labels.len(), channels, WINDOW_LEN], data)
        .expect("window buffer sized by construction");
    WindowSet {
        data,
        labels,
        provenance,
    }
}

/// Every window of a 100 Hz record regardless of annotation, with start
/// offsets, for inference over the whole recording.
pub fn inference_windows(record: &Record) -> (Tensor3<f32>, Vec<usize>) {
    let n = window_count(record.len());
    let starts: Vec<usize> = (0..n).map(|w| w * WINDOW_STEP).collect();
    let mut data = Vec::with_capacity(n * record.channels.len() * WINDOW_LEN);
    for &s in &starts {
        for c in &record.channels {
            data.extend_from_slice(&c.samples[s..s + WINDOW_LEN]);
        }
    }
    let data = Tensor3::from_vec([n, record.channels.len(), WINDOW_LEN], data)
        .expect("window buffer sized by construction");
    (data, starts)
}

/// Maps one probability per window back to a per-sample stream of
/// `original_len` samples at the recording rate.
///
/// At 100 Hz each sample takes the mean over the windows covering it;
/// uncovered samples copy the nearest covered one (the earlier on a tie), or
/// 0 when there are no windows. The stream is then repeated ×2 and cut or
/// edge-padded to `original_len`.
pub fn upsample_predictions(
    window_probs: &[f32],
    starts: &[usize],
    original_len: usize,
) -> Result<Vec<f32>> {
    if window_probs.len() != starts.len() {
        return Err(Error::shape(
            "upsample_predictions provenance",
            window_probs.len(),
            starts.len(),
        ));
    }
    if let Some(p) = window_probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::invalid(format!(
            "upsample_predictions: probability {p} outside [0, 1]"
        )));
    }
    let len = original_len.div_ceil(DECIMATION);
    if let Some(s) = starts.iter().find(|&&s| s + WINDOW_LEN > len) {
        return Err(Error::invalid(format!(
            "upsample_predictions: window at {s} ends past the {len}-sample record"
        )));
    }
    let mut sum = vec![0.0f64; len];
    let mut count = vec![0u32; len];
    for (&p, &s) in window_probs.iter().zip(starts) {
        for i in s..s + WINDOW_LEN {
            sum[i] += p as f64;
            count[i] += 1;
        }
    }
    let covered: Vec<Option<f32>> = (0..len)
        .map(|i| (count[i] > 0).then(|| (sum[i] / count[i] as f64) as f32))
        .collect();

    let mut at100 = vec![0.0f32; len];
    let mut prev: Option<(usize, f32)> = None;
    let mut pending = Vec::new();
    for i in 0..len {
        match covered[i] {
            Some(v) => {
                for &j in &pending {
                    at100[j] = match prev {
                        Some((pi, pv)) if j - pi <= i - j => pv,
                        _ => v,
                    };
                }
                pending.clear();
                at100[i] = v;
                prev = Some((i, v));
            }
            None => pending.push(i),
        }
    }
    for &j in &pending {
        at100[j] = prev.map_or(0.0, |(_, v)| v);
    }

    let mut out: Vec<f32> = at100
        .iter()
        .flat_map(|&v| std::iter::repeat_n(v, DECIMATION))
        .collect();
    let edge = out.last().copied().unwrap_or(0.0);
    out.resize(original_len, edge);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prep::Channel;

    fn record_100hz(labels: Vec<i8>) -> Record {
        let n = labels.len();
        let samples: Vec<f32> = (0..n).map(|i| i as f32).collect();
        Record::new(
            "r",
            100.0,
            vec![Channel {
                name: "x".into(),
                samples,
            }],
            labels,
        )
        .unwrap()
    }

    #[test]
    fn counts_at_boundaries() {
        assert_eq!(window_count(2999), 0);
        assert_eq!(window_count(3000), 1);
        assert_eq!(window_count(3499), 1);
        assert_eq!(window_count(3500), 2);
        let ws = extract_windows(&record_100hz(vec![0; 4000]));
        let starts: Vec<usize> = ws.provenance.iter().map(|p| p.start).collect();
        assert_eq!(starts, vec![0, 500, 1000]);
        assert_eq!(ws.data.dims(), [3, 1, 3000]);
        assert_eq!(ws.data.get(2, 0, 0), 1000.0);
        assert!(extract_windows(&record_100hz(vec![0; 2999])).is_empty());
    }

    #[test]
    fn majority_rules() {
        let mut v = vec![0i8; 2000];
        v.extend([1; 1000]);
        assert_eq!(majority_label(&v).unwrap(), Some(0));
        let mut v = vec![0i8; 1500];
        v.extend([1; 1500]);
        assert_eq!(majority_label(&v).unwrap(), Some(1));
        let mut v = vec![-1i8; 1200];
        v.extend([0; 1000]);
        v.extend([1; 800]);
        assert_eq!(majority_label(&v).unwrap(), None);
        // -1 present but not modal.
        let mut v = vec![-1i8; 1000];
        v.extend([1; 1100]);
        v.extend([0; 900]);
        assert_eq!(majority_label(&v).unwrap(), Some(1));
        assert!(majority_label(&[0, 2]).is_err());
        assert!(majority_label(&[]).is_err());
    }

    #[test]
    fn unscored_middle_third_leaves_a_gap() {
        let mut labels = vec![0i8; 9000];
        labels[3000..6000].fill(-1);
        let ws = extract_windows(&record_100hz(labels.clone()));
        let kept: Vec<usize> = ws.provenance.iter().map(|p| p.start).collect();
        let expected: Vec<usize> = (0..window_count(9000))
            .map(|w| w * WINDOW_STEP)
            .filter(|&s| {
                let unscored = labels[s..s + WINDOW_LEN]
                    .iter()
                    .filter(|l| **l == -1)
                    .count();
                2 * unscored <= WINDOW_LEN
            })
            .collect();
        assert_eq!(kept, expected);
        assert!(kept.iter().any(|&s| s < 3000) && kept.iter().any(|&s| s >= 6000));
        assert!(!kept.contains(&3000));
    }

    #[test]
    fn upsample_examples() {
        let out = upsample_predictions(&[0.7], &[0], 6000).unwrap();
        assert_eq!(out, vec![0.7; 6000]);
        let out = upsample_predictions(&[0.2, 0.8], &[0, 500], 7000).unwrap();
        assert_eq!(out.len(), 7000);
        for i in 500..3000 {
            assert!((out[2 * i] - 0.5).abs() < 1e-7);
        }
        assert_eq!(out[0], 0.2);
        assert_eq!(out[2 * 3200], 0.8);
        // Past the last window: nearest covered value.
        assert_eq!(out[6999], 0.8);
        assert_eq!(upsample_predictions(&[], &[], 10).unwrap(), vec![0.0; 10]);
        assert!(upsample_predictions(&[0.5], &[], 6000).is_err());
        assert!(upsample_predictions(&[0.5], &[1], 6000).is_err());
    }

    #[test]
    fn gaps_fill_from_nearest_side() {
        // Windows at 0 and 4000 leave 3000..4000 uncovered.
        let out = upsample_predictions(&[0.1, 0.9], &[0, 4000], 14000).unwrap();
        assert_eq!(out[2 * 3499], 0.1);
        assert_eq!(out[2 * 3500], 0.9);
    }
}
