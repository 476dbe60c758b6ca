//! Synthetic five-channel recordings with scored arousal events.

use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::nn::RngState;
use crate::prep::{Channel, Record, FS_RECORD};

/// Annotation margins around an event, seconds before onset and after the end.
pub const MARGIN_BEFORE_S: f64 = 2.0;
pub const MARGIN_AFTER_RERA_S: f64 = 10.0;
pub const MARGIN_AFTER_S: f64 = 2.0;

pub const CHANNEL_NAMES: [&str; 5] = ["EEG", "EOG", "EMG", "Airflow", "SaO2"];

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub records: usize,
    pub duration_s: f64,
    /// Events per hour of recording.
    pub event_rate: f64,
    pub event_min_s: f64,
    pub event_max_s: f64,
    /// Burst amplitude relative to the unit-variance background.
    pub snr: f64,
    pub seed: u64,
    /// Share of events flagged as respiratory-effort related.
    pub rera_fraction: f64,
    /// Share of each record in one contiguous non-scored block.
    pub unscored_fraction: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            records: 20,
            duration_s: 3600.0,
            event_rate: 20.0,
            event_min_s: 3.0,
            event_max_s: 15.0,
            snr: 3.0,
            seed: 0,
            rera_fraction: 0.5,
            unscored_fraction: 0.05,
        }
    }
}

impl SynthConfig {
    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::invalid(m));
        if self.duration_s * FS_RECORD < 1.0 || !self.duration_s.is_finite() {
            return bad(format!("duration {} s holds no samples", self.duration_s));
        }
        if !(self.event_rate >= 0.0 && self.event_rate.is_finite()) {
            return bad(format!(
                "event rate {} must be a non-negative number",
                self.event_rate
            ));
        }
        if !(self.event_min_s >= 3.0
            && self.event_max_s >= self.event_min_s
            && self.event_max_s.is_finite())
        {
            return bad(format!(
                "event durations [{}, {}] s must satisfy 3 <= min <= max",
                self.event_min_s, self.event_max_s
            ));
        }
        if !(self.snr >= 0.0 && self.snr.is_finite()) {
            return bad(format!("snr {} must be a non-negative number", self.snr));
        }
        if !(0.0..=1.0).contains(&self.rera_fraction)
            || !(0.0..1.0).contains(&self.unscored_fraction)
        {
            return bad("rera and unscored fractions must lie in [0, 1)".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub start_s: f64,
    pub end_s: f64,
    pub rera: bool,
}

impl Event {
    /// Annotated span `[start − 2 s, end + margin)` in seconds.
    pub fn labeled_span(&self) -> (f64, f64) {
        let after = if self.rera {
            MARGIN_AFTER_RERA_S
        } else {
            MARGIN_AFTER_S
        };
        (self.start_s - MARGIN_BEFORE_S, self.end_s + after)
    }
}

/// Non-overlapping events; labeled spans keep at least a 2 s gap.
fn place_events(cfg: &SynthConfig, rng: &mut RngState) -> Result<Vec<Event>> {
    let n = (cfg.event_rate * cfg.duration_s / 3600.0).round() as usize;
    let mut events: Vec<Event> = Vec::with_capacity(n);
    for k in 0..n {
        let mut placed = false;
        for _ in 0..10_000 {
            let d = rng.uniform_range(cfg.event_min_s, cfg.event_max_s);
            if d > cfg.duration_s {
                break;
            }
            let start = rng.uniform_range(0.0, cfg.duration_s - d);
            let e = Event {
                start_s: start,
                end_s: start + d,
                rera: rng.bernoulli(cfg.rera_fraction),
            };
            let (lo, hi) = e.labeled_span();
            let clear = events.iter().all(|o| {
                let (olo, ohi) = o.labeled_span();
                hi + 2.0 <= olo || ohi + 2.0 <= lo
            });
            if clear {
                events.push(e);
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(Error::invalid(format!(
                "events cannot fit: placed {k} of {n} events of {}-{} s in {} s",
                cfg.event_min_s, cfg.event_max_s, cfg.duration_s
            )));
        }
    }
    events.sort_by(|a, b| a.start_s.total_cmp(&b.start_s));
    Ok(events)
}

/// Per-sample labels at 200 Hz: 1 inside labeled spans (clipped to the
/// record), 0 elsewhere, then `-1` over `unscored` (a sample range).
pub fn event_labels(n: usize, events: &[Event], unscored: Option<(usize, usize)>) -> Vec<i8> {
    let mut labels = vec![0i8; n];
    for e in events {
        let (lo, hi) = e.labeled_span();
        let a = (lo * FS_RECORD).round().max(0.0) as usize;
        let b = ((hi * FS_RECORD).round().max(0.0) as usize).min(n);
        if a < b {
            labels[a..b].fill(1);
        }
    }
    if let Some((a, b)) = unscored {
        labels[a.min(n)..b.min(n)].fill(-1);
    }
    labels
}

/// Smooth 0→1→0 envelope of an event with 0.5 s raised-cosine edges.
fn envelope(t: f64, e: &Event) -> f64 {
    const RAMP: f64 = 0.5;
    if t < e.start_s || t >= e.end_s {
        return 0.0;
    }
    let edge = (t - e.start_s).min(e.end_s - t);
    if edge >= RAMP {
        1.0
    } else {
        0.5 - 0.5 * (std::f64::consts::PI * edge / RAMP).cos()
    }
}

/// One recording with the given events. Background processes and burst
/// phases come from `rng`.
pub fn synth_record(
    id: &str,
    duration_s: f64,
    events: &[Event],
    snr: f64,
    unscored: Option<(usize, usize)>,
    rng: &mut RngState,
) -> Result<Record> {
    let n = (duration_s * FS_RECORD).round() as usize;
    if n == 0 {
        return Err(Error::invalid(format!(
            "duration {duration_s} s holds no samples"
        )));
    }
    let labels = event_labels(n, events, unscored);
    let bursts: Vec<(f64, f64)> = events
        .iter()
        .map(|_| (rng.uniform_range(8.0, 12.0), rng.uniform_range(0.0, TAU)))
        .collect();
    let breath_hz = rng.uniform_range(0.2, 0.3);
    let mut ch: Vec<Vec<f32>> = (0..5).map(|_| Vec::with_capacity(n)).collect();
    // 1/f-like EEG background: three first-order processes at spread time scales.
    let coeffs = [0.5f64, 0.9, 0.99];
    let mut ar = [0.0f64; 3];
    let mut eog = 0.0f64;
    let mut sat = 0.0f64;
    let mut next = 0usize;
    for i in 0..n {
        let t = i as f64 / FS_RECORD;
        while next < events.len() && events[next].end_s <= t {
            next += 1;
        }
        // Events do not overlap, so at most the current one is active.
        let (env, k) = match events.get(next) {
            Some(e) => (envelope(t, e), next),
            None => (0.0, 0),
        };
        let mut eeg = 0.0;
        for (a, c) in ar.iter_mut().zip(coeffs) {
            *a = c * *a + (1.0 - c * c).sqrt() * rng.normal();
            eeg += *a / 3f64.sqrt();
        }
        if env > 0.0 {
            let (f, ph) = bursts[k];
            eeg += snr * env * (TAU * f * t + ph).sin();
        }
        eog = 0.998 * eog + (1.0 - 0.998f64 * 0.998).sqrt() * rng.normal();
        let emg = rng.normal() * (1.0 + snr * env);
        let rera = env > 0.0 && events[k].rera;
        let depth = if rera {
            1.0 - (0.25 * snr).min(0.8) * env
        } else {
            1.0 + 0.25 * snr * env
        };
        let flow = depth * (TAU * breath_hz * t).sin() + 0.1 * rng.normal();
        sat = 0.9995 * sat + 0.0316 * rng.normal();
        let spo2 = 96.0 + 0.3 * sat - 1.0 * snr.min(3.0) * env;
        for (c, v) in ch.iter_mut().zip([eeg, eog, emg, flow, spo2]) {
            c.push(v as f32);
        }
    }
    let channels = ch
        .into_iter()
        .zip(CHANNEL_NAMES)
        .map(|(samples, name)| Channel {
            name: name.into(),
            samples,
        })
        .collect();
    Record::new(id, FS_RECORD, channels, labels)
}

/// Records `synth000`, `synth001`, … each from its own derived stream.
pub fn synth_dataset(cfg: &SynthConfig) -> Result<Vec<Record>> {
    cfg.validate()?;
    let mut root = RngState::new(cfg.seed);
    (0..cfg.records)
        .map(|r| {
            let mut rng = root.fork(r as u64);
            let events = place_events(cfg, &mut rng)?;
            let n = (cfg.duration_s * FS_RECORD).round() as usize;
            let block = (cfg.unscored_fraction * n as f64).round() as usize;
            let unscored = (block > 0).then(|| {
                let a = rng.below(n - block + 1);
                (a, a + block)
            });
            synth_record(
                &format!("synth{r:03}"),
                cfg.duration_s,
                &events,
                cfg.snr,
                unscored,
                &mut rng,
            )
        })
        .collect()
}
