use std::f64::consts::PI;

use crate::error::{Error, Result};

const TAPS: usize = 63;

/// Linear-phase low-pass FIR with an odd number of symmetric taps.
#[derive(Debug, Clone, PartialEq)]
pub struct FirFilter {
    pub taps: Vec<f64>,
}

impl FirFilter {
    pub fn group_delay(&self) -> usize {
        (self.taps.len() - 1) / 2
    }

    /// Convolves with edge-value replication, output aligned to the input
    /// (the group delay is removed).
    pub fn apply(&self, x: &[f32]) -> Vec<f32> {
        (0..x.len()).map(|i| self.at(x, i)).collect()
    }

    fn at(&self, x: &[f32], i: usize) -> f32 {
        let m = self.group_delay() as isize;
        let last = x.len() as isize - 1;
        let mut acc = 0.0f64;
        for (j, &h) in self.taps.iter().enumerate() {
            let k = (i as isize + j as isize - m).clamp(0, last);
            acc += h * x[k as usize] as f64;
        }
        acc as f32
    }

    /// Magnitude of the frequency response at `f` cycles per sample.
    pub fn response(&self, f: f64) -> f64 {
        let (re, im) = self
            .taps
            .iter()
            .enumerate()
            .fold((0.0, 0.0), |(re, im), (n, h)| {
                let w = 2.0 * PI * f * n as f64;
                (re + h * w.cos(), im - h * w.sin())
            });
        re.hypot(im)
    }
}

/// 63-tap Hamming-windowed sinc with cutoff at the output Nyquist rate,
/// scaled to unit DC gain.
pub fn design_antialias_fir(fs_in: f64, fs_out: f64) -> Result<FirFilter> {
    if !(fs_out > 0.0 && fs_in.is_finite()) {
        return Err(Error::invalid(format!(
            "anti-alias design: rates must be positive (fs_in {fs_in}, fs_out {fs_out})"
        )));
    }
    if fs_out >= fs_in {
        return Err(Error::invalid(format!(
            "anti-alias design: fs_out {fs_out} must be below fs_in {fs_in}"
        )));
    }
    let fc = 0.5 * fs_out / fs_in;
    let m = (TAPS - 1) / 2;
    let mut half = Vec::with_capacity(m + 1);
    for n in 0..=m {
        let t = n as f64 - m as f64;
        let sinc = if t == 0.0 {
            2.0 * fc
        } else {
            (2.0 * PI * fc * t).sin() / (PI * t)
        };
        let window = 0.54 - 0.46 * (2.0 * PI * n as f64 / (TAPS - 1) as f64).cos();
        half.push(sinc * window);
    }
    // Mirror so the taps are bitwise symmetric.
    let mut taps = half.clone();
    taps.extend(half.iter().rev().skip(1));
    let sum: f64 = taps.iter().sum();
    for t in &mut taps {
        *t /= sum;
    }
    Ok(FirFilter { taps })
}

/// Filters then keeps every `factor`-th sample; output length `ceil(len/factor)`.
pub fn decimate(signal: &[f32], filter: &FirFilter, factor: usize) -> Result<Vec<f32>> {
    if factor < 1 {
        return Err(Error::invalid("decimate: factor must be >= 1"));
    }
    if signal.is_empty() {
        return Ok(Vec::new());
    }
    Ok((0..signal.len().div_ceil(factor))
        .map(|k| filter.at(signal, k * factor))
        .collect())
}

/// Keeps every `factor`-th annotation.
pub fn decimate_labels(labels: &[i8], factor: usize) -> Result<Vec<i8>> {
    if factor < 1 {
        return Err(Error::invalid("decimate_labels: factor must be >= 1"));
    }
    Ok(labels.iter().step_by(factor).copied().collect())
}
