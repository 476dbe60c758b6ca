use arousalnet::nn::RngState;
use arousalnet::prep::{
    self, extract_windows, majority_label, normalize_minmax, upsample_predictions, window_count,
    Channel, Record, WINDOW_LEN, WINDOW_STEP,
};
use proptest::prelude::*;

/// Counts windows by literally sliding one.
fn count_by_sliding(len: usize) -> usize {
    let mut n = 0;
    let mut start = 0;
    while start + WINDOW_LEN <= len {
        n += 1;
        start += WINDOW_STEP;
    }
    n
}

#[test]
fn window_count_exhaustive_sweep() {
    for len in 0..=10_000 {
        assert_eq!(window_count(len), count_by_sliding(len), "L100 = {len}");
    }
}

fn counting_oracle(v: &[i8]) -> Option<u8> {
    let c = |x: i8| v.iter().filter(|&&l| l == x).count();
    let (u, z, o) = (c(-1), c(0), c(1));
    if u > z && u > o {
        None
    } else if o >= z {
        Some(1)
    } else {
        Some(0)
    }
}

#[test]
fn majority_matches_counting_oracle() {
    let mut rng = RngState::new(2024);
    for trial in 0..10_000 {
        // Skewed class weights so every branch, including near-ties, occurs.
        let w = [rng.uniform(), rng.uniform(), rng.uniform()];
        let total: f64 = w.iter().sum();
        let v: Vec<i8> = (0..WINDOW_LEN)
            .map(|_| {
                let u = rng.uniform() * total;
                if u < w[0] {
                    -1
                } else if u < w[0] + w[1] {
                    0
                } else {
                    1
                }
            })
            .collect();
        assert_eq!(
            majority_label(&v).unwrap(),
            counting_oracle(&v),
            "trial {trial}"
        );
    }
}

fn cover_oracle(probs: &[f32], starts: &[usize], original_len: usize) -> Vec<f32> {
    let len = original_len.div_ceil(2);
    let mut at100: Vec<Option<f32>> = vec![None; len];
    for (i, slot) in at100.iter_mut().enumerate() {
        let covering: Vec<f64> = probs
            .iter()
            .zip(starts)
            .filter(|(_, &s)| s <= i && i < s + WINDOW_LEN)
            .map(|(&p, _)| p as f64)
            .collect();
        if !covering.is_empty() {
            *slot = Some((covering.iter().sum::<f64>() / covering.len() as f64) as f32);
        }
    }
    let filled: Vec<f32> = (0..len)
        .map(|i| {
            if let Some(v) = at100[i] {
                return v;
            }
            // Nearest covered sample, earlier one on a tie.
            (1..len)
                .find_map(|d| {
                    let left = i.checked_sub(d).and_then(|j| at100[j]);
                    let right = at100.get(i + d).copied().flatten();
                    left.or(right)
                })
                .unwrap_or(0.0)
        })
        .collect();
    (0..original_len)
        .map(|k| filled[(k / 2).min(len - 1)])
        .collect()
}

#[test]
fn upsampling_matches_cover_oracle() {
    let mut rng = RngState::new(11);
    for trial in 0..40 {
        let len100 = 3000 + rng.below(7000);
        let original = 2 * len100 - rng.below(2);
        let slots = window_count(len100);
        let mut starts: Vec<usize> = (0..slots)
            .filter(|_| rng.bernoulli(0.6))
            .map(|w| w * WINDOW_STEP)
            .collect();
        if trial % 5 == 0 {
            starts.clear();
        }
        let probs: Vec<f32> = starts.iter().map(|_| rng.uniform() as f32).collect();
        let got = upsample_predictions(&probs, &starts, original).unwrap();
        let want = cover_oracle(&probs, &starts, original);
        assert_eq!(got, want, "trial {trial}");
    }
}

fn random_record(rng: &mut RngState, n: usize) -> Record {
    let channels = (0..5)
        .map(|c| Channel {
            name: format!("ch{c}"),
            samples: (0..n)
                .map(|_| rng.normal() as f32 * (c + 1) as f32)
                .collect(),
        })
        .collect();
    let labels = (0..n).map(|i| ((i / 4000) % 3) as i8 - 1).collect();
    Record::new("rand", 200.0, channels, labels).unwrap()
}

#[test]
fn pipeline_is_bitwise_deterministic() {
    let mut rng = RngState::new(5);
    let rec = random_record(&mut rng, 20_000);
    let a = prep::prepare_record(&rec).unwrap();
    let b = prep::prepare_record(&rec.clone()).unwrap();
    let bits = |w: &prep::WindowSet| {
        w.data
            .data()
            .iter()
            .map(|v| v.to_bits())
            .collect::<Vec<_>>()
    };
    assert_eq!(bits(&a), bits(&b));
    assert_eq!(a.labels, b.labels);
    assert_eq!(a.provenance, b.provenance);
    assert!(!a.is_empty());
}

#[test]
fn random_vector_normalizes_to_unit_range() {
    let mut rng = RngState::new(8);
    let v: Vec<f32> = (0..100)
        .map(|_| (rng.normal() * 40.0 + 7.0) as f32)
        .collect();
    let out = normalize_minmax(&v).unwrap();
    let lo = out.iter().cloned().fold(f32::INFINITY, f32::min);
    let hi = out.iter().cloned().fold(f32::NEG_INFINITY, f32::max);
    assert_eq!((lo, hi), (0.0, 1.0));
    let imin = v
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .unwrap()
        .0;
    let imax = v
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .unwrap()
        .0;
    assert_eq!(out[imin], 0.0);
    assert_eq!(out[imax], 1.0);
}

#[test]
fn extracted_windows_carry_oracle_labels() {
    let mut rng = RngState::new(9);
    let n = 9000;
    let mut labels = vec![0i8; n];
    // Random label runs, including unscored stretches.
    let mut i = 0;
    while i < n {
        let run = 200 + rng.below(2500);
        let l = rng.below(3) as i8 - 1;
        labels[i..(i + run).min(n)].fill(l);
        i += run;
    }
    let rec = Record::new(
        "r",
        100.0,
        vec![Channel {
            name: "x".into(),
            samples: vec![0.0; n],
        }],
        labels.clone(),
    )
    .unwrap();
    let ws = extract_windows(&rec);
    let expected: Vec<(usize, u8)> = (0..window_count(n))
        .filter_map(|w| {
            let s = w * WINDOW_STEP;
            counting_oracle(&labels[s..s + WINDOW_LEN]).map(|l| (s, l))
        })
        .collect();
    let got: Vec<(usize, u8)> = ws
        .provenance
        .iter()
        .map(|p| p.start)
        .zip(ws.labels.iter().copied())
        .collect();
    assert_eq!(got, expected);
}

proptest! {
    #[test]
    fn minmax_range_is_exact(v in prop::collection::vec(-1e6f32..1e6f32, 1..200)) {
        let out = normalize_minmax(&v).unwrap();
        let lo = v.iter().cloned().fold(f32::INFINITY, f32::min);
        let hi = v.iter().cloned().fold(f32::NEG_INFINITY, f32::max);
        if lo == hi {
            prop_assert!(out.iter().all(|x| *x == 0.0));
        } else {
            prop_assert_eq!(out.iter().cloned().fold(f32::INFINITY, f32::min), 0.0);
            prop_assert_eq!(out.iter().cloned().fold(f32::NEG_INFINITY, f32::max), 1.0);
        }
    }

    #[test]
    fn upsampled_length_and_range(
        len100 in 0usize..9000,
        odd in any::<bool>(),
        keep in prop::collection::vec(any::<bool>(), 13),
        seed in any::<u64>(),
    ) {
        let original = (2 * len100).saturating_sub(odd as usize);
        let mut rng = RngState::new(seed);
        let starts: Vec<usize> = (0..window_count(original.div_ceil(2)))
            .filter(|&w| keep[w])
            .map(|w| w * WINDOW_STEP)
            .collect();
        let probs: Vec<f32> = starts.iter().map(|_| rng.uniform() as f32).collect();
        let out = upsample_predictions(&probs, &starts, original).unwrap();
        prop_assert_eq!(out.len(), original);
        if !probs.is_empty() {
            let lo = probs.iter().cloned().fold(f32::INFINITY, f32::min);
            let hi = probs.iter().cloned().fold(f32::NEG_INFINITY, f32::max);
            prop_assert!(out.iter().all(|p| *p >= lo && *p <= hi));
        }
    }

    #[test]
    fn window_count_matches_slide(len in 0usize..200_000) {
        prop_assert_eq!(window_count(len), count_by_sliding(len));
    }
}
