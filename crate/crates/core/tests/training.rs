use arousalnet::models::{ModelConfig, ModelGraph, ModelKind};
use arousalnet::nn::{Activation, GraphBuilder, Padding, RngState, Tensor3};
use arousalnet::prep::{Provenance, WindowSet};
use arousalnet::train::{
    self, adam_update, kfold_split, mean_loss, split_indices, split_validation, stratified_batches,
    AdamConfig, TrainConfig,
};
use proptest::prelude::*;

const LEN: usize = 16;

/// conv → relu → max-pool → dense(2) → softmax over 1 × 16 inputs.
fn toy_model(seed: u64) -> ModelGraph<f64> {
    let mut rng = RngState::new(seed);
    let mut b = GraphBuilder::<f64>::new(1, LEN, &mut rng);
    let c = b.conv("conv", 0, 4, 3, Padding::Same, 1);
    let r = b.relu("relu", c);
    let p = b.max_pool("pool", r, 4);
    let f = b.flatten("flatten", p);
    let d = b.dense("logits", f, 2, Activation::None);
    b.softmax("softmax", d);
    ModelGraph {
        kind: ModelKind::M1Residual,
        config: ModelConfig {
            in_channels: 1,
            input_len: LEN,
        },
        graph: b.finish(),
    }
}

/// Noise windows; positives carry a bump in the middle.
fn toy_windows(n: usize, positive_share: f64, seed: u64) -> WindowSet {
    let mut rng = RngState::new(seed);
    let labels: Vec<u8> = (0..n)
        .map(|_| u8::from(rng.bernoulli(positive_share)))
        .collect();
    let data = Tensor3::from_fn([n, 1, LEN], |b, _, l| {
        let bump = if labels[b] == 1 && (6..10).contains(&l) {
            1.0
        } else {
            0.0
        };
        (bump + 0.3 * rng.normal()) as f32
    });
    let provenance = (0..n)
        .map(|i| Provenance {
            record_id: format!("toy{:02}", i % 7),
            start: i,
        })
        .collect();
    WindowSet::new(data, labels, provenance).unwrap()
}

fn small_config(seed: u64) -> TrainConfig {
    TrainConfig {
        batch_size: 16,
        max_epochs: 6,
        learning_rate: 1e-2,
        patience: 3,
        micro_batch: 8,
        seed,
        ..TrainConfig::default()
    }
}

#[test]
fn adam_matches_scalar_recurrence() {
    let cfg = AdamConfig::default();
    let (lr, mut theta, mut m, mut v) = (0.01, [1.5f64], [0.0f64], [0.0f64]);
    let (mut rt, mut rm, mut rv) = (1.5f64, 0.0f64, 0.0f64);
    for t in 1..=100u64 {
        // Gradient of (θ − 0.3)² plus a deterministic wobble.
        let g = 2.0 * (theta[0] - 0.3) + 0.1 * (t as f64).sin();
        adam_update(&mut theta, &[g], &mut m, &mut v, t, lr, &cfg);
        let rg = 2.0 * (rt - 0.3) + 0.1 * (t as f64).sin();
        rm = 0.9 * rm + 0.1 * rg;
        rv = 0.999 * rv + 0.001 * rg * rg;
        let mh = rm / (1.0 - 0.9f64.powi(t as i32));
        let vh = rv / (1.0 - 0.999f64.powi(t as i32));
        rt -= lr * mh / (vh.sqrt() + 1e-8);
        assert!(
            (theta[0] - rt).abs() < 1e-12,
            "step {t}: {} vs {rt}",
            theta[0]
        );
    }
}

#[test]
fn batches_are_half_arousal_and_reproducible() {
    let mut rng = RngState::new(3);
    for trial in 0..50 {
        let n = 40 + rng.below(400);
        let labels: Vec<u8> = (0..n).map(|_| u8::from(rng.bernoulli(0.15))).collect();
        let n_pos = labels.iter().filter(|&&l| l == 1).count();
        let n_neg = n - n_pos;
        let batch = 2 * (1 + rng.below(8));
        if n_pos == 0 || n_neg < batch / 2 {
            continue;
        }
        let a = stratified_batches(&labels, batch, &mut RngState::new(trial)).unwrap();
        let b = stratified_batches(&labels, batch, &mut RngState::new(trial)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), n_neg / (batch / 2));
        let mut seen_neg = std::collections::HashSet::new();
        for bt in &a {
            assert_eq!(bt.len(), batch);
            let pos = bt.iter().filter(|&&i| labels[i] == 1).count();
            assert_eq!(pos * 2, batch);
            for &i in bt.iter().filter(|&&i| labels[i] == 0) {
                assert!(seen_neg.insert(i), "negative {i} drawn twice");
            }
        }
    }
}

#[test]
fn validation_split_sizes_and_disjointness() {
    let mut rng = RngState::new(9);
    for _ in 0..1000 {
        let n = 2 + rng.below(500);
        let frac = rng.uniform_range(0.05, 0.95);
        let n_val = (frac * n as f64).round() as usize;
        let res = split_indices(n, frac, &mut rng);
        if n_val == 0 || n_val == n {
            assert!(res.is_err());
            continue;
        }
        let (train, val) = res.unwrap();
        assert_eq!(val.len(), n_val);
        let mut all: Vec<usize> = train.iter().chain(&val).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..n).collect::<Vec<_>>());
    }
}

#[test]
fn kfold_partitions_records() {
    let ids: Vec<String> = (0..23).map(|i| format!("r{i:02}")).collect();
    for seed in 0..100 {
        let plan = kfold_split(&ids, 5, &mut RngState::new(seed)).unwrap();
        let mut sizes: Vec<usize> = plan.folds.iter().map(Vec::len).collect();
        sizes.sort_unstable();
        assert_eq!(sizes, vec![4, 4, 5, 5, 5]);
        for i in 0..5 {
            let (train, test) = plan.fold(i).unwrap();
            assert_eq!(train.len() + test.len(), 23);
            assert!(test.iter().all(|t| !train.contains(t)));
        }
        let mut all: Vec<String> = plan.folds.concat();
        all.sort();
        assert_eq!(all, ids);
    }
    let dup = vec!["a".to_string(), "a".to_string(), "b".to_string()];
    assert!(kfold_split(&dup, 2, &mut RngState::new(0)).is_err());
}

#[test]
fn first_epoch_lowers_validation_loss() {
    // Balanced, so the stratified batches do not shift the class prior
    // away from what the validation split sees.
    let windows = toy_windows(160, 0.5, 11);
    for seed in 0..10 {
        let mut model = toy_model(seed);
        let cfg = TrainConfig {
            max_epochs: 1,
            ..small_config(seed)
        };
        let (_, val) =
            split_validation(&windows, cfg.val_fraction, &mut RngState::new(seed).fork(1)).unwrap();
        let logits = model.logits_node();
        let before = mean_loss(&mut model, logits, &val, 8).unwrap();
        let out = train::train(&mut model, &windows, &cfg).unwrap();
        let after = out.history[0].val_loss;
        assert!(after < before, "seed {seed}: {before} -> {after}");
    }
}

#[test]
fn training_is_deterministic() {
    let windows = toy_windows(120, 0.4, 5);
    let run = || {
        let mut model = toy_model(2);
        let out = train::train(&mut model, &windows, &small_config(7)).unwrap();
        let params: Vec<Vec<f64>> = model.graph.params().map(|p| p.value.clone()).collect();
        let losses: Vec<(f64, f64)> = out
            .history
            .iter()
            .map(|e| (e.train_loss, e.val_loss))
            .collect();
        (params, losses)
    };
    assert_eq!(run(), run());
}

#[test]
fn returned_parameters_have_the_lowest_validation_loss() {
    let windows = toy_windows(160, 0.3, 21);
    for seed in 0..4 {
        let mut model = toy_model(seed);
        let cfg = TrainConfig {
            max_epochs: 10,
            learning_rate: 5e-2,
            patience: 10,
            ..small_config(seed)
        };
        let out = train::train(&mut model, &windows, &cfg).unwrap();
        let min = out
            .history
            .iter()
            .map(|e| e.val_loss)
            .fold(f64::INFINITY, f64::min);
        assert_eq!(out.best_val_loss, min);
        assert_eq!(out.history[out.best_epoch - 1].val_loss, min);
        let (_, val) =
            split_validation(&windows, cfg.val_fraction, &mut RngState::new(seed).fork(1)).unwrap();
        let logits = model.logits_node();
        let now = mean_loss(&mut model, logits, &val, cfg.micro_batch).unwrap();
        assert_eq!(now, min, "seed {seed}");
    }
}

#[test]
fn one_class_data_is_rejected() {
    let mut windows = toy_windows(40, 0.5, 1);
    windows.labels.fill(0);
    let err = train::train(&mut toy_model(0), &windows, &small_config(0)).unwrap_err();
    assert!(err.to_string().contains("both classes"), "{err}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn stratified_batches_cover_negatives_once(n_neg in 4usize..200, n_pos in 1usize..50, half in 1usize..4, seed: u64) {
        let mut labels = vec![0u8; n_neg];
        labels.extend(std::iter::repeat_n(1u8, n_pos));
        let batches = stratified_batches(&labels, 2 * half, &mut RngState::new(seed)).unwrap();
        let negs: usize = batches.iter().map(|b| b.iter().filter(|&&i| labels[i] == 0).count()).sum();
        prop_assert_eq!(negs, (n_neg / half) * half);
        for b in &batches {
            prop_assert_eq!(b.iter().filter(|&&i| labels[i] == 1).count(), half);
        }
    }
}
