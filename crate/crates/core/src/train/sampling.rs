use crate::error::{Error, Result};
use crate::nn::RngState;
use crate::prep::WindowSet;

/// Class-balanced index batches for one epoch.
///
/// Non-arousal indices are drawn without replacement, so the epoch holds
/// `floor(n_neg / (batch_size/2))` batches. Arousal indices cycle through
/// reshuffled passes whenever they run out. Each batch is shuffled so any
/// slice of it is mixed too.
pub fn stratified_batches(
    labels: &[u8],
    batch_size: usize,
    rng: &mut RngState,
) -> Result<Vec<Vec<usize>>> {
    if batch_size < 2 || !batch_size.is_multiple_of(2) {
        return Err(Error::invalid(format!(
            "batch size must be even and at least 2, got {batch_size}"
        )));
    }
    let half = batch_size / 2;
    let mut pos: Vec<usize> = labels
        .iter()
        .enumerate()
        .filter(|(_, &l)| l == 1)
        .map(|(i, _)| i)
        .collect();
    let mut neg: Vec<usize> = labels
        .iter()
        .enumerate()
        .filter(|(_, &l)| l == 0)
        .map(|(i, _)| i)
        .collect();
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::EmptyClass(format!(
            "stratified batches need both classes: {} arousal, {} non-arousal windows",
            pos.len(),
            neg.len()
        )));
    }
    if neg.len() < half {
        return Err(Error::invalid(format!(
            "{} non-arousal windows cannot fill half of a {batch_size}-window batch",
            neg.len()
        )));
    }
    rng.shuffle(&mut neg);
    rng.shuffle(&mut pos);
    let n_batches = neg.len() / half;
    let mut cursor = 0;
    let mut batches = Vec::with_capacity(n_batches);
    for chunk in neg.chunks_exact(half) {
        let mut batch = Vec::with_capacity(batch_size);
        for _ in 0..half {
            if cursor == pos.len() {
                rng.shuffle(&mut pos);
                cursor = 0;
            }
            batch.push(pos[cursor]);
            cursor += 1;
        }
        batch.extend_from_slice(chunk);
        rng.shuffle(&mut batch);
        batches.push(batch);
    }
    Ok(batches)
}

/// Random `(train, validation)` split with `round(frac·N)` validation windows.
pub fn split_validation(
    windows: &WindowSet,
    frac: f64,
    rng: &mut RngState,
) -> Result<(WindowSet, WindowSet)> {
    let (train, val) = split_indices(windows.len(), frac, rng)?;
    Ok((windows.subset(&train), windows.subset(&val)))
}

/// Index form of [`split_validation`]; both sides ascending.
pub fn split_indices(n: usize, frac: f64, rng: &mut RngState) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(frac > 0.0 && frac < 1.0) {
        return Err(Error::invalid(format!(
            "validation fraction must lie in (0, 1), got {frac}"
        )));
    }
    if n < 2 {
        return Err(Error::invalid(format!(
            "cannot split {n} windows into training and validation"
        )));
    }
    let n_val = (frac * n as f64).round() as usize;
    if n_val == 0 || n_val == n {
        return Err(Error::invalid(format!(
            "validation fraction {frac} of {n} windows leaves one side empty"
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut idx);
    let mut val = idx[..n_val].to_vec();
    let mut train = idx[n_val..].to_vec();
    val.sort_unstable();
    train.sort_unstable();
    Ok((train, val))
}

/// Record-level partition for k-fold cross-validation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPlan {
    pub folds: Vec<Vec<String>>,
}

impl FoldPlan {
    pub fn k(&self) -> usize {
        self.folds.len()
    }

    /// `(training ids, test ids)` for fold `i`.
    pub fn fold(&self, i: usize) -> Result<(Vec<String>, Vec<String>)> {
        let test = self
            .folds
            .get(i)
            .ok_or_else(|| Error::invalid(format!("fold {i} out of range for k = {}", self.k())))?
            .clone();
        let train = self
            .folds
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .flat_map(|(_, f)| f.iter().cloned())
            .collect();
        Ok((train, test))
    }
}

/// Shuffles record ids and deals them into `k` folds; the first
/// `n mod k` folds get one extra record.
pub fn kfold_split(record_ids: &[String], k: usize, rng: &mut RngState) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::invalid(format!(
            "k-fold split needs k >= 2, got {k}"
        )));
    }
    if record_ids.len() < k {
        return Err(Error::invalid(format!(
            "{} records cannot fill {k} folds",
            record_ids.len()
        )));
    }
    let mut ids = record_ids.to_vec();
    ids.sort();
    ids.dedup();
    if ids.len() != record_ids.len() {
        return Err(Error::invalid("record ids must be unique"));
    }
    rng.shuffle(&mut ids);
    let (base, extra) = (ids.len() / k, ids.len() % k);
    let mut folds = Vec::with_capacity(k);
    let mut rest = ids.as_slice();
    for i in 0..k {
        let (f, r) = rest.split_at(base + usize::from(i < extra));
        folds.push(f.to_vec());
        rest = r;
    }
    Ok(FoldPlan { folds })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn imbalanced_epoch_has_three_balanced_batches() {
        let mut labels = vec![0u8; 1000];
        labels.extend(vec![1u8; 100]);
        let batches = stratified_batches(&labels, 512, &mut RngState::new(1)).unwrap();
        assert_eq!(batches.len(), 3);
        let mut negs = HashSet::new();
        for b in &batches {
            assert_eq!(b.len(), 512);
            assert_eq!(b.iter().filter(|&&i| labels[i] == 1).count(), 256);
            for &i in b.iter().filter(|&&i| labels[i] == 0) {
                assert!(negs.insert(i), "non-arousal index {i} drawn twice");
            }
        }
        assert_eq!(negs.len(), 768);
    }

    #[test]
    fn one_class_is_rejected() {
        assert!(matches!(
            stratified_batches(&[0, 0, 0, 0], 2, &mut RngState::new(0)),
            Err(Error::EmptyClass(_))
        ));
        assert!(stratified_batches(&[0, 1, 0], 3, &mut RngState::new(0)).is_err());
    }

    #[test]
    fn split_rounds_validation_size() {
        let (tr, va) = split_indices(10, 0.3, &mut RngState::new(4)).unwrap();
        assert_eq!((tr.len(), va.len()), (7, 3));
        assert!(split_indices(1, 0.3, &mut RngState::new(4)).is_err());
        assert!(split_indices(10, 1.0, &mut RngState::new(4)).is_err());
    }

    #[test]
    fn folds_take_the_remainder_first() {
        let ids: Vec<String> = (0..10).map(|i| format!("r{i}")).collect();
        let plan = kfold_split(&ids, 3, &mut RngState::new(0)).unwrap();
        let sizes: Vec<usize> = plan.folds.iter().map(Vec::len).collect();
        assert_eq!(sizes, vec![4, 3, 3]);
        let (train, test) = plan.fold(1).unwrap();
        assert_eq!(train.len() + test.len(), 10);
        assert!(kfold_split(&ids, 1, &mut RngState::new(0)).is_err());
        assert!(kfold_split(&ids[..2], 3, &mut RngState::new(0)).is_err());
    }
}
