//! Training procedure: balanced mini-batches, Adam, a held-out validation
//! split and early stopping that restores the best epoch.

mod adam;
mod sampling;

use std::fmt::Write as _;
use std::time::Instant;

pub use adam::{adam_step, adam_update, AdamConfig, AdamState};
pub use sampling::{kfold_split, split_indices, split_validation, stratified_batches, FoldPlan};

use crate::error::{Error, Result};
use crate::models::ModelGraph;
use crate::nn::{ops, Graph, Mode, RngState, Scalar, Tensor3};
use crate::prep::WindowSet;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub max_epochs: usize,
    pub learning_rate: f64,
    pub patience: usize,
    pub val_fraction: f64,
    pub adam: AdamConfig,
    pub seed: u64,
    /// Windows per forward/backward pass. Gradients of the slices of one
    /// batch are summed before the single optimizer step, so batch-norm
    /// statistics are per slice.
    pub micro_batch: usize,
    /// Stop as soon as eval-mode accuracy on the training split reaches
    /// this value. Off by default.
    pub stop_at_train_accuracy: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 512,
            max_epochs: 20,
            learning_rate: 1e-3,
            patience: 6,
            val_fraction: 0.30,
            adam: AdamConfig::default(),
            seed: 0,
            micro_batch: 32,
            stop_at_train_accuracy: None,
        }
    }
}

/// Patience counter over validation losses.
#[derive(Debug, Clone, PartialEq)]
pub struct EarlyStopping {
    pub patience: usize,
    pub best_val_loss: f64,
    /// 1-based epoch of `best_val_loss`, 0 before any epoch.
    pub best_epoch: usize,
    pub epochs_since_improvement: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping {
            patience,
            best_val_loss: f64::INFINITY,
            best_epoch: 0,
            epochs_since_improvement: 0,
        }
    }

    /// Records one epoch. Returns `(improved, stop)`; training stops once
    /// `patience` epochs in a row failed to improve on the best loss.
    pub fn observe(&mut self, epoch: usize, val_loss: f64) -> (bool, bool) {
        let improved = val_loss < self.best_val_loss;
        if improved {
            self.best_val_loss = val_loss;
            self.best_epoch = epoch;
            self.epochs_since_improvement = 0;
        } else {
            self.epochs_since_improvement += 1;
        }
        (improved, self.epochs_since_improvement >= self.patience)
    }
}

/// Copy of every parameter and running statistic.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot<T> {
    params: Vec<Vec<T>>,
    buffers: Vec<Vec<T>>,
}

impl<T: Scalar> Snapshot<T> {
    pub fn take(graph: &Graph<T>) -> Self {
        Snapshot {
            params: graph.params().map(|p| p.value.clone()).collect(),
            buffers: graph.buffers().map(|b| b.value.clone()).collect(),
        }
    }

    pub fn restore(&self, graph: &mut Graph<T>) {
        for (p, v) in graph.params_mut().zip(&self.params) {
            p.value.copy_from_slice(v);
        }
        for (b, v) in graph.buffers_mut().zip(&self.buffers) {
            b.value.copy_from_slice(v);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub elapsed_seconds: f64,
    /// Eval-mode accuracy on the training split, when requested.
    pub train_accuracy: Option<f64>,
}

/// Optimizer, patience counter, best parameters and per-epoch history.
#[derive(Debug, Clone)]
pub struct TrainState<T> {
    pub adam: AdamState<T>,
    pub stopping: EarlyStopping,
    pub best_snapshot: Snapshot<T>,
    pub history: Vec<EpochRecord>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub stopped_early: bool,
    /// Set when training diverged; the model holds the best earlier snapshot.
    pub aborted: Option<String>,
}

/// History as text: a header, then `epoch train_loss val_loss elapsed_seconds`.
pub fn history_text(history: &[EpochRecord]) -> String {
    let mut s = String::from("# epoch train_loss val_loss elapsed_seconds\n");
    for r in history {
        let _ = writeln!(
            s,
            "{} {:.6} {:.6} {:.3}",
            r.epoch, r.train_loss, r.val_loss, r.elapsed_seconds
        );
    }
    s
}

/// Trains `model` in place. On return it holds the parameters of the epoch
/// with the lowest validation loss.
pub fn train<T: Scalar>(
    model: &mut ModelGraph<T>,
    windows: &WindowSet,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    if windows.is_empty() {
        return Err(Error::invalid("no training windows"));
    }
    if windows.positives() == 0 || windows.positives() == windows.len() {
        return Err(Error::EmptyClass(format!(
            "training needs both classes: {} of {} windows are arousal",
            windows.positives(),
            windows.len()
        )));
    }
    if config.micro_batch == 0 {
        return Err(Error::invalid("micro-batch size must be positive"));
    }
    let mut rng = RngState::new(config.seed);
    let mut split_rng = rng.fork(1);
    let mut batch_rng = rng.fork(2);
    let (train_set, val_set) = split_validation(windows, config.val_fraction, &mut split_rng)?;
    // Fail on an impossible batch layout before the first epoch.
    stratified_batches(&train_set.labels, config.batch_size, &mut batch_rng.clone())?;

    let logits = model.logits_node();
    let mut state = TrainState {
        adam: AdamState::for_graph(&model.graph),
        stopping: EarlyStopping::new(config.patience),
        best_snapshot: Snapshot::take(&model.graph),
        history: Vec::new(),
    };
    let start = Instant::now();
    let mut aborted = None;
    let mut stopped_early = false;

    for epoch in 1..=config.max_epochs {
        let batches = stratified_batches(&train_set.labels, config.batch_size, &mut batch_rng)?;
        let mut loss_sum = 0.0;
        let mut diverged = None;
        for batch in &batches {
            match train_batch(model, logits, &train_set, batch, config, &mut state.adam) {
                Ok(loss) => loss_sum += loss,
                Err(e @ Error::NonFinite { .. }) => {
                    diverged = Some(e.to_string());
                    break;
                }
                Err(e) => return Err(e),
            }
        }
        if let Some(msg) = diverged {
            aborted = Some(format!("training diverged in epoch {epoch}: {msg}"));
            break;
        }
        let train_loss = loss_sum / batches.len() as f64;
        let val_loss = match mean_loss(model, logits, &val_set, config.micro_batch) {
            Ok(l) if l.is_finite() => l,
            Ok(l) => {
                aborted = Some(format!("validation loss {l} in epoch {epoch}"));
                break;
            }
            Err(e @ Error::NonFinite { .. }) => {
                aborted = Some(format!("validation diverged in epoch {epoch}: {e}"));
                break;
            }
            Err(e) => return Err(e),
        };
        let train_accuracy = match config.stop_at_train_accuracy {
            Some(_) => Some(accuracy(model, &train_set, config.micro_batch)?),
            None => None,
        };
        state.history.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
            elapsed_seconds: start.elapsed().as_secs_f64(),
            train_accuracy,
        });
        let (improved, stop) = state.stopping.observe(epoch, val_loss);
        if improved {
            state.best_snapshot = Snapshot::take(&model.graph);
        }
        if stop {
            stopped_early = true;
            break;
        }
        if let (Some(target), Some(acc)) = (config.stop_at_train_accuracy, train_accuracy) {
            if acc >= target {
                break;
            }
        }
    }
    state.best_snapshot.restore(&mut model.graph);
    Ok(TrainOutcome {
        history: state.history,
        best_epoch: state.stopping.best_epoch,
        best_val_loss: state.stopping.best_val_loss,
        stopped_early,
        aborted,
    })
}

/// One optimizer step on `batch`, accumulated over micro-batches. Returns
/// the batch's mean cross-entropy.
fn train_batch<T: Scalar>(
    model: &mut ModelGraph<T>,
    logits: usize,
    set: &WindowSet,
    batch: &[usize],
    config: &TrainConfig,
    adam: &mut AdamState<T>,
) -> Result<f64> {
    model.graph.zero_grads();
    let mut loss = 0.0;
    for part in batch.chunks(config.micro_batch) {
        let x: Tensor3<T> = set.data.gather(part).cast();
        let labels: Vec<u8> = part.iter().map(|&i| set.labels[i]).collect();
        let tape = model.graph.forward_until(&x, Mode::Train, logits)?;
        let ce = ops::softmax_cross_entropy_scaled(tape.output(), &labels, batch.len())?;
        if !ce.loss.is_finite() {
            return Err(Error::NonFinite {
                context: "training loss".into(),
            });
        }
        loss += ce.loss;
        model.graph.backward(tape, logits, ce.dlogits, false)?;
    }
    adam_step(&mut model.graph, adam, config.learning_rate, &config.adam)?;
    Ok(loss)
}

/// Eval-mode mean cross-entropy over every window of `set`.
pub fn mean_loss<T: Scalar>(
    model: &mut ModelGraph<T>,
    logits: usize,
    set: &WindowSet,
    chunk: usize,
) -> Result<f64> {
    let rows: Vec<usize> = (0..set.len()).collect();
    let mut total = 0.0;
    for part in rows.chunks(chunk.max(1)) {
        let x: Tensor3<T> = set.data.gather(part).cast();
        let labels: Vec<u8> = part.iter().map(|&i| set.labels[i]).collect();
        let tape = model.graph.forward_until(&x, Mode::Eval, logits)?;
        total += ops::softmax_cross_entropy_scaled(tape.output(), &labels, set.len())?.loss;
    }
    Ok(total)
}

/// Eval-mode fraction of windows whose arousal probability falls on the
/// side of 0.5 given by the label.
pub fn accuracy<T: Scalar>(
    model: &mut ModelGraph<T>,
    set: &WindowSet,
    chunk: usize,
) -> Result<f64> {
    if set.is_empty() {
        return Err(Error::invalid("accuracy of an empty window set"));
    }
    let probs = model.predict(&set.data.cast(), chunk)?;
    let hits = probs
        .iter()
        .zip(&set.labels)
        .filter(|(p, &l)| (p.f64() > 0.5) == (l == 1))
        .count();
    Ok(hits as f64 / set.len() as f64)
}
