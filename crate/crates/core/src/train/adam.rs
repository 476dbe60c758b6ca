use crate::error::{Error, Result};
use crate::nn::{Graph, Scalar};

/// Adam hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moments per parameter tensor plus the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub m: Vec<Vec<T>>,
    pub v: Vec<Vec<T>>,
    pub t: u64,
}

impl<T: Scalar> AdamState<T> {
    /// Zero moments shaped like the graph's parameters.
    pub fn for_graph(graph: &Graph<T>) -> Self {
        let zeros: Vec<Vec<T>> = graph
            .params()
            .map(|p| vec![T::zero(); p.value.len()])
            .collect();
        AdamState {
            m: zeros.clone(),
            v: zeros,
            t: 0,
        }
    }
}

/// One Adam update of a single tensor at step `t` (already incremented).
pub fn adam_update<T: Scalar>(
    theta: &mut [T],
    grad: &[T],
    m: &mut [T],
    v: &mut [T],
    t: u64,
    lr: f64,
    cfg: &AdamConfig,
) {
    let (b1, b2) = (T::of(cfg.beta1), T::of(cfg.beta2));
    let c1 = T::of(1.0 - cfg.beta1.powi(t as i32));
    let c2 = T::of(1.0 - cfg.beta2.powi(t as i32));
    let (lr, eps) = (T::of(lr), T::of(cfg.eps));
    for (((w, &g), m), v) in theta
        .iter_mut()
        .zip(grad)
        .zip(m.iter_mut())
        .zip(v.iter_mut())
    {
        *m = b1 * *m + (T::one() - b1) * g;
        *v = b2 * *v + (T::one() - b2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *w -= lr * m_hat / (v_hat.sqrt() + eps);
    }
}

/// Applies one optimizer step from the gradients accumulated in `graph`.
///
/// Nothing changes, the counter included, when any gradient is non-finite.
pub fn adam_step<T: Scalar>(
    graph: &mut Graph<T>,
    state: &mut AdamState<T>,
    lr: f64,
    cfg: &AdamConfig,
) -> Result<()> {
    if state.m.len() != graph.params().count() {
        return Err(Error::shape(
            "adam state",
            graph.params().count(),
            state.m.len(),
        ));
    }
    for p in graph.params() {
        if let Some(i) = p.grad.iter().position(|g| !g.is_finite()) {
            return Err(Error::NonFinite {
                context: format!("gradient of {}[{i}]; optimizer step aborted", p.name),
            });
        }
    }
    state.t += 1;
    for ((p, m), v) in graph
        .params_mut()
        .zip(state.m.iter_mut())
        .zip(state.v.iter_mut())
    {
        adam_update(&mut p.value, &p.grad, m, v, state.t, lr, cfg);
    }
    Ok(())
}
