//! Central-difference verification of the reverse sweep.
//!
//! The scalar probed is `Σ rᵢ·outᵢ` for a fixed random projection `r`, so every
//! output coordinate contributes. Coordinates whose ±eps probes flip a ReLU
//! sign or a max-pool winner sit on a kink where no derivative exists; those
//! are counted and excluded rather than compared.

use crate::error::{Error, Result};

use super::graph::{Graph, Param};
use super::ops::Mode;
use super::rng::RngState;
use super::tensor::Tensor3;

#[derive(Debug, Clone)]
pub struct GradCheckOptions {
    pub eps: f64,
    /// Upper bound on probed coordinates (parameters plus inputs).
    pub max_coords: usize,
    pub mode: Mode,
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        GradCheckOptions {
            eps: 1e-5,
            max_coords: 2000,
            mode: Mode::Train,
            seed: 0x5eed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    /// `max |g_bp − g_fd| / max(|g_bp|, |g_fd|, 1e−8)` over compared coordinates.
    pub max_rel_error: f64,
    /// The same maximum restricted to coordinates with
    /// `max(|g_bp|, |g_fd|) >= RESOLVED_GRADIENT`. Central differences at
    /// `eps = 1e-5` on O(1) outputs carry roughly 1e-11 of rounding noise, so
    /// smaller gradients cannot be resolved to 1e-4 in f64; a gap between the
    /// two maxima points at resolution, a large value here at backprop.
    pub resolved_max_rel_error: f64,
    pub checked: usize,
    pub skipped_kinks: usize,
    /// Label of the coordinate with the largest error.
    pub worst: String,
}

/// Gradient magnitude above which finite differences are trusted to 1e-4.
pub const RESOLVED_GRADIENT: f64 = 1e-6;

#[derive(Debug, Clone, Copy)]
enum Coord {
    Param {
        node: usize,
        param: usize,
        index: usize,
    },
    Input {
        index: usize,
    },
}

struct Probe<'a> {
    graph: &'a mut Graph<f64>,
    x: Tensor3<f64>,
    mode: Mode,
    rng: RngState,
    buffers: Vec<Vec<f64>>,
}

impl Probe<'_> {
    /// Forward from identical dropout/batch-norm state every time.
    fn run(&mut self) -> Result<(Vec<f64>, u64)> {
        self.graph.rng = self.rng.clone();
        for (b, saved) in self.graph.buffers_mut().zip(&self.buffers) {
            b.value.copy_from_slice(saved);
        }
        let tape = self.graph.forward(&self.x, self.mode)?;
        let fp = tape.decision_fingerprint(self.graph);
        Ok((tape.output().data().to_vec(), fp))
    }

    fn slot(&mut self, c: Coord) -> &mut f64 {
        match c {
            Coord::Param { node, param, index } => {
                &mut self.graph.nodes[node].params[param].value[index]
            }
            Coord::Input { index } => &mut self.x.data_mut()[index],
        }
    }
}

/// Runs the check with default options except `eps`.
pub fn grad_check(graph: &mut Graph<f64>, x: &Tensor3<f64>, eps: f64) -> Result<GradCheckReport> {
    grad_check_with(
        graph,
        x,
        &GradCheckOptions {
            eps,
            ..Default::default()
        },
    )
}

pub fn grad_check_with(
    graph: &mut Graph<f64>,
    x: &Tensor3<f64>,
    opts: &GradCheckOptions,
) -> Result<GradCheckReport> {
    if !(opts.eps > 0.0) {
        return Err(Error::invalid("grad_check: eps must be positive"));
    }
    let mut rng = RngState::new(opts.seed);
    let saved_rng = graph.rng.clone();
    let buffers: Vec<Vec<f64>> = graph.buffers().map(|b| b.value.clone()).collect();

    let mut probe = Probe {
        graph,
        x: x.clone(),
        mode: opts.mode,
        rng: saved_rng.clone(),
        buffers,
    };

    // Analytic gradient.
    probe.graph.zero_grads();
    probe.graph.rng = saved_rng.clone();
    let tape = probe.graph.forward(&probe.x, opts.mode)?;
    let base_fp = tape.decision_fingerprint(probe.graph);
    let out_dims = tape.output().dims();
    let proj: Vec<f64> = (0..tape.output().data().len())
        .map(|_| rng.uniform_range(-1.0, 1.0))
        .collect();
    let seed = Tensor3::from_vec(out_dims, proj.clone())?;
    let out_node = probe.graph.output;
    let dx = probe
        .graph
        .backward(tape, out_node, seed, true)?
        .expect("input gradient requested");

    let mut coords: Vec<Coord> = Vec::new();
    for (n, node) in probe.graph.nodes.iter().enumerate() {
        for (p, prm) in node.params.iter().enumerate() {
            coords.extend((0..prm.value.len()).map(|index| Coord::Param {
                node: n,
                param: p,
                index,
            }));
        }
    }
    coords.extend((0..x.data().len()).map(|index| Coord::Input { index }));
    if coords.len() > opts.max_coords {
        rng.shuffle(&mut coords);
        coords.truncate(opts.max_coords);
    }

    let analytic = |g: &Graph<f64>, c: Coord| -> f64 {
        match c {
            Coord::Param { node, param, index } => g.nodes[node].params[param].grad[index],
            Coord::Input { index } => dx.data()[index],
        }
    };
    let label = |g: &Graph<f64>, c: Coord| -> String {
        match c {
            Coord::Param { node, param, index } => {
                let p: &Param<f64> = &g.nodes[node].params[param];
                format!("{}[{index}]", p.name)
            }
            Coord::Input { index } => format!("input[{index}]"),
        }
    };

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        resolved_max_rel_error: 0.0,
        checked: 0,
        skipped_kinks: 0,
        worst: String::new(),
    };
    for c in coords {
        let orig = *probe.slot(c);
        *probe.slot(c) = orig + opts.eps;
        let (plus, fp_plus) = probe.run()?;
        *probe.slot(c) = orig - opts.eps;
        let (minus, fp_minus) = probe.run()?;
        *probe.slot(c) = orig;
        if fp_plus != base_fp || fp_minus != base_fp {
            report.skipped_kinks += 1;
            continue;
        }
        let diff: f64 = proj
            .iter()
            .zip(plus.iter().zip(&minus))
            .map(|(r, (a, b))| r * (a - b))
            .sum();
        let fd = diff / (2.0 * opts.eps);
        let bp = analytic(probe.graph, c);
        let rel = (bp - fd).abs() / bp.abs().max(fd.abs()).max(1e-8);
        report.checked += 1;
        if bp.abs().max(fd.abs()) >= RESOLVED_GRADIENT {
            report.resolved_max_rel_error = report.resolved_max_rel_error.max(rel);
        }
        if report.worst.is_empty() || rel > report.max_rel_error {
            report.max_rel_error = rel;
            report.worst = format!(
                "{} (backprop {bp:.6e}, numeric {fd:.6e})",
                label(probe.graph, c)
            );
        }
    }

    // Leave the graph as it was found.
    probe.graph.rng = saved_rng;
    let restored = std::mem::take(&mut probe.buffers);
    for (b, saved) in probe.graph.buffers_mut().zip(restored) {
        b.value = saved;
    }
    Ok(report)
}
