//! The five reference architectures and the averaged ensemble.

mod blueprints;
mod receptive;

use std::fmt;
use std::str::FromStr;

pub use receptive::{measure_receptive_field, receptive_span, Span};

use crate::error::{Error, Result};
use crate::nn::{Graph, GraphBuilder, Mode, NodeId, Padding, RngState, Scalar, Tensor3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    M1Residual,
    M2Fractal,
    M3ResNet18,
    M4WaveNetCausal,
    M5WaveNetSame,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [
        ModelKind::M1Residual,
        ModelKind::M2Fractal,
        ModelKind::M3ResNet18,
        ModelKind::M4WaveNetCausal,
        ModelKind::M5WaveNetSame,
    ];

    /// Tag stored in model files.
    pub fn tag(self) -> u32 {
        match self {
            ModelKind::M1Residual => 1,
            ModelKind::M2Fractal => 2,
            ModelKind::M3ResNet18 => 3,
            ModelKind::M4WaveNetCausal => 4,
            ModelKind::M5WaveNetSame => 5,
        }
    }

    pub fn from_tag(tag: u32) -> Result<ModelKind> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.tag() == tag)
            .ok_or(Error::UnknownKind(tag))
    }

    /// Command-line name, `m1` to `m5`.
    pub fn name(self) -> &'static str {
        ["m1", "m2", "m3", "m4", "m5"][self.tag() as usize - 1]
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<ModelKind> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                Error::invalid(format!(
                    "unknown model '{s}' (expected m1, m2, m3, m4 or m5)"
                ))
            })
    }
}

/// Input geometry a model is built for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelConfig {
    pub in_channels: usize,
    pub input_len: usize,
}

impl ModelConfig {
    /// Five channels, 30 s at 100 Hz.
    pub const FULL: ModelConfig = ModelConfig {
        in_channels: 5,
        input_len: 3000,
    };

    /// Reduced geometry for finite-difference checks. Kernels are capped at
    /// half the input length and the dilation schedule keeps only rates
    /// below the stack length.
    pub const TINY: ModelConfig = ModelConfig {
        in_channels: 2,
        input_len: 64,
    };
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig::FULL
    }
}

/// A built architecture: the layer graph plus what it was built as.
#[derive(Debug, Clone)]
pub struct ModelGraph<T = f32> {
    pub kind: ModelKind,
    pub config: ModelConfig,
    pub graph: Graph<T>,
}

/// Full-scale model in training precision.
pub fn build_model(kind: ModelKind, rng: &mut RngState) -> ModelGraph<f32> {
    build_model_with(kind, ModelConfig::FULL, rng)
}

pub fn build_model_with<T: Scalar>(
    kind: ModelKind,
    config: ModelConfig,
    rng: &mut RngState,
) -> ModelGraph<T> {
    let graph = blueprints::build(kind, config, rng);
    ModelGraph {
        kind,
        config,
        graph,
    }
}

impl<T: Scalar> ModelGraph<T> {
    pub fn param_count(&self) -> usize {
        self.graph.param_count()
    }

    pub fn summary(&self) -> String {
        format!(
            "model {} ({} x {})\n{}",
            self.kind,
            self.config.in_channels,
            self.config.input_len,
            self.graph.summary(self.config.input_len)
        )
    }

    /// Node producing the pre-softmax scores.
    pub fn logits_node(&self) -> NodeId {
        self.graph.nodes[self.graph.output].inputs[0]
    }

    /// Node whose output is flattened into the dense head.
    pub fn trunk_output(&self) -> NodeId {
        let flat = self
            .graph
            .first_of("flatten")
            .expect("every blueprint flattens once");
        self.graph.nodes[flat].inputs[0]
    }

    pub fn check_input(&self, batch: &Tensor3<T>) -> Result<()> {
        let [_, c, l] = batch.dims();
        if (c, l) != (self.config.in_channels, self.config.input_len) {
            return Err(Error::shape(
                format!("model {} input", self.kind),
                format!(
                    "n x {} x {}",
                    self.config.in_channels, self.config.input_len
                ),
                format!("n x {c} x {l}"),
            ));
        }
        Ok(())
    }

    /// Class probabilities, shaped `(n, 2, 1)`.
    pub fn forward(&mut self, batch: &Tensor3<T>, mode: Mode) -> Result<Tensor3<T>> {
        self.check_input(batch)?;
        let tape = self.graph.forward(batch, mode)?;
        Ok(tape.output().clone())
    }

    /// Eval-mode arousal probability per window, computed `chunk` windows at a time.
    pub fn predict(&mut self, windows: &Tensor3<T>, chunk: usize) -> Result<Vec<T>> {
        self.check_input(windows)?;
        let chunk = chunk.max(1);
        let mut out = Vec::with_capacity(windows.batch());
        let rows: Vec<usize> = (0..windows.batch()).collect();
        for part in rows.chunks(chunk) {
            let probs = self.forward(&windows.gather(part), Mode::Eval)?;
            out.extend((0..part.len()).map(|b| probs.get(b, 1, 0)));
        }
        Ok(out)
    }

    /// Analytic receptive field, in input samples, of one feature entering
    /// the dense head.
    pub fn receptive_field(&self) -> usize {
        receptive_span(&self.graph, self.trunk_output())
            .expect("trunk nodes are positional")
            .width()
    }

    /// The gated dilated stack of the WaveNet-style models, from the input
    /// of the first dilated block to the summed skip connections.
    pub fn dilated_stack(&self) -> Result<Graph<T>> {
        let start = self.graph.find("a.pool");
        let end = self.graph.find("skip_sum");
        let (Some(start), Some(end)) = (start, end) else {
            return Err(Error::invalid(format!(
                "model {} has no dilated stack",
                self.kind
            )));
        };
        let dims = self
            .graph
            .infer_dims([1, self.config.in_channels, self.config.input_len])?;
        self.graph.subgraph(start, end, dims[start][1])
    }

    pub fn cast<U: Scalar>(&self) -> ModelGraph<U> {
        ModelGraph {
            kind: self.kind,
            config: self.config,
            graph: self.graph.cast(),
        }
    }
}

/// Mean of the members' class probabilities, `(n, 2, 1)`.
pub fn ensemble_predict<T: Scalar>(
    graphs: &mut [ModelGraph<T>],
    batch: &Tensor3<T>,
) -> Result<Tensor3<T>> {
    if graphs.is_empty() {
        return Err(Error::invalid("ensemble_predict: no models"));
    }
    let mut sum: Option<Vec<f64>> = None;
    let mut dims = [0; 3];
    for g in graphs.iter_mut() {
        let p = g.forward(batch, Mode::Eval)?;
        match &mut sum {
            None => {
                dims = p.dims();
                sum = Some(p.data().iter().map(|v| v.f64()).collect());
            }
            Some(s) => {
                if p.dims() != dims {
                    return Err(Error::shape(
                        "ensemble member output",
                        format!("{dims:?}"),
                        format!("{:?}", p.dims()),
                    ));
                }
                for (a, v) in s.iter_mut().zip(p.data()) {
                    *a += v.f64();
                }
            }
        }
    }
    let n = graphs.len() as f64;
    let mean = sum
        .expect("at least one member")
        .into_iter()
        .map(|v| T::of(v / n))
        .collect();
    Tensor3::from_vec(dims, mean)
}

/// A bare stack of dilated convolutions (kernel 2, no nonlinearity) on
/// `channels` channels, used to check receptive-field bookkeeping.
pub fn dilated_conv_stack<T: Scalar>(
    channels: usize,
    dilations: &[usize],
    padding: Padding,
    rng: &mut RngState,
) -> Graph<T> {
    let len = 2 * dilations.iter().sum::<usize>() + 2;
    let mut b = GraphBuilder::<T>::new(channels, len, rng);
    let mut x = 0;
    for (i, &d) in dilations.iter().enumerate() {
        x = b.conv(&format!("d{i}"), x, channels, 2, padding, d);
    }
    b.finish()
}
