use super::graph::{Graph, NodeId, Op, Param};
use super::ops::{Activation, ConvGeometry, Padding, PoolKind};
use super::rng::RngState;
use super::scalar::Scalar;

/// Appends initialized layers to a [`Graph`] while tracking shapes for a
/// reference input length.
///
/// Weights use Glorot uniform with limit `√(6/(fan_in+fan_out))`, where a
/// convolution's fans are `in·kernel` and `out·kernel`; biases and `β` start
/// at zero, `γ` at one, running mean/var at 0/1.
pub struct GraphBuilder<T> {
    graph: Graph<T>,
    dims: Vec<[usize; 3]>,
    init: RngState,
}

impl<T: Scalar> GraphBuilder<T> {
    pub fn new(in_channels: usize, input_len: usize, rng: &mut RngState) -> Self {
        let init = rng.fork(1);
        let dropout_rng = rng.fork(2);
        let mut graph = Graph::new(dropout_rng);
        graph.push(
            "input",
            Op::Input {
                channels: in_channels,
            },
            vec![],
            vec![],
            vec![],
        );
        GraphBuilder {
            graph,
            dims: vec![[1, in_channels, input_len]],
            init,
        }
    }

    pub fn channels(&self, id: NodeId) -> usize {
        self.dims[id][1]
    }

    pub fn length(&self, id: NodeId) -> usize {
        self.dims[id][2]
    }

    fn glorot(&mut self, n: usize, fan_in: usize, fan_out: usize) -> Vec<T> {
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        (0..n)
            .map(|_| T::of(self.init.uniform_range(-limit, limit)))
            .collect()
    }

    /// Adds a node, panicking on a shape error: blueprints are static, so a
    /// failure here is a bug in the blueprint, not in user input.
    pub fn add(
        &mut self,
        name: impl Into<String>,
        op: Op,
        inputs: Vec<NodeId>,
        params: Vec<Param<T>>,
        buffers: Vec<Param<T>>,
    ) -> NodeId {
        let name = name.into();
        let ins: Vec<[usize; 3]> = inputs.iter().map(|&i| self.dims[i]).collect();
        let d = op
            .out_dims(&ins)
            .unwrap_or_else(|e| panic!("blueprint shape error at '{name}': {e}"));
        self.dims.push(d);
        self.graph.push(name, op, inputs, params, buffers)
    }

    pub fn conv(
        &mut self,
        name: &str,
        x: NodeId,
        out_channels: usize,
        kernel: usize,
        padding: Padding,
        dilation: usize,
    ) -> NodeId {
        self.conv_with(name, x, out_channels, kernel, padding, dilation, true)
    }

    /// Convolution feeding a batch norm: the norm's `β` absorbs any bias, so
    /// the bias is held at zero and excluded from training.
    pub fn conv_for_norm(
        &mut self,
        name: &str,
        x: NodeId,
        out_channels: usize,
        kernel: usize,
        padding: Padding,
        dilation: usize,
    ) -> NodeId {
        self.conv_with(name, x, out_channels, kernel, padding, dilation, false)
    }

    #[allow(clippy::too_many_arguments)]
    fn conv_with(
        &mut self,
        name: &str,
        x: NodeId,
        out_channels: usize,
        kernel: usize,
        padding: Padding,
        dilation: usize,
        bias: bool,
    ) -> NodeId {
        let g = ConvGeometry {
            in_channels: self.channels(x),
            out_channels,
            kernel,
            dilation,
            stride: 1,
            padding,
        };
        let w = self.glorot(
            g.weight_len(),
            g.in_channels * kernel,
            out_channels * kernel,
        );
        let weight = Param::new(
            format!("{name}.weight"),
            vec![out_channels, g.in_channels, kernel],
            w,
        );
        let zeros = vec![T::zero(); out_channels];
        let (params, buffers) = if bias {
            (
                vec![
                    weight,
                    Param::new(format!("{name}.bias"), vec![out_channels], zeros),
                ],
                vec![],
            )
        } else {
            (
                vec![weight],
                vec![Param::new(
                    format!("{name}.bias"),
                    vec![out_channels],
                    zeros,
                )],
            )
        };
        self.add(name, Op::Conv1d(g), vec![x], params, buffers)
    }

    pub fn batch_norm(&mut self, name: &str, x: NodeId) -> NodeId {
        let c = self.channels(x);
        let params = vec![
            Param::new(format!("{name}.gamma"), vec![c], vec![T::one(); c]),
            Param::new(format!("{name}.beta"), vec![c], vec![T::zero(); c]),
        ];
        let buffers = vec![
            Param::new(format!("{name}.running_mean"), vec![c], vec![T::zero(); c]),
            Param::new(format!("{name}.running_var"), vec![c], vec![T::one(); c]),
        ];
        self.add(
            name,
            Op::BatchNorm { channels: c },
            vec![x],
            params,
            buffers,
        )
    }

    pub fn dense(
        &mut self,
        name: &str,
        x: NodeId,
        out_features: usize,
        activation: Activation,
    ) -> NodeId {
        let in_features = self.channels(x) * self.length(x);
        let w = self.glorot(out_features * in_features, in_features, out_features);
        let params = vec![
            Param::new(format!("{name}.weight"), vec![out_features, in_features], w),
            Param::new(
                format!("{name}.bias"),
                vec![out_features],
                vec![T::zero(); out_features],
            ),
        ];
        self.add(
            name,
            Op::Dense {
                in_features,
                out_features,
                activation,
            },
            vec![x],
            params,
            vec![],
        )
    }

    pub fn unary(&mut self, name: &str, op: Op, x: NodeId) -> NodeId {
        self.add(name, op, vec![x], vec![], vec![])
    }

    pub fn relu(&mut self, name: &str, x: NodeId) -> NodeId {
        self.unary(name, Op::Relu, x)
    }

    pub fn max_pool(&mut self, name: &str, x: NodeId, size: usize) -> NodeId {
        self.unary(
            name,
            Op::Pool {
                kind: PoolKind::Max,
                size,
            },
            x,
        )
    }

    pub fn avg_pool(&mut self, name: &str, x: NodeId, size: usize) -> NodeId {
        self.unary(
            name,
            Op::Pool {
                kind: PoolKind::Avg,
                size,
            },
            x,
        )
    }

    pub fn dropout(&mut self, name: &str, x: NodeId, rate: f64) -> NodeId {
        self.unary(name, Op::Dropout { rate }, x)
    }

    pub fn flatten(&mut self, name: &str, x: NodeId) -> NodeId {
        self.unary(name, Op::Flatten, x)
    }

    pub fn merge(&mut self, name: &str, op: Op, xs: Vec<NodeId>) -> NodeId {
        self.add(name, op, xs, vec![], vec![])
    }

    pub fn softmax(&mut self, name: &str, x: NodeId) -> NodeId {
        self.unary(name, Op::Softmax, x)
    }

    pub fn finish(self) -> Graph<T> {
        self.graph
    }
}
