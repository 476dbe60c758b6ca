//! Layer graph with a recorded forward tape and a reverse sweep.
//!
//! Nodes are stored in topological order (every input id is smaller than the
//! node's own id), so the forward pass is a single scan and the backward pass
//! the reverse scan.

use std::fmt::Write as _;

use crate::error::{Error, Result};

use super::ops::{self, Activation, BatchNormConfig, BatchNormStats, ConvGeometry, Mode, PoolKind};
use super::rng::RngState;
use super::scalar::Scalar;
use super::tensor::Tensor3;

pub type NodeId = usize;

#[derive(Debug, Clone, PartialEq)]
pub enum Op {
    Input {
        channels: usize,
    },
    Conv1d(ConvGeometry),
    BatchNorm {
        channels: usize,
    },
    Relu,
    Tanh,
    Sigmoid,
    Pool {
        kind: PoolKind,
        size: usize,
    },
    Flatten,
    Dense {
        in_features: usize,
        out_features: usize,
        activation: Activation,
    },
    Dropout {
        rate: f64,
    },
    /// Elementwise sum of any number of inputs.
    Add,
    /// Elementwise mean of any number of inputs (fractal join).
    Mean,
    Multiply,
    /// `tanh(in0) ⊙ sigmoid(in1)`.
    Gated,
    Softmax,
}

impl Op {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Op::Input { .. } => "input",
            Op::Conv1d(_) => "conv1d",
            Op::BatchNorm { .. } => "batchnorm",
            Op::Relu => "relu",
            Op::Tanh => "tanh",
            Op::Sigmoid => "sigmoid",
            Op::Pool {
                kind: PoolKind::Max,
                ..
            } => "maxpool",
            Op::Pool {
                kind: PoolKind::Avg,
                ..
            } => "avgpool",
            Op::Flatten => "flatten",
            Op::Dense { .. } => "dense",
            Op::Dropout { .. } => "dropout",
            Op::Add => "add",
            Op::Mean => "mean",
            Op::Multiply => "multiply",
            Op::Gated => "gated",
            Op::Softmax => "softmax",
        }
    }

    fn describe(&self) -> String {
        match self {
            Op::Conv1d(g) => format!(
                "conv1d k={} ch={}->{} d={} s={} {}",
                g.kernel,
                g.in_channels,
                g.out_channels,
                g.dilation,
                g.stride,
                g.padding.name()
            ),
            Op::Pool { size, .. } => format!("{} {}", self.kind_name(), size),
            Op::Dense {
                in_features,
                out_features,
                activation,
            } => format!("dense {in_features}->{out_features} {activation:?}").to_lowercase(),
            Op::Dropout { rate } => format!("dropout {rate}"),
            _ => self.kind_name().to_string(),
        }
    }

    /// Output dims given the dims of each input.
    pub fn out_dims(&self, inputs: &[[usize; 3]]) -> Result<[usize; 3]> {
        let first = || {
            inputs
                .first()
                .copied()
                .ok_or_else(|| Error::invalid(format!("{} without inputs", self.kind_name())))
        };
        match self {
            Op::Input { .. } => first(),
            Op::Conv1d(g) => {
                let [b, c, l] = first()?;
                if c != g.in_channels {
                    return Err(Error::shape("conv1d channels", g.in_channels, c));
                }
                Ok([b, g.out_channels, g.out_len(l)?])
            }
            Op::Pool { size, .. } => {
                if *size == 0 {
                    return Err(Error::invalid("pool size must be >= 1"));
                }
                let [b, c, l] = first()?;
                Ok([b, c, l / size])
            }
            Op::Flatten => {
                let [b, c, l] = first()?;
                Ok([b, c * l, 1])
            }
            Op::Dense {
                in_features,
                out_features,
                ..
            } => {
                let [b, c, l] = first()?;
                if c * l != *in_features {
                    return Err(Error::shape("dense input features", in_features, c * l));
                }
                Ok([b, *out_features, 1])
            }
            Op::Add | Op::Mean | Op::Multiply | Op::Gated => {
                let d = first()?;
                if let Some(bad) = inputs.iter().find(|x| **x != d) {
                    return Err(Error::shape(
                        format!("{} operands", self.kind_name()),
                        format!("{d:?}"),
                        format!("{bad:?}"),
                    ));
                }
                Ok(d)
            }
            _ => first(),
        }
    }
}

/// A named tensor owned by a node, with its gradient accumulator.
#[derive(Debug, Clone, PartialEq)]
pub struct Param<T> {
    pub name: String,
    pub dims: Vec<usize>,
    pub value: Vec<T>,
    pub grad: Vec<T>,
}

impl<T: Scalar> Param<T> {
    pub fn new(name: String, dims: Vec<usize>, value: Vec<T>) -> Self {
        let grad = vec![T::zero(); value.len()];
        Param {
            name,
            dims,
            value,
            grad,
        }
    }

    fn cast<U: Scalar>(&self) -> Param<U> {
        Param {
            name: self.name.clone(),
            dims: self.dims.clone(),
            value: self.value.iter().map(|&v| U::of(v.f64())).collect(),
            grad: self.grad.iter().map(|&v| U::of(v.f64())).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node<T> {
    pub name: String,
    pub op: Op,
    pub inputs: Vec<NodeId>,
    /// Trainable tensors.
    pub params: Vec<Param<T>>,
    /// Non-trainable state (batch-norm running statistics).
    pub buffers: Vec<Param<T>>,
}

#[derive(Debug, Clone)]
enum Aux<T> {
    None,
    BatchNorm(BatchNormStats<T>),
    Argmax(Vec<u32>),
    Mask(Vec<T>),
}

/// Values recorded by one forward pass, consumed by [`Graph::backward`].
#[derive(Debug)]
pub struct Tape<T> {
    mode: Mode,
    values: Vec<Option<Tensor3<T>>>,
    aux: Vec<Aux<T>>,
    last: NodeId,
}

impl<T: Scalar> Tape<T> {
    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// Output of the last node evaluated.
    pub fn output(&self) -> &Tensor3<T> {
        self.values[self.last]
            .as_ref()
            .expect("last node value retained")
    }

    pub fn value(&self, id: NodeId) -> Option<&Tensor3<T>> {
        self.values.get(id).and_then(|v| v.as_ref())
    }

    /// Hash of every discrete branch taken (ReLU signs, max-pool winners).
    /// Finite-difference probes that change it straddle a kink.
    pub fn decision_fingerprint(&self, graph: &Graph<T>) -> u64 {
        let mut h = crate::util::Fnv64::new();
        for (id, node) in graph.nodes.iter().enumerate().take(self.last + 1) {
            let relu_like = matches!(
                node.op,
                Op::Relu
                    | Op::Dense {
                        activation: Activation::Relu,
                        ..
                    }
            );
            if relu_like {
                if let Some(v) = &self.values[id] {
                    for x in v.data() {
                        h.write(&[(*x > T::zero()) as u8]);
                    }
                }
            }
            if let Aux::Argmax(a) = &self.aux[id] {
                for i in a {
                    h.write(&i.to_le_bytes());
                }
            }
        }
        h.finish()
    }
}

#[derive(Debug, Clone)]
pub struct Graph<T> {
    pub nodes: Vec<Node<T>>,
    pub output: NodeId,
    pub bn: BatchNormConfig,
    pub rng: RngState,
}

impl<T: Scalar> Graph<T> {
    pub fn new(rng: RngState) -> Self {
        Graph {
            nodes: Vec::new(),
            output: 0,
            bn: BatchNormConfig::default(),
            rng,
        }
    }

    /// Appends a node; inputs must already exist.
    pub fn push(
        &mut self,
        name: impl Into<String>,
        op: Op,
        inputs: Vec<NodeId>,
        params: Vec<Param<T>>,
        buffers: Vec<Param<T>>,
    ) -> NodeId {
        let id = self.nodes.len();
        assert!(
            inputs.iter().all(|&i| i < id),
            "graph inputs must precede the node"
        );
        self.nodes.push(Node {
            name: name.into(),
            op,
            inputs,
            params,
            buffers,
        });
        self.output = id;
        id
    }

    pub fn input_channels(&self) -> usize {
        match self.nodes.first().map(|n| &n.op) {
            Some(Op::Input { channels }) => *channels,
            _ => 0,
        }
    }

    pub fn find(&self, name: &str) -> Option<NodeId> {
        self.nodes.iter().position(|n| n.name == name)
    }

    /// First node of the given kind name, e.g. `"flatten"`.
    pub fn first_of(&self, kind: &str) -> Option<NodeId> {
        self.nodes.iter().position(|n| n.op.kind_name() == kind)
    }

    pub fn params(&self) -> impl Iterator<Item = &Param<T>> {
        self.nodes.iter().flat_map(|n| n.params.iter())
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut Param<T>> {
        self.nodes.iter_mut().flat_map(|n| n.params.iter_mut())
    }

    pub fn buffers(&self) -> impl Iterator<Item = &Param<T>> {
        self.nodes.iter().flat_map(|n| n.buffers.iter())
    }

    pub fn buffers_mut(&mut self) -> impl Iterator<Item = &mut Param<T>> {
        self.nodes.iter_mut().flat_map(|n| n.buffers.iter_mut())
    }

    pub fn param_count(&self) -> usize {
        self.params().map(|p| p.value.len()).sum()
    }

    pub fn zero_grads(&mut self) {
        for p in self.params_mut() {
            p.grad.fill(T::zero());
        }
    }

    pub fn cast<U: Scalar>(&self) -> Graph<U> {
        Graph {
            nodes: self
                .nodes
                .iter()
                .map(|n| Node {
                    name: n.name.clone(),
                    op: n.op.clone(),
                    inputs: n.inputs.clone(),
                    params: n.params.iter().map(Param::cast).collect(),
                    buffers: n.buffers.iter().map(Param::cast).collect(),
                })
                .collect(),
            output: self.output,
            bn: self.bn,
            rng: self.rng.clone(),
        }
    }

    /// Shape of every node for a `(batch, channels, length)` input.
    pub fn infer_dims(&self, input: [usize; 3]) -> Result<Vec<[usize; 3]>> {
        let mut dims: Vec<[usize; 3]> = Vec::with_capacity(self.nodes.len());
        for node in &self.nodes {
            let d = match node.op {
                Op::Input { channels } => {
                    if input[1] != channels {
                        return Err(Error::shape("graph input channels", channels, input[1]));
                    }
                    input
                }
                _ => {
                    let ins: Vec<[usize; 3]> = node.inputs.iter().map(|&i| dims[i]).collect();
                    node.op.out_dims(&ins).map_err(|e| annotate(e, node))?
                }
            };
            dims.push(d);
        }
        Ok(dims)
    }

    /// Text listing of nodes, output shapes for one example, and parameter counts.
    pub fn summary(&self, input_len: usize) -> String {
        let dims = self.infer_dims([1, self.input_channels(), input_len]);
        let mut s = String::new();
        for (id, node) in self.nodes.iter().enumerate() {
            let shape = match &dims {
                Ok(d) => format!("{}x{}", d[id][1], d[id][2]),
                Err(_) => "?".into(),
            };
            let n: usize = node.params.iter().map(|p| p.value.len()).sum();
            let ins: Vec<String> = node.inputs.iter().map(|i| i.to_string()).collect();
            let _ = writeln!(
                s,
                "{id:>4} {:<28} {:<36} <- [{}] out {} params {}",
                node.name,
                node.op.describe(),
                ins.join(","),
                shape,
                n
            );
        }
        let _ = writeln!(s, "total params {}", self.param_count());
        s
    }

    pub fn forward(&mut self, x: &Tensor3<T>, mode: Mode) -> Result<Tape<T>> {
        let last = self.output;
        self.forward_until(x, mode, last)
    }

    /// Evaluates nodes `0..=stop` only. Stopping before the dense head lets the
    /// convolutional trunk run on inputs of any length.
    pub fn forward_until(&mut self, x: &Tensor3<T>, mode: Mode, stop: NodeId) -> Result<Tape<T>> {
        let n = self.nodes.len();
        if stop >= n {
            return Err(Error::invalid(format!(
                "node {stop} out of range ({n} nodes)"
            )));
        }
        let mut values: Vec<Option<Tensor3<T>>> = vec![None; n];
        let mut aux: Vec<Aux<T>> = vec![Aux::None; n];
        let bn_cfg = self.bn;
        for id in 0..=stop {
            let (y, a) = {
                let node = &mut self.nodes[id];
                let inputs: Vec<&Tensor3<T>> = node
                    .inputs
                    .iter()
                    .map(|&i| values[i].as_ref().expect("inputs evaluated before use"))
                    .collect();
                eval_node(node, &inputs, x, mode, bn_cfg, &mut self.rng)
                    .map_err(|e| annotate(e, node))?
            };
            if !y.is_finite() {
                let node = &self.nodes[id];
                return Err(Error::NonFinite {
                    context: format!(
                        "output of node {id} '{}' ({})",
                        node.name,
                        node.op.kind_name()
                    ),
                });
            }
            values[id] = Some(y);
            aux[id] = a;
        }
        Ok(Tape {
            mode,
            values,
            aux,
            last: stop,
        })
    }

    /// Sets every batch-norm running mean/variance to the statistics of `x`
    /// (one train-mode forward with zero momentum). Dropout draws are undone.
    pub fn calibrate_batch_norm(&mut self, x: &Tensor3<T>) -> Result<()> {
        let (bn, rng) = (self.bn, self.rng.clone());
        self.bn.momentum = 0.0;
        let res = self.forward(x, Mode::Train).map(|_| ());
        self.bn = bn;
        self.rng = rng;
        res
    }

    /// Reverse sweep from `seed_node` with upstream gradient `seed`.
    ///
    /// Parameter gradients are accumulated into each [`Param::grad`]; the
    /// gradient w.r.t. the graph input is returned when `need_input_grad`.
    pub fn backward(
        &mut self,
        mut tape: Tape<T>,
        seed_node: NodeId,
        seed: Tensor3<T>,
        need_input_grad: bool,
    ) -> Result<Option<Tensor3<T>>> {
        if seed_node > tape.last {
            return Err(Error::invalid("backward seed node was not evaluated"));
        }
        let expected = tape.values[seed_node].as_ref().map(|v| v.dims());
        if expected != Some(seed.dims()) {
            return Err(Error::shape(
                "backward seed",
                format!("{expected:?}"),
                format!("{:?}", seed.dims()),
            ));
        }
        let n = tape.last + 1;
        let mut grads: Vec<Option<Tensor3<T>>> = vec![None; n];
        grads[seed_node] = Some(seed);
        let mode = tape.mode;
        let mut input_grad = None;
        for id in (0..n).rev() {
            let Some(dy) = grads[id].take() else {
                tape.values[id] = None;
                continue;
            };
            let node = &mut self.nodes[id];
            if let Op::Input { .. } = node.op {
                input_grad = Some(dy);
                continue;
            }
            // Node 0 is the graph input; its gradient is only needed on request.
            let need_dx: Vec<bool> = node
                .inputs
                .iter()
                .map(|&i| need_input_grad || i != 0)
                .collect();
            let ins: Vec<&Tensor3<T>> = node
                .inputs
                .iter()
                .map(|&i| tape.values[i].as_ref().expect("input retained"))
                .collect();
            let y = tape.values[id].as_ref().expect("output retained");
            let dxs = backward_node(node, &ins, y, &tape.aux[id], mode, &dy, &need_dx);
            for (k, dx) in dxs.into_iter().enumerate() {
                let Some(dx) = dx else { continue };
                let src = node.inputs[k];
                match grads[src].as_mut() {
                    Some(g) => g.add_assign(&dx),
                    None => grads[src] = Some(dx),
                }
            }
            tape.values[id] = None;
            tape.aux[id] = Aux::None;
        }
        Ok(input_grad)
    }

    /// The part of the graph computing `to` from the value of `from`, as a
    /// standalone graph whose input stands in for `from` (`channels` wide).
    /// Parameters and buffers are copied.
    pub fn subgraph(&self, from: NodeId, to: NodeId, channels: usize) -> Result<Graph<T>> {
        if from >= to || to >= self.nodes.len() {
            return Err(Error::invalid(format!(
                "subgraph: need from < to < {} (got {from}, {to})",
                self.nodes.len()
            )));
        }
        // Ancestors of `to`, walking back no further than `from`.
        let mut needed = vec![false; to + 1];
        needed[to] = true;
        for id in (from + 1..=to).rev() {
            if needed[id] {
                for &i in &self.nodes[id].inputs {
                    if i < from {
                        return Err(Error::invalid(format!(
                            "subgraph: node '{}' reads '{}', which precedes the cut",
                            self.nodes[id].name, self.nodes[i].name
                        )));
                    }
                    needed[i] = true;
                }
            }
        }
        let mut g = Graph::new(self.rng.clone());
        g.bn = self.bn;
        let mut remap = vec![usize::MAX; to + 1];
        remap[from] = g.push("input", Op::Input { channels }, vec![], vec![], vec![]);
        for id in from + 1..=to {
            if !needed[id] {
                continue;
            }
            let n = &self.nodes[id];
            let inputs = n.inputs.iter().map(|&i| remap[i]).collect();
            remap[id] = g.push(
                n.name.clone(),
                n.op.clone(),
                inputs,
                n.params.clone(),
                n.buffers.clone(),
            );
        }
        Ok(g)
    }
}

fn annotate<T>(err: Error, node: &Node<T>) -> Error {
    match err {
        Error::Shape {
            context,
            expected,
            actual,
        } => Error::Shape {
            context: format!("{context} at node '{}'", node.name),
            expected,
            actual,
        },
        Error::InvalidArgument(msg) => {
            Error::InvalidArgument(format!("{msg} at node '{}'", node.name))
        }
        other => other,
    }
}

fn param<T>(node: &Node<T>, i: usize) -> &[T] {
    &node.params[i].value
}

/// A conv bias is trainable, or a frozen buffer when a batch norm follows.
fn conv_bias<T>(node: &Node<T>) -> &[T] {
    match node.params.get(1) {
        Some(b) => &b.value,
        None => &node.buffers[0].value,
    }
}

fn eval_node<T: Scalar>(
    node: &mut Node<T>,
    inputs: &[&Tensor3<T>],
    x: &Tensor3<T>,
    mode: Mode,
    bn_cfg: BatchNormConfig,
    rng: &mut RngState,
) -> Result<(Tensor3<T>, Aux<T>)> {
    let dims: Vec<[usize; 3]> = inputs.iter().map(|t| t.dims()).collect();
    if !matches!(node.op, Op::Input { .. }) {
        node.op.out_dims(&dims)?;
    }
    Ok(match &node.op {
        Op::Input { channels } => {
            if x.channels() != *channels {
                return Err(Error::shape("graph input channels", channels, x.channels()));
            }
            (x.clone(), Aux::None)
        }
        Op::Conv1d(g) => (
            ops::conv1d(inputs[0], param(node, 0), conv_bias(node), g)?,
            Aux::None,
        ),
        Op::BatchNorm { .. } => {
            let (gamma, beta) = (node.params[0].value.clone(), node.params[1].value.clone());
            let (rm, rv) = node.buffers.split_at_mut(1);
            let (y, stats) = ops::batch_norm1d(
                inputs[0],
                &gamma,
                &beta,
                &mut rm[0].value,
                &mut rv[0].value,
                mode,
                bn_cfg,
            )?;
            (y, Aux::BatchNorm(stats))
        }
        Op::Relu => (inputs[0].map(ops::relu), Aux::None),
        Op::Tanh => (inputs[0].map(|v| v.tanh()), Aux::None),
        Op::Sigmoid => (inputs[0].map(ops::sigmoid), Aux::None),
        Op::Pool { kind, size } => {
            let (y, arg) = ops::pool1d(inputs[0], *kind, *size)?;
            (
                y,
                if *kind == PoolKind::Max {
                    Aux::Argmax(arg)
                } else {
                    Aux::None
                },
            )
        }
        Op::Flatten => {
            let [b, c, l] = inputs[0].dims();
            (inputs[0].clone().reshape([b, c * l, 1])?, Aux::None)
        }
        Op::Dense {
            out_features,
            activation,
            ..
        } => (
            ops::dense(
                inputs[0],
                param(node, 0),
                param(node, 1),
                *out_features,
                *activation,
            )?,
            Aux::None,
        ),
        Op::Dropout { rate } => {
            let (y, mask) = ops::dropout(inputs[0], *rate, mode, rng)?;
            (y, Aux::Mask(mask))
        }
        Op::Add | Op::Mean => {
            let mut y = inputs[0].clone();
            for t in &inputs[1..] {
                y.add_assign(t);
            }
            if node.op == Op::Mean {
                let inv = T::one() / T::of(inputs.len() as f64);
                for v in y.data_mut() {
                    *v *= inv;
                }
            }
            (y, Aux::None)
        }
        Op::Multiply => {
            let mut y = inputs[0].clone();
            for (a, &b) in y.data_mut().iter_mut().zip(inputs[1].data()) {
                *a *= b;
            }
            (y, Aux::None)
        }
        Op::Gated => (ops::gated_unit(inputs[0], inputs[1])?, Aux::None),
        Op::Softmax => (ops::softmax(inputs[0]), Aux::None),
    })
}

fn backward_node<T: Scalar>(
    node: &mut Node<T>,
    inputs: &[&Tensor3<T>],
    y: &Tensor3<T>,
    aux: &Aux<T>,
    mode: Mode,
    dy: &Tensor3<T>,
    need_dx: &[bool],
) -> Vec<Option<Tensor3<T>>> {
    let unary = |t: Tensor3<T>| vec![Some(t)];
    match &node.op {
        Op::Input { .. } => vec![],
        Op::Conv1d(g) => {
            let g = *g;
            let w = node.params[0].value.clone();
            let mut scratch = Vec::new();
            let (pw, pb) = node.params.split_at_mut(1);
            let dbias = match pb.first_mut() {
                Some(b) => &mut b.grad,
                None => {
                    scratch.resize(g.out_channels, T::zero());
                    &mut scratch
                }
            };
            vec![ops::conv1d_backward(
                inputs[0],
                &w,
                &g,
                dy,
                &mut pw[0].grad,
                dbias,
                need_dx[0],
            )]
        }
        Op::BatchNorm { .. } => {
            let Aux::BatchNorm(stats) = aux else {
                unreachable!("batchnorm tape entry")
            };
            let gamma = node.params[0].value.clone();
            let (pg, pb) = node.params.split_at_mut(1);
            unary(ops::batch_norm1d_backward(
                inputs[0],
                &gamma,
                stats,
                mode,
                dy,
                &mut pg[0].grad,
                &mut pb[0].grad,
            ))
        }
        Op::Relu => {
            let mut dx = dy.clone();
            for (d, &o) in dx.data_mut().iter_mut().zip(y.data()) {
                if o <= T::zero() {
                    *d = T::zero();
                }
            }
            unary(dx)
        }
        Op::Tanh => {
            let mut dx = dy.clone();
            for (d, &o) in dx.data_mut().iter_mut().zip(y.data()) {
                *d *= T::one() - o * o;
            }
            unary(dx)
        }
        Op::Sigmoid => {
            let mut dx = dy.clone();
            for (d, &o) in dx.data_mut().iter_mut().zip(y.data()) {
                *d *= o * (T::one() - o);
            }
            unary(dx)
        }
        Op::Pool { kind, size } => {
            let arg: &[u32] = match aux {
                Aux::Argmax(a) => a,
                _ => &[],
            };
            unary(ops::pool1d_backward(
                inputs[0].dims(),
                *kind,
                *size,
                arg,
                dy,
            ))
        }
        Op::Flatten => unary(
            dy.clone()
                .reshape(inputs[0].dims())
                .expect("flatten is a reshape"),
        ),
        Op::Dense { activation, .. } => {
            let act = *activation;
            let w = node.params[0].value.clone();
            let (pw, pb) = node.params.split_at_mut(1);
            let dx = ops::dense_backward(
                inputs[0],
                &w,
                y,
                act,
                dy,
                &mut pw[0].grad,
                &mut pb[0].grad,
                need_dx[0],
            );
            vec![dx.map(|d| d.reshape(inputs[0].dims()).expect("dense input shape"))]
        }
        Op::Dropout { .. } => {
            let mask: &[T] = match aux {
                Aux::Mask(m) => m,
                _ => &[],
            };
            unary(ops::dropout_backward(mask, dy))
        }
        Op::Add => inputs.iter().map(|_| Some(dy.clone())).collect(),
        Op::Mean => {
            let inv = T::one() / T::of(inputs.len() as f64);
            let d = dy.map(|v| v * inv);
            inputs.iter().map(|_| Some(d.clone())).collect()
        }
        Op::Multiply => {
            let mut da = dy.clone();
            let mut db = dy.clone();
            for ((a, b), (&x0, &x1)) in da
                .data_mut()
                .iter_mut()
                .zip(db.data_mut())
                .zip(inputs[0].data().iter().zip(inputs[1].data()))
            {
                *a *= x1;
                *b *= x0;
            }
            vec![Some(da), Some(db)]
        }
        Op::Gated => {
            let (df, dg) = ops::gated_unit_backward(inputs[0], inputs[1], dy);
            vec![Some(df), Some(dg)]
        }
        Op::Softmax => unary(ops::softmax_backward(y, dy)),
    }
}
