use crate::error::{Error, Result};
use crate::nn::{Graph, Mode, NodeId, Op, RngState, Scalar, Tensor3};

/// Input interval seen by one output position `p` of a node:
/// `[p·jump + lo, p·jump + hi]` in input samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Span {
    pub lo: i64,
    pub hi: i64,
    pub jump: i64,
}

impl Span {
    pub fn width(&self) -> usize {
        (self.hi - self.lo + 1) as usize
    }
}

/// Analytic span of `node`, or `None` once the positional axis is gone
/// (flatten, dense and everything after).
pub fn receptive_span<T>(graph: &Graph<T>, node: NodeId) -> Option<Span> {
    let mut spans: Vec<Option<Span>> = Vec::with_capacity(node + 1);
    for n in &graph.nodes[..=node] {
        let ins: Vec<Option<Span>> = n.inputs.iter().map(|&i| spans[i]).collect();
        let first = ins.first().copied().flatten();
        let s = match &n.op {
            Op::Input { .. } => Some(Span {
                lo: 0,
                hi: 0,
                jump: 1,
            }),
            Op::Conv1d(g) => first.map(|s| {
                let (pad_l, _) = g.pads();
                let reach = ((g.kernel - 1) * g.dilation) as i64;
                Span {
                    lo: s.lo - s.jump * pad_l as i64,
                    hi: s.hi + s.jump * (reach - pad_l as i64),
                    jump: s.jump * g.stride as i64,
                }
            }),
            Op::Pool { size, .. } => first.map(|s| Span {
                lo: s.lo,
                hi: s.hi + s.jump * (*size as i64 - 1),
                jump: s.jump * *size as i64,
            }),
            Op::Flatten | Op::Dense { .. } => None,
            Op::Add | Op::Mean | Op::Multiply | Op::Gated => {
                if ins.iter().any(|s| s.is_none()) {
                    None
                } else {
                    let all: Vec<Span> = ins.into_iter().flatten().collect();
                    let jump = all[0].jump;
                    debug_assert!(
                        all.iter().all(|s| s.jump == jump),
                        "merged operands share a stride"
                    );
                    Some(Span {
                        lo: all.iter().map(|s| s.lo).min().expect("merge has inputs"),
                        hi: all.iter().map(|s| s.hi).max().expect("merge has inputs"),
                        jump,
                    })
                }
            }
            _ => first,
        };
        spans.push(s);
    }
    spans[node]
}

/// Measures which input samples influence the middle output position of
/// `node` by perturbing input prefixes and suffixes (eval mode, exact
/// comparison) and binary-searching the first and last influential sample.
///
/// Influence at the edge of the span passes through many attenuating taps,
/// so besides moderate kicks the probe adds ones of magnitude `max^(1/4)`
/// of the scalar type; run it on an `f64` graph to resolve deep stacks.
///
/// Returns `(first, last, position)` in input samples for an input of
/// `input_len` samples.
pub fn measure_receptive_field<T: Scalar>(
    graph: &mut Graph<T>,
    node: NodeId,
    input_len: usize,
    seed: u64,
) -> Result<(usize, usize, usize)> {
    let big = T::max_value().sqrt().sqrt().f64();
    let kicks = [5.0, -5.0, 1000.0, -1000.0, big, -big];
    let channels = graph.input_channels();
    let mut rng = RngState::new(seed);
    let base = Tensor3::<T>::from_fn([1, channels, input_len], |_, _, _| T::of(rng.uniform()));
    let copies = Tensor3::from_fn([kicks.len(), channels, input_len], |_, c, l| {
        base.get(0, c, l)
    });
    let reference = graph
        .forward_until(&copies, Mode::Eval, node)?
        .output()
        .clone();
    let out_len = reference.length();
    if out_len == 0 {
        return Err(Error::invalid(
            "receptive field probe: node has no output positions",
        ));
    }
    let pos = out_len / 2;

    let mut influenced = |range: std::ops::Range<usize>| -> Result<bool> {
        let mut x = copies.clone();
        for (b, kick) in kicks.iter().enumerate() {
            for c in 0..channels {
                for l in range.clone() {
                    x.set(b, c, l, x.get(b, c, l) + T::of(*kick));
                }
            }
        }
        let y = graph.forward_until(&x, Mode::Eval, node)?;
        let y = y.output();
        Ok((0..kicks.len())
            .any(|b| (0..y.channels()).any(|c| y.get(b, c, pos) != reference.get(b, c, pos))))
    };

    // Smallest t with the prefix [0, t) influential: first = t − 1.
    if !influenced(0..input_len)? {
        return Err(Error::invalid(
            "receptive field probe: output does not depend on the input",
        ));
    }
    let (mut lo, mut hi) = (0usize, input_len);
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if influenced(0..mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let first = hi - 1;
    // Largest s with the suffix [s, len) influential: last = s.
    let (mut lo, mut hi) = (0usize, input_len);
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if influenced(mid..input_len)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((first, lo, pos))
}
