//! Numeric layer primitives, the graph executor and gradient verification.

pub mod builder;
pub mod gradcheck;
pub mod graph;
pub mod ops;
pub mod rng;
pub mod scalar;
pub mod tensor;

pub use builder::GraphBuilder;
pub use gradcheck::{
    grad_check, grad_check_with, GradCheckOptions, GradCheckReport, RESOLVED_GRADIENT,
};
pub use graph::{Graph, Node, NodeId, Op, Param, Tape};
pub use ops::{Activation, ConvGeometry, Mode, Padding, PoolKind};
pub use rng::RngState;
pub use scalar::{DType, Scalar};
pub use tensor::Tensor3;
