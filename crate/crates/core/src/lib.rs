//! Sleep-arousal detection with fully convolutional 1D networks.
//!
//! The crate covers the whole desk-scale pipeline: polysomnography
//! preprocessing ([`prep`]), a small reverse-mode layer engine ([`nn`]), the
//! five reference architectures and their ensemble ([`models`]), the training
//! procedure ([`train`]), gross AUPRC/AUROC scoring ([`metrics`]) and the file
//! formats, synthetic data generator and CLI glue ([`io`], [`cli`]).

pub mod cli;
pub mod error;
pub mod io;
pub mod metrics;
pub mod models;
pub mod nn;
pub mod prep;
pub mod train;
pub(crate) mod util;

pub use error::{Error, Result};
