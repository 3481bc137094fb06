//! Dual-stream phone recognition toolkit.
//!
//! Mirrors a complete recognizer pair: an acoustic system trained on
//! MFCC features and a "neural" system trained on multichannel
//! high-gamma envelope features, sharing GMM/HMM and hybrid DNN/HMM
//! back-ends, optional-silence training lattices, biphone-LM decoding and
//! a Monte Carlo cross-validation harness. A synthetic corpus generator
//! makes every stage testable without restricted recordings.

// `!(x > 0.0)`-style guards must also reject NaN, and the numeric kernels
// index flat buffers on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]
#![allow(clippy::manual_is_multiple_of)]

pub mod acoustic;
pub mod config;
pub mod container;
pub mod corpus;
pub mod dnn;
pub mod error;
pub mod eval;
pub mod feat;
pub mod harness;
pub mod hmm;
pub mod lattice;
pub mod linalg;
pub mod neural;
pub mod synth;

pub use error::{Error, Result};
