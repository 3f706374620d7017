//! Numerical mountain-pass solver for radial quasilinear Schrödinger
//! standing waves with a truncated (annulus-localised) nonlinearity.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cli;
pub mod config;
pub mod discretize;
pub mod error;
pub mod linalg;
pub mod mpsolver;
pub mod problem;
pub mod transform;

pub use error::{Error, Result};
