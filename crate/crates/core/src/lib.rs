//! Polyharmonic Green functions on bounded domains: fundamental solutions,
//! clamped finite-difference solvers, closed-form ball oracles, and the
//! machinery for checking pointwise Green function estimates numerically.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ball;
pub mod config;
pub mod cutoff;
pub mod error;
pub mod estimates;
pub mod fundamental;
pub mod geometry;
pub mod grid;
pub mod harness;
pub mod operator;
pub mod params;
pub mod quadrature;
pub mod radial;
pub mod report;

pub use cutoff::CutoffFunction;
pub use error::{Error, Result};
pub use fundamental::{
    cmn_constant, decompose_log_polynomial, distributional_pairing, gamma_derivative, gamma_eval,
    radial_kernel_pairing,
    BumpTestFunction, FundamentalSolution, SingularDecomposition,
};
pub use params::{lambda, DimensionParams, MultiIndex, Parity};
pub use radial::RadialExpr;
