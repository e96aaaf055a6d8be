//! End-to-end verification runs: pointwise Green function and regular-part
//! estimates, the sharpness counterexample, decay near and away from an
//! exterior point, weighted Dirichlet bounds, Hardy's inequality, and the
//! symmetry and sign of discrete Green functions.

mod counterexample;
mod decay;
mod dirichlet;
mod hardy;
mod pointwise;
mod symmetry;

pub use counterexample::{verify_counterexample, CounterexampleReport};
pub use decay::{
    decay_sources, verify_decay, verify_decay_at_infinity, verify_interior_decay, DecayConfig,
    DecayLevel, DecayReport,
};
pub use dirichlet::{verify_dirichlet_bound, DataTerm, DirichletLevel, DirichletProblem, DirichletReport};
pub use hardy::{random_bump_field, verify_hardy, BumpSum, HardyReport};
pub use pointwise::{
    estimate_level, verify_estimates, verify_green_estimates, verify_regular_part, EstimateRun,
    LhsSource, VerificationRun,
};
pub use symmetry::{verify_symmetry_and_sign, SymmetryReport, SYMMETRY_TOLERANCE};

use std::sync::Arc;

use crate::error::Result;
use crate::geometry::Domain;
use crate::grid::GridSpec;
use crate::operator::{assemble_operator_with, DiscreteOperator, SolverOptions};

/// Grid and operator of order `m` at mesh width `h`.
pub fn build_operator(domain: &Domain, m: u32, h: f64, solver: &SolverOptions) -> Result<DiscreteOperator> {
    let grid = Arc::new(GridSpec::for_order(domain, h, m, solver.max_nodes)?);
    assemble_operator_with(domain, m, grid, solver)
}

/// Levels sorted from coarse to fine; rejects fewer than two or
/// non-positive widths.
pub(crate) fn check_levels(levels: &[f64]) -> Result<Vec<f64>> {
    if levels.len() < 2 {
        return Err(crate::Error::config(
            "levels",
            format!("need at least two grid levels, got {}", levels.len()),
        ));
    }
    if levels.iter().any(|h| !(*h > 0.0 && h.is_finite())) {
        return Err(crate::Error::config("levels", "mesh widths must be positive"));
    }
    let mut out = levels.to_vec();
    out.sort_by(|a, b| b.total_cmp(a));
    out.dedup();
    if out.len() < 2 {
        return Err(crate::Error::config("levels", "need two distinct mesh widths"));
    }
    Ok(out)
}
