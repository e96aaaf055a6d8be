use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::build_operator;
use crate::error::{Error, Result};
use crate::geometry::Domain;
use crate::operator::{discrete_green_many, SolverOptions};
use crate::params::DimensionParams;

/// Largest admissible `|G_h(x, y) - G_h(y, x)| / max |G_h|`.
pub const SYMMETRY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetryReport {
    pub h: f64,
    pub sources: usize,
    /// `max |G_h(a, b) - G_h(b, a)| / max |G_h|` over pairs of source nodes.
    pub max_asymmetry: f64,
    pub symmetric: bool,
    /// Extremes of `G_h(x, y)` over all nodes `x` and the sampled sources.
    pub min_value: f64,
    pub max_value: f64,
    pub min_at: (Vec<f64>, Vec<f64>),
    /// Whether a negative value was found; informational.
    pub negative: bool,
}

/// Solves for Green columns at random source nodes (at least `4h` inside),
/// compares `G_h(a, b)` with `G_h(b, a)` and records the sign of `G_h`.
pub fn verify_symmetry_and_sign(
    domain: &Domain,
    params: DimensionParams,
    h: f64,
    sources: usize,
    seed: u64,
    solver: &SolverOptions,
) -> Result<SymmetryReport> {
    if domain.dim() != params.n() as usize {
        return Err(Error::config("domain.dim", "domain dimension differs from n"));
    }
    if sources < 2 {
        return Err(Error::config("sources", "need at least two source points"));
    }
    let op = build_operator(domain, params.m(), h, solver)?;
    let grid = op.grid().clone();
    let eligible: Vec<usize> = (0..grid.num_interior())
        .filter(|&k| {
            domain
                .distance_to_boundary(&grid.node_coords(k))
                .is_ok_and(|d| d >= 4.0 * h)
        })
        .collect();
    if eligible.len() < sources {
        return Err(Error::GeometryInfeasible(format!(
            "only {} nodes lie 4h inside the domain",
            eligible.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked: Vec<usize> = Vec::with_capacity(sources);
    while picked.len() < sources {
        let k = eligible[rng.random_range(0..eligible.len())];
        if !picked.contains(&k) {
            picked.push(k);
        }
    }
    let ys: Vec<Vec<f64>> = picked.iter().map(|&k| grid.node_coords(k)).collect();
    let cols = discrete_green_many(&op, &ys)?;
    let mut max_abs = 0.0f64;
    let mut min_value = f64::INFINITY;
    let mut max_value = f64::NEG_INFINITY;
    let mut min_at = (Vec::new(), Vec::new());
    for (c, y) in cols.iter().zip(&ys) {
        for (k, v) in c.field.values().iter().enumerate() {
            max_abs = max_abs.max(v.abs());
            max_value = max_value.max(*v);
            if *v < min_value {
                min_value = *v;
                min_at = (grid.node_coords(k), y.clone());
            }
        }
    }
    let mut asym = 0.0f64;
    for (a, ca) in picked.iter().zip(&cols) {
        for (b, cb) in picked.iter().zip(&cols) {
            let d = (ca.field.values()[*b] - cb.field.values()[*a]).abs();
            asym = asym.max(d);
        }
    }
    let max_asymmetry = asym / max_abs;
    Ok(SymmetryReport {
        h,
        sources,
        max_asymmetry,
        symmetric: max_asymmetry <= SYMMETRY_TOLERANCE,
        min_value,
        max_value,
        min_at,
        negative: min_value < 0.0,
    })
}
