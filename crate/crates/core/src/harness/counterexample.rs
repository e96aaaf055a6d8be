use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::cutoff::CutoffFunction;
use crate::error::{Error, Result};
use crate::estimates::{change_factor, STABILITY_FACTOR};
use crate::fundamental::FundamentalSolution;
use crate::geometry::{Domain, Shape};
use crate::grid::{DiscreteField, GridSpec};
use crate::params::{DimensionParams, MultiIndex, Parity};
use crate::quadrature::sphere_rule;
use crate::radial::RadialExpr;

/// Allowed relative spread of `sup |∇^λ u|` over the shrinking spheres.
pub const BOUNDED_VARIATION: f64 = 0.10;
/// Accepted range for the fitted growth exponent of `sup |∇^{λ+1} u|`.
pub const GROWTH_EXPONENT: (f64, f64) = (-1.2, -0.8);
/// Smallest normalized jump of `∇^λ u` between two rays.
pub const MIN_GAP: f64 = 0.1;
/// Relative size, against the sum of absolute terms, below which
/// `(-Δ)^m u` counts as zero.
pub const SOURCE_CANCELLATION: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleReport {
    pub m: u32,
    pub n: u32,
    pub lambda: u32,
    /// Sphere radii `2^{-k}`.
    pub radii: Vec<f64>,
    pub sup_lambda: Vec<f64>,
    /// `(max - min) / max` of `sup_lambda`.
    pub variation: f64,
    pub bounded: bool,
    pub sup_next: Vec<f64>,
    /// Least-squares slope of `log sup |∇^{λ+1} u|` against `log r`.
    pub exponent: f64,
    pub unbounded: bool,
    /// `min_r |∇^λ u(r e_1) - ∇^λ u(r e_2)| / sup |∇^λ u|`.
    pub gap: f64,
    pub no_limit: bool,
    /// Largest `|(-Δ)^m u|` relative to its term magnitude inside `|x| < 1/4`.
    pub source_inner: f64,
    /// Largest `|(-Δ)^m u|` for `|x| > 1/2`.
    pub source_outer: f64,
    /// Largest `|(-Δ)^m u|` on the annulus `1/4 < |x| < 1/2`.
    pub source_annulus: f64,
    pub supported: bool,
    /// `(h, ‖∇^m u‖_{L²})` on the requested grids.
    pub energy: Vec<(f64, f64)>,
    pub energy_stable: Option<bool>,
}

impl CounterexampleReport {
    pub fn passed(&self) -> bool {
        self.bounded && self.unbounded && self.no_limit && self.supported && self.energy_stable != Some(false)
    }
}

/// Field derivatives of `u = η(|x|) ∂_1^{λ-1} Γ` for odd `n`, which is
/// `m`-harmonic near the origin, has bounded `∇^λ u` without a limit at the
/// origin and unbounded `∇^{λ+1} u`.
struct Counterexample {
    dim: usize,
    u: RadialExpr,
    cutoff: CutoffFunction,
}

impl Counterexample {
    fn new(params: DimensionParams) -> Self {
        let dim = params.n() as usize;
        let gamma = FundamentalSolution::new(params, 2.0);
        let k = params.lambda() - 1;
        let singular = gamma.derivative_expr(&MultiIndex::axis(dim, 0, k));
        Counterexample {
            dim,
            u: RadialExpr::profile(dim).mul(&singular),
            cutoff: CutoffFunction::new(),
        }
    }

    fn eval(&self, e: &RadialExpr, x: &[f64]) -> (f64, f64) {
        let c = self.cutoff;
        e.eval_with(x, &|j, r| c.derivatives(r)[j as usize])
    }

    /// `∂^α u` for every `|α| = order`, with the multiplicities of the
    /// Frobenius norm.
    fn tensor_exprs(&self, order: u32) -> Vec<(f64, RadialExpr)> {
        MultiIndex::all_of_order(self.dim, order)
            .into_iter()
            .map(|a| (a.multiplicity(), self.u.derivative_multi(a.components())))
            .collect()
    }

    fn tensor(&self, exprs: &[(f64, RadialExpr)], x: &[f64]) -> Vec<f64> {
        exprs.iter().map(|(w, e)| w.sqrt() * self.eval(e, x).0).collect()
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn scaled(omega: &[f64], r: f64) -> Vec<f64> {
    omega.iter().map(|w| w * r).collect()
}

/// Checks the sharpness example on spheres `|x| = 2^{-k}`, `k = 2..=12`,
/// evaluating derivatives symbolically, and its energy norm on ball grids
/// with the given mesh widths (may be empty).
pub fn verify_counterexample(m: u32, n: u32, energy_levels: &[f64]) -> Result<CounterexampleReport> {
    let params = DimensionParams::new(m, n)?;
    if params.parity() != Parity::Odd {
        return Err(Error::InvalidParity(format!("the counterexample needs odd n, got n = {n}")));
    }
    if n < 3 || n + 1 > 2 * m {
        return Err(Error::DimensionOutOfRange { m, n });
    }
    let lam = params.lambda();
    let cx = Counterexample::new(params);
    let dim = n as usize;
    let top = cx.tensor_exprs(lam);
    let next = cx.tensor_exprs(lam + 1);
    let rule = sphere_rule(dim, 8);
    let mut directions: Vec<Vec<f64>> = rule.into_iter().map(|(p, _)| p).collect();
    for axis in 0..dim {
        for s in [-1.0, 1.0] {
            let mut e = vec![0.0; dim];
            e[axis] = s;
            directions.push(e);
        }
    }
    let e1 = &directions[directions.len() - 2 * dim + 1];
    let e2 = &directions[directions.len() - 2 * dim + 3];

    let radii: Vec<f64> = (2..=12).map(|k| 0.5f64.powi(k)).collect();
    let mut sup_lambda = Vec::new();
    let mut sup_next = Vec::new();
    let mut gap = f64::INFINITY;
    for &r in &radii {
        let mut a = 0.0f64;
        let mut b = 0.0f64;
        for w in &directions {
            let x = scaled(w, r);
            a = a.max(norm(&cx.tensor(&top, &x)));
            b = b.max(norm(&cx.tensor(&next, &x)));
        }
        let t1 = cx.tensor(&top, &scaled(e1, r));
        let t2 = cx.tensor(&top, &scaled(e2, r));
        let diff: Vec<f64> = t1.iter().zip(&t2).map(|(p, q)| p - q).collect();
        gap = gap.min(norm(&diff) / a);
        sup_lambda.push(a);
        sup_next.push(b);
    }
    let hi = sup_lambda.iter().cloned().fold(0.0f64, f64::max);
    let lo = sup_lambda.iter().cloned().fold(f64::INFINITY, f64::min);
    let variation = (hi - lo) / hi;

    let lx: Vec<f64> = radii.iter().map(|r| r.ln()).collect();
    let ly: Vec<f64> = sup_next.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / lx.len() as f64;
    let my = ly.iter().sum::<f64>() / ly.len() as f64;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    let exponent = sxy / sxx;

    let source = cx.u.neg_laplacian_pow(m);
    let mut source_inner = 0.0f64;
    let mut source_outer = 0.0f64;
    let mut source_annulus = 0.0f64;
    let inner_radii: Vec<f64> = (3..=12).map(|k| 0.5f64.powi(k)).chain([0.2, 0.249]).collect();
    let annulus_radii = [0.26, 0.3, 0.35, 0.4, 0.45, 0.49];
    let outer_radii = [0.501, 0.6, 0.8, 1.0];
    for w in &directions {
        for &r in &inner_radii {
            let (v, mag) = cx.eval(&source, &scaled(w, r));
            if mag > 0.0 {
                source_inner = source_inner.max(v.abs() / mag);
            }
        }
        for &r in &annulus_radii {
            source_annulus = source_annulus.max(cx.eval(&source, &scaled(w, r)).0.abs());
        }
        for &r in &outer_radii {
            source_outer = source_outer.max(cx.eval(&source, &scaled(w, r)).0.abs());
        }
    }
    let supported = source_inner <= SOURCE_CANCELLATION && source_outer == 0.0 && source_annulus > 0.0;

    let mut energy = Vec::new();
    let ball = Domain::new(Shape::Ball { radius: 0.6 }, dim)?;
    for &h in energy_levels {
        let grid = Arc::new(GridSpec::new(&ball, h, m as usize)?);
        let u = DiscreteField::from_fn(grid, |x| {
            if x.iter().all(|v| *v == 0.0) {
                0.0
            } else {
                cx.eval(&cx.u, x).0
            }
        });
        energy.push((h, u.energy_norm(m)));
    }
    let energy_stable = if energy.len() >= 2 {
        Some(
            energy.iter().all(|(_, e)| e.is_finite() && *e > 0.0)
                && energy.windows(2).all(|w| change_factor(w[0].1, w[1].1) <= STABILITY_FACTOR),
        )
    } else {
        None
    };

    Ok(CounterexampleReport {
        m,
        n,
        lambda: lam,
        radii,
        variation,
        bounded: variation <= BOUNDED_VARIATION,
        sup_lambda,
        unbounded: exponent >= GROWTH_EXPONENT.0 && exponent <= GROWTH_EXPONENT.1,
        exponent,
        sup_next,
        no_limit: gap >= MIN_GAP,
        gap,
        source_inner,
        source_outer,
        source_annulus,
        supported,
        energy,
        energy_stable,
    })
}
