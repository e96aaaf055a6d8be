use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{build_operator, check_levels};
use crate::cutoff::CutoffFunction;
use crate::error::{Error, Result};
use crate::estimates::{change_factor, DirichletDatum, DirichletRhs, STABILITY_FACTOR};
use crate::geometry::{dist, Domain};
use crate::grid::{DiscreteField, GridSpec};
use crate::operator::{solve_dirichlet, DiscreteOperator, SolverOptions};
use crate::params::{DimensionParams, MultiIndex, Parity};

/// Largest admissible relative change of a pointwise ratio when the data
/// are multiplied by 10.
pub const SCALING_TOLERANCE: f64 = 1e-9;
/// Integrability exponent of the `L^p` consequence.
pub const LP_EXPONENT: f64 = 2.0;
/// Extra boundary weight `d^ε` of the even-dimensional `L^p` consequence.
pub const EVEN_EPSILON: f64 = 0.5;

fn one() -> f64 {
    1.0
}

/// Data term `∂^α f_α` with `f_α = amplitude · η(|x - centre| / 2 radius)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataTerm {
    pub alpha: MultiIndex,
    pub centre: Vec<f64>,
    pub radius: f64,
    #[serde(default = "one")]
    pub amplitude: f64,
}

impl DataTerm {
    pub fn value(&self, x: &[f64]) -> f64 {
        self.amplitude * CutoffFunction::new().value(dist(x, &self.centre) / (2.0 * self.radius))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirichletProblem {
    pub domain: Domain,
    pub params: DimensionParams,
    pub levels: Vec<f64>,
    /// Each data set is checked separately; they share factorizations.
    pub data_sets: Vec<Vec<DataTerm>>,
    /// Number of random evaluation points.
    pub points: usize,
    pub seed: u64,
    #[serde(default)]
    pub solver: SolverOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirichletLevel {
    pub h: f64,
    /// `sup_x |∇^λ u(x)| / dirichlet_rhs(x)` over the evaluation points.
    pub sup_ratio: f64,
    /// `max |∇^λ u|` over all nodes.
    pub sup_gradient: f64,
    /// `Σ_α ‖d^w f_α‖_p` with the weight of the parity.
    pub lp_norm: f64,
    pub lp_constant: f64,
    /// `max |ratio(10 f) / ratio(f) - 1|` over the evaluation points.
    pub scaling_deviation: f64,
    /// Every evaluation point had a positive right-hand side.
    pub positive_rhs: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirichletReport {
    pub data_set: usize,
    pub levels: Vec<DirichletLevel>,
    pub finite: bool,
    pub stable: bool,
    pub max_change: f64,
    pub scaling_ok: bool,
    pub positive_rhs: bool,
}

impl DirichletReport {
    pub fn passed(&self) -> bool {
        self.finite && self.stable && self.scaling_ok && self.positive_rhs
    }
}

fn ratio(num: f64, den: f64) -> f64 {
    if num == 0.0 && den == 0.0 {
        0.0
    } else {
        num / den
    }
}

impl DirichletProblem {
    fn validate(&self) -> Result<Vec<f64>> {
        let n = self.params.n() as usize;
        if self.domain.dim() != n {
            return Err(Error::config("domain.dim", "domain dimension differs from n"));
        }
        if self.data_sets.is_empty() {
            return Err(Error::config("data_sets", "need at least one data set"));
        }
        if self.points == 0 {
            return Err(Error::config("points", "need at least one evaluation point"));
        }
        for (s, set) in self.data_sets.iter().enumerate() {
            if set.is_empty() {
                return Err(Error::config(format!("data_sets[{s}]"), "empty data set"));
            }
            for (t, term) in set.iter().enumerate() {
                let path = format!("data_sets[{s}][{t}]");
                if term.alpha.dim() != n || term.centre.len() != n {
                    return Err(Error::config(path, "dimension differs from n"));
                }
                if term.alpha.order() > self.params.lambda() {
                    return Err(Error::config(
                        format!("{path}.alpha"),
                        format!("|α| = {} exceeds λ = {}", term.alpha.order(), self.params.lambda()),
                    ));
                }
                if !(term.radius > 0.0) {
                    return Err(Error::config(format!("{path}.radius"), "must be positive"));
                }
                let d = self.domain.distance_to_boundary(&term.centre).map_err(|e| Error::config(&path, e.to_string()))?;
                if term.radius >= d {
                    return Err(Error::config(
                        format!("{path}.radius"),
                        format!("support radius {} reaches the boundary (d = {d:.4})", term.radius),
                    ));
                }
            }
        }
        check_levels(&self.levels)
    }

    /// Boundary-distance exponent of `f_α` in the `L^p` consequence.
    fn lp_weight(&self, alpha: &MultiIndex) -> f64 {
        let lam = self.params.lambda() as f64;
        let a = alpha.order() as f64;
        match self.params.parity() {
            Parity::Odd => lam - 1.0 - a,
            Parity::Even => lam - a + EVEN_EPSILON,
        }
    }
}

struct Evaluation {
    sup_ratio: f64,
    ratios: Vec<f64>,
    sup_gradient: f64,
    positive: bool,
}

fn evaluate(
    op: &DiscreteOperator,
    problem: &DirichletProblem,
    set: &[DataTerm],
    scale: f64,
    points: &[Vec<i64>],
) -> Result<Evaluation> {
    let grid = op.grid();
    let params = problem.params;
    let lam = params.lambda();
    let fields: Vec<DiscreteField> = set
        .iter()
        .map(|t| DiscreteField::from_fn(grid.clone(), |x| scale * t.value(x)))
        .collect();
    let mut rhs = vec![0.0; grid.num_interior()];
    for (t, f) in set.iter().zip(&fields) {
        for (r, v) in rhs.iter_mut().zip(f.mixed_derivative(&t.alpha).values()) {
            *r += v;
        }
    }
    let u = solve_dirichlet(op, &DiscreteField::from_values(grid.clone(), rhs)?)?;
    let data: Vec<DirichletDatum> = set
        .iter()
        .zip(fields)
        .map(|(t, field)| DirichletDatum {
            alpha: t.alpha.clone(),
            field,
        })
        .collect();
    let bound = DirichletRhs::new(params, &data)?;
    let mut ratios = Vec::with_capacity(points.len());
    let mut positive = true;
    for idx in points {
        let lhs = u.gradient_norm_at(idx, lam);
        let r = bound.eval(&grid.coords_of(idx));
        positive &= r > 0.0;
        ratios.push(ratio(lhs, r));
    }
    let sup_gradient = (0..grid.num_interior())
        .map(|k| u.gradient_norm_at(&grid.node_index(k), lam))
        .fold(0.0, f64::max);
    Ok(Evaluation {
        sup_ratio: ratios.iter().cloned().fold(0.0, f64::max),
        ratios,
        sup_gradient,
        positive,
    })
}

fn lp_norm(problem: &DirichletProblem, set: &[DataTerm], grid: &Arc<GridSpec>) -> Result<f64> {
    let vol = grid.h().powi(grid.dim() as i32);
    let domain = grid.domain();
    let mut total = 0.0;
    for t in set {
        let w = problem.lp_weight(&t.alpha);
        let mut acc = 0.0;
        for k in 0..grid.num_interior() {
            let x = grid.node_coords(k);
            let f = t.value(&x);
            if f == 0.0 {
                continue;
            }
            let d = domain.distance_to_boundary(&x)?;
            acc += (d.powf(w) * f).abs().powf(LP_EXPONENT) * vol;
        }
        total += acc.powf(1.0 / LP_EXPONENT);
    }
    Ok(total)
}

/// For every data set: solve `(-Δ_h)^m u = Σ ∂^α f_α`, compare `|∇^λ u|`
/// with the weighted potential of the data at random points, measure the
/// `L^p` consequence, and check that scaling the data by 10 leaves the
/// ratios unchanged.
pub fn verify_dirichlet_bound(problem: &DirichletProblem) -> Result<Vec<DirichletReport>> {
    let levels = problem.validate()?;
    let lam = problem.params.lambda();
    let margin = (lam + 1) as f64 * levels[0];
    let mut rng = ChaCha8Rng::seed_from_u64(problem.seed);
    let mut points = Vec::with_capacity(problem.points);
    let mut guard = 0;
    while points.len() < problem.points {
        guard += 1;
        if guard > 1000 * problem.points {
            return Err(Error::GeometryInfeasible("could not place evaluation points".into()));
        }
        let p = problem.domain.sample_point(&mut rng);
        if problem.domain.contains(&p) && problem.domain.distance_to_boundary(&p)? >= margin {
            points.push(p);
        }
    }
    let mut per_set: Vec<Vec<DirichletLevel>> = vec![Vec::new(); problem.data_sets.len()];
    for &h in &levels {
        let op = build_operator(&problem.domain, problem.params.m(), h, &problem.solver)?;
        let grid = op.grid().clone();
        let nodes: Vec<Vec<i64>> = points.iter().map(|p| grid.snap(p)).collect();
        for (s, set) in problem.data_sets.iter().enumerate() {
            let base = evaluate(&op, problem, set, 1.0, &nodes)?;
            let big = evaluate(&op, problem, set, 10.0, &nodes)?;
            let scaling_deviation = base
                .ratios
                .iter()
                .zip(&big.ratios)
                .map(|(a, b)| if *a == 0.0 && *b == 0.0 { 0.0 } else { (b / a - 1.0).abs() })
                .fold(0.0, f64::max);
            let lp = lp_norm(problem, set, &grid)?;
            per_set[s].push(DirichletLevel {
                h,
                sup_ratio: base.sup_ratio,
                sup_gradient: base.sup_gradient,
                lp_norm: lp,
                lp_constant: ratio(base.sup_gradient, lp),
                scaling_deviation,
                positive_rhs: base.positive,
            });
        }
    }
    Ok(per_set
        .into_iter()
        .enumerate()
        .map(|(s, levels)| {
            let finite = levels
                .iter()
                .all(|l| l.sup_ratio.is_finite() && l.lp_constant.is_finite());
            let mut max_change = 1.0f64;
            for w in levels.windows(2) {
                max_change = max_change
                    .max(change_factor(w[0].sup_ratio, w[1].sup_ratio))
                    .max(change_factor(w[0].lp_constant, w[1].lp_constant));
            }
            let scaling_ok = levels.iter().all(|l| l.scaling_deviation <= SCALING_TOLERANCE);
            let nonzero = problem.data_sets[s].iter().any(|t| t.amplitude != 0.0);
            let positive_rhs = !nonzero || levels.iter().all(|l| l.positive_rhs);
            DirichletReport {
                data_set: s,
                levels,
                finite,
                stable: max_change <= STABILITY_FACTOR,
                max_change,
                scaling_ok,
                positive_rhs,
            }
        })
        .collect())
}
