//! Right-hand sides of the pointwise Green function estimates, the
//! localized corrector `R_α` with its source, weighted Dirichlet bounds and
//! ratio statistics.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::cutoff::CutoffFunction;
use crate::error::{Error, Result};
use crate::fundamental::{decompose_log_polynomial, SingularDecomposition};
use crate::geometry::{dist, Region, SamplePair};
use crate::grid::{derivative_stencil, DiscreteField, GridSpec};
use crate::operator::{discrete_green_many, DiscreteOperator};
use crate::params::{DimensionParams, MultiIndex, Parity};
use crate::quadrature::{gauss_legendre, sphere_area};
use crate::radial::RadialExpr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BoundTarget {
    /// Odd `n`, `i + j ≥ 2m - n`.
    #[serde(rename = "Gr1", alias = "green-odd-high")]
    Gr1,
    /// Odd `n`, `i + j ≤ 2m - n`.
    #[serde(rename = "Gr2", alias = "green-odd-low")]
    Gr2,
    /// Even `n`.
    #[serde(rename = "Gr3", alias = "green-even")]
    Gr3,
    #[serde(rename = "Gr1s", alias = "regular-odd-high")]
    Gr1s,
    #[serde(rename = "Gr2s", alias = "regular-odd-low")]
    Gr2s,
    #[serde(rename = "Gr3s", alias = "regular-even")]
    Gr3s,
}

impl BoundTarget {
    pub const ALL: [BoundTarget; 6] = [
        BoundTarget::Gr1,
        BoundTarget::Gr2,
        BoundTarget::Gr3,
        BoundTarget::Gr1s,
        BoundTarget::Gr2s,
        BoundTarget::Gr3s,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            BoundTarget::Gr1 => "Gr1",
            BoundTarget::Gr2 => "Gr2",
            BoundTarget::Gr3 => "Gr3",
            BoundTarget::Gr1s => "Gr1s",
            BoundTarget::Gr2s => "Gr2s",
            BoundTarget::Gr3s => "Gr3s",
        }
    }

    /// Whether the bound concerns the regular part `S = G - Γ`.
    pub fn is_regular(&self) -> bool {
        matches!(self, BoundTarget::Gr1s | BoundTarget::Gr2s | BoundTarget::Gr3s)
    }

    pub fn parity(&self) -> Parity {
        match self {
            BoundTarget::Gr3 | BoundTarget::Gr3s => Parity::Even,
            _ => Parity::Odd,
        }
    }
}

impl fmt::Display for BoundTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// One pointwise estimate: `target` with `i` derivatives in `x` and `j` in `y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BoundSpec {
    pub target: BoundTarget,
    pub i: u32,
    pub j: u32,
}

impl BoundSpec {
    pub fn new(target: BoundTarget, i: u32, j: u32) -> Self {
        BoundSpec { target, i, j }
    }

    pub fn validate(&self, params: DimensionParams) -> Result<()> {
        let lam = params.lambda();
        let deg = params.degree();
        if self.target.parity() != params.parity() {
            return Err(Error::SpecMismatch(format!(
                "{} needs {} n, got {params}",
                self.target,
                match self.target.parity() {
                    Parity::Odd => "odd",
                    Parity::Even => "even",
                }
            )));
        }
        if self.i > lam || self.j > lam {
            return Err(Error::SpecMismatch(format!(
                "{}: (i, j) = ({}, {}) outside the range 0 ≤ i, j ≤ λ = {lam} for {params}",
                self.target, self.i, self.j
            )));
        }
        let s = (self.i + self.j) as i32;
        match self.target {
            BoundTarget::Gr1 | BoundTarget::Gr1s if s < deg => Err(Error::SpecMismatch(format!(
                "{} needs i + j ≥ 2m - n = {deg}, got {s}",
                self.target
            ))),
            BoundTarget::Gr2 | BoundTarget::Gr2s if s > deg => Err(Error::SpecMismatch(format!(
                "{} needs i + j ≤ 2m - n = {deg}, got {s}",
                self.target
            ))),
            _ => Ok(()),
        }
    }

    /// `n - 2m + i + j`.
    pub fn exponent(&self, params: DimensionParams) -> i32 {
        (self.i + self.j) as i32 - params.degree()
    }

    /// The same estimate with the roles of `x` and `y` exchanged.
    pub fn swapped(&self) -> BoundSpec {
        BoundSpec::new(self.target, self.j, self.i)
    }

    pub fn label(&self) -> String {
        format!("{}_i{}_j{}", self.target, self.i, self.j)
    }

    /// Every valid spec of the Green (`regular = false`) or regular-part
    /// family with `i, j ≤ max_order`.
    pub fn admissible(params: DimensionParams, regular: bool, max_order: u32) -> Vec<BoundSpec> {
        let mut out = Vec::new();
        for target in BoundTarget::ALL {
            if target.is_regular() != regular {
                continue;
            }
            for i in 0..=max_order {
                for j in 0..=max_order {
                    let s = BoundSpec::new(target, i, j);
                    if s.validate(params).is_ok() {
                        out.push(s);
                    }
                }
            }
        }
        out
    }
}

impl fmt::Display for BoundSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(i={}, j={})", self.target, self.i, self.j)
    }
}

fn check_pair(pair: &SamplePair) -> Result<()> {
    if !(pair.sep > 0.0) {
        return Err(Error::CoincidentPoints);
    }
    Ok(())
}

/// `min{1, (d_x/sep)^{λ-i}, (d_y/sep)^{λ-j}}`.
fn boundary_prefactor(lam: u32, spec: &BoundSpec, pair: &SamplePair) -> f64 {
    let a = (pair.d_x / pair.sep).powi(lam as i32 - spec.i as i32);
    let b = (pair.d_y / pair.sep).powi(lam as i32 - spec.j as i32);
    1f64.min(a).min(b)
}

/// `sep^{-e} min{sep/d_x, sep/d_y, 1}^e`.
fn near_boundary_power(e: i32, pair: &SamplePair) -> f64 {
    let t = (pair.sep / pair.d_x).min(pair.sep / pair.d_y).min(1.0);
    pair.sep.powi(-e) * t.powi(e)
}

/// Right-hand side of the Green function bound for `|∇_x^i ∇_y^j G(x, y)|`,
/// with constant 1.
pub fn bound_rhs_green(spec: &BoundSpec, params: DimensionParams, pair: &SamplePair) -> Result<f64> {
    spec.validate(params)?;
    if spec.target.is_regular() {
        return Err(Error::SpecMismatch(format!("{} bounds the regular part", spec.target)));
    }
    check_pair(pair)?;
    let e = spec.exponent(params);
    let pre = boundary_prefactor(params.lambda(), spec, pair);
    Ok(match spec.target {
        BoundTarget::Gr1 => pre * pair.sep.powi(-e),
        BoundTarget::Gr2 => pre * near_boundary_power(e, pair),
        _ => {
            let dmin = pair.d_x.min(pair.d_y);
            pre * near_boundary_power(e, pair) * (1.0 + dmin / pair.sep).ln()
        }
    })
}

/// Right-hand side of the regular-part bound for `|∇_x^i ∇_y^j S(x, y)|`,
/// with constant 1.
pub fn bound_rhs_regular(
    spec: &BoundSpec,
    params: DimensionParams,
    pair: &SamplePair,
    diam: f64,
) -> Result<f64> {
    spec.validate(params)?;
    if !spec.target.is_regular() {
        return Err(Error::SpecMismatch(format!("{} bounds the Green function", spec.target)));
    }
    check_pair(pair)?;
    if !(diam > 0.0) {
        return Err(Error::GeometryInfeasible(format!("diameter {diam}")));
    }
    let e = spec.exponent(params);
    let big = pair.d_x.max(pair.d_y).max(pair.sep);
    Ok(match spec.target {
        BoundTarget::Gr1s => big.powi(-e),
        BoundTarget::Gr2s => near_boundary_power(e, pair),
        _ => near_boundary_power(e, pair) * (1.0 + diam / big).ln(),
    })
}

/// Estimate right-hand side for either family.
pub fn bound_rhs(spec: &BoundSpec, params: DimensionParams, pair: &SamplePair, diam: f64) -> Result<f64> {
    if spec.target.is_regular() {
        bound_rhs_regular(spec, params, pair, diam)
    } else {
        bound_rhs_green(spec, params, pair)
    }
}

/// Snaps `y` to its lattice node and checks the corrector's distance rule.
fn corrector_node(grid: &GridSpec, y: &[f64]) -> Result<(Vec<i64>, Vec<f64>, f64)> {
    let (k, _) = grid.snap_interior(y)?;
    let idx = grid.node_index(k);
    let c = grid.coords_of(&idx);
    let d = grid.domain().distance_to_boundary(&c)?;
    let need = 16.0 * grid.h();
    if d < need {
        return Err(Error::TooCloseToBoundary {
            point: y.to_vec(),
            distance: d,
            required: need,
        });
    }
    Ok((idx, c, d))
}

fn check_alpha(params: DimensionParams, alpha: &MultiIndex) -> Result<()> {
    if alpha.dim() != params.n() as usize {
        return Err(Error::GridMismatch);
    }
    if alpha.order() > params.lambda() {
        return Err(Error::SpecMismatch(format!(
            "|α| = {} exceeds λ = {} for {params}",
            alpha.order(),
            params.lambda()
        )));
    }
    Ok(())
}

/// Columns `G_h(·, y)` for the given source nodes, solved in one batch.
pub fn green_columns(op: &DiscreteOperator, nodes: &[Vec<i64>]) -> Result<HashMap<Vec<i64>, Vec<f64>>> {
    let grid = op.grid();
    let ys: Vec<Vec<f64>> = nodes.iter().map(|i| grid.coords_of(i)).collect();
    let cols = discrete_green_many(op, &ys)?;
    Ok(nodes
        .iter()
        .cloned()
        .zip(cols.into_iter().map(|c| c.field.into_values()))
        .collect())
}

/// `∂_y^α G_h(·, y)` by centered differencing over source nodes around the
/// lattice node `y`.
pub fn source_derivative(op: &DiscreteOperator, y: &[i64], alpha: &MultiIndex) -> Result<DiscreteField> {
    let grid = op.grid();
    let stencil = derivative_stencil(alpha.components(), grid.h());
    let nodes: Vec<Vec<i64>> = stencil
        .iter()
        .map(|(off, _)| y.iter().zip(off).map(|(a, b)| a + b).collect())
        .collect();
    let cols = green_columns(op, &nodes)?;
    let mut values = vec![0.0; grid.num_interior()];
    for ((_, w), node) in stencil.iter().zip(&nodes) {
        for (v, g) in values.iter_mut().zip(&cols[node]) {
            *v += w * g;
        }
    }
    DiscreteField::from_values(grid.clone(), values)
}

/// Discrete corrector
/// `R_α(·, y) = ∂_y^α G_h(·, y) - η(|x-y|/d(y)) (P^α log(d(y)/|x-y|) + Q^α)`.
/// `y` is snapped to the nearest node; at the source node itself the value
/// is the mean of the `2n` axis neighbours.
pub fn corrector_field(
    op: &DiscreteOperator,
    params: DimensionParams,
    alpha: &MultiIndex,
    y: &[f64],
    cutoff: &CutoffFunction,
) -> Result<DiscreteField> {
    check_alpha(params, alpha)?;
    let grid = op.grid().clone();
    if grid.dim() != params.n() as usize || op.m() != params.m() {
        return Err(Error::GridMismatch);
    }
    let (idx, yc, d) = corrector_node(&grid, y)?;
    let mut field = source_derivative(op, &idx, alpha)?;
    let dec = decompose_log_polynomial(params, alpha, grid.domain().diameter())?;
    let values = field.values_mut();
    let mut at_source = None;
    for (k, v) in values.iter_mut().enumerate() {
        let x = grid.node_coords(k);
        let z: Vec<f64> = x.iter().zip(&yc).map(|(a, b)| a - b).collect();
        let r = dist(&x, &yc);
        if r == 0.0 {
            at_source = Some(k);
            continue;
        }
        let eta = cutoff.value(r / d);
        if eta != 0.0 {
            *v -= eta * dec.eval_with_scale(&z, d);
        }
    }
    if let Some(k) = at_source {
        let c = grid.node_index(k);
        let mut acc = 0.0;
        let mut cnt = 0.0;
        for axis in 0..grid.dim() {
            for s in [-1, 1] {
                let mut j = c.clone();
                j[axis] += s;
                if let Some(q) = grid.interior_index(&j) {
                    acc += values[q];
                    cnt += 1.0;
                }
            }
        }
        values[k] = acc / cnt;
    }
    Ok(field)
}

/// The corrector source `f_α = (-Δ_x)^m R_α(·, y)`: away from `y` it is the
/// commutator `-[(-Δ)^m, η] (P^α log(d/|z|) + Q^α)`, i.e. every term of
/// `(-Δ)^m (η S)` in which `η` is differentiated at least once.
#[derive(Debug, Clone)]
pub struct CorrectorSource {
    expr: RadialExpr,
    y: Vec<f64>,
    d: f64,
}

impl CorrectorSource {
    /// Source for a centre `y` at boundary distance `d`.
    pub fn new(params: DimensionParams, alpha: &MultiIndex, y: &[f64], d: f64, diam: f64) -> Result<Self> {
        check_alpha(params, alpha)?;
        if y.len() != params.n() as usize {
            return Err(Error::GridMismatch);
        }
        let dec: SingularDecomposition = decompose_log_polynomial(params, alpha, diam)?;
        let eta = RadialExpr::profile(params.n() as usize);
        let expr = eta.mul(&dec.singular_expr(d)).neg_laplacian_pow(params.m()).scale(-1.0);
        Ok(CorrectorSource {
            expr,
            y: y.to_vec(),
            d,
        })
    }

    pub fn centre(&self) -> &[f64] {
        &self.y
    }

    pub fn scale(&self) -> f64 {
        self.d
    }

    pub fn value(&self, x: &[f64], cutoff: &CutoffFunction) -> f64 {
        let z: Vec<f64> = x.iter().zip(&self.y).map(|(a, b)| a - b).collect();
        let r = dist(x, &self.y);
        if r <= CutoffFunction::INNER * self.d || r >= CutoffFunction::OUTER * self.d {
            return 0.0;
        }
        let d = self.d;
        let profile = |j: u8, r: f64| {
            if j == 0 {
                0.0
            } else {
                cutoff.scaled_derivative(j as usize, r, d)
            }
        };
        self.expr.eval_with(&z, &profile).0
    }
}

/// `f_α(·, y)` sampled on the grid, with `y` snapped as in
/// [`corrector_field`].
pub fn corrector_source(
    params: DimensionParams,
    alpha: &MultiIndex,
    y: &[f64],
    grid: &Arc<GridSpec>,
    cutoff: &CutoffFunction,
) -> Result<DiscreteField> {
    if grid.dim() != params.n() as usize {
        return Err(Error::GridMismatch);
    }
    let (_, yc, d) = corrector_node(grid, y)?;
    let src = CorrectorSource::new(params, alpha, &yc, d, grid.domain().diameter())?;
    Ok(DiscreteField::from_fn(grid.clone(), |x| src.value(x, cutoff)))
}

/// Data term `∂^α f_α` of a Dirichlet problem.
#[derive(Debug, Clone)]
pub struct DirichletDatum {
    pub alpha: MultiIndex,
    pub field: DiscreteField,
}

fn kernel(parity: Parity, r: f64, d: f64) -> f64 {
    match parity {
        Parity::Odd => 1.0 / r,
        Parity::Even => (1.0 + d / r).ln(),
    }
}

/// `∫ K(|z|) dz` over the cube of side `h` centred at the singularity.
fn centred_cell_integral(parity: Parity, n: usize, h: f64, d: f64) -> f64 {
    match (parity, n) {
        (Parity::Odd, 3) => {
            let s3 = 3f64.sqrt();
            h * h * (3.0 * ((s3 + 1.0) / (s3 - 1.0)).ln() - std::f64::consts::FRAC_PI_2)
        }
        (Parity::Odd, 2) => 4.0 * h * (1.0 + 2f64.sqrt()).ln(),
        (Parity::Even, 2) => {
            // 8 ∫_0^{π/4} F(h / (2 cos θ)) dθ with F(R) = ∫_0^R r log(1 + d/r) dr
            let f = |big: f64| {
                (big * big - d * d) / 2.0 * (big + d).ln() + d * big / 2.0 + d * d / 2.0 * d.ln()
                    - big * big / 2.0 * big.ln()
            };
            let (t, w) = gauss_legendre(24);
            let half = std::f64::consts::FRAC_PI_8;
            8.0 * t
                .iter()
                .zip(&w)
                .map(|(ti, wi)| wi * half * f(h / (2.0 * (half * (ti + 1.0)).cos())))
                .sum::<f64>()
        }
        _ => {
            // inscribed ball exactly, corners by a 6^n midpoint rule
            let a = h / 2.0;
            let radial = match parity {
                Parity::Odd => a.powi(n as i32 - 1) / (n as f64 - 1.0),
                Parity::Even => {
                    let (t, w) = gauss_legendre(24);
                    t.iter()
                        .zip(&w)
                        .map(|(ti, wi)| {
                            let r = a * (ti + 1.0) / 2.0;
                            wi * a / 2.0 * (1.0 + d / r).ln() * r.powi(n as i32 - 1)
                        })
                        .sum()
                }
            };
            let mut total = sphere_area(n as u32) * radial;
            let sub = 6usize;
            let hs = h / sub as f64;
            let cells = sub.pow(n as u32);
            for c in 0..cells {
                let mut rem = c;
                let mut r2 = 0.0;
                for _ in 0..n {
                    let k = rem % sub;
                    rem /= sub;
                    let z = -a + (k as f64 + 0.5) * hs;
                    r2 += z * z;
                }
                let r = r2.sqrt();
                if r > a {
                    total += kernel(parity, r, d) * hs.powi(n as i32);
                }
            }
            total
        }
    }
}

/// Precomputed weighted data for repeated evaluation of the Dirichlet bound
/// `Σ_α ∫ d(y)^{λ-|α|} |f_α(y)| K(x, y) dy` with `K = 1/|x-y|` (odd `n`) or
/// `log(1 + d(y)/|x-y|)` (even `n`).
#[derive(Debug, Clone)]
pub struct DirichletRhs {
    grid: Arc<GridSpec>,
    parity: Parity,
    /// `(node coordinates, d(y), weight)` for nodes with nonzero data.
    nodes: Vec<(Vec<f64>, f64, f64)>,
}

impl DirichletRhs {
    pub fn new(params: DimensionParams, data: &[DirichletDatum]) -> Result<Self> {
        let first = data.first().ok_or(Error::EmptyInput)?;
        let grid = first.field.grid().clone();
        if grid.dim() != params.n() as usize {
            return Err(Error::GridMismatch);
        }
        for datum in data {
            check_alpha(params, &datum.alpha)?;
            if !datum.field.grid().same_as(&grid) {
                return Err(Error::GridMismatch);
            }
        }
        let lam = params.lambda() as i32;
        let domain = grid.domain();
        let mut nodes = Vec::new();
        for k in 0..grid.num_interior() {
            if data.iter().all(|dt| dt.field.values()[k] == 0.0) {
                continue;
            }
            let y = grid.node_coords(k);
            let d = domain.distance_to_boundary(&y)?;
            let w: f64 = data
                .iter()
                .map(|dt| d.powi(lam - dt.alpha.order() as i32) * dt.field.values()[k].abs())
                .sum();
            nodes.push((y, d, w));
        }
        Ok(DirichletRhs {
            grid,
            parity: params.parity(),
            nodes,
        })
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let h = self.grid.h();
        let n = self.grid.dim();
        let vol = h.powi(n as i32);
        let mut total = 0.0;
        for (y, d, w) in &self.nodes {
            let offset: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
            let inside = offset.iter().all(|o| o.abs() <= 0.5 * h);
            let r = dist(x, y);
            if !inside {
                total += w * kernel(self.parity, r, *d) * vol;
            } else if r <= 1e-9 * h {
                total += w * centred_cell_integral(self.parity, n, h, *d);
            } else {
                // host cell with an off-centre singularity: 8^n midpoint rule
                let sub = 8usize;
                let hs = h / sub as f64;
                let mut acc = 0.0;
                for c in 0..sub.pow(n as u32) {
                    let mut rem = c;
                    let mut r2 = 0.0;
                    for o in &offset {
                        let k = rem % sub;
                        rem /= sub;
                        let z = -0.5 * h + (k as f64 + 0.5) * hs - o;
                        r2 += z * z;
                    }
                    let rr = r2.sqrt().max(1e-3 * hs);
                    acc += kernel(self.parity, rr, *d);
                }
                total += w * acc * hs.powi(n as i32);
            }
        }
        total
    }
}

/// One-shot Dirichlet bound at `x`; all-zero data give 0.
pub fn dirichlet_rhs(params: DimensionParams, x: &[f64], data: &[DirichletDatum]) -> Result<f64> {
    if data.is_empty() {
        return Ok(0.0);
    }
    Ok(DirichletRhs::new(params, data)?.eval(x))
}

/// One row of an estimate check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateRecord {
    pub pair: SamplePair,
    pub region: Region,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
}

impl EstimateRecord {
    pub fn new(pair: SamplePair, region: Region, lhs: f64, rhs: f64) -> Self {
        EstimateRecord {
            pair,
            region,
            lhs,
            rhs,
            ratio: lhs / rhs,
        }
    }
}

/// Records and sup ratios at one mesh width.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateLevel {
    pub h: f64,
    pub records: Vec<EstimateRecord>,
    pub sup_by_region: BTreeMap<Region, f64>,
    pub sup: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub name: String,
    pub levels: Vec<EstimateLevel>,
    /// Every sup ratio finite and every record's RHS positive.
    pub finite: bool,
    /// Sup ratios (overall and per populated region) change by at most a
    /// factor 2 between consecutive levels.
    pub stable: bool,
    /// Largest factor observed between consecutive levels.
    pub max_change: f64,
}

impl EstimateReport {
    /// Measured constant: the sup ratio at the finest level.
    pub fn constant(&self) -> f64 {
        self.levels.last().map_or(f64::NAN, |l| l.sup)
    }

    pub fn passed(&self) -> bool {
        self.finite && self.stable
    }
}

/// Allowed change of a sup ratio between consecutive levels.
pub const STABILITY_FACTOR: f64 = 2.0;

pub fn change_factor(a: f64, b: f64) -> f64 {
    if a == b {
        1.0
    } else if a == 0.0 || b == 0.0 {
        f64::INFINITY
    } else {
        (a / b).max(b / a)
    }
}

/// Sup ratios per region and overall at each level, and the stability flag
/// across consecutive levels.
pub fn ratio_statistics(name: &str, levels: Vec<(f64, Vec<EstimateRecord>)>) -> Result<EstimateReport> {
    if levels.is_empty() || levels.iter().any(|(_, r)| r.is_empty()) {
        return Err(Error::EmptyInput);
    }
    let mut finite = true;
    let mut out = Vec::with_capacity(levels.len());
    for (h, records) in levels {
        let mut sup_by_region = BTreeMap::new();
        let mut sup = 0.0f64;
        for r in &records {
            if !(r.rhs > 0.0) || !r.ratio.is_finite() {
                finite = false;
            }
            let e = sup_by_region.entry(r.region).or_insert(0.0f64);
            *e = e.max(r.ratio);
            sup = sup.max(r.ratio);
        }
        if !sup.is_finite() {
            finite = false;
        }
        out.push(EstimateLevel {
            h,
            records,
            sup_by_region,
            sup,
        });
    }
    let mut max_change = 1.0f64;
    for w in out.windows(2) {
        max_change = max_change.max(change_factor(w[0].sup, w[1].sup));
        for (region, a) in &w[0].sup_by_region {
            if let Some(b) = w[1].sup_by_region.get(region) {
                max_change = max_change.max(change_factor(*a, *b));
            }
        }
    }
    Ok(EstimateReport {
        name: name.to_string(),
        levels: out,
        finite,
        stable: max_change <= STABILITY_FACTOR,
        max_change,
    })
}
