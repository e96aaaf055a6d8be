use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{build_operator, check_levels};
use crate::ball::BallOracle;
use crate::error::{Error, Result};
use crate::estimates::{bound_rhs, green_columns, ratio_statistics, BoundSpec, EstimateRecord, EstimateReport};
use crate::fundamental::FundamentalSolution;
use crate::geometry::{sample_pairs, Region, RegionClassifier, SamplePair, SamplePlan};
use crate::geometry::Domain;
use crate::grid::{derivative_stencil, GridSpec};
use crate::operator::{DiscreteOperator, SolverOptions};
use crate::params::{DimensionParams, MultiIndex};

/// Upper bound on Green columns held in memory at once.
const COLUMN_BATCH: usize = 48;

fn default_exclusion() -> f64 {
    8.0
}

/// A pointwise-estimate run: pairs are sampled once and re-snapped at each
/// mesh width.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationRun {
    pub domain: Domain,
    pub params: DimensionParams,
    pub levels: Vec<f64>,
    pub plan: SamplePlan,
    /// Empty means every admissible spec with `i, j ≤ λ`.
    #[serde(default)]
    pub specs: Vec<BoundSpec>,
    #[serde(default)]
    pub solver: SolverOptions,
    /// Pairs closer than `exclusion · h_coarse` to each other or to the
    /// boundary are not sampled.
    #[serde(default = "default_exclusion")]
    pub exclusion: f64,
}

impl VerificationRun {
    pub fn new(domain: Domain, params: DimensionParams, levels: Vec<f64>, plan: SamplePlan, specs: Vec<BoundSpec>) -> Self {
        VerificationRun {
            domain,
            params,
            levels,
            plan,
            specs,
            solver: SolverOptions::default(),
            exclusion: default_exclusion(),
        }
    }

    /// Checks the run and returns its levels from coarse to fine.
    pub fn validate(&self) -> Result<Vec<f64>> {
        if self.domain.dim() != self.params.n() as usize {
            return Err(Error::config(
                "domain.dim",
                format!("domain dimension {} differs from n = {}", self.domain.dim(), self.params.n()),
            ));
        }
        for (k, s) in self.specs.iter().enumerate() {
            s.validate(self.params)
                .map_err(|e| Error::config(format!("specs[{k}]"), e.to_string()))?;
        }
        if self.plan.count == 0 {
            return Err(Error::config("plan.count", "need at least one pair"));
        }
        if !(self.exclusion >= 0.0 && self.exclusion.is_finite()) {
            return Err(Error::config("exclusion", "must be a non-negative number"));
        }
        check_levels(&self.levels)
    }

    fn specs_or_default(&self, regular: Option<bool>) -> Vec<BoundSpec> {
        if !self.specs.is_empty() {
            return self.specs.clone();
        }
        let lam = self.params.lambda();
        match regular {
            Some(r) => BoundSpec::admissible(self.params, r, lam),
            None => {
                let mut all = BoundSpec::admissible(self.params, false, lam);
                all.extend(BoundSpec::admissible(self.params, true, lam));
                all
            }
        }
    }
}

/// Where the left-hand side values come from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LhsSource {
    /// Discrete Green function of the clamped finite-difference operator.
    Solver,
    /// Closed-form ball Green function sampled at the same stencil points.
    Oracle(BallOracle),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateRun {
    pub reports: Vec<EstimateReport>,
    /// Mesh widths from coarse to fine.
    pub levels: Vec<f64>,
    pub pairs_sampled: usize,
    /// Pairs dropped at each level after snapping.
    pub skipped: Vec<usize>,
    /// Region populations at the finest level.
    pub region_counts: BTreeMap<Region, usize>,
    pub warnings: Vec<String>,
}

impl EstimateRun {
    pub fn passed(&self) -> bool {
        !self.reports.is_empty() && self.reports.iter().all(EstimateReport::passed)
    }
}

pub fn verify_green_estimates(run: &VerificationRun) -> Result<EstimateRun> {
    if let Some(k) = run.specs.iter().position(|s| s.target.is_regular()) {
        return Err(Error::config(format!("specs[{k}]"), "regular-part bound in a Green function run"));
    }
    let mut r = run.clone();
    r.specs = run.specs_or_default(Some(false));
    verify_estimates(&r, LhsSource::Solver)
}

pub fn verify_regular_part(run: &VerificationRun) -> Result<EstimateRun> {
    if let Some(k) = run.specs.iter().position(|s| !s.target.is_regular()) {
        return Err(Error::config(format!("specs[{k}]"), "Green function bound in a regular-part run"));
    }
    let mut r = run.clone();
    r.specs = run.specs_or_default(Some(true));
    verify_estimates(&r, LhsSource::Solver)
}

/// Both families (or the run's explicit specs) from one set of solves.
pub fn verify_estimates(run: &VerificationRun, source: LhsSource) -> Result<EstimateRun> {
    let levels = run.validate()?;
    let specs = run.specs_or_default(None);
    if specs.is_empty() {
        return Err(Error::config("specs", format!("no admissible bound for {}", run.params)));
    }
    let coarse = levels[0];
    let dim = run.domain.dim() as f64;
    let min_dist = run.exclusion * coarse;
    let margin = min_dist + dim.sqrt() * coarse;
    let mut plan = run.plan.clone();
    // Pairs share sources so each Green column serves several pairs.
    plan.sources = Some(plan.sources.unwrap_or(plan.count.div_ceil(16)));
    plan.min_sep = plan.min_sep.max(margin);
    plan.min_boundary_distance = plan.min_boundary_distance.max(margin);
    let sample = sample_pairs(&run.domain, &plan)?;
    let mut warnings = sample.warnings.clone();

    let mut per_spec: Vec<Vec<(f64, Vec<EstimateRecord>)>> = vec![Vec::new(); specs.len()];
    let mut skipped = Vec::new();
    let mut region_counts = BTreeMap::new();
    for &h in &levels {
        let (grid, op) = match source {
            LhsSource::Solver => {
                let op = build_operator(&run.domain, run.params.m(), h, &run.solver)?;
                (op.grid().clone(), Some(op))
            }
            LhsSource::Oracle(_) => (
                Arc::new(GridSpec::for_order(&run.domain, h, run.params.m(), run.solver.max_nodes)?),
                None,
            ),
        };
        let (records, dropped) = estimate_level(
            &grid,
            op.as_ref(),
            source,
            run.params,
            &specs,
            &sample.pairs,
            &plan.classifier,
            min_dist,
        )?;
        drop(op);
        if dropped > 0 {
            warnings.push(format!("h = {h}: {dropped} pairs failed the exclusion rules after snapping"));
        }
        skipped.push(dropped);
        region_counts = BTreeMap::new();
        if let Some(first) = records.first() {
            for r in first {
                *region_counts.entry(r.region).or_insert(0) += 1;
            }
        }
        for (k, recs) in records.into_iter().enumerate() {
            if recs.is_empty() {
                return Err(Error::GeometryInfeasible(format!(
                    "no sampled pair passes the exclusion rules at h = {h}"
                )));
            }
            per_spec[k].push((h, recs));
        }
    }
    let mut reports = Vec::with_capacity(specs.len());
    for (spec, levels) in specs.iter().zip(per_spec) {
        reports.push(ratio_statistics(&spec.label(), levels)?);
    }
    Ok(EstimateRun {
        reports,
        levels,
        pairs_sampled: sample.pairs.len(),
        skipped,
        region_counts,
        warnings,
    })
}

struct Snapped {
    x: Vec<i64>,
    y: Vec<i64>,
    pair: SamplePair,
    region: Region,
}

type Stencil = Vec<(Vec<i64>, f64)>;

/// Stencils for every multi-index of the given orders.
fn stencils(dim: usize, orders: &BTreeSet<u32>, h: f64) -> BTreeMap<u32, Vec<(MultiIndex, Stencil)>> {
    orders
        .iter()
        .map(|&k| {
            let list = MultiIndex::all_of_order(dim, k)
                .into_iter()
                .map(|a| {
                    let st = derivative_stencil(a.components(), h);
                    (a, st)
                })
                .collect();
            (k, list)
        })
        .collect()
}

fn shifted(base: &[i64], off: &[i64]) -> Vec<i64> {
    base.iter().zip(off).map(|(a, b)| a + b).collect()
}

/// Records for one mesh width: one list per spec, in spec order, plus the
/// number of pairs dropped by the exclusion rules after snapping.
///
/// The left-hand side of a spec `(i, j)` is the Frobenius norm
/// `(Σ_{|α|=i, |β|=j} α!⁻¹|α|! β!⁻¹|β|! |∂_x^α ∂_y^β F|²)^{1/2}` with centered
/// differences in both variables, where `F` is `G_h` or
/// `S_h = G_h - Γ(x - y)`. Regions come from the sampled pair rather than
/// the snapped one, so a region holds the same pairs at every level.
#[allow(clippy::too_many_arguments)]
pub fn estimate_level(
    grid: &Arc<GridSpec>,
    op: Option<&DiscreteOperator>,
    source: LhsSource,
    params: DimensionParams,
    specs: &[BoundSpec],
    pairs: &[SamplePair],
    classifier: &RegionClassifier,
    min_dist: f64,
) -> Result<(Vec<Vec<EstimateRecord>>, usize)> {
    if grid.dim() != params.n() as usize {
        return Err(Error::GridMismatch);
    }
    if let LhsSource::Solver = source {
        let op = op.ok_or(Error::GridMismatch)?;
        if !op.grid().same_as(grid) || op.m() != params.m() {
            return Err(Error::GridMismatch);
        }
    }
    let domain = grid.domain().clone();
    let diam = domain.diameter();
    let h = grid.h();
    let dim = grid.dim();
    let i_orders: BTreeSet<u32> = specs.iter().map(|s| s.i).collect();
    let j_orders: BTreeSet<u32> = specs.iter().map(|s| s.j).collect();
    let i_max = *i_orders.iter().max().unwrap_or(&0);
    let j_max = *j_orders.iter().max().unwrap_or(&0);
    let xs = stencils(dim, &i_orders, h);
    let ys = stencils(dim, &j_orders, h);
    let y_offsets: BTreeSet<Vec<i64>> = ys
        .values()
        .flat_map(|l| l.iter().flat_map(|(_, st)| st.iter().map(|(o, _)| o.clone())))
        .collect();

    let mut snapped = Vec::with_capacity(pairs.len());
    let mut dropped = 0usize;
    for p in pairs {
        let xi = grid.snap(&p.x);
        let yi = grid.snap(&p.y);
        if grid.interior_index(&xi).is_none() || grid.interior_index(&yi).is_none() {
            dropped += 1;
            continue;
        }
        let pair = SamplePair::new(&domain, grid.coords_of(&xi), grid.coords_of(&yi))?;
        let ok = pair.sep >= min_dist.max((i_max + j_max + 1) as f64 * h)
            && pair.d_x >= min_dist.max((i_max + 1) as f64 * h)
            && pair.d_y >= min_dist.max((j_max + 4) as f64 * h);
        if !ok {
            dropped += 1;
            continue;
        }
        snapped.push(Snapped {
            x: xi,
            y: yi,
            pair,
            region: classifier.classify(p),
        });
    }

    let mut groups: BTreeMap<Vec<i64>, Vec<usize>> = BTreeMap::new();
    for (k, s) in snapped.iter().enumerate() {
        groups.entry(s.y.clone()).or_default().push(k);
    }
    let per_group = y_offsets.len().max(1);
    let groups_per_batch = (COLUMN_BATCH / per_group).max(1);
    let group_list: Vec<(Vec<i64>, Vec<usize>)> = groups.into_iter().collect();

    let gamma = FundamentalSolution::new(params, diam);
    let mut values: Vec<Option<Vec<f64>>> = vec![None; snapped.len()];
    for batch in group_list.chunks(groups_per_batch) {
        let cols: HashMap<Vec<i64>, Vec<f64>> = match source {
            LhsSource::Solver => {
                let nodes: BTreeSet<Vec<i64>> = batch
                    .iter()
                    .flat_map(|(y, _)| y_offsets.iter().map(move |o| shifted(y, o)))
                    .collect();
                let nodes: Vec<Vec<i64>> = nodes.into_iter().collect();
                green_columns(op.expect("checked above"), &nodes)?
            }
            LhsSource::Oracle(_) => HashMap::new(),
        };
        let members: Vec<usize> = batch.iter().flat_map(|(_, m)| m.iter().copied()).collect();
        let computed: Vec<Result<Vec<f64>>> = members
            .par_iter()
            .map(|&k| {
                let s = &snapped[k];
                let get = |xn: &[i64], yn: &[i64], regular: bool| -> Result<f64> {
                    let xc = grid.coords_of(xn);
                    let yc = grid.coords_of(yn);
                    let g = match source {
                        LhsSource::Solver => grid.interior_index(xn).map_or(0.0, |q| cols[yn][q]),
                        LhsSource::Oracle(o) => {
                            if domain.contains(&xc) {
                                o.value(&xc, &yc)?
                            } else {
                                0.0
                            }
                        }
                    };
                    if regular {
                        let z: Vec<f64> = xc.iter().zip(&yc).map(|(a, b)| a - b).collect();
                        Ok(g - gamma.value(&z)?)
                    } else {
                        Ok(g)
                    }
                };
                let mut out = Vec::with_capacity(specs.len());
                let mut cache: HashMap<(u32, u32, bool), f64> = HashMap::new();
                for spec in specs {
                    let regular = spec.target.is_regular();
                    let key = (spec.i, spec.j, regular);
                    if let Some(v) = cache.get(&key) {
                        out.push(*v);
                        continue;
                    }
                    let mut total = 0.0;
                    for (alpha, xst) in &xs[&spec.i] {
                        for (beta, yst) in &ys[&spec.j] {
                            let mut v = 0.0;
                            for (yo, wy) in yst {
                                let yn = shifted(&s.y, yo);
                                for (xo, wx) in xst {
                                    let xn = shifted(&s.x, xo);
                                    v += wy * wx * get(&xn, &yn, regular)?;
                                }
                            }
                            total += alpha.multiplicity() * beta.multiplicity() * v * v;
                        }
                    }
                    let lhs = total.sqrt();
                    cache.insert(key, lhs);
                    out.push(lhs);
                }
                Ok(out)
            })
            .collect();
        for (k, v) in members.into_iter().zip(computed) {
            values[k] = Some(v?);
        }
    }

    let mut records = vec![Vec::with_capacity(snapped.len()); specs.len()];
    for (s, lhs) in snapped.iter().zip(values) {
        let lhs = lhs.expect("every snapped pair belongs to a group");
        for (k, spec) in specs.iter().enumerate() {
            let rhs = bound_rhs(spec, params, &s.pair, diam)?;
            records[k].push(EstimateRecord::new(s.pair.clone(), s.region, lhs[k], rhs));
        }
    }
    Ok((records, dropped))
}
