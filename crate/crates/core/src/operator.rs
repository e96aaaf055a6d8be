//! The clamped finite-difference polyharmonic operator: assembly, sparse
//! Cholesky or conjugate-gradient solves, discrete Green functions and their
//! regular parts.

use std::sync::Arc;

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::cholesky::llt::factor::LltRegularization;
use faer::sparse::linalg::cholesky::{
    factorize_symbolic_cholesky, LltRef, SymbolicCholesky, SymmetricOrdering,
};
use faer::sparse::{SparseColMat, Triplet};
use faer::{Conj, Mat, Par, Side};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fundamental::FundamentalSolution;
use crate::geometry::Domain;
use crate::grid::{DiscreteField, GridSpec};
use crate::params::DimensionParams;

/// Relative residual every solve must reach, measured as the normwise
/// backward error `‖b - Ax‖ / (‖A‖_∞ ‖x‖ + ‖b‖)`.
pub const RESIDUAL_TARGET: f64 = 1e-10;

/// Stencil of `(-Δ_h)^m` for `h = 1`: the `(2n+1)`-point negative Laplacian
/// convolved with itself `m` times.
pub fn polyharmonic_stencil(m: u32, dim: usize) -> Vec<(Vec<i64>, f64)> {
    let mut st: std::collections::BTreeMap<Vec<i64>, f64> = std::collections::BTreeMap::new();
    st.insert(vec![0; dim], 1.0);
    for _ in 0..m {
        let mut next = std::collections::BTreeMap::new();
        for (off, c) in &st {
            *next.entry(off.clone()).or_insert(0.0) += 2.0 * dim as f64 * c;
            for axis in 0..dim {
                for s in [-1, 1] {
                    let mut o = off.clone();
                    o[axis] += s;
                    *next.entry(o).or_insert(0.0) -= c;
                }
            }
        }
        st = next;
    }
    st.into_iter().filter(|(_, c)| *c != 0.0).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverBackend {
    /// Direct factorization when it fits the memory budget, otherwise CG.
    #[default]
    Auto,
    Direct,
    ConjugateGradient,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    #[serde(default)]
    pub backend: SolverBackend,
    /// Upper bound for the Cholesky factor storage, in bytes.
    #[serde(default = "default_budget")]
    pub memory_budget: f64,
    /// Upper bound on the number of interior nodes.
    #[serde(default = "default_max_nodes")]
    pub max_nodes: usize,
}

fn default_budget() -> f64 {
    3.2e9
}

fn default_max_nodes() -> usize {
    crate::grid::MAX_NODES
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            backend: SolverBackend::Auto,
            memory_budget: default_budget(),
            max_nodes: default_max_nodes(),
        }
    }
}

struct Factor {
    symbolic: SymbolicCholesky<usize>,
    values: Vec<f64>,
}

/// Symmetric row storage of the operator, used for products and CG.
struct Csr {
    ptr: Vec<usize>,
    col: Vec<u32>,
    val: Vec<f64>,
}

impl Csr {
    fn mul(&self, x: &[f64], y: &mut [f64]) {
        y.par_iter_mut().enumerate().for_each(|(i, yi)| {
            let mut s = 0.0;
            for k in self.ptr[i]..self.ptr[i + 1] {
                s += self.val[k] * x[self.col[k] as usize];
            }
            *yi = s;
        });
    }
}

/// `(-Δ_h)^m` on the interior nodes with zero extension, plus its
/// factorization when the direct backend is used.
pub struct DiscreteOperator {
    grid: Arc<GridSpec>,
    m: u32,
    csr: Csr,
    /// `‖A‖_∞`, the largest absolute row sum.
    norm_inf: f64,
    factor: Option<Factor>,
}

impl std::fmt::Debug for DiscreteOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DiscreteOperator")
            .field("m", &self.m)
            .field("h", &self.grid.h())
            .field("nodes", &self.grid.num_interior())
            .field("direct", &self.factor.is_some())
            .finish()
    }
}

/// Inner product with a fixed reduction order, so results do not depend on
/// the thread count.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let partial: Vec<f64> = a
        .par_chunks(4096)
        .zip(b.par_chunks(4096))
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>())
        .collect();
    partial.iter().sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Nested dissection by coordinate bisection; separators are `width` layers
/// thick so they cut every stencil connection.
fn nested_dissection(nodes: &mut [usize], coords: &[Vec<i64>], width: i64, out: &mut Vec<usize>) {
    if nodes.len() <= 64 {
        out.extend_from_slice(nodes);
        return;
    }
    let dim = coords[nodes[0]].len();
    let mut lo = vec![i64::MAX; dim];
    let mut hi = vec![i64::MIN; dim];
    for &k in nodes.iter() {
        for a in 0..dim {
            lo[a] = lo[a].min(coords[k][a]);
            hi[a] = hi[a].max(coords[k][a]);
        }
    }
    let axis = (0..dim).max_by_key(|&a| hi[a] - lo[a]).expect("dim > 0");
    if hi[axis] - lo[axis] < 2 * width + 1 {
        out.extend_from_slice(nodes);
        return;
    }
    let mid = (lo[axis] + hi[axis]) / 2;
    let mut left = Vec::new();
    let mut right = Vec::new();
    let mut sep = Vec::new();
    for &k in nodes.iter() {
        let c = coords[k][axis];
        if c < mid {
            left.push(k);
        } else if c >= mid + width {
            right.push(k);
        } else {
            sep.push(k);
        }
    }
    nested_dissection(&mut left, coords, width, out);
    nested_dissection(&mut right, coords, width, out);
    out.extend_from_slice(&sep);
}

pub fn assemble_operator(domain: &Domain, m: u32, grid: Arc<GridSpec>) -> Result<DiscreteOperator> {
    assemble_operator_with(domain, m, grid, &SolverOptions::default())
}

pub fn assemble_operator_with(
    domain: &Domain,
    m: u32,
    grid: Arc<GridSpec>,
    opts: &SolverOptions,
) -> Result<DiscreteOperator> {
    if grid.domain() != domain {
        return Err(Error::GridMismatch);
    }
    if m == 0 {
        return Err(Error::DimensionOutOfRange { m, n: grid.dim() as u32 });
    }
    let n = grid.num_interior();
    if n > opts.max_nodes {
        return Err(Error::GridTooLarge(format!(
            "{n} interior nodes exceed the cap of {}",
            opts.max_nodes
        )));
    }
    let dim = grid.dim();
    let scale = grid.h().powi(-2 * m as i32);
    let stencil = polyharmonic_stencil(m, dim);
    let mut ptr = Vec::with_capacity(n + 1);
    let mut col = Vec::with_capacity(n * stencil.len());
    let mut val = Vec::with_capacity(n * stencil.len());
    ptr.push(0);
    let mut idx = vec![0i64; dim];
    let mut coords = Vec::with_capacity(n);
    for r in 0..n {
        let base = grid.node_index(r);
        let mut row: Vec<(u32, f64)> = Vec::with_capacity(stencil.len());
        for (off, c) in &stencil {
            for k in 0..dim {
                idx[k] = base[k] + off[k];
            }
            if let Some(cidx) = grid.interior_index(&idx) {
                row.push((cidx as u32, c * scale));
            }
        }
        row.sort_by_key(|e| e.0);
        for (c, v) in row {
            col.push(c);
            val.push(v);
        }
        ptr.push(col.len());
        coords.push(base);
    }
    let csr = Csr { ptr, col, val };
    let norm_inf = (0..n)
        .map(|r| csr.val[csr.ptr[r]..csr.ptr[r + 1]].iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);

    let want_direct = !matches!(opts.backend, SolverBackend::ConjugateGradient);
    let mut factor = None;
    if want_direct {
        let mut trip = Vec::new();
        for r in 0..n {
            for k in csr.ptr[r]..csr.ptr[r + 1] {
                let c = csr.col[k] as usize;
                if c >= r {
                    trip.push(Triplet::new(r, c, csr.val[k]));
                }
            }
        }
        let a = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &trip)
            .map_err(|e| Error::FactorizationFailed(format!("{e:?}")))?;
        let mut all: Vec<usize> = (0..n).collect();
        let mut perm = Vec::with_capacity(n);
        nested_dissection(&mut all, &coords, i64::from(m), &mut perm);
        let mut inv = vec![0usize; n];
        for (i, &p) in perm.iter().enumerate() {
            inv[p] = i;
        }
        // SAFETY: `perm` is a permutation of 0..n and `inv` its inverse.
        let pr = unsafe { faer::perm::PermRef::new_unchecked(&perm, &inv, n) };
        let symbolic = factorize_symbolic_cholesky(
            a.symbolic(),
            Side::Upper,
            SymmetricOrdering::Custom(pr),
            Default::default(),
        )
        .map_err(|e| Error::FactorizationFailed(format!("{e:?}")))?;
        let bytes = symbolic.len_val() as f64 * 8.0;
        if bytes > opts.memory_budget {
            if opts.backend == SolverBackend::Direct {
                return Err(Error::GridTooLarge(format!(
                    "Cholesky factor needs {:.2} GB, budget {:.2} GB",
                    bytes / 1e9,
                    opts.memory_budget / 1e9
                )));
            }
        } else {
            let mut values = vec![0.0; symbolic.len_val()];
            let mut mem = MemBuffer::new(
                symbolic.factorize_numeric_llt_scratch::<f64>(Par::Seq, Default::default()),
            );
            symbolic
                .factorize_numeric_llt(
                    &mut values,
                    a.as_ref(),
                    Side::Upper,
                    LltRegularization::default(),
                    Par::Seq,
                    MemStack::new(&mut mem),
                    Default::default(),
                )
                .map_err(|e| Error::FactorizationFailed(format!("{e:?}")))?;
            factor = Some(Factor { symbolic, values });
        }
    }
    Ok(DiscreteOperator {
        grid,
        m,
        csr,
        norm_inf,
        factor,
    })
}

impl DiscreteOperator {
    pub fn grid(&self) -> &Arc<GridSpec> {
        &self.grid
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn is_direct(&self) -> bool {
        self.factor.is_some()
    }

    pub fn nnz(&self) -> usize {
        self.csr.val.len()
    }

    /// Entry `A[i, j]` (zero when absent).
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        let cols = &self.csr.col[self.csr.ptr[i]..self.csr.ptr[i + 1]];
        match cols.binary_search(&(j as u32)) {
            Ok(k) => self.csr.val[self.csr.ptr[i] + k],
            Err(_) => 0.0,
        }
    }

    /// Row `i` as `(column, value)` pairs.
    pub fn row(&self, i: usize) -> Vec<(usize, f64)> {
        (self.csr.ptr[i]..self.csr.ptr[i + 1])
            .map(|k| (self.csr.col[k] as usize, self.csr.val[k]))
            .collect()
    }

    pub fn apply_values(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; x.len()];
        self.csr.mul(x, &mut y);
        y
    }

    pub fn apply(&self, u: &DiscreteField) -> Result<DiscreteField> {
        self.check_grid(u)?;
        DiscreteField::from_values(self.grid.clone(), self.apply_values(u.values()))
    }

    fn check_grid(&self, u: &DiscreteField) -> Result<()> {
        if self.grid.same_as(u.grid()) {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    fn relative_residual(&self, x: &[f64], b: &[f64]) -> f64 {
        let ax = self.apply_values(x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(p, q)| p - q).collect();
        norm(&r) / (self.norm_inf * norm(x) + norm(b))
    }

    fn direct_solve_block(&self, f: &Factor, block: &mut Mat<f64>) {
        let llt = LltRef::<'_, usize, f64>::new(&f.symbolic, &f.values);
        let mut mem =
            MemBuffer::new(f.symbolic.solve_in_place_scratch::<f64>(block.ncols(), Par::Seq));
        llt.solve_in_place_with_conj(Conj::No, block.as_mut(), Par::Seq, MemStack::new(&mut mem));
    }

    fn cg(&self, b: &[f64], x0: Option<&[f64]>) -> (Vec<f64>, f64) {
        let n = b.len();
        let bnorm = norm(b);
        let mut x = x0.map_or_else(|| vec![0.0; n], |v| v.to_vec());
        let mut r: Vec<f64> = if x0.is_some() {
            let ax = self.apply_values(&x);
            b.iter().zip(&ax).map(|(p, q)| p - q).collect()
        } else {
            b.to_vec()
        };
        let mut p = r.clone();
        let mut ap = vec![0.0; n];
        let mut rr = dot(&r, &r);
        let max_iter = 20 * n + 1000;
        for _ in 0..max_iter {
            let tol = 0.1 * RESIDUAL_TARGET * (self.norm_inf * dot(&x, &x).sqrt() + bnorm);
            if rr.sqrt() <= tol {
                break;
            }
            self.csr.mul(&p, &mut ap);
            let alpha = rr / dot(&p, &ap);
            x.par_iter_mut().zip(&p).for_each(|(xi, pi)| *xi += alpha * pi);
            r.par_iter_mut().zip(&ap).for_each(|(ri, api)| *ri -= alpha * api);
            let rr_new = dot(&r, &r);
            let beta = rr_new / rr;
            rr = rr_new;
            p.par_iter_mut().zip(&r).for_each(|(pi, ri)| *pi = ri + beta * *pi);
        }
        let res = self.relative_residual(&x, b);
        (x, res)
    }

    /// Solves `A x = b` for several right-hand sides, each to relative
    /// residual `RESIDUAL_TARGET` (with iterative refinement on the direct
    /// path).
    pub fn solve_many(&self, rhs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let n = self.grid.num_interior();
        for b in rhs {
            if b.len() != n {
                return Err(Error::GridMismatch);
            }
        }
        let mut out: Vec<Vec<f64>> = Vec::with_capacity(rhs.len());
        match &self.factor {
            Some(f) => {
                for chunk in rhs.chunks(16) {
                    let mut block = Mat::<f64>::from_fn(n, chunk.len(), |i, j| chunk[j][i]);
                    self.direct_solve_block(f, &mut block);
                    let mut xs: Vec<Vec<f64>> = (0..chunk.len())
                        .map(|j| (0..n).map(|i| block[(i, j)]).collect())
                        .collect();
                    for (x, b) in xs.iter_mut().zip(chunk) {
                        self.refine(f, x, b)?;
                    }
                    out.extend(xs);
                }
            }
            None => {
                let solved: Vec<(Vec<f64>, f64)> =
                    rhs.par_iter().map(|b| self.cg(b, None)).collect();
                for ((x, res), b) in solved.into_iter().zip(rhs) {
                    if norm(b) == 0.0 {
                        out.push(vec![0.0; n]);
                        continue;
                    }
                    if !(res <= RESIDUAL_TARGET) {
                        return Err(Error::SolverDiverged { residual: res });
                    }
                    out.push(x);
                }
            }
        }
        Ok(out)
    }

    fn refine(&self, f: &Factor, x: &mut [f64], b: &[f64]) -> Result<()> {
        let bnorm = norm(b);
        if bnorm == 0.0 {
            x.iter_mut().for_each(|v| *v = 0.0);
            return Ok(());
        }
        let n = x.len();
        let mut res = f64::INFINITY;
        for _ in 0..4 {
            let ax = self.apply_values(x);
            let r: Vec<f64> = b.iter().zip(&ax).map(|(p, q)| p - q).collect();
            res = norm(&r) / (self.norm_inf * norm(x) + bnorm);
            if res <= 0.1 * RESIDUAL_TARGET {
                return Ok(());
            }
            let mut block = Mat::<f64>::from_fn(n, 1, |i, _| r[i]);
            self.direct_solve_block(f, &mut block);
            for (i, xi) in x.iter_mut().enumerate() {
                *xi += block[(i, 0)];
            }
        }
        res = res.min(self.relative_residual(x, b));
        if res <= RESIDUAL_TARGET {
            Ok(())
        } else {
            Err(Error::SolverDiverged { residual: res })
        }
    }

    pub fn solve_values(&self, b: &[f64]) -> Result<Vec<f64>> {
        Ok(self.solve_many(&[b.to_vec()])?.pop().expect("one column"))
    }
}

/// Solves `(-Δ_h)^m u = f` with clamped (zero-extension) boundary values.
pub fn solve_dirichlet(op: &DiscreteOperator, rhs: &DiscreteField) -> Result<DiscreteField> {
    op.check_grid(rhs)?;
    let x = op.solve_values(rhs.values())?;
    DiscreteField::from_values(op.grid.clone(), x)
}

/// A column of the discrete Green matrix.
#[derive(Debug, Clone)]
pub struct GreenColumn {
    pub field: DiscreteField,
    /// Lattice coordinates of the source node.
    pub source: Vec<i64>,
    /// Distance from the requested point to the source node.
    pub snap_distance: f64,
}

fn source_node(op: &DiscreteOperator, y: &[f64]) -> Result<(usize, Vec<i64>, f64)> {
    let grid = &op.grid;
    let (k, snap) = grid.snap_interior(y)?;
    let idx = grid.node_index(k);
    let d = grid.domain().distance_to_boundary(&grid.coords_of(&idx))?;
    let need = 4.0 * grid.h();
    if d < need {
        return Err(Error::TooCloseToBoundary {
            point: y.to_vec(),
            distance: d,
            required: need,
        });
    }
    Ok((k, idx, snap))
}

/// `G_h(·, y)`: the response to a unit impulse `h^{-n}` at the node nearest
/// to `y`.
pub fn discrete_green(op: &DiscreteOperator, y: &[f64]) -> Result<GreenColumn> {
    Ok(discrete_green_many(op, &[y.to_vec()])?.pop().expect("one column"))
}

pub fn discrete_green_many(op: &DiscreteOperator, ys: &[Vec<f64>]) -> Result<Vec<GreenColumn>> {
    let grid = &op.grid;
    let n = grid.num_interior();
    let weight = grid.h().powi(-(grid.dim() as i32));
    let mut sources = Vec::with_capacity(ys.len());
    let mut rhs = Vec::with_capacity(ys.len());
    for y in ys {
        let (k, idx, snap) = source_node(op, y)?;
        let mut b = vec![0.0; n];
        b[k] = weight;
        rhs.push(b);
        sources.push((idx, snap));
    }
    let cols = op.solve_many(&rhs)?;
    cols.into_iter()
        .zip(sources)
        .map(|(x, (source, snap_distance))| {
            Ok(GreenColumn {
                field: DiscreteField::from_values(grid.clone(), x)?,
                source,
                snap_distance,
            })
        })
        .collect()
}

/// `S_h(·, y) = G_h(·, y) - Γ(· - y)` on the interior nodes. Where `Γ` is
/// singular at the source node, the value there is the mean over its `2n`
/// axis neighbours.
pub fn regular_part(
    green: &GreenColumn,
    params: DimensionParams,
    diam: f64,
) -> Result<DiscreteField> {
    let grid = green.field.grid().clone();
    if grid.dim() != params.n() as usize {
        return Err(Error::GridMismatch);
    }
    let gamma = FundamentalSolution::new(params, diam);
    let y = grid.coords_of(&green.source);
    let mut values = green.field.values().to_vec();
    let mut at_source = None;
    for (k, v) in values.iter_mut().enumerate() {
        let x = grid.node_coords(k);
        let z: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a - b).collect();
        match gamma.value(&z) {
            Ok(g) => *v -= g,
            Err(_) => at_source = Some(k),
        }
    }
    if let Some(k) = at_source {
        let singular = params.degree() < 0 || (params.has_log() && params.degree() == 0);
        if singular {
            let idx = grid.node_index(k);
            let mut acc = 0.0;
            let mut cnt = 0.0;
            for axis in 0..grid.dim() {
                for s in [-1, 1] {
                    let mut j = idx.clone();
                    j[axis] += s;
                    if let Some(q) = grid.interior_index(&j) {
                        acc += values[q];
                        cnt += 1.0;
                    }
                }
            }
            values[k] = acc / cnt;
        }
        // otherwise Γ(0) = 0 and G_h is already the regular part there
    }
    DiscreteField::from_values(grid, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Shape;

    fn unit_square() -> Domain {
        Domain::new(
            Shape::Rectangle {
                sides: vec![1.0, 1.0],
            },
            2,
        )
        .unwrap()
    }

    #[test]
    fn stencil_shapes() {
        let s1 = polyharmonic_stencil(1, 2);
        assert_eq!(s1.len(), 5);
        let s2 = polyharmonic_stencil(2, 2);
        assert_eq!(s2.len(), 13);
        let center = s2.iter().find(|(o, _)| o == &vec![0, 0]).unwrap().1;
        assert_eq!(center, 20.0);
        let s3 = polyharmonic_stencil(2, 3);
        assert_eq!(s3.len(), 25);
        assert_eq!(s3.iter().map(|t| t.1).sum::<f64>(), 0.0);
    }

    #[test]
    fn biharmonic_center_row_and_symmetry() {
        let d = unit_square();
        let h = 1.0 / 16.0;
        let grid = Arc::new(GridSpec::new(&d, h, 2).unwrap());
        let op = assemble_operator(&d, 2, grid.clone()).unwrap();
        let c = grid.interior_index(&[8, 8]).unwrap();
        assert_eq!(op.entry(c, c), 20.0 / h.powi(4));
        assert_eq!(op.row(c).len(), 13);
        for i in 0..grid.num_interior() {
            for (j, v) in op.row(i) {
                assert_eq!(v, op.entry(j, i));
            }
        }
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let d = unit_square();
        let grid = Arc::new(GridSpec::new(&d, 1.0 / 16.0, 2).unwrap());
        let op = assemble_operator(&d, 2, grid.clone()).unwrap();
        let u = solve_dirichlet(&op, &DiscreteField::zeros(grid)).unwrap();
        assert_eq!(u.max_abs(), 0.0);
    }

    #[test]
    fn backends_agree() {
        let d = Domain::unit_ball(2);
        let grid = Arc::new(GridSpec::new(&d, 1.0 / 16.0, 2).unwrap());
        let direct = assemble_operator(&d, 2, grid.clone()).unwrap();
        let cg = assemble_operator_with(
            &d,
            2,
            grid.clone(),
            &SolverOptions {
                backend: SolverBackend::ConjugateGradient,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(direct.is_direct() && !cg.is_direct());
        let a = discrete_green(&direct, &[0.1, 0.2]).unwrap();
        let b = discrete_green(&cg, &[0.1, 0.2]).unwrap();
        let diff = a.field.sub(&b.field).unwrap().max_abs();
        assert!(diff < 1e-8 * a.field.max_abs());
    }

    #[test]
    fn source_too_close_to_boundary() {
        let d = unit_square();
        let grid = Arc::new(GridSpec::new(&d, 1.0 / 32.0, 2).unwrap());
        let op = assemble_operator(&d, 1, grid).unwrap();
        assert!(matches!(
            discrete_green(&op, &[0.05, 0.5]),
            Err(Error::TooCloseToBoundary { .. })
        ));
    }
}
