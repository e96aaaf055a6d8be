//! Uniform lattices `hZ^n` restricted to a domain, and scalar fields on them
//! with zero extension outside the interior nodes.

use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::Domain;
use crate::params::MultiIndex;

/// Default cap on the number of interior nodes.
pub const MAX_NODES: usize = 97 * 97 * 97;

const NONE: u32 = u32::MAX;

/// Minimum boundary distance, in units of `h`, of the nodes kept as unknowns
/// for an operator of order `m`. Zero extension puts the discrete clamped
/// boundary a fraction of a cell outside the last unknown; these values centre
/// it on the true boundary and were calibrated against the ball oracles.
pub fn boundary_offset(m: u32) -> f64 {
    if m <= 1 {
        0.35
    } else {
        0.65
    }
}

/// Lattice `hZ^n` clipped to a domain's bounding box plus `pad` ghost layers.
#[derive(Debug, Clone)]
pub struct GridSpec {
    domain: Domain,
    h: f64,
    pad: usize,
    offset: f64,
    lo: Vec<i64>,
    shape: Vec<usize>,
    strides: Vec<usize>,
    /// Box-linear index of each interior node.
    interior: Vec<usize>,
    /// Interior index for each box node, or `NONE`.
    lookup: Vec<u32>,
}

impl GridSpec {
    /// Builds the grid; `pad` is the number of exterior layers kept around
    /// the bounding box (at least the operator order `m`).
    /// Every lattice point inside the domain is an unknown.
    pub fn new(domain: &Domain, h: f64, pad: usize) -> Result<Self> {
        Self::build(domain, h, pad, 0.0, MAX_NODES)
    }

    pub fn with_limit(domain: &Domain, h: f64, pad: usize, max_nodes: usize) -> Result<Self> {
        Self::build(domain, h, pad, 0.0, max_nodes)
    }

    /// Grid for `(-Δ_h)^m`: `m` ghost layers and the calibrated
    /// [`boundary_offset`].
    pub fn for_order(domain: &Domain, h: f64, m: u32, max_nodes: usize) -> Result<Self> {
        Self::build(domain, h, m as usize, boundary_offset(m), max_nodes)
    }

    /// Keeps as unknowns the lattice points `x` in the domain with
    /// `d(x) >= offset * h`.
    pub fn build(
        domain: &Domain,
        h: f64,
        pad: usize,
        offset: f64,
        max_nodes: usize,
    ) -> Result<Self> {
        if !(0.0..2.0).contains(&offset) {
            return Err(Error::GeometryInfeasible(format!("boundary offset {offset}")));
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::GridTooCoarse(format!("mesh width h = {h}")));
        }
        let across = 2.0 * domain.inradius() / h;
        if across < 8.0 {
            return Err(Error::GridTooCoarse(format!(
                "only {across:.1} nodes across the narrowest part of the domain (need 8)"
            )));
        }
        let (blo, bhi) = domain.bounding_box();
        let dim = domain.dim();
        let lo: Vec<i64> = blo
            .iter()
            .map(|v| (v / h).floor() as i64 - pad as i64)
            .collect();
        let hi: Vec<i64> = bhi.iter().map(|v| (v / h).ceil() as i64 + pad as i64).collect();
        let shape: Vec<usize> = lo.iter().zip(&hi).map(|(l, u)| (u - l + 1) as usize).collect();
        let total: usize = shape.iter().product();
        let mut strides = vec![1usize; dim];
        for k in (0..dim.saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * shape[k + 1];
        }
        let mut interior = Vec::new();
        let mut lookup = vec![NONE; total];
        let mut idx = vec![0i64; dim];
        let mut x = vec![0.0; dim];
        for (lin, slot) in lookup.iter_mut().enumerate() {
            let mut rem = lin;
            for k in 0..dim {
                idx[k] = lo[k] + (rem / strides[k]) as i64;
                rem %= strides[k];
                x[k] = idx[k] as f64 * h;
            }
            if domain.contains(&x) && (offset == 0.0 || domain.distance_to_boundary(&x)? >= offset * h) {
                if interior.len() >= max_nodes {
                    return Err(Error::GridTooLarge(format!(
                        "more than {max_nodes} interior nodes at h = {h}"
                    )));
                }
                *slot = interior.len() as u32;
                interior.push(lin);
            }
        }
        Ok(GridSpec {
            domain: domain.clone(),
            h,
            pad,
            offset,
            lo,
            shape,
            strides,
            interior,
            lookup,
        })
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    pub fn pad(&self) -> usize {
        self.pad
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn num_interior(&self) -> usize {
        self.interior.len()
    }

    pub fn num_box(&self) -> usize {
        self.lookup.len()
    }

    /// Lattice coordinates of a box node.
    pub fn box_index(&self, lin: usize) -> Vec<i64> {
        let mut rem = lin;
        (0..self.dim())
            .map(|k| {
                let v = self.lo[k] + (rem / self.strides[k]) as i64;
                rem %= self.strides[k];
                v
            })
            .collect()
    }

    /// Box-linear index of lattice coordinates, if inside the box.
    pub fn box_linear(&self, idx: &[i64]) -> Option<usize> {
        let mut lin = 0;
        for (k, &i) in idx.iter().enumerate().take(self.dim()) {
            let o = i - self.lo[k];
            if o < 0 || o as usize >= self.shape[k] {
                return None;
            }
            lin += o as usize * self.strides[k];
        }
        Some(lin)
    }

    /// Interior index of lattice coordinates.
    pub fn interior_index(&self, idx: &[i64]) -> Option<usize> {
        let lin = self.box_linear(idx)?;
        let v = self.lookup[lin];
        (v != NONE).then_some(v as usize)
    }

    pub(crate) fn interior_of_box(&self, lin: usize) -> Option<usize> {
        let v = self.lookup[lin];
        (v != NONE).then_some(v as usize)
    }

    pub fn node_index(&self, k: usize) -> Vec<i64> {
        self.box_index(self.interior[k])
    }

    pub fn node_coords(&self, k: usize) -> Vec<f64> {
        self.node_index(k).iter().map(|&i| i as f64 * self.h).collect()
    }

    pub fn coords_of(&self, idx: &[i64]) -> Vec<f64> {
        idx.iter().map(|&i| i as f64 * self.h).collect()
    }

    /// Lattice coordinates of the node nearest to `x`.
    pub fn snap(&self, x: &[f64]) -> Vec<i64> {
        x.iter().map(|v| (v / self.h).round() as i64).collect()
    }

    /// Nearest interior node to `x` and the snap distance.
    pub fn snap_interior(&self, x: &[f64]) -> Result<(usize, f64)> {
        let idx = self.snap(x);
        let k = self
            .interior_index(&idx)
            .ok_or_else(|| Error::PointOutsideDomain(x.to_vec()))?;
        let c = self.coords_of(&idx);
        let d = c
            .iter()
            .zip(x)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        Ok((k, d))
    }

    pub fn same_as(&self, other: &GridSpec) -> bool {
        self.h == other.h
            && self.lo == other.lo
            && self.shape == other.shape
            && self.interior == other.interior
    }
}

/// Scalar field on the interior nodes of a grid, zero elsewhere.
#[derive(Debug, Clone)]
pub struct DiscreteField {
    grid: Arc<GridSpec>,
    values: Vec<f64>,
}

/// Centered difference weights for `d^order/dx^order` on offsets
/// `-r..=r` (second-order accurate).
pub fn centered_weights(order: u32) -> Vec<f64> {
    // Convolution powers of the central second difference [1,-2,1] and the
    // central first difference [-1/2, 0, 1/2].
    let mut w = vec![1.0];
    for _ in 0..order / 2 {
        w = convolve(&w, &[1.0, -2.0, 1.0]);
    }
    if order % 2 == 1 {
        w = convolve(&w, &[-0.5, 0.0, 0.5]);
    }
    w
}

fn convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Tensor-product centered stencil for `∂^α` as `(offset, weight)` pairs,
/// weights already divided by `h^{|α|}`.
pub fn derivative_stencil(alpha: &[u32], h: f64) -> Vec<(Vec<i64>, f64)> {
    let mut out: Vec<(Vec<i64>, f64)> = vec![(Vec::new(), 1.0)];
    for &a in alpha {
        let w = centered_weights(a);
        let r = (w.len() / 2) as i64;
        let mut next = Vec::new();
        for (off, c) in &out {
            for (j, wj) in w.iter().enumerate() {
                if *wj == 0.0 {
                    continue;
                }
                let mut o = off.clone();
                o.push(j as i64 - r);
                next.push((o, c * wj));
            }
        }
        out = next;
    }
    let order: u32 = alpha.iter().sum();
    let scale = h.powi(-(order as i32));
    out.into_iter().map(|(o, c)| (o, c * scale)).collect()
}

impl DiscreteField {
    pub fn zeros(grid: Arc<GridSpec>) -> Self {
        let n = grid.num_interior();
        DiscreteField {
            grid,
            values: vec![0.0; n],
        }
    }

    pub fn from_values(grid: Arc<GridSpec>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.num_interior() {
            return Err(Error::GridMismatch);
        }
        Ok(DiscreteField { grid, values })
    }

    /// Samples `f` at the interior nodes.
    pub fn from_fn(grid: Arc<GridSpec>, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = (0..grid.num_interior())
            .map(|k| f(&grid.node_coords(k)))
            .collect();
        DiscreteField { grid, values }
    }

    pub fn grid(&self) -> &Arc<GridSpec> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn scaled(&self, s: f64) -> DiscreteField {
        DiscreteField {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| v * s).collect(),
        }
    }

    pub fn sub(&self, other: &DiscreteField) -> Result<DiscreteField> {
        if !self.grid.same_as(&other.grid) {
            return Err(Error::GridMismatch);
        }
        Ok(DiscreteField {
            grid: self.grid.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a - b)
                .collect(),
        })
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Value at lattice coordinates (zero outside the interior).
    pub fn at(&self, idx: &[i64]) -> f64 {
        self.grid
            .interior_index(idx)
            .map_or(0.0, |k| self.values[k])
    }

    /// Multilinear interpolation of the zero-extended field.
    pub fn value_at_point(&self, x: &[f64]) -> f64 {
        let h = self.grid.h();
        let dim = self.grid.dim();
        let base: Vec<i64> = x.iter().map(|v| (v / h).floor() as i64).collect();
        let frac: Vec<f64> = x
            .iter()
            .zip(&base)
            .map(|(v, b)| v / h - *b as f64)
            .collect();
        let mut total = 0.0;
        for corner in 0..(1usize << dim) {
            let mut w = 1.0;
            let mut idx = base.clone();
            for k in 0..dim {
                if corner >> k & 1 == 1 {
                    idx[k] += 1;
                    w *= frac[k];
                } else {
                    w *= 1.0 - frac[k];
                }
            }
            if w != 0.0 {
                total += w * self.at(&idx);
            }
        }
        total
    }

    /// Centered-difference `∂^α` at lattice coordinates.
    pub fn derivative_at(&self, idx: &[i64], alpha: &MultiIndex) -> f64 {
        let stencil = derivative_stencil(alpha.components(), self.grid.h());
        self.apply_stencil(idx, &stencil)
    }

    pub(crate) fn apply_stencil(&self, idx: &[i64], stencil: &[(Vec<i64>, f64)]) -> f64 {
        let mut p = idx.to_vec();
        stencil
            .iter()
            .map(|(off, w)| {
                for k in 0..p.len() {
                    p[k] = idx[k] + off[k];
                }
                w * self.at(&p)
            })
            .sum()
    }

    /// `∂^α` at the node nearest to `x`; refused within `|α| h` of the
    /// boundary, where the stencil reaches past the zero extension.
    pub fn derivative_at_point(&self, x: &[f64], alpha: &MultiIndex) -> Result<f64> {
        let idx = self.grid.snap(x);
        let c = self.grid.coords_of(&idx);
        let d = self.grid.domain().distance_to_boundary(&c)?;
        let need = f64::from(alpha.order()) * self.grid.h();
        if d < need {
            return Err(Error::TooCloseToBoundary {
                point: x.to_vec(),
                distance: d,
                required: need,
            });
        }
        Ok(self.derivative_at(&idx, alpha))
    }

    /// The field `∂^α u` on all interior nodes.
    pub fn mixed_derivative(&self, alpha: &MultiIndex) -> DiscreteField {
        let stencil = derivative_stencil(alpha.components(), self.grid.h());
        let values = (0..self.grid.num_interior())
            .map(|k| self.apply_stencil(&self.grid.node_index(k), &stencil))
            .collect();
        DiscreteField {
            grid: self.grid.clone(),
            values,
        }
    }

    /// `|∇^i u|` at lattice coordinates: the Frobenius norm of the
    /// derivative tensor, `(Σ_α |α|!/α! |∂^α u|²)^{1/2}`.
    pub fn gradient_norm_at(&self, idx: &[i64], order: u32) -> f64 {
        MultiIndex::all_of_order(self.grid.dim(), order)
            .iter()
            .map(|a| a.multiplicity() * self.derivative_at(idx, a).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Discrete `‖∇^m u‖_{L²}` from forward differences of the zero-extended
    /// field over the whole lattice box.
    pub fn energy_norm(&self, m: u32) -> f64 {
        let grid = &self.grid;
        let dim = grid.dim();
        let h = grid.h();
        let mut full = vec![0.0; grid.num_box()];
        for (k, &lin) in grid.interior.iter().enumerate() {
            full[lin] = self.values[k];
        }
        let mut total = 0.0;
        for alpha in MultiIndex::all_of_order(dim, m) {
            let mut f = full.clone();
            for (axis, &a) in alpha.components().iter().enumerate() {
                for _ in 0..a {
                    forward_difference(&mut f, grid, axis, h);
                }
            }
            total += alpha.multiplicity() * f.iter().map(|v| v * v).sum::<f64>();
        }
        (total * h.powi(dim as i32)).sqrt()
    }

    /// Discrete L² norm with quadrature weight `h^n`.
    pub fn l2_norm(&self) -> f64 {
        let h = self.grid.h();
        (self.values.iter().map(|v| v * v).sum::<f64>() * h.powi(self.grid.dim() as i32)).sqrt()
    }

    /// `‖v / |· - q|^m‖_{L²} / ‖∇^m v‖_{L²}`.
    pub fn hardy_ratio(&self, m: u32, q: &[f64]) -> Result<f64> {
        let energy = self.energy_norm(m);
        if energy == 0.0 {
            return Err(Error::ZeroField);
        }
        let h = self.grid.h();
        let mut weighted = 0.0;
        for (k, v) in self.values.iter().enumerate() {
            if *v == 0.0 {
                continue;
            }
            let x = self.grid.node_coords(k);
            let r2: f64 = x.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum();
            weighted += v * v / r2.powi(m as i32);
        }
        Ok((weighted * h.powi(self.grid.dim() as i32)).sqrt() / energy)
    }

    /// Flat binary dump: one ASCII header line, then the zero-extended box
    /// values as little-endian `f64` in row-major order.
    pub fn write_binary(&self, path: &Path) -> Result<()> {
        let grid = &self.grid;
        let dims: Vec<String> = grid.shape.iter().map(|s| s.to_string()).collect();
        let lo: Vec<String> = grid.lo.iter().map(|&i| format!("{:.17e}", i as f64 * grid.h)).collect();
        let hi: Vec<String> = grid
            .lo
            .iter()
            .zip(&grid.shape)
            .map(|(&l, &s)| format!("{:.17e}", (l + s as i64 - 1) as f64 * grid.h))
            .collect();
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(
            out,
            "dims={} h={:.17e} lo={} hi={}",
            dims.join("x"),
            grid.h,
            lo.join(","),
            hi.join(",")
        )?;
        let mut full = vec![0.0; grid.num_box()];
        for (k, &lin) in grid.interior.iter().enumerate() {
            full[lin] = self.values[k];
        }
        for v in full {
            out.write_all(&v.to_le_bytes())?;
        }
        out.flush()?;
        Ok(())
    }

    /// CSV of the plane `x_axis = level` (all nodes of a 2D grid when
    /// `axis` is `None`): coordinates then value.
    pub fn write_slice_csv(&self, path: &Path, axis: Option<(usize, i64)>) -> Result<()> {
        let grid = &self.grid;
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        let names: Vec<String> = (0..grid.dim()).map(|k| format!("x{k}")).collect();
        writeln!(out, "{},value", names.join(","))?;
        for lin in 0..grid.num_box() {
            let idx = grid.box_index(lin);
            if let Some((a, level)) = axis {
                if idx[a] != level {
                    continue;
                }
            }
            let v = grid.interior_of_box(lin).map_or(0.0, |k| self.values[k]);
            let coords: Vec<String> = idx
                .iter()
                .map(|&i| format!("{:.16e}", i as f64 * grid.h))
                .collect();
            writeln!(out, "{},{:.16e}", coords.join(","), v)?;
        }
        out.flush()?;
        Ok(())
    }
}

fn forward_difference(f: &mut [f64], grid: &GridSpec, axis: usize, h: f64) {
    let stride = grid.strides[axis];
    let len = grid.shape[axis];
    for lin in 0..f.len() {
        let pos = (lin / stride) % len;
        f[lin] = if pos + 1 < len {
            (f[lin + stride] - f[lin]) / h
        } else {
            -f[lin] / h
        };
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Shape;

    fn square(h: f64) -> Arc<GridSpec> {
        let d = Domain::new(
            Shape::Rectangle {
                sides: vec![1.0, 1.0],
            },
            2,
        )
        .unwrap();
        Arc::new(GridSpec::new(&d, h, 2).unwrap())
    }

    #[test]
    fn grid_counts_and_lookup() {
        let g = square(0.125);
        assert_eq!(g.num_interior(), 49);
        for k in 0..g.num_interior() {
            let idx = g.node_index(k);
            assert_eq!(g.interior_index(&idx), Some(k));
        }
        assert!(g.interior_index(&[0, 3]).is_none());
    }

    #[test]
    fn coarse_grid_rejected() {
        let d = Domain::unit_ball(2);
        assert!(matches!(
            GridSpec::new(&d, 0.3, 1),
            Err(Error::GridTooCoarse(_))
        ));
    }

    #[test]
    fn weights() {
        assert_eq!(centered_weights(1), vec![-0.5, 0.0, 0.5]);
        assert_eq!(centered_weights(2), vec![1.0, -2.0, 1.0]);
        assert_eq!(centered_weights(3), vec![-0.5, 1.0, 0.0, -1.0, 0.5]);
        assert_eq!(centered_weights(4), vec![1.0, -4.0, 6.0, -4.0, 1.0]);
    }

    #[test]
    fn quadratic_exactness() {
        let g = square(1.0 / 32.0);
        let f = DiscreteField::from_fn(g.clone(), |x| x[0] * x[0]);
        let d2 = f.derivative_at(&[16, 16], &MultiIndex::new(vec![2, 0]));
        assert!((d2 - 2.0).abs() < 1e-10);
        let c = DiscreteField::from_fn(g, |_| 3.0);
        assert_eq!(c.derivative_at(&[10, 12], &MultiIndex::new(vec![1, 0])), 0.0);
    }

    #[test]
    fn energy_of_sine_mode() {
        let g = square(1.0 / 128.0);
        let pi = std::f64::consts::PI;
        let f = DiscreteField::from_fn(g, |x| (pi * x[0]).sin() * (pi * x[1]).sin());
        let e = f.energy_norm(1);
        assert!((e - pi / 2.0_f64.sqrt()).abs() < 0.01 * pi / 2.0_f64.sqrt());
        assert_eq!(f.scaled(2.0).energy_norm(1), 2.0 * e);
    }

    #[test]
    fn hardy_zero_field() {
        let g = square(1.0 / 16.0);
        assert!(matches!(
            DiscreteField::zeros(g).hardy_ratio(2, &[0.0, 0.0]),
            Err(Error::ZeroField)
        ));
    }
}
