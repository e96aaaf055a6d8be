//! Closed-form Green functions of balls: the method of images for the
//! Laplacian and Boggio's formula for `(-Δ)^m`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fundamental::cmn_constant;
use crate::geometry::{dist, Domain, Shape};
use crate::operator::GreenColumn;
use crate::params::{binomial, DimensionParams, Parity};
use crate::quadrature::{adaptive_gk15, sphere_area};

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p * q).sum()
}

/// `(|x|²|y|² - 2x·y + 1)^{1/2} = |y| |x - y/|y|²|`, extended to `y = 0`.
fn bracket(x: &[f64], y: &[f64]) -> f64 {
    (dot(x, x) * dot(y, y) - 2.0 * dot(x, y) + 1.0).max(0.0).sqrt()
}

/// Green function of `-Δ` in the unit ball of `R^n` with Dirichlet data.
pub fn laplace_green_ball(n: usize, x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != n || y.len() != n {
        return Err(Error::GridMismatch);
    }
    let r = dist(x, y);
    if r == 0.0 {
        return Err(Error::CoincidentPoints);
    }
    let b = bracket(x, y);
    if n == 2 {
        Ok((b / r).ln() / (2.0 * std::f64::consts::PI))
    } else {
        let c = 1.0 / ((n as f64 - 2.0) * sphere_area(n as u32));
        let p = 2 - n as i32;
        Ok(c * (r.powi(p) - b.powi(p)))
    }
}

/// Normalisation of Boggio's formula, fixed by matching the leading
/// singularity with the fundamental solution.
pub fn boggio_constant(params: DimensionParams) -> f64 {
    let (m, n) = (params.m(), params.n());
    let s = match params.parity() {
        Parity::Odd => -(0..m)
            .map(|k| {
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                sign * binomial(m - 1, k) / (2.0 * f64::from(m) - f64::from(n) - 2.0 * f64::from(k))
            })
            .sum::<f64>(),
        Parity::Even => {
            let k = m - n / 2;
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            sign * binomial(m - 1, k)
        }
    };
    cmn_constant(m, n).expect("validated params") / s
}

/// Boggio's Green function of `(-Δ)^m` in the unit ball,
/// `k |x-y|^{2m-n} ∫_1^{A} (v²-1)^{m-1} v^{1-n} dv` with
/// `A = [x,y] / |x-y|`, integrated in `s = log v`.
pub fn boggio_green_ball(m: u32, n: u32, x: &[f64], y: &[f64]) -> Result<f64> {
    let params = DimensionParams::new(m, n)?;
    if x.len() != n as usize || y.len() != n as usize {
        return Err(Error::GridMismatch);
    }
    let r = dist(x, y);
    if r == 0.0 {
        return Err(Error::CoincidentPoints);
    }
    let k = boggio_constant(params);
    let q = ((1.0 - dot(x, x)) * (1.0 - dot(y, y))).max(0.0) / (r * r);
    let log_a = 0.5 * q.ln_1p();
    if log_a == 0.0 {
        return Ok(0.0);
    }
    let nf = f64::from(n);
    let integrand = |s: f64| {
        // (e^{2s} - 1)^{m-1} e^{(2-n)s}
        let e = (2.0 * s).exp_m1();
        e.powi(m as i32 - 1) * ((2.0 - nf) * s).exp()
    };
    let (v, _) = adaptive_gk15(integrand, 0.0, log_a, 1e-300, 1e-14);
    Ok(k * r.powi(2 * m as i32 - n as i32) * v)
}

/// Ball Green function oracle of a given radius (centred at the origin).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BallOracle {
    pub m: u32,
    pub n: u32,
    pub radius: f64,
}

impl BallOracle {
    pub fn new(m: u32, n: u32, radius: f64) -> Result<Self> {
        DimensionParams::new(m, n)?;
        if !(radius > 0.0) {
            return Err(Error::GeometryInfeasible(format!("radius {radius}")));
        }
        Ok(BallOracle { m, n, radius })
    }

    /// The oracle matching a ball domain.
    pub fn for_domain(domain: &Domain, m: u32) -> Result<Self> {
        match domain.shape() {
            Shape::Ball { radius } => BallOracle::new(m, domain.dim() as u32, *radius),
            _ => Err(Error::GeometryInfeasible(
                "ball oracle needs a ball domain".into(),
            )),
        }
    }

    /// `G_R(x, y) = R^{2m-n} G_1(x/R, y/R)`.
    pub fn value(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        let xs: Vec<f64> = x.iter().map(|v| v / self.radius).collect();
        let ys: Vec<f64> = y.iter().map(|v| v / self.radius).collect();
        let g = if self.m == 1 {
            laplace_green_ball(self.n as usize, &xs, &ys)?
        } else {
            boggio_green_ball(self.m, self.n, &xs, &ys)?
        };
        Ok(self.radius.powi(2 * self.m as i32 - self.n as i32) * g)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    /// `max |G_h - G| / |G|` over the compared nodes.
    pub max_rel: f64,
    /// `max |G_h - G| / max |G|`.
    pub max_rel_normalized: f64,
    /// `‖G_h - G‖_{ℓ²} / ‖G‖_{ℓ²}`.
    pub l2_rel: f64,
    pub nodes: usize,
}

/// Compares a discrete Green column with the oracle at nodes whose distance
/// to the source node and to the boundary are both at least `exclusion`.
pub fn oracle_compare(numeric: &GreenColumn, oracle: &BallOracle, exclusion: f64) -> Result<OracleReport> {
    let grid = numeric.field.grid();
    let domain = grid.domain();
    let y = grid.coords_of(&numeric.source);
    let mut max_rel = 0.0f64;
    let mut max_err = 0.0f64;
    let mut max_val = 0.0f64;
    let mut err2 = 0.0;
    let mut val2 = 0.0;
    let mut nodes = 0;
    for (k, gh) in numeric.field.values().iter().enumerate() {
        let x = grid.node_coords(k);
        if dist(&x, &y) < exclusion || domain.distance_to_boundary(&x)? < exclusion {
            continue;
        }
        let g = oracle.value(&x, &y)?;
        let e = (gh - g).abs();
        max_rel = max_rel.max(e / g.abs());
        max_err = max_err.max(e);
        max_val = max_val.max(g.abs());
        err2 += e * e;
        val2 += g * g;
        nodes += 1;
    }
    if nodes == 0 {
        return Err(Error::EmptyInput);
    }
    Ok(OracleReport {
        max_rel,
        max_rel_normalized: max_err / max_val,
        l2_rel: (err2 / val2).sqrt(),
        nodes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn images_at_center() {
        let v = laplace_green_ball(3, &[0.5, 0.0, 0.0], &[0.0, 0.0, 0.0]).unwrap();
        assert!((v - 1.0 / (4.0 * PI)).abs() < 1e-15);
        let b = laplace_green_ball(3, &[0.0, 1.0, 0.0], &[0.2, 0.1, 0.0]).unwrap();
        assert!(b.abs() < 1e-15);
        assert!(matches!(
            laplace_green_ball(2, &[0.1, 0.0], &[0.1, 0.0]),
            Err(Error::CoincidentPoints)
        ));
    }

    #[test]
    fn boggio_vanishes_on_boundary() {
        let v = boggio_green_ball(2, 3, &[0.0, 0.0, 1.0], &[0.3, 0.1, 0.0]).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn boggio_first_order_matches_images() {
        let x = [0.3, -0.2, 0.4];
        let y = [-0.1, 0.5, 0.2];
        let a = boggio_green_ball(1, 3, &x, &y).unwrap();
        let b = laplace_green_ball(3, &x, &y).unwrap();
        assert!((a - b).abs() < 1e-12 * b.abs());
    }
}
