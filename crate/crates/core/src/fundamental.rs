//! The fundamental solution `Γ` of `(-Δ)^m`, its derivatives, the
//! log/polynomial decomposition of its derivatives, and the constants
//! `C_{m,n}`.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use rand::Rng;

use crate::error::{Error, Result};
use crate::params::{binomial, DimensionParams, MultiIndex};
use crate::quadrature::{adaptive_gk15, sphere_area, sphere_moment};
use crate::radial::RadialExpr;

/// `C_{m,n}` such that `(-Δ)^m Γ = δ`, with `Γ = C|x|^{2m-n}` (odd `n`) or
/// `Γ = C|x|^{2m-n} log(diam/|x|)` (even `n`).
///
/// Computed by pairing `Γ` with the radial test function
/// `φ = (1 - |x|^2)^{2m+1}` and integrating the resulting radial moments
/// exactly; cached per `(m, n)`.
pub fn cmn_constant(m: u32, n: u32) -> Result<f64> {
    let params = DimensionParams::new(m, n)?;
    static CACHE: OnceLock<Mutex<HashMap<(u32, u32), f64>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(&c) = cache.lock().expect("cache poisoned").get(&(m, n)) {
        return Ok(c);
    }
    let c = radial_pairing_constant(params);
    Ok(*cache
        .lock()
        .expect("cache poisoned")
        .entry((m, n))
        .or_insert(c))
}

fn radial_pairing_constant(params: DimensionParams) -> f64 {
    let moment = exact_moment(params).unwrap_or_else(|| float_moment(params));
    1.0 / (sphere_area(params.n()) * moment)
}

/// `∫_0^1 r^{n-1} (-Δ)^m [(1 - r²)^{2m+1}] L(r) dr` with `L = 1`, or
/// `L = log(1/r)` when Γ has a log term. The integrand is a polynomial
/// `Σ_j b_j r^{q_j - 1}`, so the integral is `Σ_j b_j / q_j` (or `/ q_j²`).
fn moment_terms(params: DimensionParams) -> Option<Vec<(i128, i128)>> {
    let (m, n) = (params.m(), params.n());
    let k = 2 * m + 1;
    // coefficients of r^{2j}
    let mut coef: Vec<i128> = (0..=k)
        .map(|j| {
            let s = if j % 2 == 0 { 1 } else { -1 };
            s * binomial_int(k, j)
        })
        .collect();
    for _ in 0..m {
        // -Δ r^{2j} = -2j(2j+n-2) r^{2j-2}
        let mut next = vec![0i128; coef.len()];
        for j in 1..coef.len() {
            let p = 2 * j as i128;
            next[j - 1] = coef[j].checked_mul(-p * (p + i128::from(n) - 2))?;
        }
        coef = next;
    }
    Some(
        coef.into_iter()
            .enumerate()
            .map(|(j, b)| {
                let q = i128::from(2 * m) + 2 * j as i128;
                (b, if params.has_log() { q * q } else { q })
            })
            .collect(),
    )
}

fn gcd(mut a: i128, mut b: i128) -> i128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a.abs()
}

/// The moment as an exact fraction, or `None` on overflow.
fn exact_moment(params: DimensionParams) -> Option<f64> {
    let (mut num, mut den) = (0i128, 1i128);
    for (b, q) in moment_terms(params)? {
        let g = gcd(den, q);
        num = num.checked_mul(q / g)?.checked_add(b.checked_mul(den / g)?)?;
        den = den.checked_mul(q / g)?;
        let r = gcd(num, den).max(1);
        num /= r;
        den /= r;
    }
    Some(num as f64 / den as f64)
}

fn float_moment(params: DimensionParams) -> f64 {
    let (m, n) = (params.m(), params.n());
    let k = 2 * m + 1;
    let mut coef: Vec<f64> = (0..=k)
        .map(|j| {
            let s = if j % 2 == 0 { 1.0 } else { -1.0 };
            s * binomial(k, j)
        })
        .collect();
    for _ in 0..m {
        let mut next = vec![0.0; coef.len()];
        for j in 1..coef.len() {
            let p = 2.0 * j as f64;
            next[j - 1] = -p * (p + f64::from(n) - 2.0) * coef[j];
        }
        coef = next;
    }
    coef.iter()
        .enumerate()
        .map(|(j, b)| {
            let q = f64::from(2 * m) + 2.0 * j as f64;
            if params.has_log() { b / (q * q) } else { b / q }
        })
        .sum()
}

fn binomial_int(n: u32, k: u32) -> i128 {
    (0..k).fold(1i128, |acc, i| acc * i128::from(n - i) / i128::from(i + 1))
}

/// The fundamental solution for fixed `(m, n)` and domain diameter.
#[derive(Debug, Clone)]
pub struct FundamentalSolution {
    params: DimensionParams,
    diam: f64,
    cmn: f64,
    expr: RadialExpr,
}

impl FundamentalSolution {
    pub fn new(params: DimensionParams, diam: f64) -> Self {
        assert!(diam > 0.0, "diameter must be positive");
        let cmn = cmn_constant(params.m(), params.n()).expect("validated params");
        let dim = params.n() as usize;
        let p = params.degree();
        let expr = if params.has_log() {
            RadialExpr::power(dim, p, cmn * diam.ln()).add(&RadialExpr::power_log(dim, p, -cmn))
        } else {
            RadialExpr::power(dim, p, cmn)
        };
        FundamentalSolution {
            params,
            diam,
            cmn,
            expr,
        }
    }

    pub fn params(&self) -> DimensionParams {
        self.params
    }

    pub fn diam(&self) -> f64 {
        self.diam
    }

    pub fn cmn(&self) -> f64 {
        self.cmn
    }

    /// `Γ` as a symbolic radial expression.
    pub fn expr(&self) -> &RadialExpr {
        &self.expr
    }

    pub fn value(&self, z: &[f64]) -> Result<f64> {
        check_nonzero(z)?;
        Ok(self.value_unchecked(z))
    }

    pub(crate) fn value_unchecked(&self, z: &[f64]) -> f64 {
        let r = norm(z);
        let p = self.params.degree();
        if self.params.has_log() {
            self.cmn * r.powi(p) * (self.diam / r).ln()
        } else {
            self.cmn * r.powi(p)
        }
    }

    /// Symbolic `∂^α Γ` (derivative in the argument `z = x - y`).
    pub fn derivative_expr(&self, alpha: &MultiIndex) -> RadialExpr {
        self.expr.derivative_multi(alpha.components())
    }

    /// `∂_x^{α_x} ∂_y^{α_y} Γ(x - y)`.
    pub fn mixed_derivative(
        &self,
        alpha_x: &MultiIndex,
        alpha_y: &MultiIndex,
        x_minus_y: &[f64],
    ) -> Result<f64> {
        check_nonzero(x_minus_y)?;
        let e = self.derivative_expr(&alpha_x.add(alpha_y));
        let sign = if alpha_y.order().is_multiple_of(2) { 1.0 } else { -1.0 };
        Ok(sign * e.eval(x_minus_y))
    }
}

fn norm(z: &[f64]) -> f64 {
    z.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn check_nonzero(z: &[f64]) -> Result<()> {
    if z.iter().all(|&v| v == 0.0) {
        Err(Error::SingularPoint)
    } else {
        Ok(())
    }
}

/// `Γ(x)`.
pub fn gamma_eval(params: DimensionParams, x: &[f64], diam: f64) -> Result<f64> {
    check_dim(params, x)?;
    FundamentalSolution::new(params, diam).value(x)
}

/// `∂_x^{α_x} ∂_y^{α_y} Γ(x - y)` evaluated at `x - y`.
pub fn gamma_derivative(
    params: DimensionParams,
    alpha_x: &MultiIndex,
    alpha_y: &MultiIndex,
    x_minus_y: &[f64],
    diam: f64,
) -> Result<f64> {
    check_dim(params, x_minus_y)?;
    FundamentalSolution::new(params, diam).mixed_derivative(alpha_x, alpha_y, x_minus_y)
}

fn check_dim(params: DimensionParams, x: &[f64]) -> Result<()> {
    if x.len() != params.n() as usize {
        return Err(Error::DimensionOutOfRange {
            m: params.m(),
            n: x.len() as u32,
        });
    }
    Ok(())
}

/// `∂_y^α Γ(x - y) = P^α(x - y) log(diam / |x - y|) + Q^α(x - y)` with `P^α`
/// a homogeneous polynomial and `Q^α` homogeneous, both of degree
/// `2m - n - |α|` and independent of `diam`.
#[derive(Debug, Clone)]
pub struct SingularDecomposition {
    params: DimensionParams,
    alpha: MultiIndex,
    diam: f64,
    p_alpha: RadialExpr,
    q_alpha: RadialExpr,
}

impl SingularDecomposition {
    pub fn alpha(&self) -> &MultiIndex {
        &self.alpha
    }

    pub fn diam(&self) -> f64 {
        self.diam
    }

    /// Homogeneity degree `2m - n - |α|`.
    pub fn degree(&self) -> i32 {
        self.params.degree() - self.alpha.order() as i32
    }

    pub fn p_alpha(&self) -> &RadialExpr {
        &self.p_alpha
    }

    pub fn q_alpha(&self) -> &RadialExpr {
        &self.q_alpha
    }

    pub fn p_is_zero(&self) -> bool {
        self.p_alpha.is_empty()
    }

    pub fn p(&self, z: &[f64]) -> f64 {
        self.p_alpha.eval(z)
    }

    pub fn q(&self, z: &[f64]) -> f64 {
        self.q_alpha.eval(z)
    }

    /// Values of `Q^α` on the unit sphere, together with the degree, give
    /// `Q^α(z) = |z|^{deg} Q^α(z/|z|)`.
    pub fn q_on_sphere(&self, omega: &[f64]) -> f64 {
        let r = norm(omega);
        let unit: Vec<f64> = omega.iter().map(|v| v / r).collect();
        self.q_alpha.eval(&unit)
    }

    /// `P^α(z) log(L / |z|) + Q^α(z)` for a given length scale `L`; with
    /// `L = diam` this reproduces `∂_y^α Γ(x - y)`.
    pub fn eval_with_scale(&self, z: &[f64], scale: f64) -> f64 {
        let r = norm(z);
        let p = if self.p_is_zero() {
            0.0
        } else {
            self.p(z) * (scale / r).ln()
        };
        p + self.q(z)
    }

    pub fn eval(&self, z: &[f64]) -> f64 {
        self.eval_with_scale(z, self.diam)
    }

    /// `P^α(z) log(L/|z|) + Q^α(z)` as a symbolic expression in `z`.
    pub fn singular_expr(&self, scale: f64) -> RadialExpr {
        let dim = self.params.n() as usize;
        let mut e = self.q_alpha.clone();
        if !self.p_is_zero() {
            let log_part = RadialExpr::power(dim, 0, scale.ln())
                .add(&RadialExpr::power_log(dim, 0, -1.0));
            e = e.add(&self.p_alpha.mul(&log_part));
        }
        e
    }
}

pub fn decompose_log_polynomial(
    params: DimensionParams,
    alpha: &MultiIndex,
    diam: f64,
) -> Result<SingularDecomposition> {
    let dim = params.n() as usize;
    if alpha.dim() != dim {
        return Err(Error::SpecMismatch(format!(
            "multi-index {alpha} has {} components, expected {dim}",
            alpha.dim()
        )));
    }
    let cmn = cmn_constant(params.m(), params.n())?;
    let deg = params.degree();
    let sign = if alpha.order().is_multiple_of(2) { 1.0 } else { -1.0 };
    let (p_alpha, q_alpha) = if params.has_log() {
        let (_, v) = RadialExpr::power_log(dim, deg, -cmn)
            .derivative_multi(alpha.components())
            .split_log();
        let p = RadialExpr::power(dim, deg, cmn).derivative_multi(alpha.components());
        (p.scale(sign), v.scale(sign))
    } else {
        let q = RadialExpr::power(dim, deg, cmn).derivative_multi(alpha.components());
        (RadialExpr::zero(dim), q.scale(sign))
    };
    Ok(SingularDecomposition {
        params,
        alpha: alpha.clone(),
        diam,
        p_alpha,
        q_alpha,
    })
}

/// Polynomial bump `φ(x) = p(x) (1 - |x|^2/R^2)^k` supported in `B_R`, used
/// to test `(-Δ)^m Γ = δ` in the sense of distributions.
#[derive(Debug, Clone)]
pub struct BumpTestFunction {
    radius: f64,
    k: u32,
    poly: RadialExpr,
    expr: RadialExpr,
}

impl BumpTestFunction {
    /// `p` is given as `(β, c)` pairs; `k` should exceed `2m` so that `φ` is
    /// `C^{2m}` across the sphere.
    pub fn new(dim: usize, radius: f64, k: u32, poly: &[(Vec<u8>, f64)]) -> Self {
        let mut bump = RadialExpr::zero(dim);
        for j in 0..=k {
            let s = if j % 2 == 0 { 1.0 } else { -1.0 };
            let c = s * binomial(k, j) * radius.powi(-2 * j as i32);
            bump = bump.add(&RadialExpr::power(dim, 2 * j as i32, c));
        }
        let mut p = RadialExpr::zero(dim);
        for (beta, c) in poly {
            p = p.add(&RadialExpr::monomial(beta, *c));
        }
        BumpTestFunction {
            radius,
            k,
            expr: p.mul(&bump),
            poly: p,
        }
    }

    /// `p = 1 + Σ c_β x^β` over `1 ≤ |β| ≤ 3`, `c_β` uniform in `[-1, 1]`,
    /// radius uniform in `[0.5, 1.5]`.
    pub fn random<R: Rng>(dim: usize, m: u32, rng: &mut R) -> Self {
        let mut poly = vec![(vec![0u8; dim], 1.0)];
        for order in 1..=3 {
            for beta in MultiIndex::all_of_order(dim, order) {
                let b: Vec<u8> = beta.components().iter().map(|&v| v as u8).collect();
                poly.push((b, rng.random_range(-1.0..1.0)));
            }
        }
        let radius = rng.random_range(0.5..1.5);
        BumpTestFunction::new(dim, radius, 2 * m + 1, &poly)
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn expr(&self) -> &RadialExpr {
        &self.expr
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let r = norm(x);
        if r >= self.radius {
            return 0.0;
        }
        let t = r / self.radius;
        self.poly.eval(x) * (1.0 - t * t).powi(self.k as i32)
    }

    /// `max |φ|` over the origin, the axes, and a fixed pseudo-random
    /// sample of the ball; a lower bound for the true maximum.
    pub fn max_abs(&self) -> f64 {
        use rand::SeedableRng;
        let dim = self.expr.dim();
        let mut best = self.value(&vec![0.0; dim]).abs();
        for axis in 0..dim {
            for s in 1..40 {
                for sign in [-1.0, 1.0] {
                    let mut x = vec![0.0; dim];
                    x[axis] = sign * self.radius * f64::from(s) / 40.0;
                    best = best.max(self.value(&x).abs());
                }
            }
        }
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5eed);
        let mut x = vec![0.0; dim];
        for _ in 0..4000 {
            for v in x.iter_mut() {
                *v = rng.random_range(-self.radius..self.radius);
            }
            best = best.max(self.value(&x).abs());
        }
        best
    }
}

/// `∫ Γ (-Δ)^m φ dx`, with exact sphere moments in the angles and adaptive
/// Gauss–Kronrod in the radius. Equals `φ(0)` when `Γ` is
/// correctly normalised.
pub fn distributional_pairing(params: DimensionParams, phi: &BumpTestFunction, diam: f64) -> f64 {
    let gamma = FundamentalSolution::new(params, diam);
    let dim = params.n() as usize;
    radial_kernel_pairing(phi, params.m(), |r| {
        let mut z = vec![0.0; dim];
        z[0] = r;
        gamma.value_unchecked(&z)
    })
}

/// `∫ K(|x|) (-Δ)^m φ(x) dx` for a radial kernel `K` that may be singular
/// (integrably) at the origin.
pub fn radial_kernel_pairing(phi: &BumpTestFunction, m: u32, kernel: impl Fn(f64) -> f64) -> f64 {
    let dim = phi.expr().dim();
    let lap = phi.expr().neg_laplacian_pow(m);
    // Each term c z^β r^p integrates over the sphere of radius r to
    // c r^{|β|+p} ∫_S ω^β dσ; collect the radial polynomial.
    let mut moments: HashMap<Vec<u8>, f64> = HashMap::new();
    let mut radial: HashMap<i32, f64> = HashMap::new();
    lap.for_each_term(|beta, p, has_log, _, c| {
        assert!(!has_log);
        let moment = *moments.entry(beta.to_vec()).or_insert_with(|| sphere_moment(beta));
        let e = beta.iter().map(|&b| i32::from(b)).sum::<i32>() + p;
        *radial.entry(e).or_insert(0.0) += c * moment;
    });
    let mut radial: Vec<(i32, f64)> = radial.into_iter().collect();
    radial.sort_by_key(|t| t.0);
    let integrand = |r: f64| {
        if r <= 0.0 {
            return 0.0;
        }
        let a: f64 = radial.iter().map(|(e, c)| c * r.powi(*e)).sum();
        kernel(r) * a * r.powi(dim as i32 - 1)
    };
    // Split at a geometric sequence toward 0 so the log/power singularity is
    // resolved, excluding only [0, 1e-14 R].
    let mut total = 0.0;
    let mut hi = phi.radius();
    while hi > 1e-14 * phi.radius() {
        let lo = hi * 0.125;
        total += adaptive_gk15(integrand, lo, hi, 1e-15, 1e-14).0;
        hi = lo;
    }
    total
}
