//! One-dimensional and spherical quadrature rules.

use std::f64::consts::PI;

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(npts: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(npts >= 1);
    let mut nodes = vec![0.0; npts];
    let mut weights = vec![0.0; npts];
    let nf = npts as f64;
    for i in 0..npts.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(npts, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(npts, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[npts - 1 - i] = x;
        weights[i] = w;
        weights[npts - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    (p1, nf * (x * p1 - p0) / (x * x - 1.0))
}

/// Fixed-order Gauss–Legendre integral of `f` over `[a, b]`.
pub fn integrate_gl(f: impl Fn(f64) -> f64, a: f64, b: f64, npts: usize) -> f64 {
    let (x, w) = gauss_legendre(npts);
    let c = 0.5 * (a + b);
    let s = 0.5 * (b - a);
    x.iter().zip(&w).map(|(xi, wi)| wi * f(c + s * xi)).sum::<f64>() * s
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let s = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for j in 0..7 {
        let fp = f(c + s * XGK[j]);
        let fm = f(c - s * XGK[j]);
        k += WGK[j] * (fp + fm);
        if j % 2 == 1 {
            g += WG[j / 2] * (fp + fm);
        }
    }
    (k * s, ((k - g) * s).abs())
}

/// Adaptive Gauss–Kronrod (7/15) integration by global interval bisection.
/// Returns the integral and the summed error estimate.
pub fn adaptive_gk15(
    f: impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> (f64, f64) {
    let f = &f as &dyn Fn(f64) -> f64;
    let (v0, e0) = gk15(f, a, b);
    let mut intervals = vec![(a, b, v0, e0)];
    let mut total = v0;
    let mut err = e0;
    for _ in 0..2000 {
        if err <= abs_tol.max(rel_tol * total.abs()) {
            break;
        }
        let (idx, _) = intervals
            .iter()
            .enumerate()
            .max_by(|p, q| p.1 .3.total_cmp(&q.1 .3))
            .expect("non-empty");
        let (lo, hi, v, e) = intervals.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            intervals.push((lo, hi, v, 0.0));
            err -= e;
            continue;
        }
        let (vl, el) = gk15(f, lo, mid);
        let (vr, er) = gk15(f, mid, hi);
        total += vl + vr - v;
        err += el + er - e;
        intervals.push((lo, mid, vl, el));
        intervals.push((mid, hi, vr, er));
    }
    let total: f64 = intervals.iter().map(|t| t.2).sum();
    let err: f64 = intervals.iter().map(|t| t.3).sum();
    (total, err)
}

/// Product quadrature on the unit sphere `S^{dim-1}` built recursively from
/// polar angles (Gauss–Legendre in each angle, trapezoid on the circle).
/// Exact for polynomials of degree below `2 * npts` in each angle.
pub fn sphere_rule(dim: usize, npts: usize) -> Vec<(Vec<f64>, f64)> {
    assert!(dim >= 2);
    if dim == 2 {
        let k = 2 * npts;
        let w = 2.0 * PI / k as f64;
        return (0..k)
            .map(|i| {
                let t = 2.0 * PI * i as f64 / k as f64;
                (vec![t.cos(), t.sin()], w)
            })
            .collect();
    }
    let lower = sphere_rule(dim - 1, npts);
    let (x, w) = gauss_legendre(2 * npts + 8);
    let mut out = Vec::with_capacity(lower.len() * x.len());
    for (xi, wi) in x.iter().zip(&w) {
        let theta = 0.5 * PI * (xi + 1.0);
        let (s, c) = theta.sin_cos();
        let wt = wi * 0.5 * PI * s.powi(dim as i32 - 2);
        for (omega, wo) in &lower {
            let mut p = Vec::with_capacity(dim);
            p.push(c);
            p.extend(omega.iter().map(|v| v * s));
            out.push((p, wt * wo));
        }
    }
    out
}

/// Surface measure of `S^{n-1}`.
pub fn sphere_area(n: u32) -> f64 {
    2.0 * PI.powf(f64::from(n) / 2.0) / gamma_half(n)
}

/// `∫_{S^{n-1}} ω^β dσ = 2 Π Γ((β_i+1)/2) / Γ((|β|+n)/2)`, zero unless every
/// `β_i` is even.
pub fn sphere_moment(beta: &[u8]) -> f64 {
    if beta.iter().any(|b| b % 2 == 1) {
        return 0.0;
    }
    let order: u32 = beta.iter().map(|&b| u32::from(b)).sum();
    let num: f64 = beta.iter().map(|&b| gamma_half(u32::from(b) + 1)).product();
    2.0 * num / gamma_half(order + beta.len() as u32)
}

/// `Γ(k/2)` for positive integers `k`.
pub fn gamma_half(k: u32) -> f64 {
    assert!(k >= 1);
    if k.is_multiple_of(2) {
        (1..k / 2).map(f64::from).product()
    } else {
        let mut v = PI.sqrt();
        let mut a = 0.5;
        while a < f64::from(k) / 2.0 - 0.25 {
            v *= a;
            a += 1.0;
        }
        v
    }
}
