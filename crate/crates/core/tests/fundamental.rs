use std::f64::consts::PI;

use polygreen::params::MultiIndex;
use polygreen::{
    cmn_constant, decompose_log_polynomial, distributional_pairing, gamma_derivative,
    BumpTestFunction, DimensionParams, FundamentalSolution,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn factorial(k: u32) -> f64 {
    (1..=k).map(f64::from).product()
}

/// Γ(s) for s a positive or negative half-integer, or a positive integer.
fn gamma_fn(twice: i32) -> f64 {
    if twice % 2 == 0 {
        assert!(twice > 0);
        return factorial((twice / 2 - 1) as u32);
    }
    // Γ(1/2 + k) for integer k, via the recurrence in either direction.
    let mut v = PI.sqrt();
    let mut s = 0.5;
    let target = f64::from(twice) / 2.0;
    while s < target - 0.25 {
        v *= s;
        s += 1.0;
    }
    while s > target + 0.25 {
        s -= 1.0;
        v /= s;
    }
    v
}

/// Classical closed forms for the fundamental solution constant.
fn closed_form(m: u32, n: u32) -> f64 {
    let nf = f64::from(n);
    if n % 2 == 1 {
        gamma_fn(n as i32 - 2 * m as i32)
            / (4f64.powi(m as i32) * PI.powf(nf / 2.0) * factorial(m - 1))
    } else {
        let k = m - n / 2;
        let sign = if k.is_multiple_of(2) { 1.0 } else { -1.0 };
        sign / (2f64.powi(2 * m as i32 - 1) * PI.powf(nf / 2.0) * factorial(m - 1) * factorial(k))
    }
}

#[test]
fn constants_match_classical_closed_forms() {
    for m in 1..=5 {
        for n in 2..=2 * m + 1 {
            let c = cmn_constant(m, n).unwrap();
            let e = closed_form(m, n);
            assert!((c - e).abs() <= 1e-10 * e.abs(), "({m},{n}) {c} vs {e}");
        }
    }
}

#[test]
fn pairing_reproduces_point_value() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for (m, n) in [(1, 2), (1, 3), (2, 2), (2, 3), (2, 4), (3, 3)] {
        let params = DimensionParams::new(m, n).unwrap();
        for _ in 0..3 {
            let phi = BumpTestFunction::random(n as usize, m, &mut rng);
            let got = distributional_pairing(params, &phi, 3.0);
            let expect = phi.value(&vec![0.0; n as usize]);
            assert!(
                (got - expect).abs() <= 1e-6 * phi.max_abs(),
                "({m},{n}): {got} vs {expect}"
            );
        }
    }
}

#[test]
fn even_dimension_pairing_ignores_diameter() {
    let params = DimensionParams::new(2, 2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let phi = BumpTestFunction::random(2, 2, &mut rng);
    let a = distributional_pairing(params, &phi, 1.7);
    let b = distributional_pairing(params, &phi, 40.0);
    assert!((a - b).abs() < 1e-9 * phi.max_abs());
}

fn numeric_derivative(g: &FundamentalSolution, alpha: &[u32], z: &[f64]) -> f64 {
    // Nested fourth-order central differences.
    let h = 1e-3 * z.iter().map(|v| v * v).sum::<f64>().sqrt();
    fn rec(g: &FundamentalSolution, alpha: &mut Vec<u32>, z: &mut Vec<f64>, h: f64) -> f64 {
        match alpha.iter().position(|&a| a > 0) {
            None => g.value(z).unwrap(),
            Some(k) => {
                alpha[k] -= 1;
                let mut acc = 0.0;
                for (s, w) in [(1.0, 8.0), (-1.0, -8.0), (2.0, -1.0), (-2.0, 1.0)] {
                    z[k] += s * h;
                    acc += w * rec(g, alpha, z, h);
                    z[k] -= s * h;
                }
                alpha[k] += 1;
                acc / (12.0 * h)
            }
        }
    }
    rec(g, &mut alpha.to_vec(), &mut z.to_vec(), h)
}

#[test]
fn symbolic_derivatives_match_differencing() {
    for (m, n) in [(1, 3), (2, 2), (2, 3), (3, 3), (2, 4)] {
        let params = DimensionParams::new(m, n).unwrap();
        let g = FundamentalSolution::new(params, 2.5);
        let z: Vec<f64> = (0..n).map(|k| 0.3 - 0.17 * k as f64).collect();
        for order in 0..=2 {
            for alpha in MultiIndex::all_of_order(n as usize, order) {
                let exact = g.derivative_expr(&alpha).eval(&z);
                let approx = numeric_derivative(&g, alpha.components(), &z);
                let scale = exact.abs().max(g.value(&z).unwrap().abs()).max(1e-3);
                assert!((exact - approx).abs() < 1e-7 * scale, "({m},{n}) {alpha}");
            }
        }
    }
}

#[test]
fn planar_biharmonic_third_derivative_scales_like_inverse_distance() {
    let params = DimensionParams::new(2, 2).unwrap();
    let alpha = MultiIndex::axis(2, 0, 3);
    let zero = MultiIndex::zero(2);
    let f = |r: f64| gamma_derivative(params, &alpha, &zero, &[r, 0.0], 1.0).unwrap();
    let ratio = f(1e-3) / f(1e-4);
    assert!((ratio - 0.1).abs() < 1e-10);
}

proptest! {
    #[test]
    fn decomposition_reconstructs_derivatives(
        (m, n) in prop::sample::select(vec![(1u32, 2u32), (1, 3), (2, 2), (2, 3), (3, 3), (3, 4), (3, 5), (2, 4)]),
        seed in 0u64..1000,
        diam in 0.5f64..5.0,
    ) {
        use rand::Rng;
        let params = DimensionParams::new(m, n).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let z: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        prop_assume!(z.iter().map(|v| v * v).sum::<f64>() > 1e-4);
        let g = FundamentalSolution::new(params, diam);
        for order in 0..=params.lambda() {
            for alpha in MultiIndex::all_of_order(n as usize, order) {
                let d = decompose_log_polynomial(params, &alpha, diam).unwrap();
                let zero = MultiIndex::zero(n as usize);
                let direct = g.mixed_derivative(&zero, &alpha, &z).unwrap();
                let rebuilt = d.eval(&z);
                prop_assert!((direct - rebuilt).abs() <= 1e-10 * direct.abs().max(1e-8));
                if n % 2 == 1 {
                    prop_assert!(d.p_is_zero());
                }
            }
        }
    }

    #[test]
    fn homogeneity_of_derivatives(
        (m, n) in prop::sample::select(vec![(1u32, 3u32), (2, 3), (3, 3), (2, 2), (3, 4)]),
        seed in 0u64..1000,
        s in 0.1f64..10.0,
    ) {
        use rand::Rng;
        let params = DimensionParams::new(m, n).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let z: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        prop_assume!(z.iter().map(|v| v * v).sum::<f64>() > 1e-4);
        let sz: Vec<f64> = z.iter().map(|v| v * s).collect();
        let diam = 2.0;
        for order in 0..=params.lambda() {
            for alpha in MultiIndex::all_of_order(n as usize, order) {
                let d = decompose_log_polynomial(params, &alpha, diam).unwrap();
                let deg = d.degree();
                // P(sz) log(D/|sz|) + Q(sz) = s^deg (value(z) - P(z) log s)
                let lhs = d.eval(&sz);
                let correction = if d.p_is_zero() { 0.0 } else { d.p(&z) * s.ln() };
                let rhs = s.powi(deg) * (d.eval(&z) - correction);
                prop_assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(rhs.abs()).max(1e-8));
                if n % 2 == 1 {
                    prop_assert!((lhs - s.powi(deg) * d.eval(&z)).abs() <= 1e-12 * lhs.abs().max(1e-12));
                }
            }
        }
    }
}
