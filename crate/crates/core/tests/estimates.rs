use std::f64::consts::PI;
use std::sync::Arc;

use polygreen::estimates::{
    bound_rhs, bound_rhs_green, corrector_field, corrector_source, dirichlet_rhs, source_derivative,
    BoundSpec, BoundTarget, CorrectorSource, DirichletDatum,
};
use polygreen::geometry::{Domain, Region, RegionClassifier, SamplePair, Shape};
use polygreen::grid::{DiscreteField, GridSpec};
use polygreen::operator::{assemble_operator, discrete_green};
use polygreen::{CutoffFunction, DimensionParams, MultiIndex};
use proptest::prelude::*;

fn raw_pair(d_x: f64, d_y: f64, sep: f64) -> SamplePair {
    SamplePair {
        x: vec![0.0, 0.0, 0.0],
        y: vec![sep, 0.0, 0.0],
        d_x,
        d_y,
        sep,
    }
}

fn all_specs() -> Vec<(DimensionParams, BoundSpec)> {
    let mut out = Vec::new();
    for (m, n) in [(1, 2), (1, 3), (2, 2), (2, 3), (3, 3), (2, 4), (3, 5)] {
        let p = DimensionParams::new(m, n).unwrap();
        for regular in [false, true] {
            for s in BoundSpec::admissible(p, regular, 3) {
                out.push((p, s));
            }
        }
    }
    out
}

proptest! {
    #[test]
    fn rhs_symmetric_under_exchange(dx in 0.01f64..2.0, dy in 0.01f64..2.0, sep in 0.001f64..3.0) {
        let pair = raw_pair(dx, dy, sep);
        for (p, s) in all_specs() {
            let a = bound_rhs(&s, p, &pair, 2.0).unwrap();
            let b = bound_rhs(&s.swapped(), p, &pair.swapped(), 2.0).unwrap();
            prop_assert!((a - b).abs() <= 1e-13 * a.abs(), "{s} {a} {b}");
            prop_assert!(a > 0.0);
        }
    }

    #[test]
    fn gr1_nonincreasing_in_sep(dx in 0.01f64..2.0, dy in 0.01f64..2.0, sep in 0.001f64..3.0, t in 1.0f64..4.0) {
        for (p, s) in all_specs() {
            if s.target != BoundTarget::Gr1 || s.exponent(p) <= 0 {
                continue;
            }
            let a = bound_rhs_green(&s, p, &raw_pair(dx, dy, sep)).unwrap();
            let b = bound_rhs_green(&s, p, &raw_pair(dx, dy, sep * t)).unwrap();
            prop_assert!(b <= a * (1.0 + 1e-13), "{s}: {a} -> {b}");
        }
    }

    #[test]
    fn high_and_low_agree_at_equality(dx in 0.01f64..2.0, dy in 0.01f64..2.0, sep in 0.001f64..3.0) {
        let pair = raw_pair(dx, dy, sep);
        for (p, s) in all_specs() {
            let (other, ok) = match s.target {
                BoundTarget::Gr1 => (BoundTarget::Gr2, true),
                BoundTarget::Gr1s => (BoundTarget::Gr2s, true),
                _ => (s.target, false),
            };
            if !ok || s.exponent(p) != 0 {
                continue;
            }
            let t = BoundSpec::new(other, s.i, s.j);
            let a = bound_rhs(&s, p, &pair, 2.0).unwrap();
            let b = bound_rhs(&t, p, &pair, 2.0).unwrap();
            prop_assert!((a - b).abs() <= 1e-14 * a, "{s} vs {t}: {a} {b}");
        }
    }

    #[test]
    fn near_pairs_have_unit_prefactor(d in 0.3f64..1.0, frac in 0.001f64..0.04) {
        let cls = RegionClassifier::default();
        let domain = Domain::unit_ball(3);
        let x = vec![0.0, 0.0, 1.0 - d];
        let y = vec![d * frac, 0.0, 1.0 - d];
        let pair = SamplePair::new(&domain, x, y).unwrap();
        prop_assume!(cls.classify(&pair) == Region::CaseII);
        let p = DimensionParams::new(2, 3).unwrap();
        let lam = p.lambda();
        let s = BoundSpec::new(BoundTarget::Gr1, lam, lam);
        let rhs = bound_rhs_green(&s, p, &pair).unwrap();
        prop_assert!((rhs - pair.sep.powi(-s.exponent(p))).abs() <= 1e-13 * rhs);
        // log(1 + t) and 1 + log t are comparable once t ≥ N
        let t = pair.d_x.min(pair.d_y) / pair.sep;
        let q = (1.0 + t.ln()) / (1.0 + t).ln();
        prop_assert!((0.25..=4.0).contains(&q), "{q}");
    }
}

#[test]
fn spec_mismatch_errors() {
    let p = DimensionParams::new(2, 3).unwrap();
    let e = BoundSpec::new(BoundTarget::Gr1, 2, 1).validate(p).unwrap_err();
    assert!(e.to_string().contains("λ = 1"), "{e}");
    assert!(bound_rhs_green(&BoundSpec::new(BoundTarget::Gr3, 0, 0), p, &raw_pair(1.0, 1.0, 0.5)).is_err());
}

#[test]
fn laplace_commutator_matches_hand_expansion() {
    // f_0 = (Δη) Γ + 2 ∇η·∇Γ for Γ = 1/(4π r), η = η(r/d)
    let p = DimensionParams::new(1, 3).unwrap();
    let cutoff = CutoffFunction::new();
    let y = vec![0.1, -0.05, 0.02];
    let d = 0.6;
    let src = CorrectorSource::new(p, &MultiIndex::zero(3), &y, d, 2.0).unwrap();
    let mut checked = 0;
    for k in 0..100 {
        let t = k as f64 / 99.0;
        let r = d * (0.26 + 0.23 * t);
        let dir = [(1.7 * k as f64).cos(), (1.7 * k as f64).sin() * 0.6, 0.8 * (0.3 * k as f64).sin()];
        let nd = (dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]).sqrt();
        let x: Vec<f64> = (0..3).map(|a| y[a] + r * dir[a] / nd).collect();
        let e1 = cutoff.scaled_derivative(1, r, d);
        let e2 = cutoff.scaled_derivative(2, r, d);
        let g = 1.0 / (4.0 * PI * r);
        let dg = -1.0 / (4.0 * PI * r * r);
        let lap_eta = e2 + 2.0 / r * e1;
        let want = lap_eta * g + 2.0 * e1 * dg;
        let got = src.value(&x, &cutoff);
        assert!((got - want).abs() <= 1e-8 * want.abs().max(1e-3), "r={r}: {got} vs {want}");
        checked += 1;
    }
    assert_eq!(checked, 100);
}

#[test]
fn source_supported_in_annulus_and_scale_invariant() {
    let cutoff = CutoffFunction::new();
    for (m, n, order) in [(2u32, 3u32, 1u32), (2, 2, 1), (1, 3, 0)] {
        let p = DimensionParams::new(m, n).unwrap();
        let alpha = MultiIndex::axis(n as usize, 0, order);
        let mut scaled = Vec::new();
        for k in 0..10 {
            let d = 0.1 + 0.08 * k as f64;
            let y = vec![0.0; n as usize];
            let src = CorrectorSource::new(p, &alpha, &y, d, 2.0).unwrap();
            let mut sup = 0.0f64;
            for s in 0..400 {
                let r = d * s as f64 / 399.0 * 0.7;
                let mut x = vec![0.0; n as usize];
                x[0] = r * (0.3 * s as f64).cos();
                x[1] = r * (0.3 * s as f64).sin();
                let v = src.value(&x, &cutoff);
                if r < 0.25 * d || r > 0.5 * d {
                    assert_eq!(v, 0.0);
                }
                sup = sup.max(v.abs());
            }
            scaled.push(sup * d.powi((n + order) as i32));
        }
        let lo = scaled.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = scaled.iter().cloned().fold(0.0, f64::max);
        assert!(lo > 0.0 && hi <= 2.0 * lo, "({m},{n}) {scaled:?}");
    }
}

#[test]
fn corrector_near_and_far_zones() {
    let d = Domain::unit_ball(2);
    let h = 1.0 / 64.0;
    let grid = Arc::new(GridSpec::for_order(&d, h, 1, usize::MAX).unwrap());
    let op = assemble_operator(&d, 1, grid.clone()).unwrap();
    let p = DimensionParams::new(1, 2).unwrap();
    let cutoff = CutoffFunction::new();
    let y = [0.0, 0.0];
    let r0 = corrector_field(&op, p, &MultiIndex::zero(2), &y, &cutoff).unwrap();
    let g = discrete_green(&op, &y).unwrap();
    let dy = d.distance_to_boundary(&y).unwrap();
    let tau = 2.0 * PI;
    let mut near = 0;
    for k in 0..grid.num_interior() {
        let x = grid.node_coords(k);
        let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
        if r >= 0.5 * dy {
            assert_eq!(r0.values()[k], g.field.values()[k]);
        } else if r >= 8.0 * h {
            // images: G(x, 0) = log(1/r)/2π and P^0 log(d/r) + Q^0 = log(d/r)/2π
            let eta = cutoff.value(r / dy);
            let want = (-r.ln() - eta * (dy / r).ln()) / tau;
            assert!((r0.values()[k] - want).abs() < 0.01 / tau, "r={r}");
            if r <= 0.25 * dy {
                // η = 1: the corrector is G - Γ with the log scaled by d(y) = 1
                assert!((r0.values()[k] - 0.0).abs() < 0.01 / tau);
                near += 1;
            }
        }
    }
    assert!(near > 100);
}

#[test]
fn corrector_source_matches_discrete_operator() {
    // away from the source, (-Δ_h) R_h = -(-Δ_h)(ηΓ) approximates f_0 to O(h²)
    let d = Domain::unit_ball(2);
    let p = DimensionParams::new(1, 2).unwrap();
    let cutoff = CutoffFunction::new();
    let y = [0.125, -0.0625];
    let mut errs = Vec::new();
    for inv in [48.0, 96.0] {
        let h = 1.0 / inv;
        let grid = Arc::new(GridSpec::for_order(&d, h, 1, usize::MAX).unwrap());
        let op = assemble_operator(&d, 1, grid.clone()).unwrap();
        let rf = corrector_field(&op, p, &MultiIndex::zero(2), &y, &cutoff).unwrap();
        let applied = op.apply(&rf).unwrap();
        let sym = corrector_source(p, &MultiIndex::zero(2), &y, &grid, &cutoff).unwrap();
        let dy = d.distance_to_boundary(&y).unwrap();
        let mut err = 0.0f64;
        let mut scale = 0.0f64;
        for k in 0..grid.num_interior() {
            let x = grid.node_coords(k);
            let r = ((x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2)).sqrt();
            if r > 0.2 * dy {
                err = err.max((applied.values()[k] - sym.values()[k]).abs());
                scale = scale.max(sym.values()[k].abs());
            }
        }
        errs.push(err / scale);
    }
    assert!(errs[1] < 0.05 && errs[1] < 0.5 * errs[0], "{errs:?}");
}

#[test]
fn corrector_source_matches_stencil_of_cutoff_product() {
    // f_α = -(-Δ)^m (η S) in the annulus; the polyharmonic stencil applied to
    // the analytic η S at h, h/2, h/4, Richardson-extrapolated, must agree
    let cutoff = CutoffFunction::new();
    let cases = [
        (2u32, 3u32, MultiIndex::axis(3, 0, 1)),
        (2, 2, MultiIndex::axis(2, 1, 1)),
        (2, 2, MultiIndex::zero(2)),
        (3, 3, MultiIndex::zero(3)),
        (3, 5, MultiIndex::axis(5, 2, 1)),
    ];
    for (m, n, alpha) in cases {
        let p = DimensionParams::new(m, n).unwrap();
        let dim = n as usize;
        let diam = 2.0;
        let dy = 0.8;
        let y = vec![0.0; dim];
        let src = CorrectorSource::new(p, &alpha, &y, dy, diam).unwrap();
        let dec = polygreen::decompose_log_polynomial(p, &alpha, diam).unwrap();
        let stencil = polygreen::operator::polyharmonic_stencil(m, dim);
        let g = |x: &[f64]| {
            let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            -cutoff.value(r / dy) * dec.eval_with_scale(x, dy)
        };
        let apply = |x: &[f64], h: f64| {
            stencil
                .iter()
                .map(|(o, c)| {
                    let z: Vec<f64> = x.iter().zip(o).map(|(a, b)| a + *b as f64 * h).collect();
                    c * g(&z)
                })
                .sum::<f64>()
                / h.powi(2 * m as i32)
        };
        for k in 0..6 {
            let r = dy * (0.3 + 0.03 * k as f64);
            let u: Vec<f64> = (0..dim).map(|a| (0.7 * k as f64 + 1.3 * a as f64 + 0.2).cos()).collect();
            let nu = u.iter().map(|v| v * v).sum::<f64>().sqrt();
            let x: Vec<f64> = u.iter().map(|v| r * v / nu).collect();
            let h = dy / 100.0;
            let (a1, a2, a4) = (apply(&x, h), apply(&x, h / 2.0), apply(&x, h / 4.0));
            let extrap = (64.0 * a4 - 20.0 * a2 + a1) / 45.0;
            let want = src.value(&x, &cutoff);
            let scale = want.abs().max(1e-3 * dy.powi(-(n as i32) - alpha.order() as i32));
            // the h^{-2m} division leaves ~1e-4 roundoff for m = 3
            let tol = if m >= 3 { 1e-3 } else { 1e-4 };
            assert!((extrap - want).abs() < tol * scale, "({m},{n}) α={alpha} r={r}: {extrap} vs {want}");
        }
    }
}

#[test]
fn source_derivative_zero_order_is_column() {
    let d = Domain::new(Shape::Rectangle { sides: vec![1.0, 1.0] }, 2).unwrap();
    let grid = Arc::new(GridSpec::new(&d, 1.0 / 32.0, 2).unwrap());
    let op = assemble_operator(&d, 2, grid.clone()).unwrap();
    let f = source_derivative(&op, &[16, 10], &MultiIndex::zero(2)).unwrap();
    let g = discrete_green(&op, &grid.coords_of(&[16, 10])).unwrap();
    assert_eq!(f.values(), g.field.values());
}

#[test]
fn dirichlet_rhs_basic_properties() {
    let d = Domain::unit_ball(3);
    let h = 1.0 / 16.0;
    let grid = Arc::new(GridSpec::new(&d, h, 2).unwrap());
    let p = DimensionParams::new(2, 3).unwrap();
    let zero = DirichletDatum {
        alpha: MultiIndex::zero(3),
        field: DiscreteField::zeros(grid.clone()),
    };
    let x = [0.25, 0.0, 0.0];
    assert_eq!(dirichlet_rhs(p, &x, &[zero]).unwrap(), 0.0);

    let c = [-4i64, 2, 1];
    let yc = grid.coords_of(&c);
    let k = grid.interior_index(&c).unwrap();
    let mut field = DiscreteField::zeros(grid.clone());
    field.values_mut()[k] = 1.0;
    let one = DirichletDatum { alpha: MultiIndex::zero(3), field: field.clone() };
    let got = dirichlet_rhs(p, &x, &[one]).unwrap();
    let dyc = d.distance_to_boundary(&yc).unwrap();
    let sep = ((x[0] - yc[0]).powi(2) + (x[1] - yc[1]).powi(2) + (x[2] - yc[2]).powi(2)).sqrt();
    let want = dyc * h.powi(3) / sep;
    assert!((got - want).abs() < 1e-14 * want, "{got} {want}");

    let twice = DirichletDatum { alpha: MultiIndex::zero(3), field: field.scaled(2.0) };
    let got2 = dirichlet_rhs(p, &x, &[twice]).unwrap();
    assert!((got2 - 2.0 * got).abs() < 1e-15 * got2);
}

#[test]
fn dirichlet_rhs_resolves_the_diagonal() {
    // unit weight on a (2J+1)^3 node block around x: the cells tile a cube of
    // half-width a = (J + 1/2) h, whose 1/|z| potential at the centre is
    // 4a² (3 log((√3+1)/(√3-1)) - π/2)
    let d = Domain::unit_ball(3);
    let p = DimensionParams::new(2, 3).unwrap();
    let h = 1.0 / 32.0;
    let grid = Arc::new(GridSpec::new(&d, h, 2).unwrap());
    let s3 = 3f64.sqrt();
    let cube = 3.0 * ((s3 + 1.0) / (s3 - 1.0)).ln() - PI / 2.0;
    let mut prev = f64::INFINITY;
    for j in [1i64, 2, 4] {
        let mut f = DiscreteField::zeros(grid.clone());
        for k in 0..grid.num_interior() {
            if grid.node_index(k).iter().all(|v| v.abs() <= j) {
                f.values_mut()[k] = 1.0 / d.distance_to_boundary(&grid.node_coords(k)).unwrap();
            }
        }
        let datum = DirichletDatum { alpha: MultiIndex::zero(3), field: f };
        let got = dirichlet_rhs(p, &[0.0; 3], &[datum]).unwrap();
        let a = (j as f64 + 0.5) * h;
        let exact = 4.0 * a * a * cube;
        let err = ((got - exact) / exact).abs();
        assert!(err < 5e-3 && err < prev, "J={j}: {got} vs {exact}");
        prev = err;
    }
}
