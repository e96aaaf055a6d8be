use std::f64::consts::PI;
use std::sync::{Arc, Mutex};

use polygreen::geometry::{Domain, Shape};
use polygreen::grid::{DiscreteField, GridSpec};
use polygreen::operator::{
    assemble_operator, discrete_green, discrete_green_many, regular_part, solve_dirichlet, RESIDUAL_TARGET,
};
use polygreen::{DimensionParams, MultiIndex};

// Large factorizations run one at a time.
static HEAVY: Mutex<()> = Mutex::new(());

fn operator(domain: &Domain, m: u32, h: f64) -> polygreen::operator::DiscreteOperator {
    let grid = Arc::new(GridSpec::for_order(domain, h, m, usize::MAX).unwrap());
    assemble_operator(domain, m, grid).unwrap()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

#[test]
fn applying_the_operator_inverts_the_solve() {
    let sq = Domain::new(Shape::Rectangle { sides: vec![1.0, 1.0] }, 2).unwrap();
    for m in [1, 2, 3] {
        let op = operator(&sq, m, 1.0 / 32.0);
        let f = DiscreteField::from_fn(op.grid().clone(), |x| (3.0 * x[0]).sin() + x[1] * x[1]);
        let u = solve_dirichlet(&op, &f).unwrap();
        let back = op.apply(&u).unwrap();
        let r: Vec<f64> = back.values().iter().zip(f.values()).map(|(a, b)| a - b).collect();
        assert!(norm(&r) <= 1e3 * RESIDUAL_TARGET * norm(f.values()), "m={m}");
    }
}

#[test]
fn torsion_function_of_the_disk() {
    let _g = HEAVY.lock().unwrap_or_else(|e| e.into_inner());
    let disk = Domain::unit_ball(2);
    let op = operator(&disk, 1, 1.0 / 128.0);
    let f = DiscreteField::from_fn(op.grid().clone(), |_| 1.0);
    let u = solve_dirichlet(&op, &f).unwrap();
    let centre = u.value_at_point(&[0.0, 0.0]);
    assert!((centre - 0.25).abs() <= 0.01 * 0.25, "u(0) = {centre}");
}

#[test]
fn discrete_green_function_is_symmetric() {
    let sq = Domain::new(Shape::Rectangle { sides: vec![1.0, 1.0] }, 2).unwrap();
    let op = operator(&sq, 2, 1.0 / 48.0);
    let ys = vec![vec![0.3, 0.4], vec![0.7, 0.25], vec![0.5, 0.8]];
    let cols = discrete_green_many(&op, &ys).unwrap();
    let scale = cols.iter().map(|c| c.field.max_abs()).fold(0.0, f64::max);
    for a in &cols {
        for b in &cols {
            let gab = a.field.at(&b.source);
            let gba = b.field.at(&a.source);
            assert!((gab - gba).abs() <= 1e-9 * scale, "{gab} vs {gba}");
        }
    }
}

#[test]
fn laplace_green_function_of_the_ball() {
    let _g = HEAVY.lock().unwrap_or_else(|e| e.into_inner());
    let ball = Domain::unit_ball(3);
    let op = operator(&ball, 1, 1.0 / 32.0);
    let col = discrete_green(&op, &[0.0, 0.0, 0.0]).unwrap();
    assert_eq!(col.snap_distance, 0.0);
    // Images: G(x, 0) = (1/|x| - 1) / 4π.
    let g = col.field.value_at_point(&[0.5, 0.0, 0.0]);
    let exact = 1.0 / (4.0 * PI);
    assert!((g - exact).abs() <= 0.02 * exact, "G = {g}");

    let params = DimensionParams::new(1, 3).unwrap();
    let s = regular_part(&col, params, ball.diameter()).unwrap();
    for x in [[0.5, 0.0, 0.0], [0.0, -0.4, 0.2], [0.25, 0.25, 0.25]] {
        let v = s.value_at_point(&x);
        assert!((v + exact).abs() <= 0.02 * exact, "S({x:?}) = {v}");
    }
}

#[test]
fn centred_differences_are_second_order() {
    let sq = Domain::new(Shape::Rectangle { sides: vec![1.0, 1.0] }, 2).unwrap();
    let f = |x: &[f64]| (2.0 * x[0]).sin() * (1.5 * x[1]).cos();
    let alpha = MultiIndex::new(vec![1, 1]);
    let exact = -3.0 * (2.0f64 * 0.5).cos() * (1.5f64 * 0.5).sin();
    let err = |h: f64| {
        let grid = Arc::new(GridSpec::new(&sq, h, 2).unwrap());
        let u = DiscreteField::from_fn(grid, f);
        (u.derivative_at_point(&[0.5, 0.5], &alpha).unwrap() - exact).abs()
    };
    let (e1, e2) = (err(1.0 / 16.0), err(1.0 / 32.0));
    let order = (e1 / e2).log2();
    assert!((order - 2.0).abs() < 0.2, "observed order {order}");
}

#[test]
fn source_near_the_boundary_is_rejected() {
    let sq = Domain::new(Shape::Rectangle { sides: vec![1.0, 1.0] }, 2).unwrap();
    let op = operator(&sq, 2, 1.0 / 16.0);
    assert!(discrete_green(&op, &[0.1, 0.5]).is_err());
}
