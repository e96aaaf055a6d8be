use polygreen::geometry::{
    classify_region, sample_interior_pairs, sample_pairs, Domain, Region, RegionClassifier,
    SamplePair, SamplePlan, Shape,
};
use proptest::prelude::*;

fn domains() -> Vec<Domain> {
    vec![
        Domain::unit_ball(3),
        Domain::unit_ball(2),
        Domain::new(Shape::PuncturedBall { radius: 1.0, epsilon: 0.0 }, 3).unwrap(),
        Domain::new(Shape::Annulus { r_in: 0.3, r_out: 1.0 }, 2).unwrap(),
        Domain::new(Shape::Ellipse { a: 1.0, b: 0.1 }, 2).unwrap(),
        Domain::new(Shape::Ellipse { a: 0.4, b: 1.3 }, 2).unwrap(),
        Domain::new(Shape::Rectangle { sides: vec![2.0, 1.0] }, 2).unwrap(),
        Domain::new(Shape::Rectangle { sides: vec![1.0, 1.0, 0.5] }, 3).unwrap(),
        Domain::new(Shape::LShape { size: 1.0, width: 0.5 }, 2).unwrap(),
    ]
}

fn on_boundary(domain: &Domain, p: &[f64]) -> bool {
    match domain.shape() {
        Shape::Ball { radius } => (p.iter().map(|v| v * v).sum::<f64>().sqrt() - radius).abs() < 1e-12,
        Shape::PuncturedBall { radius, .. } => {
            let r = p.iter().map(|v| v * v).sum::<f64>().sqrt();
            r == 0.0 || (r - radius).abs() < 1e-12
        }
        Shape::Annulus { r_in, r_out } => {
            let r = p.iter().map(|v| v * v).sum::<f64>().sqrt();
            (r - r_in).abs() < 1e-12 || (r - r_out).abs() < 1e-12
        }
        Shape::Ellipse { a, b } => ((p[0] / a).powi(2) + (p[1] / b).powi(2) - 1.0).abs() < 1e-12,
        Shape::Rectangle { sides } => {
            let inside = p.iter().zip(sides).all(|(v, s)| *v >= 0.0 && v <= s);
            inside && p.iter().zip(sides).any(|(v, s)| *v == 0.0 || v == s)
        }
        Shape::LShape { .. } => !domain.contains(p),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn nearest_point_is_consistent(seed in 0u64..10_000, which in 0usize..9) {
        use rand::SeedableRng;
        let domain = &domains()[which];
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let x = domain.sample_point(&mut rng);
        let d = domain.distance_to_boundary(&x).unwrap();
        let b = domain.nearest_boundary_point(&x).unwrap();
        let e = x.iter().zip(&b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
        prop_assert!(d > 0.0);
        prop_assert!((e - d).abs() <= 1e-12 * d.max(1e-300));
        prop_assert!(d <= domain.diameter() / 2.0);
        prop_assert!(d <= domain.inradius() * (1.0 + 1e-12));
        prop_assert!(on_boundary(domain, &b), "{:?}", b);
    }

    #[test]
    fn pairs_satisfy_comparability(seed in 0u64..1000, which in 0usize..9) {
        let domain = &domains()[which];
        let sample = sample_interior_pairs(domain, 40, seed, 0.0).unwrap();
        let cls = RegionClassifier::default();
        let n = cls.threshold();
        for (p, r) in sample.pairs.iter().zip(&sample.regions) {
            prop_assert!(domain.contains(&p.x) && domain.contains(&p.y));
            prop_assert!(p.d_x <= p.sep + p.d_y + 1e-12 && p.d_y <= p.sep + p.d_x + 1e-12);
            prop_assert_eq!(classify_region(p, &cls), *r);
            prop_assert_eq!(classify_region(&p.swapped(), &cls), *r);
            if p.sep <= p.d_y / n {
                prop_assert!((n - 1.0) * p.d_y <= n * p.d_x * (1.0 + 1e-12));
                prop_assert!(n * p.d_x <= (n + 1.0) * p.d_y * (1.0 + 1e-12));
            }
        }
    }
}

#[test]
fn sampling_is_deterministic() {
    let ball = Domain::unit_ball(3);
    let a = sample_interior_pairs(&ball, 100, 7, 0.05).unwrap();
    let b = sample_interior_pairs(&ball, 100, 7, 0.05).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.pairs.len(), 100);
    assert!(a.pairs.iter().all(|p| p.sep >= 0.05));
    let c = sample_interior_pairs(&ball, 100, 8, 0.05).unwrap();
    assert_ne!(a.pairs, c.pairs);
}

#[test]
fn grouped_sampling_respects_constraints() {
    let ball = Domain::unit_ball(3);
    let mut plan = SamplePlan::new(120, 3, 0.25);
    plan.min_boundary_distance = 0.25;
    plan.sources = Some(6);
    let s = sample_pairs(&ball, &plan).unwrap();
    assert_eq!(s.sources().len(), 6);
    for p in &s.pairs {
        assert!(p.sep >= 0.25 && p.d_x >= 0.25 && p.d_y >= 0.25);
    }
    // With sep and d both >= 0.25 in a unit ball, no pair is near.
    assert_eq!(s.count(Region::CaseII), 0);
    assert!(!s.warnings.is_empty());
}

#[test]
fn domain_json_round_trip() {
    for d in domains() {
        let text = serde_json::to_string(&d).unwrap();
        let back: Domain = serde_json::from_str(&text).unwrap();
        assert_eq!(d, back);
    }
    let bad = r#"{"kind":"ellipse","a":1.0,"b":0.1,"dim":3}"#;
    assert!(serde_json::from_str::<Domain>(bad).is_err());
    let pair = SamplePair::new(&Domain::unit_ball(2), vec![0.1, 0.0], vec![0.0, 0.2]).unwrap();
    assert!((pair.sep - 0.05f64.sqrt()).abs() < 1e-15);
}
