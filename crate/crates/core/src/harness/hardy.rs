use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::check_levels;
use crate::cutoff::CutoffFunction;
use crate::error::{Error, Result};
use crate::estimates::{change_factor, STABILITY_FACTOR};
use crate::geometry::{dist, Domain};
use crate::grid::{DiscreteField, GridSpec};

/// Sum of smooth bumps `a η(|x - c| / 2ρ)`, each supported in `B_ρ(c)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BumpSum {
    pub bumps: Vec<(Vec<f64>, f64, f64)>,
}

impl BumpSum {
    pub fn value(&self, x: &[f64]) -> f64 {
        let eta = CutoffFunction::new();
        self.bumps
            .iter()
            .map(|(c, rho, a)| a * eta.value(dist(x, c) / (2.0 * rho)))
            .sum()
    }

    pub fn sample(&self, grid: &Arc<GridSpec>) -> DiscreteField {
        DiscreteField::from_fn(grid.clone(), |x| self.value(x))
    }
}

/// One to three bumps with radius at least `min_radius`, each compactly
/// inside the domain.
pub fn random_bump_field<R: Rng>(domain: &Domain, min_radius: f64, rng: &mut R) -> Result<BumpSum> {
    if !(min_radius > 0.0) || 2.0 * min_radius >= domain.inradius() {
        return Err(Error::GeometryInfeasible(format!(
            "bump radius {min_radius} does not fit the domain"
        )));
    }
    let count = rng.random_range(1..=3);
    let mut bumps = Vec::with_capacity(count);
    let mut guard = 0;
    while bumps.len() < count {
        guard += 1;
        if guard > 100_000 {
            return Err(Error::GeometryInfeasible("could not place bumps".into()));
        }
        let c = domain.sample_point(rng);
        if !domain.contains(&c) {
            continue;
        }
        let d = domain.distance_to_boundary(&c)?;
        let rho = d * rng.random_range(0.3..0.9);
        if rho < min_radius {
            continue;
        }
        let a = rng.random_range(-1.0..1.0);
        bumps.push((c, rho, if a == 0.0 { 1.0 } else { a }));
    }
    Ok(BumpSum { bumps })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HardyReport {
    pub m: u32,
    pub trials: usize,
    /// Mesh widths from coarse to fine.
    pub levels: Vec<f64>,
    /// Largest ratio over the trials at each level.
    pub max_ratio: Vec<f64>,
    /// Largest change of any single trial's ratio between levels.
    pub max_change: f64,
    pub stable: bool,
}

impl HardyReport {
    pub fn passed(&self) -> bool {
        self.stable && self.max_ratio.iter().all(|r| r.is_finite())
    }
}

/// `max ‖v/|· - Q|^m‖ / ‖∇^m v‖` over random bump fields `v` and boundary
/// points `Q` near them. The fields are continuous functions resampled at
/// every level, so the same trials are compared across levels.
pub fn verify_hardy(domain: &Domain, m: u32, trials: usize, seed: u64, levels: &[f64]) -> Result<HardyReport> {
    if trials == 0 {
        return Err(Error::config("trials", "need at least one trial"));
    }
    if m == 0 {
        return Err(Error::config("m", "order must be positive"));
    }
    let levels = check_levels(levels)?;
    let min_radius = 6.0 * levels[0];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cases = Vec::with_capacity(trials);
    for _ in 0..trials {
        let v = random_bump_field(domain, min_radius, &mut rng)?;
        let anchor = if rng.random::<bool>() {
            v.bumps[0].0.clone()
        } else {
            loop {
                let p = domain.sample_point(&mut rng);
                if domain.contains(&p) {
                    break p;
                }
            }
        };
        let q = domain.nearest_boundary_point(&anchor)?;
        cases.push((v, q));
    }
    let mut per_level: Vec<Vec<f64>> = Vec::with_capacity(levels.len());
    for &h in &levels {
        let grid = Arc::new(GridSpec::new(domain, h, m as usize)?);
        let ratios = cases
            .iter()
            .map(|(v, q)| v.sample(&grid).hardy_ratio(m, q))
            .collect::<Result<Vec<f64>>>()?;
        per_level.push(ratios);
    }
    let max_ratio: Vec<f64> = per_level
        .iter()
        .map(|r| r.iter().cloned().fold(0.0f64, f64::max))
        .collect();
    let mut max_change = 1.0f64;
    for w in per_level.windows(2) {
        for (a, b) in w[0].iter().zip(&w[1]) {
            max_change = max_change.max(change_factor(*a, *b));
        }
    }
    for w in max_ratio.windows(2) {
        max_change = max_change.max(change_factor(w[0], w[1]));
    }
    Ok(HardyReport {
        m,
        trials,
        levels,
        max_ratio,
        max_change,
        stable: max_change <= STABILITY_FACTOR,
    })
}
