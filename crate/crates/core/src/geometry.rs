//! Bounded domains, boundary distances, point-pair sampling and the
//! classification of pairs by separation relative to boundary distance.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Shape {
    /// Ball of the given radius centred at the origin.
    Ball { radius: f64 },
    /// Ball with the closed ball of radius `epsilon` around the origin
    /// removed; `epsilon = 0` removes only the centre, which then counts as a
    /// boundary point.
    PuncturedBall { radius: f64, epsilon: f64 },
    Annulus { r_in: f64, r_out: f64 },
    /// Planar ellipse `x²/a² + y²/b² < 1`.
    Ellipse { a: f64, b: f64 },
    /// Box `[0, sides[0]] × … × [0, sides[n-1]]`.
    Rectangle { sides: Vec<f64> },
    /// Planar L: the open square `(0, size)²` minus `[width, size) × [width, size)`.
    LShape { size: f64, width: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDomain", into = "RawDomain")]
pub struct Domain {
    shape: Shape,
    dim: usize,
}

#[derive(Serialize, Deserialize)]
struct RawDomain {
    #[serde(flatten)]
    shape: Shape,
    dim: usize,
}

impl TryFrom<RawDomain> for Domain {
    type Error = Error;
    fn try_from(raw: RawDomain) -> Result<Self> {
        Domain::new(raw.shape, raw.dim)
    }
}

impl From<Domain> for RawDomain {
    fn from(d: Domain) -> Self {
        RawDomain {
            shape: d.shape,
            dim: d.dim,
        }
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt()
}

fn bad(msg: impl Into<String>) -> Error {
    Error::GeometryInfeasible(msg.into())
}

impl Domain {
    pub fn new(shape: Shape, dim: usize) -> Result<Self> {
        if dim < 1 {
            return Err(bad("dimension must be positive"));
        }
        let positive = |v: f64, name: &str| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(bad(format!("{name} must be positive, got {v}")))
            }
        };
        match &shape {
            Shape::Ball { radius } => positive(*radius, "radius")?,
            Shape::PuncturedBall { radius, epsilon } => {
                positive(*radius, "radius")?;
                if !(*epsilon >= 0.0 && epsilon < radius) {
                    return Err(bad("punctured ball needs 0 <= epsilon < radius"));
                }
            }
            Shape::Annulus { r_in, r_out } => {
                positive(*r_in, "r_in")?;
                if r_out <= r_in {
                    return Err(bad("annulus needs r_in < r_out"));
                }
            }
            Shape::Ellipse { a, b } => {
                positive(*a, "a")?;
                positive(*b, "b")?;
                if dim != 2 {
                    return Err(bad("ellipse is planar"));
                }
            }
            Shape::Rectangle { sides } => {
                if sides.len() != dim {
                    return Err(bad(format!(
                        "rectangle has {} sides for dimension {dim}",
                        sides.len()
                    )));
                }
                for s in sides {
                    positive(*s, "side")?;
                }
            }
            Shape::LShape { size, width } => {
                positive(*size, "size")?;
                positive(*width, "width")?;
                if width >= size || dim != 2 {
                    return Err(bad("L-shape is planar with width < size"));
                }
            }
        }
        Ok(Domain { shape, dim })
    }

    pub fn unit_ball(dim: usize) -> Self {
        Domain::new(Shape::Ball { radius: 1.0 }, dim).expect("valid")
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind_name(&self) -> &'static str {
        match self.shape {
            Shape::Ball { .. } => "ball",
            Shape::PuncturedBall { .. } => "punctured-ball",
            Shape::Annulus { .. } => "annulus",
            Shape::Ellipse { .. } => "ellipse",
            Shape::Rectangle { .. } => "rectangle",
            Shape::LShape { .. } => "l-shape",
        }
    }

    /// Open-set membership.
    pub fn contains(&self, x: &[f64]) -> bool {
        if x.len() != self.dim || x.iter().any(|v| !v.is_finite()) {
            return false;
        }
        match &self.shape {
            Shape::Ball { radius } => norm(x) < *radius,
            Shape::PuncturedBall { radius, epsilon } => {
                let r = norm(x);
                r < *radius && r > *epsilon
            }
            Shape::Annulus { r_in, r_out } => {
                let r = norm(x);
                r > *r_in && r < *r_out
            }
            Shape::Ellipse { a, b } => (x[0] / a).powi(2) + (x[1] / b).powi(2) < 1.0,
            Shape::Rectangle { sides } => x.iter().zip(sides).all(|(v, s)| *v > 0.0 && v < s),
            Shape::LShape { size, width } => {
                let inside_square = x.iter().all(|v| *v > 0.0 && v < size);
                inside_square && !(x[0] >= *width && x[1] >= *width)
            }
        }
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if self.contains(x) {
            Ok(())
        } else {
            Err(Error::PointOutsideDomain(x.to_vec()))
        }
    }

    pub fn distance_to_boundary(&self, x: &[f64]) -> Result<f64> {
        self.check(x)?;
        Ok(self.nearest_unchecked(x).1)
    }

    pub fn nearest_boundary_point(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check(x)?;
        Ok(self.nearest_unchecked(x).0)
    }

    /// Nearest boundary point and distance for an interior point.
    pub(crate) fn nearest_unchecked(&self, x: &[f64]) -> (Vec<f64>, f64) {
        match &self.shape {
            Shape::Ball { radius } => sphere_nearest(x, *radius),
            Shape::PuncturedBall { radius, epsilon } => {
                let outer = sphere_nearest(x, *radius);
                let inner = if *epsilon == 0.0 {
                    (vec![0.0; x.len()], norm(x))
                } else {
                    sphere_nearest(x, *epsilon)
                };
                if inner.1 < outer.1 {
                    inner
                } else {
                    outer
                }
            }
            Shape::Annulus { r_in, r_out } => {
                let outer = sphere_nearest(x, *r_out);
                let inner = sphere_nearest(x, *r_in);
                if inner.1 < outer.1 {
                    inner
                } else {
                    outer
                }
            }
            Shape::Ellipse { a, b } => ellipse_nearest(*a, *b, x[0], x[1]),
            Shape::Rectangle { sides } => {
                let mut best = (0, 0.0, f64::INFINITY);
                for (k, s) in sides.iter().enumerate() {
                    if x[k] < best.2 {
                        best = (k, 0.0, x[k]);
                    }
                    if s - x[k] < best.2 {
                        best = (k, *s, s - x[k]);
                    }
                }
                let mut p = x.to_vec();
                p[best.0] = best.1;
                (p, best.2)
            }
            Shape::LShape { size, width } => {
                let (a, w) = (*size, *width);
                let corners = [[0.0, 0.0], [a, 0.0], [a, w], [w, w], [w, a], [0.0, a]];
                let mut best = (vec![0.0, 0.0], f64::INFINITY);
                for k in 0..6 {
                    let p = segment_nearest(corners[k], corners[(k + 1) % 6], [x[0], x[1]]);
                    let d = dist(&p, x);
                    if d < best.1 {
                        best = (p.to_vec(), d);
                    }
                }
                best
            }
        }
    }

    pub fn diameter(&self) -> f64 {
        match &self.shape {
            Shape::Ball { radius } | Shape::PuncturedBall { radius, .. } => 2.0 * radius,
            Shape::Annulus { r_out, .. } => 2.0 * r_out,
            Shape::Ellipse { a, b } => 2.0 * a.max(*b),
            Shape::Rectangle { sides } => norm(sides),
            Shape::LShape { size, .. } => size * std::f64::consts::SQRT_2,
        }
    }

    /// Largest boundary distance attained in the domain.
    pub fn inradius(&self) -> f64 {
        match &self.shape {
            Shape::Ball { radius } => *radius,
            Shape::PuncturedBall { radius, epsilon } => 0.5 * (radius - epsilon),
            Shape::Annulus { r_in, r_out } => 0.5 * (r_out - r_in),
            Shape::Ellipse { a, b } => a.min(*b),
            Shape::Rectangle { sides } => 0.5 * sides.iter().cloned().fold(f64::INFINITY, f64::min),
            // The widest disc touches both outer sides and the reentrant corner.
            Shape::LShape { width, .. } => (2.0 - std::f64::consts::SQRT_2) * width,
        }
    }

    /// Axis-aligned bounding box `(lo, hi)`.
    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        match &self.shape {
            Shape::Ball { radius } | Shape::PuncturedBall { radius, .. } => {
                (vec![-radius; self.dim], vec![*radius; self.dim])
            }
            Shape::Annulus { r_out, .. } => (vec![-r_out; self.dim], vec![*r_out; self.dim]),
            Shape::Ellipse { a, b } => (vec![-a, -b], vec![*a, *b]),
            Shape::Rectangle { sides } => (vec![0.0; self.dim], sides.clone()),
            Shape::LShape { size, .. } => (vec![0.0, 0.0], vec![*size, *size]),
        }
    }

    /// Point at distance `offset` outside the boundary, along the outward
    /// normal at the boundary point nearest to the interior point `x`.
    pub fn exterior_point_near(&self, x: &[f64], offset: f64) -> Result<Vec<f64>> {
        let (b, d) = {
            self.check(x)?;
            self.nearest_unchecked(x)
        };
        let q: Vec<f64> = b
            .iter()
            .zip(x)
            .map(|(bi, xi)| bi + offset * (bi - xi) / d)
            .collect();
        if self.contains(&q) {
            return Err(bad("exterior point landed inside the domain"));
        }
        Ok(q)
    }

    /// Uniform sample by rejection from the bounding box.
    pub fn sample_point<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        let (lo, hi) = self.bounding_box();
        loop {
            let x: Vec<f64> = lo
                .iter()
                .zip(&hi)
                .map(|(l, h)| l + (h - l) * rng.random::<f64>())
                .collect();
            if self.contains(&x) {
                return x;
            }
        }
    }
}

fn sphere_nearest(x: &[f64], radius: f64) -> (Vec<f64>, f64) {
    let r = norm(x);
    let p = if r == 0.0 {
        let mut e = vec![0.0; x.len()];
        e[0] = radius;
        e
    } else {
        x.iter().map(|v| v * radius / r).collect()
    };
    (p, (radius - r).abs())
}

fn segment_nearest(a: [f64; 2], b: [f64; 2], x: [f64; 2]) -> [f64; 2] {
    let d = [b[0] - a[0], b[1] - a[1]];
    let len2 = d[0] * d[0] + d[1] * d[1];
    let t = (((x[0] - a[0]) * d[0] + (x[1] - a[1]) * d[1]) / len2).clamp(0.0, 1.0);
    [a[0] + t * d[0], a[1] + t * d[1]]
}

/// Closest point on the ellipse `x²/a² + y²/b² = 1` (robust bisection on the
/// Lagrange multiplier, exploiting the quadrant symmetry).
fn ellipse_nearest(a: f64, b: f64, px: f64, py: f64) -> (Vec<f64>, f64) {
    let swap = a < b;
    let (e0, e1, y0, y1) = if swap {
        (b, a, py.abs(), px.abs())
    } else {
        (a, b, px.abs(), py.abs())
    };
    let (x0, x1) = if y1 > 0.0 {
        if y0 > 0.0 {
            let z0 = y0 / e0;
            let z1 = y1 / e1;
            let g = z0 * z0 + z1 * z1 - 1.0;
            if g != 0.0 {
                let r0 = (e0 / e1) * (e0 / e1);
                let s = ellipse_root(r0, z0, z1, g);
                (r0 * y0 / (s + r0), y1 / (s + 1.0))
            } else {
                (y0, y1)
            }
        } else {
            (0.0, e1)
        }
    } else {
        let numer = e0 * y0;
        let denom = e0 * e0 - e1 * e1;
        if numer < denom {
            let xde = numer / denom;
            (e0 * xde, e1 * (1.0 - xde * xde).max(0.0).sqrt())
        } else {
            (e0, 0.0)
        }
    };
    let d = ((x0 - y0).powi(2) + (x1 - y1).powi(2)).sqrt();
    let (qx, qy) = if swap { (x1, x0) } else { (x0, x1) };
    (vec![qx.copysign(px), qy.copysign(py)], d)
}

fn ellipse_root(r0: f64, z0: f64, z1: f64, g: f64) -> f64 {
    let n0 = r0 * z0;
    let mut s0 = z1 - 1.0;
    let mut s1 = if g < 0.0 {
        0.0
    } else {
        n0.hypot(z1) - 1.0
    };
    let mut s = s0;
    for _ in 0..1100 {
        s = 0.5 * (s0 + s1);
        if s == s0 || s == s1 {
            break;
        }
        let ratio0 = n0 / (s + r0);
        let ratio1 = z1 / (s + 1.0);
        let gs = ratio0 * ratio0 + ratio1 * ratio1 - 1.0;
        if gs > 0.0 {
            s0 = s;
        } else if gs < 0.0 {
            s1 = s;
        } else {
            break;
        }
    }
    s
}

/// A pair of interior points with their boundary distances and separation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePair {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub d_x: f64,
    pub d_y: f64,
    pub sep: f64,
}

impl SamplePair {
    pub fn new(domain: &Domain, x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        let d_x = domain.distance_to_boundary(&x)?;
        let d_y = domain.distance_to_boundary(&y)?;
        let sep = dist(&x, &y);
        Ok(SamplePair {
            x,
            y,
            d_x,
            d_y,
            sep,
        })
    }

    /// The same pair with the roles of `x` and `y` exchanged.
    pub fn swapped(&self) -> SamplePair {
        SamplePair {
            x: self.y.clone(),
            y: self.x.clone(),
            d_x: self.d_y,
            d_y: self.d_x,
            sep: self.sep,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Region {
    #[serde(rename = "I")]
    CaseI,
    #[serde(rename = "II")]
    CaseII,
    #[serde(rename = "III")]
    CaseIII,
}

impl Region {
    pub const ALL: [Region; 3] = [Region::CaseI, Region::CaseII, Region::CaseIII];

    pub fn label(&self) -> &'static str {
        match self {
            Region::CaseI => "I",
            Region::CaseII => "II",
            Region::CaseIII => "III",
        }
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Splits pairs into far (`sep ≥ N min d`), near (`sep ≤ max d / N`) and
/// comparable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionClassifier {
    n: f64,
}

impl Default for RegionClassifier {
    fn default() -> Self {
        RegionClassifier { n: 25.0 }
    }
}

impl RegionClassifier {
    pub fn new(n: f64) -> Result<Self> {
        if !(n >= 25.0 && n.is_finite()) {
            return Err(bad(format!("region threshold N must be >= 25, got {n}")));
        }
        Ok(RegionClassifier { n })
    }

    pub fn threshold(&self) -> f64 {
        self.n
    }

    pub fn classify(&self, pair: &SamplePair) -> Region {
        classify_region(pair, self)
    }
}

pub fn classify_region(pair: &SamplePair, cls: &RegionClassifier) -> Region {
    if pair.sep >= cls.n * pair.d_x.min(pair.d_y) {
        Region::CaseI
    } else if pair.sep <= pair.d_x.max(pair.d_y) / cls.n {
        Region::CaseII
    } else {
        Region::CaseIII
    }
}

/// Constraints on sampled pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePlan {
    pub count: usize,
    pub seed: u64,
    #[serde(default)]
    pub min_sep: f64,
    /// Both points keep at least this distance from the boundary.
    #[serde(default)]
    pub min_boundary_distance: f64,
    /// When set, pairs share this many source points `y`.
    #[serde(default)]
    pub sources: Option<usize>,
    #[serde(default)]
    pub classifier: RegionClassifier,
}

impl SamplePlan {
    pub fn new(count: usize, seed: u64, min_sep: f64) -> Self {
        SamplePlan {
            count,
            seed,
            min_sep,
            min_boundary_distance: 0.0,
            sources: None,
            classifier: RegionClassifier::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairSample {
    pub pairs: Vec<SamplePair>,
    pub regions: Vec<Region>,
    pub warnings: Vec<String>,
}

impl PairSample {
    pub fn count(&self, region: Region) -> usize {
        self.regions.iter().filter(|r| **r == region).count()
    }

    /// Distinct source points in order of first appearance.
    pub fn sources(&self) -> Vec<Vec<f64>> {
        let mut out: Vec<Vec<f64>> = Vec::new();
        for p in &self.pairs {
            if !out.contains(&p.y) {
                out.push(p.y.clone());
            }
        }
        out
    }
}

pub fn sample_interior_pairs(
    domain: &Domain,
    count: usize,
    seed: u64,
    min_sep: f64,
) -> Result<PairSample> {
    sample_pairs(domain, &SamplePlan::new(count, seed, min_sep))
}

fn random_direction<R: Rng>(rng: &mut R, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let r = norm(&v);
        if r > 1e-3 && r <= 1.0 {
            return v.into_iter().map(|c| c / r).collect();
        }
    }
}

struct Sampler<'a> {
    domain: &'a Domain,
    plan: &'a SamplePlan,
    rng: ChaCha8Rng,
}

impl Sampler<'_> {
    fn point_ok(&self, p: &[f64]) -> Option<f64> {
        if !self.domain.contains(p) {
            return None;
        }
        let d = self.domain.nearest_unchecked(p).1;
        (d > 0.0 && d >= self.plan.min_boundary_distance).then_some(d)
    }

    fn uniform(&mut self) -> Vec<f64> {
        self.domain.sample_point(&mut self.rng)
    }

    /// Interior point with boundary distance roughly `target`.
    fn near_boundary(&mut self, target: f64) -> Vec<f64> {
        let p = self.uniform();
        let (b, d) = self.domain.nearest_unchecked(&p);
        let t = target.min(d);
        b.iter().zip(&p).map(|(bi, pi)| bi + t * (pi - bi) / d).collect()
    }

    /// Candidate `x` aimed at the given region for a fixed source `y`.
    fn partner(&mut self, y: &[f64], d_y: f64, region: Region) -> Vec<f64> {
        let n = self.plan.classifier.threshold();
        let dim = self.domain.dim();
        match region {
            Region::CaseII => {
                let lo = self.plan.min_sep.max(1e-9 * d_y);
                let hi = d_y / (n + 1.0);
                let r = if hi > lo {
                    self.rng.random_range(lo..hi)
                } else {
                    lo
                };
                let u = random_direction(&mut self.rng, dim);
                y.iter().zip(&u).map(|(a, b)| a + r * b).collect()
            }
            Region::CaseIII => {
                let s = d_y * (0.1 + 2.0 * self.rng.random::<f64>());
                let s = s.max(self.plan.min_sep);
                let u = random_direction(&mut self.rng, dim);
                y.iter().zip(&u).map(|(a, b)| a + s * b).collect()
            }
            Region::CaseI => {
                if self.rng.random::<bool>() {
                    self.uniform()
                } else {
                    let floor = self.plan.min_boundary_distance.max(1e-6 * self.domain.diameter());
                    let t = floor * (1.0 + 3.0 * self.rng.random::<f64>());
                    self.near_boundary(t)
                }
            }
        }
    }

    fn source(&mut self) -> Vec<f64> {
        // Mix of deep and shallow sources so all regions stay reachable.
        let floor = self.plan.min_boundary_distance;
        if self.rng.random::<f64>() < 0.5 && floor > 0.0 {
            let t = floor * (1.0 + 3.0 * self.rng.random::<f64>());
            self.near_boundary(t)
        } else {
            self.uniform()
        }
    }

    fn make_pair(&self, x: Vec<f64>, y: &[f64], d_y: f64) -> Option<SamplePair> {
        let d_x = self.point_ok(&x)?;
        let sep = dist(&x, y);
        if sep < self.plan.min_sep || sep == 0.0 {
            return None;
        }
        Some(SamplePair {
            x,
            y: y.to_vec(),
            d_x,
            d_y,
            sep,
        })
    }
}

/// Deterministic stratified pair sampling: each region receives at least
/// `count / 10` pairs when the constraints allow it; otherwise a warning
/// names the missing region.
pub fn sample_pairs(domain: &Domain, plan: &SamplePlan) -> Result<PairSample> {
    if plan.count == 0 {
        return Err(Error::EmptyInput);
    }
    if !(plan.min_sep >= 0.0) || plan.min_sep >= domain.diameter() {
        return Err(bad(format!("min_sep = {} is not attainable", plan.min_sep)));
    }
    if plan.min_boundary_distance >= domain.inradius() {
        return Err(bad(format!(
            "no interior point has boundary distance >= {}",
            plan.min_boundary_distance
        )));
    }
    let mut s = Sampler {
        domain,
        plan,
        rng: ChaCha8Rng::seed_from_u64(plan.seed),
    };
    let n_sources = plan.sources.unwrap_or(plan.count).clamp(1, plan.count);
    let mut sources: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n_sources);
    let mut guard = 0;
    while sources.len() < n_sources {
        guard += 1;
        if guard > 100_000 {
            return Err(bad("could not place source points"));
        }
        let y = s.source();
        if let Some(d) = s.point_ok(&y) {
            sources.push((y, d));
        }
    }

    let quota = plan.count.div_ceil(10);
    let mut pairs = Vec::with_capacity(plan.count);
    let mut regions = Vec::with_capacity(plan.count);
    let mut warnings = Vec::new();
    let attempts_per_region = 400 * quota.max(1);
    for target in Region::ALL {
        let mut got = 0;
        let mut tries = 0;
        while got < quota && tries < attempts_per_region && pairs.len() < plan.count {
            let (y, d_y) = sources[(pairs.len() + tries) % n_sources].clone();
            tries += 1;
            let x = s.partner(&y, d_y, target);
            if let Some(p) = s.make_pair(x, &y, d_y) {
                if plan.classifier.classify(&p) == target {
                    regions.push(target);
                    pairs.push(p);
                    got += 1;
                }
            }
        }
        if got < quota {
            warnings.push(format!(
                "region {target} reached {got} of {quota} pairs under the sampling constraints"
            ));
        }
    }
    let mut k = 0usize;
    let mut tries = 0usize;
    while pairs.len() < plan.count {
        tries += 1;
        if tries > 1000 * plan.count {
            return Err(bad("sampling constraints admit too few pairs"));
        }
        let (y, d_y) = sources[k % n_sources].clone();
        let target = Region::ALL[k % 3];
        let x = if k.is_multiple_of(2) {
            s.uniform()
        } else {
            s.partner(&y, d_y, target)
        };
        if let Some(p) = s.make_pair(x, &y, d_y) {
            regions.push(plan.classifier.classify(&p));
            pairs.push(p);
            k += 1;
        } else if tries.is_multiple_of(7) {
            k += 1;
        }
    }
    Ok(PairSample {
        pairs,
        regions,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distances_for_simple_shapes() {
        let ball = Domain::unit_ball(3);
        assert_eq!(ball.distance_to_boundary(&[0.5, 0.0, 0.0]).unwrap(), 0.5);
        let punct = Domain::new(
            Shape::PuncturedBall {
                radius: 1.0,
                epsilon: 0.0,
            },
            3,
        )
        .unwrap();
        assert_eq!(punct.distance_to_boundary(&[0.25, 0.0, 0.0]).unwrap(), 0.25);
        assert!(!punct.contains(&[0.0, 0.0, 0.0]));
        let rect = Domain::new(
            Shape::Rectangle {
                sides: vec![2.0, 1.0],
            },
            2,
        )
        .unwrap();
        assert!((rect.distance_to_boundary(&[1.0, 0.3]).unwrap() - 0.3).abs() < 1e-15);
        assert!(matches!(
            rect.distance_to_boundary(&[3.0, 0.3]),
            Err(Error::PointOutsideDomain(_))
        ));
    }

    #[test]
    fn l_shape_reentrant_corner() {
        let l = Domain::new(
            Shape::LShape {
                size: 1.0,
                width: 0.5,
            },
            2,
        )
        .unwrap();
        assert!(!l.contains(&[0.75, 0.75]));
        let d = l.distance_to_boundary(&[0.4, 0.4]).unwrap();
        assert!((d - 0.1 * 2f64.sqrt()).abs() < 1e-15);
        let d = l.distance_to_boundary(&[0.25, 0.8]).unwrap();
        assert!((d - 0.2).abs() < 1e-15);
    }

    #[test]
    fn ellipse_distance_against_dense_search() {
        let (a, b) = (1.0, 0.3);
        let e = Domain::new(Shape::Ellipse { a, b }, 2).unwrap();
        for p in [[0.2, 0.1], [0.9, 0.01], [0.0, 0.2], [0.5, 0.0], [-0.3, -0.25]] {
            let d = e.distance_to_boundary(&p).unwrap();
            let mut best = f64::INFINITY;
            for k in 0..200_000 {
                let t = 2.0 * std::f64::consts::PI * k as f64 / 200_000.0;
                best = best.min(dist(&[a * t.cos(), b * t.sin()], &p));
            }
            assert!((d - best).abs() < 1e-9, "{p:?}: {d} vs {best}");
            let q = e.nearest_boundary_point(&p).unwrap();
            assert!(((q[0] / a).powi(2) + (q[1] / b).powi(2) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn classification_examples() {
        let cls = RegionClassifier::default();
        let pair = |d_x, d_y, sep| SamplePair {
            x: vec![],
            y: vec![],
            d_x,
            d_y,
            sep,
        };
        assert_eq!(cls.classify(&pair(0.013, 0.01, 0.5)), Region::CaseI);
        assert_eq!(cls.classify(&pair(0.0102, 0.01, 0.0003)), Region::CaseII);
        assert_eq!(cls.classify(&pair(0.012, 0.01, 0.02)), Region::CaseIII);
        assert!(RegionClassifier::new(10.0).is_err());
    }

    #[test]
    fn rectangle_stratification() {
        let rect = Domain::new(
            Shape::Rectangle {
                sides: vec![1.0, 1.0],
            },
            2,
        )
        .unwrap();
        let s = sample_interior_pairs(&rect, 30, 1, 0.0).unwrap();
        assert_eq!(s.pairs.len(), 30);
        for r in Region::ALL {
            assert!(s.count(r) >= 3, "{r}: {}", s.count(r));
        }
        assert!(s.warnings.is_empty());
    }

    #[test]
    fn thin_annulus_lacks_near_pairs() {
        let ann = Domain::new(
            Shape::Annulus {
                r_in: 0.9,
                r_out: 1.0,
            },
            2,
        )
        .unwrap();
        let s = sample_interior_pairs(&ann, 30, 1, 0.5).unwrap();
        assert_eq!(s.pairs.len(), 30);
        assert_eq!(s.count(Region::CaseII), 0);
        assert!(s.warnings.iter().any(|w| w.contains("region II")));
    }
}
