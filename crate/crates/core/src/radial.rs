//! Exact symbolic differentiation of radial expressions.
//!
//! An expression is a finite sum of terms
//!
//! ```text
//! c · z^β · |z|^p · (log|z|)^q · f^{(j)}(|z|),   q ∈ {0, 1}
//! ```
//!
//! where `f` is an optional radial profile supplied at evaluation time. The
//! class is closed under `∂/∂z_k` and under products with profile-free
//! expressions, which covers every derivative of the fundamental solution and
//! of the cutoff-localised singular part.

use std::collections::BTreeMap;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct TermKey {
    mono: Vec<u8>,
    rpow: i32,
    log: bool,
    pderiv: u8,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadialExpr {
    dim: usize,
    profile: bool,
    terms: BTreeMap<TermKey, f64>,
}

impl RadialExpr {
    pub fn zero(dim: usize) -> Self {
        RadialExpr {
            dim,
            profile: false,
            terms: BTreeMap::new(),
        }
    }

    fn single(dim: usize, coef: f64, rpow: i32, log: bool, profile: bool) -> Self {
        let mut e = RadialExpr {
            dim,
            profile,
            terms: BTreeMap::new(),
        };
        e.push(
            TermKey {
                mono: vec![0; dim],
                rpow,
                log,
                pderiv: 0,
            },
            coef,
        );
        e
    }

    /// `coef · |z|^p`.
    pub fn power(dim: usize, p: i32, coef: f64) -> Self {
        Self::single(dim, coef, p, false, false)
    }

    /// `coef · |z|^p · log|z|`.
    pub fn power_log(dim: usize, p: i32, coef: f64) -> Self {
        Self::single(dim, coef, p, true, false)
    }

    /// `coef · z^β`.
    pub fn monomial(beta: &[u8], coef: f64) -> Self {
        let mut e = RadialExpr::zero(beta.len());
        e.push(
            TermKey {
                mono: beta.to_vec(),
                rpow: 0,
                log: false,
                pderiv: 0,
            },
            coef,
        );
        e
    }

    /// The bare radial profile `f(|z|)`.
    pub fn profile(dim: usize) -> Self {
        Self::single(dim, 1.0, 0, false, true)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn has_profile(&self) -> bool {
        self.profile
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    fn push(&mut self, key: TermKey, coef: f64) {
        if coef == 0.0 {
            return;
        }
        let slot = self.terms.entry(key).or_insert(0.0);
        *slot += coef;
    }

    fn prune(&mut self) {
        self.terms.retain(|_, c| *c != 0.0);
    }

    pub fn scale(&self, c: f64) -> Self {
        let mut out = self.clone();
        for v in out.terms.values_mut() {
            *v *= c;
        }
        out.prune();
        out
    }

    pub fn add(&self, other: &RadialExpr) -> Self {
        assert_eq!(self.dim, other.dim);
        let mut out = self.clone();
        out.profile |= other.profile;
        for (k, c) in &other.terms {
            out.push(k.clone(), *c);
        }
        out.prune();
        out
    }

    /// Product with another expression; at most one factor may carry the
    /// profile and at most one may carry a logarithm per term.
    pub fn mul(&self, other: &RadialExpr) -> Self {
        assert_eq!(self.dim, other.dim);
        assert!(
            !(self.profile && other.profile),
            "product of two profile-carrying expressions"
        );
        let mut out = RadialExpr {
            dim: self.dim,
            profile: self.profile || other.profile,
            terms: BTreeMap::new(),
        };
        for (ka, ca) in &self.terms {
            for (kb, cb) in &other.terms {
                assert!(!(ka.log && kb.log), "log^2 terms are not representable");
                let key = TermKey {
                    mono: ka.mono.iter().zip(&kb.mono).map(|(a, b)| a + b).collect(),
                    rpow: ka.rpow + kb.rpow,
                    log: ka.log || kb.log,
                    pderiv: ka.pderiv + kb.pderiv,
                };
                out.push(key, ca * cb);
            }
        }
        out.prune();
        out
    }

    /// `∂/∂z_axis`.
    pub fn derivative(&self, axis: usize) -> Self {
        let mut out = RadialExpr {
            dim: self.dim,
            profile: self.profile,
            terms: BTreeMap::new(),
        };
        for (k, &c) in &self.terms {
            let b = k.mono[axis];
            if b > 0 {
                let mut key = k.clone();
                key.mono[axis] -= 1;
                out.push(key, c * f64::from(b));
            }
            let mut up = k.clone();
            up.mono[axis] += 1;
            if k.rpow != 0 {
                let mut key = up.clone();
                key.rpow -= 2;
                out.push(key, c * f64::from(k.rpow));
            }
            if k.log {
                let mut key = up.clone();
                key.rpow -= 2;
                key.log = false;
                out.push(key, c);
            }
            if self.profile {
                let mut key = up;
                key.rpow -= 1;
                key.pderiv += 1;
                out.push(key, c);
            }
        }
        out.prune();
        out
    }

    /// `∂^α`.
    pub fn derivative_multi(&self, alpha: &[u32]) -> Self {
        assert_eq!(alpha.len(), self.dim);
        let mut out = self.clone();
        for (axis, &a) in alpha.iter().enumerate() {
            for _ in 0..a {
                out = out.derivative(axis);
            }
        }
        out
    }

    pub fn laplacian(&self) -> Self {
        let mut out = RadialExpr {
            dim: self.dim,
            profile: self.profile,
            terms: BTreeMap::new(),
        };
        for axis in 0..self.dim {
            out = out.add(&self.derivative(axis).derivative(axis));
        }
        out
    }

    /// `(-Δ)^k`.
    pub fn neg_laplacian_pow(&self, k: u32) -> Self {
        let mut out = self.clone();
        for _ in 0..k {
            out = out.laplacian().scale(-1.0);
        }
        out
    }

    /// Splits `e = W·log|z| + V` and returns `(W, V)`.
    pub fn split_log(&self) -> (RadialExpr, RadialExpr) {
        let mut w = RadialExpr::zero(self.dim);
        let mut v = RadialExpr::zero(self.dim);
        w.profile = self.profile;
        v.profile = self.profile;
        for (k, &c) in &self.terms {
            if k.log {
                let mut key = k.clone();
                key.log = false;
                w.push(key, c);
            } else {
                v.push(k.clone(), c);
            }
        }
        (w, v)
    }

    /// Visits every term as `(β, p, has_log, profile_order, coef)`.
    pub fn for_each_term(&self, mut f: impl FnMut(&[u8], i32, bool, u8, f64)) {
        for (k, &c) in &self.terms {
            f(&k.mono, k.rpow, k.log, k.pderiv, c);
        }
    }

    /// Whether every term is a polynomial in `z` (even non-negative radial
    /// powers, no logarithm, no profile).
    pub fn is_polynomial(&self) -> bool {
        !self.profile
            && self
                .terms
                .keys()
                .all(|k| !k.log && k.rpow >= 0 && k.rpow % 2 == 0)
    }

    /// Total homogeneity degree of each term, when all terms share one.
    pub fn homogeneity(&self) -> Option<i32> {
        if self.profile {
            return None;
        }
        let mut deg = None;
        for k in self.terms.keys() {
            let d = k.mono.iter().map(|&b| i32::from(b)).sum::<i32>() + k.rpow;
            match deg {
                None => deg = Some(d),
                Some(prev) if prev != d => return None,
                _ => {}
            }
        }
        deg
    }

    /// Evaluates a profile-free expression.
    pub fn eval(&self, z: &[f64]) -> f64 {
        debug_assert!(!self.profile);
        self.eval_with(z, &|_, _| 1.0).0
    }

    /// Evaluates with the profile derivatives `f^{(j)}(r)` given by
    /// `profile(j, r)`. Returns the value and the sum of absolute term values,
    /// the latter being the natural scale for cancellation error.
    pub fn eval_with(&self, z: &[f64], profile: &dyn Fn(u8, f64) -> f64) -> (f64, f64) {
        assert_eq!(z.len(), self.dim);
        let r2: f64 = z.iter().map(|v| v * v).sum();
        let r = r2.sqrt();
        let logr = r.ln();
        let max_pow = self
            .terms
            .keys()
            .flat_map(|k| k.mono.iter().copied())
            .max()
            .unwrap_or(0) as usize;
        let mut pows = vec![vec![1.0; max_pow + 1]; self.dim];
        for (axis, row) in pows.iter_mut().enumerate() {
            for e in 1..=max_pow {
                row[e] = row[e - 1] * z[axis];
            }
        }
        let mut profile_cache: Vec<Option<f64>> = Vec::new();
        let mut sum = 0.0;
        let mut mag = 0.0;
        for (k, &c) in &self.terms {
            let mut t = c * r.powi(k.rpow);
            for (axis, &b) in k.mono.iter().enumerate() {
                t *= pows[axis][b as usize];
            }
            if k.log {
                t *= logr;
            }
            if self.profile {
                let j = k.pderiv as usize;
                if profile_cache.len() <= j {
                    profile_cache.resize(j + 1, None);
                }
                let f = *profile_cache[j].get_or_insert_with(|| profile(k.pderiv, r));
                t *= f;
            }
            sum += t;
            mag += t.abs();
        }
        (sum, mag)
    }
}
