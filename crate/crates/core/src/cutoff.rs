//! The smooth radial cutoff `η`: equal to 1 on `B_{1/4}`, supported in
//! `B_{1/2}`, with derivatives from truncated Taylor arithmetic.

/// Highest derivative order tracked by the Taylor jets.
pub const MAX_ORDER: usize = 12;

/// Truncated Taylor series `Σ c_k t^k` around a point.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Jet([f64; MAX_ORDER + 1]);

impl Jet {
    fn constant(v: f64) -> Self {
        let mut c = [0.0; MAX_ORDER + 1];
        c[0] = v;
        Jet(c)
    }

    fn variable(v: f64, slope: f64) -> Self {
        let mut j = Jet::constant(v);
        j.0[1] = slope;
        j
    }

    fn add(&self, o: &Jet) -> Jet {
        let mut c = self.0;
        for (a, b) in c.iter_mut().zip(o.0) {
            *a += b;
        }
        Jet(c)
    }

    fn mul(&self, o: &Jet) -> Jet {
        let mut c = [0.0; MAX_ORDER + 1];
        for i in 0..=MAX_ORDER {
            for j in 0..=MAX_ORDER - i {
                c[i + j] += self.0[i] * o.0[j];
            }
        }
        Jet(c)
    }

    fn recip(&self) -> Jet {
        let a0 = self.0[0];
        let mut c = [0.0; MAX_ORDER + 1];
        c[0] = 1.0 / a0;
        for k in 1..=MAX_ORDER {
            let s: f64 = (1..=k).map(|j| self.0[j] * c[k - j]).sum();
            c[k] = -s / a0;
        }
        Jet(c)
    }

    fn exp(&self) -> Jet {
        // y' = a' y  =>  k y_k = Σ_j j a_j y_{k-j}
        let mut c = [0.0; MAX_ORDER + 1];
        c[0] = self.0[0].exp();
        for k in 1..=MAX_ORDER {
            let s: f64 = (1..=k)
                .map(|j| j as f64 * self.0[j] * c[k - j])
                .sum();
            c[k] = s / k as f64;
        }
        Jet(c)
    }

    fn scale(&self, s: f64) -> Jet {
        let mut c = self.0;
        for v in c.iter_mut() {
            *v *= s;
        }
        Jet(c)
    }
}

/// `ψ(s) = exp(-1/s)` for `s > 0`, zero otherwise.
fn psi(s: &Jet) -> Jet {
    if s.0[0] <= 0.0 {
        return Jet::constant(0.0);
    }
    s.recip().scale(-1.0).exp()
}

/// Radial cutoff with plateau radius 1/4 and support radius 1/2.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CutoffFunction;

impl CutoffFunction {
    pub const INNER: f64 = 0.25;
    pub const OUTER: f64 = 0.5;

    pub fn new() -> Self {
        CutoffFunction
    }

    /// `η(r)` and its radial derivatives `η^{(0..=MAX_ORDER)}(r)`.
    pub fn derivatives(&self, r: f64) -> [f64; MAX_ORDER + 1] {
        let mut out = [0.0; MAX_ORDER + 1];
        if r <= Self::INNER {
            out[0] = 1.0;
            return out;
        }
        if r >= Self::OUTER {
            return out;
        }
        let scale = 1.0 / (Self::OUTER - Self::INNER);
        let t = Jet::variable((r - Self::INNER) * scale, scale);
        let one_minus_t = Jet::constant(1.0).add(&t.scale(-1.0));
        let a = psi(&one_minus_t);
        let b = psi(&t);
        let eta = a.mul(&a.add(&b).recip());
        let mut fact = 1.0;
        for (k, v) in out.iter_mut().enumerate() {
            if k > 0 {
                fact *= k as f64;
            }
            *v = eta.0[k] * fact;
        }
        out
    }

    pub fn value(&self, r: f64) -> f64 {
        self.derivatives(r)[0]
    }

    /// `j`-th derivative of the rescaled profile `r ↦ η(r / d)`.
    pub fn scaled_derivative(&self, j: usize, r: f64, d: f64) -> f64 {
        self.derivatives(r / d)[j] * d.powi(-(j as i32))
    }

    /// `max_r |η^{(j)}(r)|` for `j = 0..=order`, by dense sampling.
    pub fn derivative_bounds(&self, order: usize) -> Vec<f64> {
        let mut b = vec![0.0f64; order + 1];
        let samples = 4000;
        for s in 0..=samples {
            let r = Self::INNER + (Self::OUTER - Self::INNER) * s as f64 / samples as f64;
            let d = self.derivatives(r);
            for j in 0..=order {
                b[j] = b[j].max(d[j].abs());
            }
        }
        b
    }
}
