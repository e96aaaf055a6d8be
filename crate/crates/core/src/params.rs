//! Operator order / space dimension pairs and multi-indices.

use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Odd,
    Even,
}

/// The pair `(m, n)`: order of `(-Δ)^m` and space dimension, restricted to
/// `2 <= n <= 2m + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct DimensionParams {
    m: u32,
    n: u32,
}

#[derive(Serialize, Deserialize)]
struct RawParams {
    m: u32,
    n: u32,
}

impl TryFrom<RawParams> for DimensionParams {
    type Error = Error;
    fn try_from(raw: RawParams) -> Result<Self> {
        DimensionParams::new(raw.m, raw.n)
    }
}

impl From<DimensionParams> for RawParams {
    fn from(p: DimensionParams) -> Self {
        RawParams { m: p.m, n: p.n }
    }
}

/// Critical order: `m - (n-1)/2` for odd `n`, `m - n/2` for even `n`.
pub fn lambda(m: u32, n: u32) -> Result<u32> {
    Ok(DimensionParams::new(m, n)?.lambda())
}

impl DimensionParams {
    pub fn new(m: u32, n: u32) -> Result<Self> {
        if m == 0 || n < 2 || n > 2 * m + 1 {
            return Err(Error::DimensionOutOfRange { m, n });
        }
        Ok(Self { m, n })
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn parity(&self) -> Parity {
        if self.n % 2 == 1 {
            Parity::Odd
        } else {
            Parity::Even
        }
    }

    pub fn lambda(&self) -> u32 {
        match self.parity() {
            Parity::Odd => self.m - (self.n - 1) / 2,
            Parity::Even => self.m - self.n / 2,
        }
    }

    /// Homogeneity degree `2m - n` of the fundamental solution.
    pub fn degree(&self) -> i32 {
        2 * self.m as i32 - self.n as i32
    }

    /// Whether the fundamental solution carries a logarithm.
    pub fn has_log(&self) -> bool {
        self.parity() == Parity::Even
    }
}

impl fmt::Display for DimensionParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "m={}, n={}", self.m, self.n)
    }
}

/// A multi-index `α = (α_1, ..., α_n)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(components: Vec<u32>) -> Self {
        MultiIndex(components)
    }

    pub fn zero(n: usize) -> Self {
        MultiIndex(vec![0; n])
    }

    /// `e_axis` scaled by `order`.
    pub fn axis(n: usize, axis: usize, order: u32) -> Self {
        let mut c = vec![0; n];
        c[axis] = order;
        MultiIndex(c)
    }

    pub fn components(&self) -> &[u32] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn order(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn add(&self, other: &MultiIndex) -> MultiIndex {
        assert_eq!(self.dim(), other.dim());
        MultiIndex(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    /// Number of ordered index tuples `(k_1, ..., k_|α|)` that collapse to this
    /// multi-index, i.e. `|α|! / α!`.
    pub fn multiplicity(&self) -> f64 {
        let mut num = factorial(self.order());
        for &a in &self.0 {
            num /= factorial(a);
        }
        num
    }

    /// All multi-indices in `n` variables with total order `order`, in
    /// lexicographically decreasing order of the first component.
    pub fn all_of_order(n: usize, order: u32) -> Vec<MultiIndex> {
        let mut out = Vec::new();
        let mut cur = vec![0u32; n];
        fill(&mut out, &mut cur, 0, order);
        out
    }
}

fn fill(out: &mut Vec<MultiIndex>, cur: &mut Vec<u32>, pos: usize, left: u32) {
    if pos + 1 == cur.len() {
        cur[pos] = left;
        out.push(MultiIndex(cur.clone()));
        return;
    }
    for a in (0..=left).rev() {
        cur[pos] = a;
        fill(out, cur, pos + 1, left - a);
    }
    cur[pos] = 0;
}

pub(crate) fn factorial(k: u32) -> f64 {
    (1..=k).map(f64::from).product()
}

pub(crate) fn binomial(n: u32, k: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    factorial(n) / (factorial(k) * factorial(n - k))
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, a) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{a}")?;
        }
        write!(f, ")")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lambda_values() {
        assert_eq!(lambda(1, 3).unwrap(), 0);
        assert_eq!(lambda(2, 2).unwrap(), 1);
        assert_eq!(lambda(2, 3).unwrap(), 1);
        assert_eq!(lambda(1, 2).unwrap(), 0);
        assert_eq!(lambda(3, 3).unwrap(), 2);
        assert_eq!(lambda(2, 5).unwrap(), 0);
    }

    #[test]
    fn dimension_out_of_range() {
        assert!(matches!(lambda(2, 1), Err(Error::DimensionOutOfRange { .. })));
        assert!(matches!(lambda(2, 6), Err(Error::DimensionOutOfRange { .. })));
        assert!(DimensionParams::new(0, 2).is_err());
    }

    #[test]
    fn lambda_range_invariant() {
        for m in 1..6 {
            for n in 2..=2 * m + 1 {
                let p = DimensionParams::new(m, n).unwrap();
                assert!(p.lambda() <= m);
                let twice = 2 * m as i64 - n as i64 + if n % 2 == 1 { 1 } else { 0 };
                assert_eq!(2 * p.lambda() as i64, twice);
            }
        }
    }

    #[test]
    fn multi_index_enumeration() {
        let all = MultiIndex::all_of_order(3, 2);
        assert_eq!(all.len(), 6);
        let total: f64 = all.iter().map(|a| a.multiplicity()).sum();
        assert_eq!(total, 9.0);
        assert!(all.iter().all(|a| a.order() == 2));
        assert_eq!(MultiIndex::all_of_order(2, 0), vec![MultiIndex::zero(2)]);
    }

    #[test]
    fn params_serde_validates() {
        let ok: DimensionParams = serde_json::from_str(r#"{"m":2,"n":3}"#).unwrap();
        assert_eq!(ok.lambda(), 1);
        assert!(serde_json::from_str::<DimensionParams>(r#"{"m":1,"n":4}"#).is_err());
    }
}
