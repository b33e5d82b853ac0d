//! Diagonal initial conditions `X₀ = diag(a₁, …, a_N)` stored as a multiset.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::C64;

#[derive(Clone, Debug, PartialEq)]
pub struct SourceSpec {
    entries: Vec<(C64, usize)>,
}

impl SourceSpec {
    /// Groups exactly equal values, keeping first-appearance order.
    pub fn from_values(values: &[C64]) -> Result<Self> {
        let mut entries: Vec<(C64, usize)> = Vec::new();
        for &v in values {
            if !(v.re.is_finite() && v.im.is_finite()) {
                return Err(Error::NonFinite);
            }
            match entries.iter_mut().find(|(a, _)| *a == v) {
                Some((_, m)) => *m += 1,
                None => entries.push((v, 1)),
            }
        }
        Self::from_multiset(entries)
    }

    pub fn from_multiset(entries: Vec<(C64, usize)>) -> Result<Self> {
        if entries.is_empty() || entries.iter().all(|&(_, m)| m == 0) {
            return Err(Error::invalid("source", "at least one value is required"));
        }
        if entries
            .iter()
            .any(|(v, _)| !(v.re.is_finite() && v.im.is_finite()))
        {
            return Err(Error::NonFinite);
        }
        let mut merged: Vec<(C64, usize)> = Vec::new();
        for (v, m) in entries.into_iter().filter(|&(_, m)| m > 0) {
            match merged.iter_mut().find(|(a, _)| *a == v) {
                Some((_, k)) => *k += m,
                None => merged.push((v, m)),
            }
        }
        Ok(SourceSpec { entries: merged })
    }

    /// All `N` values at the origin (Ginibre evolution).
    pub fn null(n: usize) -> Self {
        SourceSpec {
            entries: alloc::vec![(C64::new(0.0, 0.0), n.max(1))],
        }
    }

    /// `a` and `−a`, each with multiplicity `n/2`.
    pub fn spiric(n: usize, a: C64) -> Result<Self> {
        if n < 2 || !n.is_multiple_of(2) {
            return Err(Error::invalid(
                "n",
                "the two-point source needs an even size",
            ));
        }
        if a == C64::new(0.0, 0.0) {
            return Err(Error::invalid(
                "a",
                "the two-point source needs a nonzero location",
            ));
        }
        Ok(SourceSpec {
            entries: alloc::vec![(a, n / 2), (-a, n / 2)],
        })
    }

    pub fn n(&self) -> usize {
        self.entries.iter().map(|&(_, m)| m).sum()
    }

    pub fn entries(&self) -> &[(C64, usize)] {
        &self.entries
    }

    /// Values with multiplicity expanded.
    pub fn values(&self) -> Vec<C64> {
        self.entries
            .iter()
            .flat_map(|&(v, m)| core::iter::repeat_n(v, m))
            .collect()
    }

    /// `(|a_i − z|², multiplicity)` pairs.
    pub fn squared_distances(&self, z: C64) -> Vec<(f64, usize)> {
        self.entries
            .iter()
            .map(|&(a, m)| ((a - z).norm_sqr(), m))
            .collect()
    }

    pub fn max_modulus(&self) -> f64 {
        self.entries
            .iter()
            .map(|(a, _)| a.norm())
            .fold(0.0, f64::max)
    }
}
