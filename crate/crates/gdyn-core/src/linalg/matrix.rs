use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

use crate::error::{Error, Result};
use crate::C64;

/// Dense square complex matrix stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexMatrix {
    n: usize,
    data: Vec<C64>,
}

impl ComplexMatrix {
    pub fn zeros(n: usize) -> Self {
        ComplexMatrix {
            n,
            data: vec![C64::new(0.0, 0.0); n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_diag(diag: &[C64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    /// Builds a matrix from row-major entries, rejecting non-finite values.
    pub fn from_row_major(n: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                got: data.len(),
            });
        }
        let m = ComplexMatrix { n, data };
        if !m.is_finite() {
            return Err(Error::NonFinite);
        }
        Ok(m)
    }

    /// Builds a matrix from a closure over `(row, col)`.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        ComplexMatrix { n, data }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<C64> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[C64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn diag(&self) -> Vec<C64> {
        (0..self.n).map(|i| self[(i, i)]).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data
            .iter()
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    pub fn frobenius_sqr(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.n, |i, j| self[(j, i)].conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.n, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, rhs: &Self) -> Self {
        assert_eq!(self.n, rhs.n, "matmul dimension mismatch");
        let n = self.n;
        let mut out = Self::zeros(n);
        for i in 0..n {
            let out_row = &mut out.data[i * n..(i + 1) * n];
            for k in 0..n {
                let a = self.data[i * n + k];
                if a == C64::new(0.0, 0.0) {
                    continue;
                }
                for (o, &b) in out_row.iter_mut().zip(&rhs.data[k * n..(k + 1) * n]) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// `self · diag(d)`: scales column j by `d[j]`.
    pub fn scale_columns(&self, d: &[C64]) -> Self {
        Self::from_fn(self.n, |i, j| self[(i, j)] * d[j])
    }

    /// `diag(d) · self`: scales row i by `d[i]`.
    pub fn scale_rows(&self, d: &[C64]) -> Self {
        Self::from_fn(self.n, |i, j| d[i] * self[(i, j)])
    }

    pub fn scaled(&self, s: C64) -> Self {
        ComplexMatrix {
            n: self.n,
            data: self.data.iter().map(|&z| z * s).collect(),
        }
    }

    pub fn add(&self, rhs: &Self) -> Self {
        assert_eq!(self.n, rhs.n);
        ComplexMatrix {
            n: self.n,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        assert_eq!(self.n, rhs.n);
        ComplexMatrix {
            n: self.n,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    /// Max-norm distance to another matrix.
    pub fn max_abs_diff(&self, rhs: &Self) -> f64 {
        assert_eq!(self.n, rhs.n);
        self.data
            .iter()
            .zip(&rhs.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).norm()))
    }

    /// Max-norm distance to the identity.
    pub fn identity_defect(&self) -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                let target = if i == j {
                    C64::new(1.0, 0.0)
                } else {
                    C64::new(0.0, 0.0)
                };
                m = m.max((self[(i, j)] - target).norm());
            }
        }
        m
    }

    /// Induced 1-norm (max column sum).
    pub fn norm_one(&self) -> f64 {
        (0..self.n)
            .map(|j| (0..self.n).map(|i| self[(i, j)].norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn trace(&self) -> C64 {
        (0..self.n).map(|i| self[(i, i)]).sum()
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.n + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.n + j]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn rejects_non_finite() {
        let err = ComplexMatrix::from_row_major(1, vec![c(f64::NAN, 0.0)]).unwrap_err();
        assert_eq!(err, Error::NonFinite);
        let err = ComplexMatrix::from_row_major(2, vec![c(1.0, 0.0)]).unwrap_err();
        assert!(matches!(
            err,
            Error::DimensionMismatch {
                expected: 4,
                got: 1
            }
        ));
    }

    #[test]
    fn product_and_adjoint() {
        let a = ComplexMatrix::from_row_major(
            2,
            vec![c(1.0, 1.0), c(2.0, 0.0), c(0.0, -1.0), c(3.0, 0.0)],
        )
        .unwrap();
        let id = ComplexMatrix::identity(2);
        assert_eq!(a.matmul(&id), a);
        let ah = a.adjoint();
        assert_eq!(ah[(0, 1)], c(0.0, 1.0));
        assert_eq!(ah[(1, 0)], c(2.0, 0.0));
        let p = a.matmul(&ah);
        // a a^H is Hermitian
        assert!((p[(0, 1)] - p[(1, 0)].conj()).norm() < 1e-15);
    }
}
