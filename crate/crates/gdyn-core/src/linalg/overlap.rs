use alloc::vec::Vec;

use super::{ComplexMatrix, SpectralDecomposition};
use crate::error::{Error, Result};
use crate::C64;

/// Condition estimates of `A = S†S` above this are rejected.
pub const MAX_OVERLAP_CONDITION: f64 = 1e13;

/// Eigenvector overlaps `O_ij = A⁻¹_ij A_ji` with `A = S†S`.
#[derive(Clone, Debug)]
pub struct OverlapMatrix {
    pub o: ComplexMatrix,
    pub diag_real: Vec<f64>,
}

/// The Gram matrix `A = S†S` and `A⁻¹ = S⁻¹ (S⁻¹)†` of a decomposition.
#[derive(Clone, Debug)]
pub struct Gram {
    pub a: ComplexMatrix,
    pub a_inv: ComplexMatrix,
}

impl Gram {
    pub fn of(dec: &SpectralDecomposition) -> Self {
        let a = dec.s.adjoint().matmul(&dec.s);
        let a_inv = dec.s_inv.matmul(&dec.s_inv.adjoint());
        Gram { a, a_inv }
    }

    pub fn condition_estimate(&self) -> f64 {
        self.a.norm_one() * self.a_inv.norm_one()
    }
}

impl OverlapMatrix {
    pub fn n(&self) -> usize {
        self.o.n()
    }

    /// Largest deviation of a column sum from one.
    pub fn column_sum_defect(&self) -> f64 {
        let n = self.n();
        (0..n)
            .map(|j| ((0..n).map(|i| self.o[(i, j)]).sum::<C64>() - C64::new(1.0, 0.0)).norm())
            .fold(0.0, f64::max)
    }
}

pub fn overlap_matrix(dec: &SpectralDecomposition) -> Result<OverlapMatrix> {
    let gram = Gram::of(dec);
    overlap_from_gram(&gram)
}

pub fn overlap_from_gram(gram: &Gram) -> Result<OverlapMatrix> {
    let condition = gram.condition_estimate();
    if !(condition <= MAX_OVERLAP_CONDITION) {
        return Err(Error::SingularOverlap { condition });
    }
    let n = gram.a.n();
    let o = ComplexMatrix::from_fn(n, |i, j| gram.a_inv[(i, j)] * gram.a[(j, i)]);
    let diag_real = (0..n).map(|i| o[(i, i)].re).collect();
    Ok(OverlapMatrix { o, diag_real })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Gauge;
    use alloc::vec;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn shear_example() {
        let s = ComplexMatrix::from_row_major(
            2,
            vec![c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)],
        )
        .unwrap();
        let dec = SpectralDecomposition::from_parts(
            vec![c(0.0, 0.0), c(1.0, 0.0)],
            s,
            Gauge::Decomposition,
        )
        .unwrap();
        let ov = overlap_matrix(&dec).unwrap();
        let expected = [[2.0, -1.0], [-1.0, 2.0]];
        for (i, row) in expected.iter().enumerate() {
            for (j, &e) in row.iter().enumerate() {
                assert!((ov.o[(i, j)] - c(e, 0.0)).norm() < 1e-14);
            }
        }
        assert!(ov.column_sum_defect() < 1e-14);
    }

    #[test]
    fn unitary_gives_identity() {
        let r = 1.0 / 2f64.sqrt();
        let s = ComplexMatrix::from_row_major(2, vec![c(r, 0.0), c(0.0, r), c(0.0, r), c(r, 0.0)])
            .unwrap();
        let dec = SpectralDecomposition::from_parts(
            vec![c(0.0, 0.0), c(1.0, 1.0)],
            s,
            Gauge::Decomposition,
        )
        .unwrap();
        let ov = overlap_matrix(&dec).unwrap();
        assert!(ov.o.identity_defect() < 1e-14);
    }

    #[test]
    fn nearly_parallel_columns_rejected() {
        let s = ComplexMatrix::from_row_major(
            2,
            vec![c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(1e-9, 0.0)],
        )
        .unwrap();
        let dec = SpectralDecomposition::from_parts(
            vec![c(0.0, 0.0), c(1.0, 0.0)],
            s,
            Gauge::Decomposition,
        )
        .unwrap();
        assert!(matches!(
            overlap_matrix(&dec),
            Err(Error::SingularOverlap { .. })
        ));
    }
}
