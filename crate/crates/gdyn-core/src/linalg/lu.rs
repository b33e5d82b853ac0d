//! LU factorization with partial pivoting.

use alloc::vec::Vec;

use super::ComplexMatrix;
use crate::error::{Error, Result};
use crate::C64;

/// Packed `P·M = L·U` factors; `L` has a unit diagonal.
#[derive(Clone, Debug)]
pub struct Lu {
    lu: ComplexMatrix,
    perm: Vec<usize>,
    sign: f64,
}

impl Lu {
    pub fn factor(m: &ComplexMatrix) -> Result<Self> {
        let n = m.n();
        let mut lu = m.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = 1.0;
        let scale = m.max_abs();
        if scale == 0.0 && n > 0 {
            return Err(Error::Singular);
        }
        for k in 0..n {
            let (p, pmax) = (k..n)
                .map(|i| (i, lu[(i, k)].norm()))
                .fold(
                    (k, -1.0),
                    |best, cur| if cur.1 > best.1 { cur } else { best },
                );
            if pmax <= scale * f64::EPSILON * 1e-3 {
                return Err(Error::Singular);
            }
            if p != k {
                for j in 0..n {
                    let t = lu[(k, j)];
                    lu[(k, j)] = lu[(p, j)];
                    lu[(p, j)] = t;
                }
                perm.swap(k, p);
                sign = -sign;
            }
            let pivot = lu[(k, k)];
            for i in k + 1..n {
                let f = lu[(i, k)] / pivot;
                lu[(i, k)] = f;
                if f == C64::new(0.0, 0.0) {
                    continue;
                }
                for j in k + 1..n {
                    let u = lu[(k, j)];
                    lu[(i, j)] -= f * u;
                }
            }
        }
        Ok(Lu { lu, perm, sign })
    }

    pub fn det(&self) -> C64 {
        let n = self.lu.n();
        (0..n).fold(C64::new(self.sign, 0.0), |acc, i| acc * self.lu[(i, i)])
    }

    /// Solves `M x = b` in place.
    pub fn solve_in_place(&self, b: &mut [C64]) {
        let n = self.lu.n();
        let mut x: Vec<C64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let s = x[i] - (0..i).map(|j| self.lu[(i, j)] * x[j]).sum::<C64>();
            x[i] = s;
        }
        for i in (0..n).rev() {
            let s = x[i] - (i + 1..n).map(|j| self.lu[(i, j)] * x[j]).sum::<C64>();
            x[i] = s / self.lu[(i, i)];
        }
        b.copy_from_slice(&x);
    }

    pub fn inverse(&self) -> ComplexMatrix {
        let n = self.lu.n();
        let mut inv = ComplexMatrix::zeros(n);
        let mut col = alloc::vec![C64::new(0.0, 0.0); n];
        for j in 0..n {
            col.iter_mut().for_each(|c| *c = C64::new(0.0, 0.0));
            col[j] = C64::new(1.0, 0.0);
            self.solve_in_place(&mut col);
            for i in 0..n {
                inv[(i, j)] = col[i];
            }
        }
        inv
    }
}

/// Matrix inverse by pivoted LU.
pub fn inverse(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    Ok(Lu::factor(m)?.inverse())
}

/// Determinant by pivoted LU; exactly zero for singular input.
pub fn determinant(m: &ComplexMatrix) -> C64 {
    match Lu::factor(m) {
        Ok(lu) => lu.det(),
        Err(_) => C64::new(0.0, 0.0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn inverse_round_trip() {
        let m = ComplexMatrix::from_row_major(
            3,
            vec![
                C64::new(0.0, 1.0),
                C64::new(2.0, 0.0),
                C64::new(1.0, -1.0),
                C64::new(1.0, 0.0),
                C64::new(0.0, 0.0),
                C64::new(3.0, 0.5),
                C64::new(-2.0, 0.0),
                C64::new(1.0, 1.0),
                C64::new(0.0, 0.0),
            ],
        )
        .unwrap();
        let inv = inverse(&m).unwrap();
        assert!(m.matmul(&inv).identity_defect() < 1e-14);
    }

    #[test]
    fn determinant_of_triangular() {
        let m = ComplexMatrix::from_row_major(
            2,
            vec![
                C64::new(2.0, 0.0),
                C64::new(5.0, 0.0),
                C64::new(0.0, 0.0),
                C64::new(0.0, 3.0),
            ],
        )
        .unwrap();
        assert!((determinant(&m) - C64::new(0.0, 6.0)).norm() < 1e-15);
        assert_eq!(determinant(&ComplexMatrix::zeros(2)), C64::new(0.0, 0.0));
        assert!(matches!(
            inverse(&ComplexMatrix::zeros(2)),
            Err(Error::Singular)
        ));
    }
}
