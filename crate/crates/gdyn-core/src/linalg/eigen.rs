//! Eigendecomposition of general complex matrices through a complex Schur form.

use alloc::vec::Vec;
use core::cmp::Ordering;
#[allow(unused_imports)]
use num_traits::Float;

use super::ComplexMatrix;
use crate::error::{Error, Result};
use crate::C64;

/// Relative reconstruction tolerance for decompositions.
pub const TOL_RECON: f64 = 1e-9;
/// Absolute tolerance for exact algebraic identities.
pub const TOL_ALG: f64 = 1e-10;
/// Default minimal admissible eigenvalue separation.
pub const DEFAULT_GAP_FLOOR: f64 = 1e-8;

const MAX_SWEEPS_PER_EIGENVALUE: usize = 60;

/// How the columns of `S` were normalized.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Gauge {
    /// Unit-norm columns with the largest-modulus entry real positive.
    Decomposition,
    /// Columns evolved by the eigenvector SDE (`δS_ii = 0` along the path).
    Trajectory,
}

/// `X = S Λ S⁻¹` with right eigenvectors in the columns of `S`.
#[derive(Clone, Debug)]
pub struct SpectralDecomposition {
    pub lambdas: Vec<C64>,
    pub s: ComplexMatrix,
    pub s_inv: ComplexMatrix,
    pub gauge: Gauge,
    pub min_gap: f64,
}

impl SpectralDecomposition {
    pub fn n(&self) -> usize {
        self.lambdas.len()
    }

    /// Assembles a decomposition from its parts, refreshing `S⁻¹` by LU.
    pub fn from_parts(lambdas: Vec<C64>, s: ComplexMatrix, gauge: Gauge) -> Result<Self> {
        if lambdas.len() != s.n() {
            return Err(Error::DimensionMismatch {
                expected: s.n(),
                got: lambdas.len(),
            });
        }
        if !s.is_finite()
            || lambdas
                .iter()
                .any(|l| !(l.re.is_finite() && l.im.is_finite()))
        {
            return Err(Error::NonFinite);
        }
        let s_inv = super::lu::inverse(&s)?;
        let min_gap = min_gap(&lambdas);
        Ok(SpectralDecomposition {
            lambdas,
            s,
            s_inv,
            gauge,
            min_gap,
        })
    }

    /// `S Λ S⁻¹`.
    pub fn reconstruct(&self) -> ComplexMatrix {
        self.s.scale_columns(&self.lambdas).matmul(&self.s_inv)
    }
}

/// Smallest pairwise eigenvalue distance (infinite for n < 2).
pub fn min_gap(lambdas: &[C64]) -> f64 {
    let mut gap = f64::INFINITY;
    for i in 0..lambdas.len() {
        for j in i + 1..lambdas.len() {
            gap = gap.min((lambdas[i] - lambdas[j]).norm());
        }
    }
    gap
}

/// `S Λ S⁻¹` for a decomposition.
pub fn reconstruct(dec: &SpectralDecomposition) -> ComplexMatrix {
    dec.reconstruct()
}

/// Full eigendecomposition in the decomposition gauge, eigenvalues sorted by (Re, Im).
pub fn eigendecompose(x: &ComplexMatrix, gap_floor: f64) -> Result<SpectralDecomposition> {
    if !x.is_finite() {
        return Err(Error::NonFinite);
    }
    let n = x.n();
    if n == 0 {
        return Err(Error::UnsupportedDimension {
            n,
            reason: "empty matrix",
        });
    }
    let (t, z) = schur(x, true)?;
    let z = z.expect("Schur vectors requested");
    let lambdas_unsorted = t.diag();
    let gap = min_gap(&lambdas_unsorted);
    if gap < gap_floor {
        return Err(Error::DegenerateSpectrum {
            min_gap: gap,
            floor: gap_floor,
        });
    }

    let v = triangular_eigenvectors(&t);
    let w = unit_upper_inverse(&v);
    let s_raw = z.matmul(&v);
    let s_inv_raw = w.matmul(&z.adjoint());

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| lex_cmp(lambdas_unsorted[a], lambdas_unsorted[b]));

    let mut s = ComplexMatrix::zeros(n);
    let mut s_inv = ComplexMatrix::zeros(n);
    let mut lambdas = Vec::with_capacity(n);
    for (new, &old) in order.iter().enumerate() {
        lambdas.push(lambdas_unsorted[old]);
        let norm = (0..n)
            .map(|i| s_raw[(i, old)].norm_sqr())
            .sum::<f64>()
            .sqrt();
        let mut pivot = C64::new(1.0, 0.0);
        let mut best = -1.0;
        for i in 0..n {
            let m = s_raw[(i, old)].norm();
            if m > best {
                best = m;
                pivot = s_raw[(i, old)];
            }
        }
        let phase = pivot / pivot.norm();
        let to_gauge = phase.conj() / norm;
        let back = phase * norm;
        for i in 0..n {
            s[(i, new)] = s_raw[(i, old)] * to_gauge;
            s_inv[(new, i)] = s_inv_raw[(old, i)] * back;
        }
    }

    let dec = SpectralDecomposition {
        lambdas,
        s,
        s_inv,
        gauge: Gauge::Decomposition,
        min_gap: gap,
    };
    let scale = x.max_abs().max(f64::MIN_POSITIVE);
    let recon = dec.reconstruct().max_abs_diff(x) / scale;
    let ident = dec.s.matmul(&dec.s_inv).identity_defect();
    let residual = recon.max(ident);
    if !(residual <= TOL_RECON) {
        return Err(Error::InaccurateDecomposition { residual });
    }
    Ok(dec)
}

/// Eigenvalues only, sorted by (Re, Im).
pub fn eigenvalues(x: &ComplexMatrix) -> Result<Vec<C64>> {
    if !x.is_finite() {
        return Err(Error::NonFinite);
    }
    let (t, _) = schur(x, false)?;
    let mut l = t.diag();
    l.sort_by(|a, b| lex_cmp(*a, *b));
    Ok(l)
}

pub(crate) fn lex_cmp(a: C64, b: C64) -> Ordering {
    a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im))
}

/// Complex Schur form `X = Z T Zᴴ`; `Z` is accumulated only when requested.
pub fn schur(x: &ComplexMatrix, want_z: bool) -> Result<(ComplexMatrix, Option<ComplexMatrix>)> {
    let n = x.n();
    let mut h = x.clone();
    let mut z = if want_z {
        Some(ComplexMatrix::identity(n))
    } else {
        None
    };
    hessenberg(&mut h, z.as_mut());
    hessenberg_qr(&mut h, z.as_mut())?;
    Ok((h, z))
}

fn hessenberg(h: &mut ComplexMatrix, mut z: Option<&mut ComplexMatrix>) {
    let n = h.n();
    if n < 3 {
        return;
    }
    let mut v = alloc::vec![C64::new(0.0, 0.0); n];
    for k in 0..n - 2 {
        let norm = (k + 1..n).map(|i| h[(i, k)].norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let x0 = h[(k + 1, k)];
        let phase = if x0.norm() == 0.0 {
            C64::new(1.0, 0.0)
        } else {
            x0 / x0.norm()
        };
        let alpha = -phase * norm;
        for i in k + 1..n {
            v[i] = h[(i, k)];
        }
        v[k + 1] -= alpha;
        let vnorm = (k + 1..n).map(|i| v[i].norm_sqr()).sum::<f64>().sqrt();
        if vnorm == 0.0 {
            continue;
        }
        for vi in v[k + 1..n].iter_mut() {
            *vi /= vnorm;
        }
        // H ← (I − 2vvᴴ) H
        for j in k..n {
            let s: C64 = (k + 1..n).map(|i| v[i].conj() * h[(i, j)]).sum();
            for i in k + 1..n {
                let d = v[i] * s * 2.0;
                h[(i, j)] -= d;
            }
        }
        // H ← H (I − 2vvᴴ)
        for i in 0..n {
            let s: C64 = (k + 1..n).map(|j| h[(i, j)] * v[j]).sum();
            for j in k + 1..n {
                let d = s * v[j].conj() * 2.0;
                h[(i, j)] -= d;
            }
        }
        if let Some(z) = z.as_deref_mut() {
            for i in 0..n {
                let s: C64 = (k + 1..n).map(|j| z[(i, j)] * v[j]).sum();
                for j in k + 1..n {
                    let d = s * v[j].conj() * 2.0;
                    z[(i, j)] -= d;
                }
            }
        }
        for i in k + 2..n {
            h[(i, k)] = C64::new(0.0, 0.0);
        }
    }
}

/// Rotation `[[c, s], [−s̄, c]]` mapping `(a, b)` to `(r, 0)`.
#[derive(Clone, Copy)]
struct Givens {
    c: f64,
    s: C64,
}

impl Givens {
    fn new(a: C64, b: C64) -> Self {
        let na = a.norm();
        let nb = b.norm();
        if nb == 0.0 {
            return Givens {
                c: 1.0,
                s: C64::new(0.0, 0.0),
            };
        }
        if na == 0.0 {
            return Givens {
                c: 0.0,
                s: b.conj() / nb,
            };
        }
        let r = na.hypot(nb);
        Givens {
            c: na / r,
            s: a * b.conj() / (na * r),
        }
    }

    #[inline]
    fn rotate_rows(&self, p: C64, q: C64) -> (C64, C64) {
        (p * self.c + self.s * q, -self.s.conj() * p + q * self.c)
    }

    #[inline]
    fn rotate_cols(&self, p: C64, q: C64) -> (C64, C64) {
        (p * self.c + q * self.s.conj(), -p * self.s + q * self.c)
    }
}

fn wilkinson_shift(a: C64, b: C64, c: C64, d: C64) -> C64 {
    let half_tr = (a + d) * 0.5;
    let disc = ((a - d) * 0.5 * ((a - d) * 0.5) + b * c).sqrt();
    let e1 = half_tr + disc;
    let e2 = half_tr - disc;
    if (e1 - d).norm() <= (e2 - d).norm() {
        e1
    } else {
        e2
    }
}

fn hessenberg_qr(h: &mut ComplexMatrix, mut z: Option<&mut ComplexMatrix>) -> Result<()> {
    let n = h.n();
    if n < 2 {
        return Ok(());
    }
    let norm = h.max_abs();
    let eps = f64::EPSILON;
    let mut hi = n - 1;
    let mut iter = 0usize;
    let mut total = 0usize;
    let mut rots: Vec<Givens> = Vec::with_capacity(n);
    while hi > 0 {
        let mut l = hi;
        while l > 0 {
            let s = h[(l - 1, l - 1)].norm() + h[(l, l)].norm();
            let s = if s == 0.0 { norm } else { s };
            if h[(l, l - 1)].norm() <= eps * s {
                h[(l, l - 1)] = C64::new(0.0, 0.0);
                break;
            }
            l -= 1;
        }
        if l == hi {
            hi -= 1;
            iter = 0;
            continue;
        }
        iter += 1;
        total += 1;
        if total > MAX_SWEEPS_PER_EIGENVALUE * n {
            return Err(Error::NoConvergence);
        }
        let mu = if iter.is_multiple_of(11) {
            let sub = h[(hi, hi - 1)].norm();
            h[(hi, hi)] + C64::new(0.75 * sub, 0.43 * sub)
        } else {
            wilkinson_shift(
                h[(hi - 1, hi - 1)],
                h[(hi - 1, hi)],
                h[(hi, hi - 1)],
                h[(hi, hi)],
            )
        };

        for i in l..=hi {
            h[(i, i)] -= mu;
        }
        rots.clear();
        for k in l..hi {
            let g = Givens::new(h[(k, k)], h[(k + 1, k)]);
            for j in k..n {
                let (p, q) = g.rotate_rows(h[(k, j)], h[(k + 1, j)]);
                h[(k, j)] = p;
                h[(k + 1, j)] = q;
            }
            h[(k + 1, k)] = C64::new(0.0, 0.0);
            rots.push(g);
        }
        for (idx, g) in rots.iter().enumerate() {
            let k = l + idx;
            let top = (k + 2).min(hi);
            for i in 0..=top {
                let (p, q) = g.rotate_cols(h[(i, k)], h[(i, k + 1)]);
                h[(i, k)] = p;
                h[(i, k + 1)] = q;
            }
            if let Some(z) = z.as_deref_mut() {
                for i in 0..n {
                    let (p, q) = g.rotate_cols(z[(i, k)], z[(i, k + 1)]);
                    z[(i, k)] = p;
                    z[(i, k + 1)] = q;
                }
            }
        }
        for i in l..=hi {
            h[(i, i)] += mu;
        }
    }
    for i in 1..n {
        for j in 0..i {
            h[(i, j)] = C64::new(0.0, 0.0);
        }
    }
    Ok(())
}

/// Unit-diagonal upper-triangular eigenvector matrix of an upper-triangular `T`.
fn triangular_eigenvectors(t: &ComplexMatrix) -> ComplexMatrix {
    let n = t.n();
    let smin = (t.max_abs() * f64::EPSILON).max(f64::MIN_POSITIVE);
    let mut v = ComplexMatrix::zeros(n);
    for k in 0..n {
        v[(k, k)] = C64::new(1.0, 0.0);
        let lk = t[(k, k)];
        for i in (0..k).rev() {
            let mut s = C64::new(0.0, 0.0);
            for j in i + 1..=k {
                s += t[(i, j)] * v[(j, k)];
            }
            let mut d = t[(i, i)] - lk;
            if d.norm() < smin {
                d = C64::new(smin, 0.0);
            }
            v[(i, k)] = -s / d;
        }
    }
    v
}

fn unit_upper_inverse(v: &ComplexMatrix) -> ComplexMatrix {
    let n = v.n();
    let mut w = ComplexMatrix::zeros(n);
    for i in 0..n {
        w[(i, i)] = C64::new(1.0, 0.0);
        for j in i + 1..n {
            let mut s = C64::new(0.0, 0.0);
            for m in i..j {
                s += w[(i, m)] * v[(m, j)];
            }
            w[(i, j)] = -s;
        }
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn diagonal_input() {
        let x = ComplexMatrix::from_diag(&[c(2.0, 0.0), c(1.0, 0.0)]);
        let dec = eigendecompose(&x, DEFAULT_GAP_FLOOR).unwrap();
        assert_eq!(dec.lambdas, vec![c(1.0, 0.0), c(2.0, 0.0)]);
        assert!(
            dec.s.max_abs_diff(
                &ComplexMatrix::from_row_major(
                    2,
                    vec![c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]
                )
                .unwrap()
            ) < 1e-15
        );
        let x = ComplexMatrix::from_diag(&[c(1.0, 0.0), c(2.0, 0.0)]);
        let dec = eigendecompose(&x, DEFAULT_GAP_FLOOR).unwrap();
        assert!(dec.s.identity_defect() < 1e-15);
        assert_eq!(dec.gauge, Gauge::Decomposition);
    }

    #[test]
    fn repeated_eigenvalue_rejected() {
        let err = eigendecompose(&ComplexMatrix::identity(2), DEFAULT_GAP_FLOOR).unwrap_err();
        assert!(matches!(err, Error::DegenerateSpectrum { .. }));
    }

    #[test]
    fn tiny_gap_rejected() {
        let x = ComplexMatrix::from_row_major(
            2,
            vec![c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(1e-9, 0.0)],
        )
        .unwrap();
        match eigendecompose(&x, 1e-6).unwrap_err() {
            Error::DegenerateSpectrum { min_gap, .. } => assert!((min_gap - 1e-9).abs() < 1e-20),
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn non_normal_two_by_two() {
        let x = ComplexMatrix::from_row_major(
            2,
            vec![c(1.0, 0.0), c(3.0, 1.0), c(0.0, 0.0), c(-1.0, 0.5)],
        )
        .unwrap();
        let dec = eigendecompose(&x, DEFAULT_GAP_FLOOR).unwrap();
        assert!((dec.lambdas[0] - c(-1.0, 0.5)).norm() < 1e-14);
        assert!((dec.lambdas[1] - c(1.0, 0.0)).norm() < 1e-14);
        assert!(dec.reconstruct().max_abs_diff(&x) < 1e-13);
        for j in 0..2 {
            let norm: f64 = (0..2).map(|i| dec.s[(i, j)].norm_sqr()).sum();
            assert!((norm - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn companion_matrix_roots() {
        // roots 1, 2, 3, 4 of the monic quartic
        let coeffs = [24.0, -50.0, 35.0, -10.0];
        let x = ComplexMatrix::from_fn(4, |i, j| {
            if i == 0 {
                c(-coeffs[3 - j], 0.0)
            } else if i == j + 1 {
                c(1.0, 0.0)
            } else {
                c(0.0, 0.0)
            }
        });
        let l = eigenvalues(&x).unwrap();
        for (k, lk) in l.iter().enumerate() {
            assert!((lk - c(k as f64 + 1.0, 0.0)).norm() < 1e-10, "{lk}");
        }
    }
}
