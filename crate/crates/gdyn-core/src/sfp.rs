//! Pointwise checks of the Fokker–Planck machinery for eigenvalues and right
//! eigenvectors: Itô coefficients, derivative identities of `A = S†S`, the
//! cancellations behind the factorized solution, one-step covariances and the
//! heat-kernel solution at `N = 2`.
//!
//! Wirtinger derivatives use `∂ = ½(∂_x − i∂_y)`, `∂̄ = ½(∂_x + i∂_y)`.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;

use crate::error::{Error, Result};
use crate::integrators::{dyson_deltas, raw_increment, NoiseConvention};
use crate::linalg::{inverse, min_gap, ComplexMatrix, Gauge, SpectralDecomposition};
use crate::rng::{ginibre, uniform_disk};
use crate::stats::Moments;
use crate::C64;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };

fn kron(a: usize, b: usize) -> C64 {
    if a == b {
        ONE
    } else {
        ZERO
    }
}

/// Drift-free Itô coefficients at a point `(Λ, S)`:
/// `ll[i,j] = dλ_i dλ̄_j`, `ls[i,k,l] = dλ_i dS̄_kl`, `sl[i,k,l] = dS_kl dλ̄_i`,
/// `ss[k,l,n,m] = dS_kl dS̄_nm`, all per unit time.
#[derive(Clone, Debug, PartialEq)]
pub struct Coefficients {
    pub n: usize,
    pub ll: Vec<C64>,
    pub ls: Vec<C64>,
    pub sl: Vec<C64>,
    pub ss: Vec<C64>,
}

impl Coefficients {
    pub fn i2(&self, i: usize, j: usize) -> usize {
        i * self.n + j
    }

    pub fn i3(&self, i: usize, k: usize, l: usize) -> usize {
        (i * self.n + k) * self.n + l
    }

    pub fn i4(&self, k: usize, l: usize, n: usize, m: usize) -> usize {
        ((k * self.n + l) * self.n + n) * self.n + m
    }

    /// Coefficient of `dv_a dv̄_b` over the coordinates `v = (λ_0, …, λ_{N−1}, S row-major)`.
    pub fn pair(&self, a: usize, b: usize) -> C64 {
        let n = self.n;
        match (a < n, b < n) {
            (true, true) => self.ll[self.i2(a, b)],
            (true, false) => self.ls[self.i3(a, (b - n) / n, (b - n) % n)],
            (false, true) => self.sl[self.i3(b, (a - n) / n, (a - n) % n)],
            (false, false) => self.ss[self.i4((a - n) / n, (a - n) % n, (b - n) / n, (b - n) % n)],
        }
    }
}

/// `(S, S⁻¹, A, A⁻¹)` with `A = S†S`.
#[derive(Clone, Debug)]
struct Frame {
    s: ComplexMatrix,
    s_inv: ComplexMatrix,
    a: ComplexMatrix,
    a_inv: ComplexMatrix,
}

impl Frame {
    fn new(s: &ComplexMatrix) -> Result<Self> {
        let s_inv = inverse(s)?;
        let a = s.adjoint().matmul(s);
        let a_inv = s_inv.matmul(&s_inv.adjoint());
        Ok(Frame {
            s: s.clone(),
            s_inv,
            a,
            a_inv,
        })
    }

    /// `(S†)⁻¹_kα`.
    fn sdag_inv(&self, k: usize, alpha: usize) -> C64 {
        self.s_inv[(alpha, k)].conj()
    }

    /// `∂_{S_kl} A_αβ = S̄_kα δ_lβ`.
    fn da_ds(&self, k: usize, l: usize, alpha: usize, beta: usize) -> C64 {
        self.s[(k, alpha)].conj() * kron(l, beta)
    }

    /// `∂_{S̄_kl} A_αm = S_km δ_lα`.
    fn da_dsb(&self, k: usize, l: usize, alpha: usize, m: usize) -> C64 {
        self.s[(k, m)] * kron(l, alpha)
    }

    /// `∂_{S_kl} ∂_{S̄_nm} A_αβ = δ_kn δ_mα δ_lβ`.
    fn d2a(&self, k: usize, l: usize, n: usize, m: usize, alpha: usize, beta: usize) -> C64 {
        kron(k, n) * kron(m, alpha) * kron(l, beta)
    }

    /// `∂_{S_kl} A⁻¹_αβ = −S⁻¹_αk A⁻¹_lβ`.
    fn dai_ds(&self, k: usize, l: usize, alpha: usize, beta: usize) -> C64 {
        -self.s_inv[(alpha, k)] * self.a_inv[(l, beta)]
    }

    /// `∂_{S̄_kl} A⁻¹_nα = −A⁻¹_nl (S†)⁻¹_kα`.
    fn dai_dsb(&self, k: usize, l: usize, n: usize, alpha: usize) -> C64 {
        -self.a_inv[(n, l)] * self.sdag_inv(k, alpha)
    }

    /// `∂_{S_kl} ∂_{S̄_nm} A⁻¹_αβ = S⁻¹_αk A⁻¹_lm (S†)⁻¹_nβ`.
    fn d2ai(&self, k: usize, l: usize, n: usize, m: usize, alpha: usize, beta: usize) -> C64 {
        self.s_inv[(alpha, k)] * self.a_inv[(l, m)] * self.sdag_inv(n, beta)
    }
}

fn coefficients_in(lambdas: &[C64], f: &Frame) -> Coefficients {
    let n = lambdas.len();
    let mut c = Coefficients {
        n,
        ll: vec![ZERO; n * n],
        ls: vec![ZERO; n * n * n],
        sl: vec![ZERO; n * n * n],
        ss: vec![ZERO; n * n * n * n],
    };
    for i in 0..n {
        for j in 0..n {
            let k = c.i2(i, j);
            c.ll[k] = f.a_inv[(i, j)] * f.a[(j, i)];
        }
    }
    for i in 0..n {
        for k in 0..n {
            for l in 0..n {
                let mut ls = ZERO;
                let mut sl = ZERO;
                for m in (0..n).filter(|&m| m != l) {
                    ls += f.s[(k, m)].conj() * f.a[(l, i)] * f.a_inv[(i, m)]
                        / (lambdas[l].conj() - lambdas[m].conj());
                    sl += f.s[(k, m)] * f.a[(i, l)] * f.a_inv[(m, i)] / (lambdas[l] - lambdas[m]);
                }
                let idx = c.i3(i, k, l);
                c.ls[idx] = ls;
                c.sl[idx] = sl;
            }
        }
    }
    for k in 0..n {
        for l in 0..n {
            for p in 0..n {
                for m in 0..n {
                    let mut v = ZERO;
                    for al in (0..n).filter(|&a| a != l) {
                        let left = f.s[(k, al)] / (lambdas[l] - lambdas[al]);
                        for be in (0..n).filter(|&b| b != m) {
                            v += left * f.s[(p, be)].conj() * f.a[(m, l)] * f.a_inv[(al, be)]
                                / (lambdas[m].conj() - lambdas[be].conj());
                        }
                    }
                    let idx = c.i4(k, l, p, m);
                    c.ss[idx] = v;
                }
            }
        }
    }
    c
}

/// Itô coefficients at `(Λ, S)`.
pub fn coefficients(lambdas: &[C64], s: &ComplexMatrix) -> Result<Coefficients> {
    Ok(coefficients_in(lambdas, &Frame::new(s)?))
}

/// Sampling limits for random test points.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PointLimits {
    /// Largest admissible `‖S‖₁‖S⁻¹‖₁`.
    pub max_condition: f64,
    pub min_gap: f64,
}

impl Default for PointLimits {
    fn default() -> Self {
        PointLimits {
            max_condition: 1e3,
            min_gap: 1e-3,
        }
    }
}

/// A test point `(Λ, S)` with cached Gram matrices and coefficients.
#[derive(Clone, Debug)]
pub struct SfpPoint {
    pub dec: SpectralDecomposition,
    pub coeffs: Coefficients,
    frame: Frame,
}

impl SfpPoint {
    pub fn new(lambdas: Vec<C64>, s: ComplexMatrix) -> Result<Self> {
        let dec = SpectralDecomposition::from_parts(lambdas, s, Gauge::Decomposition)?;
        let frame = Frame::new(&dec.s)?;
        let coeffs = coefficients_in(&dec.lambdas, &frame);
        Ok(SfpPoint { dec, coeffs, frame })
    }

    /// `S` complex Ginibre, `Λ` uniform in the unit disk, redrawn until within `limits`.
    pub fn sample<R: Rng + ?Sized>(n: usize, limits: PointLimits, rng: &mut R) -> Self {
        loop {
            let s = ginibre(n, 1.0, rng);
            let lambdas: Vec<C64> = (0..n).map(|_| uniform_disk(rng, 1.0)).collect();
            if n > 1 && min_gap(&lambdas) <= limits.min_gap {
                continue;
            }
            let Ok(s_inv) = inverse(&s) else { continue };
            if s.norm_one() * s_inv.norm_one() >= limits.max_condition {
                continue;
            }
            if let Ok(p) = SfpPoint::new(lambdas, s) {
                return p;
            }
        }
    }

    pub fn n(&self) -> usize {
        self.dec.n()
    }

    fn lambdas(&self) -> &[C64] {
        &self.dec.lambdas
    }

    /// `u_i = Σ_{k≠i} 1/(λ_i − λ_k)`, so that `∂_{λ_i} F = 2F u_i` for `F = Π|λ_j − λ_i|⁴`.
    pub fn log_gradient(&self) -> Vec<C64> {
        let l = self.lambdas();
        (0..l.len())
            .map(|i| {
                (0..l.len())
                    .filter(|&k| k != i)
                    .map(|k| ONE / (l[i] - l[k]))
                    .sum()
            })
            .collect()
    }

    /// `Σ_{kl} ∂_{S̄_kl} C^{λS̄}_{ikl}` by the product rule.
    pub fn div_ls(&self) -> Vec<C64> {
        let (n, f, l) = (self.n(), &self.frame, self.lambdas());
        (0..n)
            .map(|i| {
                let mut acc = ZERO;
                for k in 0..n {
                    for ll in 0..n {
                        for m in (0..n).filter(|&m| m != ll) {
                            let den = l[ll].conj() - l[m].conj();
                            let sb = f.s[(k, m)].conj();
                            acc += (kron(m, ll) * f.a[(ll, i)] * f.a_inv[(i, m)]
                                + sb * f.da_dsb(k, ll, ll, i) * f.a_inv[(i, m)]
                                + sb * f.a[(ll, i)] * f.dai_dsb(k, ll, i, m))
                                / den;
                        }
                    }
                }
                acc
            })
            .collect()
    }

    /// `Σ_{kl} ∂_{S_kl} C^{Sλ̄}_{ikl}` by the product rule.
    pub fn div_sl(&self) -> Vec<C64> {
        let (n, f, l) = (self.n(), &self.frame, self.lambdas());
        (0..n)
            .map(|i| {
                let mut acc = ZERO;
                for k in 0..n {
                    for ll in 0..n {
                        for m in (0..n).filter(|&m| m != ll) {
                            let den = l[ll] - l[m];
                            let s = f.s[(k, m)];
                            acc += (kron(m, ll) * f.a[(i, ll)] * f.a_inv[(m, i)]
                                + s * f.da_ds(k, ll, i, ll) * f.a_inv[(m, i)]
                                + s * f.a[(i, ll)] * f.dai_ds(k, ll, m, i))
                                / den;
                        }
                    }
                }
                acc
            })
            .collect()
    }

    /// `Σ_{nm} ∂_{S̄_nm} C^{SS̄}_{klnm}` for every `(k, l)`, index `k·N + l`.
    pub fn div_ss_bar(&self) -> Vec<C64> {
        let (n, f, lam) = (self.n(), &self.frame, self.lambdas());
        let mut out = vec![ZERO; n * n];
        for k in 0..n {
            for l in 0..n {
                let mut acc = ZERO;
                for p in 0..n {
                    for m in 0..n {
                        for al in (0..n).filter(|&a| a != l) {
                            for be in (0..n).filter(|&b| b != m) {
                                let den = (lam[l] - lam[al]) * (lam[m].conj() - lam[be].conj());
                                let sb = f.s[(p, be)].conj();
                                acc += f.s[(k, al)]
                                    * (kron(be, m) * f.a[(m, l)] * f.a_inv[(al, be)]
                                        + sb * f.da_dsb(p, m, m, l) * f.a_inv[(al, be)]
                                        + sb * f.a[(m, l)] * f.dai_dsb(p, m, al, be))
                                    / den;
                            }
                        }
                    }
                }
                out[k * n + l] = acc;
            }
        }
        out
    }

    /// `Σ_{klnm} ∂_{S_kl} ∂_{S̄_nm} C^{SS̄}_{klnm}` by the product rule over
    /// `S_kα · S̄_nβ · A_ml · A⁻¹_αβ`.
    pub fn div2_ss(&self) -> C64 {
        let (n, f, lam) = (self.n(), &self.frame, self.lambdas());
        let mut acc = ZERO;
        for k in 0..n {
            for l in 0..n {
                for p in 0..n {
                    for m in 0..n {
                        for al in (0..n).filter(|&a| a != l) {
                            for be in (0..n).filter(|&b| b != m) {
                                let den = (lam[l] - lam[al]) * (lam[m].conj() - lam[be].conj());
                                let f1 = f.s[(k, al)];
                                let f2 = f.s[(p, be)].conj();
                                let f3 = f.a[(m, l)];
                                let f4 = f.a_inv[(al, be)];
                                let d1 = kron(al, l);
                                let d2 = kron(be, m);
                                let d3s = f.da_ds(k, l, m, l);
                                let d3b = f.da_dsb(p, m, m, l);
                                let d3sb = f.d2a(k, l, p, m, m, l);
                                let d4s = f.dai_ds(k, l, al, be);
                                let d4b = f.dai_dsb(p, m, al, be);
                                let d4sb = f.d2ai(k, l, p, m, al, be);
                                let v = d1 * d2 * f3 * f4
                                    + d1 * f2 * (d3b * f4 + f3 * d4b)
                                    + f1 * d2 * (d3s * f4 + f3 * d4s)
                                    + f1 * f2 * (d3sb * f4 + d3s * d4b + d3b * d4s + f3 * d4sb);
                                acc += v / den;
                            }
                        }
                    }
                }
            }
        }
        acc
    }
}

/// Largest deviation of the closed-form derivatives of `A` and `A⁻¹` with
/// respect to `S_kl`, `S̄_kl` from centred differences, relative to the largest
/// closed-form derivative. The step is `h/‖S⁻¹‖₁`, a fraction `h` of the distance
/// from `S` to the singular matrices (Richardson-extrapolated with half that step when requested).
pub fn check_derivative_ids(point: &SfpPoint, h: f64, richardson: bool) -> Result<f64> {
    let n = point.n();
    let f = &point.frame;
    let base = &point.dec.s;
    let h = h / point.dec.s_inv.norm_one();
    // returns [∂A/∂S, ∂A/∂S̄, ∂A⁻¹/∂S, ∂A⁻¹/∂S̄] as row-major n×n
    let fd = |k: usize, l: usize, h: f64| -> Result<[Vec<C64>; 4]> {
        let eval = |d: C64| -> Result<(ComplexMatrix, ComplexMatrix)> {
            let mut s = base.clone();
            s[(k, l)] += d;
            let fr = Frame::new(&s)?;
            Ok((fr.a, fr.a_inv))
        };
        let (ap, aip) = eval(C64::new(h, 0.0))?;
        let (am, aim) = eval(C64::new(-h, 0.0))?;
        let (bp, bip) = eval(C64::new(0.0, h))?;
        let (bm, bim) = eval(C64::new(0.0, -h))?;
        let wirt = |xp: &ComplexMatrix,
                    xm: &ComplexMatrix,
                    yp: &ComplexMatrix,
                    ym: &ComplexMatrix,
                    sign: f64| {
            (0..n * n)
                .map(|q| {
                    let dx = (xp.as_slice()[q] - xm.as_slice()[q]) / (2.0 * h);
                    let dy = (yp.as_slice()[q] - ym.as_slice()[q]) / (2.0 * h);
                    (dx + C64::new(0.0, sign) * dy) * 0.5
                })
                .collect::<Vec<C64>>()
        };
        Ok([
            wirt(&ap, &am, &bp, &bm, -1.0),
            wirt(&ap, &am, &bp, &bm, 1.0),
            wirt(&aip, &aim, &bip, &bim, -1.0),
            wirt(&aip, &aim, &bip, &bim, 1.0),
        ])
    };
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for k in 0..n {
        for l in 0..n {
            let mut d = fd(k, l, h)?;
            if richardson {
                let fine = fd(k, l, 0.5 * h)?;
                for (c, fv) in d.iter_mut().zip(fine.iter()) {
                    for (x, y) in c.iter_mut().zip(fv) {
                        *x = (*y * 4.0 - *x) / 3.0;
                    }
                }
            }
            for a in 0..n {
                for b in 0..n {
                    let q = a * n + b;
                    let exact = [
                        f.da_ds(k, l, a, b),
                        f.da_dsb(k, l, a, b),
                        f.dai_ds(k, l, a, b),
                        f.dai_dsb(k, l, a, b),
                    ];
                    for (c, e) in d.iter().zip(exact) {
                        worst = worst.max((c[q] - e).norm());
                        scale = scale.max(e.norm());
                    }
                }
            }
        }
    }
    Ok(if scale > 0.0 { worst / scale } else { worst })
}

/// Sum of contributions that must cancel, relative to the largest one.
#[derive(Clone, Debug, PartialEq)]
pub struct Cancellation {
    pub terms: Vec<C64>,
    pub residual: f64,
    pub relative: f64,
}

impl Cancellation {
    fn of(terms: Vec<C64>) -> Self {
        let residual = terms.iter().sum::<C64>().norm();
        let scale = terms.iter().map(|t| t.norm()).fold(0.0, f64::max);
        let relative = if scale > 0.0 { residual / scale } else { 0.0 };
        Cancellation {
            terms,
            residual,
            relative,
        }
    }
}

/// The four `Q`-proportional contributions for `F = Π|λ_j − λ_i|⁴`, divided by `F`:
/// `Σ C^{λλ̄} ∂∂̄F`, `Σ (∂_S̄·C^{λS̄}) ∂F`, `Σ (∂_S·C^{Sλ̄}) ∂̄F`, `Σ ∂_S∂_S̄ C^{SS̄}`.
pub fn check_tq(point: &SfpPoint) -> Cancellation {
    let n = point.n();
    let u = point.log_gradient();
    let c = &point.coeffs;
    let mut t1 = ZERO;
    for i in 0..n {
        for j in 0..n {
            t1 += c.ll[c.i2(i, j)] * u[i] * u[j].conj() * 4.0;
        }
    }
    let t2: C64 = point
        .div_ls()
        .iter()
        .zip(&u)
        .map(|(d, ui)| d * ui * 2.0)
        .sum();
    let t3: C64 = point
        .div_sl()
        .iter()
        .zip(&u)
        .map(|(d, ui)| d * ui.conj() * 2.0)
        .sum();
    let t4 = point.div2_ss();
    Cancellation::of(vec![t1, t2, t3, t4])
}

/// Worst relative cancellation of the two first-derivative bracket identities:
/// `Σ_i C^{λλ̄}_ij ∂_{λ_i}F + F Σ_{kl} ∂_{S_kl}C^{Sλ̄}_{jkl}` for each `j`, and
/// `Σ_i C^{Sλ̄}_{ikl} ∂_{λ̄_i}F + F Σ_{nm} ∂_{S̄_nm}C^{SS̄}_{klnm}` for each `(k, l)`.
pub fn check_tdq(point: &SfpPoint) -> (Cancellation, Cancellation) {
    let n = point.n();
    let u = point.log_gradient();
    let c = &point.coeffs;
    let div_sl = point.div_sl();
    let pairs22: Vec<(C64, C64)> = (0..n)
        .map(|j| {
            (
                (0..n).map(|i| c.ll[c.i2(i, j)] * u[i] * 2.0).sum(),
                div_sl[j],
            )
        })
        .collect();
    let div = point.div_ss_bar();
    let pairs4: Vec<(C64, C64)> = (0..n * n)
        .map(|kl| {
            let (k, l) = (kl / n, kl % n);
            (
                (0..n)
                    .map(|i| c.sl[c.i3(i, k, l)] * u[i].conj() * 2.0)
                    .sum(),
                div[kl],
            )
        })
        .collect();
    let umax = u.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let cmax =
        c.ll.iter()
            .chain(&c.sl)
            .map(|v| v.norm())
            .fold(0.0, f64::max);
    let floor = 2.0 * umax * cmax;
    (worst_pair(&pairs22, floor), worst_pair(&pairs4, floor))
}

/// Cancellation over a family of two-term identities with a common scale
/// bounded below by `floor`.
fn worst_pair(pairs: &[(C64, C64)], floor: f64) -> Cancellation {
    let scale = pairs
        .iter()
        .map(|(a, b)| a.norm().max(b.norm()))
        .fold(floor, f64::max);
    let (worst, at) =
        pairs
            .iter()
            .map(|(a, b)| (a + b).norm())
            .enumerate()
            .fold(
                (0.0, 0),
                |(w, k), (i, r)| if r > w { (r, i) } else { (w, k) },
            );
    let terms = pairs.get(at).map_or(Vec::new(), |&(a, b)| vec![a, b]);
    Cancellation {
        terms,
        residual: worst,
        relative: if scale > 0.0 { worst / scale } else { 0.0 },
    }
}

/// Largest mismatch between the product-rule divergences and centred
/// differences of the coefficient tensors with step `h`.
pub fn check_divergences_fd(point: &SfpPoint, h: f64) -> Result<f64> {
    let n = point.n();
    let lam = point.dec.lambdas.clone();
    let base = point.dec.s.clone();
    let at = |k: usize, l: usize, d: C64| -> Result<Coefficients> {
        let mut s = base.clone();
        s[(k, l)] += d;
        coefficients(&lam, &s)
    };
    let mut div_ls = vec![ZERO; n];
    let mut div_sl = vec![ZERO; n];
    let mut div_ss = vec![ZERO; n * n];
    for k in 0..n {
        for l in 0..n {
            let xp = at(k, l, C64::new(h, 0.0))?;
            let xm = at(k, l, C64::new(-h, 0.0))?;
            let yp = at(k, l, C64::new(0.0, h))?;
            let ym = at(k, l, C64::new(0.0, -h))?;
            let d = |p: C64, m: C64, q: C64, r: C64, sign: f64| {
                ((p - m) + C64::new(0.0, sign) * (q - r)) / (4.0 * h)
            };
            for i in 0..n {
                let t = xp.i3(i, k, l);
                div_ls[i] += d(xp.ls[t], xm.ls[t], yp.ls[t], ym.ls[t], 1.0);
                div_sl[i] += d(xp.sl[t], xm.sl[t], yp.sl[t], ym.sl[t], -1.0);
            }
            for kk in 0..n {
                for ll in 0..n {
                    let t = xp.i4(kk, ll, k, l);
                    div_ss[kk * n + ll] += d(xp.ss[t], xm.ss[t], yp.ss[t], ym.ss[t], 1.0);
                }
            }
        }
    }
    let worst = |a: &[C64], b: &[C64]| {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max)
    };
    Ok(worst(&div_ls, &point.div_ls())
        .max(worst(&div_sl, &point.div_sl()))
        .max(worst(&div_ss, &point.div_ss_bar())))
}

/// One-step covariance comparison in standard-error units.
#[derive(Clone, Debug, PartialEq)]
pub struct CovarianceReport {
    pub draws: usize,
    /// Real and imaginary parts compared.
    pub comparisons: usize,
    pub max_z: f64,
    /// Smallest observed `⟨|Δλ_i|²⟩ / dt`.
    pub min_diag_ratio: f64,
    /// Smallest predicted `O_ii`.
    pub min_diag_predicted: f64,
}

/// Draws `draws` raw increments at rate one, forms the first-order
/// eigen-increments and compares every distinct second moment with the
/// coefficients (moments related by conjugation are counted once).
pub fn check_covariances<R: Rng + ?Sized>(
    point: &SfpPoint,
    draws: usize,
    dt: f64,
    rng: &mut R,
) -> CovarianceReport {
    let n = point.n();
    let c = &point.coeffs;
    let conv = NoiseConvention::raw_diffusion();
    let vars = n + n * n;
    let pairs: Vec<(usize, usize)> = (0..vars)
        .flat_map(|a| (a..vars).map(move |b| (a, b)))
        .collect();
    let mut acc = vec![(Moments::new(), Moments::new()); pairs.len()];
    let mut d = vec![ZERO; vars];
    for _ in 0..draws {
        let dx = raw_increment(n, &conv, dt, rng);
        let (dl, ds) = dyson_deltas(&point.dec, &dx);
        d[..n].copy_from_slice(&dl);
        d[n..].copy_from_slice(ds.as_slice());
        for (m, &(a, b)) in acc.iter_mut().zip(&pairs) {
            let v = d[a] * d[b].conj() / dt;
            m.0.push(v.re);
            m.1.push(v.im);
        }
    }
    let mut max_z: f64 = 0.0;
    let mut comparisons = 0;
    for ((re, im), &(a, b)) in acc.iter().zip(&pairs) {
        let p = c.pair(a, b);
        for (m, target) in [(re, p.re), (im, p.im)] {
            let se = m.stderr();
            if se > 0.0 {
                max_z = max_z.max((m.mean() - target).abs() / se);
                comparisons += 1;
            } else if (m.mean() - target).abs() > 1e-10 * (1.0 + p.norm()) {
                max_z = f64::INFINITY;
            }
        }
    }
    let diag_index = |i: usize| {
        pairs
            .iter()
            .position(|&p| p == (i, i))
            .expect("diagonal pair present")
    };
    let min_diag_ratio = (0..n)
        .map(|i| acc[diag_index(i)].0.mean())
        .fold(f64::INFINITY, f64::min);
    let min_diag_predicted = (0..n)
        .map(|i| c.ll[c.i2(i, i)].re)
        .fold(f64::INFINITY, f64::min);
    CovarianceReport {
        draws,
        comparisons,
        max_z,
        min_diag_ratio,
        min_diag_predicted,
    }
}

/// Residual of the factorized-solution equation at one point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QResidual {
    /// `|∂_tQ − Σ C ∂∂̄Q|` over the larger of `(N²/t + E/t²)·Q` and the largest term.
    pub relative: f64,
    /// Change of the right-hand side between `h` and `h/2` on the same scale.
    pub disagreement: f64,
}

/// Largest admissible Richardson disagreement before the step is rejected.
pub const MAX_STEP_DISAGREEMENT: f64 = 1e-2;

/// `‖S Λ S⁻¹ − X₀‖²_F`.
fn heat_exponent(lambdas: &[C64], s: &ComplexMatrix, x0: &ComplexMatrix) -> Result<f64> {
    let s_inv = inverse(s)?;
    Ok(s.scale_columns(lambdas)
        .matmul(&s_inv)
        .sub(x0)
        .frobenius_sqr())
}

/// Checks `∂_t Q = Σ C ∂∂̄ Q` for `Q_t ∝ t^{−N²} exp(−‖X − X₀‖²/t)` at `N = 2`
/// with second derivatives over the twelve real coordinates of `(Λ, S)`.
pub fn check_q_solution(
    point: &SfpPoint,
    x0: &ComplexMatrix,
    t: f64,
    h: f64,
    richardson: bool,
) -> Result<QResidual> {
    let n = point.n();
    if n != 2 {
        return Err(Error::UnsupportedDimension {
            n,
            reason: "the pointwise solution check is implemented for N = 2",
        });
    }
    if x0.n() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: x0.n(),
        });
    }
    if !(t > 0.0) || !(h > 0.0) {
        return Err(Error::invalid("t", "time and step must be positive"));
    }
    let lam0 = point.dec.lambdas.clone();
    let s0 = point.dec.s.clone();
    let e0 = heat_exponent(&lam0, &s0, x0)?;
    let coords = n + n * n;
    // φ(v) = log Q(v) − log Q(v₀) as a function of 2·coords real offsets
    let phi = |v: &[f64]| -> Result<f64> {
        let lam: Vec<C64> = (0..n)
            .map(|i| lam0[i] + C64::new(v[2 * i], v[2 * i + 1]))
            .collect();
        let mut s = s0.clone();
        for a in 0..n * n {
            s.as_mut_slice()[a] += C64::new(v[2 * (n + a)], v[2 * (n + a) + 1]);
        }
        Ok(-(heat_exponent(&lam, &s, x0)? - e0) / t)
    };
    let real = 2 * coords;
    // (∂∂Q)/Q = ∂∂φ + ∂φ ∂φ from central differences of φ
    let hessian = |h: f64| -> Result<Vec<f64>> {
        let mut hs = vec![0.0; real * real];
        let mut grad = vec![0.0; real];
        let mut v = vec![0.0; real];
        for p in 0..real {
            v[p] = h;
            let fp = phi(&v)?;
            v[p] = -h;
            let fm = phi(&v)?;
            v[p] = 0.0;
            grad[p] = (fp - fm) / (2.0 * h);
            hs[p * real + p] = (fp + fm) / (h * h);
            for r in p + 1..real {
                let mut corner = |a: f64, b: f64| -> Result<f64> {
                    v[p] = a;
                    v[r] = b;
                    let f = phi(&v);
                    v[p] = 0.0;
                    v[r] = 0.0;
                    f
                };
                let mixed = (corner(h, h)? - corner(h, -h)? - corner(-h, h)? + corner(-h, -h)?)
                    / (4.0 * h * h);
                hs[p * real + r] = mixed;
                hs[r * real + p] = mixed;
            }
        }
        for p in 0..real {
            for r in 0..real {
                hs[p * real + r] += grad[p] * grad[r];
            }
        }
        Ok(hs)
    };
    let c = &point.coeffs;
    // returns the sum and the magnitude of its largest terms
    let rhs = |hs: &[f64]| -> (C64, f64) {
        let mut acc = ZERO;
        let mut mag: f64 = 0.0;
        for a in 0..coords {
            for b in 0..coords {
                let (xa, ya, xb, yb) = (2 * a, 2 * a + 1, 2 * b, 2 * b + 1);
                let w = C64::new(
                    hs[xa * real + xb] + hs[ya * real + yb],
                    hs[xa * real + yb] - hs[ya * real + xb],
                ) * 0.25;
                let term = c.pair(a, b) * w;
                acc += term;
                mag = mag.max(term.norm());
            }
        }
        (acc, mag)
    };
    let nn = (n * n) as f64;
    let dq_dt = -nn / t + e0 / (t * t);
    let (coarse, mag) = rhs(&hessian(h)?);
    let (fine, _) = rhs(&hessian(0.5 * h)?);
    let scale = (nn / t + e0 / (t * t)).max(mag);
    let disagreement = (fine - coarse).norm() / scale;
    let value = if richardson {
        if disagreement > MAX_STEP_DISAGREEMENT {
            return Err(Error::StepTooLarge { disagreement });
        }
        (fine * 4.0 - coarse) / 3.0
    } else {
        coarse
    };
    Ok(QResidual {
        relative: (C64::new(dq_dt, 0.0) - value).norm() / scale,
        disagreement,
    })
}
