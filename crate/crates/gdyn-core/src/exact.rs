//! Exact finite-N eigenvalue density and eigenvector correlator for diagonal
//! initial conditions, in contour-integral and closed-sum representations.
//!
//! Throughout, `A_i = |a_i − z|²` are the squared distances from the evaluation
//! point to the source values and `τ = N t` is the rescaled time.

use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
pub use crate::grid::Window;
use crate::quadrature::{
    adaptive_gauss_kronrod_try, circle_integral, gauss_legendre_doubling, min_modulus_radius,
    ContourSpec, ContourValue,
};
use crate::source::SourceSpec;
use crate::special::{ln_poisson_pmf, log_sum_exp};
use crate::C64;

/// Tolerances for the exact evaluators.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExactOptions {
    /// Relative agreement required between successive circle node doublings.
    pub contour_tol: f64,
    /// Agreement required between successive Gauss–Legendre doublings in β.
    pub tol_quad: f64,
    /// Minimal admissible `|a_i − z|²`, in units of τ.
    pub pole_floor: f64,
    /// Finite-difference step for the density Laplacian; `None` picks `0.05·√(τ/N)`.
    pub fd_step: Option<f64>,
    /// β-doubling tolerance for the density, whose integrand carries finite-difference rounding.
    pub density_tol: f64,
}

impl Default for ExactOptions {
    fn default() -> Self {
        ExactOptions {
            contour_tol: 1e-13,
            tol_quad: 1e-11,
            pole_floor: 1e-6,
            fd_step: None,
            density_tol: 1e-8,
        }
    }
}

/// A value together with the quadrature effort that produced it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Evaluation {
    pub value: f64,
    pub outer_nodes: usize,
    pub max_contour_nodes: usize,
}

struct Poles {
    /// `(A_i, multiplicity)`.
    a: Vec<(f64, usize)>,
    lo: f64,
    hi: f64,
    n: usize,
}

fn poles(n: usize, tau: f64, z: C64, source: &SourceSpec, opts: &ExactOptions) -> Result<Poles> {
    if source.n() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: source.n(),
        });
    }
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::invalid("tau", "must be positive and finite"));
    }
    if !(z.re.is_finite() && z.im.is_finite()) {
        return Err(Error::NonFinite);
    }
    let a = source.squared_distances(z);
    let lo = a.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let hi = a.iter().map(|p| p.0).fold(0.0, f64::max);
    if lo < opts.pole_floor * tau {
        return Err(Error::PoleCollision { distance2: lo });
    }
    Ok(Poles { a, lo, hi, n })
}

/// Circle around all `A_i` placed at the sampled minimum of the integrand.
fn pole_circle<L: FnMut(C64) -> f64>(p: &Poles, tau: f64, log_mag: L) -> (C64, f64) {
    let center = 0.5 * (p.lo + p.hi);
    let half = 0.5 * (p.hi - p.lo);
    let scale = p.hi + tau / p.n as f64;
    let r_lo = (half / 0.9).max(1e-6 * scale);
    let r_hi = r_lo.max(20.0 * (p.hi + tau));
    let r = min_modulus_radius(log_mag, C64::new(center, 0.0), r_lo, r_hi);
    (C64::new(center, 0.0), r)
}

/// `Π(1 + x_i)^{m_i} − 1` with `x_i = −βv/(v − A_i)`, free of cancellation for small `x`.
fn product_minus_one(p: &Poles, beta: f64, v: C64) -> (C64, f64) {
    let mut q = C64::new(0.0, 0.0);
    let mut ln_abs = 0.0;
    for &(a, m) in &p.a {
        let x = -v * beta / (v - a);
        ln_abs += m as f64 * (C64::new(1.0, 0.0) + x).norm().ln();
        for _ in 0..m {
            q += x * (C64::new(1.0, 0.0) + q);
        }
    }
    (q, ln_abs)
}

/// `Π(1 + x_i) − 1 − Σ x_i` (second and higher elementary symmetric parts).
fn product_beyond_linear(p: &Poles, beta: f64, v: C64) -> (C64, f64) {
    let mut e1 = C64::new(0.0, 0.0);
    let mut d = C64::new(0.0, 0.0);
    let mut ln_abs = 0.0;
    for &(a, m) in &p.a {
        let x = -v * beta / (v - a);
        ln_abs += m as f64 * (C64::new(1.0, 0.0) + x).norm().ln();
        for _ in 0..m {
            d += x * (e1 + d);
            e1 += x;
        }
    }
    (d, ln_abs)
}

/// `∮ e^{−βNv/τ} [Π(1 + x_i) − 1] / β  dv/2πi` around all `A_i`.
fn beta_form_inner(p: &Poles, tau: f64, beta: f64, opts: &ExactOptions) -> Result<ContourValue> {
    let k = beta * p.n as f64 / tau;
    let (center, r) = pole_circle(p, tau, |v| {
        let (_, ln_abs) = product_minus_one(p, beta, v);
        -k * v.re + ln_abs.max(0.0)
    });
    circle_integral(
        |v| {
            let (q, _) = product_minus_one(p, beta, v);
            (-v * k).exp() * q / beta
        },
        center,
        r,
        opts.contour_tol,
    )
}

/// Eigenvector correlator `O(z)` from the β-integral/contour representation.
pub fn correlator_beta_form(n: usize, tau: f64, z: C64, source: &SourceSpec) -> Result<f64> {
    correlator_beta_form_with(n, tau, z, source, &ExactOptions::default()).map(|e| e.value)
}

pub fn correlator_beta_form_with(
    n: usize,
    tau: f64,
    z: C64,
    source: &SourceSpec,
    opts: &ExactOptions,
) -> Result<Evaluation> {
    let p = poles(n, tau, z, source, opts)?;
    let mut max_nodes = 0;
    let (integral, outer) = gauss_legendre_doubling(
        |beta| {
            let c = beta_form_inner(&p, tau, beta, opts)?;
            max_nodes = max_nodes.max(c.contour.nodes);
            Ok(c.value.re)
        },
        0.0,
        1.0,
        16,
        1024,
        opts.tol_quad,
    )?;
    let value = integral / (PI * tau * tau) + 1.0 / (PI * tau);
    Ok(Evaluation {
        value,
        outer_nodes: outer,
        max_contour_nodes: max_nodes,
    })
}

/// `∮ e^{−βNv/τ} [Π(1 + x_i) − 1 − Σx_i] / (β² v)  dv/2πi`, the part of the density
/// kernel whose β-integral converges.
fn density_kernel(p: &Poles, tau: f64, beta: f64, opts: &ExactOptions) -> Result<ContourValue> {
    let k = beta * p.n as f64 / tau;
    let (center, r) = pole_circle(p, tau, |v| {
        let (_, ln_abs) = product_beyond_linear(p, beta, v);
        -k * v.re + ln_abs.max(0.0)
    });
    circle_integral(
        |v| {
            if v.norm() < f64::MIN_POSITIVE {
                return C64::new(0.0, 0.0);
            }
            let (d, _) = product_beyond_linear(p, beta, v);
            (-v * k).exp() * d / (v * beta * beta)
        },
        center,
        r,
        opts.contour_tol,
    )
}

/// Normalized eigenvalue density `ρ(z)` for the diagonal source.
pub fn density_source(n: usize, tau: f64, z: C64, source: &SourceSpec) -> Result<f64> {
    density_source_with(n, tau, z, source, &ExactOptions::default()).map(|e| e.value)
}

pub fn density_source_with(
    n: usize,
    tau: f64,
    z: C64,
    source: &SourceSpec,
    opts: &ExactOptions,
) -> Result<Evaluation> {
    let centre = poles(n, tau, z, source, opts)?;
    let h = opts.fd_step.unwrap_or(0.05 * (tau / n as f64).sqrt());
    let offsets = [
        C64::new(h, 0.0),
        C64::new(-h, 0.0),
        C64::new(0.0, h),
        C64::new(0.0, -h),
        C64::new(0.5 * h, 0.0),
        C64::new(-0.5 * h, 0.0),
        C64::new(0.0, 0.5 * h),
        C64::new(0.0, -0.5 * h),
    ];
    let relaxed = ExactOptions {
        pole_floor: 0.0,
        ..*opts
    };
    let mut stencil = Vec::with_capacity(9);
    stencil.push(centre);
    for off in offsets {
        stencil.push(poles(n, tau, z + off, source, &relaxed)?);
    }
    let mut max_nodes = 0;
    let (integral, outer) = gauss_legendre_doubling(
        |beta| {
            let mut g = [0.0; 9];
            for (gi, p) in g.iter_mut().zip(&stencil) {
                let c = density_kernel(p, tau, beta, opts)?;
                max_nodes = max_nodes.max(c.contour.nodes);
                *gi = c.value.re;
            }
            // ∂_{zz̄} = ¼ Δ; Richardson between steps h and h/2
            let coarse = (g[1] + g[2] + g[3] + g[4] - 4.0 * g[0]) / (4.0 * h * h);
            let fine = (g[5] + g[6] + g[7] + g[8] - 4.0 * g[0]) / (h * h);
            Ok((4.0 * fine - coarse) / 3.0)
        },
        0.0,
        1.0,
        16,
        1024,
        opts.density_tol,
    )?;
    let nf = n as f64;
    let singular: f64 = stencil[0]
        .a
        .iter()
        .map(|&(a, m)| m as f64 * (-nf * a / tau).exp())
        .sum();
    let value = integral / (PI * nf) + singular / (PI * tau);
    Ok(Evaluation {
        value,
        outer_nodes: outer,
        max_contour_nodes: max_nodes,
    })
}

/// `ln` of the u-envelope `e^{−Nu/τ} Π(A_i + u)^{m_i}`.
fn u_envelope(p: &Poles, tau: f64, u: f64) -> f64 {
    -(p.n as f64) * u / tau
        + p.a
            .iter()
            .map(|&(a, m)| m as f64 * (a + u).ln())
            .sum::<f64>()
}

/// `∮ e^{−N(σ+u)/τ}/(σ+u) Π((A_i+u)/(A_i−σ))^{m_i} dσ/2πi` around the `A_i` only.
fn double_contour_inner(p: &Poles, tau: f64, u: f64, opts: &ExactOptions) -> Result<(f64, usize)> {
    let nf = p.n as f64;
    let exponent = |s: C64| -> C64 {
        let mut w = -(s + u) * (nf / tau);
        for &(a, m) in &p.a {
            w += ((a + u).ln() - (C64::new(a, 0.0) - s).ln()) * m as f64;
        }
        w
    };
    let half = 0.5 * (p.hi - p.lo);
    let c = 0.5 * (p.lo + p.hi);
    // Circle around the A_i alone when the pole at −u can be kept outside with
    // clearance; otherwise enclose −u too and remove its unit residue.
    let (center, lo_r, hi_r, residue) = if 1.1 * (half / 0.9) <= c + u {
        let hi_r = (c + u) / 1.1;
        let lo_r = if half > 0.0 { half / 0.9 } else { 1e-6 * hi_r };
        (c, lo_r, hi_r, 0.0)
    } else {
        let cb = 0.5 * (p.hi - u);
        let rb = (0.5 * (p.hi + u) / 0.9).max(1e-12 * tau);
        (cb, rb, rb.max(20.0 * (p.hi + u + tau)), 1.0)
    };
    let center = C64::new(center, 0.0);
    let r = min_modulus_radius(|s| exponent(s).re - (s + u).norm().ln(), center, lo_r, hi_r);
    let spec = ContourSpec {
        center,
        radius: r,
        nodes: 64,
    };
    let shift = (0..64)
        .map(|k| exponent(spec.node(k, 64)).re)
        .filter(|m| m.is_finite())
        .fold(f64::NEG_INFINITY, f64::max);
    let shift = if shift.is_finite() { shift } else { 0.0 };
    let cv = circle_integral(
        |s| (exponent(s) - shift).exp() / (s + u),
        center,
        r,
        opts.contour_tol,
    )?;
    Ok((cv.value.re * shift.exp() - residue, cv.contour.nodes))
}

/// Eigenvector correlator from the `u`/σ double-integral representation.
pub fn correlator_double_contour(n: usize, tau: f64, z: C64, source: &SourceSpec) -> Result<f64> {
    correlator_double_contour_with(n, tau, z, source, &ExactOptions::default()).map(|e| e.value)
}

pub fn correlator_double_contour_with(
    n: usize,
    tau: f64,
    z: C64,
    source: &SourceSpec,
    opts: &ExactOptions,
) -> Result<Evaluation> {
    let p = poles(n, tau, z, source, opts)?;
    let nf = n as f64;
    // the envelope peaks below u = τ and decays at rate ≥ N/τ − Σ m/(A+u) afterwards
    let peak = u_envelope(&p, tau, 0.0).max(u_envelope(&p, tau, tau));
    let mut upper = tau;
    while u_envelope(&p, tau, upper) - peak > -60.0 {
        upper += tau / nf.sqrt().max(1.0);
        if upper > 1e4 * tau {
            return Err(Error::TruncationError {
                tail: u_envelope(&p, tau, upper).exp(),
            });
        }
    }
    let mut max_nodes = 0;
    let mut evaluate = |u: f64| -> Result<f64> {
        let (j, nodes) = double_contour_inner(&p, tau, u, opts)?;
        max_nodes = max_nodes.max(nodes);
        Ok(j)
    };
    let scale = 1e-12 * tau;
    let integral = adaptive_gauss_kronrod_try(&mut evaluate, 0.0, upper, scale, 1e-12)?;
    let rate = nf / tau
        - p.a
            .iter()
            .map(|&(a, m)| m as f64 / (a + upper))
            .sum::<f64>();
    let tail = evaluate(upper)?.abs() / rate.max(1e-300);
    if tail > 1e-9 * tau {
        return Err(Error::TruncationError { tail });
    }
    let value = -integral.value / (PI * tau * tau);
    Ok(Evaluation {
        value,
        outer_nodes: integral.evaluations,
        max_contour_nodes: max_nodes,
    })
}

/// Ginibre correlator `(1/(πτN)) e^{−x} Σ_{m<N} (N−m) x^m/m!` with `x = N r²/τ`.
pub fn ginibre_closed_sum(n: usize, tau: f64, r2: f64) -> f64 {
    let nf = n as f64;
    let x = nf * r2 / tau;
    let terms = (0..n as u64).map(|m| (nf - m as f64).ln() + ln_poisson_pmf(m, x));
    log_sum_exp(terms).exp() / (PI * tau * nf)
}

/// Ginibre density `(1/(πτ)) e^{−x} Σ_{m<N} x^m/m!` with `x = N r²/τ`.
pub fn ginibre_density_closed(n: usize, tau: f64, r2: f64) -> f64 {
    let x = n as f64 * r2 / tau;
    let terms = (0..n as u64).map(|m| ln_poisson_pmf(m, x));
    log_sum_exp(terms).exp() / (PI * tau)
}

/// Whether `z` lies inside the support for the two-point source `±a`:
/// `(τ/2)(A₊ + A₋) ≥ A₊A₋` with `A± = |a ± z|²`.
pub fn spiric_boundary(tau: f64, a: C64, z: C64) -> bool {
    let ap = (a + z).norm_sqr();
    let am = (a - z).norm_sqr();
    0.5 * tau * (ap + am) >= ap * am
}

/// Number of 4-connected components of the spiric inside-region on an
/// `nx × ny` cell-centred grid.
pub fn spiric_components(tau: f64, a: C64, window: Window, nx: usize, ny: usize) -> usize {
    let dx = (window.re_max - window.re_min) / nx as f64;
    let dy = (window.im_max - window.im_min) / ny as f64;
    let mask: Vec<bool> = (0..nx * ny)
        .map(|k| {
            let (ix, iy) = (k % nx, k / nx);
            let z = C64::new(
                window.re_min + (ix as f64 + 0.5) * dx,
                window.im_min + (iy as f64 + 0.5) * dy,
            );
            spiric_boundary(tau, a, z)
        })
        .collect();
    count_components(&mask, nx, ny)
}

/// 4-connected component count of a row-major boolean mask.
pub fn count_components(mask: &[bool], nx: usize, ny: usize) -> usize {
    let mut seen = alloc::vec![false; mask.len()];
    let mut stack = Vec::new();
    let mut count = 0;
    for start in 0..mask.len() {
        if !mask[start] || seen[start] {
            continue;
        }
        count += 1;
        seen[start] = true;
        stack.push(start);
        while let Some(k) = stack.pop() {
            let (ix, iy) = (k % nx, k / nx);
            let mut visit = |j: usize| {
                if mask[j] && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            };
            if ix > 0 {
                visit(k - 1);
            }
            if ix + 1 < nx {
                visit(k + 1);
            }
            if iy > 0 {
                visit(k - nx);
            }
            if iy + 1 < ny {
                visit(k + nx);
            }
        }
    }
    count
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn closed_sum_examples() {
        assert!((ginibre_closed_sum(7, 2.0, 0.0) - 1.0 / (PI * 2.0)).abs() < 1e-15);
        assert!(
            (ginibre_closed_sum(1, 1.5, 0.7) - (-0.7f64 / 1.5).exp() / (PI * 1.5)).abs() < 1e-15
        );
        // two-term sum: (1/2π) e^{−2} (2 + 2) = 2e^{−2}/π
        let v = ginibre_closed_sum(2, 1.0, 1.0);
        assert!((v - 2.0 * (-2.0f64).exp() / PI).abs() < 1e-15);
        assert!((v - 0.08615).abs() < 1e-5);
        let big = ginibre_closed_sum(5000, 1.0, 0.25);
        assert!((big * PI / 0.75 - 1.0).abs() < 1e-6);
    }

    #[test]
    fn one_by_one_oracles() {
        let src = SourceSpec::null(1);
        for &(tau, z) in &[(1.0, c(0.3, 0.1)), (0.5, c(-0.2, 0.9))] {
            let exact = (-z.norm_sqr() / tau).exp() / (PI * tau);
            let o = correlator_beta_form(1, tau, z, &src).unwrap();
            assert!((o - exact).abs() < 1e-12, "{o} vs {exact}");
            let d = density_source(1, tau, z, &src).unwrap();
            assert!((d - exact).abs() < 1e-12, "{d} vs {exact}");
            let dc = correlator_double_contour(1, tau, z, &src).unwrap();
            assert!((dc - exact).abs() < 1e-10, "{dc} vs {exact}");
        }
    }

    #[test]
    fn beta_form_matches_closed_sum() {
        for n in [2usize, 5, 10] {
            let src = SourceSpec::null(n);
            for &r in &[0.1, 0.6, 1.1] {
                let z = c(r * 0.6, r * 0.8);
                let a = correlator_beta_form(n, 1.3, z, &src).unwrap();
                let b = ginibre_closed_sum(n, 1.3, r * r);
                assert!((a - b).abs() < 1e-10, "n={n} r={r}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn pole_collision_rejected() {
        let src = SourceSpec::null(3);
        assert!(matches!(
            correlator_beta_form(3, 1.0, c(0.0, 0.0), &src),
            Err(Error::PoleCollision { .. })
        ));
        assert!(matches!(
            density_source(3, 1.0, c(1e-4, 0.0), &src),
            Err(Error::PoleCollision { .. })
        ));
    }

    #[test]
    fn spiric_inside_outside() {
        let a = c(1.0, 0.0);
        assert!(spiric_boundary(0.3, a, a));
        assert!(!spiric_boundary(0.9, a, c(0.0, 0.0)));
        assert!(spiric_boundary(1.1, a, c(0.0, 0.0)));
        assert!(!spiric_boundary(5.0, a, c(100.0, 3.0)));
        let w = Window::square(2.5);
        assert_eq!(spiric_components(0.9, a, w, 200, 200), 2);
        assert_eq!(spiric_components(1.1, a, w, 200, 200), 1);
    }
}
