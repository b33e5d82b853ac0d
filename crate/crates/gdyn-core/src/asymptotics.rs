//! Large-N limit laws for the eigenvector correlator: saddle-point bulk law,
//! Ginibre edge profile and the two-point-source collision profile.

use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)]
use num_traits::Float;

use crate::source::SourceSpec;
use crate::special::{erfc, ln_poisson_pmf};
use crate::C64;

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Smallest root of `−1/τ + (1/N) Σ 1/(A_i − σ) = 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SaddleResult {
    pub sigma_min: f64,
    pub converged: bool,
    pub iterations: usize,
    /// `|g(σ)|·τ` at the returned point.
    pub residual: f64,
}

fn saddle_eq(a: &[(f64, usize)], n: f64, tau: f64, s: f64) -> (f64, f64) {
    let mut g = -1.0 / tau;
    let mut dg = 0.0;
    for &(ai, m) in a {
        let inv = 1.0 / (ai - s);
        g += m as f64 * inv / n;
        dg += m as f64 * inv * inv / n;
    }
    (g, dg)
}

/// Solves for the smallest saddle on `(−∞, min A_i)` by safeguarded Newton
/// iteration inside a sign-changing bracket.
pub fn solve_min_saddle(tau: f64, z: C64, source: &SourceSpec) -> SaddleResult {
    let a = source.squared_distances(z);
    let n = source.n() as f64;
    let min_a = a.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let mut lo = min_a - 2.0 * n * tau;
    let mut hi = min_a - 1e-12 * (1.0 + min_a.abs());
    let (g_hi, _) = saddle_eq(&a, n, tau, hi);
    if g_hi <= 0.0 {
        // root closer to min A than the bracket resolution
        return SaddleResult {
            sigma_min: hi,
            converged: true,
            iterations: 0,
            residual: g_hi.abs() * tau,
        };
    }
    let mut s = 0.5 * (lo + hi);
    let mut iterations = 0;
    let mut converged = false;
    for it in 1..=200 {
        iterations = it;
        let (g, dg) = saddle_eq(&a, n, tau, s);
        if g.abs() * tau < 1e-15 {
            converged = true;
            break;
        }
        if g < 0.0 {
            lo = s;
        } else {
            hi = s;
        }
        let newton = s - g / dg;
        s = if newton > lo && newton < hi && newton.is_finite() {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= 4.0 * f64::EPSILON * (1.0 + s.abs()) {
            converged = true;
            break;
        }
    }
    let (g, _) = saddle_eq(&a, n, tau, s);
    SaddleResult {
        sigma_min: s,
        converged,
        iterations,
        residual: g.abs() * tau,
    }
}

/// Macroscopic correlator `(−σ_min) θ(−σ_min) / (πτ²)` with `θ(0) = 0`.
pub fn macro_o(tau: f64, z: C64, source: &SourceSpec) -> f64 {
    let s = solve_min_saddle(tau, z, source).sigma_min;
    if s < 0.0 {
        -s / (PI * tau * tau)
    } else {
        0.0
    }
}

/// Closed-form macroscopic correlator for the two-point source `±a`.
pub fn macro_spiric(tau: f64, a: C64, z: C64) -> f64 {
    let ap = (a + z).norm_sqr();
    let am = (a - z).norm_sqr();
    let d = ap - am;
    let v = (tau - am - ap + (tau * tau + d * d).sqrt()) / (2.0 * PI * tau * tau);
    if v > 0.0 {
        v
    } else {
        0.0
    }
}

/// Smallest saddle for the two-point source in closed form.
pub fn spiric_saddle(tau: f64, a: C64, z: C64) -> f64 {
    let ap = (a + z).norm_sqr();
    let am = (a - z).norm_sqr();
    let d = ap - am;
    0.5 * (am + ap - tau - (tau * tau + d * d).sqrt())
}

/// Ginibre edge profile of `√N·O` at `|z| = √τ + δ/√N`.
pub fn edge_micro_law(delta: f64, tau: f64) -> f64 {
    let st = tau.sqrt();
    ((-2.0 * delta * delta / tau).exp() * INV_SQRT_2PI
        - delta / st * erfc(2f64.sqrt() * delta / st))
        / (PI * tau)
}

/// Collision profile as a function of the effective time `T` and `|a|²`.
pub fn collision_profile(t_star: f64, a2: f64) -> f64 {
    let a4 = a2 * a2;
    ((-t_star * t_star / (2.0 * a4)).exp() * INV_SQRT_2PI
        + t_star / (2.0 * a2) * erfc(-t_star / (2f64.sqrt() * a2)))
        / (PI * a2)
}

/// Effective time `T = t + ((aη̄ + āη)² − |a|²|η|²)/|a|²`.
pub fn collision_time(eta: C64, t: f64, a: C64) -> f64 {
    let a2 = a.norm_sqr();
    let cross = 2.0 * (a * eta.conj()).re;
    t + (cross * cross - a2 * eta.norm_sqr()) / a2
}

/// `√N·O` near the collision point `z = ηN^{−1/4}`, `τ = |a|² + tN^{−1/2}`.
pub fn collision_micro_law(eta: C64, t: f64, a: C64) -> f64 {
    collision_profile(collision_time(eta, t, a), a.norm_sqr())
}

/// `O_closed·πτ²/(τ − r²) − 1` for the Ginibre closed sum, evaluated from the
/// positive tail `τ/(N(τ − r²)) Σ_{m>N} (m − N) e^{−x}x^m/m!`, `x = N r²/τ`.
///
/// Requires `r² < τ`.
pub fn bulk_relative_deviation(n: usize, tau: f64, r2: f64) -> f64 {
    assert!(r2 < tau, "bulk deviation is defined inside the disk");
    let nf = n as f64;
    let x = nf * r2 / tau;
    if x == 0.0 {
        return 0.0;
    }
    let mut terms: Vec<f64> = Vec::new();
    let mut max = f64::NEG_INFINITY;
    let mut m = n as u64 + 1;
    loop {
        let t = ((m as f64) - nf).ln() + ln_poisson_pmf(m, x);
        terms.push(t);
        max = max.max(t);
        if (m as f64) > x && t < max - 50.0 {
            break;
        }
        m += 1;
    }
    let ln_tail = max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln();
    (ln_tail + (tau / (nf * (tau - r2))).ln()).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::ginibre_closed_sum;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn ginibre_saddle() {
        let src = SourceSpec::null(10);
        for &(tau, r) in &[(1.0, 0.3), (2.0, 1.9), (0.5, 1.0)] {
            let s = solve_min_saddle(tau, c(r, 0.0), &src);
            assert!((s.sigma_min - (r * r - tau)).abs() < 1e-12, "{s:?}");
            assert!(s.converged && s.residual < 1e-12);
        }
        assert!((macro_o(1.0, c(0.0, 0.0), &src) - 1.0 / PI).abs() < 1e-15);
        assert!(macro_o(1.0, c(1.0, 0.0), &src).abs() < 1e-15);
        assert_eq!(macro_o(1.0, c(1.2, 0.3), &src), 0.0);
    }

    #[test]
    fn spiric_saddle_closed_form() {
        let a = c(0.8, 0.3);
        let src = SourceSpec::spiric(8, a).unwrap();
        for &(tau, z) in &[(0.5, c(0.1, 0.2)), (1.0, c(-0.7, 0.4)), (2.0, c(1.5, -1.0))] {
            let s = solve_min_saddle(tau, z, &src);
            assert!((s.sigma_min - spiric_saddle(tau, a, z)).abs() < 1e-10);
            assert!((macro_o(tau, z, &src) - macro_spiric(tau, a, z)).abs() < 1e-10);
        }
    }

    #[test]
    fn spiric_origin_value() {
        let a = c(0.6, 0.0);
        let tau = 0.8;
        let expected = (tau - 0.36) / (PI * tau * tau);
        assert!((macro_spiric(tau, a, c(0.0, 0.0)) - expected).abs() < 1e-15);
        assert!(
            (macro_spiric(tau, c(0.0, 0.0), c(0.3, 0.1)) - (tau - 0.1) / (PI * tau * tau)).abs()
                < 1e-15
        );
    }

    #[test]
    fn small_tau_saddle_hugs_source() {
        let src = SourceSpec::from_values(&[c(0.5, 0.0), c(-0.3, 0.4), c(0.0, -0.9)]).unwrap();
        let z = c(0.1, 0.1);
        let min_a = src
            .squared_distances(z)
            .iter()
            .map(|p| p.0)
            .fold(f64::INFINITY, f64::min);
        for &tau in &[1e-2, 1e-3, 1e-4] {
            let s = solve_min_saddle(tau, z, &src).sigma_min;
            // leading order: σ ≈ min A − τ/N
            assert!(
                ((min_a - s) - tau / 3.0).abs() < 5.0 * tau * tau,
                "{tau}: {}",
                min_a - s
            );
        }
    }

    #[test]
    fn edge_law_limits() {
        let tau = 1.3;
        assert!((edge_micro_law(0.0, tau) - INV_SQRT_2PI / (PI * tau)).abs() < 1e-16);
        assert!(edge_micro_law(8.0, tau).abs() < 1e-20);
        let d = -6.0;
        let slope = -2.0 * d / (PI * tau.powf(1.5));
        assert!((edge_micro_law(d, tau) - slope).abs() < 1e-12);
    }

    #[test]
    fn collision_equals_edge_under_substitution() {
        for &tau in &[0.5, 1.0, 2.7] {
            for k in -30..=30 {
                let d = k as f64 * 0.1;
                let lhs = collision_profile(-2.0 * d * tau.sqrt(), tau);
                let rhs = edge_micro_law(d, tau);
                assert!((lhs - rhs).abs() < 1e-12);
            }
        }
        assert!((collision_profile(0.0, 2.0) - INV_SQRT_2PI / (2.0 * PI)).abs() < 1e-16);
        assert!(collision_profile(-40.0, 1.0) < 1e-100);
    }

    #[test]
    fn bulk_deviation_matches_direct_formula_where_resolvable() {
        for &(n, r2) in &[(10usize, 0.49), (20, 0.49), (30, 0.25)] {
            let direct = ginibre_closed_sum(n, 1.0, r2) * PI / (1.0 - r2) - 1.0;
            let dev = bulk_relative_deviation(n, 1.0, r2);
            assert!((dev - direct).abs() < 1e-13, "{n}: {dev} vs {direct}");
        }
        assert_eq!(bulk_relative_deviation(400, 1.0, 0.0), 0.0);
    }
}
