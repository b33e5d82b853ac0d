//! Log-space factorials, Poisson weights, the integer-order upper incomplete gamma
//! function and the complementary error function.

use core::f64::consts::PI;

#[allow(unused_imports)]
use num_traits::Float;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// `ln Γ(n+1) − [(n+½) ln n − n + ½ ln 2π]` for `n ≥ 1`.
pub fn stirling_error(n: u64) -> f64 {
    let nf = n as f64;
    if n <= 15 {
        let ln_fact: f64 = (2..=n).map(|k| (k as f64).ln()).sum();
        return ln_fact - (nf + 0.5) * nf.ln() + nf - LN_SQRT_2PI;
    }
    const S0: f64 = 1.0 / 12.0;
    const S1: f64 = 1.0 / 360.0;
    const S2: f64 = 1.0 / 1260.0;
    const S3: f64 = 1.0 / 1680.0;
    const S4: f64 = 1.0 / 1188.0;
    let nn = nf * nf;
    (S0 - (S1 - (S2 - (S3 - S4 / nn) / nn) / nn) / nn) / nf
}

/// `ln n!`.
pub fn ln_factorial(n: u64) -> f64 {
    if n < 2 {
        return 0.0;
    }
    let nf = n as f64;
    stirling_error(n) + (nf + 0.5) * nf.ln() - nf + LN_SQRT_2PI
}

/// Deviance `x ln(x/μ) + μ − x`, accurate when `x ≈ μ`.
fn deviance(x: f64, mu: f64) -> f64 {
    if (x - mu).abs() < 0.1 * (x + mu) {
        let v = (x - mu) / (x + mu);
        let v2 = v * v;
        let mut s = (x - mu) * v;
        let mut ej = 2.0 * x * v;
        for j in 1..1000 {
            ej *= v2;
            let s1 = s + ej / (2 * j + 1) as f64;
            if s1 == s {
                return s;
            }
            s = s1;
        }
        s
    } else {
        x * (x / mu).ln() + mu - x
    }
}

/// `ln(e^{−μ} μ^m / m!)`, accurate to a few ulps of the result scale.
pub fn ln_poisson_pmf(m: u64, mu: f64) -> f64 {
    if mu == 0.0 {
        return if m == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    if m == 0 {
        return -mu;
    }
    let mf = m as f64;
    -stirling_error(m) - deviance(mf, mu) - 0.5 * (2.0 * PI * mf).ln()
}

/// Positive real stored as `mantissa · e^{ln_scale}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogScaled {
    pub ln_scale: f64,
    pub mantissa: f64,
}

impl LogScaled {
    pub fn ln(&self) -> f64 {
        self.ln_scale + self.mantissa.ln()
    }

    /// Plain value; overflows to infinity or underflows to zero when unrepresentable.
    pub fn value(&self) -> f64 {
        self.mantissa * self.ln_scale.exp()
    }
}

/// Upper incomplete gamma `Γ(k, x) = (k−1)! e^{−x} Σ_{m<k} x^m/m!` for integer `k ≥ 1`.
pub fn upper_gamma_int(k: u64, x: f64) -> LogScaled {
    assert!(k >= 1, "upper_gamma_int needs k >= 1");
    assert!(x >= 0.0, "upper_gamma_int needs x >= 0");
    let top = if x >= (k - 1) as f64 {
        k - 1
    } else {
        x.floor() as u64
    };
    let peak = ln_poisson_pmf(top, x);
    let mut mantissa = 0.0;
    for m in (0..k).rev() {
        let t = (ln_poisson_pmf(m, x) - peak).exp();
        mantissa += t;
        if m < top && t < 1e-18 * mantissa {
            break;
        }
    }
    LogScaled {
        ln_scale: ln_factorial(k - 1) + peak,
        mantissa,
    }
}

/// `ln Σ_{m ∈ range} w_m`, given `ln w_m`; robust to overflow.
pub(crate) fn log_sum_exp(terms: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = terms.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + terms.map(|t| (t - max).exp()).sum::<f64>().ln()
}

/// Complementary error function (libm).
#[inline]
pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close_ln(k: u64, x: f64, expected_ln: f64) {
        let got = upper_gamma_int(k, x).ln();
        let err = (got - expected_ln).abs() / expected_ln.abs().max(1.0);
        assert!(
            err < 1e-13,
            "k={k} x={x}: {got} vs {expected_ln} (err {err:e})"
        );
    }

    #[test]
    fn gamma_trivial_cases() {
        for &x in &[0.0, 0.3, 2.0, 17.5] {
            let g = upper_gamma_int(1, x).value();
            assert!((g - (-x).exp()).abs() <= 1e-15 * (-x).exp());
        }
        assert_eq!(upper_gamma_int(1, 0.0).value(), 1.0);
        assert!((upper_gamma_int(7, 0.0).value() - 720.0).abs() < 1e-12 * 720.0);
    }

    #[test]
    #[allow(clippy::excessive_precision)]
    fn gamma_against_high_precision() {
        close_ln(1, 0.5, -0.5);
        close_ln(3, 2.0, 0.302585092994045684018);
        close_ln(10, 3.7, 12.79696735137697400537);
        close_ln(50, 40.0, 144.4928129018606608668);
        close_ln(200, 250.0, 850.2965446944959355943);
        close_ln(1000, 900.0, 5905.219873155663797481);
        close_ln(2000, 2500.0, 13141.86763369146232368);
        close_ln(2000, 10.0, 13198.92344805426467395);
        let v = upper_gamma_int(10, 3.7).value();
        assert!((v / 361120.6353282236598055 - 1.0).abs() < 1e-13);
        let v = upper_gamma_int(50, 40.0).value();
        assert!((v / 5.654983185797163336968e62 - 1.0).abs() < 1e-13);
    }

    #[test]
    fn gamma_three_two_matches_quadrature() {
        // ∫₂^∞ t² e^{−t} dt by adaptive Gauss–Kronrod on a truncated range
        let q = crate::quadrature::adaptive_gauss_kronrod(
            |t| t * t * (-t).exp(),
            2.0,
            80.0,
            1e-14,
            1e-14,
        )
        .unwrap()
        .value;
        let g = upper_gamma_int(3, 2.0).value();
        assert!((g - q).abs() < 1e-12, "{g} vs {q}");
        assert!((g - 10.0 * (-2.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn factorials() {
        assert_eq!(ln_factorial(0), 0.0);
        assert!((ln_factorial(5) - 120f64.ln()).abs() < 1e-14);
        assert!((ln_factorial(20) - 2432902008176640000f64.ln()).abs() < 1e-13);
        let direct: f64 = (2..=100).map(|k| (k as f64).ln()).sum();
        assert!((ln_factorial(100) - direct).abs() < 1e-11);
    }

    #[test]
    fn poisson_weights_sum_to_one() {
        for &mu in &[0.5, 7.0, 120.0] {
            let s: f64 = (0..2000).map(|m| ln_poisson_pmf(m, mu).exp()).sum();
            assert!((s - 1.0).abs() < 1e-13, "{mu}: {s}");
        }
    }

    #[test]
    #[allow(clippy::excessive_precision)]
    fn erfc_values() {
        assert_eq!(erfc(0.0), 1.0);
        assert!((erfc(1.0) - 0.157_299_207_050_285_13).abs() < 1e-16);
        assert!((erfc(-1.0) - 1.842_700_792_949_714_9).abs() < 1e-15);
    }
}
