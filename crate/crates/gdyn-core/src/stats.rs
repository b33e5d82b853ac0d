//! Running moments and goodness-of-fit helpers.

use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)]
use num_traits::Float;

/// Welford running mean and variance.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Moments {
    count: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (x - self.mean);
    }

    /// Combines two accumulators (Chan et al. pairwise update).
    pub fn merge(&mut self, other: &Moments) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let n = (self.count + other.count) as f64;
        let d = other.mean - self.mean;
        self.mean += d * other.count as f64 / n;
        self.m2 += other.m2 + d * d * self.count as f64 * other.count as f64 / n;
        self.count += other.count;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance; zero for fewer than two samples.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    /// Standard error of the mean.
    pub fn stderr(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            (self.variance() / self.count as f64).sqrt()
        }
    }
}

impl FromIterator<f64> for Moments {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut m = Moments::new();
        for x in iter {
            m.push(x);
        }
        m
    }
}

/// Kolmogorov–Smirnov distance between the empirical CDF of `samples` and `cdf`.
pub fn ks_statistic<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> f64 {
    let mut sorted: Vec<f64> = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// CDF of the semicircle law on `[−radius, radius]`.
pub fn semicircle_cdf(x: f64, radius: f64) -> f64 {
    let u = (x / radius).clamp(-1.0, 1.0);
    0.5 + (u * (1.0 - u * u).sqrt() + u.asin()) / PI
}

/// CDF of `|λ|` for the uniform law on the disk of the given radius.
pub fn circular_law_modulus_cdf(r: f64, radius: f64) -> f64 {
    let u = (r / radius).clamp(0.0, 1.0);
    u * u
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moments_match_direct_formulas() {
        let xs = [1.0, 2.0, 4.0, 7.0, 11.0];
        let m: Moments = xs.iter().copied().collect();
        assert_eq!(m.mean(), 5.0);
        assert!((m.variance() - 16.5).abs() < 1e-12);
        let mut a: Moments = xs[..2].iter().copied().collect();
        let b: Moments = xs[2..].iter().copied().collect();
        a.merge(&b);
        assert!((a.mean() - 5.0).abs() < 1e-15 && (a.variance() - 16.5).abs() < 1e-12);
        assert_eq!(Moments::new().stderr(), 0.0);
    }

    #[test]
    fn semicircle_endpoints() {
        assert_eq!(semicircle_cdf(-1.0, 1.0), 0.0);
        assert!((semicircle_cdf(1.0, 1.0) - 1.0).abs() < 1e-15);
        assert!((semicircle_cdf(0.0, 2.0) - 0.5).abs() < 1e-15);
        assert_eq!(semicircle_cdf(3.0, 1.0), 1.0);
    }

    #[test]
    fn ks_of_exact_quantiles_is_half_step() {
        let n = 100;
        let xs: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        let d = ks_statistic(&xs, |x| x.clamp(0.0, 1.0));
        assert!((d - 0.5 / n as f64).abs() < 1e-12);
    }
}
