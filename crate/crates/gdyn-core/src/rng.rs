//! Seeded random streams and Gaussian helpers.

#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg::ComplexMatrix;
use crate::C64;

pub type StreamRng = ChaCha8Rng;

/// Generator for independent unit `stream` under a master seed.
pub fn stream_rng(master_seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(stream);
    rng
}

/// Circular complex Gaussian with `E|z|² = variance`.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> C64 {
    let sd = (0.5 * variance).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(sd * re, sd * im)
}

/// Matrix of independent circular Gaussian entries with `E|x_ij|² = variance`.
pub fn ginibre<R: Rng + ?Sized>(n: usize, variance: f64, rng: &mut R) -> ComplexMatrix {
    ComplexMatrix::from_fn(n, |_, _| complex_normal(rng, variance))
}

/// Uniform point in the disk of the given radius.
pub fn uniform_disk<R: Rng + ?Sized>(rng: &mut R, radius: f64) -> C64 {
    let r = radius * rng.gen::<f64>().sqrt();
    let phi = 2.0 * core::f64::consts::PI * rng.gen::<f64>();
    C64::new(r * phi.cos(), r * phi.sin())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_distinct_and_reproducible() {
        let a: u64 = stream_rng(7, 0).gen();
        let b: u64 = stream_rng(7, 1).gen();
        let a2: u64 = stream_rng(7, 0).gen();
        assert_ne!(a, b);
        assert_eq!(a, a2);
    }

    #[test]
    fn complex_normal_variance() {
        let mut rng = stream_rng(1, 0);
        let n = 200_000;
        let (mut s, mut sre) = (0.0, 0.0);
        for _ in 0..n {
            let z = complex_normal(&mut rng, 2.0);
            s += z.norm_sqr();
            sre += z.re * z.re;
        }
        assert!((s / n as f64 - 2.0).abs() < 0.03);
        assert!((sre / n as f64 - 1.0).abs() < 0.02);
    }
}
