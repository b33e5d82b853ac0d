//! Gauss–Legendre rules, adaptive Gauss–Kronrod integration and trapezoidal
//! quadrature on circles in the complex plane.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::C64;

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = alloc::vec![0.0; n];
    let mut w = alloc::vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        if d.is_finite() {
            dp = d;
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, z);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Result of an adaptive integration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn kronrod_segment<F: FnMut(f64) -> Result<f64>>(f: &mut F, a: f64, b: f64) -> Result<(f64, f64)> {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c)?;
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx)? + f(c + dx)?;
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    Ok((k * h, ((k - g) * h).abs()))
}

/// Globally adaptive 7/15-point Gauss–Kronrod integration of a fallible integrand.
pub fn adaptive_gauss_kronrod_try<F: FnMut(f64) -> Result<f64>>(
    mut f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<Integral> {
    const MAX_SEGMENTS: usize = 4000;
    let (v, e) = kronrod_segment(&mut f, a, b)?;
    let mut segs: Vec<(f64, f64, f64, f64)> = alloc::vec![(a, b, v, e)];
    let mut evaluations = 15;
    loop {
        let total: f64 = segs.iter().map(|s| s.2).sum();
        let err: f64 = segs.iter().map(|s| s.3).sum();
        if !total.is_finite() {
            return Err(Error::QuadratureNonConverged(format!(
                "non-finite integrand on [{a}, {b}]"
            )));
        }
        if err <= abs_tol.max(rel_tol * total.abs()) {
            return Ok(Integral {
                value: total,
                error: err,
                evaluations,
            });
        }
        if segs.len() >= MAX_SEGMENTS {
            return Err(Error::QuadratureNonConverged(format!(
                "adaptive Gauss-Kronrod stalled at error {err:e} on [{a}, {b}]"
            )));
        }
        let worst = segs
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .map(|(i, _)| i)
            .expect("segment list is never empty");
        let (sa, sb, _, _) = segs.swap_remove(worst);
        let mid = 0.5 * (sa + sb);
        if mid <= sa || mid >= sb {
            return Err(Error::QuadratureNonConverged(format!(
                "interval collapsed near {sa}"
            )));
        }
        let (v1, e1) = kronrod_segment(&mut f, sa, mid)?;
        let (v2, e2) = kronrod_segment(&mut f, mid, sb)?;
        evaluations += 30;
        segs.push((sa, mid, v1, e1));
        segs.push((mid, sb, v2, e2));
    }
}

pub fn adaptive_gauss_kronrod<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<Integral> {
    adaptive_gauss_kronrod_try(|x| Ok(f(x)), a, b, abs_tol, rel_tol)
}

/// Gauss–Legendre integration of a fallible integrand on `[a, b]` with node doubling
/// from `start` up to `max` nodes until successive values agree to `tol`
/// (absolute, or relative to the result when that is larger).
pub fn gauss_legendre_doubling<F: FnMut(f64) -> Result<f64>>(
    mut f: F,
    a: f64,
    b: f64,
    start: usize,
    max: usize,
    tol: f64,
) -> Result<(f64, usize)> {
    let rule = |f: &mut F, n: usize| -> Result<f64> {
        let (x, w) = gauss_legendre(n);
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        let mut s = 0.0;
        for (xi, wi) in x.iter().zip(&w) {
            s += wi * f(c + h * xi)?;
        }
        Ok(s * h)
    };
    let mut n = start.max(2);
    let mut prev = rule(&mut f, n)?;
    while n < max {
        n *= 2;
        let cur = rule(&mut f, n)?;
        if (cur - prev).abs() <= tol * cur.abs().max(1.0) {
            return Ok((cur, n));
        }
        prev = cur;
    }
    Err(Error::QuadratureNonConverged(format!(
        "Gauss-Legendre did not settle with {max} nodes"
    )))
}

/// Circle in the complex plane traversed counter-clockwise.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ContourSpec {
    pub center: C64,
    pub radius: f64,
    pub nodes: usize,
}

impl ContourSpec {
    pub fn node(&self, k: usize, of: usize) -> C64 {
        let theta = 2.0 * PI * k as f64 / of as f64;
        self.center + C64::new(self.radius * theta.cos(), self.radius * theta.sin())
    }

    /// Whether every pole lies inside with clearance `0.1·radius` from the circle.
    pub fn clears(&self, poles: impl Iterator<Item = C64>) -> bool {
        poles
            .into_iter()
            .all(|p| (p - self.center).norm() <= 0.9 * self.radius)
    }
}

/// `∮ f(v) dv/(2πi)` as a converged trapezoidal sum with the node count used.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ContourValue {
    pub value: C64,
    pub contour: ContourSpec,
}

pub const CONTOUR_START_NODES: usize = 64;
pub const CONTOUR_MAX_NODES: usize = 1 << 15;

/// Trapezoidal rule on a circle with node doubling.
///
/// Convergence is declared when two successive sums agree to `rel_tol` of the
/// result or to the rounding floor set by the largest sampled term.
pub fn circle_integral<F: FnMut(C64) -> C64>(
    mut f: F,
    center: C64,
    radius: f64,
    rel_tol: f64,
) -> Result<ContourValue> {
    let mut spec = ContourSpec {
        center,
        radius,
        nodes: CONTOUR_START_NODES,
    };
    let mut sum = C64::new(0.0, 0.0);
    let mut max_term: f64 = 0.0;
    for k in 0..spec.nodes {
        let v = spec.node(k, spec.nodes);
        let t = f(v) * (v - center);
        max_term = max_term.max(t.norm());
        sum += t;
    }
    let mut prev = sum / spec.nodes as f64;
    loop {
        if spec.nodes >= CONTOUR_MAX_NODES {
            return Err(Error::QuadratureNonConverged(format!(
                "circle quadrature (center {center}, radius {radius:e}) needs more than {CONTOUR_MAX_NODES} nodes"
            )));
        }
        let doubled = spec.nodes * 2;
        for k in 0..spec.nodes {
            let v = spec.node(2 * k + 1, doubled);
            let t = f(v) * (v - center);
            max_term = max_term.max(t.norm());
            sum += t;
        }
        spec.nodes = doubled;
        let cur = sum / spec.nodes as f64;
        if !(cur.re.is_finite() && cur.im.is_finite()) {
            return Err(Error::QuadratureNonConverged(format!(
                "non-finite circle quadrature (center {center}, radius {radius:e})"
            )));
        }
        let diff = (cur - prev).norm();
        if diff <= rel_tol * cur.norm() || diff <= 64.0 * f64::EPSILON * max_term {
            return Ok(ContourValue {
                value: cur,
                contour: spec,
            });
        }
        prev = cur;
    }
}

/// Radius in `[r_lo, r_hi]` minimizing the sampled maximum of
/// `ln|f(v)| + ln r`, where `log_mag` returns (an estimate of) `ln|f(v)|`.
pub fn min_modulus_radius<L: FnMut(C64) -> f64>(
    mut log_mag: L,
    center: C64,
    r_lo: f64,
    r_hi: f64,
) -> f64 {
    const SAMPLES: usize = 32;
    let mut score = |r: f64| -> f64 {
        let spec = ContourSpec {
            center,
            radius: r,
            nodes: SAMPLES,
        };
        let mut worst = f64::NEG_INFINITY;
        for k in 0..SAMPLES {
            let m = log_mag(spec.node(k, SAMPLES));
            worst = worst.max(if m.is_nan() { f64::INFINITY } else { m });
        }
        worst + r.ln()
    };
    if !(r_hi > r_lo) {
        return r_lo;
    }
    let mut best_r = r_lo;
    let mut best = score(r_lo);
    let mut r = r_lo;
    while r < r_hi {
        r = (r * 2.0).min(r_hi);
        let s = score(r);
        if s < best {
            best = s;
            best_r = r;
        }
    }
    for &f in &[
        0.594_603_557_501_360_5,
        0.840_896_415_253_714_6,
        1.189_207_115_002_721,
        1.681_792_830_507_429,
    ] {
        let cand = best_r * f;
        if cand >= r_lo && cand <= r_hi {
            let s = score(cand);
            if s < best {
                best = s;
                best_r = cand;
            }
        }
    }
    best_r
}
