//! Monte Carlo estimators on grids: binned density and overlap correlators,
//! the extended characteristic polynomial and finite-difference residuals.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::grid::{FieldGrid, FieldMeta, GridSpec};
use crate::integrators::{step_matrix_bm, Representation, Scheme, SimConfig, TrajectoryState};
use crate::linalg::{ComplexMatrix, Lu, OverlapMatrix, SpectralDecomposition};
use crate::stats::Moments;
use crate::C64;

/// Maximum cells per factor of a two-point grid.
pub const MAX_PAIR_CELLS: usize = 32 * 32;

/// Per-cell sums of a per-sample statistic, mergeable in any order.
#[derive(Clone, Debug, PartialEq)]
pub struct BinAccumulator {
    spec: GridSpec,
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
    samples: u64,
    hits: u64,
}

impl BinAccumulator {
    pub fn new(spec: GridSpec) -> Self {
        BinAccumulator {
            spec,
            sum: vec![0.0; spec.len()],
            sum_sq: vec![0.0; spec.len()],
            samples: 0,
            hits: 0,
        }
    }

    /// Adds one sample: eigenvalue `k` contributes `weights[k]` (or 1) scaled by `scale`.
    pub fn add(&mut self, eigenvalues: &[C64], weights: Option<&[f64]>, scale: f64) {
        let mut touched: Vec<(usize, f64)> = Vec::new();
        for (k, &z) in eigenvalues.iter().enumerate() {
            if let Some(cell) = self.spec.cell_of(z) {
                let w = weights.map_or(1.0, |w| w[k]) * scale;
                match touched.iter_mut().find(|(c, _)| *c == cell) {
                    Some(entry) => entry.1 += w,
                    None => touched.push((cell, w)),
                }
                self.hits += 1;
            }
        }
        for (cell, y) in touched {
            self.sum[cell] += y;
            self.sum_sq[cell] += y * y;
        }
        self.samples += 1;
    }

    pub fn merge(&mut self, other: &BinAccumulator) -> Result<()> {
        if self.spec != other.spec {
            return Err(Error::GridMismatch(String::from(
                "accumulators over different grids",
            )));
        }
        for (a, b) in self.sum.iter_mut().zip(&other.sum) {
            *a += b;
        }
        for (a, b) in self.sum_sq.iter_mut().zip(&other.sum_sq) {
            *a += b;
        }
        self.samples += other.samples;
        self.hits += other.hits;
        Ok(())
    }

    pub fn samples(&self) -> u64 {
        self.samples
    }

    /// Per-area mean and standard error over samples.
    pub fn finish(&self, meta: FieldMeta) -> Result<FieldGrid> {
        if self.hits == 0 {
            return Err(Error::EmptyWindow);
        }
        let s = self.samples as f64;
        let area = self.spec.cell_area();
        let mut values = Vec::with_capacity(self.spec.len());
        let mut stderr = Vec::with_capacity(self.spec.len());
        for (&sum, &sq) in self.sum.iter().zip(&self.sum_sq) {
            let mean = sum / s;
            let var = if self.samples > 1 {
                ((sq - s * mean * mean) / (s - 1.0)).max(0.0)
            } else {
                0.0
            };
            values.push(mean / area);
            stderr.push((var / s).sqrt() / area);
        }
        let mut meta = meta;
        meta.samples = self.samples;
        FieldGrid::new(self.spec, values, stderr, meta)
    }
}

/// Normalized spectral density `⟨Σ δ(z − λ_i)⟩ / N` by binning.
pub fn estimate_density<S: AsRef<[C64]>>(samples: &[S], spec: &GridSpec) -> Result<FieldGrid> {
    let first = samples
        .first()
        .ok_or_else(|| Error::invalid("samples", "need at least one sample"))?;
    let n = first.as_ref().len();
    let mut acc = BinAccumulator::new(*spec);
    for s in samples {
        let eig = s.as_ref();
        acc.add(eig, None, 1.0 / eig.len() as f64);
    }
    acc.finish(FieldMeta::new("density", n, f64::NAN))
}

/// Eigenvector correlator `⟨Σ O_αα δ(z − λ_α)⟩ / N²` by binning.
pub fn estimate_o1<S: AsRef<[C64]>, W: AsRef<[f64]>>(
    samples: &[(S, W)],
    spec: &GridSpec,
) -> Result<FieldGrid> {
    let first = samples
        .first()
        .ok_or_else(|| Error::invalid("samples", "need at least one sample"))?;
    let n = first.0.as_ref().len();
    let mut acc = BinAccumulator::new(*spec);
    for (eig, w) in samples {
        let (eig, w) = (eig.as_ref(), w.as_ref());
        if w.len() != eig.len() {
            return Err(Error::DimensionMismatch {
                expected: eig.len(),
                got: w.len(),
            });
        }
        let nf = eig.len() as f64;
        acc.add(eig, Some(w), 1.0 / (nf * nf));
    }
    acc.finish(FieldMeta::new("o1", n, f64::NAN))
}

/// Two-point fields on the product grid; flat index `cell₁ · cells + cell₂`.
#[derive(Clone, Debug, PartialEq)]
pub struct PairFields {
    pub spec: GridSpec,
    pub samples: u64,
    pub rho2: Vec<f64>,
    pub rho2_stderr: Vec<f64>,
    pub o2_re: Vec<f64>,
    pub o2_im: Vec<f64>,
    pub o2_stderr: Vec<f64>,
}

impl PairFields {
    pub fn cells(&self) -> usize {
        self.spec.len()
    }

    pub fn at(&self, c1: usize, c2: usize) -> usize {
        c1 * self.cells() + c2
    }

    /// Integral of ρ₂ over the window squared.
    pub fn rho2_integral(&self) -> f64 {
        let a = self.spec.cell_area();
        self.rho2.iter().sum::<f64>() * a * a
    }
}

/// Binned `ρ₂(z₁,z₂) = ⟨Σ_{i≠j} δ(z₁−λ_i)δ(z₂−λ_j)⟩/N²` and
/// `O₂ = ⟨Σ_{i≠j} O_ij δ(z₁−λ_i)δ(z₂−λ_j)⟩/N²`.
pub fn estimate_rho2_o2(
    samples: &[(Vec<C64>, OverlapMatrix)],
    spec: &GridSpec,
) -> Result<PairFields> {
    let cells = spec.len();
    if cells > MAX_PAIR_CELLS {
        return Err(Error::GridTooLarge {
            cells,
            max: MAX_PAIR_CELLS,
        });
    }
    if samples.is_empty() {
        return Err(Error::invalid("samples", "need at least one sample"));
    }
    let size = cells * cells;
    let mut r = [vec![0.0; size], vec![0.0; size]];
    let mut o = [vec![0.0; size], vec![0.0; size], vec![0.0; size]];
    let mut hits = 0u64;
    for (eig, ov) in samples {
        let n = eig.len();
        if ov.n() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: ov.n(),
            });
        }
        let scale = 1.0 / (n * n) as f64;
        let located: Vec<Option<usize>> = eig.iter().map(|&z| spec.cell_of(z)).collect();
        hits += located.iter().flatten().count() as u64;
        let mut touched: Vec<(usize, f64, C64)> = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                if let (Some(c1), Some(c2)) = (located[i], located[j]) {
                    let k = c1 * cells + c2;
                    let oij = ov.o[(i, j)] * scale;
                    match touched.iter_mut().find(|t| t.0 == k) {
                        Some(t) => {
                            t.1 += scale;
                            t.2 += oij;
                        }
                        None => touched.push((k, scale, oij)),
                    }
                }
            }
        }
        for (k, y, w) in touched {
            r[0][k] += y;
            r[1][k] += y * y;
            o[0][k] += w.re;
            o[1][k] += w.im;
            o[2][k] += w.re * w.re;
        }
    }
    if hits == 0 {
        return Err(Error::EmptyWindow);
    }
    let s = samples.len() as f64;
    let a2 = spec.cell_area() * spec.cell_area();
    let finish = |sum: &[f64], sq: &[f64]| -> (Vec<f64>, Vec<f64>) {
        sum.iter()
            .zip(sq)
            .map(|(&t, &q)| {
                let mean = t / s;
                let var = if s > 1.0 {
                    ((q - s * mean * mean) / (s - 1.0)).max(0.0)
                } else {
                    0.0
                };
                (mean / a2, (var / s).sqrt() / a2)
            })
            .unzip()
    };
    let (rho2, rho2_stderr) = finish(&r[0], &r[1]);
    let (o2_re, o2_stderr) = finish(&o[0], &o[2]);
    let o2_im = o[1].iter().map(|v| v / s / a2).collect();
    Ok(PairFields {
        spec: *spec,
        samples: samples.len() as u64,
        rho2,
        rho2_stderr,
        o2_re,
        o2_im,
        o2_stderr,
    })
}

/// `ln det H` for Hermitian positive definite `H` by Cholesky; `None` if not positive definite.
fn ln_det_hermitian(h: &ComplexMatrix) -> Option<f64> {
    let n = h.n();
    let mut l = vec![C64::new(0.0, 0.0); n * n];
    let mut ln_det = 0.0;
    for j in 0..n {
        let mut d = h[(j, j)].re;
        for k in 0..j {
            d -= l[j * n + k].norm_sqr();
        }
        if !(d > 0.0) {
            return None;
        }
        let djj = d.sqrt();
        l[j * n + j] = C64::new(djj, 0.0);
        ln_det += 2.0 * djj.ln();
        for i in j + 1..n {
            let mut v = h[(i, j)];
            for k in 0..j {
                v -= l[i * n + k] * l[j * n + k].conj();
            }
            l[i * n + j] = v / djj;
        }
    }
    Some(ln_det)
}

fn shifted(x: &ComplexMatrix, z: C64) -> ComplexMatrix {
    let mut m = x.scaled(C64::new(-1.0, 0.0));
    for i in 0..x.n() {
        m[(i, i)] += z;
    }
    m
}

/// `ln D` with `D = det[(z − X)(z̄ − X†) + |w|²]`.
pub fn ecp_ln_value(x: &ComplexMatrix, z: C64, w: C64) -> f64 {
    let zx = shifted(x, z);
    if w == C64::new(0.0, 0.0) {
        return 2.0 * Lu::factor(&zx).map_or(f64::NEG_INFINITY, |lu| lu.det().norm().ln());
    }
    let mut h = zx.matmul(&zx.adjoint());
    let w2 = w.norm_sqr();
    for i in 0..x.n() {
        h[(i, i)] += w2;
    }
    ln_det_hermitian(&h).unwrap_or_else(|| {
        // rounding pushed a tiny eigenvalue negative
        Lu::factor(&h).map_or(f64::NEG_INFINITY, |lu| lu.det().re.max(0.0).ln())
    })
}

/// `D = det[(z − X)(z̄ − X†) + |w|²]`, real and nonnegative.
pub fn ecp_value(x: &ComplexMatrix, z: C64, w: C64) -> f64 {
    ecp_ln_value(x, z, w).exp()
}

/// `D` from the block form `det[[z − Λ, −w̄A⁻¹], [wA, z̄ − Λ̄]]` in the eigenbasis.
pub fn ecp_block_value(dec: &SpectralDecomposition, z: C64, w: C64) -> Result<C64> {
    let n = dec.n();
    let a = dec.s.adjoint().matmul(&dec.s);
    let a_inv = dec.s_inv.matmul(&dec.s_inv.adjoint());
    let m = ComplexMatrix::from_fn(2 * n, |i, j| match (i < n, j < n) {
        (true, true) => {
            if i == j {
                z - dec.lambdas[i]
            } else {
                C64::new(0.0, 0.0)
            }
        }
        (true, false) => -w.conj() * a_inv[(i, j - n)],
        (false, true) => w * a[(i - n, j)],
        (false, false) => {
            if i == j {
                z.conj() - dec.lambdas[i - n].conj()
            } else {
                C64::new(0.0, 0.0)
            }
        }
    });
    Ok(Lu::factor(&m).map_or(C64::new(0.0, 0.0), |lu| lu.det()))
}

/// `⟨D⟩` for `N = 1`: `|z − x₀|² + |w|² + v t`.
pub fn ecp_mean_scalar(z: C64, x0: C64, w: C64, t: f64, variance_rate: f64) -> f64 {
    (z - x0).norm_sqr() + w.norm_sqr() + variance_rate * t
}

/// Finite-difference steps for the heat residual.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HeatStencil {
    pub hw: f64,
    pub ht: f64,
}

/// Heat residual `∂_t⟨D⟩ − v ∂_{ww̄}⟨D⟩` at one `(w, t)` node.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HeatResidual {
    pub w: C64,
    pub t: f64,
    pub mean_d: f64,
    pub mean_d_stderr: f64,
    pub residual: f64,
    pub stderr: f64,
}

/// Residual of `∂_t⟨D⟩ = v ∂_{ww̄}⟨D⟩` with `v` the convention's variance rate,
/// using centred differences per trajectory.
pub fn heat_residual_from<F: Fn(C64, f64) -> f64>(
    d: F,
    w: C64,
    t: f64,
    stencil: HeatStencil,
    v: f64,
) -> f64 {
    let (hw, ht) = (stencil.hw, stencil.ht);
    let dt = (d(w, t + ht) - d(w, t - ht)) / (2.0 * ht);
    let lap =
        (d(w + hw, t) + d(w - hw, t) + d(w + C64::new(0.0, hw), t) + d(w - C64::new(0.0, hw), t)
            - 4.0 * d(w, t))
            / (hw * hw);
    dt - v * 0.25 * lap
}

/// Monte Carlo heat residual on a `w`-grid times `t_grid`, one value per node.
pub fn ecp_heat_residual<E: Executor>(
    config: &SimConfig,
    z: C64,
    w_grid: &GridSpec,
    t_grid: &[f64],
    stencil: HeatStencil,
    trajectories: usize,
    exec: &E,
) -> Result<Vec<HeatResidual>> {
    if config.scheme != Scheme::MatrixBM {
        return Err(Error::invalid(
            "scheme",
            "heat residual needs matrix Brownian motion",
        ));
    }
    config.validate()?;
    if !(stencil.hw > 0.0) || !(stencil.ht > 0.0) || t_grid.iter().any(|&t| !(t - stencil.ht > 0.0))
    {
        return Err(Error::invalid(
            "stencil",
            "steps must be positive and t − ht > 0",
        ));
    }
    if trajectories < 2 {
        return Err(Error::invalid(
            "trajectories",
            "need at least two trajectories",
        ));
    }
    let mut times: Vec<f64> = t_grid
        .iter()
        .flat_map(|&t| [t - stencil.ht, t, t + stencil.ht])
        .collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let nodes: Vec<(C64, f64)> = t_grid
        .iter()
        .flat_map(|&t| (0..w_grid.len()).map(move |k| (w_grid.center_of(k), t)))
        .collect();
    let v = config.convention.variance_rate;
    let per_traj = exec.map(trajectories, |k| -> Result<Vec<(f64, f64)>> {
        let mut state = TrajectoryState::initial(config, k as u64)?;
        let Representation::Matrix(mut x) = state.repr else {
            return Err(Error::invalid("scheme", "expected a matrix state"));
        };
        let mut snapshots = Vec::with_capacity(times.len());
        let mut now = 0.0;
        for &target in &times {
            let gap = target - now;
            let sub = (gap / config.dt).ceil().max(1.0) as usize;
            for _ in 0..sub {
                step_matrix_bm(&mut x, &config.convention, gap / sub as f64, &mut state.rng);
            }
            now = target;
            snapshots.push(x.clone());
        }
        let at = |tt: f64| -> &ComplexMatrix {
            let i = times
                .iter()
                .position(|&s| s == tt)
                .expect("time on the grid");
            &snapshots[i]
        };
        Ok(nodes
            .iter()
            .map(|&(w, t)| {
                let d = |ww: C64, tt: f64| ecp_value(at(tt), z, ww);
                (heat_residual_from(d, w, t, stencil, v), d(w, t))
            })
            .collect())
    });
    let mut res = vec![Moments::new(); nodes.len()];
    let mut dm = vec![Moments::new(); nodes.len()];
    for traj in per_traj {
        for (i, (r, d)) in traj?.into_iter().enumerate() {
            res[i].push(r);
            dm[i].push(d);
        }
    }
    Ok(nodes
        .iter()
        .enumerate()
        .map(|(i, &(w, t))| HeatResidual {
            w,
            t,
            mean_d: dm[i].mean(),
            mean_d_stderr: dm[i].stderr(),
            residual: res[i].mean(),
            stderr: res[i].stderr(),
        })
        .collect())
}

/// Stencil offsets in `w` used by the log-determinant field: centre, ±h, ±ih.
const W_OFFSETS: [(f64, f64); 5] = [(0.0, 0.0), (1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0)];

/// `⟨ln D⟩` and `ln⟨D⟩` on a `z`-grid at `w` and its four stencil neighbours.
#[derive(Clone, Debug, PartialEq)]
pub struct EcpLogField {
    pub spec: GridSpec,
    pub n: usize,
    pub w: C64,
    pub hw: f64,
    pub samples: u64,
    /// `[offset][cell]` in the order centre, +h, −h, +ih, −ih.
    pub mean_log: [Vec<f64>; 5],
    pub stderr_log: [Vec<f64>; 5],
    pub log_mean: [Vec<f64>; 5],
}

/// Regulator settings for the log-determinant estimator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Regulator {
    pub w: C64,
    pub hw: f64,
    /// Largest admissible per-sample variance of `ln D`.
    pub max_log_variance: f64,
}

impl Regulator {
    /// `|w| = 0.05√τ` on the real axis, stencil step `|w|/2`.
    pub fn for_tau(tau: f64) -> Self {
        let w = 0.05 * tau.sqrt();
        Regulator {
            w: C64::new(w, 0.0),
            hw: 0.5 * w,
            max_log_variance: 1e4,
        }
    }
}

/// Averages `ln D` and `D` over matrix samples at each grid point.
pub fn ecp_log_field(
    samples: &[ComplexMatrix],
    spec: &GridSpec,
    reg: Regulator,
) -> Result<EcpLogField> {
    let first = samples
        .first()
        .ok_or_else(|| Error::invalid("samples", "need at least one sample"))?;
    let n = first.n();
    if reg.w.norm() == 0.0 || !(reg.hw > 0.0) || reg.hw >= reg.w.norm() {
        return Err(Error::RegulatorTooSmall {
            variance: f64::INFINITY,
        });
    }
    let mut mean_log: [Vec<f64>; 5] = Default::default();
    let mut stderr_log: [Vec<f64>; 5] = Default::default();
    let mut log_mean: [Vec<f64>; 5] = Default::default();
    for (o, &(dr, di)) in W_OFFSETS.iter().enumerate() {
        let w = reg.w + C64::new(dr * reg.hw, di * reg.hw);
        for k in 0..spec.len() {
            let z = spec.center_of(k);
            let logs: Vec<f64> = samples.iter().map(|x| ecp_ln_value(x, z, w)).collect();
            let m: Moments = logs.iter().copied().collect();
            if !m.mean().is_finite() || m.variance() > reg.max_log_variance {
                return Err(Error::RegulatorTooSmall {
                    variance: m.variance(),
                });
            }
            let peak = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lme = peak
                + (logs.iter().map(|l| (l - peak).exp()).sum::<f64>() / logs.len() as f64).ln();
            mean_log[o].push(m.mean());
            stderr_log[o].push(m.stderr());
            log_mean[o].push(lme);
        }
    }
    Ok(EcpLogField {
        spec: *spec,
        n,
        w: reg.w,
        hw: reg.hw,
        samples: samples.len() as u64,
        mean_log,
        stderr_log,
        log_mean,
    })
}

/// Which average of `D` feeds the derivatives.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LogAverage {
    MeanOfLog,
    LogOfMean,
}

/// Regulated density `(1/πN) ∂_{zz̄} f` and correlator `(1/πN²) |∂_w f|²` on the
/// interior of the grid, `f` being the chosen log average.
pub fn ecp_observables(field: &EcpLogField, which: LogAverage) -> Result<(FieldGrid, FieldGrid)> {
    let inner = field.spec.interior()?;
    let f = match which {
        LogAverage::MeanOfLog => &field.mean_log,
        LogAverage::LogOfMean => &field.log_mean,
    };
    let se = &field.stderr_log;
    let (dx, dy, hw) = (field.spec.dx(), field.spec.dy(), field.hw);
    let nf = field.n as f64;
    let g = &field.spec;
    let mut rho = (Vec::new(), Vec::new());
    let mut o = (Vec::new(), Vec::new());
    for iy in 0..inner.ny {
        for ix in 0..inner.nx {
            let c = g.index(ix + 1, iy + 1);
            let (e, wst, n_, s_) = (
                g.index(ix + 2, iy + 1),
                g.index(ix, iy + 1),
                g.index(ix + 1, iy + 2),
                g.index(ix + 1, iy),
            );
            let f0 = &f[0];
            let lap = (f0[e] + f0[wst] - 2.0 * f0[c]) / (dx * dx)
                + (f0[n_] + f0[s_] - 2.0 * f0[c]) / (dy * dy);
            rho.0.push(0.25 * lap / (PI * nf));
            let s0 = &se[0];
            let var = (s0[e].powi(2) + s0[wst].powi(2) + 4.0 * s0[c].powi(2)) / dx.powi(4)
                + (s0[n_].powi(2) + s0[s_].powi(2)) / dy.powi(4);
            rho.1.push(0.25 * var.sqrt() / (PI * nf));
            let gx = (f[1][c] - f[2][c]) / (2.0 * hw);
            let gy = (f[3][c] - f[4][c]) / (2.0 * hw);
            let dw = C64::new(0.5 * gx, -0.5 * gy);
            o.0.push(dw.norm_sqr() / (PI * nf * nf));
            let dvar = 0.25
                * (se[1][c].powi(2) + se[2][c].powi(2) + se[3][c].powi(2) + se[4][c].powi(2))
                / (4.0 * hw * hw);
            o.1.push(2.0 * dw.norm() * dvar.sqrt() / (PI * nf * nf));
        }
    }
    let label = match which {
        LogAverage::MeanOfLog => "mean_log",
        LogAverage::LogOfMean => "log_mean",
    };
    let mut meta = FieldMeta::new(&format!("ecp_density_{label}"), field.n, f64::NAN);
    meta.samples = field.samples;
    let rho = FieldGrid::new(inner, rho.0, rho.1, meta.clone())?;
    meta.estimator = format!("ecp_o_{label}");
    let o = FieldGrid::new(inner, o.0, o.1, meta)?;
    Ok((rho, o))
}

/// `∂_τρ − ∂_{zz̄}O` at each interior time from fields at equally spaced `τ`.
///
/// `rho[k]` and `o[k]` are the fields at `taus[k]`; the result for interior time
/// `k` lives on the interior of the spatial grid.
pub fn hierarchy_residual(
    taus: &[f64],
    rho: &[FieldGrid],
    o: &[FieldGrid],
) -> Result<Vec<(f64, FieldGrid)>> {
    if taus.len() < 3 || rho.len() != taus.len() || o.len() != taus.len() {
        return Err(Error::GridMismatch(format!(
            "need ≥ 3 times with one ρ and one O field each (got {}, {}, {})",
            taus.len(),
            rho.len(),
            o.len()
        )));
    }
    let spec = rho[0].spec;
    if rho.iter().chain(o).any(|f| f.spec != spec) {
        return Err(Error::GridMismatch(String::from(
            "fields live on different grids",
        )));
    }
    let ht = taus[1] - taus[0];
    if !(ht > 0.0)
        || taus
            .windows(2)
            .any(|p| ((p[1] - p[0]) - ht).abs() > 1e-9 * ht)
    {
        return Err(Error::GridMismatch(String::from(
            "times must be increasing and equally spaced",
        )));
    }
    let inner = spec.interior()?;
    let (dx, dy) = (spec.dx(), spec.dy());
    let mut out = Vec::new();
    for k in 1..taus.len() - 1 {
        let mut values = Vec::with_capacity(inner.len());
        let mut errs = Vec::with_capacity(inner.len());
        let om = &o[k];
        for iy in 0..inner.ny {
            for ix in 0..inner.nx {
                let c = spec.index(ix + 1, iy + 1);
                let nb = [
                    spec.index(ix + 2, iy + 1),
                    spec.index(ix, iy + 1),
                    spec.index(ix + 1, iy + 2),
                    spec.index(ix + 1, iy),
                ];
                let drho = (rho[k + 1].values[c] - rho[k - 1].values[c]) / (2.0 * ht);
                let lap = (om.values[nb[0]] + om.values[nb[1]] - 2.0 * om.values[c]) / (dx * dx)
                    + (om.values[nb[2]] + om.values[nb[3]] - 2.0 * om.values[c]) / (dy * dy);
                values.push(drho - 0.25 * lap);
                let var_t =
                    (rho[k + 1].stderr[c].powi(2) + rho[k - 1].stderr[c].powi(2)) / (4.0 * ht * ht);
                let var_z = 0.0625
                    * ((om.stderr[nb[0]].powi(2) + om.stderr[nb[1]].powi(2)) / dx.powi(4)
                        + (om.stderr[nb[2]].powi(2) + om.stderr[nb[3]].powi(2)) / dy.powi(4)
                        + 4.0 * om.stderr[c].powi(2) * (1.0 / (dx * dx) + 1.0 / (dy * dy)).powi(2));
                errs.push((var_t + var_z).sqrt());
            }
        }
        let mut meta = FieldMeta::new("hierarchy_residual", rho[k].meta.n, taus[k]);
        meta.samples = rho[k].meta.samples.min(om.meta.samples);
        out.push((taus[k], FieldGrid::new(inner, values, errs, meta)?));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Sequential;
    use crate::grid::Window;
    use crate::linalg::{eigendecompose, overlap_matrix, DEFAULT_GAP_FLOOR};
    use crate::rng::{ginibre, stream_rng};
    use crate::SourceSpec;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn single_sample_lands_in_central_bin() {
        let g = GridSpec::new(Window::square(1.0), 5, 5).unwrap();
        let d = estimate_density(&[vec![c(0.0, 0.0)]], &g).unwrap();
        let centre = g.index(2, 2);
        for k in 0..g.len() {
            let expected = if k == centre {
                1.0 / g.cell_area()
            } else {
                0.0
            };
            assert_eq!(d.values[k], expected);
        }
        assert!((d.integral() - 1.0).abs() < 1e-15);
        assert_eq!(
            estimate_density(&[vec![c(3.0, 0.0)]], &g),
            Err(Error::EmptyWindow)
        );
    }

    #[test]
    fn normal_weights_reduce_o1_to_density_over_n() {
        let g = GridSpec::new(Window::square(2.0), 8, 8).unwrap();
        let mut rng = stream_rng(3, 0);
        let samples: Vec<(Vec<C64>, Vec<f64>)> = (0..50)
            .map(|_| {
                (
                    (0..4)
                        .map(|_| crate::rng::uniform_disk(&mut rng, 1.5))
                        .collect(),
                    vec![1.0; 4],
                )
            })
            .collect();
        let eig: Vec<Vec<C64>> = samples.iter().map(|s| s.0.clone()).collect();
        let d = estimate_density(&eig, &g).unwrap();
        let o = estimate_o1(&samples, &g).unwrap();
        for k in 0..g.len() {
            assert!((o.values[k] - d.values[k] / 4.0).abs() < 1e-14);
        }
    }

    #[test]
    fn accumulator_merge_is_order_free() {
        let g = GridSpec::new(Window::square(1.0), 3, 3).unwrap();
        let samples = [
            vec![c(0.1, 0.2), c(-0.5, 0.5)],
            vec![c(0.9, -0.9), c(0.0, 0.0)],
            vec![c(0.3, 0.3), c(0.3, 0.31)],
        ];
        let mut all = BinAccumulator::new(g);
        let mut a = BinAccumulator::new(g);
        let mut b = BinAccumulator::new(g);
        for (i, s) in samples.iter().enumerate() {
            all.add(s, None, 0.5);
            if i == 1 {
                b.add(s, None, 0.5)
            } else {
                a.add(s, None, 0.5)
            }
        }
        b.merge(&a).unwrap();
        let meta = FieldMeta::default();
        let x = all.finish(meta.clone()).unwrap();
        let y = b.finish(meta).unwrap();
        for k in 0..g.len() {
            assert!((x.values[k] - y.values[k]).abs() < 1e-15);
            assert!((x.stderr[k] - y.stderr[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn pair_fields_count_ordered_pairs() {
        let g = GridSpec::new(Window::square(3.0), 6, 6).unwrap();
        let mut rng = stream_rng(5, 0);
        let mut samples = Vec::new();
        for _ in 0..300 {
            let x = ginibre(2, 0.5, &mut rng);
            let dec = eigendecompose(&x, DEFAULT_GAP_FLOOR).unwrap();
            samples.push((dec.lambdas.clone(), overlap_matrix(&dec).unwrap()));
        }
        let p = estimate_rho2_o2(&samples, &g).unwrap();
        // every ordered pair that stays in the window counts 1/N²
        assert!(
            (p.rho2_integral() - 0.5).abs() < 0.01,
            "{}",
            p.rho2_integral()
        );
        for c1 in 0..g.len() {
            for c2 in 0..g.len() {
                assert!((p.rho2[p.at(c1, c2)] - p.rho2[p.at(c2, c1)]).abs() < 1e-12);
            }
        }
        let one: Vec<(Vec<C64>, OverlapMatrix)> = samples
            .iter()
            .take(1)
            .map(|(l, o)| {
                (l[..1].to_vec(), {
                    let d = eigendecompose(&ComplexMatrix::from_diag(&l[..1]), DEFAULT_GAP_FLOOR)
                        .unwrap();
                    let _ = o;
                    overlap_matrix(&d).unwrap()
                })
            })
            .collect();
        assert!(estimate_rho2_o2(&one, &g)
            .unwrap()
            .rho2
            .iter()
            .all(|&v| v == 0.0));
        let big = GridSpec::new(Window::square(1.0), 33, 32).unwrap();
        assert!(matches!(
            estimate_rho2_o2(&samples, &big),
            Err(Error::GridTooLarge { .. })
        ));
    }

    #[test]
    fn ecp_scalar_and_factorized_cases() {
        let x = ComplexMatrix::zeros(1);
        let (z, w) = (c(0.3, -0.4), c(0.1, 0.2));
        assert!((ecp_value(&x, z, w) - (0.25 + 0.05)).abs() < 1e-15);
        let mut rng = stream_rng(9, 0);
        let x = ginibre(4, 1.0, &mut rng);
        let det = crate::linalg::determinant(&shifted(&x, z)).norm_sqr();
        assert!((ecp_value(&x, z, c(0.0, 0.0)) - det).abs() < 1e-12 * det);
        assert!((ecp_value(&x, z, c(1e-9, 0.0)) - det).abs() < 1e-6 * det);
    }

    #[test]
    fn ecp_block_form_matches_product_form() {
        let mut rng = stream_rng(11, 0);
        for n in 1..=8 {
            let x = ginibre(n, 1.0, &mut rng);
            let dec = eigendecompose(&x, DEFAULT_GAP_FLOOR).unwrap();
            let (z, w) = (c(0.2, 0.1), c(0.3, -0.2));
            let d = ecp_value(&x, z, w);
            let b = ecp_block_value(&dec, z, w).unwrap();
            assert!(
                (b.re - d).abs() < 1e-8 * d && b.im.abs() < 1e-8 * d,
                "n={n}: {d} vs {b}"
            );
        }
    }

    #[test]
    fn scalar_heat_residual_vanishes_identically() {
        let st = HeatStencil { hw: 0.1, ht: 0.05 };
        for &(w, t) in &[(c(0.0, 0.0), 0.5), (c(0.3, -0.2), 1.0), (c(-1.0, 0.5), 2.0)] {
            let r = heat_residual_from(
                |ww, tt| ecp_mean_scalar(c(0.2, 0.1), c(-0.3, 0.4), ww, tt, 1.0),
                w,
                t,
                st,
                1.0,
            );
            assert!(r.abs() < 1e-12, "{r}");
        }
    }

    #[test]
    fn scalar_heat_monte_carlo_is_consistent() {
        let mut cfg = SimConfig::new(1, Scheme::MatrixBM, 0.01, 0, 4);
        cfg.source = SourceSpec::from_values(&[c(0.2, 0.0)]).unwrap();
        let g = GridSpec::new(Window::square(0.3), 3, 3).unwrap();
        let out = ecp_heat_residual(
            &cfg,
            c(0.1, 0.1),
            &g,
            &[0.5, 1.0],
            HeatStencil { hw: 0.1, ht: 0.05 },
            4000,
            &Sequential,
        )
        .unwrap();
        for r in &out {
            let exact = ecp_mean_scalar(c(0.1, 0.1), c(0.2, 0.0), r.w, r.t, 1.0);
            assert!(
                (r.mean_d - exact).abs() < 4.0 * r.mean_d_stderr,
                "{r:?} vs {exact}"
            );
            assert!(r.residual.abs() < 4.0 * r.stderr + 1e-9, "{r:?}");
        }
    }

    #[test]
    fn bulk_closed_forms_satisfy_hierarchy() {
        let spec = GridSpec::new(Window::square(0.4), 8, 8).unwrap();
        let taus = [0.95, 1.0, 1.05];
        let rho: Vec<FieldGrid> = taus
            .iter()
            .map(|&t| FieldGrid::from_fn(spec, FieldMeta::default(), |_| (1.0 / (PI * t), 0.0)))
            .collect();
        let o: Vec<FieldGrid> = taus
            .iter()
            .map(|&t| {
                FieldGrid::from_fn(spec, FieldMeta::default(), |z| {
                    ((t - z.norm_sqr()) / (PI * t * t), 0.0)
                })
            })
            .collect();
        let res = hierarchy_residual(&taus, &rho, &o).unwrap();
        assert_eq!(res.len(), 1);
        // the Laplacian of O is exact; the τ-difference of 1/(πτ) is off by −h²/(πτ⁴) + O(h⁴)
        let lead = -0.05f64.powi(2) / PI;
        for v in &res[0].1.values {
            assert!((v - lead).abs() < 0.01 * lead.abs(), "{v}");
        }
        assert!(hierarchy_residual(&taus[..2], &rho[..2], &o[..2]).is_err());
        let other = GridSpec::new(Window::square(0.5), 8, 8).unwrap();
        let mut bad = o.clone();
        bad[1].spec = other;
        assert!(matches!(
            hierarchy_residual(&taus, &rho, &bad),
            Err(Error::GridMismatch(_))
        ));
    }

    #[test]
    fn static_harmonic_fields_have_zero_residual() {
        let spec = GridSpec::new(Window::square(1.0), 6, 6).unwrap();
        let taus = [1.0, 2.0, 3.0];
        let rho: Vec<FieldGrid> = taus
            .iter()
            .map(|_| FieldGrid::from_fn(spec, FieldMeta::default(), |_| (0.3, 0.0)))
            .collect();
        let o: Vec<FieldGrid> = taus
            .iter()
            .map(|_| {
                FieldGrid::from_fn(spec, FieldMeta::default(), |z| {
                    (z.re * z.re - z.im * z.im + z.re, 0.0)
                })
            })
            .collect();
        let res = hierarchy_residual(&taus, &rho, &o).unwrap();
        assert!(res[0].1.max_abs() < 1e-12);
    }
}
