//! Verification suites: each returns named checks with values and thresholds.

use gdyn_core::exact::{
    correlator_beta_form, density_source, ginibre_closed_sum, ginibre_density_closed,
};
use gdyn_core::grid::{FieldGrid, FieldMeta, GridSpec, Window};
use gdyn_core::integrators::{dyson_update, match_eigenvalues, Scheme, SimConfig};
use gdyn_core::linalg::{eigendecompose, eigenvalues, ComplexMatrix, DEFAULT_GAP_FLOOR};
use gdyn_core::observables::{
    ecp_block_value, ecp_heat_residual, ecp_mean_scalar, ecp_value, heat_residual_from,
    hierarchy_residual, HeatResidual, HeatStencil,
};
use gdyn_core::rng::{ginibre, stream_rng, uniform_disk};
use gdyn_core::sfp::{
    check_covariances, check_derivative_ids, check_q_solution, check_tdq, check_tq, PointLimits,
    SfpPoint,
};
use gdyn_core::{Error, Executor, SourceSpec, C64};
use rand::Rng;
use serde::Serialize;

use crate::error::CliResult;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    /// Passes when `value < threshold`.
    pub fn below(name: &str, value: f64, threshold: f64, detail: impl Into<String>) -> Self {
        Check {
            name: name.into(),
            value,
            threshold,
            passed: value < threshold,
            detail: detail.into(),
        }
    }

    /// Passes when `value ≥ threshold`.
    pub fn at_least(name: &str, value: f64, threshold: f64, detail: impl Into<String>) -> Self {
        Check {
            name: name.into(),
            value,
            threshold,
            passed: value >= threshold,
            detail: detail.into(),
        }
    }

    pub fn line(&self) -> String {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        format!(
            "{tag} {}: {:.3e} (threshold {:.3e}) {}",
            self.name, self.value, self.threshold, self.detail
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report {
    pub suite: String,
    pub checks: Vec<Check>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<String> {
        self.checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.name.clone())
            .collect()
    }
}

/// `log(a/b) / log(ha/hb)`.
pub fn observed_order(a: f64, b: f64, ha: f64, hb: f64) -> f64 {
    (a / b).ln() / (ha / hb).ln()
}

/// Worst cancellation residuals over random points with `N` cycling through `ns`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IdentitySweep {
    pub points: usize,
    pub worst_tq: f64,
    pub worst_tdq: f64,
}

pub fn identity_sweep<E: Executor>(
    points: usize,
    ns: &[usize],
    seed: u64,
    exec: &E,
) -> IdentitySweep {
    let res = exec.map(points, |p| {
        let n = ns[p % ns.len()];
        let pt = SfpPoint::sample(n, PointLimits::default(), &mut stream_rng(seed, p as u64));
        let (a, b) = check_tdq(&pt);
        (check_tq(&pt).relative, a.relative.max(b.relative))
    });
    IdentitySweep {
        points,
        worst_tq: res.iter().map(|r| r.0).fold(0.0, f64::max),
        worst_tdq: res.iter().map(|r| r.1).fold(0.0, f64::max),
    }
}

/// Finite-difference check of the derivatives of `A` and `A⁻¹`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DerivativeSweep {
    /// Richardson-extrapolated error at `h = 1e-4`.
    pub worst_extrapolated: f64,
    /// Smallest observed order of plain centred differences between `h = 1e-2` and `5e-3`.
    pub min_order: f64,
}

pub fn derivative_sweep(points: usize, seed: u64) -> CliResult<DerivativeSweep> {
    let mut worst: f64 = 0.0;
    let mut order = f64::INFINITY;
    for p in 0..points {
        let pt = SfpPoint::sample(
            2 + p % 3,
            PointLimits::default(),
            &mut stream_rng(seed, p as u64),
        );
        worst = worst.max(check_derivative_ids(&pt, 1e-4, true)?);
        let a = check_derivative_ids(&pt, 1e-2, false)?;
        let b = check_derivative_ids(&pt, 5e-3, false)?;
        order = order.min(observed_order(a, b, 1e-2, 5e-3));
    }
    Ok(DerivativeSweep {
        worst_extrapolated: worst,
        min_order: order,
    })
}

/// Pointwise check of the heat-kernel solution at `N = 2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QSweep {
    pub worst_residual: f64,
    pub min_order: f64,
}

/// Half of the points use `X₀ = 0`, the rest a random `X₀`; `t ∈ [0.5, 1.5]`.
/// The extrapolation step starts at `1e-3` and is quartered while the two
/// Richardson levels differ by more than `1e-4`; the order is measured at `4h` and `2h`.
pub fn q_sweep(points: usize, seed: u64) -> CliResult<QSweep> {
    let limits = PointLimits {
        max_condition: 20.0,
        min_gap: 0.1,
    };
    let mut worst: f64 = 0.0;
    let mut order = f64::INFINITY;
    for p in 0..points {
        let mut rng = stream_rng(seed, p as u64);
        let pt = SfpPoint::sample(2, limits, &mut rng);
        let x0 = if p % 2 == 0 {
            ComplexMatrix::zeros(2)
        } else {
            ginibre(2, 0.5, &mut rng)
        };
        let t = 0.5 + rng.gen::<f64>();
        let mut h = 1e-3;
        let extrapolated = loop {
            match check_q_solution(&pt, &x0, t, h, true) {
                Err(Error::StepTooLarge { .. }) if h > 1e-5 => h *= 0.25,
                Ok(r) if r.disagreement > 1e-4 && h > 1e-5 => h *= 0.25,
                r => break r?,
            }
        };
        worst = worst.max(extrapolated.relative);
        let a = check_q_solution(&pt, &x0, t, 4.0 * h, false)?.relative;
        let b = check_q_solution(&pt, &x0, t, 2.0 * h, false)?.relative;
        order = order.min(observed_order(a, b, 4.0 * h, 2.0 * h));
    }
    Ok(QSweep {
        worst_residual: worst,
        min_order: order,
    })
}

/// Largest standard score of one-step covariances over random points.
pub fn covariance_sweep<E: Executor>(
    points: usize,
    draws: usize,
    ns: &[usize],
    seed: u64,
    exec: &E,
) -> (f64, usize) {
    let res = exec.map(points, |p| {
        let n = ns[p % ns.len()];
        let pt = SfpPoint::sample(n, PointLimits::default(), &mut stream_rng(seed, p as u64));
        let r = check_covariances(
            &pt,
            draws,
            1e-3,
            &mut stream_rng(seed, (1 << 32) + p as u64),
        );
        (r.max_z, r.comparisons)
    });
    (
        res.iter().map(|r| r.0).fold(0.0, f64::max),
        res.iter().map(|r| r.1).sum(),
    )
}

/// Shared-noise comparison of one Dyson step with direct diagonalization.
#[derive(Clone, Debug, PartialEq)]
pub struct IntegratorComparison {
    pub dts: Vec<f64>,
    /// Largest eigenvalue mismatch over all states, per `dt`.
    pub mismatch: Vec<f64>,
    /// Order between the first and last `dt`.
    pub order: f64,
}

/// Random states `X = S Λ S⁻¹` with `Λ` uniform in the disk of radius `√N`,
/// eigenvector condition below 50 and gaps above `0.1√N`. For each state one
/// normalized noise matrix `G` is drawn; the step `ΔX = √dt G` is applied through
/// the Dyson update and by diagonalizing `X + ΔX`.
pub fn integrator_comparison<E: Executor>(
    n: usize,
    states: usize,
    dts: &[f64],
    seed: u64,
    exec: &E,
) -> CliResult<IntegratorComparison> {
    let per_state = exec.map(states, |s| -> Result<Vec<f64>, Error> {
        let mut rng = stream_rng(seed, s as u64);
        let limits = PointLimits {
            max_condition: 50.0,
            min_gap: 0.1,
        };
        let x = SfpPoint::sample(n, limits, &mut rng)
            .dec
            .reconstruct()
            .scaled(C64::new((n as f64).sqrt(), 0.0));
        let g = ginibre(n, 1.0, &mut rng);
        let dec = eigendecompose(&x, DEFAULT_GAP_FLOOR)?;
        dts.iter()
            .map(|&dt| {
                let dx = g.scaled(C64::new(dt.sqrt(), 0.0));
                let dyson = dyson_update(&dec, &dx, 0.0)?;
                let direct = match_eigenvalues(&dyson.lambdas, &eigenvalues(&x.add(&dx))?);
                Ok(dyson
                    .lambdas
                    .iter()
                    .zip(&direct)
                    .map(|(a, b)| (a - b).norm())
                    .fold(0.0, f64::max))
            })
            .collect()
    });
    let mut mismatch = vec![0.0f64; dts.len()];
    for r in per_state {
        for (m, v) in mismatch.iter_mut().zip(r?) {
            *m = m.max(v);
        }
    }
    let last = dts.len() - 1;
    let order = observed_order(mismatch[0], mismatch[last], dts[0], dts[last]);
    Ok(IntegratorComparison {
        dts: dts.to_vec(),
        mismatch,
        order,
    })
}

/// Largest relative disagreement of the `N×N` and `2N×2N` determinant forms.
pub fn ecp_dual_sweep(cases: usize, max_n: usize, seed: u64) -> CliResult<f64> {
    let mut worst: f64 = 0.0;
    for c in 0..cases {
        let mut rng = stream_rng(seed, c as u64);
        let n = 1 + c % max_n;
        let x = ginibre(n, 1.0 / n as f64, &mut rng);
        let z = uniform_disk(&mut rng, 1.5);
        let w = uniform_disk(&mut rng, 1.0);
        let dec = eigendecompose(&x, DEFAULT_GAP_FLOOR)?;
        let direct = ecp_value(&x, z, w);
        let block = ecp_block_value(&dec, z, w)?;
        worst = worst.max((block - direct).norm() / direct.abs());
    }
    Ok(worst)
}

/// Heat-equation residual settings.
#[derive(Clone, Debug, PartialEq)]
pub struct HeatSetup {
    pub n: usize,
    pub z: C64,
    pub w_grid: GridSpec,
    pub t_grid: Vec<f64>,
    pub stencil: HeatStencil,
    pub trajectories: usize,
    pub seed: u64,
}

impl HeatSetup {
    /// 5×5 `w`-grid on `[0.2, 1.2]²`, `t ∈ {0.5, 1, 1.5}`, steps `0.1` in `w` and `0.05` in `t`.
    pub fn standard(n: usize, trajectories: usize, seed: u64) -> Self {
        HeatSetup {
            n,
            z: C64::new(0.3, 0.1),
            w_grid: GridSpec::new(
                Window {
                    re_min: 0.2,
                    re_max: 1.2,
                    im_min: 0.2,
                    im_max: 1.2,
                },
                5,
                5,
            )
            .expect("valid grid"),
            t_grid: vec![0.5, 1.0, 1.5],
            stencil: HeatStencil { hw: 0.1, ht: 0.05 },
            trajectories,
            seed,
        }
    }

    fn config(&self) -> SimConfig {
        let mut c = SimConfig::new(self.n, Scheme::MatrixBM, 0.05, 0, self.seed);
        if self.n > 1 {
            let vals: Vec<C64> = (0..self.n)
                .map(|k| C64::new(0.4 * (k as f64 / (self.n - 1) as f64) - 0.2, 0.1))
                .collect();
            c.source = SourceSpec::from_values(&vals).expect("distinct finite values");
        }
        c
    }

    /// Residual of the `N = 1` mean `|z − x₀|² + |w|² + v t` on the same nodes.
    pub fn scalar_oracle_residual(&self) -> f64 {
        let v = 1.0;
        let x0 = self.config().source.values()[0];
        let mut worst: f64 = 0.0;
        for &t in &self.t_grid {
            for k in 0..self.w_grid.len() {
                let w = self.w_grid.center_of(k);
                let r = heat_residual_from(
                    |ww, tt| ecp_mean_scalar(self.z, x0, ww, tt, v),
                    w,
                    t,
                    self.stencil,
                    v,
                );
                worst = worst.max(r.abs());
            }
        }
        worst
    }

    pub fn monte_carlo<E: Executor>(&self, exec: &E) -> CliResult<Vec<HeatResidual>> {
        Ok(ecp_heat_residual(
            &self.config(),
            self.z,
            &self.w_grid,
            &self.t_grid,
            self.stencil,
            self.trajectories,
            exec,
        )?)
    }
}

/// Largest `|residual| / stderr` over the nodes.
pub fn max_heat_score(nodes: &[HeatResidual]) -> f64 {
    nodes
        .iter()
        .map(|r| r.residual.abs() / r.stderr)
        .fold(0.0, f64::max)
}

/// Hierarchy residual of exact fields at points `p` with spatial step `h` and
/// time step `h`, compared with a truncation bound from fourth differences.
#[derive(Clone, Debug, PartialEq)]
pub struct HierarchyCheck {
    pub steps: [f64; 2],
    pub residual: [f64; 2],
    pub bound: [f64; 2],
    pub order: f64,
}

fn local_grid(p: C64, h: f64) -> GridSpec {
    let w = Window {
        re_min: p.re - 1.5 * h,
        re_max: p.re + 1.5 * h,
        im_min: p.im - 1.5 * h,
        im_max: p.im + 1.5 * h,
    };
    GridSpec::new(w, 3, 3).expect("valid local grid")
}

/// `∂_τρ − ∂_{zz̄}O` at `p` from a 3×3 stencil of spacing `h` and times `τ ± h`.
fn hierarchy_at(n: usize, tau: f64, p: C64, h: f64, src: &SourceSpec) -> Result<f64, Error> {
    let spec = local_grid(p, h);
    let centre = spec.index(1, 1);
    let meta = || FieldMeta::new("exact", n, tau);
    let taus = [tau - h, tau, tau + h];
    let mut rho = Vec::new();
    let mut o = Vec::new();
    for &t in &taus {
        let mut rv = vec![f64::NAN; spec.len()];
        rv[centre] = density_source(n, t, p, src)?;
        rho.push(FieldGrid::new(spec, rv, vec![0.0; spec.len()], meta())?);
        let mut ov = vec![f64::NAN; spec.len()];
        if t == tau {
            for (ix, iy) in [(1, 1), (0, 1), (2, 1), (1, 0), (1, 2)] {
                ov[spec.index(ix, iy)] = correlator_beta_form(n, t, spec.center(ix, iy), src)?;
            }
        }
        o.push(FieldGrid::new(spec, ov, vec![0.0; spec.len()], meta())?);
    }
    let res = hierarchy_residual(&taus, &rho, &o)?;
    Ok(res[0].1.values[0])
}

/// Leading truncation error `h²/48 (|O_xxxx| + |O_yyyy|) + h²/6 |ρ_τττ|`
/// with derivatives from differences at step `big`, doubled for safety.
fn truncation_bound(
    n: usize,
    tau: f64,
    p: C64,
    h: f64,
    big: f64,
    src: &SourceSpec,
) -> Result<f64, Error> {
    let o = |z: C64| correlator_beta_form(n, tau, z, src);
    let fourth = |dir: C64| -> Result<f64, Error> {
        let v = [
            o(p - dir * 2.0)?,
            o(p - dir)?,
            o(p)?,
            o(p + dir)?,
            o(p + dir * 2.0)?,
        ];
        Ok((v[0] - 4.0 * v[1] + 6.0 * v[2] - 4.0 * v[3] + v[4]) / big.powi(4))
    };
    let oxxxx = fourth(C64::new(big, 0.0))?;
    let oyyyy = fourth(C64::new(0.0, big))?;
    let r = |t: f64| density_source(n, t, p, src);
    let rttt = (r(tau + 2.0 * big)? - 2.0 * r(tau + big)? + 2.0 * r(tau - big)?
        - r(tau - 2.0 * big)?)
        / (2.0 * big.powi(3));
    Ok(2.0 * (h * h / 48.0 * (oxxxx.abs() + oyyyy.abs()) + h * h / 6.0 * rttt.abs()))
}

/// Residuals at `h` and `h/2` over `points`, maximized over points.
pub fn hierarchy_check<E: Executor>(
    n: usize,
    tau: f64,
    points: &[C64],
    h: f64,
    src: &SourceSpec,
    exec: &E,
) -> CliResult<HierarchyCheck> {
    let steps = [h, 0.5 * h];
    let per_point = exec.map(points.len(), |k| -> Result<[f64; 4], Error> {
        let p = points[k];
        let r0 = hierarchy_at(n, tau, p, steps[0], src)?.abs();
        let r1 = hierarchy_at(n, tau, p, steps[1], src)?.abs();
        let b0 = truncation_bound(n, tau, p, steps[0], 2.0 * h, src)?;
        let b1 = truncation_bound(n, tau, p, steps[1], 2.0 * h, src)?;
        Ok([r0, r1, b0, b1])
    });
    let mut acc = [0.0f64; 4];
    let mut margin = [f64::INFINITY; 2];
    for r in per_point {
        let r = r?;
        for (a, v) in acc.iter_mut().zip(r) {
            *a = a.max(v);
        }
        margin[0] = margin[0].min(r[2] - r[0]);
        margin[1] = margin[1].min(r[3] - r[1]);
    }
    // report the bound as the residual plus the tightest pointwise margin
    let bound = [acc[0] + margin[0], acc[1] + margin[1]];
    Ok(HierarchyCheck {
        steps,
        residual: [acc[0], acc[1]],
        bound,
        order: observed_order(acc[0], acc[1], steps[0], steps[1]),
    })
}

/// Ginibre bulk forms `ρ = 1/(πτ)` and `O = (τ − |z|²)/(πτ²)`: returns `∂_τρ`
/// and the five-point `∂_{zz̄}O`, which is exact for the quadratic `O`.
pub fn bulk_hierarchy_sides(tau: f64, z: C64, h: f64) -> (f64, f64) {
    let o = |w: C64| (tau - w.norm_sqr()) / (std::f64::consts::PI * tau * tau);
    let lap = (o(z + h) + o(z - h) + o(z + C64::new(0.0, h)) + o(z - C64::new(0.0, h))
        - 4.0 * o(z))
        / (4.0 * h * h);
    (-1.0 / (std::f64::consts::PI * tau * tau), lap)
}

/// Ginibre closed forms against the exact evaluators at a few points.
pub fn ginibre_consistency(n: usize, tau: f64) -> CliResult<f64> {
    let src = SourceSpec::null(n);
    let mut worst: f64 = 0.0;
    for r in [0.13, 0.5, 0.9, 1.2] {
        let z = C64::new(r * 0.6, r * 0.8) * tau.sqrt();
        let b = correlator_beta_form(n, tau, z, &src)?;
        worst = worst.max((b - ginibre_closed_sum(n, tau, z.norm_sqr())).abs());
        let d = density_source(n, tau, z, &src)?;
        worst = worst.max((d - ginibre_density_closed(n, tau, z.norm_sqr())).abs());
    }
    Ok(worst)
}

/// Default evaluation points for hierarchy checks: a 3×3 lattice in `|z| < √τ`.
pub fn hierarchy_points(tau: f64) -> Vec<C64> {
    let s = 0.35 * tau.sqrt();
    (0..9)
        .map(|k| {
            C64::new(
                s * ((k % 3) as f64 - 1.0) + 0.031,
                s * ((k / 3) as f64 - 1.0) + 0.017,
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use gdyn_core::Sequential;

    #[test]
    fn order_of_power_law() {
        assert!((observed_order(4.0, 1.0, 0.2, 0.1) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn small_sweeps_pass() {
        let s = identity_sweep(20, &[2, 3, 4], 1, &Sequential);
        assert!(s.worst_tq < 1e-10 && s.worst_tdq < 1e-10);
        let (z, count) = covariance_sweep(2, 2000, &[2], 1, &Sequential);
        assert!(count > 0 && z.is_finite());
        assert!(ecp_dual_sweep(10, 4, 1).unwrap() < 1e-8);
        assert!(HeatSetup::standard(1, 10, 1).scalar_oracle_residual() < 1e-10);
    }

    #[test]
    fn bulk_forms_balance() {
        let (a, b) = bulk_hierarchy_sides(1.3, C64::new(0.2, -0.4), 0.05);
        assert!((a - b).abs() < 1e-12);
    }
}
