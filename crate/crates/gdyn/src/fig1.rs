//! Side-by-side runs of the planar Coulomb gas and the matrix Ornstein–Uhlenbeck
//! process, both relaxing to the unit disk.

use gdyn_core::integrators::{
    run_trajectory_with, InitialCondition, Scheme, SimConfig, TrajectorySnapshot,
};
use gdyn_core::stats::{ks_statistic, semicircle_cdf};
use gdyn_core::Executor;

use crate::error::CliResult;
use crate::io::Table;

/// Snapshots entering the histograms and their spacing in steps.
pub const HISTOGRAM_SNAPSHOTS: usize = 40;
pub const HISTOGRAM_INTERVAL: usize = 20;

#[derive(Clone, Debug, PartialEq)]
pub struct Fig1Setup {
    pub n: usize,
    pub dt: f64,
    /// Consecutive steps kept for trajectory plots.
    pub trajectory_steps: usize,
    pub seed: u64,
}

impl Fig1Setup {
    pub fn new(n: usize, trajectory_steps: usize, seed: u64) -> Self {
        Fig1Setup {
            n,
            dt: 0.01,
            trajectory_steps,
            seed,
        }
    }

    /// Both runs start from a Gaussian matrix at the stationary entry variance `1/N`.
    pub fn config(&self, scheme: Scheme) -> SimConfig {
        let mut c = SimConfig::new(self.n, scheme, self.dt, self.total_steps(), self.seed);
        c.initial = InitialCondition::SourcePlusGinibre {
            entry_variance: 1.0 / self.n as f64,
        };
        c
    }

    pub fn total_steps(&self) -> usize {
        (HISTOGRAM_SNAPSHOTS * HISTOGRAM_INTERVAL).max(self.trajectory_steps)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProcessRun {
    pub label: &'static str,
    /// Steps `0..=trajectory_steps`.
    pub trajectory: Vec<TrajectorySnapshot>,
    /// Real parts pooled over the histogram snapshots.
    pub real_parts: Vec<f64>,
    pub ks: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Fig1Result {
    pub coulomb: ProcessRun,
    pub ou: ProcessRun,
}

fn run_one(setup: &Fig1Setup, scheme: Scheme, label: &'static str) -> CliResult<ProcessRun> {
    let cfg = setup.config(scheme);
    let radius = cfg.convention.stationary_radius(setup.n).unwrap_or(1.0);
    let mut trajectory = Vec::new();
    let mut real_parts = Vec::new();
    run_trajectory_with(&cfg, 0, |s| {
        if s.step > 0
            && s.step % HISTOGRAM_INTERVAL == 0
            && s.step / HISTOGRAM_INTERVAL <= HISTOGRAM_SNAPSHOTS
        {
            real_parts.extend(s.eigenvalues.iter().map(|z| z.re));
        }
        if s.step <= setup.trajectory_steps {
            trajectory.push(s);
        }
        Ok(())
    })?;
    let ks = ks_statistic(&real_parts, |x| semicircle_cdf(x, radius));
    Ok(ProcessRun {
        label,
        trajectory,
        real_parts,
        ks,
    })
}

/// Runs both processes (concurrently when the executor allows).
pub fn run_fig1<E: Executor>(setup: &Fig1Setup, exec: &E) -> CliResult<Fig1Result> {
    let mut runs = exec.map(2, |k| {
        if k == 0 {
            run_one(setup, Scheme::Coulomb, "coulomb")
        } else {
            run_one(setup, Scheme::MatrixOU, "matrix-ou")
        }
    });
    let ou = runs.pop().expect("two runs")?;
    let coulomb = runs.pop().expect("two runs")?;
    Ok(Fig1Result { coulomb, ou })
}

/// Normalized histogram of `x` on `[−1, 1]` with the semicircle density alongside.
pub fn real_part_histogram(x: &[f64], bins: usize) -> Table {
    let mut counts = vec![0usize; bins];
    let width = 2.0 / bins as f64;
    for &v in x {
        if (-1.0..=1.0).contains(&v) {
            counts[(((v + 1.0) / width) as usize).min(bins - 1)] += 1;
        }
    }
    let mut t = Table::new(&["x", "density", "semicircle"]);
    for (b, &c) in counts.iter().enumerate() {
        let centre = -1.0 + (b as f64 + 0.5) * width;
        let semi = 2.0 / std::f64::consts::PI * (1.0 - centre * centre).max(0.0).sqrt();
        t.push(vec![centre, c as f64 / (x.len() as f64 * width), semi]);
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;
    use gdyn_core::Sequential;

    #[test]
    fn small_run_shapes() {
        let setup = Fig1Setup::new(2, 30, 5);
        let r = run_fig1(&setup, &Sequential).unwrap();
        assert_eq!(r.coulomb.trajectory.len(), 31);
        assert_eq!(r.ou.real_parts.len(), 2 * HISTOGRAM_SNAPSHOTS);
        let h = real_part_histogram(&r.ou.real_parts, 10);
        let mass: f64 = h.column("density").unwrap().iter().sum::<f64>() * 0.2;
        assert!(mass <= 1.0 + 1e-12);
    }
}
