//! Euler–Maruyama steppers for matrix Brownian motion, matrix Ornstein–Uhlenbeck,
//! the eigenvalue/eigenvector SDE and the planar Coulomb gas.

use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{
    eigendecompose, eigenvalues, inverse, min_gap, overlap_matrix, ComplexMatrix, Gauge,
    SpectralDecomposition, DEFAULT_GAP_FLOOR,
};
use crate::rng::{complex_normal, ginibre, stream_rng, StreamRng};
use crate::source::SourceSpec;
use crate::C64;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NoiseKind {
    RawDiffusion,
    UnitDiskOU,
    CoulombGas,
}

/// Explicit noise normalization: `⟨dX_ij dX̄_kl⟩ = variance_rate δ_ik δ_jl dt`,
/// linear restoring drift `−drift_coeff · X dt`, and (Coulomb only) pair
/// repulsion strength `interaction`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseConvention {
    pub kind: NoiseKind,
    pub variance_rate: f64,
    pub drift_coeff: f64,
    pub interaction: f64,
}

impl NoiseConvention {
    /// Unit-rate free diffusion; the spectrum at time `t` fills a disk of radius `√(N t)`.
    pub fn raw_diffusion() -> Self {
        NoiseConvention {
            kind: NoiseKind::RawDiffusion,
            variance_rate: 1.0,
            drift_coeff: 0.0,
            interaction: 0.0,
        }
    }

    /// Drift ¼ and entry variance rate `1/(2N)`.
    pub fn unit_disk_ou(n: usize) -> Self {
        NoiseConvention {
            kind: NoiseKind::UnitDiskOU,
            variance_rate: 1.0 / (2.0 * n as f64),
            drift_coeff: 0.25,
            interaction: 0.0,
        }
    }

    /// Complex noise of variance `2/N` per unit time, confinement 2, repulsion `2/N`.
    pub fn coulomb_gas(n: usize) -> Self {
        NoiseConvention {
            kind: NoiseKind::CoulombGas,
            variance_rate: 2.0 / n as f64,
            drift_coeff: 2.0,
            interaction: 2.0 / n as f64,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.variance_rate > 0.0 && self.variance_rate.is_finite()) {
            return Err(Error::invalid(
                "variance_rate",
                "must be positive and finite",
            ));
        }
        if !self.drift_coeff.is_finite() || !self.interaction.is_finite() {
            return Err(Error::invalid("drift_coeff", "must be finite"));
        }
        match self.kind {
            NoiseKind::RawDiffusion if self.drift_coeff != 0.0 => {
                Err(Error::invalid("drift_coeff", "free diffusion has no drift"))
            }
            NoiseKind::UnitDiskOU | NoiseKind::CoulombGas if self.drift_coeff <= 0.0 => Err(
                Error::invalid("drift_coeff", "a confining drift must be positive"),
            ),
            _ => Ok(()),
        }
    }

    /// Stationary `E|X_ij|²` of the matrix OU process.
    pub fn stationary_entry_variance(&self) -> Option<f64> {
        (self.drift_coeff > 0.0).then(|| self.variance_rate / (2.0 * self.drift_coeff))
    }

    /// Radius of the stationary spectral support, derived from the stored parameters.
    pub fn stationary_radius(&self, n: usize) -> Option<f64> {
        match self.kind {
            NoiseKind::RawDiffusion => None,
            NoiseKind::UnitDiskOU => self
                .stationary_entry_variance()
                .map(|v| (n as f64 * v).sqrt()),
            NoiseKind::CoulombGas => Some((self.interaction * n as f64 / self.drift_coeff).sqrt()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scheme {
    MatrixBM,
    MatrixOU,
    DysonSDE,
    Coulomb,
}

/// Starting matrix: `diag(source)`, optionally plus a Gaussian matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum InitialCondition {
    Source,
    SourcePlusGinibre { entry_variance: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    pub n: usize,
    pub scheme: Scheme,
    pub dt: f64,
    pub steps: usize,
    pub seed: u64,
    pub convention: NoiseConvention,
    pub source: SourceSpec,
    pub snapshot_every: usize,
    pub gap_floor: f64,
    pub initial: InitialCondition,
    /// Unrecorded steps taken before step 0.
    pub burn_in: usize,
    pub record_overlaps: bool,
    pub record_matrix: bool,
}

impl SimConfig {
    pub fn new(n: usize, scheme: Scheme, dt: f64, steps: usize, seed: u64) -> Self {
        let convention = match scheme {
            Scheme::MatrixBM | Scheme::DysonSDE => NoiseConvention::raw_diffusion(),
            Scheme::MatrixOU => NoiseConvention::unit_disk_ou(n),
            Scheme::Coulomb => NoiseConvention::coulomb_gas(n),
        };
        SimConfig {
            n,
            scheme,
            dt,
            steps,
            seed,
            convention,
            source: SourceSpec::null(n),
            snapshot_every: 1,
            gap_floor: DEFAULT_GAP_FLOOR,
            initial: InitialCondition::Source,
            burn_in: 0,
            record_overlaps: false,
            record_matrix: false,
        }
    }

    pub fn final_time(&self) -> f64 {
        self.dt * (self.steps + self.burn_in) as f64
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::invalid("n", "must be at least 1"));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::invalid("dt", "must be positive and finite"));
        }
        if self.snapshot_every == 0 {
            return Err(Error::invalid("snapshot_every", "must be at least 1"));
        }
        if self.source.n() != self.n {
            return Err(Error::invalid(
                "source",
                alloc::format!("has {} values but n = {}", self.source.n(), self.n),
            ));
        }
        if !(self.gap_floor >= 0.0) {
            return Err(Error::invalid("gap_floor", "must be nonnegative"));
        }
        if let InitialCondition::SourcePlusGinibre { entry_variance } = self.initial {
            if !(entry_variance >= 0.0 && entry_variance.is_finite()) {
                return Err(Error::invalid(
                    "initial",
                    "entry variance must be nonnegative",
                ));
            }
        }
        if self.record_matrix && matches!(self.scheme, Scheme::Coulomb) {
            return Err(Error::invalid(
                "record_matrix",
                "the Coulomb scheme carries no matrix",
            ));
        }
        self.convention.validate()?;
        let expected = match self.scheme {
            Scheme::MatrixBM | Scheme::DysonSDE => self.convention.drift_coeff == 0.0,
            Scheme::MatrixOU => self.convention.kind != NoiseKind::CoulombGas,
            Scheme::Coulomb => self.convention.kind == NoiseKind::CoulombGas,
        };
        if !expected {
            return Err(Error::invalid(
                "convention",
                "incompatible with the chosen scheme",
            ));
        }
        Ok(())
    }
}

/// Exactly one representation per scheme.
#[derive(Clone, Debug)]
pub enum Representation {
    Matrix(ComplexMatrix),
    Spectral(SpectralDecomposition),
    Particles(Vec<C64>),
}

#[derive(Clone, Debug)]
pub struct TrajectoryState {
    pub time: f64,
    pub repr: Representation,
    pub rng: StreamRng,
}

impl TrajectoryState {
    /// Initial state for trajectory `stream`.
    pub fn initial(config: &SimConfig, stream: u64) -> Result<Self> {
        let mut rng = stream_rng(config.seed, stream);
        let mut x0 = ComplexMatrix::from_diag(&config.source.values());
        if let InitialCondition::SourcePlusGinibre { entry_variance } = config.initial {
            x0 = x0.add(&ginibre(config.n, entry_variance, &mut rng));
        }
        let repr = match config.scheme {
            Scheme::MatrixBM | Scheme::MatrixOU => Representation::Matrix(x0),
            Scheme::DysonSDE => {
                let mut dec = eigendecompose(&x0, config.gap_floor)?;
                dec.gauge = Gauge::Trajectory;
                Representation::Spectral(dec)
            }
            Scheme::Coulomb => {
                let lambdas = if matches!(config.initial, InitialCondition::Source) {
                    x0.diag()
                } else {
                    eigenvalues(&x0)?
                };
                let gap = min_gap(&lambdas);
                if gap < config.gap_floor {
                    return Err(Error::DegenerateSpectrum {
                        min_gap: gap,
                        floor: config.gap_floor,
                    });
                }
                Representation::Particles(lambdas)
            }
        };
        Ok(TrajectoryState {
            time: 0.0,
            repr,
            rng,
        })
    }

    pub fn step(&mut self, config: &SimConfig) -> Result<()> {
        let conv = &config.convention;
        let dt = config.dt;
        match (&mut self.repr, config.scheme) {
            (Representation::Matrix(x), Scheme::MatrixBM) => {
                step_matrix_bm(x, conv, dt, &mut self.rng)
            }
            (Representation::Matrix(x), Scheme::MatrixOU) => {
                step_matrix_ou(x, conv, dt, &mut self.rng)
            }
            (Representation::Spectral(dec), Scheme::DysonSDE) => {
                step_dyson(dec, conv, dt, config.gap_floor, &mut self.rng)?
            }
            (Representation::Particles(l), Scheme::Coulomb) => {
                step_coulomb(l, conv, dt, config.gap_floor, &mut self.rng)?
            }
            _ => {
                return Err(Error::invalid(
                    "scheme",
                    "state representation does not match the scheme",
                ))
            }
        }
        self.time += dt;
        Ok(())
    }

    /// Current eigenvalues (unsorted for tracked representations).
    pub fn eigenvalues(&self) -> Result<Vec<C64>> {
        match &self.repr {
            Representation::Matrix(x) => eigenvalues(x),
            Representation::Spectral(dec) => Ok(dec.lambdas.clone()),
            Representation::Particles(l) => Ok(l.clone()),
        }
    }
}

/// Raw complex Gaussian increment with `⟨|ΔX_ij|²⟩ = variance_rate · dt`.
pub fn raw_increment<R: Rng + ?Sized>(
    n: usize,
    conv: &NoiseConvention,
    dt: f64,
    rng: &mut R,
) -> ComplexMatrix {
    ginibre(n, conv.variance_rate * dt, rng)
}

pub fn step_matrix_bm<R: Rng + ?Sized>(
    x: &mut ComplexMatrix,
    conv: &NoiseConvention,
    dt: f64,
    rng: &mut R,
) {
    let dx = raw_increment(x.n(), conv, dt, rng);
    for (xi, di) in x.as_mut_slice().iter_mut().zip(dx.as_slice()) {
        *xi += di;
    }
}

pub fn step_matrix_ou<R: Rng + ?Sized>(
    x: &mut ComplexMatrix,
    conv: &NoiseConvention,
    dt: f64,
    rng: &mut R,
) {
    let dx = raw_increment(x.n(), conv, dt, rng);
    let decay = conv.drift_coeff * dt;
    for (xi, di) in x.as_mut_slice().iter_mut().zip(dx.as_slice()) {
        *xi = *xi - *xi * decay + di;
    }
}

/// First-order eigenvalue and eigenvector increments for a matrix increment `dx`.
///
/// Returns `(Δλ, ΔS)` with `Δλ_i = δX_ii` and `ΔS_ij = Σ_{l≠j} S_il δX_lj / (λ_j − λ_l)`
/// where `δX = S⁻¹ dx S`.
pub fn dyson_deltas(dec: &SpectralDecomposition, dx: &ComplexMatrix) -> (Vec<C64>, ComplexMatrix) {
    let n = dec.n();
    let rotated = dec.s_inv.matmul(dx).matmul(&dec.s);
    let dl = rotated.diag();
    // W_lj = δX_lj / (λ_j − λ_l), zero diagonal
    let w = ComplexMatrix::from_fn(n, |l, j| {
        if l == j {
            C64::new(0.0, 0.0)
        } else {
            rotated[(l, j)] / (dec.lambdas[j] - dec.lambdas[l])
        }
    });
    (dl, dec.s.matmul(&w))
}

/// Eigenvalue and eigenvector increments to second order in `dx`.
///
/// With `δX = S⁻¹ dx S` and `d_ij = λ_j − λ_i`:
/// `Δλ_i = δX_ii + Σ_{k≠i} δX_ik δX_ki / (λ_i − λ_k)` and, for `i ≠ j`,
/// `δS_ij = δX_ij/d_ij + Σ_{k≠j} δX_ik δX_kj / (d_ij d_kj) − δX_ij δX_jj / d_ij²`,
/// `δS_ii = 0`, returned as `ΔS = S δS`.
pub fn dyson_deltas_second_order(
    dec: &SpectralDecomposition,
    dx: &ComplexMatrix,
) -> (Vec<C64>, ComplexMatrix) {
    let n = dec.n();
    let r = dec.s_inv.matmul(dx).matmul(&dec.s);
    let l = &dec.lambdas;
    let dl = (0..n)
        .map(|i| {
            r[(i, i)]
                + (0..n)
                    .filter(|&k| k != i)
                    .map(|k| r[(i, k)] * r[(k, i)] / (l[i] - l[k]))
                    .sum::<C64>()
        })
        .collect();
    let w = ComplexMatrix::from_fn(n, |i, j| {
        if i == j {
            return C64::new(0.0, 0.0);
        }
        let dij = l[j] - l[i];
        let second: C64 = (0..n)
            .filter(|&k| k != j)
            .map(|k| r[(i, k)] * r[(k, j)] / (l[j] - l[k]))
            .sum();
        r[(i, j)] / dij + second / dij - r[(i, j)] * r[(j, j)] / (dij * dij)
    });
    (dl, dec.s.matmul(&w))
}

/// Applies a given matrix increment to a tracked decomposition, to second order.
pub fn dyson_update(
    dec: &SpectralDecomposition,
    dx: &ComplexMatrix,
    gap_floor: f64,
) -> Result<SpectralDecomposition> {
    if dec.min_gap < gap_floor {
        return Err(Error::GapCollapse {
            min_gap: dec.min_gap,
            floor: gap_floor,
        });
    }
    let (dl, ds) = dyson_deltas_second_order(dec, dx);
    let lambdas: Vec<C64> = dec.lambdas.iter().zip(&dl).map(|(l, d)| l + d).collect();
    let gap = min_gap(&lambdas);
    if gap < gap_floor {
        return Err(Error::GapCollapse {
            min_gap: gap,
            floor: gap_floor,
        });
    }
    let s = dec.s.add(&ds);
    let s_inv = inverse(&s)?;
    if !s_inv.is_finite() {
        return Err(Error::NonFinite);
    }
    Ok(SpectralDecomposition {
        lambdas,
        s,
        s_inv,
        gauge: Gauge::Trajectory,
        min_gap: gap,
    })
}

/// One step of the eigenvalue/eigenvector SDE; on error the state is left untouched.
pub fn step_dyson<R: Rng + ?Sized>(
    dec: &mut SpectralDecomposition,
    conv: &NoiseConvention,
    dt: f64,
    gap_floor: f64,
    rng: &mut R,
) -> Result<()> {
    let dx = raw_increment(dec.n(), conv, dt, rng);
    *dec = dyson_update(dec, &dx, gap_floor)?;
    Ok(())
}

/// Euler–Maruyama step of the planar Coulomb gas
/// `dλ_j = noise − κ Σ_{k≠j} (λ_k − λ_j)/|λ_k − λ_j|² dt − γ λ_j dt`.
pub fn step_coulomb<R: Rng + ?Sized>(
    lambdas: &mut [C64],
    conv: &NoiseConvention,
    dt: f64,
    gap_floor: f64,
    rng: &mut R,
) -> Result<()> {
    let n = lambdas.len();
    let mut next = Vec::with_capacity(n);
    let mut gap = f64::INFINITY;
    for j in 0..n {
        let lj = lambdas[j];
        let mut repulsion = C64::new(0.0, 0.0);
        for (k, &lk) in lambdas.iter().enumerate() {
            if k != j {
                let d = lk - lj;
                let d2 = d.norm_sqr();
                gap = gap.min(d2.sqrt());
                repulsion += d / d2;
            }
        }
        let drift = -repulsion * conv.interaction - lj * conv.drift_coeff;
        next.push(lj + drift * dt);
    }
    if gap < gap_floor {
        return Err(Error::GapCollapse {
            min_gap: gap,
            floor: gap_floor,
        });
    }
    for v in next.iter_mut() {
        *v += complex_normal(rng, conv.variance_rate * dt);
    }
    let new_gap = min_gap(&next);
    if new_gap < gap_floor {
        return Err(Error::GapCollapse {
            min_gap: new_gap,
            floor: gap_floor,
        });
    }
    lambdas.copy_from_slice(&next);
    Ok(())
}

/// Reorders `current` so entry `i` continues `previous[i]`.
///
/// Greedy nearest-neighbour assignment over all pairs, ties broken by the
/// lexicographic position of the previous and then the current eigenvalue.
pub fn match_eigenvalues(previous: &[C64], current: &[C64]) -> Vec<C64> {
    let n = previous.len();
    assert_eq!(n, current.len(), "matching needs equal lengths");
    let mut prev_rank: Vec<usize> = (0..n).collect();
    prev_rank.sort_by(|&a, &b| crate::linalg::lex_cmp(previous[a], previous[b]));
    let mut cur_rank: Vec<usize> = (0..n).collect();
    cur_rank.sort_by(|&a, &b| crate::linalg::lex_cmp(current[a], current[b]));
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(n * n);
    for (pi, &p) in prev_rank.iter().enumerate() {
        for (ci, &c) in cur_rank.iter().enumerate() {
            pairs.push(((previous[p] - current[c]).norm(), pi, ci));
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut used_prev = alloc::vec![false; n];
    let mut used_cur = alloc::vec![false; n];
    let mut out = alloc::vec![C64::new(0.0, 0.0); n];
    let mut left = n;
    for (_, pi, ci) in pairs {
        if left == 0 {
            break;
        }
        if !used_prev[pi] && !used_cur[ci] {
            used_prev[pi] = true;
            used_cur[ci] = true;
            out[prev_rank[pi]] = current[cur_rank[ci]];
            left -= 1;
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectorySnapshot {
    pub step: usize,
    pub time: f64,
    pub eigenvalues: Vec<C64>,
    pub overlaps_diag: Option<Vec<f64>>,
    pub matrix: Option<ComplexMatrix>,
}

fn snapshot(
    state: &TrajectoryState,
    config: &SimConfig,
    step: usize,
    previous: Option<&[C64]>,
) -> Result<TrajectorySnapshot> {
    let (mut eigs, mut diag) = match (&state.repr, config.record_overlaps) {
        (Representation::Matrix(x), true) => {
            let dec = eigendecompose(x, config.gap_floor)?;
            let ov = overlap_matrix(&dec)?;
            (dec.lambdas, Some(ov.diag_real))
        }
        (Representation::Spectral(dec), true) => {
            (dec.lambdas.clone(), Some(overlap_matrix(dec)?.diag_real))
        }
        _ => (state.eigenvalues()?, None),
    };
    if let (Representation::Matrix(_), Some(prev)) = (&state.repr, previous) {
        let matched = match_eigenvalues(prev, &eigs);
        if let Some(d) = diag.as_mut() {
            let reordered = matched
                .iter()
                .map(|m| {
                    d[eigs
                        .iter()
                        .position(|e| e == m)
                        .expect("matched value comes from the input")]
                })
                .collect();
            *d = reordered;
        }
        eigs = matched;
    }
    let matrix = match (&state.repr, config.record_matrix) {
        (Representation::Matrix(x), true) => Some(x.clone()),
        (Representation::Spectral(dec), true) => Some(dec.reconstruct()),
        _ => None,
    };
    Ok(TrajectorySnapshot {
        step,
        time: state.time,
        eigenvalues: eigs,
        overlaps_diag: diag,
        matrix,
    })
}

/// Runs one trajectory, handing each snapshot to `sink` as it is produced.
pub fn run_trajectory_with(
    config: &SimConfig,
    stream: u64,
    mut sink: impl FnMut(TrajectorySnapshot) -> Result<()>,
) -> Result<()> {
    config.validate()?;
    let mut state = TrajectoryState::initial(config, stream)?;
    for b in 0..config.burn_in {
        state.step(config).map_err(|e| e.at_step(b))?;
    }
    let first = snapshot(&state, config, 0, None)?;
    let mut previous = first.eigenvalues.clone();
    sink(first)?;
    for step in 1..=config.steps {
        state
            .step(config)
            .map_err(|e| e.at_step(config.burn_in + step))?;
        if step % config.snapshot_every == 0 {
            let snap =
                snapshot(&state, config, step, Some(&previous)).map_err(|e| e.at_step(step))?;
            previous.clone_from(&snap.eigenvalues);
            sink(snap)?;
        }
    }
    Ok(())
}

/// Runs one trajectory and collects its snapshots (the initial state is snapshot 0).
pub fn run_trajectory(config: &SimConfig, stream: u64) -> Result<Vec<TrajectorySnapshot>> {
    let mut out = Vec::new();
    run_trajectory_with(config, stream, |s| {
        out.push(s);
        Ok(())
    })?;
    Ok(out)
}
