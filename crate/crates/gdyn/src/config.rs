//! Source specifications, grid flags and the simulation config file.

use std::fs;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use gdyn_core::grid::{GridSpec, Window};
use gdyn_core::integrators::{InitialCondition, NoiseConvention, NoiseKind, Scheme, SimConfig};
use gdyn_core::linalg::DEFAULT_GAP_FLOOR;
use gdyn_core::{SourceSpec, C64};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Parses `re`, `re,im` or `re im`.
pub fn parse_complex(text: &str) -> CliResult<C64> {
    let parts: Vec<&str> = text
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .collect();
    let num = |s: &str| {
        s.parse::<f64>()
            .map_err(|_| CliError::config(format!("not a number: {s:?}")))
    };
    let z = match parts.as_slice() {
        [re] => C64::new(num(re)?, 0.0),
        [re, im] => C64::new(num(re)?, num(im)?),
        _ => return Err(CliError::config(format!("expected `re,im`, got {text:?}"))),
    };
    if !(z.re.is_finite() && z.im.is_finite()) {
        return Err(CliError::config(format!("non-finite value {text:?}")));
    }
    Ok(z)
}

/// Source text: `null`, `spiric:re,im`, or `re,im;re,im;…`. `null` and
/// `spiric` need the matrix size.
pub fn parse_source(text: &str, n: Option<usize>) -> CliResult<SourceSpec> {
    let text = text.trim();
    let need_n =
        || n.ok_or_else(|| CliError::config(format!("source {text:?} needs an explicit n")));
    let spec = if text == "null" {
        let n = need_n()?;
        if n == 0 {
            return Err(CliError::config("n must be at least 1"));
        }
        SourceSpec::null(n)
    } else if let Some(a) = text.strip_prefix("spiric:") {
        SourceSpec::spiric(need_n()?, parse_complex(a)?)?
    } else {
        let values = text
            .split(';')
            .filter(|s| !s.trim().is_empty())
            .map(parse_complex)
            .collect::<CliResult<Vec<_>>>()?;
        SourceSpec::from_values(&values)?
    };
    check_size(spec, n)
}

/// One complex value per line; blank lines and `#` comments are ignored.
pub fn read_source_file(path: &Path, n: Option<usize>) -> CliResult<SourceSpec> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let values = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .map(parse_complex)
        .collect::<CliResult<Vec<_>>>()
        .map_err(|e| CliError::format(path, e.to_string()))?;
    check_size(SourceSpec::from_values(&values)?, n)
}

fn check_size(spec: SourceSpec, n: Option<usize>) -> CliResult<SourceSpec> {
    match n {
        Some(n) if n != spec.n() => Err(CliError::config(format!(
            "source has {} values but n = {n}",
            spec.n()
        ))),
        _ => Ok(spec),
    }
}

/// Source entries as `(re, im, multiplicity)`.
pub fn source_values(spec: &SourceSpec) -> Vec<(f64, f64, usize)> {
    spec.entries()
        .iter()
        .map(|&(z, m)| (z.re, z.im, m))
        .collect()
}

/// Parses `re_min,re_max,im_min,im_max`.
pub fn parse_window(text: &str) -> CliResult<Window> {
    let v = text
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| CliError::config(format!("bad window bound {s:?}")))
        })
        .collect::<CliResult<Vec<f64>>>()?;
    match v.as_slice() {
        &[re_min, re_max, im_min, im_max] => Ok(Window {
            re_min,
            re_max,
            im_min,
            im_max,
        }),
        _ => Err(CliError::config(
            "window needs four comma-separated numbers",
        )),
    }
}

/// Grid from either an explicit window or a centred square half width.
pub fn grid_from(
    window: Option<&str>,
    half_width: f64,
    nx: usize,
    ny: Option<usize>,
) -> CliResult<GridSpec> {
    let w = match window {
        Some(t) => parse_window(t)?,
        None => Window::square(half_width),
    };
    Ok(GridSpec::new(w, nx, ny.unwrap_or(nx))?)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeName {
    MatrixBm,
    MatrixOu,
    Dyson,
    Coulomb,
}

impl SchemeName {
    pub fn scheme(self) -> Scheme {
        match self {
            SchemeName::MatrixBm => Scheme::MatrixBM,
            SchemeName::MatrixOu => Scheme::MatrixOU,
            SchemeName::Dyson => Scheme::DysonSDE,
            SchemeName::Coulomb => Scheme::Coulomb,
        }
    }
}

/// Source as written in the config file: a text form or a list of `[re, im]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SourceEntry {
    Text(String),
    Values(Vec<[f64; 2]>),
}

/// Every simulation setting, all optional so that files and flags can be layered.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize, clap::Args)]
#[serde(deny_unknown_fields)]
pub struct SimulateSettings {
    /// Matrix size.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, value_enum)]
    pub scheme: Option<SchemeName>,
    /// Time step.
    #[arg(long)]
    pub dt: Option<f64>,
    /// Recorded steps after burn-in.
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub snapshot_every: Option<usize>,
    /// Independent trajectories, one random stream each.
    #[arg(long)]
    pub trajectories: Option<usize>,
    /// `null`, `spiric:re,im` or `re,im;re,im;…`.
    #[arg(long, value_parser = parse_source_entry)]
    pub source: Option<SourceEntry>,
    /// File with one complex source value per line.
    #[arg(long)]
    pub source_file: Option<PathBuf>,
    /// Entry variance of a Gaussian matrix added to the initial condition.
    #[arg(long)]
    pub initial_variance: Option<f64>,
    /// Unrecorded steps before step 0.
    #[arg(long)]
    pub burn_in: Option<usize>,
    #[arg(long)]
    pub record_overlaps: Option<bool>,
    /// Also dump matrices in the binary format.
    #[arg(long)]
    pub record_matrix: Option<bool>,
    #[arg(long)]
    pub gap_floor: Option<f64>,
    /// Entrywise noise variance per unit time (overrides the scheme default).
    #[arg(long)]
    pub variance_rate: Option<f64>,
    /// Linear restoring drift (overrides the scheme default).
    #[arg(long)]
    pub drift_coeff: Option<f64>,
    /// Coulomb pair repulsion (overrides the scheme default).
    #[arg(long)]
    pub interaction: Option<f64>,
}

fn parse_source_entry(s: &str) -> Result<SourceEntry, String> {
    Ok(SourceEntry::Text(s.to_string()))
}

macro_rules! layer {
    ($top:expr, $base:expr, $($f:ident),*) => {
        SimulateSettings { $($f: $top.$f.clone().or_else(|| $base.$f.clone()),)* }
    };
}

impl SimulateSettings {
    pub fn from_toml_file(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        toml::from_str(&text).map_err(|e| CliError::format(path, e.to_string()))
    }

    /// Values from `self`, falling back to `base` field by field.
    pub fn over(&self, base: &SimulateSettings) -> SimulateSettings {
        layer!(
            self,
            base,
            n,
            scheme,
            dt,
            steps,
            seed,
            snapshot_every,
            trajectories,
            source,
            source_file,
            initial_variance,
            burn_in,
            record_overlaps,
            record_matrix,
            gap_floor,
            variance_rate,
            drift_coeff,
            interaction
        )
    }

    /// Fills defaults and validates into a core configuration.
    pub fn resolve(&self) -> CliResult<ResolvedSimulate> {
        let missing = |f: &str| CliError::config(format!("`{f}` is required"));
        let n = self.n.ok_or_else(|| missing("n"))?;
        let scheme = self.scheme.ok_or_else(|| missing("scheme"))?;
        let dt = self.dt.ok_or_else(|| missing("dt"))?;
        let steps = self.steps.ok_or_else(|| missing("steps"))?;
        let no_source = self.source.is_none() && self.source_file.is_none();
        let source = match (&self.source, &self.source_file) {
            (Some(_), Some(_)) => {
                return Err(CliError::config(
                    "give either `source` or `source_file`, not both",
                ))
            }
            (Some(SourceEntry::Text(t)), None) => parse_source(t, Some(n))?,
            (Some(SourceEntry::Values(v)), None) => {
                let vals: Vec<C64> = v.iter().map(|p| C64::new(p[0], p[1])).collect();
                check_size(SourceSpec::from_values(&vals)?, Some(n))?
            }
            (None, Some(p)) => read_source_file(p, Some(n))?,
            (None, None) => SourceSpec::null(n.max(1)),
        };
        let trajectories = self.trajectories.unwrap_or(1);
        if trajectories == 0 {
            return Err(CliError::config("`trajectories` must be at least 1"));
        }
        let mut cfg = SimConfig::new(n, scheme.scheme(), dt, steps, self.seed.unwrap_or(0));
        cfg.source = source;
        cfg.snapshot_every = self.snapshot_every.unwrap_or(1);
        cfg.gap_floor = self.gap_floor.unwrap_or(DEFAULT_GAP_FLOOR);
        cfg.burn_in = self.burn_in.unwrap_or(0);
        cfg.record_overlaps = self.record_overlaps.unwrap_or(false);
        cfg.record_matrix = self.record_matrix.unwrap_or(false);
        if let Some(v) = self.initial_variance.filter(|&v| v > 0.0) {
            cfg.initial = InitialCondition::SourcePlusGinibre { entry_variance: v };
        } else if let Some(v) = self.initial_variance.filter(|v| !(*v >= 0.0)) {
            return Err(CliError::config(format!(
                "`initial_variance` must be nonnegative, got {v}"
            )));
        } else if self.initial_variance.is_none() && no_source && scheme == SchemeName::Coulomb {
            // Coincident charges have no defined force; start from the stationary ensemble.
            cfg.initial = InitialCondition::SourcePlusGinibre {
                entry_variance: 1.0 / n as f64,
            };
        }
        let c = &mut cfg.convention;
        if let Some(v) = self.variance_rate {
            c.variance_rate = v;
        }
        if let Some(v) = self.drift_coeff {
            c.drift_coeff = v;
        }
        if let Some(v) = self.interaction {
            c.interaction = v;
        }
        cfg.validate()?;
        Ok(ResolvedSimulate {
            config: cfg,
            trajectories,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResolvedSimulate {
    pub config: SimConfig,
    pub trajectories: usize,
}

pub fn convention_name(c: &NoiseConvention) -> &'static str {
    match c.kind {
        NoiseKind::RawDiffusion => "raw-diffusion",
        NoiseKind::UnitDiskOU => "unit-disk-ou",
        NoiseKind::CoulombGas => "coulomb-gas",
    }
}

impl ResolvedSimulate {
    /// Fully resolved settings as echoed into the manifest.
    pub fn to_json(&self) -> serde_json::Value {
        let c = &self.config;
        let (initial, initial_variance) = match c.initial {
            InitialCondition::Source => ("source", 0.0),
            InitialCondition::SourcePlusGinibre { entry_variance } => {
                ("source+gaussian", entry_variance)
            }
        };
        serde_json::json!({
            "n": c.n,
            "scheme": format!("{:?}", c.scheme),
            "dt": c.dt,
            "steps": c.steps,
            "seed": c.seed,
            "snapshot_every": c.snapshot_every,
            "trajectories": self.trajectories,
            "source": source_values(&c.source),
            "initial": initial,
            "initial_variance": initial_variance,
            "burn_in": c.burn_in,
            "record_overlaps": c.record_overlaps,
            "record_matrix": c.record_matrix,
            "gap_floor": c.gap_floor,
            "convention": {
                "kind": convention_name(&c.convention),
                "variance_rate": c.convention.variance_rate,
                "drift_coeff": c.convention.drift_coeff,
                "interaction": c.convention.interaction,
            },
        })
    }
}
