use alloc::string::String;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("input contains NaN or infinite entries")]
    NonFinite,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("degenerate spectrum: minimal eigenvalue gap {min_gap:e} is below {floor:e}")]
    DegenerateSpectrum { min_gap: f64, floor: f64 },
    #[error("matrix is numerically singular")]
    Singular,
    #[error("overlap matrix is numerically singular (condition estimate {condition:e})")]
    SingularOverlap { condition: f64 },
    #[error("eigenvalue iteration failed to converge")]
    NoConvergence,
    #[error("decomposition residual {residual:e} exceeds tolerance")]
    InaccurateDecomposition { residual: f64 },
    #[error("eigenvalue gap collapsed to {min_gap:e} (floor {floor:e})")]
    GapCollapse { min_gap: f64, floor: f64 },
    #[error("at step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: alloc::boxed::Box<Error>,
    },
    #[error("no eigenvalue falls inside the grid window")]
    EmptyWindow,
    #[error("grids do not match: {0}")]
    GridMismatch(String),
    #[error("grid has {cells} cells per factor, at most {max} allowed")]
    GridTooLarge { cells: usize, max: usize },
    #[error("evaluation point is too close to a source value (|a - z|^2 = {distance2:e})")]
    PoleCollision { distance2: f64 },
    #[error("quadrature did not converge: {0}")]
    QuadratureNonConverged(String),
    #[error("integration tail estimate {tail:e} exceeds tolerance")]
    TruncationError { tail: f64 },
    #[error("log-determinant variance {variance:e} exceeds threshold; regulator |w| too small")]
    RegulatorTooSmall { variance: f64 },
    #[error("finite-difference step too large: Richardson disagreement {disagreement:e}")]
    StepTooLarge { disagreement: f64 },
    #[error("unsupported dimension {n}: {reason}")]
    UnsupportedDimension { n: usize, reason: &'static str },
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },
}

impl Error {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field,
            reason: reason.into(),
        }
    }

    pub fn at_step(self, step: usize) -> Self {
        Error::AtStep {
            step,
            source: alloc::boxed::Box::new(self),
        }
    }

    /// Innermost error, with step annotations removed.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtStep { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T> = core::result::Result<T, Error>;
