//! Dense complex linear algebra: LU, Schur-based eigendecomposition and overlaps.

mod eigen;
pub mod lu;
mod matrix;
mod overlap;

pub(crate) use eigen::lex_cmp;
pub use eigen::{
    eigendecompose, eigenvalues, min_gap, reconstruct, schur, Gauge, SpectralDecomposition,
    DEFAULT_GAP_FLOOR, TOL_ALG, TOL_RECON,
};
pub use lu::{determinant, inverse, Lu};
pub use matrix::ComplexMatrix;
pub use overlap::{overlap_from_gram, overlap_matrix, Gram, OverlapMatrix, MAX_OVERLAP_CONDITION};
