//! Numerical core for diffusing non-Hermitian random matrices.
//!
//! Everything here is `no_std` with `alloc`; IO and thread pools live in the
//! companion `gdyn` crate.
#![no_std]
// `!(x > 0.0)` rejects NaN together with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod asymptotics;
pub mod error;
pub mod exact;
pub mod exec;
pub mod grid;
pub mod integrators;
pub mod linalg;
pub mod observables;
pub mod quadrature;
pub mod rng;
pub mod sfp;
pub mod source;
pub mod special;
pub mod stats;

pub use error::{Error, Result};
pub use exec::{Executor, Sequential};
pub use num_complex::Complex64 as C64;
pub use source::SourceSpec;
