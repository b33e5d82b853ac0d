//! Command-line front end, file formats and verification suites.

// `!(x > 0.0)` rejects NaN together with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod exec;
pub mod fig1;
pub mod io;
pub mod manifest;
pub mod plot;
pub mod verify;
