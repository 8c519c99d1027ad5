//! Nonlinear Darcy-Forchheimer flow in fractured porous media.
//!
//! Fine-grid reference solver: cell-centered finite volumes on a uniform
//! rectangular mesh coupled to lower-dimensional fracture segments through an
//! embedded fracture model. Coarse solver: non-local multi-continuum (NLMC)
//! reduction whose basis functions are built by constrained energy
//! minimization on oversampled coarse regions. The crate also ships the batch
//! harness for error-versus-oversampling and error-versus-nonlinearity
//! studies.

pub mod assembly;
pub mod basis;
pub mod coarse_solver;
pub mod config;
pub mod error;
pub mod fine_solver;
pub mod geometry;
pub mod io;
pub mod metrics;
pub mod sparse;
pub mod sweep;
pub mod testcase;

pub use error::{Error, Result};
