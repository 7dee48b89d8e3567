// Negated float comparisons are deliberate: NaN must fail range checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Simulator and diagnostics for the one-dimensional compressible
//! Navier-Stokes equations of a viscous, heat-conducting ideal gas in
//! Lagrangian mass coordinates, with constant viscosity and heat
//! conductivity `κ = κ̃ θ^β`.
//!
//! The crate is organised bottom-up:
//!
//! - [`domain`]: grid, physical parameters, states and initial-data builders.
//! - [`solver`]: staggered-grid right-hand side, IMEX and explicit steppers,
//!   trajectory driver and manufactured solutions.
//! - [`functionals`]: entropy, dissipation, moments, norms and the per-sample
//!   diagnostics record.
//! - [`representation`]: online evaluation of the closed-form representation
//!   of the specific volume, used as an independent accuracy check.
//! - [`analysis`]: decay-rate fits, bound certificates, convergence orders.
//! - [`cli_io`]: configuration, scenario execution, file output and the
//!   verification driver.

pub mod analysis;
pub mod cli_io;
pub mod domain;
pub mod error;
pub mod functionals;
pub mod representation;
pub mod solver;
pub(crate) mod tridiag;

pub use error::{Error, Result};
