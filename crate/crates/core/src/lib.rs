//! Time-changed evolution equations: memory kernels, inverse-subordinator
//! densities, Monte Carlo path sampling and long-time decay analysis.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod density;
pub mod error;
pub mod io;
pub mod kernels;
pub mod laplace;
pub mod models;
pub mod montecarlo;
pub mod quad;
pub mod specfun;

pub use error::{Error, Result};
