//! Multifidelity Monte Carlo estimation of Sobol' sensitivity indices.
//!
//! The crate bundles Saltelli sampling on an unscrambled Sobol' sequence,
//! single- and multifidelity variance-based estimators, optimal sample
//! allocation, polynomial chaos regression, and two carotid-artery
//! hemodynamics solvers (1D pulse-wave and 0D RC chain) that serve as the
//! high- and low-fidelity models.

// `!(x > 0.0)` is used on purpose so that NaN takes the error branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod campaign;
pub mod error;
pub mod estimators;
pub mod models;
pub mod pce;
pub mod sampling;

pub use error::{Error, Result};
