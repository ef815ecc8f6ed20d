//! Numerical laboratory for martingale CLT convergence-rate bounds:
//! explicit Kolmogorov and Wasserstein-1 bounds, Stein-equation machinery,
//! Monte-Carlo and exact distance estimation, and a branching-process-in-
//! random-environment application.

pub mod bounds;
pub mod bpre;
pub mod core;
pub mod distances;
pub mod error;
pub mod experiments;
pub mod models;
pub mod normal;
pub mod stein;
pub mod rng;

pub use error::{Error, Result};
