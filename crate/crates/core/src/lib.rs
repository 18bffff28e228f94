//! Euler-Maruyama simulation of SDEs with singular drifts, Girsanov
//! reweighting against a Gaussian-type reference diffusion, distances
//! between empirical laws, and weak-convergence experiments.
//!
//! The main entry points are:
//!
//! - [`integrator`]: EM schemes (non-degenerate and kinetic), the reference
//!   process and exact Gaussian samplers, all driven by a counter-based
//!   [`model::NoiseSource`] so that different step sizes share one Brownian path.
//! - [`girsanov`]: log Radon-Nikodym weights and importance-sampled expectations.
//! - [`metrics`]: exact 1-d `W1`, a transport LP oracle and bounded-Lipschitz brackets.
//! - [`harness`]: rate regressions, mollification sweeps and the CSV reports
//!   behind the `sde` command line tool.

pub mod drift;
pub mod error;
pub mod girsanov;
pub mod harness;
pub mod integrator;
pub mod metrics;
pub mod model;
pub mod quad;
pub mod stats;

pub use error::{Error, Result};
