//! Concrete drift fields, numerical mollification, integrability probes and
//! the drift-perturbation bound evaluator.

mod bracket;
mod kernel;
mod mollify;
mod probe;
mod singular;
mod standard;

pub use bracket::{bracket_exponents, perturbation_moment, theory_bound_bracket, BracketQuadrature};
pub use kernel::BumpKernel;
pub use mollify::{mollify, LinearPart, MollifiedDrift};
pub use probe::{integrability_probe, sup_integrability_probe, ProbeReport};
pub use singular::{singular_log_drift, singular_log_z, LogSeries};
pub use standard::{kinetic_drift, kinetic_ou_velocity, ou_drift, ou_drift_dim, velocity_only};
