//! Drifts and reference systems addressable by name from a config.

use nalgebra::DMatrix;

use super::config::{ExperimentConfig, ModeName};
use crate::drift::{
    kinetic_ou_velocity, mollify, ou_drift_dim, singular_log_drift, singular_log_z, velocity_only, BumpKernel,
    LinearPart,
};
use crate::error::{Error, Result};
use crate::integrator::{LinearGaussianOracle, Mode};
use crate::model::{DiffusionMatrix, DriftField, ReferenceSystem};

/// `(name, parameter keys, description)` of every shipped drift.
pub const DRIFTS: &[(&str, &str, &str)] = &[
    ("ou", "theta", "b(x) = -theta x"),
    ("singular-log", "n_max, tail_bound_tol", "b(x) = sqrt(sum_n log(1 + 1/(x-n)^2)) - x, d = 1"),
    (
        "mollified-singular-log",
        "epsilon, n_max, tail_bound_tol, quad_points",
        "(Z * psi_eps)(x) - x for the log series Z, d = 1",
    ),
    ("kinetic-ou", "theta", "velocity drift -theta x1 - x2, degenerate mode only"),
];

pub const REFERENCES: &[(&str, &str)] =
    &[("gaussian", "V(x) = |x|^2/2 + (d/2) log 2pi, Z0 = -a x"), ("brownian", "Z0 = 0 (Q1 weights only)")];

/// Half-width of the interval on which scalar mollified drifts are tabulated.
const TABLE_HALF_WIDTH: f64 = 12.0;

#[derive(Debug, Clone)]
pub struct Target {
    /// Drift consumed by the scheme (the velocity drift in degenerate mode).
    pub drift: DriftField,
    pub mode: Mode,
    /// Time Hölder exponent used by the rate target `min(1/2, α)`.
    pub alpha: f64,
    /// Exact Gaussian law, for linear drifts.
    pub oracle: Option<LinearGaussianOracle>,
}

#[derive(Debug, Clone)]
pub enum Reference {
    Gaussian(ReferenceSystem),
    Brownian(DiffusionMatrix),
}

impl Reference {
    pub fn diffusion(&self) -> &DiffusionMatrix {
        match self {
            Reference::Gaussian(r) => r.diffusion(),
            Reference::Brownian(d) => d,
        }
    }

    pub fn z0(&self) -> DriftField {
        match self {
            Reference::Gaussian(r) => r.z0().clone(),
            Reference::Brownian(d) => DriftField::zero(d.dim()),
        }
    }

    pub fn system(&self) -> Option<&ReferenceSystem> {
        match self {
            Reference::Gaussian(r) => Some(r),
            Reference::Brownian(_) => None,
        }
    }

    /// `b - Z0` with `b` on the state space of `mode`.
    pub fn perturbation(&self, drift: &DriftField, mode: Mode) -> Result<DriftField> {
        match mode {
            Mode::NonDegenerate => drift.minus(&self.z0()),
            Mode::Degenerate => drift.minus(&velocity_only(self.z0())),
        }
    }
}

fn config_error(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

pub fn diffusion(cfg: &ExperimentConfig) -> Result<DiffusionMatrix> {
    DiffusionMatrix::new(DMatrix::identity(cfg.dim, cfg.dim) * cfg.sigma)
}

pub fn reference(cfg: &ExperimentConfig) -> Result<Reference> {
    let diffusion = diffusion(cfg)?;
    match cfg.reference_name.as_str() {
        "gaussian" => Ok(Reference::Gaussian(ReferenceSystem::standard_gaussian(diffusion)?)),
        "brownian" => Ok(Reference::Brownian(diffusion)),
        other => Err(config_error(format!("unknown reference_name {other:?}"))),
    }
}

/// The log-series part `Z * ψ_ε` alone, tabulated on `[-12, 12]`.
pub fn mollified_log_z(cfg: &ExperimentConfig, epsilon: f64) -> Result<DriftField> {
    let z = singular_log_z(cfg.n_max, cfg.tail_bound_tol)?;
    mollify(z, BumpKernel::new(1), epsilon, cfg.quad_points, LinearPart::Zero)?
        .tabulate(-TABLE_HALF_WIDTH, TABLE_HALF_WIDTH)
}

fn mollified_log_drift(cfg: &ExperimentConfig, epsilon: f64) -> Result<DriftField> {
    let z = singular_log_z(cfg.n_max, cfg.tail_bound_tol)?;
    let f = mollify(z, BumpKernel::new(1), epsilon, cfg.quad_points, LinearPart::NegIdentity)?
        .tabulate(-TABLE_HALF_WIDTH, TABLE_HALF_WIDTH)?;
    Ok(f.named("mollified-singular-log"))
}

/// Builds the target drift named in `cfg`; `epsilon` overrides `cfg.epsilon`.
pub fn target(cfg: &ExperimentConfig, epsilon: Option<f64>) -> Result<Target> {
    let d = cfg.dim;
    let diffusion = diffusion(cfg)?;
    let mode = match cfg.mode {
        ModeName::NonDegenerate => Mode::NonDegenerate,
        ModeName::Degenerate => Mode::Degenerate,
    };
    let scalar_only = |name: &str| -> Result<()> {
        if d != 1 {
            return Err(config_error(format!("{name} is defined for dim = 1 only")));
        }
        Ok(())
    };
    let (field, oracle) = match cfg.drift_name.as_str() {
        "ou" => {
            if !(cfg.theta > 0.0) {
                return Err(config_error("theta must be positive"));
            }
            let f = ou_drift_dim(cfg.theta, d).with_alpha(1.0);
            let oracle = match mode {
                Mode::NonDegenerate => LinearGaussianOracle::ou(cfg.theta, diffusion)?,
                Mode::Degenerate => {
                    let mut a = DMatrix::zeros(2 * d, 2 * d);
                    for i in 0..d {
                        a[(i, d + i)] = 1.0;
                        a[(d + i, d + i)] = -cfg.theta;
                    }
                    LinearGaussianOracle::new(a, diffusion)?
                }
            };
            (f, Some(oracle))
        }
        "kinetic-ou" => {
            if mode != Mode::Degenerate {
                return Err(config_error("kinetic-ou needs mode = \"degenerate\""));
            }
            let oracle = LinearGaussianOracle::kinetic_ou(cfg.theta, diffusion)?;
            return Ok(Target { drift: kinetic_ou_velocity(cfg.theta, d), mode, alpha: 1.0, oracle: Some(oracle) });
        }
        "singular-log" => {
            scalar_only("singular-log")?;
            (singular_log_drift(cfg.n_max, cfg.tail_bound_tol)?, None)
        }
        "mollified-singular-log" => {
            scalar_only("mollified-singular-log")?;
            let eps = epsilon.or(cfg.epsilon).ok_or_else(|| config_error("mollified-singular-log needs epsilon"))?;
            (mollified_log_drift(cfg, eps)?.with_alpha(1.0), None)
        }
        other => return Err(config_error(format!("unknown drift_name {other:?}"))),
    };
    let alpha = field.time_hoelder_alpha.unwrap_or(1.0);
    let drift = match mode {
        Mode::NonDegenerate => field,
        Mode::Degenerate => velocity_only(field),
    };
    Ok(Target { drift, mode, alpha, oracle })
}
