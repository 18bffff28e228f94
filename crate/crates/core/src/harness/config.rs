use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    MollifySweep,
    WeakConvergence,
    RateRegression,
    GirsanovCrossCheck,
    NovikovReport,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeName {
    #[default]
    NonDegenerate,
    Degenerate,
}

/// One experiment, read from a flat TOML file whose keys are the field names.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub drift_name: String,
    #[serde(default = "defaults::theta")]
    pub theta: f64,
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default = "defaults::n_max")]
    pub n_max: usize,
    #[serde(default = "defaults::tail_bound_tol")]
    pub tail_bound_tol: f64,
    #[serde(default = "defaults::quad_points")]
    pub quad_points: usize,
    #[serde(default = "defaults::reference_name")]
    pub reference_name: String,
    /// Scalar diffusion `σ I`.
    #[serde(default = "defaults::sigma")]
    pub sigma: f64,
    #[serde(default)]
    pub mode: ModeName,
    /// Noise dimension `d`.
    #[serde(default = "defaults::dim")]
    pub dim: usize,
    /// Horizon `T`.
    #[serde(default = "defaults::t", alias = "horizon")]
    pub t: f64,
    #[serde(default = "defaults::delta_levels")]
    pub delta_levels: Vec<f64>,
    #[serde(default)]
    pub epsilon_levels: Option<Vec<f64>>,
    /// Baseline of a mollification sweep; the smallest level when absent.
    #[serde(default)]
    pub baseline_epsilon: Option<f64>,
    #[serde(default = "defaults::n_paths")]
    pub n_paths: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "defaults::test_functions")]
    pub test_functions: Vec<String>,
    /// Initial state; all ones when absent.
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
    /// `η` for the bracket exponents and integrability probes; `8λTd` when absent.
    #[serde(default)]
    pub eta: Option<f64>,
    #[serde(default)]
    pub workers: Option<usize>,
    pub output_path: PathBuf,
}

mod defaults {
    pub fn theta() -> f64 {
        1.0
    }
    pub fn n_max() -> usize {
        10
    }
    pub fn tail_bound_tol() -> f64 {
        1e-3
    }
    pub fn quad_points() -> usize {
        64
    }
    pub fn reference_name() -> String {
        "gaussian".into()
    }
    pub fn sigma() -> f64 {
        1.0
    }
    pub fn dim() -> usize {
        1
    }
    pub fn t() -> f64 {
        1.0
    }
    pub fn delta_levels() -> Vec<f64> {
        (4..=9).map(|k| 0.5f64.powi(k)).collect()
    }
    pub fn n_paths() -> usize {
        100_000
    }
    pub fn test_functions() -> Vec<String> {
        vec!["tanh".into(), "ramp".into()]
    }
}

fn config_error(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| config_error(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config; a relative `output_path` is resolved against the file's directory.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| config_error(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        if cfg.output_path.is_relative() {
            if let Some(dir) = path.parent() {
                cfg.output_path = dir.join(&cfg.output_path);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t > 0.0 && self.t.is_finite()) {
            return Err(config_error("t must be positive"));
        }
        if self.delta_levels.is_empty() {
            return Err(config_error("delta_levels is empty"));
        }
        for w in self.delta_levels.windows(2) {
            if !(w[1] < w[0]) {
                return Err(config_error("delta_levels must be strictly decreasing"));
            }
        }
        for &d in &self.delta_levels {
            if !(d > 0.0 && d <= self.t) {
                return Err(config_error(format!("delta {d} must lie in (0, t]")));
            }
            let k = -d.log2();
            if (k - k.round()).abs() > 1e-12 {
                return Err(config_error(format!("delta {d} is not a power of two")));
            }
        }
        if self.n_paths < 2 {
            return Err(config_error("n_paths must be at least 2"));
        }
        if self.experiment == Experiment::RateRegression {
            if self.n_paths < 1000 {
                return Err(config_error("rate regressions need n_paths >= 1000"));
            }
            if self.delta_levels.len() < 4 {
                return Err(config_error("rate regressions need at least 4 delta levels"));
            }
        }
        if self.experiment == Experiment::MollifySweep {
            let levels = self.epsilon_levels.as_ref().ok_or_else(|| config_error("mollify_sweep needs epsilon_levels"))?;
            if levels.is_empty() || (self.baseline_epsilon.is_none() && levels.len() < 2) {
                return Err(config_error("epsilon_levels needs a baseline and at least one level"));
            }
            for w in levels.windows(2) {
                if !(w[1] < w[0]) {
                    return Err(config_error("epsilon_levels must be strictly decreasing"));
                }
            }
            if let Some(b) = self.baseline_epsilon {
                if !(b > 0.0 && b < *levels.last().unwrap()) {
                    return Err(config_error("baseline_epsilon must be positive and below every level"));
                }
            }
        }
        if self.dim == 0 || self.dim > 8 {
            return Err(config_error("dim must be in 1..=8"));
        }
        if !(self.sigma > 0.0) {
            return Err(config_error("sigma must be positive"));
        }
        if self.test_functions.is_empty() {
            return Err(config_error("test_functions is empty"));
        }
        if self.workers == Some(0) {
            return Err(config_error("workers must be positive"));
        }
        Ok(())
    }

    pub fn state_dim(&self) -> usize {
        match self.mode {
            ModeName::NonDegenerate => self.dim,
            ModeName::Degenerate => 2 * self.dim,
        }
    }

    pub fn initial(&self) -> Result<Vec<f64>> {
        let n = self.state_dim();
        match &self.x0 {
            None => Ok(vec![1.0; n]),
            Some(x) if x.len() == n => Ok(x.clone()),
            Some(x) => Err(config_error(format!("x0 has {} entries, expected {n}", x.len()))),
        }
    }
}
