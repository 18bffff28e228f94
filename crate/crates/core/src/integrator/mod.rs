//! Euler-Maruyama schemes, the reference process, and exact Gaussian samplers.
//!
//! Every scheme reads its Brownian increments from a [`NoiseSource`] on a
//! noise grid that may be finer than the scheme's own grid; a coarse increment
//! is then the left-to-right sum of the fine increments it spans, so schemes
//! at different step sizes see the same Brownian path.

mod coupled;
mod exact;

pub use coupled::{simulate_coupled, CoupledLevels};
pub use exact::{exact_ou_sampler, GaussianLaw, LinearGaussianOracle};

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::model::{
    norm, DiffusionMatrix, DriftField, NoiseSource, PathEnsemble, PathStatus, Recording, ReferenceSystem, SchemeTag,
    TimeGrid,
};
use crate::drift::velocity_only;

/// States with norm above this are treated as divergent.
pub const DIVERGENCE_THRESHOLD: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    NonDegenerate,
    /// Kinetic pair `dX1 = X2 dt`, `dX2 = b dt + σ dW` on `R^{2d}`.
    Degenerate,
}

#[derive(Debug, Clone)]
pub struct SchemeConfig {
    pub grid: TimeGrid,
    pub n_paths: usize,
    pub initial: Vec<f64>,
    /// `b: R^d -> R^d`, or the velocity drift `R^{2d} -> R^d` in degenerate mode.
    pub drift: DriftField,
    pub diffusion: DiffusionMatrix,
    pub noise: NoiseSource,
    pub mode: Mode,
    pub recording: Recording,
    /// Grid the Brownian increments are drawn on; defaults to `grid`.
    pub noise_grid: Option<TimeGrid>,
}

impl SchemeConfig {
    pub fn new(
        grid: TimeGrid,
        n_paths: usize,
        initial: Vec<f64>,
        drift: DriftField,
        diffusion: DiffusionMatrix,
        seed: u64,
    ) -> Self {
        let noise = NoiseSource::new(seed, diffusion.dim());
        Self {
            grid,
            n_paths,
            initial,
            drift,
            diffusion,
            noise,
            mode: Mode::NonDegenerate,
            recording: Recording::Full,
            noise_grid: None,
        }
    }

    pub fn degenerate(mut self) -> Self {
        self.mode = Mode::Degenerate;
        self
    }

    pub fn with_recording(mut self, recording: Recording) -> Self {
        self.recording = recording;
        self
    }

    pub fn with_noise_grid(mut self, fine: TimeGrid) -> Self {
        self.noise_grid = Some(fine);
        self
    }

    pub fn with_grid(mut self, grid: TimeGrid) -> Self {
        self.grid = grid;
        self
    }

    pub fn with_drift(mut self, drift: DriftField) -> Self {
        self.drift = drift;
        self
    }

    /// Noise dimension `d`.
    pub fn noise_dim(&self) -> usize {
        self.diffusion.dim()
    }

    /// State dimension: `d`, or `2d` in degenerate mode.
    pub fn state_dim(&self) -> usize {
        match self.mode {
            Mode::NonDegenerate => self.noise_dim(),
            Mode::Degenerate => 2 * self.noise_dim(),
        }
    }

    pub fn noise_grid(&self) -> TimeGrid {
        self.noise_grid.unwrap_or(self.grid)
    }

    /// Checks dimensions and returns the number of noise steps per scheme step.
    pub fn validate(&self) -> Result<usize> {
        let d = self.noise_dim();
        let n = self.state_dim();
        if self.n_paths == 0 {
            return Err(invalid("n_paths must be positive"));
        }
        if self.initial.len() != n {
            return Err(Error::Dimension { expected: n, got: self.initial.len() });
        }
        if self.drift.dim() != n {
            return Err(Error::Dimension { expected: n, got: self.drift.dim() });
        }
        if self.drift.out_dim() != d {
            return Err(Error::Dimension { expected: d, got: self.drift.out_dim() });
        }
        if self.noise.dim() != d {
            return Err(Error::Dimension { expected: d, got: self.noise.dim() });
        }
        self.noise_grid().refinement_of(&self.grid)
    }
}

/// One EM update on a state vector, shared by all schemes.
pub(crate) struct Stepper<'a> {
    drift: &'a DriftField,
    diffusion: &'a DiffusionMatrix,
    mode: Mode,
    d: usize,
}

pub(crate) struct StepBuffers {
    b: Vec<f64>,
    s: Vec<f64>,
}

impl StepBuffers {
    pub(crate) fn new(d: usize) -> Self {
        Self { b: vec![0.0; d], s: vec![0.0; d] }
    }
}

impl<'a> Stepper<'a> {
    pub(crate) fn new(drift: &'a DriftField, diffusion: &'a DiffusionMatrix, mode: Mode) -> Self {
        Self { drift, diffusion, mode, d: diffusion.dim() }
    }

    /// Advances `x` by one step of length `h` from time `t` with increment `dw`.
    /// Returns the path status after the step (`step` is used for the flag).
    #[inline]
    pub(crate) fn advance(
        &self,
        t: f64,
        h: f64,
        x: &mut [f64],
        dw: &[f64],
        buf: &mut StepBuffers,
        step: usize,
    ) -> Result<PathStatus> {
        match self.drift.eval_into(t, x, &mut buf.b) {
            Ok(()) => {}
            Err(Error::SingularPoint { .. }) => return Ok(PathStatus::Rejected { step }),
            Err(e) => return Err(e),
        }
        self.diffusion.apply(dw, &mut buf.s);
        let d = self.d;
        match self.mode {
            Mode::NonDegenerate => {
                for i in 0..d {
                    x[i] += buf.b[i] * h + buf.s[i];
                }
            }
            Mode::Degenerate => {
                let (pos, vel) = x.split_at_mut(d);
                for i in 0..d {
                    pos[i] += vel[i] * h;
                    vel[i] += buf.b[i] * h + buf.s[i];
                }
            }
        }
        let r = norm(x);
        if r.is_finite() && r <= DIVERGENCE_THRESHOLD {
            Ok(PathStatus::Ok)
        } else {
            Ok(PathStatus::Diverged { step })
        }
    }
}

/// Accumulates coarse increments from the fine noise grid of one path.
pub(crate) struct IncrementReader {
    reader: crate::model::PathNoise,
    fine: TimeGrid,
    xi: Vec<f64>,
    next_fine: usize,
}

impl IncrementReader {
    pub(crate) fn new(noise: &NoiseSource, fine: TimeGrid, path: usize) -> Self {
        Self { reader: noise.path(path), fine, xi: vec![0.0; noise.dim()], next_fine: 0 }
    }

    /// Reads the next `r` fine steps (fewer at the end of the grid) into `dw`.
    #[inline]
    pub(crate) fn next(&mut self, r: usize, dw: &mut [f64]) {
        dw.fill(0.0);
        let end = (self.next_fine + r).min(self.fine.n_steps());
        for j in self.next_fine..end {
            self.reader.next_normals(&mut self.xi);
            let s = self.fine.step_len(j).sqrt();
            for (w, x) in dw.iter_mut().zip(&self.xi) {
                *w += s * x;
            }
        }
        self.next_fine = end;
    }
}

struct PathOutput {
    states: Vec<f64>,
    increments: Vec<f64>,
    status: PathStatus,
}

fn run_path(cfg: &SchemeConfig, stepper: &Stepper<'_>, r: usize, path: usize) -> Result<PathOutput> {
    let n = cfg.state_dim();
    let d = cfg.noise_dim();
    let steps = cfg.grid.n_steps();
    let full = cfg.recording == Recording::Full;
    let mut states = Vec::with_capacity(if full { (steps + 1) * n } else { 2 * n });
    let mut increments = Vec::with_capacity(if full { steps * d } else { 0 });
    states.extend_from_slice(&cfg.initial);
    let mut x = cfg.initial.clone();
    let mut dw = vec![0.0; d];
    let mut buf = StepBuffers::new(d);
    let mut reader = IncrementReader::new(&cfg.noise, cfg.noise_grid(), path);
    let mut status = PathStatus::Ok;
    for k in 0..steps {
        reader.next(r, &mut dw);
        if full {
            increments.extend_from_slice(&dw);
        }
        status = stepper.advance(cfg.grid.knot(k), cfg.grid.step_len(k), &mut x, &dw, &mut buf, k)?;
        if status != PathStatus::Ok {
            break;
        }
        if full {
            states.extend_from_slice(&x);
        }
    }
    if status != PathStatus::Ok {
        x.fill(f64::NAN);
        if full {
            states.resize((steps + 1) * n, f64::NAN);
            increments.resize(steps * d, f64::NAN);
        }
    }
    if !full {
        states.extend_from_slice(&x);
    }
    Ok(PathOutput { states, increments, status })
}

fn simulate(cfg: &SchemeConfig, tag: SchemeTag) -> Result<PathEnsemble> {
    let r = cfg.validate()?;
    let stepper = Stepper::new(&cfg.drift, &cfg.diffusion, cfg.mode);
    let outputs: Vec<PathOutput> =
        (0..cfg.n_paths).into_par_iter().map(|p| run_path(cfg, &stepper, r, p)).collect::<Result<_>>()?;
    let full = cfg.recording == Recording::Full;
    let mut states = Vec::with_capacity(outputs.iter().map(|o| o.states.len()).sum());
    let mut increments = Vec::new();
    let mut status = Vec::with_capacity(cfg.n_paths);
    for o in outputs {
        states.extend_from_slice(&o.states);
        increments.extend_from_slice(&o.increments);
        status.push(o.status);
    }
    Ok(PathEnsemble {
        grid: cfg.grid,
        dim: cfg.state_dim(),
        noise_dim: cfg.noise_dim(),
        tag,
        recording: cfg.recording,
        initial: cfg.initial.clone(),
        states,
        increments: full.then_some(increments),
        status,
    })
}

/// EM for `dX = b(t,X) dt + σ dW`: `X_{k+1} = X_k + b(t_k, X_k) δ + σ ΔW_k`.
pub fn simulate_em(cfg: &SchemeConfig) -> Result<PathEnsemble> {
    if cfg.mode != Mode::NonDegenerate {
        return Err(invalid("simulate_em requires the non-degenerate mode"));
    }
    simulate(cfg, SchemeTag::Em)
}

/// EM for the kinetic pair, both components frozen at `t_k`:
/// `X1' = X1 + X2 δ`, `X2' = X2 + b(t_k, X1, X2) δ + σ ΔW_k`.
pub fn simulate_em_degenerate(cfg: &SchemeConfig) -> Result<PathEnsemble> {
    if cfg.mode != Mode::Degenerate {
        return Err(invalid("simulate_em_degenerate requires the degenerate mode"));
    }
    simulate(cfg, SchemeTag::EmDegenerate)
}

/// The reference process `dY = Z0(Y) dt + σ dW` (or `dX = Y dt, dY = Z0(Y) dt + σ dW`
/// in degenerate mode), simulated by EM on `cfg.grid` with `cfg.drift` ignored.
pub fn simulate_reference(cfg: &SchemeConfig, reference: &ReferenceSystem) -> Result<PathEnsemble> {
    if reference.dim() != cfg.noise_dim() {
        return Err(Error::Dimension { expected: cfg.noise_dim(), got: reference.dim() });
    }
    let mut c = cfg.clone();
    c.diffusion = reference.diffusion().clone();
    match cfg.mode {
        Mode::NonDegenerate => {
            c.drift = reference.z0().clone();
            simulate(&c, SchemeTag::Reference)
        }
        Mode::Degenerate => {
            c.drift = velocity_only(reference.z0().clone());
            simulate(&c, SchemeTag::ReferenceDegenerate)
        }
    }
}
