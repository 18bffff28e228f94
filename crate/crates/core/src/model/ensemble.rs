use super::grid::TimeGrid;
use super::measure::EmpiricalMeasure;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SchemeTag {
    Em,
    Reference,
    EmDegenerate,
    ReferenceDegenerate,
}

impl SchemeTag {
    pub fn is_degenerate(self) -> bool {
        matches!(self, SchemeTag::EmDegenerate | SchemeTag::ReferenceDegenerate)
    }
}

/// What a simulation keeps per path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Recording {
    /// Every knot plus the Brownian increments.
    Full,
    /// Initial and terminal state only.
    Terminal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathStatus {
    Ok,
    /// State left `|x| <= 1e12` or became non-finite at this step.
    Diverged { step: usize },
    /// Drift evaluation hit a singular point at this step.
    Rejected { step: usize },
}

/// `n_paths` discretized trajectories on a common grid.
///
/// States are laid out `[path][knot][coordinate]`; with [`Recording::Terminal`]
/// only knots `0` and `n_steps` are kept.
#[derive(Debug, Clone)]
pub struct PathEnsemble {
    pub(crate) grid: TimeGrid,
    pub(crate) dim: usize,
    pub(crate) noise_dim: usize,
    pub(crate) tag: SchemeTag,
    pub(crate) recording: Recording,
    pub(crate) initial: Vec<f64>,
    pub(crate) states: Vec<f64>,
    pub(crate) increments: Option<Vec<f64>>,
    pub(crate) status: Vec<PathStatus>,
}

impl PathEnsemble {
    pub fn n_paths(&self) -> usize {
        self.status.len()
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    /// State dimension (`2d` for degenerate schemes).
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn noise_dim(&self) -> usize {
        self.noise_dim
    }

    pub fn tag(&self) -> SchemeTag {
        self.tag
    }

    pub fn recording(&self) -> Recording {
        self.recording
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    fn stored_knots(&self) -> usize {
        match self.recording {
            Recording::Full => self.grid.n_steps() + 1,
            Recording::Terminal => 2,
        }
    }

    /// State at knot `k`; `None` when that knot was not recorded.
    pub fn state(&self, path: usize, k: usize) -> Option<&[f64]> {
        let slot = match self.recording {
            Recording::Full => k,
            Recording::Terminal if k == 0 => 0,
            Recording::Terminal if k == self.grid.n_steps() => 1,
            Recording::Terminal => return None,
        };
        let base = (path * self.stored_knots() + slot) * self.dim;
        Some(&self.states[base..base + self.dim])
    }

    pub fn terminal(&self, path: usize) -> &[f64] {
        self.state(path, self.grid.n_steps()).expect("terminal state is always recorded")
    }

    /// The `ΔW` used at step `k`, when increments were recorded.
    pub fn increment(&self, path: usize, k: usize) -> Option<&[f64]> {
        let inc = self.increments.as_ref()?;
        let base = (path * self.grid.n_steps() + k) * self.noise_dim;
        Some(&inc[base..base + self.noise_dim])
    }

    pub fn status(&self, path: usize) -> PathStatus {
        self.status[path]
    }

    pub fn statuses(&self) -> &[PathStatus] {
        &self.status
    }

    pub fn diverged_count(&self) -> usize {
        self.status.iter().filter(|s| matches!(s, PathStatus::Diverged { .. })).count()
    }

    pub fn rejected_count(&self) -> usize {
        self.status.iter().filter(|s| matches!(s, PathStatus::Rejected { .. })).count()
    }

    /// Unweighted law of the terminal states of the paths with status `Ok`.
    pub fn terminal_measure(&self) -> EmpiricalMeasure {
        let mut samples = Vec::with_capacity(self.n_paths() * self.dim);
        for p in 0..self.n_paths() {
            if self.status[p] == PathStatus::Ok {
                samples.extend_from_slice(self.terminal(p));
            }
        }
        EmpiricalMeasure::unweighted(self.dim, samples)
    }

    /// Terminal values of coordinate `c` for every path (including bad ones).
    pub fn terminal_coordinate(&self, c: usize) -> Vec<f64> {
        (0..self.n_paths()).map(|p| self.terminal(p)[c]).collect()
    }
}
