use crate::error::{invalid, Result};

const SNAP: f64 = 1e-9;

/// `t_δ(s) = ⌊s/δ⌋ δ`, with quotients within `1e-9` of an integer snapped to it
/// so that grid points map to themselves despite rounding.
pub fn t_floor(s: f64, delta: f64) -> f64 {
    floor_index(s, delta) as f64 * delta
}

pub(crate) fn floor_index(s: f64, delta: f64) -> usize {
    let q = s / delta;
    let r = q.round();
    let k = if (q - r).abs() <= SNAP * r.abs().max(1.0) { r } else { q.floor() };
    k.max(0.0) as usize
}

/// Uniform time grid on `[0, T]`; the last step is shortened when `T/δ` is not an integer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    horizon: f64,
    delta: f64,
    n_steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, delta: f64) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(invalid(format!("horizon must be positive, got {horizon}")));
        }
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(invalid(format!("step must be positive, got {delta}")));
        }
        let q = horizon / delta;
        let r = q.round();
        let n = if (q - r).abs() <= SNAP * r.max(1.0) { r } else { q.ceil() };
        Ok(Self { horizon, delta, n_steps: (n as usize).max(1) })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    /// `t_k = min(kδ, T)`; the final knot is exactly `T`.
    pub fn knot(&self, k: usize) -> f64 {
        if k >= self.n_steps {
            self.horizon
        } else {
            (k as f64 * self.delta).min(self.horizon)
        }
    }

    pub fn knots(&self) -> Vec<f64> {
        (0..=self.n_steps).map(|k| self.knot(k)).collect()
    }

    pub fn step_len(&self, k: usize) -> f64 {
        self.knot(k + 1) - self.knot(k)
    }

    /// Number of steps of `self` that make up one step of `coarse`, if the
    /// coarse grid's knots are a subset of this grid's knots.
    pub fn refinement_of(&self, coarse: &TimeGrid) -> Result<usize> {
        if (self.horizon - coarse.horizon).abs() > SNAP * self.horizon {
            return Err(invalid("grids have different horizons"));
        }
        let r = coarse.delta / self.delta;
        let ri = r.round();
        if ri < 1.0 || (r - ri).abs() > SNAP * ri {
            return Err(invalid(format!(
                "step {} is not an integer multiple of {}",
                coarse.delta, self.delta
            )));
        }
        Ok(ri as usize)
    }
}
