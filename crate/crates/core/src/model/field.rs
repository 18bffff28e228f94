use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

type EvalFn = dyn Fn(f64, &[f64], &mut [f64]) -> Result<()> + Send + Sync;

/// Local Lipschitz metadata: `|b(t,x)-b(t,y)| <= k1 (1 + |x|^m1 + |y|^m1) |x-y|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpaceGrowth {
    pub k1: f64,
    pub m1: f64,
}

/// A time-dependent vector field `b(t, x)`.
///
/// `in_dim` and `out_dim` differ only for the velocity part of kinetic
/// systems, where `b` maps `R^{2d}` to `R^d`.
#[derive(Clone)]
pub struct DriftField {
    name: String,
    in_dim: usize,
    out_dim: usize,
    eval: Arc<EvalFn>,
    pub time_hoelder_alpha: Option<f64>,
    pub space_growth: Option<SpaceGrowth>,
    pub singular_points: Vec<Vec<f64>>,
    pub time_homogeneous: bool,
}

impl fmt::Debug for DriftField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DriftField")
            .field("name", &self.name)
            .field("in_dim", &self.in_dim)
            .field("out_dim", &self.out_dim)
            .field("time_hoelder_alpha", &self.time_hoelder_alpha)
            .field("space_growth", &self.space_growth)
            .field("singular_points", &self.singular_points.len())
            .finish()
    }
}

impl DriftField {
    pub fn new<F>(name: impl Into<String>, dim: usize, eval: F) -> Self
    where
        F: Fn(f64, &[f64], &mut [f64]) -> Result<()> + Send + Sync + 'static,
    {
        Self::with_dims(name, dim, dim, eval)
    }

    pub fn with_dims<F>(name: impl Into<String>, in_dim: usize, out_dim: usize, eval: F) -> Self
    where
        F: Fn(f64, &[f64], &mut [f64]) -> Result<()> + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            in_dim,
            out_dim,
            eval: Arc::new(eval),
            time_hoelder_alpha: None,
            space_growth: None,
            singular_points: Vec::new(),
            time_homogeneous: true,
        }
    }

    /// Time-homogeneous field from an infallible map `x -> b(x)`.
    pub fn homogeneous<F>(name: impl Into<String>, dim: usize, f: F) -> Self
    where
        F: Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    {
        Self::new(name, dim, move |_t, x, out| {
            f(x, out);
            Ok(())
        })
        .with_alpha(1.0)
    }

    pub fn zero(dim: usize) -> Self {
        Self::homogeneous("zero", dim, |_x, out| out.fill(0.0))
    }

    pub fn constant(value: Vec<f64>) -> Self {
        let dim = value.len();
        Self::homogeneous("constant", dim, move |_x, out| out.copy_from_slice(&value))
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.time_hoelder_alpha = Some(alpha);
        self
    }

    pub fn with_growth(mut self, growth: SpaceGrowth) -> Self {
        self.space_growth = Some(growth);
        self
    }

    pub fn with_singular_points(mut self, pts: Vec<Vec<f64>>) -> Self {
        self.singular_points = pts;
        self
    }

    pub fn time_dependent(mut self) -> Self {
        self.time_homogeneous = false;
        self
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    #[inline]
    pub fn eval_into(&self, t: f64, x: &[f64], out: &mut [f64]) -> Result<()> {
        (self.eval)(t, x, out)
    }

    pub fn eval(&self, t: f64, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.in_dim {
            return Err(Error::Dimension { expected: self.in_dim, got: x.len() });
        }
        let mut out = vec![0.0; self.out_dim];
        self.eval_into(t, x, &mut out)?;
        Ok(out)
    }

    /// Pointwise `self - other` (e.g. `Z = b - Z0`).
    pub fn minus(&self, other: &DriftField) -> Result<DriftField> {
        if self.in_dim != other.in_dim || self.out_dim != other.out_dim {
            return Err(Error::Dimension { expected: self.out_dim, got: other.out_dim });
        }
        let (a, b) = (self.clone(), other.clone());
        let out_dim = self.out_dim;
        let mut f = DriftField::with_dims(
            format!("{}-{}", self.name, other.name),
            self.in_dim,
            out_dim,
            move |t, x, out| {
                let mut tmp = [0.0f64; 8];
                a.eval_into(t, x, out)?;
                if out_dim <= 8 {
                    b.eval_into(t, x, &mut tmp[..out_dim])?;
                    out.iter_mut().zip(&tmp[..out_dim]).for_each(|(o, v)| *o -= v);
                } else {
                    let mut v = vec![0.0; out_dim];
                    b.eval_into(t, x, &mut v)?;
                    out.iter_mut().zip(&v).for_each(|(o, v)| *o -= v);
                }
                Ok(())
            },
        );
        f.time_homogeneous = self.time_homogeneous && other.time_homogeneous;
        f.time_hoelder_alpha = match (self.time_hoelder_alpha, other.time_hoelder_alpha) {
            (Some(p), Some(q)) => Some(p.min(q)),
            _ => None,
        };
        f.singular_points = self.singular_points.iter().chain(&other.singular_points).cloned().collect();
        Ok(f)
    }

    /// Spot check of the `space_growth` metadata on given pairs; returns the
    /// worst excess `|b(x)-b(y)| - K1(1+|x|^m+|y|^m)|x-y|`.
    pub fn growth_violation(&self, t: f64, pairs: &[(Vec<f64>, Vec<f64>)]) -> Result<f64> {
        let g = self
            .space_growth
            .ok_or_else(|| Error::InvalidArgument("field carries no growth metadata".into()))?;
        let mut worst = f64::NEG_INFINITY;
        for (x, y) in pairs {
            let bx = self.eval(t, x)?;
            let by = self.eval(t, y)?;
            let lhs = norm_diff(&bx, &by);
            let rhs = g.k1 * (1.0 + norm(x).powf(g.m1) + norm(y).powf(g.m1)) * norm_diff(x, y);
            worst = worst.max(lhs - rhs);
        }
        Ok(worst)
    }
}

#[inline]
pub fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

#[inline]
pub fn norm_diff(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}
