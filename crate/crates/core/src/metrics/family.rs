use std::fmt;
use std::sync::Arc;

use super::lp::{w1_lp_oracle, LP_MAX_SUPPORT};
use super::w1::{coupling_cost_upper, w1_exact_1d};
use crate::error::{invalid, Error, Result};
use crate::model::EmpiricalMeasure;
use crate::stats::KahanSum;

/// One-dimensional profile applied to a projection `s = ⟨u, x⟩`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Profile {
    /// `height · max(0, 1 - |s - center| / width)`.
    Tent { center: f64, width: f64, height: f64 },
    /// `height · clamp((s - center) / width, -1, 1)`.
    Ramp { center: f64, width: f64, height: f64 },
}

impl Profile {
    #[inline]
    pub fn eval(&self, s: f64) -> f64 {
        match *self {
            Profile::Tent { center, width, height } => height * (1.0 - (s - center).abs() / width).max(0.0),
            Profile::Ramp { center, width, height } => height * ((s - center) / width).clamp(-1.0, 1.0),
        }
    }

    pub fn sup_norm(&self) -> f64 {
        match *self {
            Profile::Tent { height, .. } | Profile::Ramp { height, .. } => height.abs(),
        }
    }

    pub fn lipschitz(&self) -> f64 {
        match *self {
            Profile::Tent { width, height, .. } | Profile::Ramp { width, height, .. } => height.abs() / width,
        }
    }

    /// Height spending the whole budget `‖φ‖_Lip + ‖φ‖_∞ = 1` at this width.
    pub fn budget_height(width: f64) -> f64 {
        width / (1.0 + width)
    }
}

/// `φ(x) = profile(⟨u, x⟩)` for a unit vector `u`; the constants of the
/// profile carry over because projection onto `u` is 1-Lipschitz.
#[derive(Debug, Clone, PartialEq)]
pub struct TestFunction {
    pub direction: Vec<f64>,
    pub profile: Profile,
}

impl TestFunction {
    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        let s = self.direction.iter().zip(x).map(|(u, v)| u * v).sum();
        self.profile.eval(s)
    }

    pub fn sup_norm(&self) -> f64 {
        self.profile.sup_norm()
    }

    pub fn lipschitz(&self) -> f64 {
        self.profile.lipschitz()
    }

    pub fn budget(&self) -> f64 {
        self.sup_norm() + self.lipschitz()
    }
}

#[derive(Debug, Clone)]
pub struct TestFunctionFamily {
    dim: usize,
    members: Vec<TestFunction>,
}

impl TestFunctionFamily {
    /// Rejects members with `‖φ‖_Lip + ‖φ‖_∞ > 1` or non-unit directions.
    pub fn new(dim: usize, members: Vec<TestFunction>) -> Result<Self> {
        if members.is_empty() {
            return Err(invalid("test function family is empty"));
        }
        for m in &members {
            if m.direction.len() != dim {
                return Err(Error::Dimension { expected: dim, got: m.direction.len() });
            }
            let len: f64 = m.direction.iter().map(|v| v * v).sum::<f64>().sqrt();
            if (len - 1.0).abs() > 1e-12 {
                return Err(invalid("test function direction must be a unit vector"));
            }
            if !(m.budget() <= 1.0 + 1e-12) {
                return Err(invalid(format!("test function exceeds the bounded-Lipschitz budget: {}", m.budget())));
            }
        }
        Ok(Self { dim, members })
    }

    /// Tents and ramps along each coordinate axis, centred at `n_centers` pooled
    /// quantiles of `mu` and `nu` and at their midpoints, with widths
    /// `range · 2^{-j}` for `j = 1..=n_widths`; heights spend the full budget.
    pub fn dictionary(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure, n_centers: usize, n_widths: usize) -> Result<Self> {
        if mu.dim() != nu.dim() {
            return Err(Error::Dimension { expected: mu.dim(), got: nu.dim() });
        }
        let dim = mu.dim();
        let mut members = Vec::new();
        for axis in 0..dim {
            let mut pooled: Vec<f64> = (0..mu.len()).map(|i| mu.sample(i)[axis]).collect();
            pooled.extend((0..nu.len()).map(|i| nu.sample(i)[axis]));
            pooled.retain(|v| v.is_finite());
            if pooled.is_empty() {
                continue;
            }
            pooled.sort_by(f64::total_cmp);
            let range = pooled[pooled.len() - 1] - pooled[0];
            let k = n_centers.max(2);
            let mut centers: Vec<f64> = (0..k)
                .map(|i| {
                    let idx = ((i as f64 / (k - 1) as f64) * (pooled.len() - 1) as f64).round() as usize;
                    pooled[idx]
                })
                .collect();
            let mids: Vec<f64> = centers.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
            centers.extend(mids);
            centers.sort_by(f64::total_cmp);
            centers.dedup();
            let mut direction = vec![0.0; dim];
            direction[axis] = 1.0;
            let widths: Vec<f64> = if range > 0.0 {
                (1..=n_widths.max(1)).map(|j| range * 0.5f64.powi(j as i32)).collect()
            } else {
                vec![1.0]
            };
            for &c in &centers {
                for &w in &widths {
                    let height = Profile::budget_height(w);
                    for profile in [
                        Profile::Tent { center: c, width: w, height },
                        Profile::Ramp { center: c, width: w, height },
                    ] {
                        members.push(TestFunction { direction: direction.clone(), profile });
                    }
                }
            }
        }
        Self::new(dim, members)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn members(&self) -> &[TestFunction] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// Certified bracket `lower ≤ W_bL ≤ upper`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WblBracket {
    pub lower: f64,
    pub upper: f64,
}

fn integrate(m: &EmpiricalMeasure, w: &[f64], f: &TestFunction) -> f64 {
    let mut s = KahanSum::default();
    for (i, wi) in w.iter().enumerate() {
        if *wi > 0.0 {
            s.add(wi * f.eval(m.sample(i)));
        }
    }
    s.total()
}

/// `lower = max_φ |∫φ dμ - ∫φ dν|` over the family (each member is feasible);
/// `upper = min(W1, 2)` with `W1` exact in 1-d or for small supports, and
/// otherwise bounded by a feasible coupling when one is available.
pub fn wbl_estimate(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure, family: &TestFunctionFamily) -> Result<WblBracket> {
    if mu.dim() != family.dim() || nu.dim() != family.dim() {
        return Err(Error::Dimension { expected: family.dim(), got: mu.dim() });
    }
    let (wa, wb) = (mu.normalized_weights(), nu.normalized_weights());
    let lower = family
        .members()
        .iter()
        .map(|f| (integrate(mu, &wa, f) - integrate(nu, &wb, f)).abs())
        .fold(0.0, f64::max);
    let w1 = if mu.dim() == 1 {
        Some(w1_exact_1d(mu, nu)?)
    } else if mu.len() <= LP_MAX_SUPPORT && nu.len() <= LP_MAX_SUPPORT {
        Some(w1_lp_oracle(mu, nu)?)
    } else {
        coupling_cost_upper(mu, nu).ok()
    };
    let upper = w1.map_or(2.0, |w| w.min(2.0));
    // the members are feasible, so any excess is rounding
    Ok(WblBracket { lower: lower.min(upper), upper })
}

/// A named bounded test function for weak errors.
#[derive(Clone)]
pub struct BoundedFunction {
    name: String,
    sup_norm: f64,
    f: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
}

impl fmt::Debug for BoundedFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BoundedFunction").field("name", &self.name).field("sup_norm", &self.sup_norm).finish()
    }
}

impl BoundedFunction {
    pub fn new<F>(name: impl Into<String>, sup_norm: f64, f: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        Self { name: name.into(), sup_norm, f: Arc::new(f) }
    }

    /// `tanh(x_c)`.
    pub fn tanh(c: usize) -> Self {
        Self::new(Self::suffixed("tanh", c), 1.0, move |x| x[c].tanh())
    }

    /// `clamp(x_c, -1, 1)`.
    pub fn ramp(c: usize) -> Self {
        Self::new(Self::suffixed("ramp", c), 1.0, move |x| x[c].clamp(-1.0, 1.0))
    }

    fn suffixed(base: &str, c: usize) -> String {
        if c == 0 {
            base.to_string()
        } else {
            format!("{base}_x{}", c + 1)
        }
    }

    /// Looks up `tanh`, `ramp`, `tanh_x2`, `ramp_x2`, ... by name.
    pub fn by_name(name: &str) -> Option<Self> {
        let (base, c) = match name.split_once("_x") {
            Some((b, i)) => (b, i.parse::<usize>().ok()?.checked_sub(1)?),
            None => (name, 0),
        };
        match base {
            "tanh" => Some(Self::tanh(c)).map(|f| f.renamed(name)),
            "ramp" => Some(Self::ramp(c)).map(|f| f.renamed(name)),
            _ => None,
        }
    }

    fn renamed(mut self, name: &str) -> Self {
        self.name = name.to_string();
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn sup_norm(&self) -> f64 {
        self.sup_norm
    }

    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }
}
