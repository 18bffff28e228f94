//! Numerical mollification `b_ε = Z * ψ_ε + linear_part`.
//!
//! The convolution is a midpoint rule over the cube `[-ε, ε]^d` with `q`
//! nodes per axis. The discrete weights `ψ_ε(u_i) h^d` are rescaled to sum
//! to one, so constants and (by symmetry) linear functions are reproduced
//! exactly. If a node lands on a singular point of `Z`, the whole node set is
//! shifted by half a cell.

use std::sync::Arc;

use super::kernel::BumpKernel;
use crate::error::{invalid, Error, Result};
use crate::model::{norm, DriftField};

/// Smooth completion added after convolving.
#[derive(Debug, Clone)]
pub enum LinearPart {
    /// `x ↦ -x`
    NegIdentity,
    Zero,
    Field(DriftField),
}

impl LinearPart {
    #[inline]
    fn add_to(&self, t: f64, x: &[f64], out: &mut [f64]) -> Result<()> {
        match self {
            LinearPart::NegIdentity => out.iter_mut().zip(x).for_each(|(o, v)| *o -= v),
            LinearPart::Zero => {}
            LinearPart::Field(f) => {
                let mut v = vec![0.0; out.len()];
                f.eval_into(t, x, &mut v)?;
                out.iter_mut().zip(&v).for_each(|(o, v)| *o += v);
            }
        }
        Ok(())
    }
}

#[derive(Debug)]
struct QuadRule {
    dim: usize,
    offsets: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadRule {
    fn new(kernel: &BumpKernel, eps: f64, q: usize, shift: f64) -> Self {
        let dim = kernel.dim();
        let h = 2.0 * eps / q as f64;
        let mut offsets = Vec::new();
        let mut weights = Vec::new();
        let mut idx = vec![0usize; dim];
        let mut u = vec![0.0; dim];
        'outer: loop {
            for (ui, &i) in u.iter_mut().zip(&idx) {
                *ui = -eps + (i as f64 + 0.5 + shift) * h;
            }
            let w = kernel.psi_eps(&u, eps);
            if w > 0.0 {
                offsets.extend_from_slice(&u);
                weights.push(w);
            }
            let mut c = 0;
            loop {
                if c == dim {
                    break 'outer;
                }
                idx[c] += 1;
                if idx[c] < q {
                    break;
                }
                idx[c] = 0;
                c += 1;
            }
        }
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        Self { dim, offsets, weights }
    }

    /// `Σ w_i Z(t, x - u_i)`.
    fn convolve(&self, base: &DriftField, t: f64, x: &[f64], out: &mut [f64]) -> Result<()> {
        let d = self.dim;
        let m = out.len();
        let mut y = [0.0f64; 8];
        let mut z = [0.0f64; 8];
        out.fill(0.0);
        for (i, w) in self.weights.iter().enumerate() {
            let u = &self.offsets[i * d..(i + 1) * d];
            for k in 0..d {
                y[k] = x[k] - u[k];
            }
            base.eval_into(t, &y[..d], &mut z[..m])?;
            for k in 0..m {
                out[k] += w * z[k];
            }
        }
        Ok(())
    }
}

/// A drift smoothed by convolution with a bump kernel.
#[derive(Debug, Clone)]
pub struct MollifiedDrift {
    base: DriftField,
    kernel: BumpKernel,
    epsilon: f64,
    quad_points: usize,
    linear: LinearPart,
    rule: Arc<QuadRule>,
    shifted: Arc<QuadRule>,
}

/// Relative change allowed between `q` and `2q` nodes.
const SELF_CHECK_TOL: f64 = 0.01;

pub fn mollify(
    base: DriftField,
    kernel: BumpKernel,
    epsilon: f64,
    quad_points: usize,
    linear: LinearPart,
) -> Result<MollifiedDrift> {
    if !(epsilon > 0.0) {
        return Err(invalid(format!("epsilon must be positive, got {epsilon}")));
    }
    if quad_points < 16 {
        return Err(invalid(format!("quad_points must be at least 16, got {quad_points}")));
    }
    if kernel.dim() != base.dim() || base.dim() > 8 || base.out_dim() > 8 {
        return Err(Error::Dimension { expected: base.dim(), got: kernel.dim() });
    }
    // even node count keeps the rule symmetric about x
    let q = quad_points + quad_points % 2;
    let m = MollifiedDrift {
        rule: Arc::new(QuadRule::new(&kernel, epsilon, q, 0.0)),
        shifted: Arc::new(QuadRule::new(&kernel, epsilon, q, 0.5)),
        base,
        kernel,
        epsilon,
        quad_points: q,
        linear,
    };
    let mut probes: Vec<Vec<f64>> = vec![vec![0.0; m.base.dim()]];
    probes.extend(m.base.singular_points.iter().take(3).cloned());
    for x in &probes {
        m.self_check(0.0, x)?;
    }
    Ok(m)
}

impl MollifiedDrift {
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn quad_points(&self) -> usize {
        self.quad_points
    }

    pub fn kernel(&self) -> &BumpKernel {
        &self.kernel
    }

    pub fn base(&self) -> &DriftField {
        &self.base
    }

    /// The convolution `(Z * ψ_ε)(x)` without the linear part.
    pub fn smoothed_into(&self, t: f64, x: &[f64], out: &mut [f64]) -> Result<()> {
        match self.rule.convolve(&self.base, t, x, out) {
            Err(Error::SingularPoint { .. }) => self.shifted.convolve(&self.base, t, x, out),
            r => r,
        }
    }

    pub fn eval_into(&self, t: f64, x: &[f64], out: &mut [f64]) -> Result<()> {
        self.smoothed_into(t, x, out)?;
        self.linear.add_to(t, x, out)
    }

    pub fn eval(&self, t: f64, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.base.out_dim()];
        self.eval_into(t, x, &mut out)?;
        Ok(out)
    }

    /// Evaluates at `q` and `2q` nodes and fails when they disagree by more than 1%.
    pub fn self_check(&self, t: f64, x: &[f64]) -> Result<f64> {
        let fine = QuadRule::new(&self.kernel, self.epsilon, 2 * self.quad_points, 0.0);
        let mut a = vec![0.0; self.base.out_dim()];
        let mut b = vec![0.0; self.base.out_dim()];
        self.smoothed_into(t, x, &mut a)?;
        if let Err(Error::SingularPoint { .. }) = fine.convolve(&self.base, t, x, &mut b) {
            QuadRule::new(&self.kernel, self.epsilon, 2 * self.quad_points, 0.5).convolve(&self.base, t, x, &mut b)?;
        }
        let diff: Vec<f64> = a.iter().zip(&b).map(|(p, q)| p - q).collect();
        let rel = norm(&diff) / norm(&b).max(1e-300);
        let rel = if norm(&diff) < 1e-12 { 0.0 } else { rel };
        if !rel.is_finite() || rel > SELF_CHECK_TOL {
            return Err(Error::MollificationFailure { x: x.to_vec(), rel_change: rel });
        }
        Ok(rel)
    }

    /// Direct evaluation as a [`DriftField`].
    pub fn into_field(self) -> DriftField {
        let name = format!("mollified-{}", self.base.name());
        let (din, dout) = (self.base.dim(), self.base.out_dim());
        let homogeneous = self.base.time_homogeneous;
        let alpha = self.base.time_hoelder_alpha;
        let mut f = DriftField::with_dims(name, din, dout, move |t, x, out| self.eval_into(t, x, out));
        f.time_homogeneous = homogeneous;
        f.time_hoelder_alpha = alpha;
        f
    }

    /// One-dimensional tabulation on `[lo, hi]`: the convolution is computed
    /// on the lattice `kh`, `h = 2ε/q`, re-using one sweep of base evaluations,
    /// and interpolated with 4-point Lagrange cubics. Outside the table the
    /// field falls back to direct evaluation.
    pub fn tabulate(self, lo: f64, hi: f64) -> Result<DriftField> {
        if self.base.dim() != 1 || self.base.out_dim() != 1 {
            return Err(invalid("tabulation is implemented for scalar drifts only"));
        }
        if !self.base.time_homogeneous {
            return Err(invalid("tabulation requires a time-homogeneous base drift"));
        }
        if !(hi > lo) {
            return Err(invalid("empty tabulation range"));
        }
        let q = self.quad_points as i64;
        let h = 2.0 * self.epsilon / q as f64;
        let k_lo = (lo / h).floor() as i64 - 2;
        let k_hi = (hi / h).ceil() as i64 + 2;
        let j_lo = k_lo - q / 2;
        let j_hi = k_hi + q / 2 - 1;
        let lattice: Vec<Result<f64>> = (j_lo..=j_hi)
            .map(|j| {
                let mut z = [0.0];
                self.base.eval_into(0.0, &[(j as f64 + 0.5) * h], &mut z).map(|_| z[0])
            })
            .collect();
        // the symmetric midpoint weights, indexed by i with offset -ε + (i+½)h
        let w = &self.rule.weights;
        let full = w.len() == q as usize;
        let mut table = Vec::with_capacity((k_hi - k_lo + 1) as usize);
        for k in k_lo..=k_hi {
            let mut acc = 0.0;
            let mut ok = full;
            if full {
                for (i, wi) in w.iter().enumerate() {
                    let j = k + q / 2 - 1 - i as i64;
                    match &lattice[(j - j_lo) as usize] {
                        Ok(z) => acc += wi * z,
                        Err(_) => {
                            ok = false;
                            break;
                        }
                    }
                }
            }
            if !ok {
                let mut z = [0.0];
                self.smoothed_into(0.0, &[k as f64 * h], &mut z)?;
                acc = z[0];
            }
            table.push(acc);
        }
        let table = Arc::new(table);
        let x0 = k_lo as f64 * h;
        let name = format!("mollified-{}", self.base.name());
        let alpha = self.base.time_hoelder_alpha;
        let this = self;
        let f = DriftField::new(name, 1, move |t, x, out| {
            let s = (x[0] - x0) / h;
            let m = s.floor();
            let mi = m as i64;
            if m.is_finite() && mi >= 1 && mi + 2 < table.len() as i64 {
                let tau = s - m;
                let i = mi as usize;
                let (p, c, n1, n2) = (table[i - 1], table[i], table[i + 1], table[i + 2]);
                let l_m1 = -tau * (tau - 1.0) * (tau - 2.0) / 6.0;
                let l_0 = (tau + 1.0) * (tau - 1.0) * (tau - 2.0) / 2.0;
                let l_1 = -(tau + 1.0) * tau * (tau - 2.0) / 2.0;
                let l_2 = (tau + 1.0) * tau * (tau - 1.0) / 6.0;
                out[0] = l_m1 * p + l_0 * c + l_1 * n1 + l_2 * n2;
            } else {
                this.smoothed_into(t, x, out)?;
            }
            this.linear.add_to(t, x, out)
        });
        Ok(match alpha {
            Some(a) => f.with_alpha(a),
            None => f,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drift::singular::{singular_log_z, LogSeries};

    fn k1() -> BumpKernel {
        BumpKernel::new(1)
    }

    #[test]
    fn zero_base_gives_linear_part() {
        let m = mollify(DriftField::zero(1), k1(), 0.3, 32, LinearPart::NegIdentity).unwrap();
        assert_eq!(m.eval(0.0, &[1.7]).unwrap(), vec![-1.7]);
    }

    #[test]
    fn linear_base_reproduced() {
        let base = DriftField::homogeneous("id", 1, |x, o| o[0] = x[0]);
        for eps in [0.05, 0.2, 1.0] {
            let m = mollify(base.clone(), k1(), eps, 32, LinearPart::Zero).unwrap();
            for x in [-2.0, 0.3, 5.5] {
                assert!((m.eval(0.0, &[x]).unwrap()[0] - x).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn finite_at_singular_point() {
        let z = singular_log_z(10, 1e-3).unwrap();
        let m = mollify(z, k1(), 0.1, 64, LinearPart::NegIdentity).unwrap();
        let v = m.eval(0.0, &[1.0]).unwrap()[0];
        assert!(v.is_finite());
    }

    #[test]
    fn shifted_rule_used_when_node_hits_singularity() {
        // with q = 16 and ε = 0.5 the midpoint nodes of x = 1.03125 include y = 1
        let z = singular_log_z(10, 1e-3).unwrap();
        let m = mollify(z, k1(), 0.5, 16, LinearPart::Zero).unwrap();
        let v = m.eval(0.0, &[1.03125]).unwrap()[0];
        assert!(v.is_finite());
    }

    #[test]
    fn non_integrable_base_fails_self_check() {
        // |x|^{-1} singularity at 0 is not locally integrable
        let base = DriftField::new("hyper", 1, |_t, x, o| {
            if x[0] == 0.0 {
                return Err(Error::SingularPoint { point: x.to_vec() });
            }
            o[0] = 1.0 / x[0].abs();
            Ok(())
        })
        .with_singular_points(vec![vec![0.0]]);
        let r = mollify(base, k1(), 0.2, 16, LinearPart::Zero);
        assert!(matches!(r, Err(Error::MollificationFailure { .. })), "{r:?}");
    }

    #[test]
    fn convergence_to_smooth_base() {
        let base = DriftField::homogeneous("sin", 1, |x, o| o[0] = (2.0 * x[0]).sin());
        let grid: Vec<f64> = (0..41).map(|i| -2.0 + 0.1 * i as f64).collect();
        let mut prev = f64::INFINITY;
        for eps in [0.2, 0.1, 0.05] {
            let m = mollify(base.clone(), k1(), eps, 64, LinearPart::NegIdentity).unwrap();
            let err = grid
                .iter()
                .map(|&x| (m.eval(0.0, &[x]).unwrap()[0] - ((2.0 * x).sin() - x)).abs())
                .fold(0.0, f64::max);
            assert!(err <= prev);
            assert!(err <= 2.0 * eps + 1e-6);
            prev = err;
        }
    }

    #[test]
    fn table_matches_direct_evaluation() {
        let z = singular_log_z(10, 1e-3).unwrap();
        let m = mollify(z, k1(), 0.1, 64, LinearPart::NegIdentity).unwrap();
        let direct = m.clone().into_field();
        let tab = m.tabulate(-3.0, 5.0).unwrap();
        let h = 0.2 / 64.0;
        for k in [-700, -3, 0, 1, 320, 641, 1500] {
            let x = k as f64 * h;
            let a = direct.eval(0.0, &[x]).unwrap()[0];
            let b = tab.eval(0.0, &[x]).unwrap()[0];
            assert!((a - b).abs() < 1e-12, "lattice point {x}: {a} vs {b}");
        }
        let (mut smooth, mut near): (f64, f64) = (0.0, 0.0);
        for i in 0..2000 {
            let x = -4.0 + 10.0 * (i as f64 + 0.37) / 2000.0;
            let a = direct.eval(0.0, &[x]).unwrap()[0];
            let b = tab.eval(0.0, &[x]).unwrap()[0];
            let gap = (x - x.round()).abs();
            if x.round() >= 1.0 && gap < 0.15 {
                near = near.max(((a - b) / (a + x)).abs());
            } else {
                smooth = smooth.max((a - b).abs());
            }
        }
        assert!(smooth < 1e-6, "worst table error away from singularities {smooth}");
        // near a singular point both are midpoint estimates with O(h) node-alignment error
        assert!(near < 5e-3, "worst relative table error near singularities {near}");
    }

    #[test]
    fn z_eps_is_bounded() {
        let s = LogSeries::new(10, 1e-3).unwrap();
        let z = singular_log_z(s.n_max, s.tail_bound_tol).unwrap();
        let m = mollify(z, k1(), 0.1, 64, LinearPart::Zero).unwrap().into_field();
        let sup = (0..400)
            .map(|i| m.eval(0.0, &[-5.0 + 0.025 * i as f64]).unwrap()[0])
            .fold(0.0, f64::max);
        assert!(sup.is_finite() && sup < 5.0);
    }
}
