//! Girsanov weights turning reference paths into samples of a target law.
//!
//! Every kind reduces to one discrete exponential martingale
//! `log w = Σ ⟨H_k, ΔW_k⟩ - ½ Σ |H_k|² h_k` with a left-point integrand `H_k`.
//! With `H_k = σ⁻¹(b_k - Z0(Y_k))` the reference step
//! `Y' = Y + Z0(Y) h + σ ΔW` becomes `Y' = Y + b_k h + σ ΔW'` under the
//! reweighted measure, so the weights are exact for the discrete schemes:
//! Q1 yields EM of the target at the reference step, Q2 yields EM at step `δ`
//! when the reference grid refines the `δ` grid.

use log::warn;

use crate::error::{invalid, Error, Result};
use crate::model::{
    floor_index, DiffusionMatrix, DriftField, EmpiricalMeasure, PathEnsemble, PathStatus, Recording,
    ReferenceSystem, TimeGrid,
};
use crate::stats::KahanSum;

/// Below this effective sample size a weighted estimate is flagged.
pub const MIN_RELIABLE_ESS: f64 = 30.0;
/// Largest tolerated share of rejected paths.
pub const MAX_REJECTED_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightKind {
    /// Target SDE, integrand `σ⁻¹ Z(s, Y(s))`.
    Q1,
    /// EM at step `δ`, integrand `-σ⁻¹(Z0(Y(s)) - b(s_δ, Y(s_δ)))`.
    Q2,
    /// Kinetic target, integrand `σ⁻¹(b - Z0)(s, X(s), Y(s))`.
    Q3,
    /// Kinetic target with the mollified drift.
    Q4,
    /// Kinetic EM at step `δ`, frozen at `s_δ` as for Q2.
    Q5,
}

/// Running stochastic integral `M` and its quadratic variation along one path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GirsanovAccumulator {
    kind: WeightKind,
    m: KahanSum,
    qv: KahanSum,
}

impl GirsanovAccumulator {
    pub fn new(kind: WeightKind) -> Self {
        Self { kind, m: KahanSum::default(), qv: KahanSum::default() }
    }

    pub fn kind(&self) -> WeightKind {
        self.kind
    }

    /// Adds `⟨h, dw⟩` to `M` and `|h|² dt` to `⟨M⟩`.
    #[inline]
    pub fn push(&mut self, h: &[f64], dw: &[f64], dt: f64) {
        let mut ip = 0.0;
        let mut sq = 0.0;
        for (a, b) in h.iter().zip(dw) {
            ip += a * b;
            sq += a * a;
        }
        self.m.add(ip);
        self.qv.add(sq * dt);
    }

    pub fn martingale(&self) -> f64 {
        self.m.total()
    }

    pub fn quadratic_variation(&self) -> f64 {
        self.qv.total()
    }

    pub fn log_weight(&self) -> f64 {
        self.martingale() - 0.5 * self.quadratic_variation()
    }
}

/// Per-path weights; rejected paths carry `log_weight = -inf`.
#[derive(Debug, Clone)]
pub struct GirsanovWeights {
    pub kind: WeightKind,
    pub log_weights: Vec<f64>,
    pub martingale: Vec<f64>,
    pub quadratic_variation: Vec<f64>,
    pub rejected: usize,
}

impl GirsanovWeights {
    pub fn len(&self) -> usize {
        self.log_weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_weights.is_empty()
    }

    pub fn is_valid(&self, p: usize) -> bool {
        self.log_weights[p] > f64::NEG_INFINITY
    }

    /// Weighted law of the terminal states of `paths` over the valid paths.
    pub fn terminal_measure(&self, paths: &PathEnsemble) -> EmpiricalMeasure {
        let mut samples = Vec::new();
        let mut lw = Vec::new();
        for p in 0..self.len() {
            if self.is_valid(p) {
                samples.extend_from_slice(paths.terminal(p));
                lw.push(self.log_weights[p]);
            }
        }
        EmpiricalMeasure::weighted(paths.dim(), samples, lw)
    }
}

fn require_increments(paths: &PathEnsemble) -> Result<()> {
    if paths.recording() != Recording::Full || paths.increments.is_none() {
        return Err(invalid("reference paths must be recorded in full with their increments"));
    }
    Ok(())
}

/// Runs the accumulator over every path with `integrand(p, k, state_k, out)`
/// writing `H_k`; a singular point rejects the path.
fn accumulate<F>(kind: WeightKind, paths: &PathEnsemble, mut integrand: F) -> Result<GirsanovWeights>
where
    F: FnMut(usize, usize, &[f64], &mut [f64]) -> Result<()>,
{
    require_increments(paths)?;
    let n = paths.n_paths();
    let d = paths.noise_dim();
    let grid = *paths.grid();
    let mut out = GirsanovWeights {
        kind,
        log_weights: Vec::with_capacity(n),
        martingale: Vec::with_capacity(n),
        quadratic_variation: Vec::with_capacity(n),
        rejected: 0,
    };
    let mut h = vec![0.0; d];
    for p in 0..n {
        let mut acc = GirsanovAccumulator::new(kind);
        let mut ok = paths.status(p) == PathStatus::Ok;
        if ok {
            for k in 0..grid.n_steps() {
                let y = paths.state(p, k).expect("full recording");
                match integrand(p, k, y, &mut h) {
                    Ok(()) => {}
                    Err(Error::SingularPoint { .. }) => {
                        ok = false;
                        break;
                    }
                    Err(e) => return Err(e),
                }
                acc.push(&h, paths.increment(p, k).expect("full recording"), grid.step_len(k));
            }
        }
        if ok {
            out.log_weights.push(acc.log_weight());
            out.martingale.push(acc.martingale());
            out.quadratic_variation.push(acc.quadratic_variation());
        } else {
            out.rejected += 1;
            out.log_weights.push(f64::NEG_INFINITY);
            out.martingale.push(f64::NAN);
            out.quadratic_variation.push(f64::NAN);
        }
    }
    if out.rejected as f64 > MAX_REJECTED_FRACTION * n as f64 {
        return Err(Error::RejectedPaths { rejected: out.rejected, total: n });
    }
    Ok(out)
}

/// Q1 weights: `log w = Σ⟨σ⁻¹Z(t_k, Y_k), ΔW_k⟩ - ½Σ|σ⁻¹Z(t_k, Y_k)|² h_k`.
///
/// `z` is the perturbation `b - Z0` of the reference drift; the weighted
/// reference paths are EM of `b` at the reference step.
pub fn weight_q1(paths: &PathEnsemble, z: &DriftField, diffusion: &DiffusionMatrix) -> Result<GirsanovWeights> {
    if paths.tag().is_degenerate() {
        return Err(invalid("Q1 weights need non-degenerate reference paths"));
    }
    check_dims(paths, z, diffusion)?;
    let grid = *paths.grid();
    let mut zv = vec![0.0; diffusion.dim()];
    accumulate(WeightKind::Q1, paths, |_p, k, y, h| {
        z.eval_into(grid.knot(k), y, &mut zv)?;
        diffusion.apply_inv(&zv, h);
        Ok(())
    })
}

fn check_dims(paths: &PathEnsemble, field: &DriftField, diffusion: &DiffusionMatrix) -> Result<()> {
    if diffusion.dim() != paths.noise_dim() {
        return Err(Error::Dimension { expected: paths.noise_dim(), got: diffusion.dim() });
    }
    if field.dim() != paths.dim() {
        return Err(Error::Dimension { expected: paths.dim(), got: field.dim() });
    }
    if field.out_dim() != paths.noise_dim() {
        return Err(Error::Dimension { expected: paths.noise_dim(), got: field.out_dim() });
    }
    Ok(())
}

/// Knot of the reference grid holding `Y(s_δ)` for reference step `k`.
fn frozen_knot(fine: &TimeGrid, r: usize, k: usize, delta: f64) -> usize {
    floor_index(fine.knot(k), delta) * r
}

/// Q2 weights: with `G_k = σ⁻¹(Z0(Y_k) - b(s_δ, Y(s_δ)))`,
/// `log w = -Σ⟨G_k, ΔW_k⟩ - ½Σ|G_k|² h_k`.
///
/// The reference grid must refine `grid`; the weighted paths are then EM of
/// `b` at step `grid.delta()`.
pub fn weight_q2(
    paths: &PathEnsemble,
    b: &DriftField,
    reference: &ReferenceSystem,
    grid: &TimeGrid,
) -> Result<GirsanovWeights> {
    if paths.tag().is_degenerate() {
        return Err(invalid("Q2 weights need non-degenerate reference paths"));
    }
    frozen_weights(WeightKind::Q2, paths, b, reference, grid)
}

fn frozen_weights(
    kind: WeightKind,
    paths: &PathEnsemble,
    b: &DriftField,
    reference: &ReferenceSystem,
    grid: &TimeGrid,
) -> Result<GirsanovWeights> {
    let diffusion = reference.diffusion();
    check_dims(paths, b, diffusion)?;
    let fine = *paths.grid();
    let r = fine.refinement_of(grid)?;
    let d = diffusion.dim();
    let n = paths.dim();
    let delta = grid.delta();
    let mut bv = vec![0.0; d];
    let mut z0 = vec![0.0; d];
    let mut g = vec![0.0; d];
    let mut frozen: Option<(usize, usize)> = None;
    accumulate(kind, paths, |p, k, y, h| {
        let c = frozen_knot(&fine, r, k, delta);
        if frozen != Some((p, c)) {
            let ys = paths.state(p, c).expect("full recording");
            b.eval_into(grid.knot(c / r), ys, &mut bv)?;
            frozen = Some((p, c));
        }
        reference.z0_into(&y[n - d..], &mut z0);
        for i in 0..d {
            g[i] = bv[i] - z0[i];
        }
        diffusion.apply_inv(&g, h);
        Ok(())
    })
}

/// Weights for the kinetic reference `dX = Y dt, dY = Z0(Y) dt + σ dW`.
///
/// `field` is the velocity drift `b(t, x, y)` of the target (Q3), of its
/// mollification (Q4), or of the kinetic EM scheme at step `grid.delta()` (Q5).
pub fn weight_degenerate(
    kind: WeightKind,
    paths: &PathEnsemble,
    field: &DriftField,
    reference: &ReferenceSystem,
    grid: &TimeGrid,
) -> Result<GirsanovWeights> {
    if !paths.tag().is_degenerate() {
        return Err(invalid("degenerate weights need kinetic reference paths"));
    }
    match kind {
        WeightKind::Q3 | WeightKind::Q4 => {
            let diffusion = reference.diffusion();
            check_dims(paths, field, diffusion)?;
            let d = diffusion.dim();
            let fine = *paths.grid();
            let mut bv = vec![0.0; d];
            let mut z0 = vec![0.0; d];
            let mut g = vec![0.0; d];
            accumulate(kind, paths, |_p, k, y, h| {
                field.eval_into(fine.knot(k), y, &mut bv)?;
                reference.z0_into(&y[d..], &mut z0);
                for i in 0..d {
                    g[i] = bv[i] - z0[i];
                }
                diffusion.apply_inv(&g, h);
                Ok(())
            })
        }
        WeightKind::Q5 => frozen_weights(kind, paths, field, reference, grid),
        WeightKind::Q1 | WeightKind::Q2 => Err(invalid("use weight_q1 or weight_q2 for non-degenerate kinds")),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub ess: f64,
    /// Set when `ess < MIN_RELIABLE_ESS`.
    pub unreliable: bool,
}

/// Importance-sampled mean of `values` under `log_weights`.
///
/// Unnormalized: `mean(w f)` with the plain standard error. Self-normalized:
/// `Σ w f / Σ w` with the delta-method error `sqrt(Σ ŵ² (f - est)²)`.
/// Entries with `log_weight = -inf` count as zero weight.
pub fn weighted_expectation(log_weights: &[f64], values: &[f64], normalize: bool) -> Result<WeightedEstimate> {
    if log_weights.len() != values.len() {
        return Err(Error::Dimension { expected: log_weights.len(), got: values.len() });
    }
    if values.is_empty() {
        return Err(invalid("no samples"));
    }
    let n = values.len() as f64;
    let est = if normalize {
        let w = crate::model::normalize_log_weights(log_weights);
        let mut s = KahanSum::default();
        for (wi, f) in w.iter().zip(values) {
            if *wi > 0.0 {
                s.add(wi * f);
            }
        }
        let e = s.total();
        let mut v = KahanSum::default();
        for (wi, f) in w.iter().zip(values) {
            if *wi > 0.0 {
                v.add(wi * wi * (f - e) * (f - e));
            }
        }
        WeightedEstimate { estimate: e, std_error: v.total().sqrt(), ess: crate::model::ess(&w), unreliable: false }
    } else {
        let prod: Vec<f64> =
            log_weights.iter().zip(values).map(|(l, f)| if *l == f64::NEG_INFINITY { 0.0 } else { l.exp() * f }).collect();
        let m = crate::stats::mean(&prod);
        let se = if prod.len() > 1 { crate::stats::std_error(&prod) } else { 0.0 };
        let w: Vec<f64> = log_weights.iter().map(|l| l.exp()).collect();
        WeightedEstimate { estimate: m, std_error: se, ess: crate::model::ess(&w), unreliable: false }
    };
    let unreliable = !(est.ess >= MIN_RELIABLE_ESS.min(n));
    if unreliable {
        warn!("weighted estimate has effective sample size {:.1} (< {MIN_RELIABLE_ESS})", est.ess);
    }
    Ok(WeightedEstimate { unreliable, ..est })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NovikovReport {
    /// Monte Carlo estimate of `E exp(c ⟨M⟩_T)`, `c = ½` or `1`.
    pub estimate: f64,
    pub std_error: f64,
    /// Hill estimate of the tail index of `exp(c ⟨M⟩_T)`; values below 1
    /// suggest an infinite expectation.
    pub tail_index_hint: Option<f64>,
    /// Share of the sum carried by the single largest term.
    pub max_share: f64,
    pub likely_failure: bool,
}

/// Checks the Novikov-type moment of the weights' quadratic variation.
/// `half` selects `E exp(½⟨M⟩_T)`; otherwise `E exp(⟨M⟩_T)` is estimated.
pub fn novikov_diagnostic(weights: &GirsanovWeights, half: bool) -> NovikovReport {
    let c = if half { 0.5 } else { 1.0 };
    let mut qv: Vec<f64> = weights.quadratic_variation.iter().copied().filter(|v| v.is_finite()).collect();
    if qv.is_empty() {
        return NovikovReport {
            estimate: f64::NAN,
            std_error: f64::NAN,
            tail_index_hint: None,
            max_share: f64::NAN,
            likely_failure: true,
        };
    }
    let vals: Vec<f64> = qv.iter().map(|q| (c * q).exp()).collect();
    let estimate = crate::stats::mean(&vals);
    let std_error = if vals.len() > 1 { crate::stats::std_error(&vals) } else { 0.0 };
    let total = crate::stats::sum(&vals);
    let max_share = vals.iter().copied().fold(0.0, f64::max) / total;
    qv.sort_by(|a, b| b.total_cmp(a));
    let k = (qv.len() as f64).sqrt().floor() as usize;
    let tail_index_hint = if k >= 2 && qv.len() > k {
        let threshold = qv[k];
        let spread = qv[..k].iter().map(|q| c * (q - threshold)).sum::<f64>() / k as f64;
        (spread > 0.0).then(|| 1.0 / spread)
    } else {
        None
    };
    let likely_failure = tail_index_hint.is_some_and(|a| a < 1.0) || (vals.len() >= 100 && max_share > 0.5);
    NovikovReport { estimate, std_error, tail_index_hint, max_share, likely_failure }
}
