use crate::error::{invalid, Error, Result};
use crate::model::{DomainBox, DriftField, ReferenceSystem};
use crate::quad::midpoint_tensor;

/// Result of a quadrature estimate of `μ0(exp(η|Z(t,·)|²))`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeReport {
    /// Estimate at the finest resolution tried (`+∞` when flagged infinite).
    pub value: f64,
    pub converged: bool,
    /// Non-converging, growing sequence of estimates.
    pub infinite: bool,
    /// `(points per axis, estimate)` for every refinement level.
    pub levels: Vec<(usize, f64)>,
}

const REL_TOL: f64 = 0.01;
const EXTRA_DOUBLINGS: usize = 3;
const BOUNDARY_RATIO: f64 = 1e-12;

fn check_box(reference: &ReferenceSystem, b: DomainBox, q: usize) -> Result<()> {
    let d = reference.dim();
    let peak = midpoint_peak(reference, b, q.min(400));
    // boundary: each face, sampled on a coarse grid of the remaining coordinates
    let n = 41;
    let mut worst = f64::NEG_INFINITY;
    let mut x = vec![0.0; d];
    let mut idx = vec![0usize; d.saturating_sub(1)];
    for face in 0..d {
        for side in [b.lo, b.hi] {
            idx.iter_mut().for_each(|i| *i = 0);
            loop {
                let mut c = 0;
                for (k, xk) in x.iter_mut().enumerate() {
                    if k == face {
                        *xk = side;
                    } else {
                        *xk = b.lo + (b.hi - b.lo) * idx[c] as f64 / (n - 1) as f64;
                        c += 1;
                    }
                }
                worst = worst.max(reference.log_mu0_density(&x));
                let mut c = 0;
                loop {
                    if c == idx.len() {
                        break;
                    }
                    idx[c] += 1;
                    if idx[c] < n {
                        break;
                    }
                    idx[c] = 0;
                    c += 1;
                }
                if c == idx.len() {
                    break;
                }
            }
        }
    }
    let ratio = (worst - peak).exp();
    if ratio > BOUNDARY_RATIO {
        return Err(Error::BoxTooSmall { ratio });
    }
    Ok(())
}

fn midpoint_peak(reference: &ReferenceSystem, b: DomainBox, q: usize) -> f64 {
    let mut best = f64::NEG_INFINITY;
    midpoint_tensor(reference.dim(), b, q, |x| {
        best = best.max(reference.log_mu0_density(x));
        0.0
    });
    best
}

fn probe_value(
    z: &DriftField,
    reference: &ReferenceSystem,
    eta: f64,
    t: f64,
    b: DomainBox,
    q: usize,
) -> Result<f64> {
    let mut zv = vec![0.0; z.out_dim()];
    let mut err = None;
    let v = midpoint_tensor(reference.dim(), b, q, |x| {
        if err.is_some() {
            return 0.0;
        }
        if let Err(e) = z.eval_into(t, x, &mut zv) {
            err = Some(e);
            return 0.0;
        }
        let z2: f64 = zv.iter().map(|v| v * v).sum();
        (eta * z2 + reference.log_mu0_density(x)).exp()
    });
    match err {
        Some(e) => Err(e),
        None => Ok(v),
    }
}

/// Quadrature estimate of `∫ exp(η|Z(t,x)|²) e^{-V(x)} dx` on `box^d`.
///
/// The estimate is converged when doubling `quad_points` changes it by less
/// than 1%; up to three further doublings are tried before a growing sequence
/// is flagged as infinite. `quad_points` should be a multiple of the box
/// width's reciprocal lattice so that no node lands on a singular point.
pub fn integrability_probe(
    z: &DriftField,
    reference: &ReferenceSystem,
    eta: f64,
    t: f64,
    domain: DomainBox,
    quad_points: usize,
) -> Result<ProbeReport> {
    if !(eta > 0.0) {
        return Err(invalid("eta must be positive"));
    }
    if z.dim() != reference.dim() {
        return Err(Error::Dimension { expected: reference.dim(), got: z.dim() });
    }
    if quad_points == 0 {
        return Err(invalid("quad_points must be positive"));
    }
    check_box(reference, domain, quad_points)?;
    let mut levels = Vec::new();
    let mut q = quad_points;
    let mut prev = probe_value(z, reference, eta, t, domain, q)?;
    levels.push((q, prev));
    for _ in 0..=EXTRA_DOUBLINGS {
        q *= 2;
        let v = probe_value(z, reference, eta, t, domain, q)?;
        levels.push((q, v));
        if v.is_finite() && prev.is_finite() && (v - prev).abs() <= REL_TOL * v.abs() {
            return Ok(ProbeReport { value: v, converged: true, infinite: false, levels });
        }
        prev = v;
    }
    let growing = levels.windows(2).all(|w| !(w[1].1 <= w[0].1 * (1.0 + REL_TOL)));
    let value = if growing { f64::INFINITY } else { prev };
    Ok(ProbeReport { value, converged: false, infinite: growing, levels })
}

/// Worst case of [`integrability_probe`] over sampled times and, for kinetic
/// fields `Z(t, x1, x2)` (input dimension `2d`), over sampled positions `x1`.
/// Covers the `sup_t` / `sup_{x1}` forms of the integrability conditions.
pub fn sup_integrability_probe(
    z: &DriftField,
    reference: &ReferenceSystem,
    eta: f64,
    times: &[f64],
    positions: &[Vec<f64>],
    domain: DomainBox,
    quad_points: usize,
) -> Result<ProbeReport> {
    let d = reference.dim();
    let mut reports = Vec::new();
    for &t in times {
        if z.dim() == d {
            reports.push(integrability_probe(z, reference, eta, t, domain, quad_points)?);
        } else if z.dim() == 2 * d {
            for x1 in positions {
                let x1 = x1.clone();
                let inner = z.clone();
                let section = DriftField::with_dims("section", d, z.out_dim(), move |t, x2, out| {
                    let mut x = x1.clone();
                    x.extend_from_slice(x2);
                    inner.eval_into(t, &x, out)
                });
                reports.push(integrability_probe(&section, reference, eta, t, domain, quad_points)?);
            }
        } else {
            return Err(Error::Dimension { expected: d, got: z.dim() });
        }
    }
    if let Some(bad) = reports.iter().find(|r| r.infinite).or_else(|| reports.iter().find(|r| !r.converged)) {
        return Ok(bad.clone());
    }
    reports
        .into_iter()
        .max_by(|a, b| a.value.total_cmp(&b.value))
        .ok_or_else(|| invalid("no probe points given"))
}
