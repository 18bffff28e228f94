use crate::error::{invalid, Error, Result};
use crate::model::{norm_diff, EmpiricalMeasure};
use crate::stats::{median, KahanSum};

fn sorted_atoms(m: &EmpiricalMeasure) -> Vec<(f64, f64)> {
    let w = m.normalized_weights();
    let mut atoms: Vec<(f64, f64)> = m.samples().iter().copied().zip(w).filter(|a| a.1 > 0.0).collect();
    atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
    atoms
}

/// `W1 = ∫ |F_μ(x) - F_ν(x)| dx`, equal to `∫_0^1 |F_μ⁻¹ - F_ν⁻¹| du`, computed
/// exactly from the merged atoms of two 1-d (possibly weighted) measures.
pub fn w1_exact_1d(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> Result<f64> {
    for m in [mu, nu] {
        if m.dim() != 1 {
            return Err(Error::Dimension { expected: 1, got: m.dim() });
        }
        if m.is_empty() {
            return Err(invalid("empty measure"));
        }
    }
    let a = sorted_atoms(mu);
    let b = sorted_atoms(nu);
    let (mut i, mut j) = (0, 0);
    let (mut fa, mut fb) = (KahanSum::default(), KahanSum::default());
    let mut prev = a[0].0.min(b[0].0);
    let mut total = KahanSum::default();
    while i < a.len() || j < b.len() {
        let x = match (a.get(i), b.get(j)) {
            (Some(p), Some(q)) => p.0.min(q.0),
            (Some(p), None) => p.0,
            (None, Some(q)) => q.0,
            (None, None) => unreachable!(),
        };
        total.add((fa.total() - fb.total()).abs() * (x - prev));
        while i < a.len() && a[i].0 == x {
            fa.add(a[i].1);
            i += 1;
        }
        while j < b.len() && b[j].0 == x {
            fb.add(b[j].1);
            j += 1;
        }
        prev = x;
    }
    Ok(total.total())
}

/// Cost of pairing sample `i` of `mu` with sample `i` of `nu` after sorting both by
/// their first coordinate; an upper bound on `W1` for equal-size unweighted laws.
pub fn coupling_cost_upper(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> Result<f64> {
    if mu.dim() != nu.dim() {
        return Err(Error::Dimension { expected: mu.dim(), got: nu.dim() });
    }
    if mu.len() != nu.len() || !mu.is_unweighted() || !nu.is_unweighted() || mu.is_empty() {
        return Err(invalid("the pairing bound needs equal-size unweighted samples"));
    }
    let order = |m: &EmpiricalMeasure| {
        let mut idx: Vec<usize> = (0..m.len()).collect();
        idx.sort_by(|&p, &q| m.sample(p)[0].total_cmp(&m.sample(q)[0]));
        idx
    };
    let (oa, ob) = (order(mu), order(nu));
    let mut s = KahanSum::default();
    for (p, q) in oa.iter().zip(&ob) {
        s.add(norm_diff(mu.sample(*p), nu.sample(*q)));
    }
    Ok(s.total() / mu.len() as f64)
}

/// Median `W1` between independent same-law pairs `draw(2i)`, `draw(2i+1)`:
/// the level below which distances between simulated laws are noise.
pub fn w1_floor<F>(mut draw: F, reps: usize) -> Result<f64>
where
    F: FnMut(u64) -> Result<EmpiricalMeasure>,
{
    if reps == 0 {
        return Err(invalid("at least one repetition is needed"));
    }
    let mut d = Vec::with_capacity(reps);
    for i in 0..reps as u64 {
        let a = draw(2 * i)?;
        let b = draw(2 * i + 1)?;
        d.push(w1_exact_1d(&a, &b)?);
    }
    Ok(median(&d))
}

/// `sqrt(max(d² - floor², 0))`.
pub fn subtract_floor(d: f64, floor: f64) -> f64 {
    (d * d - floor * floor).max(0.0).sqrt()
}
