use crate::error::{invalid, Error, Result};
use crate::model::EmpiricalMeasure;
use crate::stats::{mean, std_error, KahanSum};

use super::family::BoundedFunction;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeakError {
    pub diff: f64,
    pub std_error: f64,
}

fn weighted_mean_and_error(m: &EmpiricalMeasure, f: &BoundedFunction) -> (f64, f64) {
    let w = m.normalized_weights();
    let vals: Vec<f64> = (0..m.len()).map(|i| f.eval(m.sample(i))).collect();
    let mut s = KahanSum::default();
    for (wi, v) in w.iter().zip(&vals) {
        s.add(wi * v);
    }
    let e = s.total();
    let mut v = KahanSum::default();
    for (wi, x) in w.iter().zip(&vals) {
        v.add(wi * wi * (x - e) * (x - e));
    }
    let var = if m.is_unweighted() && m.len() > 1 {
        // unbiased for plain samples
        v.total() * m.len() as f64 / (m.len() as f64 - 1.0)
    } else {
        v.total()
    };
    (e, var.sqrt())
}

/// `|E_a f - E_b f|` for independent laws, with the combined Monte Carlo error.
pub fn weak_error(law_a: &EmpiricalMeasure, law_b: &EmpiricalMeasure, f: &BoundedFunction) -> Result<WeakError> {
    if law_a.dim() != law_b.dim() {
        return Err(Error::Dimension { expected: law_a.dim(), got: law_b.dim() });
    }
    if law_a.is_empty() || law_b.is_empty() {
        return Err(invalid("empty measure"));
    }
    let (ea, sa) = weighted_mean_and_error(law_a, f);
    let (eb, sb) = weighted_mean_and_error(law_b, f);
    Ok(WeakError { diff: (ea - eb).abs(), std_error: (sa * sa + sb * sb).sqrt() })
}

/// `E[f(a_i) - f(b_i)]` for coupled samples (`a_i`, `b_i` driven by the same
/// noise), with the paired standard error. The sign is kept.
pub fn paired_weak_error(a: &EmpiricalMeasure, b: &EmpiricalMeasure, f: &BoundedFunction) -> Result<WeakError> {
    if a.dim() != b.dim() {
        return Err(Error::Dimension { expected: a.dim(), got: b.dim() });
    }
    if a.len() != b.len() || !a.is_unweighted() || !b.is_unweighted() {
        return Err(invalid("paired errors need equal-size unweighted samples"));
    }
    if a.len() < 2 {
        return Err(invalid("paired errors need at least two samples"));
    }
    let d: Vec<f64> = (0..a.len()).map(|i| f.eval(a.sample(i)) - f.eval(b.sample(i))).collect();
    Ok(WeakError { diff: mean(&d), std_error: std_error(&d) })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(xs: &[f64]) -> EmpiricalMeasure {
        EmpiricalMeasure::unweighted(1, xs.to_vec())
    }

    #[test]
    fn same_samples_give_zero() {
        let a = m(&[0.1, -0.3, 2.0]);
        assert_eq!(weak_error(&a, &a, &BoundedFunction::tanh(0)).unwrap().diff, 0.0);
        assert_eq!(paired_weak_error(&a, &a, &BoundedFunction::tanh(0)).unwrap().diff, 0.0);
    }

    #[test]
    fn constant_function_is_blind() {
        let c = BoundedFunction::new("one", 1.0, |_x| 1.0);
        let e = weak_error(&m(&[0.0, 5.0]), &m(&[-3.0, 1.0, 2.0]), &c).unwrap();
        assert_eq!(e.diff, 0.0);
    }

    #[test]
    fn error_scale() {
        let r = BoundedFunction::ramp(0);
        let e = weak_error(&m(&[0.0, 1.0]), &m(&[0.5]), &r).unwrap();
        assert_eq!(e.diff, 0.0);
        assert!((e.std_error - 0.5f64.sqrt() / 2f64.sqrt() * 1.0).abs() < 1e-12);
        let p = paired_weak_error(&m(&[0.0, 1.0, 2.0]), &m(&[0.5, 0.5, 0.5]), &r).unwrap();
        assert!((p.diff - 1.0 / 6.0).abs() < 1e-15);
    }
}
