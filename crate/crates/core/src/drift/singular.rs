//! The log-series drift `b(x) = sqrt(Σ_{n≥1} log(1 + 1/(x-n)²)) - x` on `R`.

use crate::error::{invalid, Error, Result};
use crate::model::DriftField;

/// Parameters of the truncated log series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogSeries {
    pub n_max: usize,
    pub tail_bound_tol: f64,
}

/// Integers in `1..=SINGULAR_LISTED` are recorded as singular-point metadata;
/// every positive integer is detected at evaluation time.
const SINGULAR_LISTED: usize = 100;

impl LogSeries {
    pub fn new(n_max: usize, tail_bound_tol: f64) -> Result<Self> {
        if n_max < 1 {
            return Err(invalid("n_max must be at least 1"));
        }
        if !(tail_bound_tol > 0.0) {
            return Err(invalid("tail_bound_tol must be positive"));
        }
        Ok(Self { n_max, tail_bound_tol })
    }

    /// Truncation index `N(x) = max(n_max, ceil(x) + ceil(1/tol))`; the dropped
    /// tail is below `1/(N - x) <= tol`.
    pub fn truncation(&self, x: f64) -> usize {
        let n = x.ceil() + (1.0 / self.tail_bound_tol).ceil();
        (n.max(1.0) as usize).max(self.n_max)
    }

    /// `Σ_{n=1}^{N} log(1 + 1/(x-n)²)`, summed from the smallest terms up.
    pub fn partial_sum(&self, x: f64, n_terms: usize) -> f64 {
        (1..=n_terms).rev().map(|n| (1.0 / ((x - n as f64) * (x - n as f64))).ln_1p()).sum()
    }

    /// `Z(x)²` with adaptive truncation.
    pub fn z_squared(&self, x: f64) -> Result<f64> {
        if x >= 1.0 && x == x.round() {
            return Err(Error::SingularPoint { point: vec![x] });
        }
        Ok(self.partial_sum(x, self.truncation(x)))
    }

    pub fn z(&self, x: f64) -> Result<f64> {
        self.z_squared(x).map(f64::sqrt)
    }

    fn singular_points(&self) -> Vec<Vec<f64>> {
        (1..=SINGULAR_LISTED.max(self.n_max)).map(|n| vec![n as f64]).collect()
    }
}

/// The singular part `Z(x)` alone.
pub fn singular_log_z(n_max: usize, tail_bound_tol: f64) -> Result<DriftField> {
    let s = LogSeries::new(n_max, tail_bound_tol)?;
    let pts = s.singular_points();
    Ok(DriftField::new("singular-log-z", 1, move |_t, x, out| {
        out[0] = s.z(x[0])?;
        Ok(())
    })
    .with_alpha(1.0)
    .with_singular_points(pts))
}

/// `b(x) = Z(x) - x`.
pub fn singular_log_drift(n_max: usize, tail_bound_tol: f64) -> Result<DriftField> {
    let s = LogSeries::new(n_max, tail_bound_tol)?;
    let pts = s.singular_points();
    Ok(DriftField::new("singular-log", 1, move |_t, x, out| {
        out[0] = s.z(x[0])? - x[0];
        Ok(())
    })
    .with_alpha(1.0)
    .with_singular_points(pts))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn value_at_origin_matches_product_formula() {
        // Π(1 + 1/n²) = sinh(π)/π
        let pi = std::f64::consts::PI;
        let closed = (pi.sinh() / pi).ln().sqrt();
        let s = LogSeries::new(10, 1e-6).unwrap();
        let z = s.z(0.0).unwrap();
        // tail below 1e-6 in Z², so Z is within 1e-6/(2Z)
        assert!((z - closed).abs() < 1e-6, "{z} vs {closed}");
        assert!((closed - 1.140_98).abs() < 1e-5);
        let b = singular_log_drift(10, 1e-6).unwrap();
        assert!((b.eval(0.0, &[0.0]).unwrap()[0] - closed).abs() < 1e-6);
    }

    #[test]
    fn singular_at_positive_integers() {
        let b = singular_log_drift(10, 1e-3).unwrap();
        assert!(matches!(b.eval(0.0, &[1.0]), Err(Error::SingularPoint { .. })));
        assert!(matches!(b.eval(0.0, &[7.0]), Err(Error::SingularPoint { .. })));
        assert!(b.eval(0.0, &[0.0]).is_ok());
        assert!(b.eval(0.0, &[-3.0]).is_ok());
    }

    #[test]
    fn partial_sums_monotone_and_tail_bounded() {
        let s = LogSeries::new(1, 1e-3).unwrap();
        let x = 0.5;
        let small = s.partial_sum(x, 1_000);
        let big = s.partial_sum(x, 1_000_000);
        assert!(big >= small);
        assert!(big - small < 1.0 / (1_000.0 - x));
        let mut prev = 0.0;
        for n in [1usize, 2, 5, 10, 100, 1000] {
            let v = s.partial_sum(x, n);
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn adaptive_truncation_error_against_tenfold_n() {
        let s = LogSeries::new(5, 1e-2).unwrap();
        for x in [-4.3, -0.2, 0.5, 2.5, 13.7, 40.1] {
            let n = s.truncation(x);
            let reference = s.partial_sum(x, 10 * n);
            let approx = s.z_squared(x).unwrap();
            assert!(reference - approx >= 0.0);
            assert!(reference - approx < s.tail_bound_tol, "x = {x}");
        }
    }
}
