use crate::stats::KahanSum;

/// Weighted point cloud in `R^d`; `log_weights` are all zero for unweighted laws.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalMeasure {
    dim: usize,
    samples: Vec<f64>,
    log_weights: Vec<f64>,
}

impl EmpiricalMeasure {
    pub fn unweighted(dim: usize, samples: Vec<f64>) -> Self {
        assert!(dim > 0 && samples.len() % dim == 0, "sample buffer is not a multiple of the dimension");
        let n = samples.len() / dim;
        Self { dim, samples, log_weights: vec![0.0; n] }
    }

    pub fn weighted(dim: usize, samples: Vec<f64>, log_weights: Vec<f64>) -> Self {
        assert!(dim > 0 && samples.len() == log_weights.len() * dim, "samples and weights disagree");
        Self { dim, samples, log_weights }
    }

    pub fn from_points(points: &[Vec<f64>]) -> Self {
        let dim = points.first().map_or(1, Vec::len);
        Self::unweighted(dim, points.iter().flatten().copied().collect())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.log_weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_weights.is_empty()
    }

    pub fn sample(&self, i: usize) -> &[f64] {
        &self.samples[i * self.dim..(i + 1) * self.dim]
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    pub fn is_unweighted(&self) -> bool {
        self.log_weights.iter().all(|&w| w == 0.0)
    }

    /// Weights rescaled to sum to one.
    pub fn normalized_weights(&self) -> Vec<f64> {
        normalize_log_weights(&self.log_weights)
    }

    /// `(Σw)² / Σw²`.
    pub fn ess(&self) -> f64 {
        ess(&self.normalized_weights())
    }

    /// Weighted mean of `f` over the samples.
    pub fn expect(&self, f: impl Fn(&[f64]) -> f64) -> f64 {
        let w = self.normalized_weights();
        let mut s = KahanSum::default();
        for (i, wi) in w.iter().enumerate() {
            s.add(wi * f(self.sample(i)));
        }
        s.total()
    }

    /// Projection onto coordinate `c`, keeping weights.
    pub fn marginal(&self, c: usize) -> EmpiricalMeasure {
        let samples = (0..self.len()).map(|i| self.sample(i)[c]).collect();
        Self::weighted(1, samples, self.log_weights.clone())
    }
}

pub fn normalize_log_weights(log_w: &[f64]) -> Vec<f64> {
    let m = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return vec![1.0 / log_w.len().max(1) as f64; log_w.len()];
    }
    let w: Vec<f64> = log_w.iter().map(|l| (l - m).exp()).collect();
    let mut s = KahanSum::default();
    w.iter().for_each(|v| s.add(*v));
    let total = s.total();
    w.into_iter().map(|v| v / total).collect()
}

pub fn ess(w: &[f64]) -> f64 {
    let s: f64 = w.iter().sum();
    let s2: f64 = w.iter().map(|v| v * v).sum();
    if s2 == 0.0 {
        0.0
    } else {
        s * s / s2
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn weights_normalize_and_ess_in_range(lw in proptest::collection::vec(-30.0f64..30.0, 1..200)) {
            let n = lw.len();
            let m = EmpiricalMeasure::weighted(1, vec![0.0; n], lw);
            let w = m.normalized_weights();
            prop_assert!(w.iter().all(|&v| v > 0.0));
            prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let e = m.ess();
            prop_assert!(e >= 1.0 - 1e-9 && e <= n as f64 + 1e-9);
        }
    }

    #[test]
    fn unweighted_mean() {
        let m = EmpiricalMeasure::unweighted(1, vec![1.0, 2.0, 3.0, 6.0]);
        assert!((m.expect(|x| x[0]) - 3.0).abs() < 1e-15);
        assert!((m.ess() - 4.0).abs() < 1e-12);
    }
}
