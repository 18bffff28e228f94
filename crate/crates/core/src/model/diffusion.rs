use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Constant diffusion coefficient `σ` together with its ellipticity constant.
///
/// `lambda` is the smallest constant with `λ⁻¹|x|² ≤ |σx|² ≤ λ|x|²`, i.e.
/// `max(σ_max², 1/σ_min²)` over the singular values of `σ`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionMatrix {
    sigma: DMatrix<f64>,
    a: DMatrix<f64>,
    sigma_inv: DMatrix<f64>,
    lambda: f64,
    // row-major copies for the inner simulation loops
    sigma_rm: Vec<f64>,
    sigma_inv_rm: Vec<f64>,
}

impl DiffusionMatrix {
    pub fn new(sigma: DMatrix<f64>) -> Result<Self> {
        if !sigma.is_square() || sigma.nrows() == 0 {
            return Err(Error::InvalidDiffusion(format!(
                "sigma must be a non-empty square matrix, got {}x{}",
                sigma.nrows(),
                sigma.ncols()
            )));
        }
        if sigma.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidDiffusion("non-finite entry".into()));
        }
        let sv = sigma.clone().singular_values();
        let s_max = sv.max();
        let s_min = sv.min();
        if s_min <= f64::EPSILON * s_max.max(1.0) {
            return Err(Error::InvalidDiffusion(format!(
                "sigma is singular (smallest singular value {s_min:.3e})"
            )));
        }
        let lambda = (s_max * s_max).max(1.0 / (s_min * s_min));
        let sigma_inv = sigma
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::InvalidDiffusion("sigma is not invertible".into()))?;
        let a = &sigma * sigma.transpose();
        let sigma_rm = row_major(&sigma);
        let sigma_inv_rm = row_major(&sigma_inv);
        Ok(Self { sigma, a, sigma_inv, lambda, sigma_rm, sigma_inv_rm })
    }

    /// Like [`DiffusionMatrix::new`] but checks `(H_σ)` against a prescribed `λ`.
    pub fn with_lambda(sigma: DMatrix<f64>, lambda: f64) -> Result<Self> {
        let dm = Self::new(sigma)?;
        if !(lambda >= 1.0) {
            return Err(Error::InvalidDiffusion(format!("lambda must be >= 1, got {lambda}")));
        }
        let sv = dm.sigma.clone().singular_values();
        let (s_min, s_max) = (sv.min(), sv.max());
        if s_min * s_min < 1.0 / lambda || s_max * s_max > lambda {
            return Err(Error::InvalidDiffusion(format!(
                "singular values [{s_min:.4}, {s_max:.4}] violate the ellipticity bound for lambda = {lambda}"
            )));
        }
        Ok(Self { lambda, ..dm })
    }

    pub fn identity(dim: usize) -> Self {
        Self::new(DMatrix::identity(dim, dim)).expect("identity is a valid diffusion")
    }

    pub fn scalar(dim: usize, s: f64) -> Result<Self> {
        Self::new(DMatrix::identity(dim, dim) * s)
    }

    pub fn dim(&self) -> usize {
        self.sigma.nrows()
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    /// `a = σσ*`.
    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn sigma_inv(&self) -> &DMatrix<f64> {
        &self.sigma_inv
    }

    /// `out = σ v`
    #[inline]
    pub fn apply(&self, v: &[f64], out: &mut [f64]) {
        matvec(&self.sigma_rm, v, out);
    }

    /// `out = σ⁻¹ v`
    #[inline]
    pub fn apply_inv(&self, v: &[f64], out: &mut [f64]) {
        matvec(&self.sigma_inv_rm, v, out);
    }
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    let mut v = Vec::with_capacity(m.len());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            v.push(m[(i, j)]);
        }
    }
    v
}

#[inline]
pub(crate) fn matvec(m: &[f64], v: &[f64], out: &mut [f64]) {
    let d = v.len();
    for (i, o) in out.iter_mut().enumerate().take(d) {
        let row = &m[i * d..(i + 1) * d];
        *o = row.iter().zip(v).map(|(a, b)| a * b).sum();
    }
}
