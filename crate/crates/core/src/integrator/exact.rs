use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Error, Result};
use crate::model::{DiffusionMatrix, EmpiricalMeasure, NoiseSource};

/// Mean and covariance of a Gaussian law.
#[derive(Debug, Clone)]
pub struct GaussianLaw {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

/// Exact transitions of the linear SDE `dX = A X dt + B dW`, where the noise
/// `B = [0; σ]` drives the last `d` of the `n` coordinates.
#[derive(Debug, Clone)]
pub struct LinearGaussianOracle {
    a: DMatrix<f64>,
    diffusion: DiffusionMatrix,
}

/// One exact step of length `h`: `x' = Φ x + L ζ` with `ζ = (ξ, η)`, where `ξ` are
/// the `d` Brownian normals of the step and `η` are `n - d` auxiliary normals.
#[derive(Debug, Clone)]
pub(crate) struct Transition {
    n: usize,
    phi: Vec<f64>,
    pub(crate) l: Vec<f64>,
}

impl Transition {
    #[inline]
    pub(crate) fn apply(&self, x: &mut [f64], zeta: &[f64], tmp: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let row = &self.phi[i * n..(i + 1) * n];
            let lrow = &self.l[i * n..(i + 1) * n];
            let mut v = 0.0;
            for j in 0..n {
                v += row[j] * x[j] + lrow[j] * zeta[j];
            }
            tmp[i] = v;
        }
        x.copy_from_slice(&tmp[..n]);
    }
}

impl LinearGaussianOracle {
    pub fn new(a: DMatrix<f64>, diffusion: DiffusionMatrix) -> Result<Self> {
        if !a.is_square() || a.nrows() < diffusion.dim() {
            return Err(invalid(format!(
                "drift matrix must be square of size at least {}, got {}x{}",
                diffusion.dim(),
                a.nrows(),
                a.ncols()
            )));
        }
        Ok(Self { a, diffusion })
    }

    /// `dX = -θ X dt + σ dW`.
    pub fn ou(theta: f64, diffusion: DiffusionMatrix) -> Result<Self> {
        if !(theta > 0.0) {
            return Err(invalid(format!("theta must be positive, got {theta}")));
        }
        let d = diffusion.dim();
        Self::new(DMatrix::identity(d, d) * -theta, diffusion)
    }

    /// `dX1 = X2 dt`, `dX2 = (-θ X1 - X2) dt + σ dW`.
    pub fn kinetic_ou(theta: f64, diffusion: DiffusionMatrix) -> Result<Self> {
        let d = diffusion.dim();
        let mut a = DMatrix::zeros(2 * d, 2 * d);
        for i in 0..d {
            a[(i, d + i)] = 1.0;
            a[(d + i, i)] = -theta;
            a[(d + i, d + i)] = -1.0;
        }
        Self::new(a, diffusion)
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn noise_dim(&self) -> usize {
        self.diffusion.dim()
    }

    fn noise_cov(&self) -> DMatrix<f64> {
        let (n, d) = (self.state_dim(), self.noise_dim());
        let mut g = DMatrix::zeros(n, n);
        g.view_mut((n - d, n - d), (d, d)).copy_from(self.diffusion.a());
        g
    }

    /// `(e^{Ah}, ∫_0^h e^{As} G e^{A*s} ds)` by the block-exponential construction.
    fn phi_cov(&self, h: f64) -> (DMatrix<f64>, DMatrix<f64>) {
        let n = self.state_dim();
        let mut m = DMatrix::zeros(2 * n, 2 * n);
        m.view_mut((0, 0), (n, n)).copy_from(&(-&self.a * h));
        m.view_mut((0, n), (n, n)).copy_from(&(self.noise_cov() * h));
        m.view_mut((n, n), (n, n)).copy_from(&(self.a.transpose() * h));
        let e = m.exp();
        let phi = e.view((n, n), (n, n)).transpose();
        let cov = &phi * e.view((0, n), (n, n));
        let cov = (&cov + cov.transpose()) * 0.5;
        (phi, cov)
    }

    /// Exact law of `X(t)` started at `x0`.
    pub fn law(&self, x0: &[f64], t: f64) -> Result<GaussianLaw> {
        let n = self.state_dim();
        if x0.len() != n {
            return Err(Error::Dimension { expected: n, got: x0.len() });
        }
        let (phi, cov) = self.phi_cov(t);
        Ok(GaussianLaw { mean: phi * DVector::from_column_slice(x0), cov })
    }

    pub(crate) fn transition(&self, h: f64) -> Result<Transition> {
        let (n, d) = (self.state_dim(), self.noise_dim());
        let (phi, cov) = self.phi_cov(h);
        let m = n - d;
        let c11 = cov.view((m, m), (d, d)).into_owned();
        let c21 = cov.view((0, m), (m, d)).into_owned();
        let c22 = cov.view((0, 0), (m, m)).into_owned();
        let l11 = noise_factor(&c11, &self.diffusion)?;
        let l11_inv_t = l11
            .clone()
            .try_inverse()
            .ok_or_else(|| invalid("singular transition covariance"))?
            .transpose();
        let l21 = &c21 * l11_inv_t;
        let schur = &c22 - &l21 * l21.transpose();
        let l22 = psd_cholesky(&((&schur + schur.transpose()) * 0.5));
        let mut l = DMatrix::zeros(n, n);
        l.view_mut((m, 0), (d, d)).copy_from(&l11);
        l.view_mut((0, 0), (m, d)).copy_from(&l21);
        l.view_mut((0, d), (m, m)).copy_from(&l22);
        Ok(Transition { n, phi: row_major(&phi), l: row_major(&l) })
    }

    /// `n` independent draws of `X(t)`; path `p` uses step 0 of the noise stream
    /// and, when `n > d`, step 0 of auxiliary channel 1.
    pub fn sample(&self, x0: &[f64], t: f64, n_paths: usize, noise: &NoiseSource) -> Result<EmpiricalMeasure> {
        let (n, d) = (self.state_dim(), self.noise_dim());
        if x0.len() != n {
            return Err(Error::Dimension { expected: n, got: x0.len() });
        }
        if noise.dim() != d {
            return Err(Error::Dimension { expected: d, got: noise.dim() });
        }
        let tr = self.transition(t)?;
        let aux = (n > d).then(|| noise.channel(1).with_dim(n - d));
        let mut samples = Vec::with_capacity(n_paths * n);
        let (mut zeta, mut x, mut tmp) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        for p in 0..n_paths {
            noise.standard_normals(p, 0, &mut zeta[..d]);
            if let Some(a) = &aux {
                a.standard_normals(p, 0, &mut zeta[d..]);
            }
            x.copy_from_slice(x0);
            tr.apply(&mut x, &zeta, &mut tmp);
            samples.extend_from_slice(&x);
        }
        Ok(EmpiricalMeasure::unweighted(n, samples))
    }
}

/// Factor of the noise block: `sqrt(k) σ` when the block is `k a`, so the exact
/// transition and EM share the direction of the Brownian increment.
fn noise_factor(c11: &DMatrix<f64>, diffusion: &DiffusionMatrix) -> Result<DMatrix<f64>> {
    let a = diffusion.a();
    let k = c11.trace() / a.trace();
    let scale = c11.amax().max(f64::MIN_POSITIVE);
    if k > 0.0 && (c11 - a * k).amax() <= 1e-10 * scale {
        return Ok(diffusion.sigma() * k.sqrt());
    }
    c11.clone()
        .cholesky()
        .map(|c| c.l())
        .ok_or_else(|| invalid("noise block of the transition covariance is not positive definite"))
}

fn psd_cholesky(s: &DMatrix<f64>) -> DMatrix<f64> {
    if s.nrows() == 0 {
        return s.clone();
    }
    if let Some(c) = s.clone().cholesky() {
        return c.l();
    }
    // rounding can leave the Schur complement marginally indefinite
    let eig = s.clone().symmetric_eigen();
    let vals = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    let half = &eig.eigenvectors * DMatrix::from_diagonal(&vals);
    half.transpose().qr().r().transpose()
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

/// Independent samples of `N(x0 e^{-θT}, a (1 - e^{-2θT}) / (2θ))`.
pub fn exact_ou_sampler(
    theta: f64,
    diffusion: &DiffusionMatrix,
    x0: &[f64],
    horizon: f64,
    n: usize,
    noise: &NoiseSource,
) -> Result<EmpiricalMeasure> {
    LinearGaussianOracle::ou(theta, diffusion.clone())?.sample(x0, horizon, n, noise)
}
