use statrs::function::gamma::gamma;

use crate::quad::gauss_legendre;

/// `ψ(x) = c · exp(-1/(1-|x|²))` on the open unit ball, zero outside, with
/// `c` chosen so that `∫ψ = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BumpKernel {
    dim: usize,
    norm_const: f64,
}

impl BumpKernel {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0);
        // ∫ψ = |S^{d-1}| ∫_0^1 r^{d-1} e^{-1/(1-r²)} dr, done on a graded
        // set of Gauss panels (the integrand is flat at r = 1).
        let (x, w) = gauss_legendre(24);
        let panels = 64;
        let mut radial = 0.0;
        for p in 0..panels {
            let (a, b) = (p as f64 / panels as f64, (p + 1) as f64 / panels as f64);
            for (xi, wi) in x.iter().zip(&w) {
                let r = 0.5 * (a + b) + 0.5 * (b - a) * xi;
                radial += 0.5 * (b - a) * wi * r.powi(dim as i32 - 1) * profile(r * r);
            }
        }
        let sphere = 2.0 * std::f64::consts::PI.powf(dim as f64 / 2.0) / gamma(dim as f64 / 2.0);
        Self { dim, norm_const: 1.0 / (sphere * radial) }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn normalization(&self) -> f64 {
        self.norm_const
    }

    #[inline]
    pub fn psi(&self, x: &[f64]) -> f64 {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        self.norm_const * profile(r2)
    }

    /// `ψ_ε(x) = ε^{-d} ψ(x/ε)`.
    #[inline]
    pub fn psi_eps(&self, x: &[f64], eps: f64) -> f64 {
        let r2: f64 = x.iter().map(|v| v * v).sum::<f64>() / (eps * eps);
        self.norm_const * profile(r2) / eps.powi(self.dim as i32)
    }
}

#[inline]
fn profile(r2: f64) -> f64 {
    if r2 >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - r2)).exp()
    }
}
