use std::fmt;
use std::sync::Arc;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use super::diffusion::DiffusionMatrix;
use super::field::{norm_diff, DriftField};
use crate::error::{invalid, Error, Result};

pub type PotentialFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type GradientFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

/// Axis-aligned box `[lo, hi]^d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DomainBox {
    pub lo: f64,
    pub hi: f64,
}

impl DomainBox {
    pub fn symmetric(half_width: f64) -> Self {
        Self { lo: -half_width, hi: half_width }
    }
}

/// How the potential `V` of the reference measure `μ0 = e^{-V} dx` is given.
#[derive(Clone)]
pub enum PotentialSpec {
    /// `V(x) = |x|²/2 + (d/2) log 2π`.
    StandardGaussian { dim: usize },
    Custom {
        dim: usize,
        potential: PotentialFn,
        gradient: Option<GradientFn>,
        /// Analytic Lipschitz constant of `Z0`, if known.
        k0: Option<f64>,
        /// Box used for the sampled Lipschitz estimate and the normalization check.
        sample_box: DomainBox,
    },
}

impl PotentialSpec {
    fn dim(&self) -> usize {
        match self {
            PotentialSpec::StandardGaussian { dim } | PotentialSpec::Custom { dim, .. } => *dim,
        }
    }
}

/// Reference system `(V, μ0, Z0 = -a∇V, K0)` driving the auxiliary process
/// `dY = Z0(Y) dt + σ dW`.
#[derive(Clone)]
pub struct ReferenceSystem {
    name: String,
    dim: usize,
    potential: PotentialFn,
    gradient: GradientFn,
    diffusion: DiffusionMatrix,
    z0: DriftField,
    k0: f64,
}

impl fmt::Debug for ReferenceSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ReferenceSystem")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("k0", &self.k0)
            .field("lambda", &self.diffusion.lambda())
            .finish()
    }
}

const K0_SAMPLES: usize = 10_000;
const K0_INFLATION: f64 = 1.1;
const NORMALIZATION_TOL: f64 = 1e-3;

pub fn make_reference_system(spec: PotentialSpec, diffusion: DiffusionMatrix) -> Result<ReferenceSystem> {
    let dim = spec.dim();
    if diffusion.dim() != dim {
        return Err(Error::Dimension { expected: dim, got: diffusion.dim() });
    }
    let a_rm: Vec<f64> = {
        let a = diffusion.a();
        (0..dim).flat_map(|i| (0..dim).map(move |j| (i, j))).map(|(i, j)| a[(i, j)]).collect()
    };
    let (name, potential, gradient, k0_known, sample_box): (String, PotentialFn, GradientFn, Option<f64>, _) =
        match spec {
            PotentialSpec::StandardGaussian { dim } => {
                let c = 0.5 * dim as f64 * (2.0 * std::f64::consts::PI).ln();
                let a_max = diffusion.a().clone().symmetric_eigenvalues().max();
                (
                    "gaussian".into(),
                    Arc::new(move |x: &[f64]| 0.5 * x.iter().map(|v| v * v).sum::<f64>() + c),
                    Arc::new(|x: &[f64], g: &mut [f64]| g.copy_from_slice(x)),
                    Some(a_max),
                    None,
                )
            }
            PotentialSpec::Custom { potential, gradient, k0, sample_box, .. } => {
                let gradient = gradient.ok_or(Error::MissingGradient)?;
                ("custom".into(), potential, gradient, k0, Some(sample_box))
            }
        };

    let grad = gradient.clone();
    let z0 = DriftField::new(format!("z0-{name}"), dim, move |_t, x, out| {
        let mut g = [0.0f64; 8];
        let g = &mut g[..dim];
        grad(x, g);
        for (i, o) in out.iter_mut().enumerate() {
            *o = -(0..dim).map(|j| a_rm[i * dim + j] * g[j]).sum::<f64>();
        }
        Ok(())
    })
    .with_alpha(1.0);

    let k0 = match (k0_known, sample_box) {
        (Some(k), _) => k,
        (None, Some(b)) => estimate_lipschitz(&z0, dim, b)? * K0_INFLATION,
        (None, None) => unreachable!("gaussian potentials carry an analytic K0"),
    };
    if !(k0 > 0.0 && k0.is_finite()) {
        return Err(invalid(format!("Lipschitz constant of Z0 must be positive, got {k0}")));
    }

    if let Some(b) = sample_box {
        if dim <= 2 {
            let mass = box_mass(&*potential, dim, b);
            if (mass - 1.0).abs() > NORMALIZATION_TOL {
                return Err(invalid(format!("reference measure has mass {mass:.6} on the sample box, expected 1")));
            }
        } else {
            log::warn!("normalization of a user-supplied potential in dimension {dim} is not checked");
        }
    }

    Ok(ReferenceSystem { name, dim, potential, gradient, diffusion, z0, k0 })
}

fn estimate_lipschitz(z0: &DriftField, dim: usize, b: DomainBox) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0f_4b0);
    let mut uniform = || b.lo + (b.hi - b.lo) * ((rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64);
    let mut best = 0.0f64;
    for _ in 0..K0_SAMPLES {
        let x: Vec<f64> = (0..dim).map(|_| uniform()).collect();
        let y: Vec<f64> = (0..dim).map(|_| uniform()).collect();
        let dxy = norm_diff(&x, &y);
        if dxy < 1e-9 {
            continue;
        }
        let q = norm_diff(&z0.eval(0.0, &x)?, &z0.eval(0.0, &y)?) / dxy;
        best = best.max(q);
    }
    Ok(best)
}

fn box_mass(v: &(dyn Fn(&[f64]) -> f64 + Send + Sync), dim: usize, b: DomainBox) -> f64 {
    let n = if dim == 1 { 4000 } else { 600 };
    let h = (b.hi - b.lo) / n as f64;
    let node = |i: usize| b.lo + (i as f64 + 0.5) * h;
    match dim {
        1 => (0..n).map(|i| (-v(&[node(i)])).exp()).sum::<f64>() * h,
        _ => (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .map(|(i, j)| (-v(&[node(i), node(j)])).exp())
            .sum::<f64>()
            * h
            * h,
    }
}

impl ReferenceSystem {
    pub fn standard_gaussian(diffusion: DiffusionMatrix) -> Result<Self> {
        let dim = diffusion.dim();
        make_reference_system(PotentialSpec::StandardGaussian { dim }, diffusion)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn diffusion(&self) -> &DiffusionMatrix {
        &self.diffusion
    }

    pub fn k0(&self) -> f64 {
        self.k0
    }

    pub fn potential(&self, x: &[f64]) -> f64 {
        (self.potential)(x)
    }

    pub fn grad_potential(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.dim];
        (self.gradient)(x, &mut g);
        g
    }

    /// `log dμ0/dx = -V(x)`.
    pub fn log_mu0_density(&self, x: &[f64]) -> f64 {
        -(self.potential)(x)
    }

    /// The reference drift `Z0 = -a∇V` as a field.
    pub fn z0(&self) -> &DriftField {
        &self.z0
    }

    #[inline]
    pub fn z0_into(&self, x: &[f64], out: &mut [f64]) {
        // Z0 never fails
        let _ = self.z0.eval_into(0.0, x, out);
    }
}
