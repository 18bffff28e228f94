use crate::error::{Error, Result};
use crate::model::DriftField;

/// Ornstein-Uhlenbeck drift `b(x) = -θ x` on `R^d`.
pub fn ou_drift_dim(theta: f64, dim: usize) -> DriftField {
    DriftField::homogeneous("ou", dim, move |x, out| {
        out.iter_mut().zip(x).for_each(|(o, v)| *o = -theta * v);
    })
    .with_growth(crate::model::SpaceGrowth { k1: theta.abs(), m1: 0.0 })
}

pub fn ou_drift(theta: f64) -> DriftField {
    ou_drift_dim(theta, 1)
}

/// Wraps the velocity drift `b: R^{2d} -> R^d` into the kinetic field
/// `(x1, x2) ↦ (x2, b(t, x1, x2))` on `R^{2d}`.
pub fn kinetic_drift(b: DriftField) -> Result<DriftField> {
    let d = b.out_dim();
    if b.dim() != 2 * d {
        return Err(Error::Dimension { expected: 2 * d, got: b.dim() });
    }
    let name = format!("kinetic-{}", b.name());
    let (alpha, homogeneous) = (b.time_hoelder_alpha, b.time_homogeneous);
    let mut f = DriftField::new(name, 2 * d, move |t, x, out| {
        out[..d].copy_from_slice(&x[d..]);
        b.eval_into(t, x, &mut out[d..])
    });
    f.time_hoelder_alpha = alpha;
    f.time_homogeneous = homogeneous;
    Ok(f)
}

/// Velocity drift of the damped linear oscillator, `b(x1, x2) = -θ x1 - x2`.
pub fn kinetic_ou_velocity(theta: f64, dim: usize) -> DriftField {
    DriftField::with_dims("kinetic-ou-velocity", 2 * dim, dim, move |_t, x, out| {
        for i in 0..dim {
            out[i] = -theta * x[i] - x[dim + i];
        }
        Ok(())
    })
    .with_alpha(1.0)
}

/// Velocity drift that ignores position: `b(x1, x2) = g(x2)`.
pub fn velocity_only(g: DriftField) -> DriftField {
    let d = g.dim();
    let name = format!("velocity-{}", g.name());
    let (alpha, homogeneous) = (g.time_hoelder_alpha, g.time_homogeneous);
    let mut f = DriftField::with_dims(name, 2 * d, g.out_dim(), move |t, x, out| g.eval_into(t, &x[d..], out));
    f.time_hoelder_alpha = alpha;
    f.time_homogeneous = homogeneous;
    f
}
