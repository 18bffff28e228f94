use rayon::prelude::*;

use super::exact::{LinearGaussianOracle, Transition};
use super::{Mode, SchemeConfig, StepBuffers, Stepper};
use crate::error::{invalid, Error, Result};
use crate::model::{EmpiricalMeasure, PathEnsemble, PathStatus, Recording, SchemeTag, TimeGrid};

/// Terminal states of EM at several step sizes driven by one Brownian path,
/// plus an optional exact Gaussian solution driven by the same normals.
#[derive(Debug, Clone)]
pub struct CoupledLevels {
    pub grids: Vec<TimeGrid>,
    pub ensembles: Vec<PathEnsemble>,
    /// Exact solution at `T`, path `p` paired with path `p` of every ensemble.
    pub exact: Option<EmpiricalMeasure>,
}

struct LevelState {
    grid: TimeGrid,
    r: usize,
    k: usize,
    x: Vec<f64>,
    dw: Vec<f64>,
    status: PathStatus,
}

/// Runs EM at every step in `deltas` in one pass over the fine normals of
/// `base.noise_grid()` (or `base.grid`); each coarse increment is the sum of the
/// fine increments it covers, exactly as in [`super::simulate_em`] with the same
/// noise grid. Only terminal states are kept.
///
/// When `oracle` is given, its exact transitions are applied on the fine grid,
/// fed by the same Brownian normals (and by channel 1 for coordinates the
/// noise does not reach directly).
pub fn simulate_coupled(
    base: &SchemeConfig,
    deltas: &[f64],
    oracle: Option<&LinearGaussianOracle>,
) -> Result<CoupledLevels> {
    if deltas.is_empty() {
        return Err(invalid("no step sizes given"));
    }
    let fine = base.noise_grid();
    let mut check = base.clone().with_noise_grid(fine);
    let mut grids = Vec::with_capacity(deltas.len());
    let mut ratios = Vec::with_capacity(deltas.len());
    for &delta in deltas {
        let g = TimeGrid::new(fine.horizon(), delta)?;
        check.grid = g;
        ratios.push(check.validate()?);
        grids.push(g);
    }
    let n = base.state_dim();
    let d = base.noise_dim();
    let transitions = match oracle {
        Some(o) => {
            if o.state_dim() != n || o.noise_dim() != d {
                return Err(Error::Dimension { expected: n, got: o.state_dim() });
            }
            let last = fine.n_steps() - 1;
            Some((o.transition(fine.step_len(0))?, o.transition(fine.step_len(last))?))
        }
        None => None,
    };
    let stepper = Stepper::new(&base.drift, &base.diffusion, base.mode);
    let aux = base.noise.channel(1).with_dim(n.saturating_sub(d).max(1));
    let run = |p: usize| -> Result<(Vec<Vec<f64>>, Vec<PathStatus>, Vec<f64>)> {
        let mut levels: Vec<LevelState> = grids
            .iter()
            .zip(&ratios)
            .map(|(&grid, &r)| LevelState { grid, r, k: 0, x: base.initial.clone(), dw: vec![0.0; d], status: PathStatus::Ok })
            .collect();
        let mut buf = StepBuffers::new(d);
        let mut reader = base.noise.path(p);
        let mut aux_reader = aux.path(p);
        let mut zeta = vec![0.0; n.max(d)];
        let mut ex = base.initial.clone();
        let mut tmp = vec![0.0; n];
        let nf = fine.n_steps();
        for j in 0..nf {
            reader.next_normals(&mut zeta[..d]);
            let s = fine.step_len(j).sqrt();
            let last = j + 1 == nf;
            for lv in levels.iter_mut() {
                if lv.status != PathStatus::Ok {
                    continue;
                }
                for (w, z) in lv.dw.iter_mut().zip(&zeta[..d]) {
                    *w += s * z;
                }
                if (j + 1) % lv.r == 0 || last {
                    let (t, h) = (lv.grid.knot(lv.k), lv.grid.step_len(lv.k));
                    lv.status = stepper.advance(t, h, &mut lv.x, &lv.dw, &mut buf, lv.k)?;
                    lv.dw.fill(0.0);
                    lv.k += 1;
                }
            }
            if let Some((full, tail)) = &transitions {
                if n > d {
                    aux_reader.next_normals(&mut zeta[d..]);
                }
                let tr: &Transition = if last && fine.step_len(j) != fine.step_len(0) { tail } else { full };
                tr.apply(&mut ex, &zeta, &mut tmp);
            }
        }
        let mut terminals = Vec::with_capacity(levels.len());
        let mut statuses = Vec::with_capacity(levels.len());
        for lv in levels {
            let x = if lv.status == PathStatus::Ok { lv.x } else { vec![f64::NAN; n] };
            terminals.push(x);
            statuses.push(lv.status);
        }
        Ok((terminals, statuses, ex))
    };
    let outputs: Vec<_> = (0..base.n_paths).into_par_iter().map(run).collect::<Result<_>>()?;
    let tag = match base.mode {
        Mode::NonDegenerate => SchemeTag::Em,
        Mode::Degenerate => SchemeTag::EmDegenerate,
    };
    let mut ensembles = Vec::with_capacity(grids.len());
    for (l, g) in grids.iter().enumerate() {
        let mut states = Vec::with_capacity(base.n_paths * 2 * n);
        let mut status = Vec::with_capacity(base.n_paths);
        for (terminals, statuses, _) in &outputs {
            states.extend_from_slice(&base.initial);
            states.extend_from_slice(&terminals[l]);
            status.push(statuses[l]);
        }
        ensembles.push(PathEnsemble {
            grid: *g,
            dim: n,
            noise_dim: d,
            tag,
            recording: Recording::Terminal,
            initial: base.initial.clone(),
            states,
            increments: None,
            status,
        });
    }
    let exact = transitions.map(|_| {
        let samples = outputs.iter().flat_map(|(_, _, ex)| ex.iter().copied()).collect();
        EmpiricalMeasure::unweighted(n, samples)
    });
    Ok(CoupledLevels { grids, ensembles, exact })
}
