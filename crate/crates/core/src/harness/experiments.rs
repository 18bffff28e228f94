use log::info;

use super::config::{Experiment, ExperimentConfig};
use super::registry::{self, Reference, Target};
use super::report::{
    fit_slope, CrossCheckReport, CrossCheckRow, Estimate, NovikovRow, NovikovTable, RateReport, RateRow, Report,
    SlopeFit, SweepReport, SweepRow,
};
use crate::drift::{bracket_exponents, theory_bound_bracket, BracketQuadrature};
use crate::error::{Error, Result};
use crate::girsanov::{novikov_diagnostic, weight_degenerate, weight_q1, weight_q2, weighted_expectation, WeightKind};
use crate::integrator::{simulate_coupled, simulate_em, simulate_em_degenerate, simulate_reference, Mode, SchemeConfig};
use crate::metrics::{
    coupling_cost_upper, paired_weak_error, w1_exact_1d, wbl_estimate, BoundedFunction, TestFunctionFamily,
};
use crate::model::{norm_diff, EmpiricalMeasure, NoiseSource, PathEnsemble, PathStatus, Recording, TimeGrid};
use crate::stats::{kendall_tau, mean, std_error};

/// Tolerance on the measured order below `min(1/2, α)`.
pub const RATE_TOLERANCE: f64 = 0.15;
/// Reference step of self-referenced studies, relative to the finest step.
const SELF_REFERENCE_RATIO: f64 = 0.25;
const DICTIONARY_CENTERS: usize = 16;
const DICTIONARY_WIDTHS: usize = 8;
/// Noise channel of the direct EM arm of a cross-check.
const DIRECT_CHANNEL: u64 = 3;
/// Upper limit on the memory of a fully recorded reference ensemble.
const MAX_RECORDED_BYTES: f64 = 2.0e9;

fn config_error(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

/// Runs the experiment on a pool of `cfg.workers` threads (the global pool when unset).
pub fn run(cfg: &ExperimentConfig) -> Result<Report> {
    cfg.validate()?;
    match cfg.workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| config_error(e.to_string()))?
            .install(|| dispatch(cfg)),
        None => dispatch(cfg),
    }
}

fn dispatch(cfg: &ExperimentConfig) -> Result<Report> {
    match cfg.experiment {
        Experiment::RateRegression => run_rate_regression(cfg).map(Report::Rate),
        Experiment::WeakConvergence => run_weak_convergence(cfg),
        Experiment::MollifySweep => run_mollify_sweep(cfg).map(Report::Sweep),
        Experiment::GirsanovCrossCheck => run_girsanov_crosscheck(cfg).map(Report::CrossCheck),
        Experiment::NovikovReport => run_novikov_report(cfg).map(Report::Novikov),
    }
}

/// Path of the plot script written next to a CSV.
pub fn plot_path(csv: &std::path::Path) -> std::path::PathBuf {
    csv.with_extension("gp")
}

/// Runs the experiment and writes its CSV and plot script.
pub fn run_and_emit(cfg: &ExperimentConfig) -> Result<Report> {
    let report = run(cfg)?;
    super::report::emit_csv(&report, &cfg.output_path)?;
    super::report::emit_plot_script(&report, &plot_path(&cfg.output_path))?;
    Ok(report)
}

fn test_functions(cfg: &ExperimentConfig) -> Result<Vec<BoundedFunction>> {
    cfg.test_functions
        .iter()
        .map(|name| {
            let f = BoundedFunction::by_name(name).ok_or_else(|| config_error(format!("unknown test function {name:?}")))?;
            let c = name.split_once("_x").map_or(Ok(1), |(_, i)| i.parse::<usize>())
                .map_err(|e| config_error(e.to_string()))?;
            if c > cfg.state_dim() {
                return Err(config_error(format!("test function {name} reads coordinate {c} of {}", cfg.state_dim())));
            }
            Ok(f)
        })
        .collect()
}

fn base_config(cfg: &ExperimentConfig, target: &Target, grid: TimeGrid) -> Result<SchemeConfig> {
    let mut base =
        SchemeConfig::new(grid, cfg.n_paths, cfg.initial()?, target.drift.clone(), registry::diffusion(cfg)?, cfg.seed)
            .with_recording(Recording::Terminal);
    if target.mode == Mode::Degenerate {
        base = base.degenerate();
    }
    Ok(base)
}

/// Terminal states of two path-aligned laws restricted to pairs where both are valid.
fn paired_measures(a: &[Option<&[f64]>], b: &[Option<&[f64]>], dim: usize) -> (EmpiricalMeasure, EmpiricalMeasure) {
    let (mut sa, mut sb) = (Vec::new(), Vec::new());
    for (x, y) in a.iter().zip(b) {
        if let (Some(x), Some(y)) = (x, y) {
            sa.extend_from_slice(x);
            sb.extend_from_slice(y);
        }
    }
    (EmpiricalMeasure::unweighted(dim, sa), EmpiricalMeasure::unweighted(dim, sb))
}

fn valid_terminals(e: &PathEnsemble) -> Vec<Option<&[f64]>> {
    (0..e.n_paths()).map(|p| (e.status(p) == PathStatus::Ok).then(|| e.terminal(p))).collect()
}

/// `W1` in 1-d; otherwise the cheaper of two feasible couplings (the path
/// pairing and the sorted pairing), an upper bound.
fn distance(a: &EmpiricalMeasure, b: &EmpiricalMeasure) -> Result<f64> {
    if a.dim() == 1 {
        return w1_exact_1d(a, b);
    }
    let paired = mean(&(0..a.len()).map(|i| norm_diff(a.sample(i), b.sample(i))).collect::<Vec<_>>());
    Ok(coupling_cost_upper(a, b).map_or(paired, |c| c.min(paired)))
}

fn bracket(a: &EmpiricalMeasure, b: &EmpiricalMeasure, w1: f64) -> Result<(f64, f64)> {
    let family = TestFunctionFamily::dictionary(a, b, DICTIONARY_CENTERS, DICTIONARY_WIDTHS)?;
    let br = wbl_estimate(a, b, &family)?;
    let upper = br.upper.min(w1).min(2.0);
    Ok((br.lower.min(upper), upper))
}

/// Same-law `W1` floor at the sample size of `m`, from its two interleaved halves.
fn split_floor(m: &EmpiricalMeasure) -> Option<f64> {
    if m.dim() != 1 || m.len() < 4 {
        return None;
    }
    let (even, odd): (Vec<f64>, Vec<f64>) = (0..m.len() / 2).map(|i| (m.sample(2 * i)[0], m.sample(2 * i + 1)[0])).unzip();
    let w = w1_exact_1d(&EmpiricalMeasure::unweighted(1, even), &EmpiricalMeasure::unweighted(1, odd)).ok()?;
    // halves carry half the samples, so their floor is √2 larger
    Some(w / std::f64::consts::SQRT_2)
}

struct LevelStudy {
    rows: Vec<RateRow>,
    names: Vec<String>,
    metadata: Vec<(String, String)>,
    alpha: f64,
}

/// EM at every `δ` of the config on one Brownian path per sample, compared
/// with the exact law (linear drifts) or EM at `δ_min/4`, path by path.
fn level_study(cfg: &ExperimentConfig) -> Result<LevelStudy> {
    let target = registry::target(cfg, None)?;
    let fs = test_functions(cfg)?;
    let deltas = &cfg.delta_levels;
    let finest = *deltas.last().unwrap();
    let mut levels = deltas.clone();
    let mut metadata = vec![("drift".to_string(), cfg.drift_name.clone())];
    let fine = match &target.oracle {
        Some(_) => {
            metadata.push(("reference".into(), "exact".into()));
            finest
        }
        None => {
            let r = finest * SELF_REFERENCE_RATIO;
            levels.push(r);
            metadata.push(("reference".into(), format!("em delta_ref={r}")));
            metadata.push(("reference_bias".into(), format!("errors are measured against EM at {r}, not the exact law")));
            r
        }
    };
    let base = base_config(cfg, &target, TimeGrid::new(cfg.t, deltas[0])?)?.with_noise_grid(TimeGrid::new(cfg.t, fine)?);
    info!("simulating {} paths at {} step sizes", cfg.n_paths, levels.len());
    let coupled = simulate_coupled(&base, &levels, target.oracle.as_ref())?;
    let n = cfg.state_dim();
    let reference: Vec<Option<&[f64]>> = match &coupled.exact {
        Some(m) => (0..m.len()).map(|i| Some(m.sample(i))).collect(),
        None => valid_terminals(coupled.ensembles.last().unwrap()),
    };
    let mut rows = Vec::new();
    for (l, &delta) in deltas.iter().enumerate() {
        let ens = &coupled.ensembles[l];
        let (a, b) = paired_measures(&valid_terminals(ens), &reference, n);
        if a.len() < 2 {
            return Err(Error::Divergent(format!("fewer than two valid paths at delta = {delta}")));
        }
        let w1 = distance(&a, &b)?;
        let (lower, upper) = bracket(&a, &b, w1)?;
        for f in &fs {
            let e = paired_weak_error(&a, &b, f)?;
            rows.push(RateRow {
                delta,
                f_name: f.name().to_string(),
                weak_error: e.diff.abs(),
                weak_stderr: e.std_error,
                w1,
                wbl_lower: lower,
                wbl_upper: upper,
                rejected_paths: ens.rejected_count(),
                diverged_paths: ens.diverged_count(),
            });
        }
    }
    let ref_measure = match &coupled.exact {
        Some(m) => m.clone(),
        None => coupled.ensembles.last().unwrap().terminal_measure(),
    };
    if let Some(floor) = split_floor(&ref_measure) {
        metadata.push(("same_law_floor".into(), floor.to_string()));
        metadata.push(("floor_subtracted".into(), "false (laws share the Brownian path)".into()));
    }
    metadata.push(("n_paths".into(), cfg.n_paths.to_string()));
    metadata.push(("seed".into(), cfg.seed.to_string()));
    Ok(LevelStudy { rows, names: fs.iter().map(|f| f.name().to_string()).collect(), metadata, alpha: target.alpha })
}

pub fn run_rate_regression(cfg: &ExperimentConfig) -> Result<RateReport> {
    let study = level_study(cfg)?;
    let target_order = study.alpha.min(0.5) - RATE_TOLERANCE;
    let mut fits = Vec::new();
    for name in &study.names {
        let rows: Vec<&RateRow> = study.rows.iter().filter(|r| &r.f_name == name).collect();
        let unresolved = rows.len() >= 2
            && rows[rows.len() - 2..].iter().all(|r| !(r.weak_error >= 3.0 * r.weak_stderr));
        let owned: Vec<RateRow> = rows.iter().map(|r| (*r).clone()).collect();
        match fit_slope(&owned, name) {
            Some(fit) => fits.push(SlopeFit {
                f_name: name.clone(),
                slope: fit.slope,
                ci: fit.ci,
                pass: fit.slope >= target_order,
                unresolved,
            }),
            None => fits.push(SlopeFit {
                f_name: name.clone(),
                slope: f64::NAN,
                ci: (f64::NAN, f64::NAN),
                pass: false,
                unresolved: true,
            }),
        }
    }
    let mut metadata = study.metadata;
    metadata.push(("target_order".into(), format!("{}", study.alpha.min(0.5))));
    metadata.push(("tolerance".into(), RATE_TOLERANCE.to_string()));
    Ok(RateReport { rows: study.rows, fits, metadata })
}

/// Distances to the reference law over `δ`; passes when `W1` shrinks with `δ`
/// (Kendall τ between `δ` and `W1` above 0.7).
pub fn run_weak_convergence(cfg: &ExperimentConfig) -> Result<Report> {
    let study = level_study(cfg)?;
    let first = &study.names[0];
    let (d, w): (Vec<f64>, Vec<f64>) =
        study.rows.iter().filter(|r| &r.f_name == first).map(|r| (r.delta, r.w1)).unzip();
    let tau = kendall_tau(&d, &w);
    Ok(Report::Weak(RateReport { rows: study.rows, fits: Vec::new(), metadata: study.metadata }, tau))
}

/// Distance of the law of `X_ε(T)` to the baseline law alongside the
/// drift-perturbation bound, for every `ε` of the config, on common noise.
pub fn run_mollify_sweep(cfg: &ExperimentConfig) -> Result<SweepReport> {
    if !matches!(cfg.drift_name.as_str(), "singular-log" | "mollified-singular-log") {
        return Err(config_error("mollify_sweep supports the singular-log drifts only"));
    }
    let reference = registry::reference(cfg)?;
    let system = reference.system().ok_or_else(|| config_error("mollify_sweep needs the gaussian reference"))?;
    let mut levels = cfg.epsilon_levels.clone().unwrap_or_default();
    let baseline = match cfg.baseline_epsilon {
        Some(b) => b,
        None => levels.pop().ok_or_else(|| config_error("epsilon_levels is empty"))?,
    };
    let delta = *cfg.delta_levels.last().unwrap();
    let grid = TimeGrid::new(cfg.t, delta)?;
    let mut sweep_cfg = cfg.clone();
    sweep_cfg.drift_name = "mollified-singular-log".into();
    let simulate = |eps: f64| -> Result<PathEnsemble> {
        let target = registry::target(&sweep_cfg, Some(eps))?;
        let c = base_config(cfg, &target, grid)?;
        match target.mode {
            Mode::NonDegenerate => simulate_em(&c),
            Mode::Degenerate => simulate_em_degenerate(&c),
        }
    };
    let eta = cfg.eta.unwrap_or(8.0 * system.diffusion().lambda() * cfg.t * cfg.dim as f64);
    let (xi, q0) = bracket_exponents(eta, system.diffusion().lambda(), cfg.t, cfg.dim)?;
    let quad = BracketQuadrature::default();
    let z_base = registry::mollified_log_z(cfg, baseline)?;
    info!("baseline epsilon {baseline}");
    let base_paths = simulate(baseline)?;
    let base_terminals = valid_terminals(&base_paths);
    let n = cfg.state_dim();
    let mut rows = Vec::new();
    for &eps in &levels {
        info!("epsilon {eps}");
        let paths = simulate(eps)?;
        let (a, b) = paired_measures(&valid_terminals(&paths), &base_terminals, n);
        let w1 = distance(&a, &b)?;
        let (lower, upper) = bracket(&a, &b, w1)?;
        let z_eps = registry::mollified_log_z(cfg, eps)?;
        let theory = theory_bound_bracket(&z_eps, &z_base, system, cfg.t, xi, q0, &quad)?;
        rows.push(SweepRow {
            epsilon: eps,
            w1,
            wbl_lower: lower,
            wbl_upper: upper,
            theory_bound_bracket: theory,
            rejected_paths: paths.rejected_count(),
            diverged_paths: paths.diverged_count(),
        });
    }
    let eps: Vec<f64> = rows.iter().map(|r| r.epsilon).collect();
    let tau_w1 = kendall_tau(&eps, &rows.iter().map(|r| r.w1).collect::<Vec<_>>());
    let tau_bracket = kendall_tau(&eps, &rows.iter().map(|r| r.theory_bound_bracket).collect::<Vec<_>>());
    let mut metadata = vec![
        ("baseline_epsilon".to_string(), baseline.to_string()),
        ("delta".into(), delta.to_string()),
        ("eta".into(), eta.to_string()),
        ("xi".into(), xi.to_string()),
        ("q0".into(), q0.to_string()),
        ("mode".into(), format!("{:?}", cfg.mode)),
    ];
    if let Some(floor) = split_floor(&base_paths.terminal_measure()) {
        metadata.push(("same_law_floor".into(), floor.to_string()));
    }
    metadata.push(("n_paths".into(), cfg.n_paths.to_string()));
    metadata.push(("seed".into(), cfg.seed.to_string()));
    Ok(SweepReport { rows, tau_w1, tau_bracket, metadata })
}

fn recorded_reference(cfg: &ExperimentConfig, target: &Target, reference: &Reference, delta: f64) -> Result<PathEnsemble> {
    let grid = TimeGrid::new(cfg.t, delta)?;
    let bytes = (grid.n_steps() + 1) as f64 * cfg.n_paths as f64 * (cfg.state_dim() + cfg.dim) as f64 * 8.0;
    if bytes > MAX_RECORDED_BYTES {
        return Err(config_error(format!(
            "recording {} paths at delta = {delta} needs {:.1} GB; use fewer paths or coarser delta_levels",
            cfg.n_paths,
            bytes / 1e9
        )));
    }
    let c = base_config(cfg, target, grid)?.with_recording(Recording::Full);
    match reference {
        Reference::Gaussian(system) => simulate_reference(&c, system),
        Reference::Brownian(_) => {
            let zero = match target.mode {
                Mode::NonDegenerate => reference.z0(),
                Mode::Degenerate => crate::drift::velocity_only(reference.z0()),
            };
            let c = c.with_drift(zero);
            match target.mode {
                Mode::NonDegenerate => simulate_em(&c),
                Mode::Degenerate => simulate_em_degenerate(&c),
            }
        }
    }
}

fn weighted(log_w: &[f64], values: &[f64]) -> Result<Estimate> {
    let (lw, v): (Vec<f64>, Vec<f64>) =
        log_w.iter().zip(values).filter(|(w, _)| **w > f64::NEG_INFINITY).map(|(w, v)| (*w, *v)).unzip();
    let e = weighted_expectation(&lw, &v, true)?;
    Ok(Estimate { value: e.estimate, std_error: e.std_error, ess: e.ess })
}

/// Direct EM, Q2-weighted reference paths and Q1-weighted reference paths
/// (Q5 and Q3 in degenerate mode) as estimates of `E f(X_δ(T))`.
pub fn run_girsanov_crosscheck(cfg: &ExperimentConfig) -> Result<CrossCheckReport> {
    let target = registry::target(cfg, None)?;
    let reference = registry::reference(cfg)?;
    let system = reference.system().ok_or_else(|| config_error("girsanov_cross_check needs the gaussian reference"))?;
    let fs = test_functions(cfg)?;
    let finest = *cfg.delta_levels.last().unwrap();
    let ref_delta = finest * SELF_REFERENCE_RATIO;
    let ref_paths = recorded_reference(cfg, &target, &reference, ref_delta)?;
    let z = reference.perturbation(&target.drift, target.mode)?;
    let q1 = match target.mode {
        Mode::NonDegenerate => weight_q1(&ref_paths, &z, system.diffusion())?,
        Mode::Degenerate => weight_degenerate(WeightKind::Q3, &ref_paths, &target.drift, system, ref_paths.grid())?,
    };
    let terminal_values = |f: &BoundedFunction| -> Vec<f64> {
        (0..ref_paths.n_paths()).map(|p| if ref_paths.status(p) == PathStatus::Ok { f.eval(ref_paths.terminal(p)) } else { 0.0 }).collect()
    };
    let mut direct_base = base_config(cfg, &target, TimeGrid::new(cfg.t, cfg.delta_levels[0])?)?
        .with_noise_grid(TimeGrid::new(cfg.t, finest)?);
    direct_base.noise = NoiseSource::new(cfg.seed, cfg.dim).channel(DIRECT_CHANNEL);
    let direct = simulate_coupled(&direct_base, &cfg.delta_levels, None)?;
    let mut rows = Vec::new();
    for (l, &delta) in cfg.delta_levels.iter().enumerate() {
        let grid = TimeGrid::new(cfg.t, delta)?;
        let q2 = match target.mode {
            Mode::NonDegenerate => weight_q2(&ref_paths, &target.drift, system, &grid)?,
            Mode::Degenerate => weight_degenerate(WeightKind::Q5, &ref_paths, &target.drift, system, &grid)?,
        };
        let valid: Vec<f64> = q2.log_weights.iter().copied().filter(|w| *w > f64::NEG_INFINITY).collect();
        let ones = vec![1.0; valid.len()];
        let mw = weighted_expectation(&valid, &ones, false)?;
        let ens = &direct.ensembles[l];
        for f in &fs {
            let values = terminal_values(f);
            let dv: Vec<f64> = valid_terminals(ens).into_iter().flatten().map(|x| f.eval(x)).collect();
            rows.push(CrossCheckRow {
                delta,
                f_name: f.name().to_string(),
                direct: Estimate { value: mean(&dv), std_error: std_error(&dv), ess: dv.len() as f64 },
                q2: weighted(&q2.log_weights, &values)?,
                q1: weighted(&q1.log_weights, &values)?,
                q2_weight_mean: (mw.estimate, mw.std_error),
            });
        }
    }
    let metadata = vec![
        ("drift".to_string(), cfg.drift_name.clone()),
        ("reference_delta".into(), ref_delta.to_string()),
        ("q1_note".into(), format!("Q1 column is EM of the target at {ref_delta}")),
        ("rejected_q1".into(), q1.rejected.to_string()),
        ("n_paths".into(), cfg.n_paths.to_string()),
        ("seed".into(), cfg.seed.to_string()),
    ];
    Ok(CrossCheckReport { rows, metadata })
}

/// Martingale mean and Novikov-type moments of the Q1 (Q3) weights of the
/// target against the reference, on the finest step of the config.
pub fn run_novikov_report(cfg: &ExperimentConfig) -> Result<NovikovTable> {
    let target = registry::target(cfg, None)?;
    let reference = registry::reference(cfg)?;
    let delta = *cfg.delta_levels.last().unwrap();
    let ref_paths = recorded_reference(cfg, &target, &reference, delta)?;
    let z = reference.perturbation(&target.drift, target.mode)?;
    let weights = match target.mode {
        Mode::NonDegenerate => weight_q1(&ref_paths, &z, reference.diffusion())?,
        Mode::Degenerate => {
            let system = reference.system().ok_or_else(|| config_error("degenerate weights need the gaussian reference"))?;
            weight_degenerate(WeightKind::Q3, &ref_paths, &target.drift, system, ref_paths.grid())?
        }
    };
    let valid: Vec<f64> = weights.log_weights.iter().copied().filter(|w| *w > f64::NEG_INFINITY).collect();
    let ones = vec![1.0; valid.len()];
    let mart = weighted_expectation(&valid, &ones, false)?;
    let mut rows = vec![NovikovRow {
        quantity: "martingale_mean".into(),
        estimate: mart.estimate,
        std_error: mart.std_error,
        tail_index_hint: None,
        max_share: None,
        likely_failure: None,
    }];
    for (name, half) in [("novikov_half", true), ("novikov_full", false)] {
        let r = novikov_diagnostic(&weights, half);
        rows.push(NovikovRow {
            quantity: name.into(),
            estimate: r.estimate,
            std_error: r.std_error,
            tail_index_hint: r.tail_index_hint,
            max_share: Some(r.max_share),
            likely_failure: Some(r.likely_failure),
        });
    }
    let metadata = vec![
        ("drift".to_string(), cfg.drift_name.clone()),
        ("reference".into(), cfg.reference_name.clone()),
        ("delta".into(), delta.to_string()),
        ("rejected".into(), weights.rejected.to_string()),
        ("n_paths".into(), cfg.n_paths.to_string()),
        ("seed".into(), cfg.seed.to_string()),
    ];
    Ok(NovikovTable { rows, metadata })
}
