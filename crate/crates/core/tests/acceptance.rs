//! Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use singular_em::drift::{integrability_probe, singular_log_z};
use singular_em::harness::{self, ExperimentConfig, Report, Status, TAU_LIMIT};
use singular_em::integrator::{exact_ou_sampler, simulate_em, SchemeConfig};
use singular_em::metrics::{w1_exact_1d, w1_floor, w1_lp_oracle, wbl_estimate, TestFunctionFamily};
use singular_em::model::{DiffusionMatrix, DomainBox, DriftField, EmpiricalMeasure, NoiseSource, Recording, ReferenceSystem, TimeGrid};
use singular_em::drift::ou_drift;
use singular_em::stats::{mean, variance};

const N_PATHS: usize = 100_000;
const Z_LIMIT: f64 = 4.0;
const RATE_SLOPE_MIN: f64 = 0.5 - 0.15;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn shipped_configs() -> Vec<(String, ExperimentConfig)> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(configs_dir())
        .expect("configs directory")
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "toml"))
        .collect();
    paths.sort();
    paths
        .into_iter()
        .map(|p| {
            let name = p.file_stem().unwrap().to_string_lossy().into_owned();
            (name, ExperimentConfig::from_file(&p).expect("shipped config parses"))
        })
        .collect()
}

/// Runs every shipped config twice (one and three workers) into separate
/// directories; returns the first report of each and the byte comparison.
struct Runs {
    reports: BTreeMap<String, Report>,
    identical: Vec<(String, bool)>,
}

fn run_shipped(dir: &Path) -> Runs {
    let mut reports = BTreeMap::new();
    let mut identical = Vec::new();
    for (name, cfg) in shipped_configs() {
        let t = Instant::now();
        let mut bytes = Vec::new();
        for (run, workers) in [("a", 1), ("b", 3)] {
            let mut c = cfg.clone();
            c.workers = Some(workers);
            c.output_path = dir.join(run).join(format!("{name}.csv"));
            let report = harness::run_and_emit(&c).unwrap_or_else(|e| panic!("{name}: {e}"));
            bytes.push(std::fs::read(&c.output_path).unwrap());
            if run == "a" {
                reports.insert(name.clone(), report);
            }
        }
        eprintln!("  ran {name} twice in {:.1}s", t.elapsed().as_secs_f64());
        identical.push((name, bytes[0] == bytes[1]));
    }
    // one config re-run with an unchanged worker setting
    let (name, cfg) = shipped_configs().into_iter().find(|(n, _)| n == "novikov_ou_brownian").unwrap();
    let mut c = cfg;
    c.output_path = dir.join("c").join(format!("{name}.csv"));
    harness::run_and_emit(&c).unwrap();
    let mut d = c.clone();
    d.output_path = dir.join("d").join(format!("{name}.csv"));
    harness::run_and_emit(&d).unwrap();
    identical.push((format!("{name} (rerun)"), std::fs::read(&c.output_path).unwrap() == std::fs::read(&d.output_path).unwrap()));
    Runs { reports, identical }
}

fn criterion_1() -> Outcome {
    let (theta, x0, horizon) = (1.0, 1.0, 1.0);
    let diffusion = DiffusionMatrix::identity(1);
    let grid = TimeGrid::new(horizon, 2f64.powi(-10)).unwrap();
    let cfg = SchemeConfig::new(grid, N_PATHS, vec![x0], ou_drift(theta), diffusion.clone(), 101)
        .with_recording(Recording::Terminal);
    let em = simulate_em(&cfg).unwrap().terminal_measure();
    let xs = em.samples().to_vec();
    let exact_mean = x0 * (-theta * horizon).exp();
    let exact_var = (1.0 - (-2.0 * theta * horizon).exp()) / (2.0 * theta);
    let n = xs.len() as f64;
    let m = mean(&xs);
    let v = variance(&xs);
    let m4 = xs.iter().map(|x| (x - m).powi(4)).sum::<f64>() / n;
    let (se_mean, se_var) = ((v / n).sqrt(), ((m4 - v * v) / n).sqrt());
    let (zm, zv) = ((m - exact_mean) / se_mean, (v - exact_var) / se_var);
    let exact = exact_ou_sampler(theta, &diffusion, &[x0], horizon, N_PATHS, &NoiseSource::new(202, 1)).unwrap();
    let w1 = w1_exact_1d(&em, &exact).unwrap();
    let floor = w1_floor(
        |rep| exact_ou_sampler(theta, &diffusion, &[x0], horizon, N_PATHS, &NoiseSource::new(1000 + rep, 1)),
        10,
    )
    .unwrap();
    let pass = zm.abs() <= Z_LIMIT && zv.abs() <= Z_LIMIT && w1 < 2.0 * floor;
    outcome(pass, format!("z_mean={zm:.2} z_var={zv:.2} W1={w1:.5} floor={floor:.5} (limit 2x floor)"))
}

fn rate_line(report: &Report) -> (bool, String) {
    let Report::Rate(r) = report else { return (false, "not a rate report".into()) };
    let clean = r.rows.iter().all(|row| row.rejected_paths == 0 && row.diverged_paths == 0);
    let fits_ok = !r.fits.is_empty() && r.fits.iter().all(|f| f.slope >= RATE_SLOPE_MIN);
    let text = r
        .fits
        .iter()
        .map(|f| format!("{} {:.3} [{:.3}, {:.3}]", f.f_name, f.slope, f.ci.0, f.ci.1))
        .collect::<Vec<_>>()
        .join(", ");
    (clean && fits_ok && report.status() == Status::Pass, text)
}

fn criterion_2(runs: &Runs) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (label, name) in [("a OU", "ou_rate"), ("b mollified log", "singular_rate"), ("c kinetic OU", "kinetic_rate")] {
        let (ok, text) = rate_line(&runs.reports[name]);
        pass &= ok;
        parts.push(format!("({label}) {text}"));
    }
    outcome(pass, format!("slopes >= {RATE_SLOPE_MIN}: {}", parts.join("; ")))
}

fn criterion_3(runs: &Runs) -> Outcome {
    let Report::Novikov(nov) = &runs.reports["novikov_ou_brownian"] else { unreachable!() };
    let mart = nov.rows.iter().find(|r| r.quantity == "martingale_mean").unwrap();
    let z_mart = (mart.estimate - 1.0) / mart.std_error;
    let Report::CrossCheck(cross) = &runs.reports["girsanov_crosscheck"] else { unreachable!() };
    let rows: Vec<_> = cross.rows.iter().filter(|r| r.delta == 2f64.powi(-6)).collect();
    let mut pass = z_mart.abs() <= Z_LIMIT && rows.len() == 2;
    let mut parts = vec![format!("E[w] OU-vs-Brownian z={z_mart:.2}")];
    if let Some(r) = rows.first() {
        let zq2 = (r.q2_weight_mean.0 - 1.0) / r.q2_weight_mean.1;
        pass &= zq2.abs() <= Z_LIMIT;
        parts.push(format!("E[w] Q2 z={zq2:.2}"));
    }
    for r in &rows {
        let z = r.z_scores()[0];
        pass &= z.abs() <= Z_LIMIT && ["tanh", "ramp"].contains(&r.f_name.as_str());
        parts.push(format!("Q2 vs EM {} z={z:.2}", r.f_name));
    }
    outcome(pass, parts.join(", "))
}

fn criterion_4(runs: &Runs) -> Outcome {
    let Report::Sweep(s) = &runs.reports["mollify_sweep"] else { unreachable!() };
    let eps: Vec<f64> = s.rows.iter().map(|r| r.epsilon).collect();
    let clean = s.rows.iter().all(|r| r.rejected_paths == 0 && r.diverged_paths == 0);
    let pass = eps == [0.4, 0.2, 0.1, 0.05] && s.tau_w1 > TAU_LIMIT && s.tau_bracket > TAU_LIMIT && clean;
    let w1: Vec<String> = s.rows.iter().map(|r| format!("{:.2e}", r.w1)).collect();
    let th: Vec<String> = s.rows.iter().map(|r| format!("{:.3}", r.theory_bound_bracket)).collect();
    outcome(
        pass,
        format!("tau_W1={} tau_bracket={} W1=[{}] bracket=[{}]", s.tau_w1, s.tau_bracket, w1.join(" "), th.join(" ")),
    )
}

fn uniform(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64
}

fn random_measure(rng: &mut ChaCha8Rng, dim: usize, max_n: usize) -> EmpiricalMeasure {
    let n = 1 + (rng.next_u64() % max_n as u64) as usize;
    let samples = (0..n * dim).map(|_| 4.0 * uniform(rng) - 2.0).collect();
    let log_w = (0..n).map(|_| uniform(rng).ln()).collect();
    EmpiricalMeasure::weighted(dim, samples, log_w)
}

fn criterion_5(runs: &Runs) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let mut worst_eq: f64 = 0.0;
    let mut sandwich_ok = true;
    for _ in 0..200 {
        let (a, b) = (random_measure(&mut rng, 1, 32), random_measure(&mut rng, 1, 32));
        let exact = w1_exact_1d(&a, &b).unwrap();
        worst_eq = worst_eq.max((exact - w1_lp_oracle(&a, &b).unwrap()).abs());
        let fam = TestFunctionFamily::dictionary(&a, &b, 8, 6).unwrap();
        let br = wbl_estimate(&a, &b, &fam).unwrap();
        sandwich_ok &= br.lower <= br.upper && br.lower <= exact + 1e-10;
    }
    let mut worst_tri = f64::NEG_INFINITY;
    for _ in 0..100 {
        let (a, b, c) = (random_measure(&mut rng, 2, 20), random_measure(&mut rng, 2, 20), random_measure(&mut rng, 2, 20));
        let (ab, bc, ac) = (w1_lp_oracle(&a, &b).unwrap(), w1_lp_oracle(&b, &c).unwrap(), w1_lp_oracle(&a, &c).unwrap());
        worst_tri = worst_tri.max(ac - ab - bc);
        let fam = TestFunctionFamily::dictionary(&a, &c, 6, 4).unwrap();
        let br = wbl_estimate(&a, &c, &fam).unwrap();
        sandwich_ok &= br.lower <= br.upper && br.lower <= ac + 1e-10;
    }
    for report in runs.reports.values() {
        if let Report::Rate(r) | Report::Weak(r, _) = report {
            sandwich_ok &= r.rows.iter().all(|row| row.wbl_lower <= row.wbl_upper);
        }
        if let Report::Sweep(s) = report {
            sandwich_ok &= s.rows.iter().all(|row| row.wbl_lower <= row.wbl_upper);
        }
    }
    let pass = worst_eq <= 1e-10 && worst_tri <= 1e-8 && sandwich_ok;
    outcome(pass, format!("max|exact-LP|={worst_eq:.1e} max triangle excess={worst_tri:.1e} sandwich={sandwich_ok}"))
}

fn criterion_6() -> Outcome {
    let gauss = ReferenceSystem::standard_gaussian(DiffusionMatrix::identity(1)).unwrap();
    let domain = DomainBox::symmetric(9.0);
    let zero = integrability_probe(&DriftField::zero(1), &gauss, 1.0, 0.0, domain, 4096).unwrap();
    let zero_ok = zero.converged && zero.value == 1.0;
    let z = singular_log_z(10, 1e-3).unwrap();
    let series = integrability_probe(&z, &gauss, 1.0, 0.0, domain, 4096).unwrap();
    let levels: Vec<String> = series.levels.iter().map(|(q, v)| format!("{q}:{v:.4}")).collect();
    let pass = zero_ok && series.converged && series.value.is_finite();
    outcome(
        pass,
        format!(
            "Z=0 -> {} (converged={}); log series eta=1 -> converged={} infinite={} levels [{}]",
            zero.value,
            zero.converged,
            series.converged,
            series.infinite,
            levels.join(" ")
        ),
    )
}

fn criterion_7(runs: &Runs) -> Outcome {
    let pass = runs.identical.iter().all(|(_, same)| *same);
    let bad: Vec<&str> = runs.identical.iter().filter(|(_, s)| !s).map(|(n, _)| n.as_str()).collect();
    outcome(
        pass,
        format!("{} shipped configs at 1 and 3 workers plus one rerun; differing: {:?}", runs.identical.len() - 1, bad),
    )
}

fn main() {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    eprintln!("running shipped configs");
    let runs = run_shipped(dir.path());
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome + '_>)> = vec![
        ("1 oracle equivalence (OU)", Box::new(criterion_1)),
        ("2 rate check", Box::new(|| criterion_2(&runs))),
        ("3 Girsanov representation", Box::new(|| criterion_3(&runs))),
        ("4 mollification sweep", Box::new(|| criterion_4(&runs))),
        ("5 metric oracles", Box::new(|| criterion_5(&runs))),
        ("6 integrability probes", Box::new(criterion_6)),
        ("7 determinism", Box::new(|| criterion_7(&runs))),
    ];
    let mut failed = 0;
    for (name, check) in &criteria {
        let o = check();
        if !o.pass {
            failed += 1;
        }
        println!("criterion {name}: {} | {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    println!("{} of {} criteria passed in {:.0}s", criteria.len() - failed, criteria.len(), start.elapsed().as_secs_f64());
    if failed > 0 {
        std::process::exit(1);
    }
}
