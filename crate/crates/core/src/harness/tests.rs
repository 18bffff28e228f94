use super::*;
use crate::error::Error;

fn cfg(body: &str) -> ExperimentConfig {
    ExperimentConfig::from_toml(&format!("output_path = \"unused.csv\"\n{body}\n")).unwrap()
}

const SMALL_OU: &str = "experiment = \"rate_regression\"\ndrift_name = \"ou\"\nn_paths = 2000\nseed = 11\n\
delta_levels = [0.125, 0.0625, 0.03125, 0.015625]";

#[test]
fn small_ou_rate_passes() {
    let r = run_rate_regression(&cfg(SMALL_OU)).unwrap();
    assert_eq!(r.rows.len(), 8);
    assert_eq!(r.status(), Status::Pass, "{r:?}");
    for f in &r.fits {
        assert!(f.ci.0 <= f.slope && f.slope <= f.ci.1);
        assert!(f.slope > 0.8, "{}", f.slope);
    }
    assert!(r.rows.iter().all(|row| row.wbl_lower <= row.wbl_upper && row.wbl_upper <= row.w1));
}

#[test]
fn worker_count_does_not_change_the_csv() {
    let mut c = cfg(SMALL_OU);
    c.workers = Some(1);
    let a = run(&c).unwrap().to_csv();
    c.workers = Some(3);
    let b = run(&c).unwrap().to_csv();
    let again = run(&c).unwrap().to_csv();
    assert_eq!(a, b);
    assert_eq!(b, again);
}

#[test]
fn symmetric_case_is_inconclusive() {
    // E tanh(X) = 0 at every step when x0 = 0, so the errors are pure noise
    let c = cfg(&format!("{SMALL_OU}\nx0 = [0.0]\ntest_functions = [\"tanh\"]"));
    let r = run_rate_regression(&c).unwrap();
    assert!(r.fits[0].unresolved);
    assert_eq!(r.status(), Status::Inconclusive);
}

#[test]
fn kinetic_rate_on_both_components() {
    let c = cfg("experiment = \"rate_regression\"\ndrift_name = \"kinetic-ou\"\nmode = \"degenerate\"\n\
        n_paths = 2000\ndelta_levels = [0.125, 0.0625, 0.03125, 0.015625]\nx0 = [1.0, 0.0]\n\
        test_functions = [\"tanh\", \"tanh_x2\"]");
    let r = run_rate_regression(&c).unwrap();
    assert_eq!(r.fits.len(), 2);
    assert_eq!(r.status(), Status::Pass, "{r:?}");
}

#[test]
fn self_referenced_rate_notes_its_bias() {
    let c = cfg("experiment = \"rate_regression\"\ndrift_name = \"mollified-singular-log\"\nepsilon = 0.2\n\
        n_paths = 2000\ndelta_levels = [0.125, 0.0625, 0.03125, 0.015625]\nx0 = [0.5]");
    let r = run_rate_regression(&c).unwrap();
    assert!(r.metadata.iter().any(|(k, v)| k == "reference" && v.starts_with("em delta_ref=0.00390625")));
    assert!(r.rows.iter().all(|row| row.rejected_paths == 0 && row.diverged_paths == 0));
}

#[test]
fn weak_convergence_trend() {
    let c = cfg("experiment = \"weak_convergence\"\ndrift_name = \"ou\"\nn_paths = 2000\n\
        delta_levels = [0.125, 0.0625, 0.03125]");
    let r = run(&c).unwrap();
    assert!(matches!(r, Report::Weak(_, tau) if tau == 1.0));
    assert_eq!(r.status(), Status::Pass);
}

#[test]
fn small_mollify_sweep() {
    let c = cfg("experiment = \"mollify_sweep\"\ndrift_name = \"mollified-singular-log\"\nn_paths = 2000\n\
        epsilon_levels = [0.4, 0.2]\nbaseline_epsilon = 0.1\ndelta_levels = [0.015625]\nx0 = [0.5]");
    let r = run_mollify_sweep(&c).unwrap();
    assert_eq!(r.rows.len(), 2);
    assert!(r.rows[0].theory_bound_bracket > r.rows[1].theory_bound_bracket);
    assert!(r.rows[0].w1 > r.rows[1].w1);
    assert_eq!((r.tau_w1, r.tau_bracket), (1.0, 1.0));
}

#[test]
fn sweep_without_baseline_uses_smallest_level() {
    let c = cfg("experiment = \"mollify_sweep\"\ndrift_name = \"mollified-singular-log\"\nn_paths = 500\n\
        epsilon_levels = [0.4, 0.2]\ndelta_levels = [0.0625]");
    let r = run_mollify_sweep(&c).unwrap();
    assert_eq!(r.rows.len(), 1);
    assert!(r.metadata.contains(&("baseline_epsilon".into(), "0.2".into())));
}

#[test]
fn crosscheck_agrees() {
    let c = cfg("experiment = \"girsanov_cross_check\"\ndrift_name = \"ou\"\ntheta = 1.5\nn_paths = 4000\n\
        delta_levels = [0.0625, 0.03125]");
    let r = run_girsanov_crosscheck(&c).unwrap();
    assert_eq!(r.rows.len(), 4);
    for row in &r.rows {
        assert!(row.z_scores()[0].abs() < 4.0, "{row:?}");
        assert!((row.q2_weight_mean.0 - 1.0).abs() < 4.0 * row.q2_weight_mean.1);
    }
}

#[test]
fn degenerate_crosscheck_agrees() {
    let c = cfg("experiment = \"girsanov_cross_check\"\ndrift_name = \"kinetic-ou\"\nmode = \"degenerate\"\n\
        n_paths = 4000\ndelta_levels = [0.0625, 0.03125]\nx0 = [0.5, 0.5]\ntest_functions = [\"tanh\", \"tanh_x2\"]");
    let r = run_girsanov_crosscheck(&c).unwrap();
    for row in &r.rows {
        assert!(row.z_scores()[0].abs() < 4.0, "{row:?}");
    }
}

#[test]
fn novikov_table() {
    let c = cfg("experiment = \"novikov_report\"\ndrift_name = \"ou\"\nreference_name = \"brownian\"\n\
        n_paths = 4000\ndelta_levels = [0.03125]");
    let t = run_novikov_report(&c).unwrap();
    assert_eq!(t.rows.len(), 3);
    let m = &t.rows[0];
    assert!((m.estimate - 1.0).abs() < 4.0 * m.std_error);
    // E exp(½∫(1+W)²) > 1 and E exp(∫ ...) is larger still
    assert!(t.rows[1].estimate > 1.0 && t.rows[2].estimate > t.rows[1].estimate);
}

#[test]
fn configuration_errors() {
    let sweep = cfg("experiment = \"mollify_sweep\"\ndrift_name = \"ou\"\nepsilon_levels = [0.4, 0.2]\nn_paths = 100");
    assert!(matches!(run(&sweep), Err(Error::Config(_))));
    let cross = cfg("experiment = \"girsanov_cross_check\"\ndrift_name = \"ou\"\nreference_name = \"brownian\"\nn_paths = 100");
    assert!(matches!(run(&cross), Err(Error::Config(_))));
    let bad_f = cfg(&format!("{SMALL_OU}\ntest_functions = [\"tanh_x2\"]"));
    assert!(matches!(run(&bad_f), Err(Error::Config(_))));
    let huge = cfg("experiment = \"novikov_report\"\ndrift_name = \"ou\"\nn_paths = 100000000\ndelta_levels = [0.0009765625]");
    assert!(matches!(run(&huge), Err(Error::Config(_))));
}

#[test]
fn run_and_emit_writes_csv_and_plot() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = cfg(SMALL_OU);
    c.output_path = dir.path().join("out/rate.csv");
    let r = run_and_emit(&c).unwrap();
    let csv = std::fs::read_to_string(&c.output_path).unwrap();
    assert_eq!(csv, r.to_csv());
    let parsed = parse_rate_csv(&csv).unwrap();
    for f in &parsed.fits {
        let refit = fit_slope(&parsed.rows, &f.f_name).unwrap();
        assert!((refit.slope - f.slope).abs() < 1e-9);
    }
    let gp = std::fs::read_to_string(plot_path(&c.output_path)).unwrap();
    assert!(gp.contains("plot $f0"));
}
