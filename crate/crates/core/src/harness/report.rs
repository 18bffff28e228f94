//! Report types, CSV emission and gnuplot scripts.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::stats::ols;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    Inconclusive,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Pass => 0,
            Status::Fail => 1,
            Status::Inconclusive => 2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::Inconclusive => "inconclusive",
        }
    }
}

pub const RATE_HEADER: &str = "delta,f_name,weak_error,weak_stderr,w1,wbl_lower,wbl_upper,rejected_paths,diverged_paths";
pub const SWEEP_HEADER: &str = "epsilon,w1,wbl_lower,wbl_upper,theory_bound_bracket,rejected_paths,diverged_paths";
pub const CROSS_CHECK_HEADER: &str = "delta,f_name,direct,direct_stderr,q2,q2_stderr,q2_ess,q1,q1_stderr,q1_ess,\
z_direct_q2,z_direct_q1,z_q2_q1,q2_weight_mean,q2_weight_mean_stderr";
pub const NOVIKOV_HEADER: &str = "quantity,estimate,std_error,tail_index_hint,max_share,likely_failure";

#[derive(Debug, Clone, PartialEq)]
pub struct RateRow {
    pub delta: f64,
    pub f_name: String,
    pub weak_error: f64,
    pub weak_stderr: f64,
    pub w1: f64,
    pub wbl_lower: f64,
    pub wbl_upper: f64,
    pub rejected_paths: usize,
    pub diverged_paths: usize,
}

/// Log-log fit of one test function's weak errors.
#[derive(Debug, Clone, PartialEq)]
pub struct SlopeFit {
    pub f_name: String,
    pub slope: f64,
    pub ci: (f64, f64),
    pub pass: bool,
    /// Errors at the two finest steps are below three standard errors.
    pub unresolved: bool,
}

/// Rows per `(δ, f)`, one fit per `f`, and `key=value` metadata.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RateReport {
    pub rows: Vec<RateRow>,
    pub fits: Vec<SlopeFit>,
    pub metadata: Vec<(String, String)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub epsilon: f64,
    pub w1: f64,
    pub wbl_lower: f64,
    pub wbl_upper: f64,
    pub theory_bound_bracket: f64,
    pub rejected_paths: usize,
    pub diverged_paths: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    pub tau_w1: f64,
    pub tau_bracket: f64,
    pub metadata: Vec<(String, String)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
    pub ess: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossCheckRow {
    pub delta: f64,
    pub f_name: String,
    pub direct: Estimate,
    pub q2: Estimate,
    pub q1: Estimate,
    pub q2_weight_mean: (f64, f64),
}

fn z(a: &Estimate, b: &Estimate) -> f64 {
    (a.value - b.value) / (a.std_error * a.std_error + b.std_error * b.std_error).sqrt()
}

impl CrossCheckRow {
    /// `(direct vs Q2, direct vs Q1, Q2 vs Q1)`.
    pub fn z_scores(&self) -> [f64; 3] {
        [z(&self.direct, &self.q2), z(&self.direct, &self.q1), z(&self.q2, &self.q1)]
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CrossCheckReport {
    pub rows: Vec<CrossCheckRow>,
    pub metadata: Vec<(String, String)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NovikovRow {
    pub quantity: String,
    pub estimate: f64,
    pub std_error: f64,
    pub tail_index_hint: Option<f64>,
    pub max_share: Option<f64>,
    pub likely_failure: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct NovikovTable {
    pub rows: Vec<NovikovRow>,
    pub metadata: Vec<(String, String)>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Report {
    Rate(RateReport),
    /// Same rows as a rate report; judged on the trend of `w1` over `δ`.
    Weak(RateReport, f64),
    Sweep(SweepReport),
    CrossCheck(CrossCheckReport),
    Novikov(NovikovTable),
}

/// Largest tolerated |z| between two estimates of one quantity.
const Z_LIMIT: f64 = 4.0;
/// Kendall τ needed for a monotone trend.
pub const TAU_LIMIT: f64 = 0.7;

impl RateReport {
    pub fn status(&self) -> Status {
        if self.fits.iter().any(|f| !f.pass && !f.unresolved) {
            Status::Fail
        } else if self.fits.is_empty() || self.fits.iter().any(|f| f.unresolved) {
            Status::Inconclusive
        } else {
            Status::Pass
        }
    }
}

impl Report {
    pub fn status(&self) -> Status {
        match self {
            Report::Rate(r) => r.status(),
            Report::Weak(_, tau) => pass_if(*tau > TAU_LIMIT),
            Report::Sweep(s) => pass_if(s.tau_w1 > TAU_LIMIT && s.tau_bracket > TAU_LIMIT),
            Report::CrossCheck(c) => {
                pass_if(c.rows.iter().all(|r| r.z_scores().iter().all(|z| z.abs() <= Z_LIMIT)))
            }
            Report::Novikov(n) => {
                let mart = n.rows.iter().find(|r| r.quantity == "martingale_mean");
                let ok = mart.is_some_and(|m| (m.estimate - 1.0).abs() <= Z_LIMIT * m.std_error)
                    && n.rows.iter().all(|r| r.likely_failure != Some(true) || r.quantity != "novikov_half");
                pass_if(ok)
            }
        }
    }

    fn metadata(&self) -> &[(String, String)] {
        match self {
            Report::Rate(r) | Report::Weak(r, _) => &r.metadata,
            Report::Sweep(s) => &s.metadata,
            Report::CrossCheck(c) => &c.metadata,
            Report::Novikov(n) => &n.metadata,
        }
    }

    fn is_empty(&self) -> bool {
        match self {
            Report::Rate(r) | Report::Weak(r, _) => r.rows.is_empty(),
            Report::Sweep(s) => s.rows.is_empty(),
            Report::CrossCheck(c) => c.rows.is_empty(),
            Report::Novikov(n) => n.rows.is_empty(),
        }
    }

    /// The CSV text: header, data rows, then `#` comment lines.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        match self {
            Report::Rate(r) | Report::Weak(r, _) => {
                s.push_str(RATE_HEADER);
                s.push('\n');
                for row in &r.rows {
                    let _ = writeln!(
                        s,
                        "{},{},{},{},{},{},{},{},{}",
                        row.delta,
                        row.f_name,
                        row.weak_error,
                        row.weak_stderr,
                        row.w1,
                        row.wbl_lower,
                        row.wbl_upper,
                        row.rejected_paths,
                        row.diverged_paths
                    );
                }
            }
            Report::Sweep(r) => {
                s.push_str(SWEEP_HEADER);
                s.push('\n');
                for row in &r.rows {
                    let _ = writeln!(
                        s,
                        "{},{},{},{},{},{},{}",
                        row.epsilon,
                        row.w1,
                        row.wbl_lower,
                        row.wbl_upper,
                        row.theory_bound_bracket,
                        row.rejected_paths,
                        row.diverged_paths
                    );
                }
            }
            Report::CrossCheck(r) => {
                s.push_str(CROSS_CHECK_HEADER);
                s.push('\n');
                for row in &r.rows {
                    let [a, b, c] = row.z_scores();
                    let _ = writeln!(
                        s,
                        "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                        row.delta,
                        row.f_name,
                        row.direct.value,
                        row.direct.std_error,
                        row.q2.value,
                        row.q2.std_error,
                        row.q2.ess,
                        row.q1.value,
                        row.q1.std_error,
                        row.q1.ess,
                        a,
                        b,
                        c,
                        row.q2_weight_mean.0,
                        row.q2_weight_mean.1
                    );
                }
            }
            Report::Novikov(r) => {
                s.push_str(NOVIKOV_HEADER);
                s.push('\n');
                let opt = |v: Option<f64>| v.map_or(String::new(), |v| v.to_string());
                for row in &r.rows {
                    let _ = writeln!(
                        s,
                        "{},{},{},{},{},{}",
                        row.quantity,
                        row.estimate,
                        row.std_error,
                        opt(row.tail_index_hint),
                        opt(row.max_share),
                        row.likely_failure.map_or(String::new(), |b| b.to_string())
                    );
                }
            }
        }
        if self.is_empty() {
            return s;
        }
        match self {
            Report::Rate(r) | Report::Weak(r, _) => {
                for f in &r.fits {
                    let _ = writeln!(
                        s,
                        "# slope={} ci={},{} pass={} f_name={}",
                        f.slope, f.ci.0, f.ci.1, f.pass, f.f_name
                    );
                }
                if let Report::Weak(_, tau) = self {
                    let _ = writeln!(s, "# tau_w1={tau}");
                }
            }
            Report::Sweep(r) => {
                let _ = writeln!(s, "# tau_w1={} tau_bracket={}", r.tau_w1, r.tau_bracket);
            }
            _ => {}
        }
        for (k, v) in self.metadata() {
            let _ = writeln!(s, "# {k}={v}");
        }
        let _ = writeln!(s, "# status={}", self.status().as_str());
        s
    }
}

fn pass_if(ok: bool) -> Status {
    if ok {
        Status::Pass
    } else {
        Status::Fail
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
        }
    }
    std::fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

pub fn emit_csv(report: &Report, path: &Path) -> Result<()> {
    write_file(path, &report.to_csv())
}

/// A gnuplot script with the data inlined: log-log error curves with a
/// slope-½ guide for level studies, distance and bound columns for sweeps.
pub fn plot_script(report: &Report, title: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "set terminal pngcairo size 900,600");
    let _ = writeln!(s, "set output '{title}.png'");
    let _ = writeln!(s, "set title '{title}' noenhanced");
    let _ = writeln!(s, "set logscale xy 2");
    let _ = writeln!(s, "set key left top");
    match report {
        Report::Rate(r) | Report::Weak(r, _) => {
            let names = f_names(&r.rows);
            for (i, name) in names.iter().enumerate() {
                let _ = writeln!(s, "$f{i} << EOD");
                for row in r.rows.iter().filter(|row| &row.f_name == name) {
                    let _ = writeln!(s, "{} {} {}", row.delta, row.weak_error, row.weak_stderr);
                }
                let _ = writeln!(s, "EOD");
            }
            let anchor = r.rows.first().map_or((1.0, 1.0), |row| (row.delta, row.weak_error.max(f64::MIN_POSITIVE)));
            let _ = writeln!(s, "set xlabel 'delta'");
            let _ = writeln!(s, "set ylabel 'weak error'");
            let _ = writeln!(s, "guide(x) = {} * (x / {})**0.5", anchor.1, anchor.0);
            let mut plots: Vec<String> = names
                .iter()
                .enumerate()
                .map(|(i, n)| format!("$f{i} using 1:2:3 with yerrorlines title '{n}'"))
                .collect();
            plots.push("guide(x) with lines dashtype 2 title 'slope 1/2'".into());
            let _ = writeln!(s, "plot {}", plots.join(", \\\n     "));
        }
        Report::Sweep(r) => {
            let _ = writeln!(s, "$sweep << EOD");
            for row in &r.rows {
                let _ = writeln!(s, "{} {} {}", row.epsilon, row.w1, row.theory_bound_bracket);
            }
            let _ = writeln!(s, "EOD");
            let _ = writeln!(s, "set xlabel 'epsilon'");
            let _ = writeln!(s, "set y2tics");
            let _ = writeln!(s, "set logscale y2 2");
            let _ = writeln!(
                s,
                "plot $sweep using 1:2 with linespoints title 'W1 to baseline', \\\n     \
                 $sweep using 1:3 axes x1y2 with linespoints title 'bound bracket'"
            );
        }
        Report::CrossCheck(_) | Report::Novikov(_) => {
            let _ = writeln!(s, "# no curves for this experiment");
        }
    }
    s
}

pub fn emit_plot_script(report: &Report, path: &Path) -> Result<()> {
    let title = path.file_stem().and_then(|s| s.to_str()).unwrap_or("report");
    write_file(path, &plot_script(report, title))
}

fn f_names(rows: &[RateRow]) -> Vec<String> {
    let mut names: Vec<String> = Vec::new();
    for r in rows {
        if !names.contains(&r.f_name) {
            names.push(r.f_name.clone());
        }
    }
    names
}

/// Slope of `log2 |weak error|` over `log2 δ` for one test function.
pub fn fit_slope(rows: &[RateRow], f_name: &str) -> Option<crate::stats::LinearFit> {
    let (x, y): (Vec<f64>, Vec<f64>) = rows
        .iter()
        .filter(|r| r.f_name == f_name && r.weak_error > 0.0 && r.weak_error.is_finite())
        .map(|r| (r.delta.log2(), r.weak_error.log2()))
        .unzip();
    if x.len() < 4 {
        return None;
    }
    ols(&x, &y)
}

/// Reads back the rows and fits of a rate CSV.
pub fn parse_rate_csv(text: &str) -> Result<RateReport> {
    let bad = |m: String| Error::Config(format!("malformed rate CSV: {m}"));
    let mut lines = text.lines();
    if lines.next() != Some(RATE_HEADER) {
        return Err(bad("header".into()));
    }
    let mut report = RateReport::default();
    for line in lines {
        if let Some(c) = line.strip_prefix("# ") {
            if let Some(rest) = c.strip_prefix("slope=") {
                let parts: Vec<&str> = rest.split(' ').collect();
                let field = |key: &str| {
                    parts.iter().find_map(|p| p.strip_prefix(key)).ok_or_else(|| bad(format!("missing {key}")))
                };
                let num = |v: &str| v.parse::<f64>().map_err(|e| bad(e.to_string()));
                let (lo, hi) = field("ci=")?.split_once(',').ok_or_else(|| bad("ci".into()))?;
                report.fits.push(SlopeFit {
                    slope: num(parts[0])?,
                    ci: (num(lo)?, num(hi)?),
                    pass: field("pass=")? == "true",
                    f_name: field("f_name=")?.to_string(),
                    unresolved: false,
                });
            } else if let Some((k, v)) = c.split_once('=') {
                report.metadata.push((k.to_string(), v.to_string()));
            }
            continue;
        }
        let c: Vec<&str> = line.split(',').collect();
        if c.len() != 9 {
            return Err(bad(line.to_string()));
        }
        let f = |i: usize| c[i].parse::<f64>().map_err(|e| bad(e.to_string()));
        let u = |i: usize| c[i].parse::<usize>().map_err(|e| bad(e.to_string()));
        report.rows.push(RateRow {
            delta: f(0)?,
            f_name: c[1].to_string(),
            weak_error: f(2)?,
            weak_stderr: f(3)?,
            w1: f(4)?,
            wbl_lower: f(5)?,
            wbl_upper: f(6)?,
            rejected_paths: u(7)?,
            diverged_paths: u(8)?,
        });
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(delta: f64, err: f64) -> RateRow {
        RateRow {
            delta,
            f_name: "tanh".into(),
            weak_error: err,
            weak_stderr: 1e-6,
            w1: err,
            wbl_lower: 0.5 * err,
            wbl_upper: err,
            rejected_paths: 0,
            diverged_paths: 0,
        }
    }

    fn four_levels() -> RateReport {
        let rows: Vec<RateRow> = (4..8).map(|k| row(0.5f64.powi(k), 0.3 * 0.5f64.powi(k) * (1.0 + 0.01 * k as f64))).collect();
        let fit = fit_slope(&rows, "tanh").unwrap();
        RateReport {
            rows,
            fits: vec![SlopeFit { f_name: "tanh".into(), slope: fit.slope, ci: fit.ci, pass: true, unresolved: false }],
            metadata: vec![("reference".into(), "exact".into())],
        }
    }

    #[test]
    fn empty_report_is_header_only() {
        assert_eq!(Report::Rate(RateReport::default()).to_csv(), format!("{RATE_HEADER}\n"));
        assert_eq!(Report::Sweep(SweepReport::default()).to_csv(), format!("{SWEEP_HEADER}\n"));
    }

    #[test]
    fn four_levels_give_four_rows_and_comments() {
        let csv = Report::Rate(four_levels()).to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], RATE_HEADER);
        assert_eq!(lines.iter().skip(1).filter(|l| !l.starts_with('#')).count(), 4);
        assert!(lines[5].starts_with("# slope="));
        assert!(lines[5..].iter().all(|l| l.starts_with('#')));
        assert_eq!(*lines.last().unwrap(), "# status=pass");
    }

    #[test]
    fn round_trip_recovers_slope() {
        let rep = four_levels();
        let parsed = parse_rate_csv(&Report::Rate(rep.clone()).to_csv()).unwrap();
        assert_eq!(parsed.rows, rep.rows);
        let refit = fit_slope(&parsed.rows, "tanh").unwrap();
        assert!((refit.slope - parsed.fits[0].slope).abs() < 1e-9);
        assert_eq!(parsed.fits[0].ci, rep.fits[0].ci);
    }

    #[test]
    fn status_rules() {
        let mut r = four_levels();
        assert_eq!(r.status(), Status::Pass);
        r.fits[0].unresolved = true;
        r.fits[0].pass = false;
        assert_eq!(r.status(), Status::Inconclusive);
        r.fits[0].unresolved = false;
        assert_eq!(r.status(), Status::Fail);
        assert_eq!(RateReport::default().status(), Status::Inconclusive);
        assert_eq!([Status::Pass, Status::Fail, Status::Inconclusive].map(Status::exit_code), [0, 1, 2]);
    }

    #[test]
    fn plot_script_has_data_and_guide() {
        let s = plot_script(&Report::Rate(four_levels()), "rate");
        assert!(s.contains("$f0 << EOD"));
        assert!(s.contains("**0.5"));
        assert_eq!(s.matches("EOD").count(), 2);
    }

    #[test]
    fn unwritable_path() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("f");
        std::fs::write(&file, "x").unwrap();
        assert!(emit_csv(&Report::Rate(four_levels()), &file.join("out.csv")).is_err());
    }
}
