use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use singular_em::drift::{sup_integrability_probe, ProbeReport};
use singular_em::harness::{self, ExperimentConfig, ModeName, Report, DRIFTS, REFERENCES};
use singular_em::model::DomainBox;
use singular_em::Error;

const EXIT_CONFIG: u8 = 3;

#[derive(Parser)]
#[command(name = "sde", about = "Euler-Maruyama experiments for SDEs with singular drifts")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        config: PathBuf,
        /// Override the worker count of the config.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// List the drift and reference names accepted in configs.
    ListDrifts,
    /// Quadrature estimate of μ0(exp(η|Z|²)) for Z = b - Z0.
    ProbeIntegrability {
        #[arg(long)]
        drift: String,
        #[arg(long)]
        eta: f64,
        #[arg(long, default_value_t = 1.0)]
        theta: f64,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long, default_value_t = 10)]
        n_max: usize,
        #[arg(long, default_value_t = 1e-3)]
        tail_bound_tol: f64,
        #[arg(long, default_value_t = 64)]
        quad_points: usize,
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        /// Half-width of the quadrature box.
        #[arg(long = "box", default_value_t = 9.0)]
        half_width: f64,
        /// Initial nodes per axis; doubled until the value settles.
        #[arg(long, default_value_t = 4096)]
        points: usize,
        #[arg(long, default_value_t = 0.0)]
        t: f64,
    },
    /// Print the version.
    Version,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, workers } => run(&config, workers),
        Command::ListDrifts => {
            println!("drifts:");
            for (name, keys, what) in DRIFTS {
                println!("  {name:<24} [{keys}]  {what}");
            }
            println!("references:");
            for (name, what) in REFERENCES {
                println!("  {name:<24} {what}");
            }
            ExitCode::SUCCESS
        }
        Command::ProbeIntegrability {
            drift,
            eta,
            theta,
            epsilon,
            n_max,
            tail_bound_tol,
            quad_points,
            sigma,
            half_width,
            points,
            t,
        } => {
            let kinetic = drift == "kinetic-ou";
            let cfg = ExperimentConfig {
                drift_name: drift,
                theta,
                epsilon,
                n_max,
                tail_bound_tol,
                quad_points,
                sigma,
                mode: if kinetic { ModeName::Degenerate } else { ModeName::NonDegenerate },
                ..probe_template()
            };
            match probe(&cfg, eta, t, DomainBox::symmetric(half_width), points) {
                Ok(r) => {
                    for (q, v) in &r.levels {
                        println!("points={q} value={v}");
                    }
                    println!("value={} converged={} infinite={}", r.value, r.converged, r.infinite);
                    if r.converged {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(1)
                    }
                }
                Err(e) => fail(&e),
            }
        }
        Command::Version => {
            println!("sde {}", env!("CARGO_PKG_VERSION"));
            ExitCode::SUCCESS
        }
    }
}

fn probe_template() -> ExperimentConfig {
    ExperimentConfig::from_toml("experiment = \"weak_convergence\"\ndrift_name = \"ou\"\noutput_path = \"-\"\n")
        .expect("template config parses")
}

fn probe(cfg: &ExperimentConfig, eta: f64, t: f64, domain: DomainBox, points: usize) -> Result<ProbeReport, Error> {
    let target = harness::target(cfg, None)?;
    let reference = harness::reference(cfg)?;
    let system = reference.system().ok_or_else(|| Error::Config("probes need the gaussian reference".into()))?;
    let z = reference.perturbation(&target.drift, target.mode)?;
    let positions = vec![vec![-1.0; cfg.dim], vec![0.0; cfg.dim], vec![1.0; cfg.dim]];
    sup_integrability_probe(&z, system, eta, &[t], &positions, domain, points)
}

fn run(path: &std::path::Path, workers: Option<usize>) -> ExitCode {
    let mut cfg = match ExperimentConfig::from_file(path) {
        Ok(c) => c,
        Err(e) => return fail(&e),
    };
    if workers.is_some() {
        cfg.workers = workers;
    }
    match harness::run_and_emit(&cfg) {
        Ok(report) => {
            summarize(&report);
            println!("wrote {}", cfg.output_path.display());
            let status = report.status();
            println!("status: {}", status.as_str());
            ExitCode::from(status.exit_code() as u8)
        }
        Err(e) => fail(&e),
    }
}

fn summarize(report: &Report) {
    match report {
        Report::Rate(r) => {
            for f in &r.fits {
                println!("{}: slope {:.3} (95% CI {:.3}..{:.3}) pass={}", f.f_name, f.slope, f.ci.0, f.ci.1, f.pass);
            }
        }
        Report::Weak(_, tau) => println!("Kendall tau of W1 against delta: {tau:.3}"),
        Report::Sweep(s) => println!("Kendall tau: W1 {:.3}, bound bracket {:.3}", s.tau_w1, s.tau_bracket),
        Report::CrossCheck(c) => {
            for r in &c.rows {
                let [a, b, q] = r.z_scores();
                println!("delta {} {}: z(direct,Q2)={a:.2} z(direct,Q1)={b:.2} z(Q2,Q1)={q:.2}", r.delta, r.f_name);
            }
        }
        Report::Novikov(n) => {
            for r in &n.rows {
                println!("{}: {} ± {}", r.quantity, r.estimate, r.std_error);
            }
        }
    }
}

/// Config and input problems exit with 3; anything else is a failed run.
fn fail(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    match e {
        Error::Config(_) | Error::InvalidArgument(_) | Error::Dimension { .. } | Error::InvalidDiffusion(_) => {
            ExitCode::from(EXIT_CONFIG)
        }
        _ => ExitCode::from(1),
    }
}
