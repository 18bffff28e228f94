//! Experiment orchestration: configs, named drifts, level studies with
//! common random numbers, mollification sweeps, Girsanov cross-checks and
//! their CSV and gnuplot output.

mod config;
mod experiments;
mod registry;
mod report;

pub use config::{Experiment, ExperimentConfig, ModeName};
pub use experiments::{
    plot_path, run, run_and_emit, run_girsanov_crosscheck, run_mollify_sweep, run_novikov_report,
    run_rate_regression, run_weak_convergence, RATE_TOLERANCE,
};
pub use registry::{diffusion, mollified_log_z, reference, target, Reference, Target, DRIFTS, REFERENCES};
pub use report::{
    emit_csv, emit_plot_script, fit_slope, parse_rate_csv, plot_script, CrossCheckReport, CrossCheckRow, Estimate,
    NovikovRow, NovikovTable, RateReport, RateRow, Report, SlopeFit, Status, SweepReport, SweepRow, CROSS_CHECK_HEADER,
    NOVIKOV_HEADER, RATE_HEADER, SWEEP_HEADER, TAU_LIMIT,
};

#[cfg(test)]
mod tests;
