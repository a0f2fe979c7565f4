//! Experiment orchestration: configuration files, seeded runs of either
//! policy, CSV reports and run-to-run comparison.

mod compare;
mod config;
mod report;
mod runner;

pub use compare::{compare, compare_dirs, compare_reports, Comparison, RunSummary};
pub use config::{load_profile, ExperimentConfig, PolicyKind, WorkloadSource};
pub use report::{
    debt_csv, emit_csv, fixed, penalties_csv, provisioning_csv, read_summary, summary_csv, utility_csv,
    ExperimentReport, ReportRow, ReportTotals,
};
pub use runner::{run_cells, run_experiment, run_on_trace};
