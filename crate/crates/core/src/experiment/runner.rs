use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use super::config::{ExperimentConfig, PolicyKind};
use super::report::ExperimentReport;
use crate::error::ExperimentError;
use crate::policy::{DebtAwarePolicy, QTable, VotingPolicy};
use crate::sim::{run, RunOptions};
use crate::workload::WorkloadTrace;

/// Builds the workload and runs the configured policy on it.
pub fn run_experiment(config: &ExperimentConfig, qtable_in: Option<QTable>) -> Result<ExperimentReport, ExperimentError> {
    config.validate()?;
    let trace = config.load_workload()?;
    run_on_trace(config, &trace, qtable_in)
}

/// Runs the configured policy on an already built trace.
pub fn run_on_trace(
    config: &ExperimentConfig,
    trace: &WorkloadTrace,
    qtable_in: Option<QTable>,
) -> Result<ExperimentReport, ExperimentError> {
    config.validate()?;
    let options = RunOptions {
        horizon: config.horizon,
        record_debt: config.record_debt,
        thresholds: config.thresholds,
    };
    let started = Instant::now();
    match config.policy {
        PolicyKind::DebtAware => {
            let mut policy = DebtAwarePolicy::new(config.learning, config.thresholds, config.seed);
            if let Some(q) = qtable_in {
                policy = policy.with_qtable(q);
            }
            let result = run(&config.sim, trace, &mut policy, &options)?;
            let elapsed = started.elapsed().as_secs_f64();
            Ok(ExperimentReport::from_result(result, config.seed, Some(policy.qtable().clone()), elapsed))
        }
        PolicyKind::Voting => {
            let mut policy = VotingPolicy::new(config.voting);
            let result = run(&config.sim, trace, &mut policy, &options)?;
            let elapsed = started.elapsed().as_secs_f64();
            Ok(ExperimentReport::from_result(result, config.seed, None, elapsed))
        }
    }
}

/// Runs independent experiments on all available cores. Results come back
/// in input order.
pub fn run_cells(cells: &[ExperimentConfig]) -> Vec<Result<ExperimentReport, ExperimentError>> {
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(cells.len().max(1));
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<Result<ExperimentReport, ExperimentError>>>> =
        cells.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(cell) = cells.get(i) else { break };
                let out = run_experiment(cell, None);
                *slots[i].lock().expect("result slot") = Some(out);
            });
        }
    });
    slots
        .into_iter()
        .map(|s| s.into_inner().expect("result slot").expect("every cell ran"))
        .collect()
}
