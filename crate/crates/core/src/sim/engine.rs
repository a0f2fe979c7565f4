//! The main simulation loop: advances the cluster from one decision point
//! to the next, consults the policy, values each decision by replay and
//! accounts utility per monitoring window.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::economics::{
    counterfactual_until, utility_from_cycles, AdaptationRecord, DebtWindow, UtilityBreakdown,
};
use crate::error::SimError;
use crate::policy::{discretize_state, Action, Policy, StateThresholds};
use crate::sim::cluster::{Cluster, Completion};
use crate::sim::config::SimConfig;
use crate::sim::vm::VmRecord;
use crate::time::SimTime;
use crate::workload::{Request, WorkloadTrace};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunOptions {
    /// Simulated seconds; defaults to the trace duration.
    pub horizon: Option<f64>,
    /// Value every decision by counterfactual replay.
    pub record_debt: bool,
    /// Used to label decisions of policies without their own state.
    pub thresholds: StateThresholds,
}

/// One monitoring window `(start, end]`, opened by a decision point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowRow {
    pub start: f64,
    pub end: f64,
    pub ready_vms: usize,
    pub pending_vms: usize,
    /// Unreleased VMs after the decision.
    pub provisioned_vms: usize,
    /// Unreleased VMs had the best action been taken.
    pub ideal_vms: Option<usize>,
    /// Requests arriving in the window.
    pub submitted: u64,
    /// Outcome of the window's requests and the cycles started in it.
    pub utility: UtilityBreakdown,
    /// False when cool-down kept the policy from being consulted.
    pub decided: bool,
    pub requested: Action,
    pub action: Action,
    pub debt: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunTotals {
    pub submitted: u64,
    pub successes: u64,
    pub failures: u64,
    pub vm_cycles: u64,
    pub revenue: f64,
    pub penalty: f64,
    pub vm_cost: f64,
    pub utility: f64,
    pub total_debt: f64,
    pub decisions: usize,
    pub launches: usize,
    pub releases: usize,
    /// Mean of `provisioned_vms` over windows.
    pub mean_vms: f64,
}

impl RunTotals {
    pub fn failed_fraction(&self) -> f64 {
        if self.submitted == 0 {
            0.0
        } else {
            self.failures as f64 / self.submitted as f64
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimulationResult {
    pub policy: String,
    pub horizon: f64,
    pub windows: Vec<WindowRow>,
    /// Every decision the policy made, in time order.
    pub adaptations: Vec<AdaptationRecord>,
    /// The trace with start and finish times filled in.
    pub requests: Vec<Request>,
    pub vms: Vec<VmRecord>,
    pub totals: RunTotals,
}

struct Recorder {
    interval: SimTime,
    rows: usize,
    limit: SimTime,
    tallies: Vec<(u64, u64)>,
    recent: (u64, u64),
    requests: Vec<Request>,
}

impl Recorder {
    fn row_of(&self, arrival: SimTime) -> usize {
        row_of(arrival, self.interval, self.rows)
    }

    fn record(&mut self, done: &Completion) {
        let row = self.row_of(done.arrival);
        if done.response_time() < self.limit {
            self.tallies[row].0 += 1;
            self.recent.0 += 1;
        } else {
            self.tallies[row].1 += 1;
            self.recent.1 += 1;
        }
        let req = &mut self.requests[done.request];
        req.start_time = Some(done.start.as_secs());
        req.finish_time = Some(done.finish.as_secs());
    }
}

/// Window index of an arrival: windows are `(t_k, t_k+1]`, except that the
/// first one also holds time zero.
fn row_of(arrival: SimTime, interval: SimTime, rows: usize) -> usize {
    let raw = arrival.0.saturating_sub(1) / interval.0;
    (raw as usize).min(rows.saturating_sub(1))
}

/// First decision point after a decision at `t`: one interval later, or the
/// first tick at least one cool-down later after an adaptation.
fn next_decision(t: SimTime, adapted: bool, interval: SimTime, cool_down: SimTime) -> SimTime {
    if adapted {
        let earliest = (t + cool_down).0;
        SimTime(earliest.div_ceil(interval.0).max(t.0 / interval.0 + 1) * interval.0)
    } else {
        t + interval
    }
}

/// Simulates `trace` under `policy` and returns per-window accounting.
pub fn run(
    config: &SimConfig,
    trace: &WorkloadTrace,
    policy: &mut dyn Policy,
    options: &RunOptions,
) -> Result<SimulationResult, SimError> {
    config.validate()?;
    if policy.needs_debt() && !options.record_debt {
        return Err(SimError::DebtRequired);
    }
    let horizon_secs = options.horizon.unwrap_or(trace.duration);
    if !(horizon_secs.is_finite() && horizon_secs > 0.0) {
        return Err(SimError::InvalidConfig(format!("horizon must be positive, got {horizon_secs}")));
    }
    if let Some(last) = trace.requests.iter().map(|r| r.arrival_time).reduce(f64::max) {
        if last > horizon_secs {
            return Err(SimError::TraceBeyondHorizon {
                arrival: last,
                horizon: horizon_secs,
            });
        }
    }

    let shared = Arc::new(config.clone());
    let mut cluster = Cluster::new(shared, trace.requests.clone().into())?;
    let clock = *cluster.clock();
    let horizon = SimTime::from_secs(horizon_secs);
    let interval = clock.decision_interval;
    let ticks: Vec<SimTime> = (0u64..)
        .map(|k| SimTime(k * interval.0))
        .take_while(|t| *t < horizon)
        .collect();
    let n = ticks.len();

    let mut rec = Recorder {
        interval,
        rows: n,
        limit: clock.sla_limit,
        tallies: vec![(0, 0); n],
        recent: (0, 0),
        requests: trace.requests.clone(),
    };
    let mut rows: Vec<WindowRow> = Vec::with_capacity(n);
    let mut adaptations = Vec::new();
    let mut pending_debt: Option<f64> = None;
    let mut last_adaptation: Option<SimTime> = None;

    for (k, &t) in ticks.iter().enumerate() {
        cluster.advance_through(t, &mut |d| rec.record(d));
        let (ok, failed) = std::mem::take(&mut rec.recent);
        let obs = cluster.observe(t.saturating_sub(interval), ok, failed);
        cluster.prune_busy(t);

        let end = ticks.get(k + 1).copied().unwrap_or(horizon);
        let active_before = cluster.active_count();
        let mut row = WindowRow {
            start: t.as_secs(),
            end: end.as_secs(),
            ready_vms: obs.ready_vms,
            pending_vms: obs.pending_vms,
            provisioned_vms: active_before,
            ideal_vms: None,
            submitted: 0,
            utility: UtilityBreakdown::default(),
            decided: false,
            requested: Action::Maintain,
            action: Action::Maintain,
            debt: None,
        };

        let cooled = last_adaptation.is_none_or(|l| t - l >= clock.cool_down);
        if cooled {
            if let Some(debt) = pending_debt.take() {
                policy.observe_reward(debt, &obs)?;
            }
            let requested = policy.decide(&obs)?;
            let state = policy
                .last_state()
                .unwrap_or_else(|| discretize_state(&obs, &options.thresholds));
            let taken = effective(requested, active_before);
            let adapted = taken != Action::Maintain;

            let valuation = if options.record_debt {
                let window_end = match policy.debt_window() {
                    DebtWindow::Retrospective => next_decision(t, adapted, interval, clock.cool_down),
                    DebtWindow::Proactive => t + interval + clock.billing_cycle,
                }
                .min(horizon);
                let cf = counterfactual_until(&cluster, &Action::ALL, window_end)?;
                Some(cf.valuation(taken, window_end.as_secs()))
            } else {
                None
            };

            let applied = cluster.apply(requested);
            debug_assert_eq!(applied, taken);
            if adapted {
                last_adaptation = Some(t);
            }
            pending_debt = valuation.as_ref().map(|v| v.debt);

            row.decided = true;
            row.requested = requested;
            row.action = taken;
            row.provisioned_vms = cluster.active_count();
            row.debt = pending_debt;
            row.ideal_vms = valuation
                .as_ref()
                .map(|v| vm_count_after(effective(v.ideal_action, active_before), active_before));
            adaptations.push(AdaptationRecord {
                time: t.as_secs(),
                state,
                requested,
                action_taken: taken,
                valuation,
            });
        }
        rows.push(row);
    }

    cluster.advance_through(horizon, &mut |d| rec.record(d));
    if let Some(debt) = pending_debt.take() {
        let (ok, failed) = std::mem::take(&mut rec.recent);
        let start = ticks.last().copied().unwrap_or(SimTime::ZERO);
        let obs = cluster.observe(start, ok, failed);
        policy.observe_reward(debt, &obs)?;
    }
    cluster.drain(&mut |d| rec.record(d));

    for req in &trace.requests {
        let row = rec.row_of(SimTime::from_secs(req.arrival_time));
        if let Some(r) = rows.get_mut(row) {
            r.submitted += 1;
        }
    }
    for (k, row) in rows.iter_mut().enumerate() {
        let start = ticks[k];
        let end = ticks.get(k + 1).copied().unwrap_or(horizon);
        let (ok, failed) = rec.tallies[k];
        row.utility = utility_from_cycles(ok, failed, cluster.cycles_between(start, end), config)
            .with_window(start.as_secs(), end.as_secs());
    }

    let vms = cluster
        .vms()
        .iter()
        .map(|v| VmRecord {
            id: v.id,
            requested_at: v.requested_at.as_secs(),
            ready_at: v.ready_at.as_secs(),
            released_at: v.released_at.map(SimTime::as_secs),
            cycles_charged: v.cycles_charged_by(horizon),
        })
        .collect();
    let totals = totals(&rows, &adaptations);

    Ok(SimulationResult {
        policy: policy.name().to_string(),
        horizon: horizon_secs,
        windows: rows,
        adaptations,
        requests: rec.requests,
        vms,
        totals,
    })
}

/// What `Cluster::apply` will do with `action` given `active` VMs.
fn effective(action: Action, active: usize) -> Action {
    match action {
        Action::Release if active <= 1 => Action::Maintain,
        other => other,
    }
}

fn vm_count_after(action: Action, active: usize) -> usize {
    match action {
        Action::Maintain => active,
        Action::Launch => active + 1,
        Action::Release => active - 1,
    }
}

fn totals(rows: &[WindowRow], adaptations: &[AdaptationRecord]) -> RunTotals {
    let mut t = RunTotals::default();
    for row in rows {
        t.submitted += row.submitted;
        t.successes += row.utility.successes;
        t.failures += row.utility.failures;
        t.vm_cycles += row.utility.vm_cycles;
        t.revenue += row.utility.revenue;
        t.penalty += row.utility.penalty;
        t.vm_cost += row.utility.vm_cost;
        t.utility += row.utility.utility;
        t.mean_vms += row.provisioned_vms as f64;
    }
    if !rows.is_empty() {
        t.mean_vms /= rows.len() as f64;
    }
    t.decisions = adaptations.len();
    t.launches = adaptations.iter().filter(|a| a.action_taken == Action::Launch).count();
    t.releases = adaptations.iter().filter(|a| a.action_taken == Action::Release).count();
    t.total_debt = adaptations.iter().map(AdaptationRecord::debt).sum();
    t
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::error::PolicyError;
    use crate::policy::VotingPolicy;
    use crate::sim::ClusterObservation;

    /// Plays a fixed script of actions, then maintains.
    struct Scripted {
        script: Vec<Action>,
        next: usize,
        rewards: Vec<f64>,
    }

    impl Scripted {
        fn new(script: Vec<Action>) -> Scripted {
            Scripted {
                script,
                next: 0,
                rewards: Vec::new(),
            }
        }
    }

    impl Policy for Scripted {
        fn name(&self) -> &'static str {
            "scripted"
        }
        fn decide(&mut self, _obs: &ClusterObservation) -> Result<Action, PolicyError> {
            let a = self.script.get(self.next).copied().unwrap_or(Action::Maintain);
            self.next += 1;
            Ok(a)
        }
        fn observe_reward(&mut self, debt: f64, _next: &ClusterObservation) -> Result<(), PolicyError> {
            self.rewards.push(debt);
            Ok(())
        }
    }

    fn opts(record_debt: bool) -> RunOptions {
        RunOptions {
            record_debt,
            ..RunOptions::default()
        }
    }

    #[test]
    fn empty_trace_costs_initial_cycles() {
        let config = SimConfig {
            initial_vms: 1,
            ..SimConfig::default()
        };
        let trace = WorkloadTrace {
            requests: Vec::new(),
            duration: 600.0,
        };
        let mut policy = Scripted::new(Vec::new());
        let res = run(&config, &trace, &mut policy, &opts(false)).unwrap();
        assert_eq!(res.windows.len(), 10);
        assert_eq!(res.totals.vm_cycles, 2);
        assert!((res.totals.utility + 0.02222).abs() < 1e-12);
        assert_eq!(res.totals.decisions, 10);
    }

    #[test]
    fn burst_on_one_vm() {
        let config = SimConfig {
            initial_vms: 1,
            ..SimConfig::default()
        };
        let trace = WorkloadTrace::from_arrivals(vec![(0.0, 2.0); 10], 60.0);
        let res = run(&config, &trace, &mut Scripted::new(Vec::new()), &opts(false)).unwrap();
        assert_eq!(res.totals.successes, 9);
        assert_eq!(res.totals.failures, 1);
        let last = res.requests.last().unwrap();
        assert_eq!(last.finish_time, Some(2.0));
        let expected = 9.0 * 0.0012344 - 0.002 - 0.01111;
        assert!((res.totals.utility - expected).abs() < 1e-12);
    }

    #[test]
    fn next_decision_respects_cool_down() {
        let s = SimTime::from_secs;
        assert_eq!(next_decision(s(60.0), false, s(60.0), s(120.0)), s(120.0));
        assert_eq!(next_decision(s(60.0), true, s(60.0), s(120.0)), s(180.0));
        assert_eq!(next_decision(s(60.0), true, s(60.0), s(90.0)), s(180.0));
        assert_eq!(next_decision(s(60.0), true, s(60.0), s(10.0)), s(120.0));
    }

    #[test]
    fn cool_down_skips_ticks() {
        let trace = WorkloadTrace {
            requests: Vec::new(),
            duration: 600.0,
        };
        let mut policy = Scripted::new(vec![Action::Launch, Action::Launch, Action::Launch]);
        let res = run(&SimConfig::default(), &trace, &mut policy, &opts(false)).unwrap();
        let decided: Vec<f64> = res.windows.iter().filter(|w| w.decided).map(|w| w.start).collect();
        assert_eq!(&decided[..4], &[0.0, 120.0, 240.0, 360.0]);
        assert_eq!(res.totals.launches, 3);
    }

    #[test]
    fn debt_needs_recording() {
        let mut policy = crate::policy::DebtAwarePolicy::new(Default::default(), Default::default(), 0);
        let trace = WorkloadTrace {
            requests: Vec::new(),
            duration: 60.0,
        };
        assert!(matches!(
            run(&SimConfig::default(), &trace, &mut policy, &opts(false)),
            Err(SimError::DebtRequired)
        ));
    }

    #[test]
    fn trace_must_fit_horizon() {
        let trace = WorkloadTrace::from_arrivals(vec![(100.0, 2.0)], 100.0);
        let options = RunOptions {
            horizon: Some(50.0),
            ..RunOptions::default()
        };
        assert!(matches!(
            run(&SimConfig::default(), &trace, &mut Scripted::new(vec![]), &options),
            Err(SimError::TraceBeyondHorizon { .. })
        ));
    }

    #[test]
    fn rewards_reach_the_policy() {
        let trace = WorkloadTrace::from_arrivals((1..300).map(|i| (i as f64, 2.0)).collect(), 300.0);
        let mut policy = Scripted::new(vec![Action::Release]);
        let res = run(&SimConfig::default(), &trace, &mut policy, &opts(true)).unwrap();
        assert_eq!(policy.rewards.len(), res.adaptations.len());
        for (r, a) in policy.rewards.iter().zip(&res.adaptations) {
            assert_eq!(*r, a.debt());
        }
    }

    fn arb_trace() -> impl Strategy<Value = WorkloadTrace> {
        prop::collection::vec((0.001..599.0f64, 1.0..40.0f64), 0..400)
            .prop_map(|a| WorkloadTrace::from_arrivals(a, 600.0))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn windows_sum_to_totals(trace in arb_trace(), script in prop::collection::vec(0usize..3, 0..10)) {
            let script = script.into_iter().map(|i| Action::ALL[i]).collect();
            let res = run(&SimConfig::default(), &trace, &mut Scripted::new(script), &opts(false)).unwrap();
            let t = &res.totals;
            prop_assert_eq!(t.submitted, trace.len() as u64);
            prop_assert_eq!(t.successes + t.failures, t.submitted);
            let cycles: u64 = res.vms.iter().map(|v| v.cycles_charged).sum();
            prop_assert_eq!(t.vm_cycles, cycles);
            prop_assert!(res.requests.iter().all(|r| r.finish_time.is_some()));
        }

        #[test]
        fn retrospective_actual_matches_main_run(trace in arb_trace(), script in prop::collection::vec(0usize..3, 0..10)) {
            let script = script.into_iter().map(|i| Action::ALL[i]).collect();
            let res = run(&SimConfig::default(), &trace, &mut Scripted::new(script), &opts(true)).unwrap();
            for a in &res.adaptations {
                let v = a.valuation.as_ref().unwrap();
                let observed: f64 = res
                    .windows
                    .iter()
                    .filter(|w| w.start >= a.time && w.end <= v.window_end + 1e-9)
                    .map(|w| w.utility.utility)
                    .sum();
                prop_assert!((observed - v.u_actual).abs() < 1e-9, "t={} {} vs {}", a.time, observed, v.u_actual);
                prop_assert!(v.debt <= 0.0);
            }
        }

        #[test]
        fn recording_debt_does_not_change_voting(trace in arb_trace()) {
            let a = run(&SimConfig::default(), &trace, &mut VotingPolicy::default(), &opts(false)).unwrap();
            let b = run(&SimConfig::default(), &trace, &mut VotingPolicy::default(), &opts(true)).unwrap();
            prop_assert_eq!(&a.windows.iter().map(|w| w.provisioned_vms).collect::<Vec<_>>(),
                            &b.windows.iter().map(|w| w.provisioned_vms).collect::<Vec<_>>());
            prop_assert_eq!(a.totals.utility, b.totals.utility);
        }
    }
}
