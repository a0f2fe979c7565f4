//! Window utility (revenue minus penalties minus VM cost) and elasticity
//! debt, valued by replaying a decision window under every candidate
//! action from a cloned checkpoint.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::SimError;
use crate::policy::{Action, StateKey};
use crate::sim::{Cluster, Completion, SimConfig, SlaMode};
use crate::time::SimTime;

/// Tolerance for comparing money values.
pub const MONEY_EPS: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Success,
    Failure,
}

/// A request succeeds only if it finished strictly within the limit.
pub fn classify_request(response_time: f64, sla_limit: f64) -> Outcome {
    if response_time < sla_limit {
        Outcome::Success
    } else {
        Outcome::Failure
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct UtilityBreakdown {
    pub revenue: f64,
    pub penalty: f64,
    pub vm_cost: f64,
    pub utility: f64,
    /// `(start, end)` in seconds.
    pub window: (f64, f64),
    pub successes: u64,
    pub failures: u64,
    pub vm_cycles: u64,
}

impl UtilityBreakdown {
    pub fn with_window(mut self, start: f64, end: f64) -> UtilityBreakdown {
        self.window = (start, end);
        self
    }
}

/// Utility of a window with `successes` good requests, `failures` SLA
/// violations and the given billing cycles charged per VM.
pub fn compute_utility(
    successes: u64,
    failures: u64,
    charged_cycles_per_vm: &[u64],
    prices: &SimConfig,
) -> UtilityBreakdown {
    utility_from_cycles(successes, failures, charged_cycles_per_vm.iter().sum(), prices)
}

pub(crate) fn utility_from_cycles(
    successes: u64,
    failures: u64,
    cycles: u64,
    prices: &SimConfig,
) -> UtilityBreakdown {
    let revenue = prices.price_per_request * successes as f64;
    let penalized = match prices.sla_mode {
        SlaMode::PerRequest => failures,
        SlaMode::Floor => {
            let total = successes + failures;
            if total > 0 && (successes as f64) < prices.sla_target * total as f64 {
                failures
            } else {
                0
            }
        }
    };
    let penalty = prices.penalty_per_request * penalized as f64;
    let vm_cost = prices.vm_cost_per_cycle * cycles as f64;
    UtilityBreakdown {
        revenue,
        penalty,
        vm_cost,
        utility: revenue - penalty - vm_cost,
        window: (0.0, 0.0),
        successes,
        failures,
        vm_cycles: cycles,
    }
}

/// Debt of an adaptation: actual minus ideal utility, never positive when
/// the ideal is a maximum over a set containing the actual.
pub fn compute_debt(u_actual: f64, u_ideal: f64) -> f64 {
    u_actual - u_ideal
}

/// How far a decision's valuation window reaches.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DebtWindow {
    /// Up to the next decision point, valued after the fact.
    #[default]
    Retrospective,
    /// One decision interval plus one billing cycle, long enough for a
    /// launched VM to come up and serve.
    Proactive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DebtValuation {
    pub u_actual: f64,
    pub u_ideal: f64,
    pub debt: f64,
    pub ideal_action: Action,
    pub window_end: f64,
    pub per_action_utilities: BTreeMap<Action, f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdaptationRecord {
    pub time: f64,
    pub state: StateKey,
    /// What the policy asked for.
    pub requested: Action,
    /// What was applied (a release of the last VM becomes a maintain).
    pub action_taken: Action,
    pub valuation: Option<DebtValuation>,
}

impl AdaptationRecord {
    pub fn debt(&self) -> f64 {
        self.valuation.as_ref().map_or(0.0, |v| v.debt)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Counterfactual {
    pub per_action: BTreeMap<Action, UtilityBreakdown>,
    pub best_action: Action,
    pub u_ideal: f64,
}

impl Counterfactual {
    /// Values the decision that actually took `taken`. When `taken` ties for
    /// the best utility it is reported as the ideal action and the debt is
    /// exactly zero.
    pub fn valuation(&self, taken: Action, window_end: f64) -> DebtValuation {
        let u_actual = self.per_action[&taken].utility;
        let ideal_action = if u_actual == self.u_ideal { taken } else { self.best_action };
        DebtValuation {
            u_actual,
            u_ideal: self.u_ideal,
            debt: compute_debt(u_actual, self.u_ideal),
            ideal_action,
            window_end,
            per_action_utilities: self.per_action.iter().map(|(a, b)| (*a, b.utility)).collect(),
        }
    }
}

/// Replays `(now, window_end]` from a copy of `checkpoint` after applying
/// `action`, with no further adaptations. Requests arriving in the window
/// are followed to completion; billing covers cycles started in the window.
pub fn replay_window(checkpoint: &Cluster, action: Action, window_end: SimTime) -> UtilityBreakdown {
    let mut cluster = checkpoint.clone();
    let start = cluster.now();
    let limit = cluster.clock().sla_limit;
    cluster.apply(action);
    cluster.set_arrival_cutoff(window_end);
    let (mut ok, mut failed) = (0u64, 0u64);
    let mut tally = |done: &Completion| {
        if done.arrival > start && done.arrival <= window_end {
            if done.response_time() < limit {
                ok += 1;
            } else {
                failed += 1;
            }
        }
    };
    cluster.advance_through(window_end, &mut tally);
    cluster.drain(&mut tally);
    let cycles = cluster.cycles_between(start, window_end);
    utility_from_cycles(ok, failed, cycles, checkpoint.config())
        .with_window(start.as_secs(), window_end.as_secs())
}

/// Best achievable utility over `window` seconds from `checkpoint` across
/// `candidates`, and each candidate's utility.
pub fn counterfactual_ideal(
    checkpoint: &Cluster,
    candidates: &[Action],
    window: f64,
) -> Result<Counterfactual, SimError> {
    let end = checkpoint.now() + SimTime::from_secs(window);
    counterfactual_until(checkpoint, candidates, end)
}

pub(crate) fn counterfactual_until(
    checkpoint: &Cluster,
    candidates: &[Action],
    window_end: SimTime,
) -> Result<Counterfactual, SimError> {
    let mut per_action = BTreeMap::new();
    for &action in candidates {
        per_action.insert(action, replay_window(checkpoint, action, window_end));
    }
    let (best_action, u_ideal) = per_action
        .iter()
        .map(|(a, b)| (*a, b.utility))
        .reduce(|best, cur| if cur.1 > best.1 { cur } else { best })
        .ok_or(SimError::NoCandidates)?;
    Ok(Counterfactual {
        per_action,
        best_action,
        u_ideal,
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::workload::WorkloadTrace;

    fn approx(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn classification_is_strict() {
        assert_eq!(classify_request(0.2, 2.0), Outcome::Success);
        assert_eq!(classify_request(2.0, 2.0), Outcome::Failure);
        assert_eq!(classify_request(5.0, 2.0), Outcome::Failure);
    }

    #[test]
    fn utility_examples() {
        let p = SimConfig::default();
        let u = compute_utility(1000, 50, &[3, 3], &p);
        assert!(approx(u.utility, 1.06774, 1e-12));
        assert_eq!(u.utility, u.revenue - u.penalty - u.vm_cost);
        assert_eq!(compute_utility(0, 0, &[], &p).utility, 0.0);
        assert!(approx(compute_utility(0, 10, &[1], &p).utility, -0.03111, 1e-12));
    }

    #[test]
    fn floor_mode_waives_penalties_above_target() {
        let p = SimConfig {
            sla_mode: SlaMode::Floor,
            ..SimConfig::default()
        };
        assert_eq!(compute_utility(96, 4, &[], &p).penalty, 0.0);
        assert!(approx(compute_utility(90, 10, &[], &p).penalty, 0.02, 1e-12));
    }

    #[test]
    fn debt_examples() {
        assert_eq!(compute_debt(5.0, 5.0), 0.0);
        assert!(approx(compute_debt(4.9, 5.0), -0.1, 1e-12));
    }

    fn idle_cluster(vms: u32, at: f64) -> Cluster {
        let config = SimConfig {
            initial_vms: vms,
            ..SimConfig::default()
        };
        let trace = WorkloadTrace::default();
        let mut c = Cluster::new(Arc::new(config), trace.requests.into()).unwrap();
        c.advance_through(SimTime::from_secs(at), &mut |_| {});
        c
    }

    #[test]
    fn equal_replays_give_zero_debt() {
        // With a single VM a release falls back to maintain.
        let c = idle_cluster(1, 100.0);
        let cf = counterfactual_ideal(&c, &[Action::Maintain, Action::Release], 60.0).unwrap();
        let v = cf.valuation(Action::Release, 160.0);
        assert_eq!(v.debt, 0.0);
        assert_eq!(cf.valuation(Action::Maintain, 160.0).debt, 0.0);
    }

    #[test]
    fn release_beats_maintain_by_one_cycle() {
        // Two idle VMs at 280 s: the next cycle starts at 300 s.
        let c = idle_cluster(2, 280.0);
        let cf = counterfactual_ideal(&c, &Action::ALL, 60.0).unwrap();
        let gap = cf.per_action[&Action::Release].utility - cf.per_action[&Action::Maintain].utility;
        assert!(approx(gap, 0.01111, 1e-12));
        assert_eq!(cf.best_action, Action::Release);
        let v = cf.valuation(Action::Maintain, 340.0);
        assert!(approx(v.debt, -0.01111, 1e-12));
        assert_eq!(v.ideal_action, Action::Release);
    }

    #[test]
    fn empty_candidates_rejected() {
        let c = idle_cluster(1, 0.0);
        assert!(matches!(counterfactual_ideal(&c, &[], 60.0), Err(SimError::NoCandidates)));
    }

    #[test]
    fn replay_leaves_checkpoint_untouched() {
        let config = Arc::new(SimConfig::default());
        let trace = WorkloadTrace::from_arrivals((1..50).map(|i| (i as f64, 2.0)).collect(), 60.0);
        let mut c = Cluster::new(config, trace.requests.into()).unwrap();
        c.advance_through(SimTime::from_secs(10.0), &mut |_| {});
        let before = format!("{c:?}");
        counterfactual_ideal(&c, &Action::ALL, 30.0).unwrap();
        assert_eq!(format!("{c:?}"), before);
    }
}
