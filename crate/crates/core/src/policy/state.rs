use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{Action, ActionSet};
use crate::sim::ClusterObservation;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Level {
    Low,
    Medium,
    High,
}

impl Level {
    pub const ALL: [Level; 3] = [Level::Low, Level::Medium, Level::High];

    /// Low below `low`, High above `high`, Medium otherwise (bounds included).
    pub fn of(fraction: f64, low: f64, high: f64) -> Level {
        if fraction < low {
            Level::Low
        } else if fraction > high {
            Level::High
        } else {
            Level::Medium
        }
    }

    fn as_str(self) -> &'static str {
        match self {
            Level::Low => "Low",
            Level::Medium => "Medium",
            Level::High => "High",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct StateKey {
    /// Share of VMs with queued requests.
    pub queued: Level,
    /// Share of idle VMs close to their next billing cycle.
    pub billing_idle: Level,
}

impl StateKey {
    pub fn new(queued: Level, billing_idle: Level) -> StateKey {
        StateKey { queued, billing_idle }
    }

    pub fn all() -> impl Iterator<Item = StateKey> {
        Level::ALL
            .into_iter()
            .flat_map(|q| Level::ALL.into_iter().map(move |b| StateKey::new(q, b)))
    }

    pub fn index(self) -> usize {
        self.queued as usize * 3 + self.billing_idle as usize
    }
}

impl fmt::Display for StateKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.queued.as_str(), self.billing_idle.as_str())
    }
}

impl FromStr for StateKey {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let level = |p: &str| {
            Level::ALL
                .into_iter()
                .find(|l| l.as_str() == p)
                .ok_or_else(|| format!("unknown level {p:?}"))
        };
        let (q, b) = s.split_once('/').ok_or_else(|| format!("bad state {s:?}"))?;
        Ok(StateKey::new(level(q)?, level(b)?))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StateThresholds {
    pub queued_low: f64,
    pub queued_high: f64,
    pub idle_low: f64,
    pub idle_high: f64,
}

impl Default for StateThresholds {
    fn default() -> Self {
        StateThresholds {
            queued_low: 0.15,
            queued_high: 0.25,
            idle_low: 0.33,
            idle_high: 0.66,
        }
    }
}

pub fn discretize_state(obs: &ClusterObservation, thresholds: &StateThresholds) -> StateKey {
    StateKey::new(
        Level::of(obs.frac_vms_with_queue, thresholds.queued_low, thresholds.queued_high),
        Level::of(obs.frac_vms_idle_near_cycle, thresholds.idle_low, thresholds.idle_high),
    )
}

/// Actions worth exploring in `state`: only launch when many VMs have
/// queues, only release when many idle VMs are about to start a new cycle.
/// When both hold, nothing is ruled out.
pub fn allowed_actions(state: StateKey) -> ActionSet {
    match (state.queued, state.billing_idle) {
        (Level::High, Level::High) => ActionSet::ALL,
        (Level::High, _) => ActionSet::only(Action::Launch),
        (_, Level::High) => ActionSet::only(Action::Release),
        _ => ActionSet::ALL,
    }
}
