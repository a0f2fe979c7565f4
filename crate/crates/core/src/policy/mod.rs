//! Scaling policies: the CPU-threshold voting baseline and the debt-aware
//! Q-learning agent.

mod qlearning;
mod state;
mod voting;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::economics::DebtWindow;
use crate::error::PolicyError;
use crate::sim::ClusterObservation;

pub use qlearning::{
    alpha_for, q_update, select_action, AlphaSchedule, DebtAwarePolicy, LearningParams, QTable,
    EXPLORATION_STREAM,
};
pub use state::{allowed_actions, discretize_state, Level, StateKey, StateThresholds};
pub use voting::{vm_vote, vote_decision, VotingParams, VotingPolicy};

/// A horizontal scaling action. The declaration order is the greedy
/// tie-break order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Maintain,
    Launch,
    Release,
}

impl Action {
    pub const ALL: [Action; 3] = [Action::Maintain, Action::Launch, Action::Release];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Action::Maintain => "maintain",
            Action::Launch => "launch",
            Action::Release => "release",
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Action {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Action::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| format!("unknown action {s:?}"))
    }
}

/// A non-empty set of actions, iterated in tie-break order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ActionSet(u8);

impl ActionSet {
    pub const ALL: ActionSet = ActionSet(0b111);

    pub fn only(action: Action) -> ActionSet {
        ActionSet(1 << action.index())
    }

    pub fn of(actions: &[Action]) -> ActionSet {
        ActionSet(actions.iter().fold(0, |m, a| m | 1 << a.index()))
    }

    pub fn contains(self, action: Action) -> bool {
        self.0 & (1 << action.index()) != 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = Action> {
        Action::ALL.into_iter().filter(move |a| self.contains(*a))
    }
}

/// An autoscaling policy driven by the simulator at decision points.
pub trait Policy {
    fn name(&self) -> &'static str;

    fn decide(&mut self, obs: &ClusterObservation) -> Result<Action, PolicyError>;

    /// Delivers the debt of the previous decision together with the
    /// observation at the next decision point.
    fn observe_reward(&mut self, _debt: f64, _next: &ClusterObservation) -> Result<(), PolicyError> {
        Ok(())
    }

    /// Whether the policy learns from debt, which then must be recorded.
    fn needs_debt(&self) -> bool {
        false
    }

    fn debt_window(&self) -> DebtWindow {
        DebtWindow::Retrospective
    }

    /// Discrete state behind the last decision, if the policy has one.
    fn last_state(&self) -> Option<StateKey> {
        None
    }
}

impl<P: Policy + ?Sized> Policy for Box<P> {
    fn name(&self) -> &'static str {
        (**self).name()
    }
    fn decide(&mut self, obs: &ClusterObservation) -> Result<Action, PolicyError> {
        (**self).decide(obs)
    }
    fn observe_reward(&mut self, debt: f64, next: &ClusterObservation) -> Result<(), PolicyError> {
        (**self).observe_reward(debt, next)
    }
    fn needs_debt(&self) -> bool {
        (**self).needs_debt()
    }
    fn debt_window(&self) -> DebtWindow {
        (**self).debt_window()
    }
    fn last_state(&self) -> Option<StateKey> {
        (**self).last_state()
    }
}
