use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::state::{allowed_actions, discretize_state, StateKey, StateThresholds};
use super::{Action, ActionSet, Policy};
use crate::economics::DebtWindow;
use crate::error::PolicyError;
use crate::sim::ClusterObservation;

/// Stream index for exploration randomness.
pub const EXPLORATION_STREAM: u64 = 2;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaSchedule {
    /// `alpha_initial - alpha_decay_step * visits`.
    #[default]
    Linear,
    /// `alpha_initial * alpha_decay_step ^ visits`.
    Multiplicative,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearningParams {
    pub alpha_initial: f64,
    pub alpha_decay_step: f64,
    pub alpha_min: f64,
    pub gamma: f64,
    pub epsilon: f64,
    pub alpha_schedule: AlphaSchedule,
}

impl Default for LearningParams {
    fn default() -> Self {
        LearningParams {
            alpha_initial: 1.0,
            alpha_decay_step: 0.1,
            alpha_min: 0.1,
            gamma: 0.99,
            epsilon: 0.1,
            alpha_schedule: AlphaSchedule::Linear,
        }
    }
}

impl LearningParams {
    pub fn validate(&self) -> Result<(), PolicyError> {
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(PolicyError::InvalidParams(format!("{name} must lie in [0, 1], got {v}")))
            }
        };
        unit("epsilon", self.epsilon)?;
        unit("gamma", self.gamma)?;
        unit("alpha_decay_step", self.alpha_decay_step)?;
        if !(self.alpha_min > 0.0 && self.alpha_min <= self.alpha_initial && self.alpha_initial <= 1.0) {
            return Err(PolicyError::InvalidParams(format!(
                "need 0 < alpha_min <= alpha_initial <= 1, got {} and {}",
                self.alpha_min, self.alpha_initial
            )));
        }
        Ok(())
    }
}

/// Learning rate for a state-action pair that has been updated `visits`
/// times.
pub fn alpha_for(visits: u64, params: &LearningParams) -> f64 {
    let raw = match params.alpha_schedule {
        AlphaSchedule::Linear => params.alpha_initial - params.alpha_decay_step * visits as f64,
        AlphaSchedule::Multiplicative => {
            params.alpha_initial * params.alpha_decay_step.powi(visits.min(i32::MAX as u64) as i32)
        }
    };
    raw.max(params.alpha_min)
}

/// Tabular action values over the 9 states and 3 actions. Unvisited
/// entries read as zero.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct QTable {
    values: [[f64; 3]; 9],
    visits: [[u64; 3]; 9],
}

impl QTable {
    pub fn new() -> QTable {
        QTable::default()
    }

    pub fn get(&self, s: StateKey, a: Action) -> f64 {
        self.values[s.index()][a.index()]
    }

    pub fn set(&mut self, s: StateKey, a: Action, value: f64) {
        self.values[s.index()][a.index()] = value;
    }

    pub fn visits(&self, s: StateKey, a: Action) -> u64 {
        self.visits[s.index()][a.index()]
    }

    /// Largest value among `allowed` actions in `s`.
    pub fn max_value(&self, s: StateKey, allowed: ActionSet) -> f64 {
        allowed.iter().map(|a| self.get(s, a)).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Allowed action with the largest value; earlier actions win ties.
    pub fn greedy(&self, s: StateKey, allowed: ActionSet) -> Action {
        let mut best: Option<(Action, f64)> = None;
        for a in allowed.iter() {
            let v = self.get(s, a);
            if best.is_none_or(|(_, b)| v > b) {
                best = Some((a, v));
            }
        }
        best.expect("allowed action set is never empty").0
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("state,action,q,visits\n");
        for s in StateKey::all() {
            for a in Action::ALL {
                let _ = writeln!(out, "{s},{a},{},{}", self.get(s, a), self.visits(s, a));
            }
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<QTable, PolicyError> {
        let mut table = QTable::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if idx == 0 || line.is_empty() {
                continue;
            }
            let bad = |reason: String| PolicyError::QTableFormat { line: idx + 1, reason };
            let fields: Vec<&str> = line.split(',').collect();
            let [state, action, q, visits] = fields[..] else {
                return Err(bad(format!("expected 4 fields, found {}", fields.len())));
            };
            let s: StateKey = state.parse().map_err(bad)?;
            let a: Action = action.parse().map_err(bad)?;
            let q: f64 = q.parse().map_err(|_| bad(format!("bad value {q:?}")))?;
            let n: u64 = visits.parse().map_err(|_| bad(format!("bad visit count {visits:?}")))?;
            table.values[s.index()][a.index()] = q;
            table.visits[s.index()][a.index()] = n;
        }
        Ok(table)
    }
}

/// Epsilon-greedy choice among `allowed`: a uniform pick with probability
/// `epsilon`, the greedy action otherwise.
pub fn select_action<R: Rng + ?Sized>(
    q: &QTable,
    state: StateKey,
    allowed: ActionSet,
    epsilon: f64,
    rng: &mut R,
) -> Action {
    if rng.random::<f64>() < epsilon {
        let pick = rng.random_range(0..allowed.len());
        allowed.iter().nth(pick).expect("index within set")
    } else {
        q.greedy(state, allowed)
    }
}

/// One Q-learning step on `(s, a)` toward `r + gamma * max Q(s_next, .)`,
/// the max taken over `allowed_next`.
#[allow(clippy::too_many_arguments)]
pub fn q_update(
    q: &mut QTable,
    s: StateKey,
    a: Action,
    r: f64,
    s_next: StateKey,
    allowed_next: ActionSet,
    alpha: f64,
    gamma: f64,
) {
    let target = r + gamma * q.max_value(s_next, allowed_next);
    let old = q.get(s, a);
    q.set(s, a, (1.0 - alpha) * old + alpha * target);
    q.visits[s.index()][a.index()] += 1;
}

/// Q-learning autoscaler whose reward is the elasticity debt of each
/// decision.
#[derive(Clone, Debug)]
pub struct DebtAwarePolicy {
    q: QTable,
    params: LearningParams,
    thresholds: StateThresholds,
    rng: ChaCha8Rng,
    pending: Option<(StateKey, Action)>,
}

impl DebtAwarePolicy {
    pub fn new(params: LearningParams, thresholds: StateThresholds, seed: u64) -> DebtAwarePolicy {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(EXPLORATION_STREAM);
        DebtAwarePolicy {
            q: QTable::new(),
            params,
            thresholds,
            rng,
            pending: None,
        }
    }

    pub fn with_qtable(mut self, q: QTable) -> DebtAwarePolicy {
        self.q = q;
        self
    }

    pub fn qtable(&self) -> &QTable {
        &self.q
    }

    pub fn pending(&self) -> Option<(StateKey, Action)> {
        self.pending
    }
}

impl Policy for DebtAwarePolicy {
    fn name(&self) -> &'static str {
        "debt-aware"
    }

    fn decide(&mut self, obs: &ClusterObservation) -> Result<Action, PolicyError> {
        let state = discretize_state(obs, &self.thresholds);
        let action = select_action(&self.q, state, allowed_actions(state), self.params.epsilon, &mut self.rng);
        self.pending = Some((state, action));
        Ok(action)
    }

    fn observe_reward(&mut self, debt: f64, next: &ClusterObservation) -> Result<(), PolicyError> {
        let (s, a) = self.pending.take().ok_or(PolicyError::NoPendingDecision)?;
        let s_next = discretize_state(next, &self.thresholds);
        let alpha = alpha_for(self.q.visits(s, a), &self.params);
        q_update(&mut self.q, s, a, debt, s_next, allowed_actions(s_next), alpha, self.params.gamma);
        Ok(())
    }

    fn needs_debt(&self) -> bool {
        true
    }

    fn debt_window(&self) -> DebtWindow {
        DebtWindow::Proactive
    }

    fn last_state(&self) -> Option<StateKey> {
        self.pending.map(|(s, _)| s)
    }
}
