use serde::{Deserialize, Serialize};

use super::{Action, Policy};
use crate::error::PolicyError;
use crate::sim::ClusterObservation;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VotingParams {
    /// A VM below this utilization votes to release.
    pub lower_cpu: f64,
    /// A VM above this utilization votes to launch.
    pub upper_cpu: f64,
}

impl Default for VotingParams {
    fn default() -> Self {
        VotingParams {
            lower_cpu: 0.25,
            upper_cpu: 0.95,
        }
    }
}

impl VotingParams {
    pub fn validate(&self) -> Result<(), PolicyError> {
        if (0.0..=1.0).contains(&self.lower_cpu)
            && (0.0..=1.0).contains(&self.upper_cpu)
            && self.lower_cpu <= self.upper_cpu
        {
            Ok(())
        } else {
            Err(PolicyError::InvalidParams(format!(
                "need 0 <= lower_cpu <= upper_cpu <= 1, got {} and {}",
                self.lower_cpu, self.upper_cpu
            )))
        }
    }
}

pub fn vm_vote(utilization: f64, params: &VotingParams) -> Action {
    if utilization > params.upper_cpu {
        Action::Launch
    } else if utilization < params.lower_cpu {
        Action::Release
    } else {
        Action::Maintain
    }
}

/// Relative majority of per-VM votes. Any tie for the most votes, or no
/// votes at all, keeps the cluster as it is.
pub fn vote_decision(utilizations: &[f64], params: &VotingParams) -> Action {
    let mut counts = [0usize; 3];
    for &u in utilizations {
        counts[vm_vote(u, params).index()] += 1;
    }
    let top = counts.iter().copied().max().unwrap_or(0);
    let leaders: Vec<Action> = Action::ALL.into_iter().filter(|a| counts[a.index()] == top).collect();
    match leaders[..] {
        [winner] if top > 0 => winner,
        _ => Action::Maintain,
    }
}

/// Threshold-based baseline: each ready VM votes on its recent CPU
/// utilization.
#[derive(Clone, Debug, Default)]
pub struct VotingPolicy {
    params: VotingParams,
}

impl VotingPolicy {
    pub fn new(params: VotingParams) -> VotingPolicy {
        VotingPolicy { params }
    }
}

impl Policy for VotingPolicy {
    fn name(&self) -> &'static str {
        "voting"
    }

    fn decide(&mut self, obs: &ClusterObservation) -> Result<Action, PolicyError> {
        Ok(vote_decision(&obs.per_vm_utilization, &self.params))
    }
}
