//! Deterministic discrete-event simulator for cloud elasticity, with a
//! debt-aware Q-learning autoscaler, a CPU-threshold voting baseline and
//! counterfactual valuation of every scaling decision.

pub mod economics;
pub mod error;
pub mod experiment;
pub mod policy;
pub mod sim;
pub mod time;
pub mod workload;

pub use economics::{
    classify_request, compute_debt, compute_utility, counterfactual_ideal, replay_window,
    AdaptationRecord, Counterfactual, DebtValuation, DebtWindow, Outcome, UtilityBreakdown,
};
pub use error::{ExperimentError, PolicyError, SimError, WorkloadError};
pub use policy::{
    allowed_actions, discretize_state, Action, ActionSet, DebtAwarePolicy, LearningParams, Level,
    Policy, QTable, StateKey, StateThresholds, VotingParams, VotingPolicy,
};
pub use sim::{run, Cluster, ClusterObservation, RunOptions, SimConfig, SimulationResult};
pub use time::SimTime;
pub use workload::{generate_trace, ArrivalMode, RateProfile, RateSegment, Request, WorkloadTrace};
