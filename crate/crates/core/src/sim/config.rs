use serde::{Deserialize, Serialize};

use crate::error::SimError;
use crate::time::SimTime;

/// When a VM's billing clock starts.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BillingAnchor {
    /// Charged from the launch request, spin-up included.
    #[default]
    AtRequest,
    AtReady,
}

/// How failed requests turn into penalties.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlaMode {
    /// Every failed request is penalized.
    #[default]
    PerRequest,
    /// Failures in a window are penalized only when the window's success
    /// ratio falls below `sla_target`.
    Floor,
}

/// Cluster, pricing and SLA parameters. Durations are in seconds, money in
/// dollars.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub spin_up: f64,
    pub cool_down: f64,
    pub billing_cycle: f64,
    pub decision_interval: f64,
    /// MIPS.
    pub vm_capacity: f64,
    /// MI per request for generated workloads.
    pub work_per_request: f64,
    pub sla_response_limit: f64,
    pub price_per_request: f64,
    pub penalty_per_request: f64,
    pub vm_cost_per_cycle: f64,
    pub initial_vms: u32,
    pub billing_anchor: BillingAnchor,
    /// A VM counts as close to its next billing cycle within this many
    /// seconds of the end of its current cycle.
    pub near_cycle_window: f64,
    pub sla_mode: SlaMode,
    pub sla_target: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            spin_up: 105.0,
            cool_down: 120.0,
            billing_cycle: 300.0,
            decision_interval: 60.0,
            vm_capacity: 10.0,
            work_per_request: 2.0,
            sla_response_limit: 2.0,
            price_per_request: 0.0012344,
            penalty_per_request: 0.002,
            vm_cost_per_cycle: 0.01111,
            initial_vms: 2,
            billing_anchor: BillingAnchor::AtRequest,
            near_cycle_window: 60.0,
            sla_mode: SlaMode::PerRequest,
            sla_target: 0.95,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let positive = [
            ("spin_up", self.spin_up),
            ("cool_down", self.cool_down),
            ("billing_cycle", self.billing_cycle),
            ("decision_interval", self.decision_interval),
            ("vm_capacity", self.vm_capacity),
            ("work_per_request", self.work_per_request),
            ("sla_response_limit", self.sla_response_limit),
            ("price_per_request", self.price_per_request),
            ("penalty_per_request", self.penalty_per_request),
            ("vm_cost_per_cycle", self.vm_cost_per_cycle),
            ("near_cycle_window", self.near_cycle_window),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(SimError::InvalidConfig(format!("{name} must be positive, got {value}")));
            }
        }
        if self.initial_vms < 1 {
            return Err(SimError::InvalidConfig("initial_vms must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.sla_target) {
            return Err(SimError::InvalidConfig(format!(
                "sla_target must lie in [0, 1], got {}",
                self.sla_target
            )));
        }
        Ok(())
    }

    pub(crate) fn clock(&self) -> Clock {
        Clock {
            spin_up: SimTime::from_secs(self.spin_up),
            cool_down: SimTime::from_secs(self.cool_down),
            billing_cycle: SimTime::from_secs(self.billing_cycle),
            decision_interval: SimTime::from_secs(self.decision_interval),
            sla_limit: SimTime::from_secs(self.sla_response_limit),
            near_cycle: SimTime::from_secs(self.near_cycle_window),
        }
    }
}

/// The config's durations on the simulation clock.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Clock {
    pub spin_up: SimTime,
    pub cool_down: SimTime,
    pub billing_cycle: SimTime,
    pub decision_interval: SimTime,
    pub sla_limit: SimTime,
    pub near_cycle: SimTime,
}
