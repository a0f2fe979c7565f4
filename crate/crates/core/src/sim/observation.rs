use serde::{Deserialize, Serialize};

/// What a policy sees at a decision point.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ClusterObservation {
    pub time: f64,
    pub ready_vms: usize,
    pub pending_vms: usize,
    /// Share of ready VMs with requests waiting behind the one in service.
    pub frac_vms_with_queue: f64,
    /// Share of ready VMs with nothing waiting and close to the end of their
    /// paid billing cycle.
    pub frac_vms_idle_near_cycle: f64,
    /// Busy fraction of each ready VM over the last monitoring window.
    pub per_vm_utilization: Vec<f64>,
    /// Requests completed in the last monitoring window.
    pub window_successes: u64,
    pub window_failures: u64,
}

impl ClusterObservation {
    pub fn mean_utilization(&self) -> f64 {
        if self.per_vm_utilization.is_empty() {
            0.0
        } else {
            self.per_vm_utilization.iter().sum::<f64>() / self.per_vm_utilization.len() as f64
        }
    }
}
