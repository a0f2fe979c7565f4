//! Discrete-event simulation of a horizontally scaled VM cluster.

mod cluster;
mod config;
mod engine;
mod observation;
mod vm;

pub use cluster::{Cluster, Completion, EventKind, SimEvent};
pub use config::{BillingAnchor, SimConfig, SlaMode};
pub use engine::{run, RunOptions, RunTotals, SimulationResult, WindowRow};
pub use observation::ClusterObservation;
pub use vm::{billing_cycles_charged, service_time, utilization, VmId, VmInstance, VmRecord};
