use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::time::SimTime;
use crate::workload::Request;

pub type VmId = u32;

/// A request assigned to a VM.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct Job {
    pub index: usize,
    pub arrival: SimTime,
    pub service: SimTime,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct Running {
    pub job: Job,
    pub start: SimTime,
    pub finish: SimTime,
}

#[derive(Clone, Debug)]
pub struct VmInstance {
    pub id: VmId,
    /// MIPS.
    pub capacity: f64,
    pub requested_at: SimTime,
    pub ready_at: SimTime,
    pub released_at: Option<SimTime>,
    pub billing_anchor: SimTime,
    pub billing_cycle: SimTime,
    pub(crate) queue: VecDeque<Job>,
    pub(crate) running: Option<Running>,
    /// Merged busy intervals, pruned as monitoring windows advance.
    pub(crate) busy: Vec<(SimTime, SimTime)>,
}

impl VmInstance {
    pub(crate) fn new(
        id: VmId,
        capacity: f64,
        requested_at: SimTime,
        ready_at: SimTime,
        billing_anchor: SimTime,
        billing_cycle: SimTime,
    ) -> VmInstance {
        VmInstance {
            id,
            capacity,
            requested_at,
            ready_at,
            released_at: None,
            billing_anchor,
            billing_cycle,
            queue: VecDeque::new(),
            running: None,
            busy: Vec::new(),
        }
    }

    pub fn is_released(&self) -> bool {
        self.released_at.is_some()
    }

    pub fn is_ready(&self, now: SimTime) -> bool {
        self.ready_at <= now
    }

    /// Requests waiting behind the one in service.
    pub fn queued(&self) -> usize {
        self.queue.len()
    }

    /// Queued plus in-flight requests.
    pub fn outstanding(&self) -> usize {
        self.queue.len() + usize::from(self.running.is_some())
    }

    /// When the VM finishes everything assigned so far.
    pub fn busy_until(&self, now: SimTime) -> SimTime {
        let mut t = self.running.map_or(now.max(self.ready_at), |r| r.finish);
        for job in &self.queue {
            t = t + job.service;
        }
        t
    }

    pub(crate) fn record_busy(&mut self, start: SimTime, finish: SimTime) {
        match self.busy.last_mut() {
            Some(last) if last.1 == start => last.1 = finish,
            _ => self.busy.push((start, finish)),
        }
    }

    pub(crate) fn prune_busy(&mut self, before: SimTime) {
        self.busy.retain(|&(_, end)| end > before);
    }

    /// Time left in the cycle already paid for at `now`.
    pub fn remaining_in_cycle(&self, now: SimTime) -> SimTime {
        let cycle = self.billing_cycle.0;
        if now <= self.billing_anchor {
            return SimTime(self.billing_anchor.0 + cycle - now.0);
        }
        let cycles = (now.0 - self.billing_anchor.0).div_ceil(cycle);
        SimTime(self.billing_anchor.0 + cycles * cycle - now.0)
    }

    /// Cycles started strictly before `t`: a cycle is charged as soon as
    /// any time inside it elapses. Charging stops at release.
    pub fn cycles_charged_by(&self, t: SimTime) -> u64 {
        let end = match self.released_at {
            Some(r) => r.min(t),
            None => t,
        };
        end.saturating_sub(self.billing_anchor).0.div_ceil(self.billing_cycle.0)
    }

    /// Fraction of the window the VM spent executing requests, relative to
    /// the part of the window in which it was ready. Zero if never ready.
    pub fn utilization(&self, window_start: SimTime, window_end: SimTime) -> f64 {
        let ready_from = window_start.max(self.ready_at);
        if window_end <= ready_from {
            return 0.0;
        }
        let busy: u64 = self
            .busy
            .iter()
            .map(|&(s, e)| {
                let (s, e) = (s.max(ready_from), e.min(window_end));
                e.0.saturating_sub(s.0)
            })
            .sum();
        (busy as f64 / (window_end.0 - ready_from.0) as f64).min(1.0)
    }
}

/// Seconds needed to execute `request` on `vm`.
pub fn service_time(request: &Request, vm: &VmInstance) -> f64 {
    request.work / vm.capacity
}

/// Whole billing cycles charged for `vm` up to `horizon` seconds. A
/// released VM pays through the end of the cycle it was released in.
pub fn billing_cycles_charged(vm: &VmInstance, horizon: f64) -> u64 {
    vm.cycles_charged_by(SimTime::from_secs(horizon))
}

/// Busy fraction of `vm` over `[window_start, window_end]` seconds.
pub fn utilization(vm: &VmInstance, window_start: f64, window_end: f64) -> f64 {
    vm.utilization(SimTime::from_secs(window_start), SimTime::from_secs(window_end))
}

/// Summary of a VM's life, kept in simulation results.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VmRecord {
    pub id: VmId,
    pub requested_at: f64,
    pub ready_at: f64,
    pub released_at: Option<f64>,
    pub cycles_charged: u64,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vm(anchor: f64) -> VmInstance {
        let a = SimTime::from_secs(anchor);
        VmInstance::new(0, 10.0, a, a, a, SimTime::from_secs(300.0))
    }

    #[test]
    fn service_time_examples() {
        let v = vm(0.0);
        assert_eq!(service_time(&Request::new(0, 0.0, 2.0), &v), 0.2);
        assert_eq!(service_time(&Request::new(0, 0.0, 10.0), &v), 1.0);
        assert_eq!(service_time(&Request::new(0, 0.0, 5.0), &v), 0.5);
    }

    #[test]
    fn billing_examples() {
        let mut v = vm(0.0);
        v.released_at = Some(SimTime::from_secs(420.0));
        assert_eq!(billing_cycles_charged(&v, 21600.0), 2);
        v.released_at = Some(SimTime::from_secs(300.0));
        assert_eq!(billing_cycles_charged(&v, 21600.0), 1);
        v.released_at = Some(SimTime::from_secs(310.0));
        assert_eq!(billing_cycles_charged(&v, 21600.0), 2);
        v.released_at = None;
        assert_eq!(billing_cycles_charged(&v, 21600.0), 72);
    }

    #[test]
    fn anchor_at_ready_shifts_boundaries() {
        let mut v = vm(105.0);
        v.requested_at = SimTime::ZERO;
        assert_eq!(v.remaining_in_cycle(SimTime::from_secs(105.0)), SimTime::from_secs(300.0));
        assert_eq!(billing_cycles_charged(&v, 405.0), 1);
        assert_eq!(billing_cycles_charged(&v, 405.5), 2);
        assert_eq!(billing_cycles_charged(&v, 50.0), 0);
    }

    #[test]
    fn remaining_in_cycle_wraps_at_boundary() {
        let v = vm(0.0);
        assert_eq!(v.remaining_in_cycle(SimTime::from_secs(240.0)), SimTime::from_secs(60.0));
        assert_eq!(v.remaining_in_cycle(SimTime::from_secs(300.0)), SimTime::ZERO);
        assert_eq!(v.remaining_in_cycle(SimTime::from_secs(301.0)), SimTime::from_secs(299.0));
    }

    #[test]
    fn utilization_examples() {
        let mut v = vm(0.0);
        let (s, e) = (SimTime::from_secs(10.0), SimTime::from_secs(11.0));
        assert_eq!(v.utilization(s, e), 0.0);
        v.record_busy(SimTime::from_secs(10.2), SimTime::from_secs(10.4));
        assert!((v.utilization(s, e) - 0.2).abs() < 1e-12);
        v.record_busy(SimTime::from_secs(9.0), SimTime::from_secs(12.0));
        assert_eq!(v.utilization(s, e), 1.0);
    }

    #[test]
    fn utilization_counts_only_ready_time() {
        let mut v = vm(0.0);
        v.ready_at = SimTime::from_secs(50.0);
        v.record_busy(SimTime::from_secs(50.0), SimTime::from_secs(60.0));
        assert_eq!(v.utilization(SimTime::ZERO, SimTime::from_secs(60.0)), 1.0);
        assert_eq!(v.utilization(SimTime::ZERO, SimTime::from_secs(40.0)), 0.0);
    }
}
