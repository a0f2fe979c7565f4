use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::SimError;
use crate::policy::Action;
use crate::sim::config::{BillingAnchor, Clock, SimConfig};
use crate::sim::observation::ClusterObservation;
use crate::sim::vm::{Job, Running, VmId, VmInstance};
use crate::time::SimTime;
use crate::workload::Request;

/// Event kinds in processing order for equal timestamps. Decision points
/// come after all of these; the engine runs them once the cluster has
/// advanced through their instant.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    RequestDone,
    VmReady,
    Arrival,
}

/// Ordered by time, then kind, then id (VM id or request index).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SimEvent {
    pub time: SimTime,
    pub kind: EventKind,
    pub id: u64,
}

/// A finished request, as reported to completion callbacks.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Completion {
    pub request: usize,
    pub vm: VmId,
    pub arrival: SimTime,
    pub start: SimTime,
    pub finish: SimTime,
}

impl Completion {
    pub fn response_time(&self) -> SimTime {
        self.finish - self.arrival
    }
}

/// Complete mutable state of a simulated cluster.
///
/// Cloning yields an independent checkpoint; the trace is shared read-only.
#[derive(Clone, Debug)]
pub struct Cluster {
    config: Arc<SimConfig>,
    clock: Clock,
    trace: Arc<[Request]>,
    now: SimTime,
    vms: Vec<VmInstance>,
    /// Ids of unreleased VMs, ascending.
    active: Vec<VmId>,
    events: BinaryHeap<Reverse<SimEvent>>,
    next_arrival: usize,
    arrival_cutoff: SimTime,
    backlog: VecDeque<Job>,
    last_event: SimTime,
}

impl Cluster {
    /// A cluster at time zero with `initial_vms` VMs already running.
    pub fn new(config: Arc<SimConfig>, trace: Arc<[Request]>) -> Result<Cluster, SimError> {
        config.validate()?;
        let clock = config.clock();
        let mut cluster = Cluster {
            clock,
            trace,
            now: SimTime::ZERO,
            vms: Vec::new(),
            active: Vec::new(),
            events: BinaryHeap::new(),
            next_arrival: 0,
            arrival_cutoff: SimTime::MAX,
            backlog: VecDeque::new(),
            last_event: SimTime::ZERO,
            config,
        };
        for _ in 0..cluster.config.initial_vms {
            let id = cluster.vms.len() as VmId;
            cluster.vms.push(VmInstance::new(
                id,
                cluster.config.vm_capacity,
                SimTime::ZERO,
                SimTime::ZERO,
                SimTime::ZERO,
                clock.billing_cycle,
            ));
            cluster.active.push(id);
        }
        Ok(cluster)
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn vms(&self) -> &[VmInstance] {
        &self.vms
    }

    pub fn trace(&self) -> &[Request] {
        &self.trace
    }

    pub(crate) fn clock(&self) -> &Clock {
        &self.clock
    }

    /// Arrivals after `cutoff` are never delivered.
    pub fn set_arrival_cutoff(&mut self, cutoff: SimTime) {
        self.arrival_cutoff = cutoff;
    }

    pub fn active_vms(&self) -> impl Iterator<Item = &VmInstance> {
        self.active.iter().map(|&id| &self.vms[id as usize])
    }

    pub fn active_count(&self) -> usize {
        self.active.len()
    }

    /// Requests dispatched or held in the backlog but not yet finished.
    pub fn in_flight(&self) -> usize {
        self.backlog.len() + self.vms.iter().map(VmInstance::outstanding).sum::<usize>()
    }

    pub fn arrivals_delivered(&self) -> usize {
        self.next_arrival
    }

    pub fn backlog_len(&self) -> usize {
        self.backlog.len()
    }

    fn pending_arrival(&self) -> Option<SimEvent> {
        let req = self.trace.get(self.next_arrival)?;
        let time = SimTime::from_secs(req.arrival_time);
        (time <= self.arrival_cutoff).then_some(SimEvent {
            time,
            kind: EventKind::Arrival,
            id: self.next_arrival as u64,
        })
    }

    pub fn peek_event(&self) -> Option<SimEvent> {
        let queued = self.events.peek().map(|Reverse(e)| *e);
        match (queued, self.pending_arrival()) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        }
    }

    /// Processes every event at or before `until`, then moves the clock to
    /// `until`.
    pub fn advance_through<F: FnMut(&Completion)>(&mut self, until: SimTime, on_done: &mut F) {
        while let Some(event) = self.peek_event() {
            if event.time > until {
                break;
            }
            self.process(event, on_done);
        }
        self.now = self.now.max(until);
    }

    /// Processes events until nothing is left to do.
    pub fn drain<F: FnMut(&Completion)>(&mut self, on_done: &mut F) {
        while let Some(event) = self.peek_event() {
            self.process(event, on_done);
        }
    }

    fn process<F: FnMut(&Completion)>(&mut self, event: SimEvent, on_done: &mut F) {
        debug_assert!(event.time >= self.last_event, "event time went backwards");
        self.last_event = event.time;
        self.now = event.time;
        if event.kind != EventKind::Arrival {
            self.events.pop();
        }
        match event.kind {
            EventKind::Arrival => {
                self.next_arrival += 1;
                let req = &self.trace[event.id as usize];
                let job = Job {
                    index: event.id as usize,
                    arrival: event.time,
                    service: SimTime::from_secs(req.work / self.config.vm_capacity),
                };
                self.dispatch(job);
            }
            EventKind::VmReady => {
                self.try_start(event.id as VmId);
                self.flush_backlog();
            }
            EventKind::RequestDone => {
                let vm = &mut self.vms[event.id as usize];
                let done = vm.running.take().expect("completion without a running job");
                on_done(&Completion {
                    request: done.job.index,
                    vm: vm.id,
                    arrival: done.job.arrival,
                    start: done.start,
                    finish: done.finish,
                });
                self.try_start(event.id as VmId);
                self.flush_backlog();
            }
        }
    }

    /// Sends `job` to the active VM with the fewest outstanding requests,
    /// lowest id on ties. Pending VMs are eligible and hold the job until
    /// ready. With no active VM the job waits in the backlog.
    fn dispatch(&mut self, job: Job) -> Option<VmId> {
        let Some(target) = self
            .active_vms()
            .min_by_key(|v| (v.outstanding(), v.id))
            .map(|v| v.id)
        else {
            self.backlog.push_back(job);
            return None;
        };
        self.vms[target as usize].queue.push_back(job);
        self.try_start(target);
        Some(target)
    }

    fn flush_backlog(&mut self) {
        while !self.backlog.is_empty() && !self.active.is_empty() {
            let job = self.backlog.pop_front().expect("non-empty backlog");
            self.dispatch(job);
        }
    }

    fn try_start(&mut self, id: VmId) {
        let now = self.now;
        let vm = &mut self.vms[id as usize];
        if vm.running.is_some() || !vm.is_ready(now) {
            return;
        }
        let Some(job) = vm.queue.pop_front() else {
            return;
        };
        let finish = now + job.service;
        vm.running = Some(Running { job, start: now, finish });
        vm.record_busy(now, finish);
        self.events.push(Reverse(SimEvent {
            time: finish,
            kind: EventKind::RequestDone,
            id: u64::from(id),
        }));
    }

    /// Requests a new VM that becomes ready after the spin-up time.
    pub fn launch_vm(&mut self) -> VmId {
        let id = self.vms.len() as VmId;
        let now = self.now;
        let ready = now + self.clock.spin_up;
        let anchor = match self.config.billing_anchor {
            BillingAnchor::AtRequest => now,
            BillingAnchor::AtReady => ready,
        };
        self.vms.push(VmInstance::new(
            id,
            self.config.vm_capacity,
            now,
            ready,
            anchor,
            self.clock.billing_cycle,
        ));
        self.events.push(Reverse(SimEvent {
            time: ready,
            kind: EventKind::VmReady,
            id: u64::from(id),
        }));
        self.active.push(id);
        id
    }

    /// Stops `id` from taking new requests. Work already assigned to it
    /// still runs to completion.
    pub fn release_vm(&mut self, id: VmId) -> Result<(), SimError> {
        let now = self.now;
        let vm = self.vms.get_mut(id as usize).ok_or(SimError::UnknownVm(id))?;
        if vm.is_released() {
            return Err(SimError::AlreadyReleased(id));
        }
        vm.released_at = Some(now);
        self.active.retain(|&a| a != id);
        Ok(())
    }

    /// The VM a release would pick: idle VMs first, closest to the end of
    /// their paid cycle; otherwise the shortest queue. Lowest id breaks ties.
    pub fn release_candidate(&self) -> Option<VmId> {
        self.active_vms()
            .min_by_key(|v| (v.outstanding(), v.remaining_in_cycle(self.now), v.id))
            .map(|v| v.id)
    }

    /// Applies one scaling action and returns what actually happened. A
    /// release that would leave no VM becomes a maintain.
    pub fn apply(&mut self, action: Action) -> Action {
        match action {
            Action::Maintain => Action::Maintain,
            Action::Launch => {
                self.launch_vm();
                Action::Launch
            }
            Action::Release => {
                if self.active_count() <= 1 {
                    return Action::Maintain;
                }
                let victim = self.release_candidate().expect("at least two active vms");
                self.release_vm(victim).expect("candidate is active");
                Action::Release
            }
        }
    }

    /// Billing cycles started in `(from, to]` across all VMs.
    pub fn cycles_between(&self, from: SimTime, to: SimTime) -> u64 {
        self.vms
            .iter()
            .map(|v| v.cycles_charged_by(to) - v.cycles_charged_by(from))
            .sum()
    }

    pub(crate) fn prune_busy(&mut self, before: SimTime) {
        for vm in &mut self.vms {
            vm.prune_busy(before);
        }
    }

    /// Monitoring snapshot at the current instant; utilization covers
    /// `[window_start, now]`.
    pub fn observe(&self, window_start: SimTime, successes: u64, failures: u64) -> ClusterObservation {
        let now = self.now;
        let ready: Vec<&VmInstance> = self.active_vms().filter(|v| v.is_ready(now)).collect();
        let pending = self.active_count() - ready.len();
        let fraction = |n: usize| {
            if ready.is_empty() {
                0.0
            } else {
                n as f64 / ready.len() as f64
            }
        };
        let with_queue = ready.iter().filter(|v| v.queued() > 0).count();
        let idle_near_cycle = ready
            .iter()
            .filter(|v| v.queued() == 0 && v.remaining_in_cycle(now) <= self.clock.near_cycle)
            .count();
        ClusterObservation {
            time: now.as_secs(),
            ready_vms: ready.len(),
            pending_vms: pending,
            frac_vms_with_queue: fraction(with_queue),
            frac_vms_idle_near_cycle: fraction(idle_near_cycle),
            per_vm_utilization: ready.iter().map(|v| v.utilization(window_start, now)).collect(),
            window_successes: successes,
            window_failures: failures,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::workload::WorkloadTrace;

    fn cluster(initial: u32, arrivals: &[(f64, f64)]) -> Cluster {
        let config = SimConfig {
            initial_vms: initial,
            ..SimConfig::default()
        };
        let trace = WorkloadTrace::from_arrivals(arrivals.to_vec(), 0.0);
        Cluster::new(Arc::new(config), trace.requests.into()).unwrap()
    }

    fn run_all(c: &mut Cluster) -> Vec<Completion> {
        let mut done = Vec::new();
        c.drain(&mut |d: &Completion| done.push(*d));
        done
    }

    #[test]
    fn fifo_on_one_vm() {
        let mut c = cluster(1, &[(0.0, 2.0); 10]);
        let done = run_all(&mut c);
        let finishes: Vec<SimTime> = done.iter().map(|d| d.finish).collect();
        let expected: Vec<SimTime> = (1..=10).map(|k| SimTime(k * 200_000_000)).collect();
        assert_eq!(finishes, expected);
        let limit = SimTime::from_secs(2.0);
        let failures = done.iter().filter(|d| d.response_time() >= limit).count();
        assert_eq!(failures, 1);
        assert_eq!(done.last().unwrap().response_time(), limit);
    }

    #[test]
    fn dispatch_prefers_shorter_queue_then_lower_id() {
        let mut c = cluster(2, &[]);
        let job = |i| Job {
            index: i,
            arrival: SimTime::ZERO,
            service: SimTime::from_secs(1.0),
        };
        assert_eq!(c.dispatch(job(0)), Some(0));
        assert_eq!(c.dispatch(job(1)), Some(1));
        assert_eq!(c.dispatch(job(2)), Some(0));
        assert_eq!(c.dispatch(job(3)), Some(1));
        c.vms[1].queue.extend([job(4), job(5)]);
        assert_eq!(c.dispatch(job(6)), Some(0));
    }

    #[test]
    fn pending_vm_holds_work_until_ready() {
        let c = cluster(1, &[(10.0, 2.0)]);
        let mut c2 = c.clone();
        // Leave a pending VM as the only active one.
        c2.launch_vm();
        c2.release_vm(0).unwrap();
        let done = run_all(&mut c2);
        assert_eq!(done.len(), 1);
        assert_eq!(done[0].vm, 1);
        assert_eq!(done[0].start, SimTime::from_secs(105.0));
        // The original is untouched by the clone's run.
        assert_eq!(c.arrivals_delivered(), 0);
    }

    #[test]
    fn launch_sets_ready_and_anchor() {
        let mut c = cluster(1, &[]);
        let a = c.launch_vm();
        let b = c.launch_vm();
        assert_ne!(a, b);
        assert_eq!(c.vms[a as usize].ready_at, SimTime::from_secs(105.0));
        assert_eq!(c.vms[a as usize].ready_at, c.vms[b as usize].ready_at);

        let config = SimConfig {
            billing_anchor: BillingAnchor::AtReady,
            ..SimConfig::default()
        };
        let mut c = Cluster::new(Arc::new(config), Vec::new().into()).unwrap();
        let id = c.launch_vm() as usize;
        let vm = &c.vms[id];
        assert_eq!(vm.remaining_in_cycle(SimTime::ZERO) + SimTime::ZERO, SimTime::from_secs(405.0));
        assert_eq!(vm.cycles_charged_by(SimTime::from_secs(405.0)), 1);
    }

    #[test]
    fn release_drains_queue_and_rejects_repeats() {
        let mut c = cluster(2, &[(0.0, 2.0), (0.0, 2.0), (0.0, 2.0), (0.0, 2.0)]);
        c.advance_through(SimTime::ZERO, &mut |_| {});
        assert_eq!(c.vms[1].outstanding(), 2);
        c.release_vm(1).unwrap();
        assert!(matches!(c.release_vm(1), Err(SimError::AlreadyReleased(1))));
        assert!(matches!(c.release_vm(9), Err(SimError::UnknownVm(9))));
        let done = run_all(&mut c);
        assert_eq!(done.iter().filter(|d| d.vm == 1).count(), 2);
    }

    #[test]
    fn last_vm_is_never_released() {
        let mut c = cluster(1, &[]);
        assert_eq!(c.apply(Action::Release), Action::Maintain);
        assert_eq!(c.active_count(), 1);
    }

    #[test]
    fn release_prefers_idle_vm_near_cycle_end() {
        let mut c = cluster(2, &[]);
        c.advance_through(SimTime::from_secs(100.0), &mut |_| {});
        c.launch_vm();
        c.advance_through(SimTime::from_secs(280.0), &mut |_| {});
        // VMs 0 and 1 have 20 s left in their cycle, VM 2 has 120 s.
        assert_eq!(c.release_candidate(), Some(0));
        c.vms[0].queue.push_back(Job {
            index: 0,
            arrival: SimTime::ZERO,
            service: SimTime::from_secs(1.0),
        });
        assert_eq!(c.release_candidate(), Some(1));
    }

    #[test]
    fn cycles_between_telescopes() {
        let mut c = cluster(1, &[]);
        c.advance_through(SimTime::from_secs(60.0), &mut |_| {});
        c.launch_vm();
        c.advance_through(SimTime::from_secs(410.0), &mut |_| {});
        c.release_vm(1).unwrap();
        let ticks: Vec<SimTime> = (0..=12).map(|k| SimTime::from_secs(60.0 * k as f64)).collect();
        let split: u64 = ticks.windows(2).map(|w| c.cycles_between(w[0], w[1])).sum();
        assert_eq!(split, c.cycles_between(SimTime::ZERO, SimTime::from_secs(720.0)));
        // VM 0: 3 cycles by 720 s. VM 1: launched at 60, released at 410: 2.
        assert_eq!(split, 5);
    }
}
