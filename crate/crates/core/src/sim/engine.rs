//! Single-threaded discrete-event engine for both scheduling techniques.

use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap, VecDeque};

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use super::config::{SimConfig, Technique};
use super::workload::{generate_resources, generate_workloads, stream_rng, Workload};
use super::SimError;
use crate::autonomic::{
    analyze_plan, execute, ActionLogEntry, KnowledgeBase, ManagedPool, MonitorSample, ResourceUsage,
};
use crate::cuckoo::{allocate, Resource, ResourceState};
use crate::metrics::{ResourceRecord, SimTrace, WorkloadRecord};
use crate::qos::{assess, assign_priorities, classify_request, QosClass, QosQueues, ReserveStock, Verdict};

/// Event kinds in tie-break order: at equal times a lower kind runs first.
/// `Start` and `Drop` only appear in the log.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Repair,
    RestartDone,
    Finish,
    Breakdown,
    Arrival,
    MonitorTick,
    Start,
    Drop,
}

#[derive(Debug, Clone, Copy)]
struct Event {
    time: f64,
    kind: EventKind,
    id: u64,
    seq: u64,
    token: u64,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    // Reversed so the max-heap pops the earliest event.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then(other.kind.cmp(&self.kind))
            .then(other.id.cmp(&self.id))
            .then(other.seq.cmp(&self.seq))
    }
}

/// One processed event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub time: f64,
    pub kind: EventKind,
    pub resource: Option<usize>,
    pub workload: Option<u64>,
}

/// Counters of the QoS machinery. The baseline leaves all of them at zero.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instrumentation {
    pub classify_calls: u64,
    pub deadline_reads: u64,
    pub assess_calls: u64,
    pub allocate_calls: u64,
    pub monitor_ticks: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimOutput {
    pub technique: Technique,
    pub workload_count: usize,
    pub trace: SimTrace,
    pub events: Vec<TraceEvent>,
    pub actions: Vec<ActionLogEntry>,
    pub instrumentation: Instrumentation,
}

#[derive(Debug, Clone)]
struct Run {
    job: usize,
    /// Million instructions still to execute.
    remaining: f64,
    /// Start of the current execution segment; `None` while paused.
    segment: Option<f64>,
    started: f64,
}

#[derive(Debug, Clone)]
struct Node {
    res: Resource,
    provisioned: bool,
    provisioned_at: f64,
    retired_at: Option<f64>,
    queue: VecDeque<usize>,
    running: Option<Run>,
    down: bool,
    down_since: f64,
    downtime: f64,
    breakdowns: u64,
    actual_usage: f64,
    expected_usage: f64,
    token: u64,
    rng: ChaCha8Rng,
    win_actual: f64,
    win_predicted: f64,
    win_missed: u64,
}

impl Node {
    fn can_run(&self) -> bool {
        self.provisioned && self.res.state == ResourceState::Active && !self.down
    }

    fn eligible(&self) -> bool {
        self.provisioned && self.res.state == ResourceState::Active
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Status {
    Waiting,
    Pending,
    Queued,
    Running,
    Done,
    Dropped,
}

#[derive(Debug, Clone)]
struct Job {
    w: Workload,
    status: Status,
    first_start: Option<f64>,
    finish: Option<f64>,
    dropped_at: Option<f64>,
    cost: f64,
}

struct Engine<'a> {
    cfg: &'a SimConfig,
    now: f64,
    seq: u64,
    heap: BinaryHeap<Event>,
    nodes: Vec<Node>,
    jobs: Vec<Job>,
    pending: Vec<usize>,
    reserve: VecDeque<usize>,
    kb: KnowledgeBase,
    events: Vec<TraceEvent>,
    instr: Instrumentation,
    outstanding: usize,
    win_ok: u64,
    win_missed: u64,
    need_extra: usize,
    ticks: u64,
    rr: usize,
    breakdown: Option<Exp<f64>>,
}

/// Runs one scenario to completion.
pub fn simulate(cfg: &SimConfig) -> Result<SimOutput, SimError> {
    cfg.validate()?;
    let workloads = generate_workloads(cfg);
    let specs = generate_resources(cfg);
    let autonomic = cfg.technique == Technique::Autonomic;
    let first_reserve = if autonomic {
        cfg.resource_count - cfg.reserve_count()
    } else {
        cfg.resource_count
    };
    let nodes = specs
        .into_iter()
        .map(|s| {
            let id = s.resource.id;
            Node {
                res: s.resource,
                provisioned: id < first_reserve,
                provisioned_at: 0.0,
                retired_at: None,
                queue: VecDeque::new(),
                running: None,
                down: false,
                down_since: 0.0,
                downtime: 0.0,
                breakdowns: 0,
                actual_usage: 0.0,
                expected_usage: 0.0,
                token: 0,
                rng: stream_rng(cfg.seed, 1000 + id as u64),
                win_actual: 0.0,
                win_predicted: 0.0,
                win_missed: 0,
            }
        })
        .collect();
    let jobs: Vec<Job> = workloads
        .into_iter()
        .map(|w| Job {
            w,
            status: Status::Waiting,
            first_start: None,
            finish: None,
            dropped_at: None,
            cost: 0.0,
        })
        .collect();
    let mut e = Engine {
        cfg,
        now: 0.0,
        seq: 0,
        heap: BinaryHeap::new(),
        nodes,
        outstanding: jobs.len(),
        jobs,
        pending: Vec::new(),
        reserve: (first_reserve..cfg.resource_count).collect(),
        kb: KnowledgeBase::new(cfg.thresholds),
        events: Vec::new(),
        instr: Instrumentation::default(),
        win_ok: 0,
        win_missed: 0,
        need_extra: 0,
        ticks: 0,
        rr: 0,
        breakdown: (cfg.breakdown_rate > 0.0).then(|| Exp::new(cfg.breakdown_rate).expect("validated")),
    };
    e.run()?;
    Ok(e.finish_output())
}

impl Engine<'_> {
    fn autonomic(&self) -> bool {
        self.cfg.technique == Technique::Autonomic
    }

    fn push(&mut self, time: f64, kind: EventKind, id: u64, token: u64) {
        self.seq += 1;
        self.heap.push(Event {
            time,
            kind,
            id,
            seq: self.seq,
            token,
        });
    }

    fn log(&mut self, kind: EventKind, resource: Option<usize>, workload: Option<u64>) {
        self.events.push(TraceEvent {
            time: self.now,
            kind,
            resource,
            workload,
        });
    }

    fn schedule_breakdown(&mut self, r: usize) {
        if let Some(exp) = self.breakdown {
            let dt = exp.sample(&mut self.nodes[r].rng);
            self.push(self.now + dt, EventKind::Breakdown, r as u64, 0);
        }
    }

    fn run(&mut self) -> Result<(), SimError> {
        if self.jobs.is_empty() {
            return Ok(());
        }
        for r in 0..self.nodes.len() {
            if self.nodes[r].provisioned {
                self.schedule_breakdown(r);
            }
        }
        for j in 0..self.jobs.len() {
            let t = self.jobs[j].w.request.submit_time;
            self.push(t, EventKind::Arrival, j as u64, 0);
        }
        if self.autonomic() {
            self.push(0.0, EventKind::MonitorTick, 0, 0);
        }
        while self.outstanding > 0 {
            let Some(ev) = self.heap.pop() else { break };
            if ev.time > self.cfg.max_time {
                break;
            }
            self.now = ev.time;
            match ev.kind {
                EventKind::Arrival => self.on_arrival(ev.id as usize),
                EventKind::Finish => self.on_finish(ev.id as usize, ev.token),
                EventKind::Breakdown => self.on_breakdown(ev.id as usize),
                EventKind::Repair => self.on_repair(ev.id as usize),
                EventKind::RestartDone => self.on_restart_done(ev.id as usize),
                EventKind::MonitorTick => self.on_tick()?,
                EventKind::Start | EventKind::Drop => unreachable!("log-only kinds are never queued"),
            }
        }
        Ok(())
    }

    fn start_next(&mut self, r: usize) {
        let node = &self.nodes[r];
        if !node.can_run() || node.running.is_some() {
            return;
        }
        let Some(j) = self.nodes[r].queue.pop_front() else { return };
        let cap = self.nodes[r].res.capacity;
        let job = &mut self.jobs[j];
        job.status = Status::Running;
        job.first_start.get_or_insert(self.now);
        let size = job.w.request.size;
        let id = job.w.request.id;
        self.nodes[r].running = Some(Run {
            job: j,
            remaining: size,
            segment: Some(self.now),
            started: self.now,
        });
        let token = self.nodes[r].token;
        self.push(self.now + size / cap, EventKind::Finish, r as u64, token);
        self.log(EventKind::Start, Some(r), Some(id));
    }

    /// Continues a paused task or starts the next queued one.
    fn kick(&mut self, r: usize) {
        if !self.nodes[r].can_run() {
            return;
        }
        let node = &mut self.nodes[r];
        match node.running.as_mut() {
            Some(run) if run.segment.is_none() => {
                run.segment = Some(self.now);
                let at = self.now + run.remaining / node.res.capacity;
                let token = node.token;
                self.push(at, EventKind::Finish, r as u64, token);
            }
            Some(_) => {}
            None => self.start_next(r),
        }
    }

    /// Stops the current segment, charging busy time, and invalidates any
    /// pending finish event.
    fn pause(&mut self, r: usize) {
        let now = self.now;
        let node = &mut self.nodes[r];
        node.token += 1;
        if let Some(run) = node.running.as_mut() {
            if let Some(s) = run.segment.take() {
                let elapsed = now - s;
                node.res.busy_time += elapsed;
                run.remaining = (run.remaining - elapsed * node.res.capacity).max(0.0);
                self.jobs[run.job].cost += elapsed * node.res.cost_rate / 3600.0;
            }
        }
    }

    fn on_arrival(&mut self, j: usize) {
        let id = self.jobs[j].w.request.id;
        self.log(EventKind::Arrival, None, Some(id));
        if self.autonomic() {
            self.instr.classify_calls += 1;
            let class = classify_request(&self.jobs[j].w.request, &self.cfg.qos);
            self.jobs[j].w.request.qos_class = class;
            self.jobs[j].status = Status::Pending;
            self.pending.push(j);
        } else {
            let r = self.rr % self.nodes.len();
            self.rr += 1;
            self.jobs[j].status = Status::Queued;
            self.nodes[r].queue.push_back(j);
            self.start_next(r);
        }
    }

    fn on_finish(&mut self, r: usize, token: u64) {
        if token != self.nodes[r].token {
            return;
        }
        let now = self.now;
        let node = &mut self.nodes[r];
        let Some(run) = node.running.take() else { return };
        let elapsed = now - run.segment.expect("a finishing task is executing");
        node.res.busy_time += elapsed;
        let job = &mut self.jobs[run.job];
        job.cost += elapsed * node.res.cost_rate / 3600.0;
        job.finish = Some(now);
        job.status = Status::Done;
        let actual = now - run.started;
        let expected = job.w.request.size / node.res.capacity;
        node.actual_usage += actual;
        node.expected_usage += expected;
        node.win_actual += actual;
        node.win_predicted += expected;
        if now <= job.w.request.deadline {
            self.win_ok += 1;
        } else {
            self.win_missed += 1;
            node.win_missed += 1;
        }
        self.outstanding -= 1;
        let id = job.w.request.id;
        self.log(EventKind::Finish, Some(r), Some(id));
        self.start_next(r);
    }

    fn on_breakdown(&mut self, r: usize) {
        let node = &self.nodes[r];
        if !node.provisioned || node.res.state == ResourceState::Dead || node.down {
            return;
        }
        self.pause(r);
        let node = &mut self.nodes[r];
        node.down = true;
        node.down_since = self.now;
        node.breakdowns += 1;
        self.log(EventKind::Breakdown, Some(r), None);
        self.push(self.now + self.cfg.repair_time, EventKind::Repair, r as u64, 0);
    }

    fn on_repair(&mut self, r: usize) {
        let node = &mut self.nodes[r];
        if !node.down {
            return;
        }
        node.down = false;
        node.downtime += self.now - node.down_since;
        self.log(EventKind::Repair, Some(r), None);
        self.schedule_breakdown(r);
        self.kick(r);
    }

    fn on_restart_done(&mut self, r: usize) {
        if self.nodes[r].res.state != ResourceState::Restarting {
            return;
        }
        self.nodes[r].res.state = ResourceState::Active;
        self.log(EventKind::RestartDone, Some(r), None);
        self.kick(r);
    }

    fn on_tick(&mut self) -> Result<(), SimError> {
        self.instr.monitor_ticks += 1;
        self.log(EventKind::MonitorTick, None, None);
        self.drop_expired();

        let sample = self.sample();
        let mut kb = std::mem::replace(&mut self.kb, KnowledgeBase::new(self.cfg.thresholds));
        let plan = analyze_plan(&sample, &kb);
        let effect = execute(&plan, self, &mut kb, self.now);
        self.kb = kb;
        for id in effect?.released {
            let j = id as usize;
            self.jobs[j].status = Status::Pending;
            self.pending.push(j);
        }
        for node in &mut self.nodes {
            node.win_actual = 0.0;
            node.win_predicted = 0.0;
            node.win_missed = 0;
        }
        self.win_ok = 0;
        self.win_missed = 0;

        self.dispatch();
        self.ticks += 1;
        // With every node retired and no reserve left nothing can run again.
        let exhausted = self.reserve.is_empty()
            && self
                .nodes
                .iter()
                .all(|n| !n.provisioned || n.res.state == ResourceState::Dead);
        if self.outstanding > 0 && !exhausted {
            self.push(self.now + self.cfg.monitor_interval, EventKind::MonitorTick, 0, 0);
        }
        Ok(())
    }

    /// Abandons deferred critical requests whose deadline has passed.
    fn drop_expired(&mut self) {
        let now = self.now;
        let mut kept = Vec::with_capacity(self.pending.len());
        for j in std::mem::take(&mut self.pending) {
            let r = &self.jobs[j].w.request;
            self.instr.deadline_reads += 1;
            if r.qos_class == QosClass::Qos && r.deadline < now {
                let id = r.id;
                let job = &mut self.jobs[j];
                job.status = Status::Dropped;
                job.dropped_at = Some(now);
                self.outstanding -= 1;
                self.win_missed += 1;
                self.log(EventKind::Drop, None, Some(id));
            } else {
                kept.push(j);
            }
        }
        self.pending = kept;
    }

    fn sample(&self) -> MonitorSample {
        let mut usage = Vec::new();
        let mut provided = 0;
        for (r, node) in self.nodes.iter().enumerate() {
            if !node.provisioned || node.res.state == ResourceState::Dead {
                continue;
            }
            provided += 1;
            let mut actual = node.win_actual;
            let mut predicted = node.win_predicted;
            if let Some(run) = &node.running {
                actual += self.now - run.started;
                predicted += self.jobs[run.job].w.request.size / node.res.capacity;
            }
            if predicted > 0.0 {
                usage.push(ResourceUsage {
                    resource: r,
                    actual,
                    predicted,
                    missed: node.win_missed,
                });
            }
        }
        MonitorSample {
            time: self.now,
            usage,
            executed_ok: self.win_ok,
            missed_deadline: self.win_missed,
            provided_resources: provided,
            required_resources: provided + self.need_extra,
            reserve_available: self.reserve.len(),
        }
    }

    /// Seconds until the resource could start something new.
    fn backlog(&self, r: usize) -> f64 {
        let node = &self.nodes[r];
        let cap = node.res.capacity;
        let mut t = 0.0;
        if node.down {
            t += (node.down_since + self.cfg.repair_time - self.now).max(0.0);
        }
        if let Some(run) = &node.running {
            let done = run.segment.map_or(0.0, |s| (self.now - s) * cap);
            t += (run.remaining - done).max(0.0) / cap;
        }
        t + node
            .queue
            .iter()
            .map(|&j| self.jobs[j].w.request.size / cap)
            .sum::<f64>()
    }

    fn dispatch(&mut self) {
        self.need_extra = 0;
        if self.pending.is_empty() {
            return;
        }
        let ids = std::mem::take(&mut self.pending);
        let mut batch: Vec<_> = ids.iter().map(|&j| self.jobs[j].w.request.clone()).collect();
        assign_priorities(&mut batch);
        let mut queues = QosQueues::new();
        for r in batch {
            queues.enqueue(r);
        }
        let ordered = queues.drain_all();

        let eligible: Vec<usize> = (0..self.nodes.len()).filter(|&r| self.nodes[r].eligible()).collect();
        let pool: Vec<Resource> = eligible
            .iter()
            .map(|&r| {
                let mut res = self.nodes[r].res.clone();
                res.available_at = self.now + self.backlog(r);
                res
            })
            .collect();
        self.instr.allocate_calls += 1;
        let seed = self.cfg.seed ^ (self.ticks + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
        let assignment = allocate(&ordered, &pool, self.now, &self.cfg.cuckoo, seed);

        let mut touched = BTreeSet::new();
        for p in &assignment.placements {
            let j = p.request as usize;
            self.jobs[j].status = Status::Queued;
            self.nodes[p.resource].queue.push_back(j);
            touched.insert(p.resource);
        }
        let mut ready: Vec<f64> = eligible.iter().map(|&r| self.now + self.backlog(r)).collect();
        let free_capacity: f64 = eligible
            .iter()
            .filter(|&&r| self.nodes[r].running.is_none() && self.nodes[r].queue.is_empty())
            .map(|&r| self.nodes[r].res.capacity)
            .sum();
        let reserve = ReserveStock {
            units: self.reserve.len(),
            unit_capacity: if self.reserve.is_empty() {
                0.0
            } else {
                self.reserve.iter().map(|&r| self.nodes[r].res.capacity).sum::<f64>() / self.reserve.len() as f64
            },
        };
        for id in assignment.unassigned {
            let j = id as usize;
            let req = &self.jobs[j].w.request;
            if req.qos_class == QosClass::Qos {
                self.instr.assess_calls += 1;
                self.instr.deadline_reads += 1;
                let verdict = assess(req, self.now, free_capacity, reserve).map(|a| a.verdict);
                match verdict {
                    Ok(Verdict::AdmitNow) => {}
                    Ok(Verdict::NeedExtra(k)) => {
                        self.need_extra = self.need_extra.max(k);
                        self.jobs[j].status = Status::Pending;
                        self.pending.push(j);
                        continue;
                    }
                    _ => {
                        self.jobs[j].status = Status::Pending;
                        self.pending.push(j);
                        continue;
                    }
                }
            }
            // Best effort: earliest finish on the current backlog.
            let size = req.size;
            let best = (0..eligible.len()).min_by(|&a, &b| {
                let fa = ready[a] + size / self.nodes[eligible[a]].res.capacity;
                let fb = ready[b] + size / self.nodes[eligible[b]].res.capacity;
                fa.total_cmp(&fb).then(a.cmp(&b))
            });
            match best {
                Some(i) => {
                    let r = eligible[i];
                    ready[i] += size / self.nodes[r].res.capacity;
                    self.jobs[j].status = Status::Queued;
                    self.nodes[r].queue.push_back(j);
                    touched.insert(r);
                }
                None => {
                    self.jobs[j].status = Status::Pending;
                    self.pending.push(j);
                }
            }
        }
        for r in touched {
            self.start_next(r);
        }
    }

    fn finish_output(self) -> SimOutput {
        let end = if self.jobs.is_empty() { 0.0 } else { self.now };
        let workloads = self
            .jobs
            .iter()
            .map(|j| {
                let r = &j.w.request;
                WorkloadRecord {
                    id: r.id,
                    submit_time: r.submit_time,
                    start_time: j.first_start,
                    finish_time: j.finish,
                    deadline: r.deadline,
                    budget: r.budget,
                    bits_transferred: j.w.bits(),
                    completed: j.status == Status::Done,
                    dropped_at: j.dropped_at,
                    within_budget: j.cost <= r.budget,
                    qos_class: r.qos_class,
                }
            })
            .collect();
        let resources = self
            .nodes
            .iter()
            .map(|n| {
                let until = n.retired_at.unwrap_or(end);
                let mut downtime = n.downtime;
                if n.down {
                    downtime += (until - n.down_since).max(0.0);
                }
                let mut busy = n.res.busy_time;
                if let Some(Run { segment: Some(s), .. }) = &n.running {
                    busy += (until - s).max(0.0);
                }
                let uptime = if n.provisioned {
                    (until - n.provisioned_at - downtime).max(0.0)
                } else {
                    0.0
                };
                ResourceRecord {
                    id: n.res.id,
                    capacity: n.res.capacity,
                    cost_rate: n.res.cost_rate,
                    uptime,
                    downtime,
                    busy_time: busy,
                    actual_usage_time: n.actual_usage,
                    expected_usage_time: n.expected_usage,
                    breakdown_count: n.breakdowns,
                }
            })
            .collect();
        SimOutput {
            technique: self.cfg.technique,
            workload_count: self.jobs.len(),
            trace: SimTrace {
                workloads,
                resources,
                end_time: end,
            },
            events: self.events,
            actions: self.kb.log,
            instrumentation: self.instr,
        }
    }
}

impl ManagedPool for Engine<'_> {
    fn state(&self, resource: usize) -> Option<ResourceState> {
        self.nodes.get(resource).map(|n| n.res.state)
    }

    fn restart(&mut self, resource: usize, now: f64) -> Vec<u64> {
        self.pause(resource);
        let node = &mut self.nodes[resource];
        if let Some(run) = node.running.take() {
            self.jobs[run.job].status = Status::Queued;
            node.queue.push_front(run.job);
        }
        node.res.state = ResourceState::Restarting;
        self.push(now + self.cfg.restart_time, EventKind::RestartDone, resource as u64, 0);
        Vec::new()
    }

    fn release_queue(&mut self, resource: usize, _now: f64) -> Vec<u64> {
        let drained: Vec<usize> = self.nodes[resource].queue.drain(..).collect();
        drained.into_iter().map(|j| self.jobs[j].w.request.id).collect()
    }

    fn declare_dead(&mut self, resource: usize, now: f64) -> Vec<u64> {
        self.pause(resource);
        let node = &mut self.nodes[resource];
        let mut released = Vec::new();
        if let Some(run) = node.running.take() {
            released.push(run.job);
        }
        released.extend(node.queue.drain(..));
        if node.down {
            node.downtime += now - node.down_since;
            node.down = false;
        }
        node.res.state = ResourceState::Dead;
        node.retired_at = Some(now);
        released.into_iter().map(|j| self.jobs[j].w.request.id).collect()
    }

    fn provision(&mut self, count: usize, now: f64) -> usize {
        let mut added = 0;
        while added < count {
            let Some(r) = self.reserve.pop_front() else { break };
            self.nodes[r].provisioned = true;
            self.nodes[r].provisioned_at = now;
            self.schedule_breakdown(r);
            added += 1;
        }
        added
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::config::Range;

    fn tiny(technique: Technique) -> SimConfig {
        SimConfig {
            resource_count: 1,
            workload_count: 1,
            technique,
            breakdown_rate: 0.0,
            ..SimConfig::default()
        }
    }

    #[test]
    fn single_workload_baseline() {
        let out = simulate(&tiny(Technique::Baseline)).unwrap();
        let w = &out.trace.workloads[0];
        let cap = out.trace.resources[0].capacity;
        assert_eq!(w.start_time, Some(0.0));
        let size = generate_workloads(&tiny(Technique::Baseline))[0].request.size;
        assert!((w.finish_time.unwrap() - size / cap).abs() < 1e-9);
        assert_eq!(out.instrumentation, Instrumentation::default());
    }

    #[test]
    fn empty_run() {
        let cfg = SimConfig {
            workload_count: 0,
            ..SimConfig::default()
        };
        let out = simulate(&cfg).unwrap();
        assert!(out.trace.workloads.is_empty());
        assert!(out.events.is_empty());
        assert_eq!(out.trace.end_time, 0.0);
    }

    #[test]
    fn event_order_breaks_ties_by_kind() {
        let mut heap = BinaryHeap::new();
        for (kind, seq) in [(EventKind::MonitorTick, 0), (EventKind::Finish, 1), (EventKind::Repair, 2)] {
            heap.push(Event {
                time: 5.0,
                kind,
                id: 0,
                seq,
                token: 0,
            });
        }
        heap.push(Event {
            time: 1.0,
            kind: EventKind::MonitorTick,
            id: 0,
            seq: 3,
            token: 0,
        });
        let order: Vec<_> = std::iter::from_fn(|| heap.pop()).map(|e| e.kind).collect();
        assert_eq!(
            order,
            [EventKind::MonitorTick, EventKind::Repair, EventKind::Finish, EventKind::MonitorTick]
        );
    }

    #[test]
    fn breakdowns_pause_and_resume() {
        let cfg = SimConfig {
            resource_count: 2,
            workload_count: 40,
            technique: Technique::Baseline,
            breakdown_rate: 0.02,
            pe_rating: Range::new(100.0, 200.0),
            ..SimConfig::default()
        };
        let out = simulate(&cfg).unwrap();
        let downs: u64 = out.trace.resources.iter().map(|r| r.breakdown_count).sum();
        assert!(downs > 0);
        assert!(out.trace.workloads.iter().all(|w| w.completed));
        for (r, spec) in out.trace.resources.iter().zip(generate_resources(&cfg)) {
            let work: f64 = out
                .events
                .iter()
                .filter(|e| e.kind == EventKind::Finish && e.resource == Some(r.id))
                .map(|e| generate_workloads(&cfg)[e.workload.unwrap() as usize].request.size)
                .sum();
            assert!((r.busy_time - work / spec.resource.capacity).abs() < 1e-6);
            assert!(r.uptime + r.downtime <= out.trace.end_time + 1e-9);
        }
    }

    #[test]
    fn autonomic_completes_and_counts() {
        let cfg = SimConfig {
            workload_count: 300,
            ..SimConfig::default()
        };
        let out = simulate(&cfg).unwrap();
        let done = out.trace.workloads.iter().filter(|w| w.completed).count();
        let dropped = out.trace.workloads.iter().filter(|w| w.dropped_at.is_some()).count();
        assert_eq!(done + dropped, 300);
        assert_eq!(out.instrumentation.classify_calls, 300);
        assert!(out.instrumentation.allocate_calls > 0);
        let reserve = cfg.reserve_count();
        let idle = out.trace.resources.iter().filter(|r| r.uptime == 0.0).count();
        assert!(idle <= reserve);
    }
}
