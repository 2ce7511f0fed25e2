//! Monitor / analyze / plan / execute loop over a managed resource pool.
//!
//! Each tick the analyzer runs three checks in order (resource shortfall,
//! resource consumption, missed deadlines) and acts on the first one that
//! fires. Consumption and miss breaches escalate per resource: restart,
//! then reallocate its queue, then declare it dead and bring in a reserve
//! resource.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cuckoo::{Resource, ResourceState};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AutonomicError {
    #[error("predicted usage must be positive, got {0}")]
    NonPositivePrediction(f64),
    #[error("resource {0} is dead and cannot be restarted")]
    RestartDead(usize),
    #[error("unknown resource {0}")]
    UnknownResource(usize),
    #[error("csv: {0}")]
    Io(String),
}

/// Actual over predicted usage; 1 when the resource behaves as expected.
pub fn resource_consumption(actual: f64, predicted: f64) -> Result<f64, AutonomicError> {
    if !(predicted > 0.0) {
        return Err(AutonomicError::NonPositivePrediction(predicted));
    }
    Ok(actual / predicted)
}

/// Successful executions minus missed deadlines.
pub fn requests_balance(executed_ok: u64, missed_deadline: u64) -> i64 {
    executed_ok as i64 - missed_deadline as i64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResourceUsage {
    pub resource: usize,
    /// Seconds actually spent.
    pub actual: f64,
    /// Seconds the work should have taken.
    pub predicted: f64,
    /// Deadline misses attributed to this resource in the window.
    pub missed: u64,
}

impl ResourceUsage {
    pub fn consumption(&self) -> Option<f64> {
        resource_consumption(self.actual, self.predicted).ok()
    }
}

/// What the sensors saw over one monitoring window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitorSample {
    pub time: f64,
    pub usage: Vec<ResourceUsage>,
    pub executed_ok: u64,
    pub missed_deadline: u64,
    pub provided_resources: usize,
    pub required_resources: usize,
    /// Reserve resources that could still be brought in.
    pub reserve_available: usize,
}

impl MonitorSample {
    pub fn requests_balance(&self) -> i64 {
        requests_balance(self.executed_ok, self.missed_deadline)
    }

    /// Raw missed count; this is what the miss threshold compares against.
    pub fn missed_count(&self) -> u64 {
        self.missed_deadline
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Action {
    Continue,
    AllocateNew(usize),
    Restart(usize),
    Reallocate(usize),
    DeclareDead(usize),
    Alert(String),
}

impl Action {
    pub fn name(&self) -> &'static str {
        match self {
            Action::Continue => "continue",
            Action::AllocateNew(_) => "allocate_new",
            Action::Restart(_) => "restart",
            Action::Reallocate(_) => "reallocate",
            Action::DeclareDead(_) => "declare_dead",
            Action::Alert(_) => "alert",
        }
    }

    pub fn resource(&self) -> Option<usize> {
        match self {
            Action::Restart(r) | Action::Reallocate(r) | Action::DeclareDead(r) => Some(*r),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub actions: Vec<Action>,
    pub reason: String,
}

impl Plan {
    pub fn continue_() -> Self {
        Self {
            actions: vec![Action::Continue],
            reason: String::new(),
        }
    }

    pub fn is_continue(&self) -> bool {
        self.actions.iter().all(|a| *a == Action::Continue)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Thresholds {
    pub consumption: f64,
    /// Share of the window's finished requests allowed to miss.
    pub missed_fraction: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            consumption: 1.5,
            missed_fraction: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionLogEntry {
    pub time: f64,
    pub resource: Option<usize>,
    pub action: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct KnowledgeBase {
    pub thresholds: Thresholds,
    /// Escalation steps already taken per resource.
    pub offenses: BTreeMap<usize, u32>,
    pub log: Vec<ActionLogEntry>,
}

impl KnowledgeBase {
    pub fn new(thresholds: Thresholds) -> Self {
        Self {
            thresholds,
            ..Self::default()
        }
    }

    pub fn offenses(&self, resource: usize) -> u32 {
        self.offenses.get(&resource).copied().unwrap_or(0)
    }

    pub fn write_log_csv<W: Write>(&self, out: W) -> Result<(), AutonomicError> {
        write_action_log(&self.log, out)
    }
}

pub fn write_action_log<W: Write>(log: &[ActionLogEntry], out: W) -> Result<(), AutonomicError> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| AutonomicError::Io(e.to_string());
    w.write_record(["time", "resource", "action", "reason"]).map_err(io)?;
    for e in log {
        let resource = e.resource.map(|r| r.to_string()).unwrap_or_default();
        w.write_record([format!("{:.3}", e.time), resource, e.action.clone(), e.reason.clone()])
            .map_err(io)?;
    }
    w.flush().map_err(|e| AutonomicError::Io(e.to_string()))
}

fn escalate(resource: usize, offenses: u32, reserve_available: usize, why: String) -> Plan {
    let actions = match offenses {
        0 => vec![Action::Restart(resource)],
        1 => vec![Action::Reallocate(resource)],
        _ if reserve_available > 0 => vec![Action::DeclareDead(resource), Action::AllocateNew(1)],
        _ => vec![
            Action::DeclareDead(resource),
            Action::Alert(format!("no replacement for resource {resource}")),
        ],
    };
    Plan { actions, reason: why }
}

/// Decides this tick's plan from a sample and the knowledge base. Pure.
pub fn analyze_plan(sample: &MonitorSample, kb: &KnowledgeBase) -> Plan {
    if sample.provided_resources < sample.required_resources {
        let short = sample.required_resources - sample.provided_resources;
        let why = format!(
            "provided {} < required {}",
            sample.provided_resources, sample.required_resources
        );
        let action = if sample.reserve_available > 0 {
            Action::AllocateNew(short.min(sample.reserve_available))
        } else {
            Action::Alert("reserve exhausted".into())
        };
        return Plan {
            actions: vec![action],
            reason: why,
        };
    }

    let worst = sample
        .usage
        .iter()
        .filter_map(|u| u.consumption().map(|c| (u.resource, c)))
        .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)));
    if let Some((r, c)) = worst {
        if c > kb.thresholds.consumption {
            let why = format!("consumption {c:.3} > {}", kb.thresholds.consumption);
            return escalate(r, kb.offenses(r), sample.reserve_available, why);
        }
    }

    let finished = sample.executed_ok + sample.missed_deadline;
    let limit = kb.thresholds.missed_fraction * finished as f64;
    if finished > 0 && sample.missed_count() as f64 > limit {
        let why = format!("missed {} > {limit:.3}", sample.missed_count());
        let culprit = sample
            .usage
            .iter()
            .filter(|u| u.missed > 0)
            .max_by(|a, b| a.missed.cmp(&b.missed).then(b.resource.cmp(&a.resource)));
        return match culprit {
            Some(u) => escalate(u.resource, kb.offenses(u.resource), sample.reserve_available, why),
            None if sample.reserve_available > 0 => Plan {
                actions: vec![Action::AllocateNew(1)],
                reason: why,
            },
            None => Plan {
                actions: vec![Action::Alert("misses with no reserve".into())],
                reason: why,
            },
        };
    }
    Plan::continue_()
}

/// The operations the executor needs from whoever owns the resources.
pub trait ManagedPool {
    fn state(&self, resource: usize) -> Option<ResourceState>;
    /// Puts the resource into a short restart; returns requests taken off it.
    fn restart(&mut self, resource: usize, now: f64) -> Vec<u64>;
    /// Empties the resource's waiting queue.
    fn release_queue(&mut self, resource: usize, now: f64) -> Vec<u64>;
    /// Retires the resource for good; returns everything it held.
    fn declare_dead(&mut self, resource: usize, now: f64) -> Vec<u64>;
    /// Brings up to `count` reserve resources online; returns how many came.
    fn provision(&mut self, count: usize, now: f64) -> usize;
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EffectRecord {
    /// Requests that need a new placement.
    pub released: Vec<u64>,
    pub provisioned: usize,
    pub alerts: Vec<String>,
}

/// Applies a plan to the pool and appends each action to the log.
pub fn execute<P: ManagedPool>(
    plan: &Plan,
    pool: &mut P,
    kb: &mut KnowledgeBase,
    now: f64,
) -> Result<EffectRecord, AutonomicError> {
    let mut effect = EffectRecord::default();
    for action in &plan.actions {
        if let Some(r) = action.resource() {
            match pool.state(r) {
                None => return Err(AutonomicError::UnknownResource(r)),
                Some(ResourceState::Dead) if matches!(action, Action::Restart(_)) => {
                    return Err(AutonomicError::RestartDead(r))
                }
                _ => {}
            }
        }
        match action {
            Action::Continue => continue,
            Action::Restart(r) => {
                effect.released.extend(pool.restart(*r, now));
                kb.offenses.insert(*r, kb.offenses(*r).max(1));
            }
            Action::Reallocate(r) => {
                effect.released.extend(pool.release_queue(*r, now));
                kb.offenses.insert(*r, kb.offenses(*r).max(2));
            }
            Action::DeclareDead(r) => {
                effect.released.extend(pool.declare_dead(*r, now));
                kb.offenses.insert(*r, kb.offenses(*r).max(3));
            }
            Action::AllocateNew(n) => effect.provisioned += pool.provision(*n, now),
            Action::Alert(msg) => effect.alerts.push(msg.clone()),
        }
        let reason = match action {
            Action::Alert(msg) if plan.reason.is_empty() => msg.clone(),
            Action::Alert(msg) => format!("{}; {msg}", plan.reason),
            _ => plan.reason.clone(),
        };
        kb.log.push(ActionLogEntry {
            time: now,
            resource: action.resource(),
            action: action.name().to_string(),
            reason,
        });
    }
    Ok(effect)
}

/// A plain in-memory pool: active resources with request queues plus a
/// reserve list. Used for standalone control-loop runs.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct StaticPool {
    pub resources: Vec<Resource>,
    pub queues: BTreeMap<usize, Vec<u64>>,
    pub reserve: Vec<Resource>,
    pub restart_until: BTreeMap<usize, f64>,
}

pub const RESTART_SECONDS: f64 = 5.0;

impl StaticPool {
    pub fn new(resources: Vec<Resource>, reserve: Vec<Resource>) -> Self {
        Self {
            resources,
            reserve,
            ..Self::default()
        }
    }

    fn get_mut(&mut self, id: usize) -> Option<&mut Resource> {
        self.resources.iter_mut().find(|r| r.id == id)
    }
}

impl ManagedPool for StaticPool {
    fn state(&self, resource: usize) -> Option<ResourceState> {
        self.resources.iter().find(|r| r.id == resource).map(|r| r.state)
    }

    fn restart(&mut self, resource: usize, now: f64) -> Vec<u64> {
        if let Some(r) = self.get_mut(resource) {
            r.state = ResourceState::Restarting;
            r.available_at = now + RESTART_SECONDS;
        }
        self.restart_until.insert(resource, now + RESTART_SECONDS);
        Vec::new()
    }

    fn release_queue(&mut self, resource: usize, _now: f64) -> Vec<u64> {
        self.queues.remove(&resource).unwrap_or_default()
    }

    fn declare_dead(&mut self, resource: usize, _now: f64) -> Vec<u64> {
        if let Some(r) = self.get_mut(resource) {
            r.state = ResourceState::Dead;
        }
        self.queues.remove(&resource).unwrap_or_default()
    }

    fn provision(&mut self, count: usize, now: f64) -> usize {
        let n = count.min(self.reserve.len());
        for mut r in self.reserve.drain(..n) {
            r.state = ResourceState::Active;
            r.available_at = now;
            self.resources.push(r);
        }
        n
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(usage: Vec<ResourceUsage>) -> MonitorSample {
        MonitorSample {
            time: 0.0,
            usage,
            executed_ok: 10,
            missed_deadline: 0,
            provided_resources: 2,
            required_resources: 2,
            reserve_available: 1,
        }
    }

    fn usage(resource: usize, actual: f64, predicted: f64) -> ResourceUsage {
        ResourceUsage {
            resource,
            actual,
            predicted,
            missed: 0,
        }
    }

    #[test]
    fn consumption_and_balance() {
        assert_eq!(resource_consumption(10.0, 10.0).unwrap(), 1.0);
        assert_eq!(resource_consumption(0.0, 10.0).unwrap(), 0.0);
        assert_eq!(resource_consumption(15.0, 10.0).unwrap(), 1.5);
        assert!(resource_consumption(1.0, 0.0).is_err());
        assert_eq!(requests_balance(10, 0), 10);
        assert_eq!(requests_balance(0, 0), 0);
        assert_eq!(requests_balance(7, 3), 4);
    }

    #[test]
    fn healthy_sample_continues() {
        let kb = KnowledgeBase::default();
        let p = analyze_plan(&sample(vec![usage(0, 1.0, 1.0)]), &kb);
        assert!(p.is_continue());
    }

    #[test]
    fn shortfall_wins_over_consumption() {
        let kb = KnowledgeBase::default();
        let mut s = sample(vec![usage(0, 16.0, 10.0)]);
        s.required_resources = 3;
        assert_eq!(analyze_plan(&s, &kb).actions, vec![Action::AllocateNew(1)]);
        s.reserve_available = 0;
        assert!(matches!(analyze_plan(&s, &kb).actions[0], Action::Alert(_)));
    }

    #[test]
    fn ladder() {
        let mut kb = KnowledgeBase::default();
        let s = sample(vec![usage(0, 1.0, 1.0), usage(1, 16.0, 10.0)]);
        assert_eq!(analyze_plan(&s, &kb).actions, vec![Action::Restart(1)]);
        kb.offenses.insert(1, 1);
        assert_eq!(analyze_plan(&s, &kb).actions, vec![Action::Reallocate(1)]);
        kb.offenses.insert(1, 2);
        assert_eq!(
            analyze_plan(&s, &kb).actions,
            vec![Action::DeclareDead(1), Action::AllocateNew(1)]
        );
    }

    #[test]
    fn misses_escalate_worst_resource() {
        let kb = KnowledgeBase::default();
        let mut s = sample(vec![usage(0, 1.0, 1.0), usage(1, 1.0, 1.0)]);
        s.usage[0].missed = 1;
        s.usage[1].missed = 2;
        s.missed_deadline = 3;
        assert_eq!(analyze_plan(&s, &kb).actions, vec![Action::Restart(1)]);
    }

    #[test]
    fn executor_effects() {
        let mut pool = StaticPool::new(
            vec![Resource::new(0, 100.0, 1.0), Resource::new(1, 100.0, 1.0)],
            vec![Resource::new(2, 100.0, 1.0)],
        );
        pool.queues.insert(1, vec![7, 8]);
        let mut kb = KnowledgeBase::default();

        let before = pool.clone();
        let e = execute(&Plan::continue_(), &mut pool, &mut kb, 0.0).unwrap();
        assert_eq!(e, EffectRecord::default());
        assert_eq!(pool, before);
        assert!(kb.log.is_empty());

        execute(&escalate(1, 0, 1, "x".into()), &mut pool, &mut kb, 1.0).unwrap();
        assert_eq!(pool.state(1), Some(ResourceState::Restarting));
        assert_eq!(kb.offenses(1), 1);

        let e = execute(&escalate(1, 1, 1, "x".into()), &mut pool, &mut kb, 2.0).unwrap();
        assert_eq!(e.released, vec![7, 8]);

        let e = execute(&escalate(1, 2, 1, "x".into()), &mut pool, &mut kb, 3.0).unwrap();
        assert_eq!(e.provisioned, 1);
        assert_eq!(pool.state(1), Some(ResourceState::Dead));
        assert_eq!(pool.state(2), Some(ResourceState::Active));

        let err = execute(&escalate(1, 0, 1, "x".into()), &mut pool, &mut kb, 4.0);
        assert_eq!(err, Err(AutonomicError::RestartDead(1)));

        let alert = Plan {
            actions: vec![Action::Alert("hi".into())],
            reason: String::new(),
        };
        let before = pool.clone();
        execute(&alert, &mut pool, &mut kb, 5.0).unwrap();
        assert_eq!(pool, before);
        let names: Vec<&str> = kb.log.iter().map(|e| e.action.as_str()).collect();
        assert_eq!(names, vec!["restart", "reallocate", "declare_dead", "allocate_new", "alert"]);
    }

    #[test]
    fn log_csv_shape() {
        let kb = KnowledgeBase {
            log: vec![ActionLogEntry {
                time: 10.0,
                resource: Some(3),
                action: "restart".into(),
                reason: "consumption 2.000 > 1.5".into(),
            }],
            ..KnowledgeBase::default()
        };
        let mut buf = Vec::new();
        kb.write_log_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "time,resource,action,reason\n10.000,3,restart,consumption 2.000 > 1.5\n"
        );
    }
}
