//! Request classification, feasibility assessment and the critical /
//! non-critical queues.

use std::cmp::Ordering;
use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QosError {
    #[error("request {id}: deadline {deadline} is not after submit time {submit}")]
    DeadlineBeforeSubmit { id: u64, submit: f64, deadline: f64 },
    #[error("request {id}: size must be non-negative and finite")]
    BadSize { id: u64 },
    #[error("request {id}: budget must be non-negative")]
    BadBudget { id: u64 },
    #[error("free capacity must be non-negative, got {0}")]
    NegativeCapacity(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum QosClass {
    #[serde(rename = "QoS")]
    Qos,
    #[serde(rename = "NonQoS")]
    NonQos,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserRequest {
    pub id: u64,
    pub submit_time: f64,
    /// Million instructions.
    pub size: f64,
    /// Absolute simulation time.
    pub deadline: f64,
    pub budget: f64,
    /// Currency per second of lateness.
    pub penalty_rate: f64,
    pub qos_class: QosClass,
    /// Lower is more urgent.
    pub priority: u32,
    /// Optional productivity query carried by the request.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agri_query: Option<Vec<String>>,
}

impl UserRequest {
    pub fn new(id: u64, submit_time: f64, size: f64, deadline: f64) -> Self {
        Self {
            id,
            submit_time,
            size,
            deadline,
            budget: 0.0,
            penalty_rate: 0.0,
            qos_class: QosClass::NonQos,
            priority: 0,
            agri_query: None,
        }
    }

    pub fn validate(&self) -> Result<(), QosError> {
        if !(self.deadline > self.submit_time) {
            return Err(QosError::DeadlineBeforeSubmit {
                id: self.id,
                submit: self.submit_time,
                deadline: self.deadline,
            });
        }
        if !(self.size >= 0.0 && self.size.is_finite()) {
            return Err(QosError::BadSize { id: self.id });
        }
        if !(self.budget >= 0.0) {
            return Err(QosError::BadBudget { id: self.id });
        }
        Ok(())
    }

    pub fn slack(&self) -> f64 {
        self.deadline - self.submit_time
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QosConfig {
    /// A request is critical when its slack is below this multiple of its
    /// service time on a reference resource.
    pub horizon_factor: f64,
    /// MIPS used to estimate service time for classification.
    pub reference_capacity: f64,
    /// Fixed slack horizon in seconds; overrides the factor when set.
    pub absolute_horizon: Option<f64>,
    /// Share of the pool held back as reserve stock.
    pub reserve_fraction: f64,
}

impl Default for QosConfig {
    fn default() -> Self {
        Self {
            horizon_factor: 2.0,
            reference_capacity: 2050.0,
            absolute_horizon: None,
            reserve_fraction: 0.2,
        }
    }
}

/// QoS when the slack is strictly tighter than the horizon or the request
/// carries a penalty.
pub fn classify_request(r: &UserRequest, cfg: &QosConfig) -> QosClass {
    let horizon = cfg
        .absolute_horizon
        .unwrap_or(cfg.horizon_factor * r.size / cfg.reference_capacity);
    if r.slack() < horizon || r.penalty_rate > 0.0 {
        QosClass::Qos
    } else {
        QosClass::NonQos
    }
}

/// Ranks requests by penalty rate (high first), then slack (tight first),
/// then id, and stores the rank as priority.
pub fn assign_priorities(requests: &mut [UserRequest]) {
    let mut idx: Vec<usize> = (0..requests.len()).collect();
    idx.sort_by(|&a, &b| {
        let (ra, rb) = (&requests[a], &requests[b]);
        rb.penalty_rate
            .total_cmp(&ra.penalty_rate)
            .then(ra.slack().total_cmp(&rb.slack()))
            .then(ra.id.cmp(&rb.id))
    });
    for (rank, i) in idx.into_iter().enumerate() {
        requests[i].priority = rank as u32;
    }
}

/// Spare resources that can be switched on for a request.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReserveStock {
    pub units: usize,
    /// MIPS per reserve unit.
    pub unit_capacity: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Verdict {
    AdmitNow,
    NeedExtra(usize),
    Defer,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Assessment {
    pub estimated_completion: f64,
    pub verdict: Verdict,
}

/// Estimates completion on `free_capacity` MIPS and decides whether the
/// request runs now, needs `k` reserve units, or has to wait.
pub fn assess(
    r: &UserRequest,
    now: f64,
    free_capacity: f64,
    reserve: ReserveStock,
) -> Result<Assessment, QosError> {
    if !(free_capacity >= 0.0) {
        return Err(QosError::NegativeCapacity(free_capacity));
    }
    if r.size == 0.0 {
        return Ok(Assessment {
            estimated_completion: now,
            verdict: Verdict::AdmitNow,
        });
    }
    let estimated_completion = if free_capacity > 0.0 {
        now + r.size / free_capacity
    } else {
        f64::INFINITY
    };
    if estimated_completion <= r.deadline {
        return Ok(Assessment {
            estimated_completion,
            verdict: Verdict::AdmitNow,
        });
    }
    let window = r.deadline - now;
    let verdict = if window <= 0.0 || reserve.units == 0 || reserve.unit_capacity <= 0.0 {
        Verdict::Defer
    } else {
        let extra = r.size / window - free_capacity;
        let k = (extra / reserve.unit_capacity).ceil().max(1.0) as usize;
        if k <= reserve.units {
            Verdict::NeedExtra(k)
        } else {
            Verdict::Defer
        }
    };
    Ok(Assessment {
        estimated_completion,
        verdict,
    })
}

#[derive(Debug, Clone)]
struct CriticalEntry {
    priority: u32,
    deadline: f64,
    seq: u64,
    request: UserRequest,
}

impl CriticalEntry {
    fn key_cmp(&self, other: &Self) -> Ordering {
        self.priority
            .cmp(&other.priority)
            .then(self.deadline.total_cmp(&other.deadline))
            .then(self.seq.cmp(&other.seq))
    }
}

impl PartialEq for CriticalEntry {
    fn eq(&self, other: &Self) -> bool {
        self.key_cmp(other) == Ordering::Equal
    }
}

impl Eq for CriticalEntry {}

impl PartialOrd for CriticalEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for CriticalEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key_cmp(other)
    }
}

/// Critical requests ordered by (priority, deadline, arrival); non-critical
/// ones FIFO. Critical work always drains first.
#[derive(Debug, Clone, Default)]
pub struct QosQueues {
    critical: BTreeSet<CriticalEntry>,
    noncritical: VecDeque<UserRequest>,
    seq: u64,
}

impl QosQueues {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn enqueue(&mut self, r: UserRequest) {
        match r.qos_class {
            QosClass::Qos => {
                self.critical.insert(CriticalEntry {
                    priority: r.priority,
                    deadline: r.deadline,
                    seq: self.seq,
                    request: r,
                });
            }
            QosClass::NonQos => self.noncritical.push_back(r),
        }
        self.seq += 1;
    }

    pub fn next(&mut self) -> Option<UserRequest> {
        if let Some(e) = self.critical.pop_first() {
            return Some(e.request);
        }
        self.noncritical.pop_front()
    }

    pub fn peek(&self) -> Option<&UserRequest> {
        self.critical
            .first()
            .map(|e| &e.request)
            .or_else(|| self.noncritical.front())
    }

    pub fn len(&self) -> usize {
        self.critical.len() + self.noncritical.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn critical_len(&self) -> usize {
        self.critical.len()
    }

    pub fn noncritical_len(&self) -> usize {
        self.noncritical.len()
    }

    /// Empties both queues in service order.
    pub fn drain_all(&mut self) -> Vec<UserRequest> {
        let mut out = Vec::with_capacity(self.len());
        while let Some(r) = self.next() {
            out.push(r);
        }
        out
    }

    /// Removes and returns every queued request whose deadline is before `now`.
    pub fn remove_expired(&mut self, now: f64) -> Vec<UserRequest> {
        let mut expired = Vec::new();
        let (gone, keep): (Vec<_>, Vec<_>) =
            std::mem::take(&mut self.critical).into_iter().partition(|e| e.request.deadline < now);
        self.critical = keep.into_iter().collect();
        expired.extend(gone.into_iter().map(|e| e.request));
        let (gone, keep): (Vec<_>, Vec<_>) =
            std::mem::take(&mut self.noncritical).into_iter().partition(|r| r.deadline < now);
        self.noncritical = keep.into();
        expired.extend(gone);
        expired.sort_by_key(|r| r.id);
        expired
    }
}
