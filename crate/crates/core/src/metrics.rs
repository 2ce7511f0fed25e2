//! QoS metrics computed from a finished simulation trace.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::qos::QosClass;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("{0} must be non-negative")]
    Negative(&'static str),
    #[error("at least one breakdown is needed")]
    NoBreakdowns,
    #[error("penalty schedule has no levels")]
    EmptySchedule,
    #[error("penalty rate for {0:?} is negative")]
    NegativeRate(QosClass),
    #[error("{0} bits over a zero-length interval")]
    ZeroInterval(f64),
    #[error("csv: {0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkloadRecord {
    pub id: u64,
    pub submit_time: f64,
    pub start_time: Option<f64>,
    pub finish_time: Option<f64>,
    pub deadline: f64,
    pub budget: f64,
    pub bits_transferred: f64,
    pub completed: bool,
    /// Time the request was abandoned after its deadline passed.
    pub dropped_at: Option<f64>,
    pub within_budget: bool,
    pub qos_class: QosClass,
}

impl WorkloadRecord {
    pub fn on_time(&self) -> bool {
        self.completed && self.finish_time.is_some_and(|f| f <= self.deadline)
    }

    /// Lateness past the deadline, for completed or dropped work.
    pub fn delay(&self) -> f64 {
        let end = if self.completed {
            self.finish_time
        } else {
            self.dropped_at
        };
        end.map_or(0.0, |t| (t - self.deadline).max(0.0))
    }

    pub fn missed(&self) -> bool {
        self.dropped_at.is_some() || (self.completed && !self.on_time())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResourceRecord {
    pub id: usize,
    pub capacity: f64,
    pub cost_rate: f64,
    pub uptime: f64,
    pub downtime: f64,
    pub busy_time: f64,
    pub actual_usage_time: f64,
    pub expected_usage_time: f64,
    pub breakdown_count: u64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SimTrace {
    pub workloads: Vec<WorkloadRecord>,
    pub resources: Vec<ResourceRecord>,
    pub end_time: f64,
}

pub fn mtbf(uptime: f64, breakdowns: u64) -> Result<f64, MetricsError> {
    if uptime < 0.0 {
        return Err(MetricsError::Negative("uptime"));
    }
    if breakdowns == 0 {
        return Err(MetricsError::NoBreakdowns);
    }
    Ok(uptime / breakdowns as f64)
}

pub fn mttr(downtime: f64, breakdowns: u64) -> Result<f64, MetricsError> {
    if downtime < 0.0 {
        return Err(MetricsError::Negative("downtime"));
    }
    if breakdowns == 0 {
        return Err(MetricsError::NoBreakdowns);
    }
    Ok(downtime / breakdowns as f64)
}

/// `MTBF / (MTBF + MTTR)`; 1 when nothing is ever down.
pub fn availability(mtbf: f64, mttr: f64) -> Result<f64, MetricsError> {
    if mtbf < 0.0 {
        return Err(MetricsError::Negative("mtbf"));
    }
    if mttr < 0.0 {
        return Err(MetricsError::Negative("mttr"));
    }
    if mttr == 0.0 {
        return Ok(1.0);
    }
    Ok(mtbf / (mtbf + mttr))
}

/// Pool availability; a trace without breakdowns counts as fully available.
pub fn trace_availability(trace: &SimTrace) -> Result<f64, MetricsError> {
    let breakdowns: u64 = trace.resources.iter().map(|r| r.breakdown_count).sum();
    if breakdowns == 0 {
        return Ok(1.0);
    }
    let up: f64 = trace.resources.iter().map(|r| r.uptime).sum();
    let down: f64 = trace.resources.iter().map(|r| r.downtime).sum();
    availability(mtbf(up, breakdowns)?, mttr(down, breakdowns)?)
}

pub fn bandwidth(bits: f64, seconds: f64) -> Result<f64, MetricsError> {
    if bits < 0.0 {
        return Err(MetricsError::Negative("bits"));
    }
    if seconds < 0.0 {
        return Err(MetricsError::Negative("seconds"));
    }
    if seconds == 0.0 {
        return if bits == 0.0 {
            Ok(0.0)
        } else {
            Err(MetricsError::ZeroInterval(bits))
        };
    }
    Ok(bits / seconds)
}

/// Bits moved by completed workloads over the whole run.
pub fn trace_bandwidth(trace: &SimTrace) -> Result<f64, MetricsError> {
    let bits: f64 = trace
        .workloads
        .iter()
        .filter(|w| w.completed)
        .map(|w| w.bits_transferred)
        .sum();
    bandwidth(bits, trace.end_time)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SatisfactionBand {
    VerySatisfied,
    Satisfied,
    Neutral,
    Dissatisfied,
    CompletelyDissatisfied,
}

impl SatisfactionBand {
    pub fn from_fraction(f: f64) -> Self {
        if f >= 0.875 {
            Self::VerySatisfied
        } else if f >= 0.625 {
            Self::Satisfied
        } else if f >= 0.375 {
            Self::Neutral
        } else if f >= 0.125 {
            Self::Dissatisfied
        } else {
            Self::CompletelyDissatisfied
        }
    }

    /// Customer confidence level in percent.
    pub fn confidence(self) -> u8 {
        match self {
            Self::VerySatisfied => 100,
            Self::Satisfied => 75,
            Self::Neutral => 50,
            Self::Dissatisfied => 25,
            Self::CompletelyDissatisfied => 0,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::VerySatisfied => "Very Satisfied",
            Self::Satisfied => "Satisfied",
            Self::Neutral => "Neutral",
            Self::Dissatisfied => "Dissatisfied",
            Self::CompletelyDissatisfied => "Completely Dissatisfied",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Satisfaction {
    pub fraction: f64,
    pub band: SatisfactionBand,
}

/// Share of workloads finished within both deadline and budget. An empty
/// trace scores 1.
pub fn satisfaction(trace: &SimTrace) -> Satisfaction {
    let n = trace.workloads.len();
    let fraction = if n == 0 {
        1.0
    } else {
        let ok = trace
            .workloads
            .iter()
            .filter(|w| w.on_time() && w.within_budget)
            .count();
        ok as f64 / n as f64
    };
    Satisfaction {
        fraction,
        band: SatisfactionBand::from_fraction(fraction),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Latency {
    pub sum: f64,
    pub mean: f64,
    /// No completed workloads; `mean` is reported as 0.
    pub empty: bool,
}

/// Output time minus input time over completed workloads.
pub fn latency(trace: &SimTrace) -> Latency {
    let values: Vec<f64> = trace
        .workloads
        .iter()
        .filter_map(|w| w.finish_time.filter(|_| w.completed).map(|f| f - w.submit_time))
        .collect();
    let sum: f64 = values.iter().sum();
    Latency {
        sum,
        mean: if values.is_empty() { 0.0 } else { sum / values.len() as f64 },
        empty: values.is_empty(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenaltyLevel {
    pub tier: QosClass,
    /// Currency per second of delay.
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenaltySchedule {
    pub minimum: f64,
    pub levels: Vec<PenaltyLevel>,
}

impl Default for PenaltySchedule {
    fn default() -> Self {
        Self {
            minimum: 1.0,
            levels: vec![
                PenaltyLevel {
                    tier: QosClass::Qos,
                    rate: 0.1,
                },
                PenaltyLevel {
                    tier: QosClass::NonQos,
                    rate: 0.01,
                },
            ],
        }
    }
}

impl PenaltySchedule {
    pub fn validate(&self) -> Result<(), MetricsError> {
        if self.levels.is_empty() {
            return Err(MetricsError::EmptySchedule);
        }
        if self.minimum < 0.0 {
            return Err(MetricsError::Negative("penalty minimum"));
        }
        if let Some(l) = self.levels.iter().find(|l| l.rate < 0.0) {
            return Err(MetricsError::NegativeRate(l.tier));
        }
        Ok(())
    }

    /// Rate of the matching tier, or the lowest declared rate.
    pub fn rate_for(&self, tier: QosClass) -> f64 {
        self.levels
            .iter()
            .find(|l| l.tier == tier)
            .map(|l| l.rate)
            .unwrap_or_else(|| self.levels.iter().map(|l| l.rate).fold(f64::INFINITY, f64::min))
    }

    /// `minimum + rate * delay` when late, else 0.
    pub fn penalty(&self, tier: QosClass, delay: f64) -> f64 {
        if delay > 0.0 {
            self.minimum + self.rate_for(tier) * delay
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub resource_cost: f64,
    pub penalty_cost: f64,
    pub total: f64,
    /// Total divided by the number of workloads.
    pub per_workload: f64,
}

/// Busy-hour resource cost plus lateness penalties.
pub fn average_cost(trace: &SimTrace, schedule: &PenaltySchedule) -> Result<CostBreakdown, MetricsError> {
    schedule.validate()?;
    let resource_cost: f64 = trace
        .resources
        .iter()
        .map(|r| r.cost_rate * r.busy_time / 3600.0)
        .sum();
    let penalty_cost: f64 = trace
        .workloads
        .iter()
        .map(|w| schedule.penalty(w.qos_class, w.delay()))
        .sum();
    let total = resource_cost + penalty_cost;
    let n = trace.workloads.len();
    Ok(CostBreakdown {
        resource_cost,
        penalty_cost,
        total,
        per_workload: if n == 0 { 0.0 } else { total / n as f64 },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExecutionTime {
    pub mean: f64,
    /// Workloads left out because they never finished.
    pub excluded: usize,
}

/// Mean of finish minus start over completed workloads.
pub fn execution_time(trace: &SimTrace) -> ExecutionTime {
    let spans: Vec<f64> = trace
        .workloads
        .iter()
        .filter(|w| w.completed)
        .filter_map(|w| Some(w.finish_time? - w.start_time?))
        .collect();
    ExecutionTime {
        mean: if spans.is_empty() {
            0.0
        } else {
            spans.iter().sum::<f64>() / spans.len() as f64
        },
        excluded: trace.workloads.len() - spans.len(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Utilization {
    /// Busy over uptime, per resource that was ever up.
    pub per_resource: Vec<f64>,
    pub raw_sum: f64,
    /// Mean ratio as a percentage.
    pub mean_percent: f64,
}

pub fn resource_utilization(trace: &SimTrace) -> Utilization {
    let per_resource: Vec<f64> = trace
        .resources
        .iter()
        .filter(|r| r.uptime > 0.0)
        .map(|r| (r.busy_time / r.uptime).min(1.0))
        .collect();
    let raw_sum: f64 = per_resource.iter().sum();
    Utilization {
        mean_percent: if per_resource.is_empty() {
            0.0
        } else {
            100.0 * raw_sum / per_resource.len() as f64
        },
        per_resource,
        raw_sum,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComputingCapacity {
    pub sum: f64,
    pub mean: f64,
}

/// Actual over expected usage time, summed over resources that had work.
pub fn computing_capacity(trace: &SimTrace) -> ComputingCapacity {
    let ratios: Vec<f64> = trace
        .resources
        .iter()
        .filter(|r| r.expected_usage_time > 0.0)
        .map(|r| r.actual_usage_time / r.expected_usage_time)
        .collect();
    let sum: f64 = ratios.iter().sum();
    ComputingCapacity {
        sum,
        mean: if ratios.is_empty() { 0.0 } else { sum / ratios.len() as f64 },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Availability,
    NetworkBandwidth,
    CustomerSatisfaction,
    RequestsMissed,
    MissedDeadlines,
    Latency,
    AverageCost,
    ExecutionTime,
    ResourceUtilization,
    ComputingCapacity,
}

impl Metric {
    pub const ALL: [Metric; 10] = [
        Metric::Availability,
        Metric::NetworkBandwidth,
        Metric::CustomerSatisfaction,
        Metric::RequestsMissed,
        Metric::MissedDeadlines,
        Metric::Latency,
        Metric::AverageCost,
        Metric::ExecutionTime,
        Metric::ResourceUtilization,
        Metric::ComputingCapacity,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Availability => "availability",
            Metric::NetworkBandwidth => "network_bandwidth",
            Metric::CustomerSatisfaction => "customer_satisfaction",
            Metric::RequestsMissed => "requests_missed",
            Metric::MissedDeadlines => "missed_deadlines",
            Metric::Latency => "latency",
            Metric::AverageCost => "average_cost",
            Metric::ExecutionTime => "execution_time",
            Metric::ResourceUtilization => "resource_utilization",
            Metric::ComputingCapacity => "computing_capacity",
        }
    }

    /// Whether a larger value is the better outcome.
    pub fn higher_is_better(self) -> bool {
        matches!(
            self,
            Metric::Availability
                | Metric::NetworkBandwidth
                | Metric::CustomerSatisfaction
                | Metric::RequestsMissed
                | Metric::ResourceUtilization
        )
    }
}

/// The ten headline values for one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub values: Vec<(Metric, f64)>,
}

impl MetricReport {
    pub fn get(&self, m: Metric) -> f64 {
        self.values
            .iter()
            .find(|(k, _)| *k == m)
            .map(|(_, v)| *v)
            .expect("every metric is present")
    }
}

pub fn report(trace: &SimTrace, schedule: &PenaltySchedule) -> Result<MetricReport, MetricsError> {
    let ok = trace.workloads.iter().filter(|w| w.on_time()).count() as u64;
    let missed = trace.workloads.iter().filter(|w| w.missed()).count() as u64;
    let values = vec![
        (Metric::Availability, trace_availability(trace)?),
        (Metric::NetworkBandwidth, trace_bandwidth(trace)?),
        (Metric::CustomerSatisfaction, satisfaction(trace).fraction),
        (
            Metric::RequestsMissed,
            crate::autonomic::requests_balance(ok, missed) as f64,
        ),
        (Metric::MissedDeadlines, missed as f64),
        (Metric::Latency, latency(trace).mean),
        (Metric::AverageCost, average_cost(trace, schedule)?.per_workload),
        (Metric::ExecutionTime, execution_time(trace).mean),
        (Metric::ResourceUtilization, resource_utilization(trace).mean_percent),
        (Metric::ComputingCapacity, computing_capacity(trace).sum),
    ];
    Ok(MetricReport { values })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub experiment: String,
    pub workload_count: usize,
    pub technique: String,
    pub metric: String,
    pub value: f64,
}

pub fn write_metric_rows<W: Write>(rows: &[MetricRow], out: W) -> Result<(), MetricsError> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(|e| MetricsError::Io(e.to_string()))?;
    }
    w.flush().map_err(|e| MetricsError::Io(e.to_string()))
}
