use serde::{Deserialize, Serialize};

use super::SimError;
use crate::autonomic::Thresholds;
use crate::cuckoo::CuckooConfig;
use crate::metrics::PenaltySchedule;
use crate::qos::QosConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Technique {
    Autonomic,
    Baseline,
}

impl Technique {
    pub fn as_str(self) -> &'static str {
        match self {
            Technique::Autonomic => "autonomic",
            Technique::Baseline => "baseline",
        }
    }
}

impl std::str::FromStr for Technique {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "autonomic" => Ok(Technique::Autonomic),
            "baseline" => Ok(Technique::Baseline),
            other => Err(SimError::Config(format!("unknown technique {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub min: f64,
    pub max: f64,
}

impl Range {
    pub const fn new(min: f64, max: f64) -> Self {
        Self { min, max }
    }

    fn check_within(&self, name: &str, outer: Range) -> Result<(), SimError> {
        if !(self.min.is_finite() && self.max.is_finite() && self.min <= self.max) {
            return Err(SimError::Config(format!(
                "{name}: [{}, {}] is not a valid range",
                self.min, self.max
            )));
        }
        if self.min < outer.min || self.max > outer.max {
            return Err(SimError::Config(format!(
                "{name}: [{}, {}] lies outside [{}, {}]",
                self.min, self.max, outer.min, outer.max
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum ArrivalMode {
    /// Everything submitted at t = 0.
    Batch,
    /// Exponential inter-arrival times with the given rate per second.
    Poisson { rate: f64 },
}

/// Scenario parameters. Sampled quantities are drawn uniformly from their
/// ranges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub resource_count: usize,
    pub workload_count: usize,
    pub seed: u64,
    pub technique: Technique,
    /// Bytes per second; recorded per resource, not used for timing.
    pub bandwidth: Range,
    pub size_base_mb: f64,
    /// Relative inflation on top of the base size.
    pub size_inflation: Range,
    /// MIPS.
    pub pe_rating: Range,
    /// Budget per workload.
    pub workload_cost: Range,
    /// Resource price per busy hour.
    pub resource_cost_rate: Range,
    pub memory_mb: Range,
    pub file_size_base_mb: f64,
    pub file_size_inflation: Range,
    pub output_size_base_mb: f64,
    pub output_size_inflation: Range,
    pub pes_per_machine: u32,
    /// Million instructions per megabyte of workload size.
    pub mi_per_mb: f64,
    /// Relative deadline in seconds after submission.
    pub deadline: Range,
    /// Share of workloads that declare a lateness penalty.
    pub penalty_fraction: f64,
    pub arrival: ArrivalMode,
    /// Breakdowns per resource per second.
    pub breakdown_rate: f64,
    pub repair_time: f64,
    pub restart_time: f64,
    pub monitor_interval: f64,
    /// Hard stop for the event loop.
    pub max_time: f64,
    pub penalty: PenaltySchedule,
    pub qos: QosConfig,
    pub cuckoo: CuckooConfig,
    pub thresholds: Thresholds,
}

pub const MAX_RESOURCES: usize = 250;
pub const MAX_WORKLOADS: usize = 3000;

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            resource_count: 100,
            workload_count: 1000,
            seed: 42,
            technique: Technique::Autonomic,
            bandwidth: Range::new(100.0, 1500.0),
            size_base_mb: 10000.0,
            size_inflation: Range::new(0.10, 0.30),
            pe_rating: Range::new(100.0, 4000.0),
            workload_cost: Range::new(3.0, 5.0),
            resource_cost_rate: Range::new(3.0, 5.0),
            memory_mb: Range::new(2048.0, 12576.0),
            file_size_base_mb: 300.0,
            file_size_inflation: Range::new(0.15, 0.40),
            output_size_base_mb: 300.0,
            output_size_inflation: Range::new(0.15, 0.50),
            pes_per_machine: 1,
            mi_per_mb: 1.0,
            deadline: Range::new(300.0, 1500.0),
            penalty_fraction: 0.3,
            arrival: ArrivalMode::Batch,
            breakdown_rate: 1e-4,
            repair_time: 50.0,
            restart_time: 5.0,
            monitor_interval: 10.0,
            max_time: 1e7,
            penalty: PenaltySchedule::default(),
            qos: QosConfig::default(),
            cuckoo: CuckooConfig::default(),
            thresholds: Thresholds::default(),
        }
    }
}

impl SimConfig {
    pub fn from_json(text: &str) -> Result<Self, SimError> {
        let cfg: SimConfig = serde_json::from_str(text).map_err(|e| SimError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks every sampled range against the supported envelope.
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::Config(m));
        if self.resource_count == 0 || self.resource_count > MAX_RESOURCES {
            return bad(format!("resource_count {} not in 1..={MAX_RESOURCES}", self.resource_count));
        }
        if self.workload_count > MAX_WORKLOADS {
            return bad(format!("workload_count {} exceeds {MAX_WORKLOADS}", self.workload_count));
        }
        self.bandwidth.check_within("bandwidth", Range::new(100.0, 1500.0))?;
        self.size_inflation.check_within("size_inflation", Range::new(0.10, 0.30))?;
        self.pe_rating.check_within("pe_rating", Range::new(100.0, 4000.0))?;
        self.workload_cost.check_within("workload_cost", Range::new(3.0, 5.0))?;
        self.resource_cost_rate.check_within("resource_cost_rate", Range::new(0.0, 1e6))?;
        self.memory_mb.check_within("memory_mb", Range::new(2048.0, 12576.0))?;
        self.file_size_inflation.check_within("file_size_inflation", Range::new(0.15, 0.40))?;
        self.output_size_inflation.check_within("output_size_inflation", Range::new(0.15, 0.50))?;
        self.deadline.check_within("deadline", Range::new(f64::MIN_POSITIVE, f64::MAX))?;
        if self.size_base_mb != 10000.0 || self.file_size_base_mb != 300.0 || self.output_size_base_mb != 300.0 {
            return bad("base sizes are fixed at 10000/300/300 MB".into());
        }
        if self.pes_per_machine != 1 {
            return bad("pes_per_machine must be 1".into());
        }
        for (name, v) in [
            ("mi_per_mb", self.mi_per_mb),
            ("monitor_interval", self.monitor_interval),
            ("max_time", self.max_time),
        ] {
            if !(v > 0.0 && v.is_finite() || name == "max_time" && v > 0.0) {
                return bad(format!("{name} must be positive"));
            }
        }
        for (name, v) in [
            ("breakdown_rate", self.breakdown_rate),
            ("repair_time", self.repair_time),
            ("restart_time", self.restart_time),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be non-negative"));
            }
        }
        if !(0.0..=1.0).contains(&self.penalty_fraction) {
            return bad("penalty_fraction must lie in [0, 1]".into());
        }
        if !(0.0..1.0).contains(&self.qos.reserve_fraction) {
            return bad("reserve_fraction must lie in [0, 1)".into());
        }
        if let ArrivalMode::Poisson { rate } = self.arrival {
            if !(rate > 0.0 && rate.is_finite()) {
                return bad("poisson rate must be positive".into());
            }
        }
        if self.cuckoo.min_eggs > self.cuckoo.max_eggs || self.cuckoo.population == 0 {
            return bad("cuckoo population and egg range must be non-empty".into());
        }
        self.penalty.validate().map_err(|e| SimError::Config(e.to_string()))
    }

    /// Resources held back from the autonomic pool at the start.
    pub fn reserve_count(&self) -> usize {
        ((self.resource_count as f64) * self.qos.reserve_fraction).floor() as usize
    }
}
