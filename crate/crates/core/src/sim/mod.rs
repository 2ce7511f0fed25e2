//! Scenario configuration, workload generation and the event-driven
//! simulator comparing the autonomic manager against a FCFS baseline.

pub mod compare;
pub mod config;
pub mod engine;
pub mod export;
pub mod workload;

use thiserror::Error;

pub use compare::{compare, threads_from_env, CompareReport, Delta, RunSummary, Sweep};
pub use config::{ArrivalMode, Range, SimConfig, Technique};
pub use engine::{simulate, EventKind, Instrumentation, SimOutput, TraceEvent};
pub use workload::{generate_resources, generate_workloads, ResourceSpec, Workload};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    Config(String),
    #[error(transparent)]
    Autonomic(#[from] crate::autonomic::AutonomicError),
    #[error(transparent)]
    Metrics(#[from] crate::metrics::MetricsError),
    #[error("io: {0}")]
    Io(String),
    #[error("thread pool: {0}")]
    Threads(String),
}

impl From<std::io::Error> for SimError {
    fn from(e: std::io::Error) -> Self {
        SimError::Io(e.to_string())
    }
}

impl From<csv::Error> for SimError {
    fn from(e: csv::Error) -> Self {
        SimError::Io(e.to_string())
    }
}
