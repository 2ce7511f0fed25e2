use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{SimConfig, Technique};
use super::engine::{simulate, Instrumentation, SimOutput};
use super::SimError;
use crate::metrics::{report, Metric, MetricReport, MetricRow};

/// Environment variable capping the worker threads used by [`compare`].
pub const THREADS_ENV: &str = "AGRI_SIM_THREADS";

/// Workload counts `start, start + step, ..., end`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sweep {
    pub start: usize,
    pub end: usize,
    pub step: usize,
}

impl Sweep {
    pub fn counts(&self) -> Vec<usize> {
        (self.start..=self.end).step_by(self.step.max(1)).collect()
    }
}

impl std::str::FromStr for Sweep {
    type Err = SimError;

    /// Parses `start:end:step`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || SimError::Config(format!("sweep {s:?} is not start:end:step"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let n: Vec<usize> = parts
            .iter()
            .map(|p| p.trim().parse().map_err(|_| bad()))
            .collect::<Result<_, _>>()?;
        if n[2] == 0 || n[0] > n[1] {
            return Err(bad());
        }
        Ok(Sweep {
            start: n[0],
            end: n[1],
            step: n[2],
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub workload_count: usize,
    pub technique: Technique,
    pub report: MetricReport,
    pub instrumentation: Instrumentation,
}

/// Autonomic minus baseline for one metric at one workload count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Delta {
    pub workload_count: usize,
    pub metric: String,
    pub autonomic: f64,
    pub baseline: f64,
    pub delta: f64,
    pub autonomic_better: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub rows: Vec<MetricRow>,
    pub deltas: Vec<Delta>,
    pub runs: Vec<RunSummary>,
    #[serde(skip)]
    pub outputs: Vec<SimOutput>,
}

impl CompareReport {
    pub fn value(&self, count: usize, technique: Technique, metric: Metric) -> Option<f64> {
        self.runs
            .iter()
            .find(|r| r.workload_count == count && r.technique == technique)
            .map(|r| r.report.get(metric))
    }
}

/// Reads the worker cap from the environment; unset or invalid means no cap.
pub fn threads_from_env() -> Option<usize> {
    std::env::var(THREADS_ENV).ok()?.trim().parse().ok().filter(|&n| n > 0)
}

/// Runs both techniques at every count with the same seed and workload
/// draws. Results come back in (count, technique) order regardless of the
/// number of worker threads.
pub fn compare(
    base: &SimConfig,
    counts: &[usize],
    threads: Option<usize>,
    experiment: &str,
) -> Result<CompareReport, SimError> {
    let jobs: Vec<SimConfig> = counts
        .iter()
        .flat_map(|&n| {
            [Technique::Autonomic, Technique::Baseline].map(|technique| SimConfig {
                workload_count: n,
                technique,
                ..base.clone()
            })
        })
        .collect();
    for j in &jobs {
        j.validate()?;
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| SimError::Threads(e.to_string()))?;
    let outputs: Vec<SimOutput> = pool.install(|| {
        jobs.par_iter()
            .map(simulate)
            .collect::<Result<Vec<_>, _>>()
    })?;

    let mut runs = Vec::with_capacity(outputs.len());
    let mut rows = Vec::new();
    for out in &outputs {
        let rep = report(&out.trace, &base.penalty)?;
        for (metric, value) in &rep.values {
            rows.push(MetricRow {
                experiment: experiment.to_string(),
                workload_count: out.workload_count,
                technique: out.technique.as_str().to_string(),
                metric: metric.as_str().to_string(),
                value: *value,
            });
        }
        runs.push(RunSummary {
            workload_count: out.workload_count,
            technique: out.technique,
            report: rep,
            instrumentation: out.instrumentation,
        });
    }
    let mut deltas = Vec::new();
    for pair in runs.chunks(2) {
        let (a, b) = (&pair[0], &pair[1]);
        for m in Metric::ALL {
            let (av, bv) = (a.report.get(m), b.report.get(m));
            deltas.push(Delta {
                workload_count: a.workload_count,
                metric: m.as_str().to_string(),
                autonomic: av,
                baseline: bv,
                delta: av - bv,
                autonomic_better: if m.higher_is_better() { av > bv } else { av < bv },
            });
        }
    }
    Ok(CompareReport {
        rows,
        deltas,
        runs,
        outputs,
    })
}
