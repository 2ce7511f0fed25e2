//! CSV writers for simulation output.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use super::compare::{CompareReport, Delta};
use super::engine::{SimOutput, TraceEvent};
use super::SimError;
use crate::autonomic::write_action_log;
use crate::metrics::{report, write_metric_rows, MetricRow, PenaltySchedule, ResourceRecord, WorkloadRecord};

fn write_rows<T: Serialize, W: Write>(rows: &[T], out: W) -> Result<(), SimError> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_workloads_csv<W: Write>(rows: &[WorkloadRecord], out: W) -> Result<(), SimError> {
    write_rows(rows, out)
}

pub fn write_resources_csv<W: Write>(rows: &[ResourceRecord], out: W) -> Result<(), SimError> {
    write_rows(rows, out)
}

pub fn write_events_csv<W: Write>(rows: &[TraceEvent], out: W) -> Result<(), SimError> {
    write_rows(rows, out)
}

pub fn write_deltas_csv<W: Write>(rows: &[Delta], out: W) -> Result<(), SimError> {
    write_rows(rows, out)
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, SimError> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

/// Writes `workloads.csv`, `resources.csv`, `events.csv`, `actions.csv`
/// and `metrics.csv` for one run.
pub fn write_run(dir: &Path, out: &SimOutput, penalty: &PenaltySchedule, experiment: &str) -> Result<(), SimError> {
    std::fs::create_dir_all(dir)?;
    write_workloads_csv(&out.trace.workloads, create(dir, "workloads.csv")?)?;
    write_resources_csv(&out.trace.resources, create(dir, "resources.csv")?)?;
    write_events_csv(&out.events, create(dir, "events.csv")?)?;
    write_action_log(&out.actions, create(dir, "actions.csv")?)?;
    let rep = report(&out.trace, penalty)?;
    let rows: Vec<MetricRow> = rep
        .values
        .iter()
        .map(|(m, v)| MetricRow {
            experiment: experiment.to_string(),
            workload_count: out.workload_count,
            technique: out.technique.as_str().to_string(),
            metric: m.as_str().to_string(),
            value: *v,
        })
        .collect();
    write_metric_rows(&rows, create(dir, "metrics.csv")?)?;
    Ok(())
}

/// Writes `metrics.csv` and `deltas.csv` for a sweep, plus one
/// `<technique>_<count>/` directory per run.
pub fn write_compare(dir: &Path, rep: &CompareReport, penalty: &PenaltySchedule, experiment: &str) -> Result<(), SimError> {
    std::fs::create_dir_all(dir)?;
    write_metric_rows(&rep.rows, create(dir, "metrics.csv")?)?;
    write_deltas_csv(&rep.deltas, create(dir, "deltas.csv")?)?;
    for out in &rep.outputs {
        let sub = dir.join(format!("{}_{}", out.technique.as_str(), out.workload_count));
        write_run(&sub, out, penalty, experiment)?;
    }
    Ok(())
}
