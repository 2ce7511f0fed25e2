use agrisim_core::metrics::{report, Metric, SimTrace};
use agrisim_core::sim::{compare, simulate, ArrivalMode, EventKind, Instrumentation, SimConfig, SimOutput, Technique};
use proptest::prelude::*;

fn small(technique: Technique, seed: u64, resources: usize, workloads: usize) -> SimConfig {
    SimConfig {
        resource_count: resources,
        workload_count: workloads,
        seed,
        technique,
        ..SimConfig::default()
    }
}

fn count(out: &SimOutput, kind: EventKind) -> usize {
    out.events.iter().filter(|e| e.kind == kind).count()
}

fn check_run(out: &SimOutput) -> Result<(), TestCaseError> {
    let n = out.workload_count;
    prop_assert_eq!(out.trace.workloads.len(), n);
    prop_assert!(out.events.windows(2).all(|w| w[0].time <= w[1].time));
    prop_assert!(out.events.iter().all(|e| e.time <= out.trace.end_time));

    let completed = out.trace.workloads.iter().filter(|w| w.completed).count();
    let dropped = out.trace.workloads.iter().filter(|w| w.dropped_at.is_some()).count();
    prop_assert!(out.trace.workloads.iter().all(|w| !(w.completed && w.dropped_at.is_some())));
    // Requests can be stranded only after the controller retired the whole pool.
    let unserved = n - completed - dropped;
    if unserved > 0 {
        prop_assert!(out.actions.iter().any(|a| a.action == "alert"), "{} unserved", unserved);
        prop_assert!(out.trace.workloads.iter().filter(|w| !w.completed && w.dropped_at.is_none()).all(|w| w.finish_time.is_none()));
    }
    prop_assert_eq!(count(out, EventKind::Arrival), n);
    prop_assert_eq!(count(out, EventKind::Finish), completed);
    prop_assert_eq!(count(out, EventKind::Drop), dropped);

    for w in &out.trace.workloads {
        if let (Some(s), Some(f)) = (w.start_time, w.finish_time) {
            prop_assert!(w.submit_time <= s && s <= f);
        }
        prop_assert_eq!(w.completed, w.finish_time.is_some());
    }
    for r in &out.trace.resources {
        prop_assert!(r.uptime >= -1e-9 && r.downtime >= 0.0);
        prop_assert!(r.busy_time <= r.uptime + 1e-6, "{:?}", r);
    }
    Ok(())
}

fn check_metrics(trace: &SimTrace) -> Result<(), TestCaseError> {
    let rep = report(trace, &SimConfig::default().penalty).unwrap();
    for m in Metric::ALL {
        prop_assert!(rep.get(m).is_finite(), "{:?}", m);
    }
    for m in [Metric::Availability, Metric::CustomerSatisfaction] {
        prop_assert!((0.0..=1.0).contains(&rep.get(m)), "{:?} = {}", m, rep.get(m));
    }
    prop_assert!((0.0..=100.0 + 1e-9).contains(&rep.get(Metric::ResourceUtilization)));
    prop_assert!(rep.get(Metric::MissedDeadlines) >= 0.0);
    prop_assert!(rep.get(Metric::AverageCost) >= 0.0);
    Ok(())
}

#[test]
fn baseline_never_touches_qos_machinery() {
    let out = simulate(&small(Technique::Baseline, 3, 10, 80)).unwrap();
    assert_eq!(out.instrumentation, Instrumentation::default());
    assert!(out.actions.is_empty());
    assert_eq!(count(&out, EventKind::MonitorTick), 0);
}

#[test]
fn autonomic_consults_the_qos_machinery() {
    let out = simulate(&small(Technique::Autonomic, 3, 10, 80)).unwrap();
    let i = out.instrumentation;
    assert_eq!(i.classify_calls, 80);
    assert!(i.monitor_ticks > 0 && i.allocate_calls > 0 && i.deadline_reads > 0);
}

#[test]
fn trace_roundtrip_gives_identical_metrics() {
    let out = simulate(&small(Technique::Autonomic, 11, 12, 120)).unwrap();
    let json = serde_json::to_string(&out.trace).unwrap();
    let back: SimTrace = serde_json::from_str(&json).unwrap();
    assert_eq!(back, out.trace);
    let penalty = SimConfig::default().penalty;
    assert_eq!(report(&back, &penalty).unwrap(), report(&out.trace, &penalty).unwrap());
}

#[test]
fn poisson_arrivals_are_spread_out() {
    let cfg = SimConfig {
        arrival: ArrivalMode::Poisson { rate: 0.5 },
        ..small(Technique::Autonomic, 5, 10, 60)
    };
    let out = simulate(&cfg).unwrap();
    check_run(&out).unwrap();
    let submits: Vec<f64> = out.trace.workloads.iter().map(|w| w.submit_time).collect();
    assert!(submits.windows(2).all(|w| w[0] <= w[1]));
    assert!(submits.last().unwrap() > &10.0);
}

#[test]
fn both_techniques_see_the_same_workloads() {
    let rep = compare(&small(Technique::Autonomic, 9, 10, 0), &[50], Some(1), "t").unwrap();
    let (a, b) = (&rep.outputs[0].trace.workloads, &rep.outputs[1].trace.workloads);
    for (x, y) in a.iter().zip(b) {
        assert_eq!((x.id, x.submit_time, x.deadline, x.budget), (y.id, y.submit_time, y.deadline, y.budget));
    }
}

#[test]
fn retiring_the_last_node_ends_the_run() {
    let cfg = SimConfig {
        breakdown_rate: 0.00792158721186228,
        ..small(Technique::Autonomic, 2942163604429092478, 1, 2)
    };
    let out = simulate(&cfg).unwrap();
    check_run(&out).unwrap();
    let names: Vec<&str> = out.actions.iter().map(|a| a.action.as_str()).collect();
    assert_eq!(names, ["restart", "reallocate", "declare_dead", "alert"]);
    assert!(out.trace.end_time < 1000.0, "ran on to {}", out.trace.end_time);
    assert_eq!(out.trace.workloads.iter().filter(|w| w.completed).count(), 1);
}

#[test]
fn invalid_configs_are_rejected() {
    assert!(simulate(&small(Technique::Baseline, 1, 0, 10)).is_err());
    assert!(simulate(&small(Technique::Baseline, 1, 300, 10)).is_err());
    assert!(simulate(&small(Technique::Baseline, 1, 10, 5000)).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn small_runs_are_consistent(
        seed in any::<u64>(),
        resources in 1usize..12,
        workloads in 0usize..60,
        autonomic in any::<bool>(),
        breakdown in prop_oneof![Just(0.0), 1e-4f64..1e-2],
    ) {
        let technique = if autonomic { Technique::Autonomic } else { Technique::Baseline };
        let cfg = SimConfig { breakdown_rate: breakdown, ..small(technique, seed, resources, workloads) };
        let out = simulate(&cfg).unwrap();
        check_run(&out)?;
        check_metrics(&out.trace)?;
        prop_assert_eq!(&out, &simulate(&cfg).unwrap());
    }
}
