use std::collections::BTreeMap;

use agrisim_core::autonomic::{
    analyze_plan, execute, Action, KnowledgeBase, ManagedPool, MonitorSample, ResourceUsage, StaticPool, Thresholds,
};
use agrisim_core::cuckoo::{allocate, CuckooConfig, Resource, ResourceState};
use agrisim_core::qos::{assess, assign_priorities, classify_request, QosClass, QosConfig, QosQueues, ReserveStock, UserRequest, Verdict};
use proptest::prelude::*;

fn request(id: u64, size: f64, deadline: f64, penalty: f64) -> UserRequest {
    UserRequest {
        penalty_rate: penalty,
        ..UserRequest::new(id, 0.0, size, deadline)
    }
}

fn requests() -> impl Strategy<Value = Vec<UserRequest>> {
    proptest::collection::vec((1.0f64..5000.0, 1.0f64..200.0, prop_oneof![Just(0.0), 0.1f64..3.0]), 1..25).prop_map(
        |rows| {
            rows.into_iter()
                .enumerate()
                .map(|(i, (size, deadline, pen))| request(i as u64, size, deadline, pen))
                .collect()
        },
    )
}

fn pool() -> impl Strategy<Value = Vec<Resource>> {
    proptest::collection::vec((100.0f64..4000.0, 0.0f64..50.0, 0u8..4), 1..8).prop_map(|rows| {
        rows.into_iter()
            .enumerate()
            .map(|(i, (cap, avail, s))| Resource {
                state: match s {
                    0 => ResourceState::Restarting,
                    1 => ResourceState::Dead,
                    _ => ResourceState::Active,
                },
                available_at: avail,
                ..Resource::new(i, cap, 3.0)
            })
            .collect()
    })
}

#[test]
fn penalised_requests_are_qos() {
    let cfg = QosConfig::default();
    assert_eq!(classify_request(&request(0, 10.0, 1e6, 0.0), &cfg), QosClass::NonQos);
    assert_eq!(classify_request(&request(0, 10.0, 1e6, 0.5), &cfg), QosClass::Qos);
    let tight = request(0, 2050.0, 1.5, 0.0);
    assert_eq!(classify_request(&tight, &cfg), QosClass::Qos);
}

#[test]
fn assess_ladder() {
    let r = request(0, 1000.0, 10.0, 1.0);
    let reserve = ReserveStock { units: 3, unit_capacity: 50.0 };
    assert_eq!(assess(&r, 0.0, 100.0, reserve).unwrap().verdict, Verdict::AdmitNow);
    // Needs 125 MIPS over the window; 50 free leaves 75, so two units.
    assert_eq!(assess(&r, 2.0, 50.0, reserve).unwrap().verdict, Verdict::NeedExtra(2));
    assert_eq!(assess(&r, 2.0, 0.0, ReserveStock { units: 1, ..reserve }).unwrap().verdict, Verdict::Defer);
    assert_eq!(assess(&r, 11.0, 50.0, reserve).unwrap().verdict, Verdict::Defer);
    assert!(assess(&r, 0.0, -1.0, reserve).is_err());
}

fn sample(time: f64, resource: usize, reserve: usize) -> MonitorSample {
    MonitorSample {
        time,
        usage: vec![
            ResourceUsage { resource: 0, actual: 1.0, predicted: 1.0, missed: 0 },
            ResourceUsage { resource: 1, actual: 1.0, predicted: 1.0, missed: 0 },
        ]
        .into_iter()
        .map(|mut u| {
            if u.resource == resource {
                u.actual = 3.0;
            }
            u
        })
        .collect(),
        executed_ok: 10,
        missed_deadline: 0,
        provided_resources: 2,
        required_resources: 2,
        reserve_available: reserve,
    }
}

#[test]
fn escalation_over_every_three_breach_sequence() {
    for bits in 0..8u32 {
        for reserve in [0usize, 1] {
            let seq: Vec<usize> = (0..3).map(|i| ((bits >> i) & 1) as usize).collect();
            let mut pool = StaticPool::new(
                vec![Resource::new(0, 1000.0, 3.0), Resource::new(1, 1000.0, 3.0)],
                (0..reserve).map(|i| Resource::new(10 + i, 1000.0, 3.0)).collect(),
            );
            let mut kb = KnowledgeBase::new(Thresholds::default());
            let mut seen: BTreeMap<usize, u32> = BTreeMap::new();
            for (step, &r) in seq.iter().enumerate() {
                let plan = analyze_plan(&sample(step as f64 * 10.0, r, pool.reserve.len()), &kb);
                let n = seen.entry(r).or_default();
                let want: Vec<&str> = match *n {
                    0 => vec!["restart"],
                    1 => vec!["reallocate"],
                    _ if !pool.reserve.is_empty() => vec!["declare_dead", "allocate_new"],
                    _ => vec!["declare_dead", "alert"],
                };
                let got: Vec<&str> = plan.actions.iter().map(Action::name).collect();
                assert_eq!(got, want, "sequence {seq:?} step {step}");
                assert!(plan.actions.iter().filter_map(Action::resource).all(|x| x == r));
                *n += 1;
                execute(&plan, &mut pool, &mut kb, step as f64 * 10.0).unwrap();
                if *n == 3 {
                    assert_eq!(pool.state(r), Some(ResourceState::Dead));
                }
            }
            let logged: usize = seq
                .iter()
                .enumerate()
                .map(|(i, r)| if seq[..=i].iter().filter(|x| *x == r).count() == 3 { 2 } else { 1 })
                .sum();
            assert_eq!(kb.log.len(), logged);
        }
    }
}

#[test]
fn shortfall_pulls_from_reserve() {
    let mut s = sample(0.0, 9, 2);
    s.provided_resources = 1;
    s.required_resources = 4;
    let plan = analyze_plan(&s, &KnowledgeBase::default());
    assert_eq!(plan.actions, vec![Action::AllocateNew(2)]);
    s.reserve_available = 0;
    assert_eq!(plan_names(&s), vec!["alert"]);
    s.provided_resources = 4;
    assert_eq!(plan_names(&s), vec!["continue"]);
}

fn plan_names(s: &MonitorSample) -> Vec<&'static str> {
    analyze_plan(s, &KnowledgeBase::default()).actions.iter().map(Action::name).collect()
}

proptest! {
    #[test]
    fn priorities_are_a_permutation(mut reqs in requests()) {
        assign_priorities(&mut reqs);
        let mut p: Vec<u32> = reqs.iter().map(|r| r.priority).collect();
        p.sort_unstable();
        prop_assert_eq!(p, (0..reqs.len() as u32).collect::<Vec<_>>());
        for a in &reqs {
            for b in &reqs {
                if a.penalty_rate > b.penalty_rate {
                    prop_assert!(a.priority < b.priority);
                }
            }
        }
    }

    #[test]
    fn critical_work_drains_first(mut reqs in requests()) {
        let cfg = QosConfig::default();
        for r in &mut reqs {
            r.qos_class = classify_request(r, &cfg);
        }
        assign_priorities(&mut reqs);
        let mut q = QosQueues::new();
        for r in reqs.clone() {
            q.enqueue(r);
        }
        prop_assert_eq!(q.len(), reqs.len());
        let out = q.drain_all();
        let crit = out.iter().take_while(|r| r.qos_class == QosClass::Qos).count();
        prop_assert!(out[crit..].iter().all(|r| r.qos_class == QosClass::NonQos));
        prop_assert!(out[..crit].windows(2).all(|w| w[0].priority <= w[1].priority));
        let ids: Vec<u64> = out[crit..].iter().map(|r| r.id).collect();
        let mut sorted = ids.clone();
        sorted.sort_unstable();
        prop_assert_eq!(ids, sorted);
    }

    #[test]
    fn expiry_removes_exactly_the_late(reqs in requests(), now in 0.0f64..250.0) {
        let mut q = QosQueues::new();
        for r in reqs.clone() {
            q.enqueue(r);
        }
        let gone = q.remove_expired(now);
        prop_assert!(gone.iter().all(|r| r.deadline < now));
        prop_assert!(q.drain_all().iter().all(|r| r.deadline >= now));
        prop_assert_eq!(gone.len(), reqs.iter().filter(|r| r.deadline < now).count());
    }

    #[test]
    fn allocation_places_each_request_once(reqs in requests(), pool in pool(), now in 0.0f64..20.0, seed in any::<u64>()) {
        let cfg = CuckooConfig { max_generations: 8, ..CuckooConfig::default() };
        let a = allocate(&reqs, &pool, now, &cfg, seed);
        let mut ids: Vec<u64> = a.placements.iter().map(|p| p.request).chain(a.unassigned.iter().copied()).collect();
        ids.sort_unstable();
        prop_assert_eq!(ids, (0..reqs.len() as u64).collect::<Vec<_>>());
        let mut by_resource: BTreeMap<usize, Vec<(f64, f64)>> = BTreeMap::new();
        for p in &a.placements {
            let res = pool.iter().find(|r| r.id == p.resource).unwrap();
            let req = &reqs[p.request as usize];
            prop_assert_eq!(res.state, ResourceState::Active);
            prop_assert!(p.start >= now && p.start >= res.available_at);
            prop_assert!((p.finish - p.start - req.size / res.capacity).abs() < 1e-6);
            prop_assert!(p.finish <= req.deadline);
            by_resource.entry(p.resource).or_default().push((p.start, p.finish));
        }
        for spans in by_resource.values_mut() {
            spans.sort_by(|x, y| x.0.total_cmp(&y.0));
            prop_assert!(spans.windows(2).all(|w| w[0].1 <= w[1].0 + 1e-9));
        }
        prop_assert!((0.0..=1.0 + 1e-9).contains(&a.utilization));
        prop_assert_eq!(&a, &allocate(&reqs, &pool, now, &cfg, seed));
    }
}
