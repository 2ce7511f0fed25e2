//! Cuckoo-optimization allocation of a request batch onto a resource pool.
//!
//! A habitat ([`ResourceSet`]) is a complete placement of the batch. Each
//! generation every habitat lays 5 to 15 eggs: an egg names a parent
//! resource in the habitat and a host resource whose capacity lies within
//! the egg-laying radius of the parent. Eggs whose host would consume too
//! much relative to the parent are culled, and each surviving egg hatches
//! into a child habitat that shifts work from parent to host. The
//! population is then truncated by profit.

mod kmeans;

use std::io::Write;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autonomic::resource_consumption;
use crate::qos::UserRequest;

pub use kmeans::{kmeans_resources, ResourceClusters, KMEANS_MAX_ITERATIONS};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CuckooError {
    #[error("resource {0} has zero uptime")]
    ZeroUptime(usize),
    #[error("total request count must be positive")]
    NoRequests,
    #[error("invalid bounds: i_u {i_u} < i_l {i_l}")]
    BadBounds { i_u: f64, i_l: f64 },
    #[error("gamma must be at least 1, got {0}")]
    BadGamma(f64),
    #[error("k = {k} is invalid for {n} resources")]
    BadK { k: usize, n: usize },
    #[error("csv: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ResourceState {
    Active,
    Restarting,
    Dead,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Resource {
    pub id: usize,
    /// MIPS.
    pub capacity: f64,
    /// Currency per busy hour.
    pub cost_rate: f64,
    pub uptime: f64,
    pub busy_time: f64,
    pub state: ResourceState,
    /// Earliest time the resource can start new work.
    pub available_at: f64,
}

impl Resource {
    pub fn new(id: usize, capacity: f64, cost_rate: f64) -> Self {
        Self {
            id,
            capacity,
            cost_rate,
            uptime: 0.0,
            busy_time: 0.0,
            state: ResourceState::Active,
            available_at: 0.0,
        }
    }
}

/// Raw utilization: the sum of per-resource busy/uptime ratios.
pub fn utilization(busy: &[f64], uptime: &[f64]) -> Result<f64, CuckooError> {
    busy.iter()
        .zip(uptime)
        .enumerate()
        .map(|(i, (b, u))| {
            if *u <= 0.0 {
                Err(CuckooError::ZeroUptime(i))
            } else {
                Ok(b / u)
            }
        })
        .sum()
}

/// Egg-laying radius: `gamma * executed / total * (i_u - i_l)`.
pub fn elr(executed: usize, total: usize, gamma: f64, i_u: f64, i_l: f64) -> Result<f64, CuckooError> {
    if total == 0 {
        return Err(CuckooError::NoRequests);
    }
    if i_u < i_l {
        return Err(CuckooError::BadBounds { i_u, i_l });
    }
    if gamma < 1.0 {
        return Err(CuckooError::BadGamma(gamma));
    }
    Ok(gamma * (executed as f64 / total as f64) * (i_u - i_l))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfitMode {
    /// Mean utilization minus a penalty per projected miss.
    Utilization,
    /// Negative busy cost of the new work.
    NegCost,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CuckooConfig {
    /// Population size kept after each generation.
    pub population: usize,
    pub min_eggs: usize,
    pub max_eggs: usize,
    pub gamma: f64,
    /// Capacity bounds for egg placement; default to the pool's max/min.
    pub i_u: Option<f64>,
    pub i_l: Option<f64>,
    pub consumption_threshold: f64,
    pub max_generations: usize,
    /// Generations without improvement before stopping, once nothing misses.
    pub patience: usize,
    /// Profit penalty per projected deadline miss.
    pub lambda: f64,
    pub profit_mode: ProfitMode,
    /// k for resource clustering; defaults to min(3, pool size).
    pub kmeans_k: Option<usize>,
}

impl Default for CuckooConfig {
    fn default() -> Self {
        Self {
            population: 10,
            min_eggs: 5,
            max_eggs: 15,
            gamma: 1.0,
            i_u: None,
            i_l: None,
            consumption_threshold: 1.5,
            max_generations: 50,
            patience: 10,
            lambda: 1.0,
            profit_mode: ProfitMode::Utilization,
            kmeans_k: None,
        }
    }
}

/// A new instance laid by a habitat.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Egg {
    /// Index (into the eligible pool) of the resource the work comes from.
    pub parent: usize,
    /// Index of the resource that would run it.
    pub host: usize,
    /// Sampled capacity that picked the host.
    pub capacity: f64,
    /// Host usage relative to the parent for the same work.
    pub consumption: f64,
}

/// One habitat: a full placement of the batch plus its evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResourceSet {
    pub id: usize,
    /// Eligible-pool index chosen for each batch request.
    pub placement: Vec<usize>,
    pub instances: Vec<Egg>,
    /// Mean per-resource utilization over the plan window.
    pub utilization: f64,
    pub raw_utilization: f64,
    pub elr: f64,
    pub profit: f64,
    pub missed: usize,
    pub makespan: f64,
    pub cost: f64,
    /// Set when every laid egg was culled.
    pub needs_replacement: bool,
}

/// A batch and the resources it may use.
#[derive(Debug, Clone)]
pub struct Problem<'a> {
    pub batch: &'a [UserRequest],
    pub resources: Vec<Resource>,
    pub now: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    pub start: Vec<f64>,
    pub finish: Vec<f64>,
}

impl Problem<'_> {
    fn clocks(&self) -> Vec<f64> {
        self.resources
            .iter()
            .map(|r| r.available_at.max(self.now))
            .collect()
    }

    /// Start and finish of every request when each resource runs its share
    /// in batch order.
    pub fn schedule(&self, placement: &[usize]) -> Schedule {
        let mut clock = self.clocks();
        let mut start = Vec::with_capacity(placement.len());
        let mut finish = Vec::with_capacity(placement.len());
        for (req, &r) in self.batch.iter().zip(placement) {
            let s = clock[r];
            let f = s + req.size / self.resources[r].capacity;
            clock[r] = f;
            start.push(s);
            finish.push(f);
        }
        Schedule { start, finish }
    }

    /// Fills in utilization, misses, cost and profit for `set`.
    pub fn evaluate(&self, set: &mut ResourceSet, cfg: &CuckooConfig) {
        let m = self.resources.len();
        let mut clock = self.clocks();
        let mut busy: Vec<f64> = clock.iter().map(|c| c - self.now).collect();
        let mut cost = 0.0;
        let mut missed = 0;
        for (req, &r) in self.batch.iter().zip(&set.placement) {
            let res = &self.resources[r];
            let service = req.size / res.capacity;
            clock[r] += service;
            busy[r] += service;
            cost += res.cost_rate * service / 3600.0;
            if clock[r] > req.deadline {
                missed += 1;
            }
        }
        let makespan = clock.iter().copied().fold(self.now, f64::max);
        let window = makespan - self.now;
        let raw = if window > 0.0 {
            let uptime = vec![window; m];
            utilization(&busy, &uptime).expect("window is positive")
        } else {
            0.0
        };
        set.raw_utilization = raw;
        set.utilization = raw / m as f64;
        set.missed = missed;
        set.makespan = makespan;
        set.cost = cost;
        set.profit = profit(set, cfg);
    }
}

/// Habitat fitness under the configured mode.
pub fn profit(set: &ResourceSet, cfg: &CuckooConfig) -> f64 {
    match cfg.profit_mode {
        ProfitMode::Utilization => set.utilization - cfg.lambda * set.missed as f64,
        ProfitMode::NegCost => -set.cost,
    }
}

/// Samples 5 to 15 eggs. Each picks a random parent among the resources the
/// habitat uses, perturbs its capacity by at most the habitat's ELR, and
/// settles on the eligible resource closest to that capacity (parent first,
/// then lowest index, on ties).
pub fn lay_instances(set: &ResourceSet, problem: &Problem, cfg: &CuckooConfig, rng: &mut ChaCha8Rng) -> Vec<Egg> {
    let (i_l, i_u) = capacity_bounds(&problem.resources, cfg);
    let mut used: Vec<usize> = set.placement.clone();
    used.sort_unstable();
    used.dedup();
    let count = rng.random_range(cfg.min_eggs..=cfg.max_eggs);
    let mut eggs = Vec::with_capacity(count);
    for _ in 0..count {
        let Some(&parent) = used.choose(rng) else {
            break;
        };
        let base = problem.resources[parent].capacity;
        let offset = if set.elr > 0.0 {
            rng.random_range(-set.elr..=set.elr)
        } else {
            0.0
        };
        let capacity = (base + offset).clamp(i_l, i_u.max(i_l));
        let host = nearest_capacity(&problem.resources, capacity, parent);
        let consumption = resource_consumption(1.0 / problem.resources[host].capacity, 1.0 / base)
            .unwrap_or(f64::INFINITY);
        eggs.push(Egg {
            parent,
            host,
            capacity,
            consumption,
        });
    }
    eggs
}

fn capacity_bounds(resources: &[Resource], cfg: &CuckooConfig) -> (f64, f64) {
    let lo = resources.iter().map(|r| r.capacity).fold(f64::INFINITY, f64::min);
    let hi = resources.iter().map(|r| r.capacity).fold(f64::NEG_INFINITY, f64::max);
    (cfg.i_l.unwrap_or(lo), cfg.i_u.unwrap_or(hi))
}

fn nearest_capacity(resources: &[Resource], capacity: f64, parent: usize) -> usize {
    let gap = |i: usize| (resources[i].capacity - capacity).abs();
    let mut best = parent;
    for i in 0..resources.len() {
        if gap(i) < gap(best) {
            best = i;
        }
    }
    best
}

/// Keeps the eggs whose consumption is within the threshold; the flag is set
/// when none survive.
pub fn cull_instances(eggs: Vec<Egg>, threshold: f64) -> (Vec<Egg>, bool) {
    let had_any = !eggs.is_empty();
    let kept: Vec<Egg> = eggs.into_iter().filter(|e| e.consumption <= threshold).collect();
    let flagged = had_any && kept.is_empty();
    (kept, flagged)
}

/// Builds the child habitat for one egg: one or two of the parent's
/// requests move to the host, and sometimes one of the host's requests
/// moves back.
fn hatch(parent: &ResourceSet, egg: &Egg, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut placement = parent.placement.clone();
    if egg.host == egg.parent {
        return placement;
    }
    let mut on_parent: Vec<usize> = (0..placement.len())
        .filter(|&i| placement[i] == egg.parent)
        .collect();
    let on_host: Vec<usize> = (0..placement.len())
        .filter(|&i| placement[i] == egg.host)
        .collect();
    on_parent.shuffle(rng);
    let moves = rng.random_range(1..=2).min(on_parent.len());
    for &i in &on_parent[..moves] {
        placement[i] = egg.host;
    }
    if !on_host.is_empty() && rng.random_bool(0.5) {
        let &back = on_host.choose(rng).expect("nonempty");
        placement[back] = egg.parent;
    }
    placement
}

/// Picks the habitat with the fewest projected misses, then the highest
/// profit, then the lowest id.
pub fn select_target(sets: &[ResourceSet]) -> Option<&ResourceSet> {
    sets.iter().min_by(|a, b| {
        a.missed
            .cmp(&b.missed)
            .then(b.profit.total_cmp(&a.profit))
            .then(a.id.cmp(&b.id))
    })
}

/// Drops habitats that only use dead resources, then keeps the
/// `max_population` most profitable (lower id first on ties).
pub fn remove_dead(mut sets: Vec<ResourceSet>, max_population: usize, dead: &[bool]) -> Vec<ResourceSet> {
    sets.retain(|s| s.placement.is_empty() || !s.placement.iter().all(|&r| dead[r]));
    sets.sort_by(|a, b| b.profit.total_cmp(&a.profit).then(a.id.cmp(&b.id)));
    sets.truncate(max_population);
    sets
}

fn sort_population(sets: &mut [ResourceSet]) {
    sets.sort_by(|a, b| b.utilization.total_cmp(&a.utilization).then(a.id.cmp(&b.id)));
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub generation: usize,
    pub best_profit: f64,
    pub mean_utilization: f64,
    pub missed: usize,
}

pub fn write_generation_csv<W: Write>(stats: &[GenerationStats], out: W) -> Result<(), CuckooError> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| CuckooError::Io(e.to_string());
    for s in stats {
        w.serialize(s).map_err(io)?;
    }
    w.flush().map_err(|e| CuckooError::Io(e.to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub request: u64,
    /// Id of the habitat the placement came from.
    pub set: usize,
    /// Resource id (not pool index).
    pub resource: usize,
    pub start: f64,
    pub finish: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    /// On-time placements in batch order.
    pub placements: Vec<Placement>,
    /// Requests whose projected finish is after their deadline, or that had
    /// no usable resource.
    pub unassigned: Vec<u64>,
    pub utilization: f64,
    pub generations: Vec<GenerationStats>,
}

impl Assignment {
    fn empty(batch: &[UserRequest]) -> Self {
        Self {
            placements: Vec::new(),
            unassigned: batch.iter().map(|r| r.id).collect(),
            utilization: 0.0,
            generations: Vec::new(),
        }
    }
}

fn greedy_eft(problem: &Problem) -> Vec<usize> {
    let mut clock = problem.clocks();
    problem
        .batch
        .iter()
        .map(|req| {
            let mut best = 0;
            let mut best_f = f64::INFINITY;
            for (i, r) in problem.resources.iter().enumerate() {
                let f = clock[i] + req.size / r.capacity;
                if f < best_f {
                    best = i;
                    best_f = f;
                }
            }
            clock[best] = best_f;
            best
        })
        .collect()
}

/// Routes larger requests to faster resource clusters, earliest finish
/// within the cluster.
fn cluster_routed(problem: &Problem, clusters: &ResourceClusters) -> Vec<usize> {
    let n = problem.batch.len();
    let k = clusters.k();
    let mut by_size: Vec<usize> = (0..n).collect();
    by_size.sort_by(|&a, &b| {
        problem.batch[a]
            .size
            .total_cmp(&problem.batch[b].size)
            .then(a.cmp(&b))
    });
    let mut group = vec![0; n];
    for (rank, &i) in by_size.iter().enumerate() {
        group[i] = rank * k / n.max(1);
    }
    let members: Vec<Vec<usize>> = (0..k).map(|c| clusters.members(c)).collect();
    let mut clock = problem.clocks();
    (0..n)
        .map(|i| {
            let req = &problem.batch[i];
            let pick = members[group[i]]
                .iter()
                .copied()
                .min_by(|&a, &b| {
                    let fa = clock[a] + req.size / problem.resources[a].capacity;
                    let fb = clock[b] + req.size / problem.resources[b].capacity;
                    fa.total_cmp(&fb).then(a.cmp(&b))
                })
                .expect("clusters are nonempty");
            clock[pick] += req.size / problem.resources[pick].capacity;
            pick
        })
        .collect()
}

fn random_placement(n: usize, m: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    (0..n).map(|_| rng.random_range(0..m)).collect()
}

fn new_set(id: usize, placement: Vec<usize>) -> ResourceSet {
    ResourceSet {
        id,
        placement,
        instances: Vec::new(),
        utilization: 0.0,
        raw_utilization: 0.0,
        elr: 0.0,
        profit: 0.0,
        missed: 0,
        makespan: 0.0,
        cost: 0.0,
        needs_replacement: false,
    }
}

/// Allocates `batch` (in the given order) onto the active resources of
/// `pool`, starting no earlier than `now`.
pub fn allocate(
    batch: &[UserRequest],
    pool: &[Resource],
    now: f64,
    cfg: &CuckooConfig,
    seed: u64,
) -> Assignment {
    let resources: Vec<Resource> = pool
        .iter()
        .filter(|r| r.state == ResourceState::Active && r.capacity > 0.0)
        .cloned()
        .collect();
    if batch.is_empty() {
        return Assignment {
            unassigned: Vec::new(),
            ..Assignment::empty(batch)
        };
    }
    if resources.is_empty() {
        return Assignment::empty(batch);
    }
    let problem = Problem {
        batch,
        resources,
        now,
    };
    let m = problem.resources.len();
    let n = batch.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (i_l, i_u) = capacity_bounds(&problem.resources, cfg);
    let dead = vec![false; m];
    let mut next_id = 0;
    let fresh = |placement: Vec<usize>, next_id: &mut usize| {
        *next_id += 1;
        new_set(*next_id - 1, placement)
    };

    let mut population = vec![fresh(greedy_eft(&problem), &mut next_id)];
    let k = cfg.kmeans_k.unwrap_or(3).min(m).max(1);
    if let Ok(clusters) = kmeans_resources(&problem.resources, k, rng.random()) {
        population.push(fresh(cluster_routed(&problem, &clusters), &mut next_id));
    }
    while population.len() < cfg.population.max(1) {
        let p = random_placement(n, m, &mut rng);
        population.push(fresh(p, &mut next_id));
    }
    let score = |set: &mut ResourceSet| {
        problem.evaluate(set, cfg);
        set.elr = elr(n - set.missed, n, cfg.gamma, i_u, i_l).unwrap_or(0.0);
    };
    population.iter_mut().for_each(score);
    sort_population(&mut population);

    let mut generations = Vec::new();
    let mut best_profit = population.iter().map(|s| s.profit).fold(f64::NEG_INFINITY, f64::max);
    let mut stale = 0;
    for generation in 1..=cfg.max_generations {
        let mut children = Vec::new();
        for set in population.iter_mut() {
            let eggs = lay_instances(set, &problem, cfg, &mut rng);
            let (kept, flagged) = cull_instances(eggs, cfg.consumption_threshold);
            set.needs_replacement = flagged;
            for egg in &kept {
                let mut child = fresh(hatch(set, egg, &mut rng), &mut next_id);
                score(&mut child);
                children.push(child);
            }
            set.instances = kept;
        }
        let flagged = population.iter().filter(|s| s.needs_replacement).count();
        for _ in 0..flagged {
            let mut child = fresh(random_placement(n, m, &mut rng), &mut next_id);
            score(&mut child);
            children.push(child);
        }
        population.extend(children);
        population = remove_dead(population, cfg.population.max(1), &dead);
        sort_population(&mut population);

        let best = select_by_profit(&population);
        generations.push(GenerationStats {
            generation,
            best_profit: best.profit,
            mean_utilization: best.utilization,
            missed: best.missed,
        });
        if best.profit > best_profit {
            best_profit = best.profit;
            stale = 0;
        } else {
            stale += 1;
        }
        if best.missed == 0 && stale >= cfg.patience {
            break;
        }
    }

    let chosen = select_target(&population).expect("population is nonempty");
    let sched = problem.schedule(&chosen.placement);
    let mut placements = Vec::new();
    let mut unassigned = Vec::new();
    for (i, req) in batch.iter().enumerate() {
        if sched.finish[i] > req.deadline {
            unassigned.push(req.id);
        } else {
            placements.push(Placement {
                request: req.id,
                set: chosen.id,
                resource: problem.resources[chosen.placement[i]].id,
                start: sched.start[i],
                finish: sched.finish[i],
            });
        }
    }
    Assignment {
        placements,
        unassigned,
        utilization: chosen.utilization,
        generations,
    }
}

fn select_by_profit(sets: &[ResourceSet]) -> &ResourceSet {
    sets.iter()
        .min_by(|a, b| b.profit.total_cmp(&a.profit).then(a.id.cmp(&b.id)))
        .expect("nonempty")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pool(caps: &[f64]) -> Vec<Resource> {
        caps.iter()
            .enumerate()
            .map(|(i, &c)| Resource::new(i, c, 1.0))
            .collect()
    }

    fn batch(sizes: &[f64], deadline: f64) -> Vec<UserRequest> {
        sizes
            .iter()
            .enumerate()
            .map(|(i, &s)| UserRequest::new(i as u64, 0.0, s, deadline))
            .collect()
    }

    #[test]
    fn utilization_examples() {
        assert_eq!(utilization(&[50.0], &[100.0]).unwrap(), 0.5);
        assert_eq!(utilization(&[0.0, 0.0], &[10.0, 10.0]).unwrap(), 0.0);
        assert_eq!(
            utilization(&[10.0, 20.0, 5.0], &[20.0, 40.0, 50.0]).unwrap(),
            0.5 + 0.5 + 0.1
        );
        assert_eq!(utilization(&[1.0], &[0.0]), Err(CuckooError::ZeroUptime(0)));
    }

    #[test]
    fn elr_examples() {
        assert_eq!(elr(10, 10, 1.0, 5.0, 1.0).unwrap(), 4.0);
        assert_eq!(elr(0, 10, 1.0, 5.0, 1.0).unwrap(), 0.0);
        assert!((elr(3, 10, 2.0, 5.0, 1.0).unwrap() - 2.4).abs() < 1e-15);
        assert_eq!(elr(1, 0, 1.0, 5.0, 1.0), Err(CuckooError::NoRequests));
    }

    fn eval_set(problem: &Problem, placement: Vec<usize>) -> ResourceSet {
        let mut s = new_set(0, placement);
        problem.evaluate(&mut s, &CuckooConfig::default());
        s
    }

    #[test]
    fn zero_radius_lays_clones() {
        let b = batch(&[100.0, 100.0], 1e9);
        let problem = Problem {
            batch: &b,
            resources: pool(&[100.0, 200.0, 300.0]),
            now: 0.0,
        };
        let set = eval_set(&problem, vec![1, 1]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let eggs = lay_instances(&set, &problem, &CuckooConfig::default(), &mut rng);
        assert!((5..=15).contains(&eggs.len()));
        assert!(eggs.iter().all(|e| e.host == 1 && e.capacity == 200.0 && e.consumption == 1.0));
    }

    #[test]
    fn eggs_stay_within_radius() {
        let b = batch(&[100.0; 4], 1e9);
        let caps: Vec<f64> = (1..=20).map(|i| i as f64 * 100.0).collect();
        let problem = Problem {
            batch: &b,
            resources: pool(&caps),
            now: 0.0,
        };
        let mut set = eval_set(&problem, vec![4, 9, 9, 14]);
        set.elr = 250.0;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut total = 0;
        while total < 1000 {
            for e in lay_instances(&set, &problem, &CuckooConfig::default(), &mut rng) {
                let parent = problem.resources[e.parent].capacity;
                assert!((e.capacity - parent).abs() <= 250.0);
                total += 1;
            }
        }
    }

    #[test]
    fn cull_filters_and_flags() {
        let egg = |c| Egg {
            parent: 0,
            host: 0,
            capacity: 1.0,
            consumption: c,
        };
        let (kept, flag) = cull_instances(vec![egg(1.0), egg(1.2)], 1.5);
        assert_eq!(kept.len(), 2);
        assert!(!flag);
        let (kept, flag) = cull_instances(vec![egg(2.0), egg(1.6)], 1.5);
        assert!(kept.is_empty() && flag);
        let (kept, _) = cull_instances(vec![egg(2.0), egg(0.5), egg(1.5)], 1.5);
        assert_eq!(kept.iter().map(|e| e.consumption).collect::<Vec<_>>(), vec![0.5, 1.5]);
    }

    #[test]
    fn busier_set_has_higher_profit() {
        let b = batch(&[100.0, 100.0], 1e9);
        let problem = Problem {
            batch: &b,
            resources: pool(&[100.0, 100.0]),
            now: 0.0,
        };
        let balanced = eval_set(&problem, vec![0, 1]);
        let stacked = eval_set(&problem, vec![0, 0]);
        assert_eq!(balanced.utilization, 1.0);
        assert_eq!(stacked.utilization, 0.5);
        assert!(balanced.profit > stacked.profit);
    }

    #[test]
    fn neg_cost_of_idle_set_is_zero() {
        let problem = Problem {
            batch: &[],
            resources: pool(&[100.0]),
            now: 0.0,
        };
        let mut s = new_set(0, vec![]);
        let cfg = CuckooConfig {
            profit_mode: ProfitMode::NegCost,
            ..CuckooConfig::default()
        };
        problem.evaluate(&mut s, &cfg);
        assert_eq!(s.profit, 0.0);
    }

    #[test]
    fn select_prefers_fewer_misses_then_profit() {
        let mut a = new_set(0, vec![]);
        let mut b = new_set(1, vec![]);
        a.missed = 2;
        a.profit = 5.0;
        assert_eq!(select_target(&[a.clone(), b.clone()]).unwrap().id, 1);
        a.missed = 0;
        b.profit = 1.0;
        assert_eq!(select_target(&[a, b]).unwrap().id, 0);
    }

    #[test]
    fn remove_dead_truncates_by_profit() {
        let sets: Vec<ResourceSet> = (0..5)
            .map(|i| {
                let mut s = new_set(i, vec![i % 2]);
                s.profit = i as f64;
                s
            })
            .collect();
        let kept = remove_dead(sets.clone(), 3, &[false, false]);
        assert_eq!(kept.iter().map(|s| s.id).collect::<Vec<_>>(), vec![4, 3, 2]);
        let kept = remove_dead(sets, 10, &[false, true]);
        assert_eq!(kept.iter().map(|s| s.id).collect::<Vec<_>>(), vec![4, 2, 0]);
    }

    #[test]
    fn trivial_batch_fits() {
        let b = batch(&[100.0], 10.0);
        let a = allocate(&b, &pool(&[100.0]), 0.0, &CuckooConfig::default(), 1);
        assert!(a.unassigned.is_empty());
        assert_eq!(a.placements[0].finish, 1.0);
    }

    #[test]
    fn allocation_is_deterministic() {
        let sizes: Vec<f64> = (0..30).map(|i| 100.0 + (i * 53 % 17) as f64 * 40.0).collect();
        let b = batch(&sizes, 40.0);
        let p = pool(&[100.0, 250.0, 400.0, 80.0]);
        let x = allocate(&b, &p, 0.0, &CuckooConfig::default(), 9);
        let y = allocate(&b, &p, 0.0, &CuckooConfig::default(), 9);
        assert_eq!(x, y);
        assert!(!x.generations.is_empty());
    }

    #[test]
    fn never_uses_inactive_resources() {
        let b = batch(&[100.0; 6], 1e9);
        let mut p = pool(&[100.0, 1000.0, 500.0]);
        p[1].state = ResourceState::Dead;
        p[2].state = ResourceState::Restarting;
        let a = allocate(&b, &p, 0.0, &CuckooConfig::default(), 2);
        assert!(a.placements.iter().all(|pl| pl.resource == 0));
        p[0].state = ResourceState::Dead;
        let a = allocate(&b, &p, 0.0, &CuckooConfig::default(), 2);
        assert_eq!(a.unassigned.len(), 6);
    }
}
