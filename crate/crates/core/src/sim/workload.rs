use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use super::config::{ArrivalMode, Range, SimConfig};
use crate::cuckoo::Resource;
use crate::qos::{classify_request, UserRequest};

const WORKLOAD_STREAM: u64 = 1;
const RESOURCE_STREAM: u64 = 2;

/// A generated request plus the data-volume attributes it carries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Workload {
    pub request: UserRequest,
    pub memory_mb: f64,
    pub file_size_mb: f64,
    pub output_size_mb: f64,
}

impl Workload {
    /// Input plus output volume in bits.
    pub fn bits(&self) -> f64 {
        (self.file_size_mb + self.output_size_mb) * 8e6
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResourceSpec {
    pub resource: Resource,
    pub bandwidth: f64,
}

fn sample(rng: &mut ChaCha8Rng, r: Range) -> f64 {
    if r.max > r.min {
        rng.random_range(r.min..r.max)
    } else {
        r.min
    }
}

pub(crate) fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Draws `cfg.workload_count` requests. Ids run from 0 in submission order.
pub fn generate_workloads(cfg: &SimConfig) -> Vec<Workload> {
    let mut rng = stream_rng(cfg.seed, WORKLOAD_STREAM);
    let gap = match cfg.arrival {
        ArrivalMode::Batch => None,
        ArrivalMode::Poisson { rate } => Some(Exp::new(rate).expect("validated rate")),
    };
    let mut clock = 0.0;
    let mut out = Vec::with_capacity(cfg.workload_count);
    for id in 0..cfg.workload_count as u64 {
        if let Some(exp) = &gap {
            if id > 0 {
                clock += exp.sample(&mut rng);
            }
        }
        let size_mb = cfg.size_base_mb * (1.0 + sample(&mut rng, cfg.size_inflation));
        let relative_deadline = sample(&mut rng, cfg.deadline);
        let budget = sample(&mut rng, cfg.workload_cost);
        let memory_mb = sample(&mut rng, cfg.memory_mb);
        let file_size_mb = cfg.file_size_base_mb * (1.0 + sample(&mut rng, cfg.file_size_inflation));
        let output_size_mb = cfg.output_size_base_mb * (1.0 + sample(&mut rng, cfg.output_size_inflation));
        let penalised = rng.random_bool(cfg.penalty_fraction);

        let mut request = UserRequest::new(id, clock, size_mb * cfg.mi_per_mb, clock + relative_deadline);
        request.budget = budget;
        if penalised {
            request.penalty_rate = cfg.penalty.rate_for(crate::qos::QosClass::Qos);
        }
        request.qos_class = classify_request(&request, &cfg.qos);
        out.push(Workload {
            request,
            memory_mb,
            file_size_mb,
            output_size_mb,
        });
    }
    out
}

/// Draws the resource pool. Ids run from 0.
pub fn generate_resources(cfg: &SimConfig) -> Vec<ResourceSpec> {
    let mut rng = stream_rng(cfg.seed, RESOURCE_STREAM);
    (0..cfg.resource_count)
        .map(|id| {
            let capacity = sample(&mut rng, cfg.pe_rating) * cfg.pes_per_machine as f64;
            let cost_rate = sample(&mut rng, cfg.resource_cost_rate);
            let bandwidth = sample(&mut rng, cfg.bandwidth);
            ResourceSpec {
                resource: Resource::new(id, capacity, cost_rate),
                bandwidth,
            }
        })
        .collect()
}
