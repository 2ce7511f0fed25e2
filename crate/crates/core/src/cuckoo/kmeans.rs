use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{CuckooError, Resource};

pub const KMEANS_MAX_ITERATIONS: usize = 100;

/// Clustering of resources on (capacity, cost rate).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResourceClusters {
    /// Cluster of each input resource. Clusters are numbered by ascending
    /// centroid capacity.
    pub labels: Vec<usize>,
    /// Normalized (capacity, cost) centroids.
    pub centroids: Vec<[f64; 2]>,
    pub iterations: usize,
}

impl ResourceClusters {
    pub fn k(&self) -> usize {
        self.centroids.len()
    }

    pub fn members(&self, cluster: usize) -> Vec<usize> {
        (0..self.labels.len())
            .filter(|&i| self.labels[i] == cluster)
            .collect()
    }
}

fn normalize(values: impl Iterator<Item = f64> + Clone) -> Vec<f64> {
    let lo = values.clone().fold(f64::INFINITY, f64::min);
    let hi = values.clone().fold(f64::NEG_INFINITY, f64::max);
    values
        .map(|v| if hi > lo { (v - lo) / (hi - lo) } else { 0.0 })
        .collect()
}

fn dist2(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

fn nearest(p: [f64; 2], centroids: &[[f64; 2]]) -> usize {
    let mut best = 0;
    for (c, cen) in centroids.iter().enumerate() {
        if dist2(p, *cen) < dist2(p, centroids[best]) {
            best = c;
        }
    }
    best
}

/// Lloyd's k-means on min-max normalized (capacity, cost rate) with
/// farthest-first seeding from a random first point. Stops when
/// assignments no longer change or after [`KMEANS_MAX_ITERATIONS`].
pub fn kmeans_resources(
    resources: &[Resource],
    k: usize,
    seed: u64,
) -> Result<ResourceClusters, CuckooError> {
    let n = resources.len();
    if k == 0 {
        return Err(CuckooError::BadK { k, n });
    }
    if k > n {
        return Err(CuckooError::BadK { k, n });
    }
    let caps = normalize(resources.iter().map(|r| r.capacity));
    let costs = normalize(resources.iter().map(|r| r.cost_rate));
    let points: Vec<[f64; 2]> = caps.into_iter().zip(costs).map(|(a, b)| [a, b]).collect();

    let (mut labels, mut centroids, iterations) = if k == n {
        ((0..n).collect::<Vec<_>>(), points.clone(), 0)
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut centroids = vec![points[rng.random_range(0..n)]];
        while centroids.len() < k {
            let far = (0..n)
                .max_by(|&a, &b| {
                    let da = centroids.iter().map(|c| dist2(points[a], *c)).fold(f64::INFINITY, f64::min);
                    let db = centroids.iter().map(|c| dist2(points[b], *c)).fold(f64::INFINITY, f64::min);
                    da.total_cmp(&db).then(b.cmp(&a))
                })
                .expect("n > 0");
            centroids.push(points[far]);
        }
        let mut labels: Vec<usize> = points.iter().map(|p| nearest(*p, &centroids)).collect();
        let mut iterations = 0;
        while iterations < KMEANS_MAX_ITERATIONS {
            iterations += 1;
            for (c, cen) in centroids.iter_mut().enumerate() {
                let members: Vec<&[f64; 2]> = points
                    .iter()
                    .zip(&labels)
                    .filter(|(_, &l)| l == c)
                    .map(|(p, _)| p)
                    .collect();
                if !members.is_empty() {
                    let m = members.len() as f64;
                    *cen = [
                        members.iter().map(|p| p[0]).sum::<f64>() / m,
                        members.iter().map(|p| p[1]).sum::<f64>() / m,
                    ];
                }
            }
            let next: Vec<usize> = points.iter().map(|p| nearest(*p, &centroids)).collect();
            if next == labels {
                break;
            }
            labels = next;
        }
        (labels, centroids, iterations)
    };

    // Renumber by ascending centroid capacity for a canonical order.
    let mut order: Vec<usize> = (0..centroids.len()).collect();
    order.sort_by(|&a, &b| {
        centroids[a][0]
            .total_cmp(&centroids[b][0])
            .then(centroids[a][1].total_cmp(&centroids[b][1]))
            .then(a.cmp(&b))
    });
    let mut rank = vec![0; order.len()];
    for (new, &old) in order.iter().enumerate() {
        rank[old] = new;
    }
    labels.iter_mut().for_each(|l| *l = rank[*l]);
    centroids = order.iter().map(|&o| centroids[o]).collect();
    Ok(ResourceClusters {
        labels,
        centroids,
        iterations,
    })
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

    #[test]
    fn k_equals_n_gives_singletons() {
        let c = kmeans_resources(&pool(&[300.0, 100.0, 200.0]), 3, 7).unwrap();
        assert_eq!(c.labels, vec![2, 0, 1]);
    }

    #[test]
    fn separated_groups_are_recovered() {
        let caps = [100.0, 120.0, 110.0, 3900.0, 4000.0, 3950.0];
        for seed in 0..10 {
            let c = kmeans_resources(&pool(&caps), 2, seed).unwrap();
            assert_eq!(c.labels, vec![0, 0, 0, 1, 1, 1]);
        }
    }

    #[test]
    fn bad_k() {
        assert!(kmeans_resources(&pool(&[1.0]), 0, 0).is_err());
        assert!(kmeans_resources(&pool(&[1.0]), 2, 0).is_err());
    }

    #[test]
    fn deterministic_for_seed() {
        let caps: Vec<f64> = (0..20).map(|i| ((i * 37) % 17) as f64 * 100.0 + 100.0).collect();
        let a = kmeans_resources(&pool(&caps), 3, 5).unwrap();
        let b = kmeans_resources(&pool(&caps), 3, 5).unwrap();
        assert_eq!(a, b);
    }
}
