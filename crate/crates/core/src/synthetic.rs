//! Random but structurally valid LSFD statistics, for tests and benchmarks.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::combining::{LsfdStatistics, UeStatistics};
use crate::linalg::{c64, CMatrix};
use crate::rng::complex_normal;

/// Statistics for `num_ues` UEs where UE `k` is served by `cluster_sizes[k]`
/// APs. The desired link is stronger than the interfering ones; every second
/// moment exceeds the squared mean and every noise term is positive, so all
/// interference matrices are positive definite.
pub fn random_statistics<R: Rng + ?Sized>(rng: &mut R, num_ues: usize, cluster_sizes: &[usize]) -> LsfdStatistics {
    assert_eq!(cluster_sizes.len(), num_ues);
    let ues = cluster_sizes
        .iter()
        .enumerate()
        .map(|(k, &m)| {
            let gains: Vec<f64> = (0..m).map(|_| 10f64.powf(rng.random_range(-1.0..1.0))).collect();
            let mut mean = CMatrix::zeros(m, num_ues);
            let mut power = DMatrix::zeros(m, num_ues);
            for j in 0..m {
                for i in 0..num_ues {
                    let strength = if i == k { 1.0 } else { rng.random_range(0.0..0.5) };
                    let g = complex_normal(rng) * (gains[j] * strength);
                    let spread = rng.random_range(0.05..1.0) * gains[j] * gains[j] * strength * strength;
                    mean[(j, i)] = g;
                    power[(j, i)] = g.norm_sqr() + spread;
                }
            }
            let noise = DVector::from_fn(m, |j, _| rng.random_range(0.01..0.5) * gains[j] * gains[j]);
            UeStatistics {
                serving: (0..m).collect(),
                cross_mean: mean,
                cross_power: power,
                noise,
            }
        })
        .collect();
    LsfdStatistics::new(ues, 0)
}

/// Statistics where every UE is statistically identical: one AP per UE,
/// same desired and cross terms.
pub fn symmetric_statistics(num_ues: usize, cluster_size: usize) -> LsfdStatistics {
    let ues = (0..num_ues)
        .map(|k| {
            let mean = CMatrix::from_fn(cluster_size, num_ues, |_, i| if i == k { c64(1.0, 0.0) } else { c64(0.2, 0.0) });
            let power = DMatrix::from_fn(cluster_size, num_ues, |_, i| if i == k { 1.5 } else { 0.1 });
            UeStatistics {
                serving: (0..cluster_size).collect(),
                cross_mean: mean,
                cross_power: power,
                noise: DVector::from_element(cluster_size, 0.3),
            }
        })
        .collect();
    LsfdStatistics::new(ues, 0)
}
