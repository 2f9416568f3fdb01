use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cellfree_core::lsfd::{level2_weights, nearly_optimal_lsfd, optimal_lsfd, sinr, sinr_closed_form, InterferenceSets, LsfdWeights};
use cellfree_core::power::{fixed_point_step, maxmin_fixed_point, monitored_sinrs, FixedPointOptions, PowerRule};
use cellfree_core::rng::complex_normal_vector;
use cellfree_core::synthetic::random_statistics;

fn instance(seed: u64, num_ues: usize, max_cluster: usize) -> cellfree_core::LsfdStatistics {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sizes: Vec<usize> = (0..num_ues).map(|_| rng.random_range(1..=max_cluster)).collect();
    random_statistics(&mut rng, num_ues, &sizes)
}

const OPTS: FixedPointOptions = FixedPointOptions { rho_u: 0.1, tol: 1e-3, max_iters: 500 };

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn optimal_weights_dominate(seed in any::<u64>(), num_ues in 1usize..6) {
        let stats = instance(seed, num_ues, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        let eta: Vec<f64> = (0..num_ues).map(|_| rng.random_range(0.01..0.1)).collect();
        for k in 0..num_ues {
            let best = sinr(&stats, &eta, k, &optimal_lsfd(&stats, &eta, k).unwrap().weights).unwrap();
            let m = stats.cluster_size(k);
            prop_assert!(sinr(&stats, &eta, k, &level2_weights(m)).unwrap() <= best * (1.0 + 1e-9));
            for _ in 0..20 {
                let a = complex_normal_vector(&mut rng, m);
                prop_assert!(sinr(&stats, &eta, k, &a).unwrap() <= best * (1.0 + 1e-9));
            }
        }
    }

    #[test]
    fn sinr_is_invariant_to_statistics_scaling(seed in any::<u64>(), c in 1e-6..1e6f64) {
        let stats = instance(seed, 3, 5);
        let scaled = stats.scaled(c);
        let eta = [0.05, 0.1, 0.02];
        for k in 0..3 {
            let a = sinr_closed_form(&stats, &eta, k, None).unwrap();
            let b = sinr_closed_form(&scaled, &eta, k, None).unwrap();
            prop_assert!((a - b).abs() <= 1e-9 * a);
        }
    }

    #[test]
    fn full_interference_sets_reduce_to_optimal(seed in any::<u64>(), num_ues in 1usize..5) {
        let stats = instance(seed, num_ues, 4);
        let eta = vec![0.1; num_ues];
        let full = InterferenceSets::full(num_ues);
        for k in 0..num_ues {
            prop_assert_eq!(
                optimal_lsfd(&stats, &eta, k).unwrap().weights,
                nearly_optimal_lsfd(&stats, &eta, k, &full.sets[k]).unwrap().weights
            );
        }
        let a = maxmin_fixed_point(&stats, PowerRule::Optimal, &OPTS).unwrap();
        let b = maxmin_fixed_point(&stats, PowerRule::NearlyOptimal(&full), &OPTS).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn iterates_stay_feasible(seed in any::<u64>(), num_ues in 1usize..6) {
        let stats = instance(seed, num_ues, 4);
        let mut eta = vec![OPTS.rho_u; num_ues];
        for _ in 0..15 {
            eta = fixed_point_step(&stats, &eta, PowerRule::Optimal, OPTS.rho_u).unwrap().eta;
            prop_assert!(eta.iter().all(|&p| p > 0.0 && p <= OPTS.rho_u));
            prop_assert_eq!(eta.iter().copied().fold(0.0, f64::max), OPTS.rho_u);
        }
    }

    #[test]
    fn converged_allocation_is_balanced_and_beats_alternatives(seed in any::<u64>(), num_ues in 1usize..4) {
        let stats = instance(seed, num_ues, 4);
        for rule in [PowerRule::Optimal, PowerRule::FixedWeights(&LsfdWeights::level2(&stats))] {
            let alloc = maxmin_fixed_point(&stats, rule, &OPTS).unwrap();
            prop_assert!(alloc.converged);
            let max = alloc.sinr.iter().copied().fold(0.0, f64::max);
            prop_assert!(max - alloc.min_sinr() <= OPTS.tol * max);
            // balanced only to within the tolerance, hence the allowance
            let ceiling = alloc.min_sinr() / (1.0 - 2.0 * OPTS.tol);
            let worst = |eta: &[f64]| monitored_sinrs(&stats, eta, rule).unwrap().into_iter().fold(f64::INFINITY, f64::min);
            prop_assert!(worst(&vec![OPTS.rho_u; num_ues]) <= ceiling);
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 7);
            for _ in 0..100 {
                let eta: Vec<f64> = (0..num_ues).map(|_| rng.random_range(1e-4..=1.0) * OPTS.rho_u).collect();
                prop_assert!(worst(&eta) <= ceiling);
            }
        }
    }
}
