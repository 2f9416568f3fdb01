use num_rational::Ratio;
use proptest::prelude::*;

use cellfree_core::accounting::{empirical_cdf, fronthaul_stats_count, fronthaul_uplink_count, lsfd_complexity, StatsMode};
use cellfree_core::config::SimConfig;
use cellfree_core::lsfd::InterferenceSets;
use cellfree_core::network::{assign_pilots_and_clusters, generate_setup};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn dcc_loads_never_exceed_all_serving(seed in any::<u64>(), num_aps in 1usize..15, num_ues in 1usize..15, tau_p in 1usize..6, r in 1usize..6) {
        let cfg = SimConfig { num_aps, num_ues, tau_p, seed, ..SimConfig::default() };
        let setup = generate_setup(&cfg, 0);
        let dcc = assign_pilots_and_clusters(&setup, tau_p);
        let all = dcc.to_all_serving();
        let (tau_c, lk) = (cfg.tau_c, (num_aps * num_ues) as u64);

        let (uplink, _) = fronthaul_uplink_count(&dcc, tau_c, tau_p);
        prop_assert!(uplink <= (tau_c - tau_p) as u64 * lk);
        prop_assert_eq!(fronthaul_uplink_count(&all, tau_c, tau_p).0, (tau_c - tau_p) as u64 * lk);

        let (opt, _) = fronthaul_stats_count(&dcc, StatsMode::Optimal);
        prop_assert!(opt <= Ratio::new(3 * num_ues as u64 + 1, 2) * lk);

        let sets = InterferenceSets::new(&dcc, r);
        let (nopt, _) = fronthaul_stats_count(&dcc, StatsMode::NearlyOptimal(&sets));
        prop_assert!(nopt <= opt);
        prop_assert_eq!(nopt == opt, sets.is_full());
    }

    #[test]
    fn cdf_is_monotone_and_ends_at_one(samples in prop::collection::vec(-1e3..1e3f64, 1..200)) {
        let cdf = empirical_cdf(&samples).unwrap();
        prop_assert_eq!(cdf.len(), samples.len());
        for w in cdf.windows(2) {
            prop_assert!(w[0].0 <= w[1].0 && w[0].1 < w[1].1);
        }
        prop_assert!(cdf[0].1 > 0.0);
        prop_assert_eq!(cdf.last().unwrap().1, 1.0);
    }

    #[test]
    fn complexity_is_the_exact_cholesky_count(m in 1u64..2000) {
        let c = lsfd_complexity(m);
        prop_assert_eq!(3 * c, 3 * m * m + m * m * m - m);
    }
}
