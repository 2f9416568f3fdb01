//! Fixtures shared by the benchmarks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use cellfree_core::config::SimConfig;
use cellfree_core::network::{assign_pilots_and_clusters, generate_setup, DccAssignment, NetworkSetup};
use cellfree_core::synthetic::random_statistics;
use cellfree_core::{estimate_lsfd_statistics, LsfdStatistics};

/// One desk-scale setup with its clusters and full-power statistics.
pub struct DeskFixture {
    pub config: SimConfig,
    pub setup: NetworkSetup,
    pub dcc: DccAssignment,
    pub stats: LsfdStatistics,
}

pub fn desk_fixture(trials: usize) -> DeskFixture {
    let config = SimConfig { mc_trials: trials, ..SimConfig::desk_scale() };
    let setup = generate_setup(&config, 0);
    let dcc = assign_pilots_and_clusters(&setup, config.tau_p);
    let stats = estimate_lsfd_statistics(&setup, &dcc, &config, &vec![config.rho_u; config.num_ues]).expect("desk statistics");
    DeskFixture { config, setup, dcc, stats }
}

/// Synthetic statistics where every UE is served by `cluster_size` APs.
pub fn synthetic(num_ues: usize, cluster_size: usize) -> LsfdStatistics {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    random_statistics(&mut rng, num_ues, &vec![cluster_size; num_ues])
}
