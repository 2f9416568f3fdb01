//! Uplink simulation and optimization for user-centric cell-free massive
//! MIMO with dynamic cooperation clustering (DCC).
//!
//! APs estimate channels and combine locally; the CPU applies large-scale
//! fading decoding (LSFD), a second linear layer whose weights depend on
//! channel statistics only. The crate covers:
//!
//! - [`network`]: random drops, spatial correlation, pilots and clusters
//! - [`channel`]: Rayleigh fading, pilot reception, MMSE estimation
//! - [`combining`]: MR / partial MMSE combiners and Monte-Carlo statistics
//! - [`lsfd`]: optimal and nearly optimal LSFD, SINR and SE
//! - [`power`]: max-min fair power control by fixed-point iteration
//! - [`accounting`]: complexity and fronthaul counts, CDFs
//! - [`campaign`]: multi-setup runs and their CSV outputs

pub mod accounting;
pub mod campaign;
pub mod channel;
pub mod combining;
pub mod config;
pub mod error;
pub mod linalg;
pub mod lsfd;
pub mod network;
pub mod power;
pub mod rng;
pub mod synthetic;

pub use accounting::{empirical_cdf, fronthaul_stats_count, fronthaul_uplink_count, lsfd_complexity, Count, FronthaulReport, StatsMode};
pub use campaign::{run_campaign, run_campaign_with, write_outputs, CampaignOptions, CampaignResult};
pub use combining::{estimate_lsfd_statistics, LsfdStatistics};
pub use config::{CombinerKind, LsfdMode, PowerMode, SimConfig};
pub use error::{Error, Result};
pub use lsfd::{interference_set, InterferenceSets, LsfdWeights};
pub use network::{assign_pilots_and_clusters, generate_setup, DccAssignment, NetworkSetup};
pub use power::{grid_search_oracle, maxmin_fixed_point, FixedPointOptions, PowerAllocation, PowerRule};
