//! Multi-setup Monte-Carlo campaigns and their CSV/JSON outputs.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::accounting::{count_to_decimal, empirical_cdf, FronthaulReport, ReportAverage, StatsMode};
use crate::combining::{estimate_lsfd_statistics, statistics_cache_key, LsfdStatistics};
use crate::config::{LsfdMode, PowerMode, SimConfig};
use crate::error::{Error, Result};
use crate::lsfd::{level2_weights, nearly_optimal_lsfd, optimal_lsfd, se, sinr, sinr_closed_form, InterferenceSets, LsfdWeights};
use crate::network::{assign_pilots_and_clusters, generate_setup, DccAssignment};
use crate::power::{maxmin_fixed_point, FixedPointOptions, IterationRecord, PowerRule};

pub const PER_UE_FILE: &str = "per_ue.csv";
pub const CDF_FILE: &str = "cdf.csv";
pub const ACCOUNTING_FILE: &str = "accounting.csv";
pub const TRACE_FILE: &str = "convergence.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq)]
pub struct UeRecord {
    pub setup: u64,
    pub ue: usize,
    pub mode: LsfdMode,
    pub power: PowerMode,
    /// Effective SINR achieved by the mode's weights.
    pub sinr: f64,
    pub se: f64,
    /// For the nearly optimal mode, the objective balanced by its power
    /// control (interference restricted to the UE's set).
    pub objective: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTrace {
    pub setup: u64,
    pub mode: LsfdMode,
    pub iterations: usize,
    pub converged: bool,
    pub history: Vec<IterationRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SetupResult {
    pub setup: u64,
    pub records: Vec<UeRecord>,
    pub reports: Vec<(LsfdMode, FronthaulReport)>,
    pub traces: Vec<ConvergenceTrace>,
}

#[derive(Debug, Clone, Default)]
pub struct CampaignOptions {
    /// Directory of cached statistics (JSON), keyed by configuration digest.
    pub stats_cache: Option<PathBuf>,
}

fn cached_statistics(config: &SimConfig, setup_index: u64, variant: &str, cache: Option<&Path>, compute: impl FnOnce() -> Result<LsfdStatistics>) -> Result<LsfdStatistics> {
    let Some(dir) = cache else {
        return compute();
    };
    let path = dir.join(format!("{}.json", statistics_cache_key(config, setup_index, variant)));
    if let Ok(text) = fs::read_to_string(&path) {
        if let Ok(stats) = LsfdStatistics::from_json(&text) {
            return Ok(stats);
        }
    }
    let stats = compute()?;
    fs::create_dir_all(dir)?;
    fs::write(&path, stats.to_json()?)?;
    Ok(stats)
}

/// Runs every configured mode and power rule on one setup.
pub fn run_setup(config: &SimConfig, setup_index: u64, options: &CampaignOptions) -> Result<SetupResult> {
    let setup = generate_setup(config, setup_index);
    let dcc = assign_pilots_and_clusters(&setup, config.tau_p);
    let full_power = vec![config.rho_u; config.num_ues];
    let cache = options.stats_cache.as_deref();

    let needs_dcc = config.lsfd_modes.iter().any(|m| *m != LsfdMode::OriginalOpt);
    let needs_all = config.lsfd_modes.contains(&LsfdMode::OriginalOpt);
    let dcc_stats = if needs_dcc {
        Some(cached_statistics(config, setup_index, "dcc", cache, || estimate_lsfd_statistics(&setup, &dcc, config, &full_power))?)
    } else {
        None
    };
    let all_dcc = dcc.to_all_serving();
    let all_stats = if needs_all {
        Some(cached_statistics(config, setup_index, "all-serving", cache, || estimate_lsfd_statistics(&setup, &all_dcc, config, &full_power))?)
    } else {
        None
    };
    let sets = InterferenceSets::new(&dcc, config.r_design);
    let opts = FixedPointOptions::from_config(config);

    let mut out = SetupResult {
        setup: setup_index,
        records: Vec::new(),
        reports: Vec::new(),
        traces: Vec::new(),
    };
    for &mode in &config.lsfd_modes {
        let (stats, mode_dcc): (&LsfdStatistics, &DccAssignment) = match mode {
            LsfdMode::OriginalOpt => (all_stats.as_ref().unwrap(), &all_dcc),
            _ => (dcc_stats.as_ref().unwrap(), &dcc),
        };
        let report = match mode {
            LsfdMode::Level2 => FronthaulReport::new(mode_dcc, config.tau_c, config.tau_p, StatsMode::None, false),
            LsfdMode::Level3Opt | LsfdMode::OriginalOpt => FronthaulReport::new(mode_dcc, config.tau_c, config.tau_p, StatsMode::Optimal, true),
            LsfdMode::Level3Nopt => FronthaulReport::new(mode_dcc, config.tau_c, config.tau_p, StatsMode::NearlyOptimal(&sets), true),
        };
        out.reports.push((mode, report));

        let level2 = LsfdWeights::level2(stats);
        let rule = match mode {
            LsfdMode::Level2 => PowerRule::FixedWeights(&level2),
            LsfdMode::Level3Opt | LsfdMode::OriginalOpt => PowerRule::Optimal,
            LsfdMode::Level3Nopt => PowerRule::NearlyOptimal(&sets),
        };
        for &power in &config.power_modes {
            let eta = match power {
                PowerMode::Full => full_power.clone(),
                PowerMode::MaxMin => {
                    let alloc = maxmin_fixed_point(stats, rule, &opts)?;
                    out.traces.push(ConvergenceTrace {
                        setup: setup_index,
                        mode,
                        iterations: alloc.iterations,
                        converged: alloc.converged,
                        history: alloc.history,
                    });
                    alloc.eta
                }
            };
            for k in 0..config.num_ues {
                let (value, objective) = match mode {
                    LsfdMode::Level2 => (sinr(stats, &eta, k, &level2_weights(stats.cluster_size(k)))?, None),
                    LsfdMode::Level3Opt | LsfdMode::OriginalOpt => (sinr(stats, &eta, k, &optimal_lsfd(stats, &eta, k)?.weights)?, None),
                    LsfdMode::Level3Nopt => {
                        let a = nearly_optimal_lsfd(stats, &eta, k, &sets.sets[k])?.weights;
                        (sinr(stats, &eta, k, &a)?, Some(sinr_closed_form(stats, &eta, k, Some(&sets.sets[k]))?))
                    }
                };
                out.records.push(UeRecord {
                    setup: setup_index,
                    ue: k,
                    mode,
                    power,
                    sinr: value,
                    se: se(value, config.tau_c, config.tau_p),
                    objective,
                });
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct CampaignResult {
    pub config: SimConfig,
    pub setups: Vec<SetupResult>,
    pub failures: Vec<(u64, String)>,
}

impl CampaignResult {
    pub fn records(&self) -> impl Iterator<Item = &UeRecord> {
        self.setups.iter().flat_map(|s| s.records.iter())
    }

    pub fn traces(&self) -> impl Iterator<Item = &ConvergenceTrace> {
        self.setups.iter().flat_map(|s| s.traces.iter())
    }

    /// Per-UE SE samples of one mode and power rule, in setup/UE order.
    pub fn se_samples(&self, mode: LsfdMode, power: PowerMode) -> Vec<f64> {
        self.records()
            .filter(|r| r.mode == mode && r.power == power)
            .map(|r| r.se)
            .collect()
    }

    /// Minimum SE of each setup.
    pub fn min_se_per_setup(&self, mode: LsfdMode, power: PowerMode) -> Vec<(u64, f64)> {
        let mut out: BTreeMap<u64, f64> = BTreeMap::new();
        for r in self.records().filter(|r| r.mode == mode && r.power == power) {
            let e = out.entry(r.setup).or_insert(f64::INFINITY);
            *e = e.min(r.se);
        }
        out.into_iter().collect()
    }

    pub fn accounting(&self) -> BTreeMap<LsfdMode, ReportAverage> {
        let mut out: BTreeMap<LsfdMode, ReportAverage> = BTreeMap::new();
        for s in &self.setups {
            for (mode, report) in &s.reports {
                out.entry(*mode).or_default().add(report);
            }
        }
        out
    }

    /// `setup,ue,mode,power_mode,sinr,se_bits_per_hz`
    pub fn per_ue_csv(&self) -> String {
        let mut out = String::from("setup,ue,mode,power_mode,sinr,se_bits_per_hz\n");
        for r in self.records() {
            let _ = writeln!(out, "{},{},{},{},{},{}", r.setup, r.ue, r.mode, r.power, r.sinr, r.se);
        }
        out
    }

    /// `mode,value,prob`. Per-UE SE curves are labelled `<mode>:<power>`,
    /// per-setup minimum SE curves `min:<mode>:<power>`.
    pub fn cdf_csv(&self) -> Result<String> {
        let mut out = String::from("mode,value,prob\n");
        for &mode in &self.config.lsfd_modes {
            for &power in &self.config.power_modes {
                let samples = self.se_samples(mode, power);
                if samples.is_empty() {
                    continue;
                }
                for (v, p) in empirical_cdf(&samples)? {
                    let _ = writeln!(out, "{mode}:{power},{v},{p}");
                }
                let mins: Vec<f64> = self.min_se_per_setup(mode, power).into_iter().map(|(_, v)| v).collect();
                for (v, p) in empirical_cdf(&mins)? {
                    let _ = writeln!(out, "min:{mode}:{power},{v},{p}");
                }
            }
        }
        Ok(out)
    }

    /// `mode,metric,per_ue,total`, averaged over setups.
    pub fn accounting_csv(&self) -> String {
        let mut out = String::from("mode,metric,per_ue,total\n");
        for (mode, avg) in self.accounting() {
            for (metric, per_ue, total) in avg.rows() {
                let _ = writeln!(out, "{mode},{metric},{},{}", count_to_decimal(&per_ue), count_to_decimal(&total));
            }
        }
        out
    }

    /// `setup,mode,iteration,min_sinr,max_sinr,spread`
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("setup,mode,iteration,min_sinr,max_sinr,spread\n");
        for t in self.traces() {
            for h in &t.history {
                let _ = writeln!(out, "{},{},{},{},{},{}", t.setup, t.mode, h.iteration, h.min_sinr, h.max_sinr, h.spread);
            }
        }
        out
    }
}

/// Runs `config.n_setups` setups. Failed setups are skipped and recorded;
/// the campaign fails when more than 1% of them fail.
pub fn run_campaign(config: &SimConfig) -> Result<CampaignResult> {
    run_campaign_with(config, &CampaignOptions::default())
}

pub fn run_campaign_with(config: &SimConfig, options: &CampaignOptions) -> Result<CampaignResult> {
    config.validate()?;
    let results: Vec<Result<SetupResult>> = (0..config.n_setups as u64)
        .into_par_iter()
        .map(|idx| run_setup(config, idx, options))
        .collect();
    let mut setups = Vec::new();
    let mut failures = Vec::new();
    for (idx, r) in results.into_iter().enumerate() {
        match r {
            Ok(s) => setups.push(s),
            Err(e) => failures.push((idx as u64, e.to_string())),
        }
    }
    if failures.len() as f64 > 0.01 * config.n_setups as f64 {
        return Err(Error::CampaignFailed {
            failed: failures.len(),
            total: config.n_setups,
        });
    }
    Ok(CampaignResult {
        config: config.clone(),
        setups,
        failures,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct FailedSetup {
    pub setup: u64,
    pub error: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub version: String,
    pub config: SimConfig,
    pub setups_completed: usize,
    pub failed_setups: Vec<FailedSetup>,
    pub fixed_point_max_iterations: Option<usize>,
    pub fixed_point_unconverged: usize,
    /// SHA-256 of every written CSV file.
    pub digests: BTreeMap<String, String>,
}

fn sha256_hex(data: &[u8]) -> String {
    hex::encode(Sha256::digest(data))
}

/// Writes the CSV files and the JSON manifest into `dir`.
pub fn write_outputs(result: &CampaignResult, dir: &Path, with_trace: bool) -> Result<Manifest> {
    fs::create_dir_all(dir)?;
    let mut files = vec![
        (PER_UE_FILE, result.per_ue_csv()),
        (CDF_FILE, result.cdf_csv()?),
        (ACCOUNTING_FILE, result.accounting_csv()),
    ];
    if with_trace {
        files.push((TRACE_FILE, result.trace_csv()));
    }
    let mut digests = BTreeMap::new();
    for (name, body) in &files {
        fs::write(dir.join(name), body)?;
        digests.insert(name.to_string(), sha256_hex(body.as_bytes()));
    }
    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: result.config.clone(),
        setups_completed: result.setups.len(),
        failed_setups: result
            .failures
            .iter()
            .map(|(setup, error)| FailedSetup { setup: *setup, error: error.clone() })
            .collect(),
        fixed_point_max_iterations: result.traces().map(|t| t.iterations).max(),
        fixed_point_unconverged: result.traces().filter(|t| !t.converged).count(),
        digests,
    };
    fs::write(dir.join(MANIFEST_FILE), serde_json::to_string_pretty(&manifest)?)?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SimConfig {
        SimConfig {
            num_aps: 8,
            num_ues: 4,
            tau_p: 2,
            mc_trials: 32,
            n_setups: 3,
            lsfd_modes: vec![LsfdMode::Level2, LsfdMode::Level3Opt, LsfdMode::Level3Nopt, LsfdMode::OriginalOpt],
            power_modes: vec![PowerMode::Full, PowerMode::MaxMin],
            ..SimConfig::default()
        }
    }

    #[test]
    fn optimal_dominates_level2_per_ue() {
        let res = run_campaign(&small()).unwrap();
        assert!(res.failures.is_empty());
        let l2 = res.se_samples(LsfdMode::Level2, PowerMode::Full);
        let opt = res.se_samples(LsfdMode::Level3Opt, PowerMode::Full);
        assert_eq!(l2.len(), 12);
        for (a, b) in opt.iter().zip(&l2) {
            assert!(*a >= *b - 1e-9 * a.abs());
        }
    }

    #[test]
    fn distinct_setups_have_distinct_geometry() {
        let cfg = small();
        let a = generate_setup(&cfg, 0);
        let b = generate_setup(&cfg, 1);
        assert_ne!(a.ue_positions, b.ue_positions);
        let c = generate_setup(&SimConfig { seed: 1, ..cfg }, 0);
        assert_ne!(a.ue_positions, c.ue_positions);
    }

    #[test]
    fn csv_outputs_have_expected_shape() {
        let res = run_campaign(&small()).unwrap();
        let per_ue = res.per_ue_csv();
        // 3 setups x 4 UEs x 4 modes x 2 power rules
        assert_eq!(per_ue.lines().count(), 1 + 3 * 4 * 4 * 2);
        let cdf = res.cdf_csv().unwrap();
        assert!(cdf.lines().any(|l| l.starts_with("min:level3-opt:maxmin,")));
        let acc = res.accounting_csv();
        assert_eq!(acc.lines().count(), 1 + 4 * 3);
        assert!(acc.contains("level2,lsfd_mults,0,0"));
        // original mode: L = 8 APs serve all 4 UEs
        let (tau_c, tau_p) = (200, 2);
        assert!(acc.contains(&format!("original-opt,uplink_scalars,{},{}", (tau_c - tau_p) * 8, (tau_c - tau_p) * 32)));
        let trace = res.trace_csv();
        assert!(trace.lines().count() > 1);
    }

    #[test]
    fn statistics_cache_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = SimConfig { n_setups: 1, power_modes: vec![PowerMode::Full], ..small() };
        let opts = CampaignOptions { stats_cache: Some(dir.path().to_path_buf()) };
        let a = run_campaign_with(&cfg, &opts).unwrap();
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 2);
        let b = run_campaign_with(&cfg, &opts).unwrap();
        assert_eq!(a.per_ue_csv(), b.per_ue_csv());
        assert_eq!(a.per_ue_csv(), run_campaign(&cfg).unwrap().per_ue_csv());
    }

    #[test]
    fn outputs_are_written_with_digests() {
        let dir = tempfile::tempdir().unwrap();
        let res = run_campaign(&SimConfig { n_setups: 1, ..small() }).unwrap();
        let manifest = write_outputs(&res, dir.path(), true).unwrap();
        for name in [PER_UE_FILE, CDF_FILE, ACCOUNTING_FILE, TRACE_FILE, MANIFEST_FILE] {
            assert!(dir.path().join(name).exists(), "{name}");
        }
        let body = fs::read(dir.path().join(PER_UE_FILE)).unwrap();
        assert_eq!(manifest.digests[PER_UE_FILE], sha256_hex(&body));
        let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join(MANIFEST_FILE)).unwrap()).unwrap();
        assert_eq!(json["config"]["L"], 8);
    }
}
