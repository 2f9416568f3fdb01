//! Exact complexity and fronthaul-load accounting, plus empirical CDFs.

use num_rational::Ratio;

use crate::error::{Error, Result};
use crate::lsfd::InterferenceSets;
use crate::network::DccAssignment;

/// Exact non-negative rational count.
pub type Count = Ratio<u64>;

/// Complex multiplications to compute an LSFD vector of dimension `m` by
/// Cholesky-based inversion: `m^2 + (m^3 - m) / 3`.
pub fn lsfd_complexity(m: u64) -> u64 {
    // m^3 - m = (m-1) m (m+1) is a product of three consecutive integers
    m * m + (m * m * m - m) / 3
}

/// Complex scalars sent to the CPU per coherence block:
/// `(tau_c - tau_p) sum_l |D_l|`, and its average per UE.
pub fn fronthaul_uplink_count(dcc: &DccAssignment, tau_c: usize, tau_p: usize) -> (u64, Count) {
    let served: u64 = dcc.served_sets.iter().map(|d| d.len() as u64).sum();
    let total = tau_c.saturating_sub(tau_p) as u64 * served;
    (total, Count::new(total, dcc.num_ues().max(1) as u64))
}

/// Which statistics the APs must report for each served UE.
#[derive(Debug, Clone, Copy)]
pub enum StatsMode<'a> {
    /// Level 2 needs none.
    None,
    /// `(3K + 1) / 2` per served (AP, UE) pair.
    Optimal,
    /// `(3 |S_k| + 1) / 2` per served (AP, UE) pair.
    NearlyOptimal(&'a InterferenceSets),
}

/// Statistical scalars sent to the CPU per setup, total and per UE.
pub fn fronthaul_stats_count(dcc: &DccAssignment, mode: StatsMode<'_>) -> (Count, Count) {
    let k_total = dcc.num_ues() as u64;
    let per_pair = |k: usize| -> Count {
        match mode {
            StatsMode::None => Count::from_integer(0),
            StatsMode::Optimal => Count::new(3 * k_total + 1, 2),
            StatsMode::NearlyOptimal(sets) => Count::new(3 * sets.sets[k].len() as u64 + 1, 2),
        }
    };
    let mut total = Count::from_integer(0);
    for served in &dcc.served_sets {
        for &k in served {
            total += per_pair(k);
        }
    }
    (total, total / Count::from_integer(k_total.max(1)))
}

/// Per-mode complexity and fronthaul figures of one setup.
#[derive(Debug, Clone, PartialEq)]
pub struct FronthaulReport {
    pub lsfd_mults_total: u64,
    pub lsfd_mults_per_ue: Count,
    pub uplink_scalars_total: u64,
    pub uplink_scalars_per_ue: Count,
    pub stats_scalars_total: Count,
    pub stats_scalars_per_ue: Count,
}

impl FronthaulReport {
    /// `with_lsfd` is false for Level 2, which computes no LSFD vectors.
    pub fn new(dcc: &DccAssignment, tau_c: usize, tau_p: usize, stats_mode: StatsMode<'_>, with_lsfd: bool) -> Self {
        let lsfd_mults_total = if with_lsfd {
            dcc.serving_sets.iter().map(|m| lsfd_complexity(m.len() as u64)).sum()
        } else {
            0
        };
        let (uplink_scalars_total, uplink_scalars_per_ue) = fronthaul_uplink_count(dcc, tau_c, tau_p);
        let (stats_scalars_total, stats_scalars_per_ue) = fronthaul_stats_count(dcc, stats_mode);
        FronthaulReport {
            lsfd_mults_total,
            lsfd_mults_per_ue: Count::new(lsfd_mults_total, dcc.num_ues().max(1) as u64),
            uplink_scalars_total,
            uplink_scalars_per_ue,
            stats_scalars_total,
            stats_scalars_per_ue,
        }
    }
}

/// Running exact average of reports over setups.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReportAverage {
    setups: u64,
    sums: [Count; 6],
}

impl ReportAverage {
    pub fn add(&mut self, r: &FronthaulReport) {
        let vals = [
            Count::from_integer(r.lsfd_mults_total),
            r.lsfd_mults_per_ue,
            Count::from_integer(r.uplink_scalars_total),
            r.uplink_scalars_per_ue,
            r.stats_scalars_total,
            r.stats_scalars_per_ue,
        ];
        for (s, v) in self.sums.iter_mut().zip(vals) {
            *s += v;
        }
        self.setups += 1;
    }

    pub fn setups(&self) -> u64 {
        self.setups
    }

    /// `(metric, per_ue, total)` rows averaged over the setups.
    pub fn rows(&self) -> Vec<(&'static str, Count, Count)> {
        let n = Count::from_integer(self.setups.max(1));
        let s = &self.sums;
        vec![
            ("lsfd_mults", s[1] / n, s[0] / n),
            ("uplink_scalars", s[3] / n, s[2] / n),
            ("stats_scalars", s[5] / n, s[4] / n),
        ]
    }
}

/// Decimal rendering of an exact count.
pub fn count_to_decimal(c: &Count) -> String {
    if c.is_integer() {
        c.to_integer().to_string()
    } else {
        (*c.numer() as f64 / *c.denom() as f64).to_string()
    }
}

/// Sorted `(value, i/n)` pairs.
pub fn empirical_cdf(samples: &[f64]) -> Result<Vec<(f64, f64)>> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    Ok(sorted
        .into_iter()
        .enumerate()
        .map(|(i, v)| (v, (i + 1) as f64 / n))
        .collect())
}

/// Median of the samples (mean of the middle pair for even counts).
pub fn median(samples: &[f64]) -> Option<f64> {
    if samples.is_empty() {
        return None;
    }
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    Some(if n % 2 == 1 { s[n / 2] } else { 0.5 * (s[n / 2 - 1] + s[n / 2]) })
}
