//! Max-min fair power control by normalized fixed-point iteration.
//!
//! Each step sets `eta_k = 1 / (E{g_kk}^H C_k^{-1} E{g_kk})` from the previous
//! iterate, then rescales so the largest power equals `rho_u`. Iteration stops
//! once the relative spread of the monitored SINRs is within tolerance.

use rayon::prelude::*;

use crate::combining::LsfdStatistics;
use crate::config::SimConfig;
use crate::error::{Error, Result};
use crate::linalg::quad_form;
use crate::lsfd::{interference_matrix, inverse_quadratic, InterferenceSets, LsfdWeights};

/// Which SINR the power control balances.
#[derive(Debug, Clone, Copy)]
pub enum PowerRule<'a> {
    /// Optimal LSFD; the SINR is the closed-form optimum for the current powers.
    Optimal,
    /// Nearly optimal LSFD; balances the objective with interference limited
    /// to each UE's set.
    NearlyOptimal(&'a InterferenceSets),
    /// Fixed LSFD weights (e.g. Level 2 averaging).
    FixedWeights(&'a LsfdWeights),
}

impl PowerRule<'_> {
    /// Monitored SINR per unit own power, `SINR_k / eta_k`, at powers `eta`.
    pub fn sinr_per_power(&self, stats: &LsfdStatistics, eta: &[f64], k: usize) -> Result<f64> {
        let value = match self {
            PowerRule::Optimal => inverse_quadratic(stats, eta, k, None)?,
            PowerRule::NearlyOptimal(sets) => inverse_quadratic(stats, eta, k, Some(&sets.sets[k]))?,
            PowerRule::FixedWeights(w) => {
                let a = &w.a[k];
                let den = quad_form(a, &interference_matrix(stats, eta, k, None));
                if !(den > 0.0) {
                    return Err(Error::InvalidWeights { ue: k });
                }
                a.dotc(&stats.g_mean(k)).norm_sqr() / den
            }
        };
        if !(value > 0.0) || !value.is_finite() {
            return Err(Error::DegenerateStatistics { ue: k });
        }
        Ok(value)
    }

    fn gains(&self, stats: &LsfdStatistics, eta: &[f64]) -> Result<Vec<f64>> {
        (0..stats.num_ues)
            .into_par_iter()
            .map(|k| self.sinr_per_power(stats, eta, k))
            .collect()
    }
}

/// Monitored SINR of every UE at powers `eta`.
pub fn monitored_sinrs(stats: &LsfdStatistics, eta: &[f64], rule: PowerRule<'_>) -> Result<Vec<f64>> {
    Ok(rule
        .gains(stats, eta)?
        .iter()
        .zip(eta)
        .map(|(t, p)| t * p)
        .collect())
}

/// `|max - min| / |max|`.
pub fn relative_spread(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    (max - min).abs() / max.abs()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPointOptions {
    pub rho_u: f64,
    pub tol: f64,
    pub max_iters: usize,
}

impl FixedPointOptions {
    pub fn from_config(config: &SimConfig) -> Self {
        FixedPointOptions {
            rho_u: config.rho_u,
            tol: config.fp_tol,
            max_iters: config.max_iters,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixedPointStep {
    /// Scaled next iterate.
    pub eta: Vec<f64>,
    /// Monitored SINRs at the previous iterate.
    pub sinr: Vec<f64>,
}

/// One update followed by the scaling step.
pub fn fixed_point_step(stats: &LsfdStatistics, eta_prev: &[f64], rule: PowerRule<'_>, rho_u: f64) -> Result<FixedPointStep> {
    if eta_prev.iter().any(|&p| !(p > 0.0)) {
        return Err(Error::Config("fixed-point powers must be strictly positive".into()));
    }
    let gains = rule.gains(stats, eta_prev)?;
    let raw: Vec<f64> = gains.iter().map(|t| 1.0 / t).collect();
    let peak = raw.iter().copied().fold(0.0, f64::max);
    let eta = raw
        .iter()
        .map(|&p| if p == peak { rho_u } else { (p * (rho_u / peak)).min(rho_u) })
        .collect();
    let sinr = gains.iter().zip(eta_prev).map(|(t, p)| t * p).collect();
    Ok(FixedPointStep { eta, sinr })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub min_sinr: f64,
    pub max_sinr: f64,
    pub spread: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerAllocation {
    pub eta: Vec<f64>,
    /// Monitored SINRs at `eta`.
    pub sinr: Vec<f64>,
    /// Updates applied to reach `eta`.
    pub iterations: usize,
    pub converged: bool,
    /// One record per evaluated iterate, starting with the initial powers.
    pub history: Vec<IterationRecord>,
}

impl PowerAllocation {
    pub fn min_sinr(&self) -> f64 {
        self.sinr.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Fixed-point iteration started from full power.
pub fn maxmin_fixed_point(stats: &LsfdStatistics, rule: PowerRule<'_>, opts: &FixedPointOptions) -> Result<PowerAllocation> {
    maxmin_fixed_point_from(stats, rule, opts, vec![opts.rho_u; stats.num_ues])
}

/// Fixed-point iteration from an arbitrary strictly positive start.
pub fn maxmin_fixed_point_from(stats: &LsfdStatistics, rule: PowerRule<'_>, opts: &FixedPointOptions, init: Vec<f64>) -> Result<PowerAllocation> {
    assert_eq!(init.len(), stats.num_ues);
    let mut eta = init;
    let mut history = Vec::new();
    for iteration in 0..=opts.max_iters {
        let step = fixed_point_step(stats, &eta, rule, opts.rho_u)?;
        let spread = relative_spread(&step.sinr);
        history.push(IterationRecord {
            iteration,
            min_sinr: step.sinr.iter().copied().fold(f64::INFINITY, f64::min),
            max_sinr: step.sinr.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            spread,
        });
        let converged = spread <= opts.tol;
        if converged || iteration == opts.max_iters {
            return Ok(PowerAllocation {
                eta,
                sinr: step.sinr,
                iterations: iteration,
                converged,
                history,
            });
        }
        eta = step.eta;
    }
    unreachable!()
}

/// Largest UE count accepted by [`grid_search_oracle`].
pub const GRID_MAX_UES: usize = 4;

/// Exhaustive search of the min monitored SINR over the grid
/// `{rho_u t / grid_n : t = 1..grid_n}^K`.
pub fn grid_search_oracle(stats: &LsfdStatistics, rho_u: f64, grid_n: usize, rule: PowerRule<'_>) -> Result<PowerAllocation> {
    let k_total = stats.num_ues;
    if k_total > GRID_MAX_UES {
        return Err(Error::GridTooLarge { ues: k_total, max: GRID_MAX_UES });
    }
    let points = grid_n.pow(k_total as u32);
    let decode = |mut idx: usize| -> Vec<f64> {
        (0..k_total)
            .map(|_| {
                let t = idx % grid_n + 1;
                idx /= grid_n;
                rho_u * t as f64 / grid_n as f64
            })
            .collect()
    };
    let evaluate = |idx: usize| -> Result<(f64, usize)> {
        let eta = decode(idx);
        let mut worst = f64::INFINITY;
        for k in 0..k_total {
            worst = worst.min(eta[k] * rule.sinr_per_power(stats, &eta, k)?);
        }
        Ok((worst, idx))
    };
    let better = |a: (f64, usize), b: (f64, usize)| {
        if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) {
            b
        } else {
            a
        }
    };
    let (_, best) = (0..points)
        .into_par_iter()
        .map(evaluate)
        .try_reduce(|| (f64::NEG_INFINITY, usize::MAX), |a, b| Ok(better(a, b)))?;
    let eta = decode(best);
    let sinr = monitored_sinrs(stats, &eta, rule)?;
    Ok(PowerAllocation {
        eta,
        sinr,
        iterations: 0,
        converged: true,
        history: Vec::new(),
    })
}
