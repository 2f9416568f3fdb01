//! Local receive combiners and Monte-Carlo estimation of the statistics the
//! CPU needs for large-scale fading decoding.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::channel::{pilot_sufficient_statistics, sample_channels, ChannelEstimator, CorrelationRoots};
use crate::config::{CombinerKind, SimConfig};
use crate::error::{Error, Result};
use crate::linalg::{c64, hermitian_factor, CMatrix, CVector};
use crate::network::{DccAssignment, NetworkSetup};
use crate::rng::{substream, Purpose};

/// Trials per parallel work item. Fixed so that the reduction order, and
/// therefore every sum, is independent of the thread count.
const TRIAL_CHUNK: usize = 16;

/// MR combining: `v_kl = h_hat_kl`.
pub fn mr_combiner(h_hat: &CVector) -> CVector {
    h_hat.clone()
}

/// What AP `l` knows locally about one served UE.
#[derive(Debug, Clone, Copy)]
pub struct LocalEstimate<'a> {
    pub ue: usize,
    pub h_hat: &'a CVector,
    pub err_cov: &'a CMatrix,
}

/// Partial MMSE combiners of AP `ap` for all UEs it serves, in the order of
/// `local`:
/// `v_kl = eta_k (sum_{i in D_l} eta_i (h_hat_il h_hat_il^H + C_il) + sigma2 I)^{-1} h_hat_kl`.
pub fn partial_mmse_combiners(ap: usize, local: &[LocalEstimate<'_>], eta: &[f64], sigma2: f64) -> Result<Vec<CVector>> {
    let Some(first) = local.first() else {
        return Ok(Vec::new());
    };
    let n = first.h_hat.len();
    let mut system = CMatrix::identity(n, n).scale(sigma2);
    for est in local {
        let p = eta[est.ue];
        system += (est.h_hat * est.h_hat.adjoint() + est.err_cov).scale(p);
    }
    let chol = hermitian_factor(&system).ok_or(Error::SingularCombiner { ap })?;
    Ok(local
        .iter()
        .map(|est| chol.solve(est.h_hat).scale(eta[est.ue]))
        .collect())
}

/// Statistics of UE `k` as seen through its serving APs `M_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct UeStatistics {
    /// `M_k`, ascending.
    pub serving: Vec<usize>,
    /// `|M_k| x K`; column `i` is `E{g_ki}`.
    pub cross_mean: CMatrix,
    /// `|M_k| x K`; entry `(j, i)` is `E{|[g_ki]_j|^2}`.
    pub cross_power: DMatrix<f64>,
    /// Diagonal of `F_k`: `sigma2 E{||v_kl||^2}`.
    pub noise: DVector<f64>,
}

impl UeStatistics {
    pub fn cluster_size(&self) -> usize {
        self.serving.len()
    }
}

/// Everything the CPU uses for LSFD: `E{g_ki}`, `E{g_ki g_ki^H}` and `F_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct LsfdStatistics {
    pub num_ues: usize,
    pub trials_used: usize,
    pub ues: Vec<UeStatistics>,
}

impl LsfdStatistics {
    pub fn new(ues: Vec<UeStatistics>, trials_used: usize) -> Self {
        let num_ues = ues.len();
        for (k, s) in ues.iter().enumerate() {
            let m = s.cluster_size();
            assert!(m > 0, "UE {k} has an empty cluster");
            assert_eq!(s.cross_mean.shape(), (m, num_ues));
            assert_eq!(s.cross_power.shape(), (m, num_ues));
            assert_eq!(s.noise.len(), m);
        }
        LsfdStatistics { num_ues, trials_used, ues }
    }

    pub fn cluster_size(&self, k: usize) -> usize {
        self.ues[k].cluster_size()
    }

    /// `E{g_kk}`.
    pub fn g_mean(&self, k: usize) -> CVector {
        self.g_cross_mean(k, k)
    }

    /// `E{g_ki}`.
    pub fn g_cross_mean(&self, k: usize, i: usize) -> CVector {
        self.ues[k].cross_mean.column(i).into_owned()
    }

    /// `E{g_ki g_ki^H}`. Channels at different APs are independent, so the
    /// off-diagonal entries factor into products of means. Built from the
    /// upper triangle and mirrored, hence exactly Hermitian.
    pub fn g_second(&self, k: usize, i: usize) -> CMatrix {
        let s = &self.ues[k];
        let m = s.cluster_size();
        let mean = s.cross_mean.column(i);
        let mut out = CMatrix::zeros(m, m);
        for a in 0..m {
            out[(a, a)] = c64(s.cross_power[(a, i)], 0.0);
            for b in a + 1..m {
                let v = mean[a] * mean[b].conj();
                out[(a, b)] = v;
                out[(b, a)] = v.conj();
            }
        }
        out
    }

    /// `E{g_kk g_kk^H} - E{g_kk} E{g_kk}^H`. The off-diagonal terms cancel
    /// exactly, leaving the per-AP variances.
    pub fn self_variance(&self, k: usize) -> CMatrix {
        let s = &self.ues[k];
        let diag = DVector::from_fn(s.cluster_size(), |a, _| {
            c64((s.cross_power[(a, k)] - s.cross_mean[(a, k)].norm_sqr()).max(0.0), 0.0)
        });
        CMatrix::from_diagonal(&diag)
    }

    /// `F_k`.
    pub fn noise_matrix(&self, k: usize) -> CMatrix {
        CMatrix::from_diagonal(&self.ues[k].noise.map(|v| c64(v, 0.0)))
    }

    /// Multiplies every channel-dependent statistic by `c` (means) or `c^2`
    /// (second moments, noise).
    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        for s in &mut out.ues {
            s.cross_mean = s.cross_mean.scale(c);
            s.cross_power = s.cross_power.scale(c * c);
            s.noise = s.noise.scale(c * c);
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&StatisticsJson::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let dto: StatisticsJson = serde_json::from_str(text)?;
        dto.try_into()
    }
}

#[derive(Serialize, Deserialize)]
struct UeStatisticsJson {
    serving: Vec<usize>,
    /// `[j][i]`
    mean_re: Vec<Vec<f64>>,
    mean_im: Vec<Vec<f64>>,
    power: Vec<Vec<f64>>,
    noise: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct StatisticsJson {
    num_ues: usize,
    trials_used: usize,
    ues: Vec<UeStatisticsJson>,
}

impl From<&LsfdStatistics> for StatisticsJson {
    fn from(stats: &LsfdStatistics) -> Self {
        let rows = |m: usize, f: &dyn Fn(usize, usize) -> f64| -> Vec<Vec<f64>> {
            (0..m).map(|j| (0..stats.num_ues).map(|i| f(j, i)).collect()).collect()
        };
        StatisticsJson {
            num_ues: stats.num_ues,
            trials_used: stats.trials_used,
            ues: stats
                .ues
                .iter()
                .map(|s| {
                    let m = s.cluster_size();
                    UeStatisticsJson {
                        serving: s.serving.clone(),
                        mean_re: rows(m, &|j, i| s.cross_mean[(j, i)].re),
                        mean_im: rows(m, &|j, i| s.cross_mean[(j, i)].im),
                        power: rows(m, &|j, i| s.cross_power[(j, i)]),
                        noise: s.noise.iter().copied().collect(),
                    }
                })
                .collect(),
        }
    }
}

impl TryFrom<StatisticsJson> for LsfdStatistics {
    type Error = Error;

    fn try_from(dto: StatisticsJson) -> Result<Self> {
        let k = dto.num_ues;
        let bad = || Error::Config("malformed statistics file".into());
        if dto.ues.len() != k {
            return Err(bad());
        }
        let mut ues = Vec::with_capacity(k);
        for u in dto.ues {
            let m = u.serving.len();
            let ok = |rows: &Vec<Vec<f64>>| rows.len() == m && rows.iter().all(|r| r.len() == k);
            if m == 0 || !ok(&u.mean_re) || !ok(&u.mean_im) || !ok(&u.power) || u.noise.len() != m {
                return Err(bad());
            }
            ues.push(UeStatistics {
                cross_mean: CMatrix::from_fn(m, k, |j, i| c64(u.mean_re[j][i], u.mean_im[j][i])),
                cross_power: DMatrix::from_fn(m, k, |j, i| u.power[j][i]),
                noise: DVector::from_vec(u.noise),
                serving: u.serving,
            });
        }
        Ok(LsfdStatistics::new(ues, dto.trials_used))
    }
}

/// Cache key for statistics of one setup: a digest of every configuration
/// field the statistics depend on, the setup index and a variant tag.
pub fn statistics_cache_key(config: &SimConfig, setup_index: u64, variant: &str) -> String {
    let relevant = SimConfig {
        n_setups: 1,
        r_design: 1,
        lsfd_modes: Vec::new(),
        power_modes: Vec::new(),
        fp_tol: 1.0,
        max_iters: 1,
        ..config.clone()
    };
    let mut hasher = Sha256::new();
    hasher.update(relevant.to_key_values().as_bytes());
    hasher.update(setup_index.to_le_bytes());
    hasher.update(variant.as_bytes());
    hex::encode(hasher.finalize())
}

struct Accumulator {
    mean: Vec<CMatrix>,
    power: Vec<DMatrix<f64>>,
    v_norm: Vec<DVector<f64>>,
}

impl Accumulator {
    fn zeros(dcc: &DccAssignment) -> Self {
        let k_total = dcc.num_ues();
        let sizes = dcc.serving_sets.iter().map(Vec::len);
        Accumulator {
            mean: sizes.clone().map(|m| CMatrix::zeros(m, k_total)).collect(),
            power: sizes.clone().map(|m| DMatrix::zeros(m, k_total)).collect(),
            v_norm: sizes.map(DVector::zeros).collect(),
        }
    }

    fn add(&mut self, other: &Accumulator) {
        for k in 0..self.mean.len() {
            self.mean[k] += &other.mean[k];
            self.power[k] += &other.power[k];
            self.v_norm[k] += &other.v_norm[k];
        }
    }
}

struct TrialContext<'a> {
    setup: &'a NetworkSetup,
    dcc: &'a DccAssignment,
    roots: CorrelationRoots,
    estimator: ChannelEstimator,
    powers: &'a [f64],
    config: &'a SimConfig,
}

impl TrialContext<'_> {
    fn run_trial(&self, trial: usize, acc: &mut Accumulator) -> Result<()> {
        let cfg = self.config;
        let mut rng = substream(cfg.seed, self.setup.setup_index, trial as u64, Purpose::Trial);
        let h = sample_channels(&self.roots, &mut rng);
        let obs = pilot_sufficient_statistics(&h, self.dcc, cfg.pilot_gain(), cfg.sigma2, &mut rng);
        let est = self.estimator.estimate_all(&obs, self.dcc);

        // combiners[l][position of k in D_l]
        let mut combiners: Vec<Vec<CVector>> = Vec::with_capacity(self.dcc.num_aps);
        for (l, served) in self.dcc.served_sets.iter().enumerate() {
            let local: Vec<LocalEstimate<'_>> = served
                .iter()
                .map(|&k| LocalEstimate {
                    ue: k,
                    h_hat: est.get(k, l).expect("served link has an estimate"),
                    err_cov: self.estimator.error_covariance(k, l),
                })
                .collect();
            let v = match cfg.combiner_kind {
                CombinerKind::Mr => local.iter().map(|e| mr_combiner(e.h_hat)).collect(),
                CombinerKind::PartialMmse => partial_mmse_combiners(l, &local, self.powers, cfg.sigma2)?,
            };
            combiners.push(v);
        }

        for (k, serving) in self.dcc.serving_sets.iter().enumerate() {
            for (j, &l) in serving.iter().enumerate() {
                let pos = self.dcc.served_sets[l].binary_search(&k).expect("duality");
                let v = &combiners[l][pos];
                acc.v_norm[k][j] += v.norm_squared();
                for i in 0..self.dcc.num_ues() {
                    let g = v.dotc(h.get(i, l));
                    acc.mean[k][(j, i)] += g;
                    acc.power[k][(j, i)] += g.norm_sqr();
                }
            }
        }
        Ok(())
    }
}

/// Estimates `E{g_ki}`, `E{|g_ki|^2}` per AP and `F_k` by averaging over
/// `config.mc_trials` independent coherence blocks. Combiners are built with
/// transmit powers `powers`.
pub fn estimate_lsfd_statistics(setup: &NetworkSetup, dcc: &DccAssignment, config: &SimConfig, powers: &[f64]) -> Result<LsfdStatistics> {
    if config.mc_trials < 2 {
        return Err(Error::Config("mc_trials must be at least 2".into()));
    }
    assert_eq!(powers.len(), dcc.num_ues());
    let ctx = TrialContext {
        setup,
        dcc,
        roots: CorrelationRoots::new(setup)?,
        estimator: ChannelEstimator::new(setup, dcc, config.pilot_gain(), config.sigma2)?,
        powers,
        config,
    };
    let trials = config.mc_trials;
    let chunks: Vec<Result<Accumulator>> = (0..trials.div_ceil(TRIAL_CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut acc = Accumulator::zeros(dcc);
            for trial in c * TRIAL_CHUNK..((c + 1) * TRIAL_CHUNK).min(trials) {
                ctx.run_trial(trial, &mut acc).map_err(|e| Error::Trial {
                    trial,
                    source: Box::new(e),
                })?;
            }
            Ok(acc)
        })
        .collect();

    let mut total = Accumulator::zeros(dcc);
    for chunk in chunks {
        total.add(&chunk?);
    }
    let scale = 1.0 / trials as f64;
    let ues = dcc
        .serving_sets
        .iter()
        .enumerate()
        .map(|(k, serving)| UeStatistics {
            serving: serving.clone(),
            cross_mean: total.mean[k].scale(scale),
            cross_power: total.power[k].scale(scale),
            noise: total.v_norm[k].scale(scale * config.sigma2),
        })
        .collect();
    Ok(LsfdStatistics::new(ues, trials))
}
