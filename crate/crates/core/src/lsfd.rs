//! Second-layer (CPU) decoding: optimal and nearly optimal LSFD weights,
//! interference sets, effective SINR and spectral efficiency.

use crate::accounting::lsfd_complexity;
use crate::combining::LsfdStatistics;
use crate::error::{Error, Result};
use crate::linalg::{c64, hermitian_factor, quad_form, CMatrix, CVector};
use crate::network::DccAssignment;

/// One LSFD vector per UE, entries ordered by ascending AP index in `M_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct LsfdWeights {
    pub a: Vec<CVector>,
}

impl LsfdWeights {
    /// Uniform averaging `1/|M_k|` for every UE.
    pub fn level2(stats: &LsfdStatistics) -> Self {
        LsfdWeights {
            a: (0..stats.num_ues).map(|k| level2_weights(stats.cluster_size(k))).collect(),
        }
    }

    pub fn optimal(stats: &LsfdStatistics, eta: &[f64]) -> Result<Self> {
        let a = (0..stats.num_ues)
            .map(|k| optimal_lsfd(stats, eta, k).map(|s| s.weights))
            .collect::<Result<_>>()?;
        Ok(LsfdWeights { a })
    }

    pub fn nearly_optimal(stats: &LsfdStatistics, eta: &[f64], sets: &InterferenceSets) -> Result<Self> {
        let a = (0..stats.num_ues)
            .map(|k| nearly_optimal_lsfd(stats, eta, k, &sets.sets[k]).map(|s| s.weights))
            .collect::<Result<_>>()?;
        Ok(LsfdWeights { a })
    }
}

/// `S_k^R` for every UE.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InterferenceSets {
    pub sets: Vec<Vec<usize>>,
}

impl InterferenceSets {
    pub fn new(dcc: &DccAssignment, r: usize) -> Self {
        InterferenceSets {
            sets: (0..dcc.num_ues()).map(|k| interference_set(dcc, k, r)).collect(),
        }
    }

    /// `S_k = {1..K}` for every UE.
    pub fn full(num_ues: usize) -> Self {
        InterferenceSets {
            sets: vec![(0..num_ues).collect(); num_ues],
        }
    }

    pub fn is_full(&self) -> bool {
        self.sets.iter().all(|s| s.len() == self.sets.len())
    }
}

fn overlap(a: &[usize], b: &[usize]) -> usize {
    // both ascending
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

/// UEs served by at least `min(r, |M_k|)` of the APs serving UE `k`.
/// Always contains `k`.
pub fn interference_set(dcc: &DccAssignment, k: usize, r: usize) -> Vec<usize> {
    assert!(r >= 1, "R must be at least 1");
    let mk = &dcc.serving_sets[k];
    let threshold = r.min(mk.len());
    (0..dcc.num_ues())
        .filter(|&i| overlap(mk, &dcc.serving_sets[i]) >= threshold)
        .collect()
}

/// `sum_{i in set} eta_i E{g_ki g_ki^H} - eta_k E{g_kk} E{g_kk}^H + F_k`,
/// summing over all UEs when `set` is `None`. `set` must contain `k`.
///
/// The `i = k` term and the subtracted outer product cancel off the diagonal,
/// so they enter as the per-AP variances only. Filled on the upper triangle
/// and mirrored.
pub fn interference_matrix(stats: &LsfdStatistics, eta: &[f64], k: usize, set: Option<&[usize]>) -> CMatrix {
    let s = &stats.ues[k];
    let m = s.cluster_size();
    let all: Vec<usize>;
    let set = match set {
        Some(set) => set,
        None => {
            all = (0..stats.num_ues).collect();
            &all
        }
    };
    assert!(set.contains(&k), "interference set of UE {k} must contain it");

    let mut out = CMatrix::zeros(m, m);
    for a in 0..m {
        let mut diag = s.noise[a];
        for &i in set {
            diag += if i == k {
                eta[k] * (s.cross_power[(a, k)] - s.cross_mean[(a, k)].norm_sqr()).max(0.0)
            } else {
                eta[i] * s.cross_power[(a, i)]
            };
        }
        out[(a, a)] = c64(diag, 0.0);
        for b in a + 1..m {
            let mut acc = c64(0.0, 0.0);
            for &i in set {
                if i != k {
                    acc += s.cross_mean[(a, i)] * s.cross_mean[(b, i)].conj() * eta[i];
                }
            }
            out[(a, b)] = acc;
            out[(b, a)] = acc.conj();
        }
    }
    out
}

/// LSFD vector and the multiplication count of computing it.
#[derive(Debug, Clone, PartialEq)]
pub struct LsfdSolution {
    pub weights: CVector,
    pub multiplications: u64,
}

fn solve_lsfd(stats: &LsfdStatistics, eta: &[f64], k: usize, set: Option<&[usize]>) -> Result<LsfdSolution> {
    let b = interference_matrix(stats, eta, k, set);
    let chol = hermitian_factor(&b).ok_or(Error::DegenerateStatistics { ue: k })?;
    let weights = chol.solve(&stats.g_mean(k));
    if weights.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::DegenerateStatistics { ue: k });
    }
    Ok(LsfdSolution {
        weights,
        multiplications: lsfd_complexity(stats.cluster_size(k) as u64),
    })
}

/// Optimal LSFD vector `(sum_i eta_i E{g g^H} - eta_k E{g_kk}E{g_kk}^H + F_k)^{-1} E{g_kk}`.
pub fn optimal_lsfd(stats: &LsfdStatistics, eta: &[f64], k: usize) -> Result<LsfdSolution> {
    solve_lsfd(stats, eta, k, None)
}

/// Nearly optimal LSFD: the interference sum restricted to `set`.
pub fn nearly_optimal_lsfd(stats: &LsfdStatistics, eta: &[f64], k: usize, set: &[usize]) -> Result<LsfdSolution> {
    solve_lsfd(stats, eta, k, Some(set))
}

/// Effective SINR of UE `k` with LSFD weights `a`.
pub fn sinr(stats: &LsfdStatistics, eta: &[f64], k: usize, a: &CVector) -> Result<f64> {
    let signal = a.dotc(&stats.g_mean(k)).norm_sqr() * eta[k];
    let interference = quad_form(a, &interference_matrix(stats, eta, k, None));
    if !(interference > 0.0) || !signal.is_finite() {
        return Err(Error::InvalidWeights { ue: k });
    }
    Ok(signal / interference)
}

/// `E{g_kk}^H B^{-1} E{g_kk}` with `B` the interference matrix over `set`.
pub fn inverse_quadratic(stats: &LsfdStatistics, eta: &[f64], k: usize, set: Option<&[usize]>) -> Result<f64> {
    let b = interference_matrix(stats, eta, k, set);
    let chol = hermitian_factor(&b).ok_or(Error::DegenerateStatistics { ue: k })?;
    let m = stats.g_mean(k);
    let q = m.dotc(&chol.solve(&m)).re;
    if !q.is_finite() {
        return Err(Error::DegenerateStatistics { ue: k });
    }
    Ok(q)
}

/// SINR achieved by the optimal weights, `eta_k E{g_kk}^H B^{-1} E{g_kk}`;
/// with a restricted `set` this is the max-min objective of the nearly
/// optimal design.
pub fn sinr_closed_form(stats: &LsfdStatistics, eta: &[f64], k: usize, set: Option<&[usize]>) -> Result<f64> {
    Ok(eta[k] * inverse_quadratic(stats, eta, k, set)?)
}

/// Spectral efficiency in bit/s/Hz with the pilot overhead removed.
pub fn se(sinr: f64, tau_c: usize, tau_p: usize) -> f64 {
    (tau_c - tau_p) as f64 / tau_c as f64 * (1.0 + sinr).log2()
}

pub fn level2_weights(cluster_size: usize) -> CVector {
    CVector::from_element(cluster_size, c64(1.0 / cluster_size as f64, 0.0))
}
