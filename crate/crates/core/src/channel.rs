//! Channel sampling, pilot reception and MMSE channel estimation.

use std::fmt::Write as _;

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{condition_number, hermitian_eigenvalues, hermitian_factor, hermitize, psd_sqrt, trace, CMatrix, CVector};
use crate::network::{DccAssignment, NetworkSetup};
use crate::rng::complex_normal_vector;

/// Pilot covariances with a larger eigenvalue spread are rejected.
pub const MAX_CONDITION: f64 = 1e12;

/// Channel vectors of every AP-UE link in one coherence block.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub antennas: usize,
    pub num_aps: usize,
    pub num_ues: usize,
    h: Vec<CVector>,
}

impl ChannelRealization {
    pub fn get(&self, ue: usize, ap: usize) -> &CVector {
        &self.h[ap * self.num_ues + ue]
    }

    /// One row per link: `ap,ue,re0,im0,re1,im1,...`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("ap,ue");
        for n in 0..self.antennas {
            let _ = write!(out, ",re{n},im{n}");
        }
        out.push('\n');
        for l in 0..self.num_aps {
            for k in 0..self.num_ues {
                let _ = write!(out, "{l},{k}");
                for z in self.get(k, l).iter() {
                    let _ = write!(out, ",{},{}", z.re, z.im);
                }
                out.push('\n');
            }
        }
        out
    }
}

/// Hermitian square roots of every `R_kl`, computed once per setup.
#[derive(Debug, Clone)]
pub struct CorrelationRoots {
    antennas: usize,
    num_aps: usize,
    num_ues: usize,
    roots: Vec<CMatrix>,
}

impl CorrelationRoots {
    pub fn new(setup: &NetworkSetup) -> Result<Self> {
        let (num_aps, num_ues) = (setup.num_aps(), setup.num_ues());
        let mut roots = Vec::with_capacity(num_aps * num_ues);
        for l in 0..num_aps {
            for k in 0..num_ues {
                let r = setup.corr(k, l);
                let lowest = hermitian_eigenvalues(r).first().copied().unwrap_or(0.0);
                if lowest < -1e-12 * trace(r).abs() {
                    return Err(Error::Factorization { ue: k, ap: l });
                }
                roots.push(psd_sqrt(r));
            }
        }
        Ok(CorrelationRoots {
            antennas: setup.antennas,
            num_aps,
            num_ues,
            roots,
        })
    }
}

/// Draws `h_kl = R_kl^{1/2} w` for every link, AP-major.
pub fn sample_channels<R: Rng + ?Sized>(roots: &CorrelationRoots, rng: &mut R) -> ChannelRealization {
    let h = roots
        .roots
        .iter()
        .map(|root| root * complex_normal_vector(rng, roots.antennas))
        .collect();
    ChannelRealization {
        antennas: roots.antennas,
        num_aps: roots.num_aps,
        num_ues: roots.num_ues,
        h,
    }
}

/// Despread pilot signals, one per (pilot, AP) pair. Every UE on pilot `t`
/// sees the same statistic at a given AP.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotObservations {
    pub num_aps: usize,
    z: Vec<CVector>,
}

impl PilotObservations {
    pub fn for_pilot(&self, pilot: usize, ap: usize) -> &CVector {
        &self.z[pilot * self.num_aps + ap]
    }

    /// `z_kl`.
    pub fn for_ue(&self, dcc: &DccAssignment, ue: usize, ap: usize) -> &CVector {
        self.for_pilot(dcc.pilot_of[ue], ap)
    }
}

/// `z = sqrt(tau_p rho_p) * sum_{i in P_k} h_il + n`, noise drawn once per
/// (pilot, AP) pair.
pub fn pilot_sufficient_statistics<R: Rng + ?Sized>(
    real: &ChannelRealization,
    dcc: &DccAssignment,
    pilot_gain: f64,
    sigma2: f64,
    rng: &mut R,
) -> PilotObservations {
    let amp = pilot_gain.sqrt();
    let noise_amp = sigma2.sqrt();
    let mut z = Vec::with_capacity(dcc.tau_p * real.num_aps);
    for t in 0..dcc.tau_p {
        for l in 0..real.num_aps {
            let mut sum = CVector::zeros(real.antennas);
            for (k, &p) in dcc.pilot_of.iter().enumerate() {
                if p == t {
                    sum += real.get(k, l);
                }
            }
            let noise = complex_normal_vector(rng, real.antennas);
            z.push(sum.scale(amp) + noise.scale(noise_amp));
        }
    }
    PilotObservations {
        num_aps: real.num_aps,
        z,
    }
}

/// `Psi = tau_p rho_p sum_{i on pilot} R_il + sigma2 I`.
pub fn pilot_covariance(setup: &NetworkSetup, dcc: &DccAssignment, pilot: usize, ap: usize, pilot_gain: f64, sigma2: f64) -> CMatrix {
    let n = setup.antennas;
    let mut psi = CMatrix::identity(n, n).scale(sigma2);
    for (k, &p) in dcc.pilot_of.iter().enumerate() {
        if p == pilot {
            psi += setup.corr(k, ap).scale(pilot_gain);
        }
    }
    psi
}

fn factor_pilot_covariance(psi: &CMatrix) -> std::result::Result<nalgebra::Cholesky<crate::linalg::C64, nalgebra::Dyn>, f64> {
    let condition = condition_number(psi);
    if condition > MAX_CONDITION {
        return Err(condition);
    }
    hermitian_factor(psi).ok_or(f64::INFINITY)
}

/// MMSE estimate `sqrt(tau_p rho_p) R Psi^{-1} z`, solved by factorization.
pub fn mmse_estimate(z: &CVector, r: &CMatrix, psi: &CMatrix, pilot_gain: f64) -> Result<CVector> {
    let chol = factor_pilot_covariance(psi).map_err(|condition| Error::IllConditioned {
        what: "pilot covariance",
        condition,
    })?;
    Ok((r * chol.solve(z)).scale(pilot_gain.sqrt()))
}

/// Estimation error covariance `R - tau_p rho_p R Psi^{-1} R`.
pub fn error_covariance(r: &CMatrix, psi: &CMatrix, pilot_gain: f64) -> Result<CMatrix> {
    let chol = factor_pilot_covariance(psi).map_err(|condition| Error::IllConditioned {
        what: "pilot covariance",
        condition,
    })?;
    let x = chol.solve(r);
    Ok(hermitize(&(r - (r * x).scale(pilot_gain))))
}

#[derive(Debug, Clone)]
struct LinkEstimator {
    filter: CMatrix,
    err_cov: CMatrix,
}

/// Per-setup estimation filters `sqrt(tau_p rho_p) R_kl Psi^{-1}` and error
/// covariances for every served link `l in M_k`.
#[derive(Debug, Clone)]
pub struct ChannelEstimator {
    num_aps: usize,
    num_ues: usize,
    tau_p: usize,
    links: Vec<Option<LinkEstimator>>,
    psi: Vec<Option<CMatrix>>,
}

impl ChannelEstimator {
    pub fn new(setup: &NetworkSetup, dcc: &DccAssignment, pilot_gain: f64, sigma2: f64) -> Result<Self> {
        let (num_aps, num_ues) = (setup.num_aps(), setup.num_ues());
        let mut links = vec![None; num_aps * num_ues];
        let mut psis = vec![None; dcc.tau_p * num_aps];
        let amp = pilot_gain.sqrt();
        for l in 0..num_aps {
            for t in 0..dcc.tau_p {
                let users: Vec<usize> = dcc.served_sets[l].iter().copied().filter(|&k| dcc.pilot_of[k] == t).collect();
                if users.is_empty() {
                    continue;
                }
                let psi = pilot_covariance(setup, dcc, t, l, pilot_gain, sigma2);
                let chol = factor_pilot_covariance(&psi).map_err(|condition| Error::SingularPilotCovariance {
                    pilot: t,
                    ap: l,
                    condition,
                })?;
                for k in users {
                    let r = setup.corr(k, l);
                    // Psi^{-1} R; its adjoint is R Psi^{-1}
                    let x = chol.solve(r);
                    let filter = x.adjoint().scale(amp);
                    let err_cov = hermitize(&(r - (r * &x).scale(pilot_gain)));
                    links[l * num_ues + k] = Some(LinkEstimator { filter, err_cov });
                }
                psis[t * num_aps + l] = Some(psi);
            }
        }
        Ok(ChannelEstimator {
            num_aps,
            num_ues,
            tau_p: dcc.tau_p,
            links,
            psi: psis,
        })
    }

    fn link(&self, ue: usize, ap: usize) -> &LinkEstimator {
        self.links[ap * self.num_ues + ue]
            .as_ref()
            .unwrap_or_else(|| panic!("AP {ap} does not estimate UE {ue}"))
    }

    pub fn estimate(&self, ue: usize, ap: usize, z: &CVector) -> CVector {
        &self.link(ue, ap).filter * z
    }

    /// `C_kl` for a served link.
    pub fn error_covariance(&self, ue: usize, ap: usize) -> &CMatrix {
        &self.link(ue, ap).err_cov
    }

    pub fn psi(&self, pilot: usize, ap: usize) -> Option<&CMatrix> {
        assert!(pilot < self.tau_p);
        self.psi[pilot * self.num_aps + ap].as_ref()
    }

    /// Estimates every served link from one block of pilot observations.
    pub fn estimate_all(&self, obs: &PilotObservations, dcc: &DccAssignment) -> ChannelEstimateSet {
        let mut h_hat = vec![None; self.num_aps * self.num_ues];
        for (l, served) in dcc.served_sets.iter().enumerate() {
            for &k in served {
                h_hat[l * self.num_ues + k] = Some(self.estimate(k, l, obs.for_ue(dcc, k, l)));
            }
        }
        ChannelEstimateSet {
            num_ues: self.num_ues,
            h_hat,
        }
    }
}

/// Channel estimates of one coherence block. Only served links are present.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelEstimateSet {
    num_ues: usize,
    h_hat: Vec<Option<CVector>>,
}

impl ChannelEstimateSet {
    pub fn get(&self, ue: usize, ap: usize) -> Option<&CVector> {
        self.h_hat[ap * self.num_ues + ue].as_ref()
    }
}

/// `tau_p rho_p R Psi^{-1} R`, the covariance of the estimate.
pub fn estimate_covariance(r: &CMatrix, psi: &CMatrix, pilot_gain: f64) -> Result<CMatrix> {
    Ok(r - error_covariance(r, psi, pilot_gain)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c64, C64};
    use crate::rng::{substream, Purpose};

    fn scalar(v: f64) -> CMatrix {
        CMatrix::from_element(1, 1, c64(v, 0.0))
    }

    fn r2() -> CMatrix {
        CMatrix::from_row_slice(2, 2, &[c64(1.0, 0.0), c64(0.4, 0.3), c64(0.4, -0.3), c64(0.7, 0.0)])
    }

    fn r2b() -> CMatrix {
        CMatrix::from_row_slice(2, 2, &[c64(0.5, 0.0), c64(-0.1, 0.2), c64(-0.1, -0.2), c64(0.9, 0.0)])
    }

    fn setup_of(corr: Vec<Vec<CMatrix>>) -> NetworkSetup {
        let l = corr.len();
        let k = corr[0].len();
        NetworkSetup::from_correlations(vec![[0.0; 2]; l], vec![[0.0; 2]; k], corr)
    }

    #[test]
    fn zero_covariance_gives_zero_channel() {
        let s = setup_of(vec![vec![CMatrix::zeros(3, 3)]]);
        let roots = CorrelationRoots::new(&s).unwrap();
        let mut rng = substream(0, 0, 0, Purpose::Oracle);
        let h = sample_channels(&roots, &mut rng);
        assert!(h.get(0, 0).iter().all(|z| *z == C64::new(0.0, 0.0)));
    }

    #[test]
    fn white_channel_has_unit_variance() {
        let s = setup_of(vec![vec![CMatrix::identity(4, 4)]]);
        let roots = CorrelationRoots::new(&s).unwrap();
        let mut rng = substream(0, 0, 0, Purpose::Oracle);
        let trials = 10_000;
        let mut power = [0.0; 4];
        for _ in 0..trials {
            let h = sample_channels(&roots, &mut rng);
            for (p, z) in power.iter_mut().zip(h.get(0, 0).iter()) {
                *p += z.norm_sqr();
            }
        }
        for p in power {
            assert!((p / trials as f64 - 1.0).abs() < 0.05);
        }
    }

    #[test]
    fn indefinite_correlation_is_rejected() {
        let mut bad = CMatrix::identity(2, 2);
        bad[(1, 1)] = c64(-0.5, 0.0);
        let s = setup_of(vec![vec![bad]]);
        assert!(matches!(CorrelationRoots::new(&s), Err(Error::Factorization { ue: 0, ap: 0 })));
    }

    #[test]
    fn noiseless_statistic_without_contamination() {
        let s = setup_of(vec![vec![r2(), r2b()]]);
        let dcc = DccAssignment::all_serving(1, 2, vec![0, 1]);
        let roots = CorrelationRoots::new(&s).unwrap();
        let mut rng = substream(3, 0, 0, Purpose::Oracle);
        let h = sample_channels(&roots, &mut rng);
        let obs = pilot_sufficient_statistics(&h, &dcc, 2.0, 0.0, &mut rng);
        assert_eq!(obs.for_ue(&dcc, 0, 0), &h.get(0, 0).scale(2f64.sqrt()));
        assert_eq!(obs.for_ue(&dcc, 1, 0), &h.get(1, 0).scale(2f64.sqrt()));
    }

    #[test]
    fn copilot_statistics_coincide_and_superpose() {
        let s = setup_of(vec![vec![r2(), r2b()], vec![r2b(), r2()]]);
        let dcc = DccAssignment::all_serving(2, 1, vec![0, 0]);
        let roots = CorrelationRoots::new(&s).unwrap();
        let mut rng = substream(4, 0, 0, Purpose::Oracle);
        let h = sample_channels(&roots, &mut rng);
        let g: f64 = 1.5;
        let obs = pilot_sufficient_statistics(&h, &dcc, g, 0.0, &mut rng);
        for l in 0..2 {
            assert_eq!(obs.for_ue(&dcc, 0, l), obs.for_ue(&dcc, 1, l));
            let resid = obs.for_ue(&dcc, 0, l) - h.get(0, l).scale(g.sqrt());
            let expected = h.get(1, l).scale(g.sqrt());
            assert!((resid - &expected).norm() <= 1e-12 * expected.norm());
        }
    }

    #[test]
    fn scalar_estimate() {
        let (r, g, s2) = (0.8, 3.0, 0.5);
        let z = CVector::from_element(1, c64(0.3, -1.2));
        let psi = CMatrix::from_element(1, 1, c64(g * r + s2, 0.0));
        let est = mmse_estimate(&z, &scalar(r), &psi, g).unwrap();
        let expected = z[0] * (g.sqrt() * r / (g * r + s2));
        assert!((est[0] - expected).norm() < 1e-15);
    }

    #[test]
    fn perfect_estimation_limit() {
        let r = r2();
        let g: f64 = 2.0;
        let h = CVector::from_vec(vec![c64(0.3, 0.1), c64(-0.7, 0.2)]);
        let z = h.scale(g.sqrt());
        let psi = r.scale(g);
        let est = mmse_estimate(&z, &r, &psi, g).unwrap();
        assert!((est - &h).norm() < 1e-12);
        let c = error_covariance(&r, &psi, g).unwrap();
        assert!(c.norm() < 1e-12);
    }

    #[test]
    fn estimate_matches_explicit_inverse() {
        let (ra, rb, g, s2) = (r2(), r2b(), 1.7, 0.3);
        let psi = (&ra + &rb).scale(g) + CMatrix::identity(2, 2).scale(s2);
        let z = CVector::from_vec(vec![c64(0.9, -0.4), c64(0.1, 1.3)]);
        // explicit 2x2 inverse: [[d, -b], [-c, a]] / (ad - bc)
        let (a, b, c, d) = (psi[(0, 0)], psi[(0, 1)], psi[(1, 0)], psi[(1, 1)]);
        let det = a * d - b * c;
        let inv = CMatrix::from_row_slice(2, 2, &[d / det, -b / det, -c / det, a / det]);
        let expected = (&ra * inv * &z).scale(g.sqrt());
        let got = mmse_estimate(&z, &ra, &psi, g).unwrap();
        assert!((&got - &expected).norm() <= 1e-12 * expected.norm());
    }

    #[test]
    fn no_pilot_energy_leaves_full_uncertainty() {
        let r = r2();
        let psi = CMatrix::identity(2, 2).scale(0.1);
        let c = error_covariance(&r, &psi, 0.0).unwrap();
        assert!((c - &r).norm() < 1e-15);
    }

    #[test]
    fn singular_psi_is_reported() {
        let r = CMatrix::from_row_slice(2, 2, &[c64(1.0, 0.0), c64(1.0, 0.0), c64(1.0, 0.0), c64(1.0, 0.0)]);
        let z = CVector::from_element(2, c64(1.0, 0.0));
        assert!(matches!(mmse_estimate(&z, &r, &r, 1.0), Err(Error::IllConditioned { .. })));

        let s = setup_of(vec![vec![r.clone()]]);
        let dcc = DccAssignment::all_serving(1, 1, vec![0]);
        let err = ChannelEstimator::new(&s, &dcc, 1.0, 0.0).unwrap_err();
        assert!(matches!(err, Error::SingularPilotCovariance { pilot: 0, ap: 0, .. }));
    }

    #[test]
    fn estimator_matches_standalone_functions() {
        let s = setup_of(vec![vec![r2(), r2b()], vec![r2b(), r2()]]);
        let dcc = DccAssignment::all_serving(2, 1, vec![0, 0]);
        let est = ChannelEstimator::new(&s, &dcc, 2.0, 0.4).unwrap();
        let z = CVector::from_vec(vec![c64(0.2, 0.5), c64(-1.0, 0.3)]);
        for l in 0..2 {
            let psi = pilot_covariance(&s, &dcc, 0, l, 2.0, 0.4);
            assert_eq!(est.psi(0, l), Some(&psi));
            for k in 0..2 {
                let a = est.estimate(k, l, &z);
                let b = mmse_estimate(&z, s.corr(k, l), &psi, 2.0).unwrap();
                assert!((a - &b).norm() <= 1e-12 * b.norm());
                let c = error_covariance(s.corr(k, l), &psi, 2.0).unwrap();
                assert!((est.error_covariance(k, l) - c).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn realization_csv_shape() {
        let s = setup_of(vec![vec![r2()]]);
        let roots = CorrelationRoots::new(&s).unwrap();
        let h = sample_channels(&roots, &mut substream(0, 0, 0, Purpose::Oracle));
        let csv = h.to_csv();
        assert!(csv.starts_with("ap,ue,re0,im0,re1,im1\n0,0,"));
        assert_eq!(csv.lines().count(), 2);
    }
}
