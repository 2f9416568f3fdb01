//! Network geometry, spatial correlation and dynamic cooperation clustering.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::config::SimConfig;
use crate::linalg::{trace, CMatrix, Complex};
use crate::rng::{substream, Purpose};

/// Horizontal AP-UE distances are clamped to this value (meters).
pub const MIN_DISTANCE: f64 = 1.0;

pub type Position = [f64; 2];

/// One random drop: positions plus the correlation matrix of every link.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSetup {
    pub setup_index: u64,
    pub antennas: usize,
    pub ap_positions: Vec<Position>,
    pub ue_positions: Vec<Position>,
    num_ues: usize,
    /// `R_kl` stored AP-major at `l * K + k`.
    corr: Vec<CMatrix>,
}

impl NetworkSetup {
    /// Builds a setup from explicit correlation matrices, `corr[l][k] = R_kl`.
    /// Positions may be empty when only the statistics matter.
    pub fn from_correlations(
        ap_positions: Vec<Position>,
        ue_positions: Vec<Position>,
        corr: Vec<Vec<CMatrix>>,
    ) -> Self {
        let antennas = corr[0][0].nrows();
        let num_ues = corr[0].len();
        assert!(corr.iter().all(|row| row.len() == num_ues));
        assert!(corr.iter().flatten().all(|r| r.nrows() == antennas && r.ncols() == antennas));
        NetworkSetup {
            setup_index: 0,
            antennas,
            ap_positions,
            ue_positions,
            num_ues,
            corr: corr.into_iter().flatten().collect(),
        }
    }

    pub fn num_aps(&self) -> usize {
        self.corr.len() / self.num_ues()
    }

    pub fn num_ues(&self) -> usize {
        self.num_ues
    }

    pub fn corr(&self, ue: usize, ap: usize) -> &CMatrix {
        &self.corr[ap * self.num_ues() + ue]
    }

    /// Large-scale fading coefficient `trace(R_kl) / N`.
    pub fn gain(&self, ue: usize, ap: usize) -> f64 {
        trace(self.corr(ue, ap)) / self.antennas as f64
    }

    /// Positions as CSV, `entity,index,x_m,y_m`.
    pub fn positions_csv(&self) -> String {
        let mut out = String::from("entity,index,x_m,y_m\n");
        for (i, p) in self.ap_positions.iter().enumerate() {
            let _ = writeln!(out, "ap,{i},{},{}", p[0], p[1]);
        }
        for (i, p) in self.ue_positions.iter().enumerate() {
            let _ = writeln!(out, "ue,{i},{},{}", p[0], p[1]);
        }
        out
    }
}

/// Shortest displacement from `from` to `to` on a torus of side `side`.
pub fn wrapped_offset(from: Position, to: Position, side: f64) -> (f64, f64) {
    let axis = |d: f64| {
        [d, d - side, d + side]
            .into_iter()
            .min_by(|a, b| a.abs().total_cmp(&b.abs()))
            .unwrap()
    };
    (axis(to[0] - from[0]), axis(to[1] - from[1]))
}

/// Channel gain in dB at 3-D distance `distance`, including shadowing.
pub fn gain_db(distance: f64, shadow_db: f64, config: &SimConfig) -> f64 {
    config.pathloss_alpha - config.pathloss_beta * distance.log10() + shadow_db
}

/// Gaussian local-scattering correlation of a half-wavelength ULA with unit
/// diagonal. `angle` and `asd` are in radians.
pub fn local_scattering(antennas: usize, angle: f64, asd: f64) -> CMatrix {
    let (sin, cos) = angle.sin_cos();
    CMatrix::from_fn(antennas, antennas, |m, n| {
        let d = m as f64 - n as f64;
        let phase = PI * d * sin;
        let spread = PI * d * cos * asd;
        Complex::from_polar((-0.5 * spread * spread).exp(), phase)
    })
}

/// Half-wavelength ULA response `exp(j pi n sin(angle))`.
pub fn array_response(antennas: usize, angle: f64) -> crate::linalg::CVector {
    crate::linalg::CVector::from_fn(antennas, |n, _| Complex::from_polar(1.0, PI * n as f64 * angle.sin()))
}

/// Correlation matrix of one AP-UE link with the given shadowing sample.
pub fn spatial_correlation(ap: Position, ue: Position, shadow_db: f64, config: &SimConfig) -> CMatrix {
    let (dx, dy) = wrapped_offset(ap, ue, config.area_side);
    let horizontal = dx.hypot(dy).max(MIN_DISTANCE);
    let distance = horizontal.hypot(config.ap_height);
    let beta = 10f64.powf(gain_db(distance, shadow_db, config) / 10.0);
    let angle = dy.atan2(dx);
    local_scattering(config.antennas, angle, config.asd_deg.to_radians()).scale(beta)
}

/// Draws AP/UE positions and shadowing for drop `setup_index`.
pub fn generate_setup(config: &SimConfig, setup_index: u64) -> NetworkSetup {
    let mut rng = substream(config.seed, setup_index, 0, Purpose::Geometry);
    let side = config.area_side;
    let point = |rng: &mut rand_chacha::ChaCha8Rng| -> Position {
        [rng.random_range(0.0..side), rng.random_range(0.0..side)]
    };
    let ap_positions: Vec<Position> = (0..config.num_aps).map(|_| point(&mut rng)).collect();
    let ue_positions: Vec<Position> = (0..config.num_ues).map(|_| point(&mut rng)).collect();
    let mut corr = Vec::with_capacity(config.num_aps * config.num_ues);
    for ap in &ap_positions {
        for ue in &ue_positions {
            let z: f64 = rng.sample(StandardNormal);
            corr.push(spatial_correlation(*ap, *ue, config.shadow_std_db * z, config));
        }
    }
    NetworkSetup {
        setup_index,
        antennas: config.antennas,
        num_ues: ue_positions.len(),
        ap_positions,
        ue_positions,
        corr,
    }
}

/// Pilot assignment and cooperation clusters. Indices are zero-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DccAssignment {
    pub tau_p: usize,
    pub num_aps: usize,
    pub pilot_of: Vec<usize>,
    /// `P_k`: UEs sharing the pilot of UE k, including k, ascending.
    pub copilot_sets: Vec<Vec<usize>>,
    /// `M_k`: APs serving UE k, ascending.
    pub serving_sets: Vec<Vec<usize>>,
    /// `D_l`: UEs served by AP l, ascending.
    pub served_sets: Vec<Vec<usize>>,
    /// Master AP of each UE, when the assignment came from the clustering
    /// algorithm.
    pub masters: Option<Vec<usize>>,
}

impl DccAssignment {
    pub fn from_serving_sets(num_aps: usize, tau_p: usize, pilot_of: Vec<usize>, serving_sets: Vec<Vec<usize>>) -> Self {
        let num_ues = pilot_of.len();
        assert_eq!(serving_sets.len(), num_ues);
        let copilot_sets = (0..num_ues)
            .map(|k| (0..num_ues).filter(|&i| pilot_of[i] == pilot_of[k]).collect())
            .collect();
        let mut serving_sets = serving_sets;
        let mut served_sets = vec![Vec::new(); num_aps];
        for (k, set) in serving_sets.iter_mut().enumerate() {
            set.sort_unstable();
            set.dedup();
            for &l in set.iter() {
                served_sets[l].push(k);
            }
        }
        DccAssignment {
            tau_p,
            num_aps,
            pilot_of,
            copilot_sets,
            serving_sets,
            served_sets,
            masters: None,
        }
    }

    /// Every AP serves every UE.
    pub fn all_serving(num_aps: usize, tau_p: usize, pilot_of: Vec<usize>) -> Self {
        let sets = vec![(0..num_aps).collect(); pilot_of.len()];
        Self::from_serving_sets(num_aps, tau_p, pilot_of, sets)
    }

    /// Same pilots, but every AP serves every UE.
    pub fn to_all_serving(&self) -> Self {
        let mut out = Self::all_serving(self.num_aps, self.tau_p, self.pilot_of.clone());
        out.masters = self.masters.clone();
        out
    }

    pub fn num_ues(&self) -> usize {
        self.pilot_of.len()
    }

    pub fn serves(&self, ap: usize, ue: usize) -> bool {
        self.serving_sets[ue].binary_search(&ap).is_ok()
    }

    /// Position of `ap` inside the ordered `M_k`.
    pub fn position_in_cluster(&self, ue: usize, ap: usize) -> Option<usize> {
        self.serving_sets[ue].binary_search(&ap).ok()
    }

    /// Checks the structural invariants. At most one UE per pilot is served
    /// by each AP, unless all of them have that AP as master.
    pub fn validate(&self) -> Result<(), String> {
        let k_total = self.num_ues();
        for k in 0..k_total {
            if self.pilot_of[k] >= self.tau_p {
                return Err(format!("UE {k} has pilot {} >= tau_p", self.pilot_of[k]));
            }
            if !self.copilot_sets[k].contains(&k) {
                return Err(format!("UE {k} missing from its own co-pilot set"));
            }
            for i in 0..k_total {
                let shares = self.pilot_of[i] == self.pilot_of[k];
                if shares != self.copilot_sets[k].contains(&i) || shares != self.copilot_sets[i].contains(&k) {
                    return Err(format!("co-pilot sets of UEs {k} and {i} disagree"));
                }
            }
            if self.serving_sets[k].is_empty() {
                return Err(format!("UE {k} is not served"));
            }
        }
        for l in 0..self.num_aps {
            for k in 0..k_total {
                if self.serves(l, k) != self.served_sets[l].contains(&k) {
                    return Err(format!("M/D duality broken for AP {l}, UE {k}"));
                }
            }
            for t in 0..self.tau_p {
                let on_pilot: Vec<usize> = self.served_sets[l]
                    .iter()
                    .copied()
                    .filter(|&k| self.pilot_of[k] == t)
                    .collect();
                if on_pilot.len() > 1 {
                    let forced = self
                        .masters
                        .as_ref()
                        .is_some_and(|m| on_pilot.iter().all(|&k| m[k] == l));
                    if !forced {
                        return Err(format!("AP {l} serves {} UEs on pilot {t}", on_pilot.len()));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Joint pilot assignment and cluster formation.
///
/// Each UE's master is its strongest AP. UEs are taken in index order and
/// given the pilot with the least accumulated gain of earlier co-pilot UEs at
/// that master. Every AP then serves, per pilot, its strongest UE on that
/// pilot, while masters always serve the UEs they appointed. Ties go to the
/// lowest index.
pub fn assign_pilots_and_clusters(setup: &NetworkSetup, tau_p: usize) -> DccAssignment {
    let num_aps = setup.num_aps();
    let num_ues = setup.num_ues();
    let argmax = |it: &mut dyn Iterator<Item = (usize, f64)>| {
        let mut best: Option<(usize, f64)> = None;
        for (i, v) in it {
            if best.is_none_or(|(_, b)| v > b) {
                best = Some((i, v));
            }
        }
        best.map(|(i, _)| i)
    };

    let masters: Vec<usize> = (0..num_ues)
        .map(|k| argmax(&mut (0..num_aps).map(|l| (l, setup.gain(k, l)))).unwrap())
        .collect();

    let mut pilot_of = Vec::with_capacity(num_ues);
    for &master in &masters {
        let mut contamination = vec![0.0; tau_p];
        for (i, &t) in pilot_of.iter().enumerate() {
            contamination[t] += setup.gain(i, master);
        }
        let mut best = 0;
        for t in 1..tau_p {
            if contamination[t] < contamination[best] {
                best = t;
            }
        }
        pilot_of.push(best);
    }

    let mut serving_sets = vec![Vec::new(); num_ues];
    for l in 0..num_aps {
        for t in 0..tau_p {
            let appointed: Vec<usize> = (0..num_ues).filter(|&k| pilot_of[k] == t && masters[k] == l).collect();
            if !appointed.is_empty() {
                for k in appointed {
                    serving_sets[k].push(l);
                }
                continue;
            }
            let strongest = argmax(
                &mut (0..num_ues)
                    .filter(|&k| pilot_of[k] == t)
                    .map(|k| (k, setup.gain(k, l))),
            );
            if let Some(k) = strongest {
                serving_sets[k].push(l);
            }
        }
    }

    let mut dcc = DccAssignment::from_serving_sets(num_aps, tau_p, pilot_of, serving_sets);
    dcc.masters = Some(masters);
    dcc
}
