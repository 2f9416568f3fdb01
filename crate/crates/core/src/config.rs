//! Simulation configuration and its flat `key = value` file format.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CombinerKind {
    #[serde(rename = "MR")]
    Mr,
    #[serde(rename = "partial-MMSE")]
    PartialMmse,
}

/// Second-layer decoding rule evaluated by a campaign.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LsfdMode {
    /// Uniform averaging of the local estimates.
    #[serde(rename = "level2")]
    Level2,
    #[serde(rename = "level3-opt")]
    Level3Opt,
    #[serde(rename = "level3-nopt")]
    Level3Nopt,
    /// Optimal LSFD with every AP serving every UE.
    #[serde(rename = "original-opt")]
    OriginalOpt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PowerMode {
    #[serde(rename = "full")]
    Full,
    #[serde(rename = "maxmin")]
    MaxMin,
}

macro_rules! string_enum {
    ($ty:ty { $($variant:path => $name:literal $(| $alias:literal)*),+ $(,)? }) => {
        impl $ty {
            pub fn as_str(&self) -> &'static str {
                match self { $($variant => $name),+ }
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $ty {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                let lower = s.trim().to_ascii_lowercase();
                $(
                    if lower == $name.to_ascii_lowercase() $(|| lower == $alias)* {
                        return Ok($variant);
                    }
                )+
                Err(Error::Config(format!("unknown {} `{}`", stringify!($ty), s.trim())))
            }
        }
    };
}

string_enum!(CombinerKind {
    CombinerKind::Mr => "MR",
    CombinerKind::PartialMmse => "partial-MMSE" | "pmmse" | "partial_mmse",
});

string_enum!(LsfdMode {
    LsfdMode::Level2 => "level2",
    LsfdMode::Level3Opt => "level3-opt" | "opt",
    LsfdMode::Level3Nopt => "level3-nopt" | "n-opt" | "nopt",
    LsfdMode::OriginalOpt => "original-opt" | "original",
});

string_enum!(PowerMode {
    PowerMode::Full => "full",
    PowerMode::MaxMin => "maxmin" | "mmf" | "max-min",
});

/// Parses a comma-separated list, e.g. `level2,level3-opt`.
pub fn parse_list<T: FromStr<Err = Error> + Ord>(s: &str) -> Result<Vec<T>> {
    let mut out = s
        .split(',')
        .filter(|p| !p.trim().is_empty())
        .map(str::parse)
        .collect::<Result<Vec<T>>>()?;
    out.sort();
    out.dedup();
    if out.is_empty() {
        return Err(Error::Config(format!("empty list `{s}`")));
    }
    Ok(out)
}

fn join<T: fmt::Display>(items: &[T]) -> String {
    items
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(",")
}

/// Scenario, estimator and optimizer parameters. Powers are in watts,
/// distances in meters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    #[serde(rename = "L")]
    pub num_aps: usize,
    #[serde(rename = "N")]
    pub antennas: usize,
    #[serde(rename = "K")]
    pub num_ues: usize,
    pub area_side: f64,
    pub tau_c: usize,
    pub tau_p: usize,
    pub rho_p: f64,
    pub rho_u: f64,
    pub sigma2: f64,
    pub asd_deg: f64,
    /// Channel gain at 1 m, in dB.
    pub pathloss_alpha: f64,
    /// Pathloss exponent times ten.
    pub pathloss_beta: f64,
    pub shadow_std_db: f64,
    pub ap_height: f64,
    pub mc_trials: usize,
    pub n_setups: usize,
    pub seed: u64,
    #[serde(rename = "R_design")]
    pub r_design: usize,
    pub combiner_kind: CombinerKind,
    #[serde(rename = "lsfd_mode")]
    pub lsfd_modes: Vec<LsfdMode>,
    #[serde(rename = "power_mode")]
    pub power_modes: Vec<PowerMode>,
    pub fp_tol: f64,
    pub max_iters: usize,
}

/// Converts dBm to watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0) / 1000.0
}

impl Default for SimConfig {
    /// 100 APs with 4 antennas and 40 UEs in a 1 km square.
    fn default() -> Self {
        SimConfig {
            num_aps: 100,
            antennas: 4,
            num_ues: 40,
            area_side: 1000.0,
            tau_c: 200,
            tau_p: 10,
            rho_p: 0.1,
            rho_u: 0.1,
            sigma2: dbm_to_watts(-94.0),
            asd_deg: 15.0,
            pathloss_alpha: -30.5,
            pathloss_beta: 36.7,
            shadow_std_db: 4.0,
            ap_height: 10.0,
            mc_trials: 1000,
            n_setups: 400,
            seed: 0,
            r_design: 5,
            combiner_kind: CombinerKind::PartialMmse,
            lsfd_modes: vec![LsfdMode::Level2, LsfdMode::Level3Opt, LsfdMode::Level3Nopt],
            power_modes: vec![PowerMode::Full],
            fp_tol: 1e-3,
            max_iters: 500,
        }
    }
}

impl SimConfig {
    /// A scaled-down scenario that runs in seconds: 25 APs, 10 UEs, 5 pilots,
    /// 50 setups of 200 trials each.
    pub fn desk_scale() -> Self {
        SimConfig {
            num_aps: 25,
            num_ues: 10,
            tau_p: 5,
            mc_trials: 200,
            n_setups: 50,
            ..SimConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.to_string()));
        if self.num_aps == 0 || self.antennas == 0 || self.num_ues == 0 {
            return bad("L, N and K must be at least 1");
        }
        if self.mc_trials == 0 || self.n_setups == 0 || self.max_iters == 0 {
            return bad("mc_trials, n_setups and max_iters must be at least 1");
        }
        if !(self.tau_p > 0 && self.tau_p < self.tau_c) {
            return bad("need 0 < tau_p < tau_c");
        }
        if !(self.rho_p > 0.0 && self.rho_u > 0.0 && self.sigma2 > 0.0) {
            return bad("rho_p, rho_u and sigma2 must be positive");
        }
        if self.r_design == 0 {
            return bad("R_design must be at least 1");
        }
        if !(self.area_side > 0.0 && self.area_side.is_finite()) {
            return bad("area_side must be positive");
        }
        if !(self.asd_deg >= 0.0 && self.shadow_std_db >= 0.0 && self.ap_height >= 0.0) {
            return bad("asd_deg, shadow_std_db and ap_height must be non-negative");
        }
        if !(self.fp_tol > 0.0) {
            return bad("fp_tol must be positive");
        }
        if self.lsfd_modes.is_empty() || self.power_modes.is_empty() {
            return bad("at least one lsfd_mode and power_mode are required");
        }
        Ok(())
    }

    /// Sets one field from its key. Keys are the field names of the file format.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| Error::Config(format!("bad value `{value}` for `{key}`")))
        }
        match key {
            "L" => self.num_aps = num(key, value)?,
            "N" => self.antennas = num(key, value)?,
            "K" => self.num_ues = num(key, value)?,
            "area_side" => self.area_side = num(key, value)?,
            "tau_c" => self.tau_c = num(key, value)?,
            "tau_p" => self.tau_p = num(key, value)?,
            "rho_p" => self.rho_p = num(key, value)?,
            "rho_u" => self.rho_u = num(key, value)?,
            "sigma2" => self.sigma2 = num(key, value)?,
            "asd_deg" => self.asd_deg = num(key, value)?,
            "pathloss_alpha" => self.pathloss_alpha = num(key, value)?,
            "pathloss_beta" => self.pathloss_beta = num(key, value)?,
            "shadow_std_db" => self.shadow_std_db = num(key, value)?,
            "ap_height" => self.ap_height = num(key, value)?,
            "mc_trials" => self.mc_trials = num(key, value)?,
            "n_setups" => self.n_setups = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "R_design" => self.r_design = num(key, value)?,
            "combiner_kind" => self.combiner_kind = value.parse()?,
            "lsfd_mode" => self.lsfd_modes = parse_list(value)?,
            "power_mode" => self.power_modes = parse_list(value)?,
            "fp_tol" => self.fp_tol = num(key, value)?,
            "max_iters" => self.max_iters = num(key, value)?,
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// Parses the `key = value` format on top of the defaults. `#` starts a
    /// comment; blank lines are ignored. The result is validated.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = SimConfig::default();
        cfg.apply(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Overrides fields from `key = value` text without validating.
    pub fn apply(&mut self, text: &str) -> Result<()> {
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::ConfigParse {
                line: idx + 1,
                msg: "expected `key = value`".into(),
            })?;
            self.set(key.trim(), value.trim()).map_err(|e| Error::ConfigParse {
                line: idx + 1,
                msg: e.to_string(),
            })?;
        }
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Renders every field in the file format; `parse` reads it back exactly.
    pub fn to_key_values(&self) -> String {
        let pairs: Vec<(&str, String)> = vec![
            ("L", self.num_aps.to_string()),
            ("N", self.antennas.to_string()),
            ("K", self.num_ues.to_string()),
            ("area_side", self.area_side.to_string()),
            ("tau_c", self.tau_c.to_string()),
            ("tau_p", self.tau_p.to_string()),
            ("rho_p", self.rho_p.to_string()),
            ("rho_u", self.rho_u.to_string()),
            ("sigma2", self.sigma2.to_string()),
            ("asd_deg", self.asd_deg.to_string()),
            ("pathloss_alpha", self.pathloss_alpha.to_string()),
            ("pathloss_beta", self.pathloss_beta.to_string()),
            ("shadow_std_db", self.shadow_std_db.to_string()),
            ("ap_height", self.ap_height.to_string()),
            ("mc_trials", self.mc_trials.to_string()),
            ("n_setups", self.n_setups.to_string()),
            ("seed", self.seed.to_string()),
            ("R_design", self.r_design.to_string()),
            ("combiner_kind", self.combiner_kind.to_string()),
            ("lsfd_mode", join(&self.lsfd_modes)),
            ("power_mode", join(&self.power_modes)),
            ("fp_tol", self.fp_tol.to_string()),
            ("max_iters", self.max_iters.to_string()),
        ];
        pairs
            .into_iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }

    /// Total pilot energy factor `tau_p * rho_p`.
    pub fn pilot_gain(&self) -> f64 {
        self.tau_p as f64 * self.rho_p
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        SimConfig::default().validate().unwrap();
        SimConfig::desk_scale().validate().unwrap();
        let s = SimConfig::default().sigma2;
        assert!((10.0 * (s * 1000.0).log10() + 94.0).abs() < 1e-12);
    }

    #[test]
    fn parses_comments_and_lists() {
        let text = "# desk run\nL = 25\nK=10 # users\n\ntau_p = 5\nlsfd_mode = level3-opt, level2\npower_mode = maxmin\ncombiner_kind = MR\n";
        let cfg = SimConfig::parse(text).unwrap();
        assert_eq!(cfg.num_aps, 25);
        assert_eq!(cfg.num_ues, 10);
        assert_eq!(cfg.lsfd_modes, vec![LsfdMode::Level2, LsfdMode::Level3Opt]);
        assert_eq!(cfg.power_modes, vec![PowerMode::MaxMin]);
        assert_eq!(cfg.combiner_kind, CombinerKind::Mr);
    }

    #[test]
    fn round_trips_through_text() {
        let mut cfg = SimConfig::desk_scale();
        cfg.sigma2 = 3.981_071_705_534_97e-13;
        cfg.lsfd_modes = vec![LsfdMode::Level3Nopt, LsfdMode::OriginalOpt];
        assert_eq!(SimConfig::parse(&cfg.to_key_values()).unwrap(), cfg);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            SimConfig::parse("L = 4\nnonsense\n"),
            Err(Error::ConfigParse { line: 2, .. })
        ));
        assert!(SimConfig::parse("bogus = 1").is_err());
        assert!(SimConfig::parse("tau_p = 200").is_err());
        assert!(SimConfig::parse("R_design = 0").is_err());
        assert!(SimConfig::parse("sigma2 = 0").is_err());
        assert!(SimConfig::parse("lsfd_mode = level9").is_err());
    }
}
