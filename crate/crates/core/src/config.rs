//! Scenario configuration.
//!
//! Defaults reproduce the reference deployment (4×4 BS arrays, two CM-UEs, two
//! CP-UEs, 30 dBm budget, 7 dB sensing threshold, 1000-file Zipf catalogue) at
//! desk scale: 16 reflecting elements instead of 50. [`SystemConfig::paper_scale`]
//! restores the full-size surface.
//!
//! Files are TOML. Every key is optional and falls back to its default; unknown
//! keys are rejected with the key name in the diagnostic. A few dB-valued
//! convenience keys (`p_bs_dbm`, `gamma_tar_db`, `noise_*_dbm`) are accepted on
//! ingest and converted to the linear fields.

use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{Error, Result};

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn dbm_to_watt(dbm: f64) -> f64 {
    db_to_linear(dbm - 30.0)
}

fn one_or_many<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<f64>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany {
        One(f64),
        Many(Vec<f64>),
    }
    Ok(match OneOrMany::deserialize(d)? {
        OneOrMany::One(x) => vec![x],
        OneOrMany::Many(v) => v,
    })
}

/// Looks up entry `i` of a per-item list; single-entry lists broadcast.
fn per_item(v: &[f64], i: usize) -> f64 {
    if v.len() == 1 {
        v[0]
    } else {
        v[i]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CacheConfig {
    pub n_files: usize,
    pub capacity: f64,
    #[serde(deserialize_with = "one_or_many")]
    pub lengths: Vec<f64>,
    #[serde(deserialize_with = "one_or_many")]
    pub backhaul_price: Vec<f64>,
    /// Zipf skewness.
    pub skew: f64,
    /// Backhaul rate per CP-UE, bit/s.
    #[serde(deserialize_with = "one_or_many")]
    pub backhaul_rate: Vec<f64>,
}

impl Default for CacheConfig {
    fn default() -> Self {
        Self {
            n_files: 1000,
            capacity: 1e6,
            lengths: vec![1e5],
            backhaul_price: vec![1.0],
            skew: 1.4,
            backhaul_rate: vec![100e6],
        }
    }
}

impl CacheConfig {
    pub fn length(&self, v: usize) -> f64 {
        per_item(&self.lengths, v)
    }

    pub fn price(&self, v: usize) -> f64 {
        per_item(&self.backhaul_price, v)
    }

    pub fn backhaul_rate(&self, l: usize) -> f64 {
        per_item(&self.backhaul_rate, l)
    }

    pub fn validate(&self, n_cp: usize) -> Result<()> {
        if self.n_files == 0 {
            return Err(Error::config("cache.n_files", "must be at least 1"));
        }
        if self.capacity.is_nan() || self.capacity < 0.0 {
            return Err(Error::config("cache.capacity", "must be nonnegative"));
        }
        check_list("cache.lengths", &self.lengths, self.n_files, |q| q > 0.0)?;
        check_list("cache.backhaul_price", &self.backhaul_price, self.n_files, |x| x >= 0.0)?;
        if self.skew.is_nan() || self.skew < 0.0 {
            return Err(Error::config("cache.skew", "must be nonnegative"));
        }
        if n_cp > 0 {
            check_list("cache.backhaul_rate", &self.backhaul_rate, n_cp, |r| r >= 0.0)?;
        }
        Ok(())
    }
}

fn check_list(key: &str, v: &[f64], n: usize, ok: impl Fn(f64) -> bool) -> Result<()> {
    if v.len() != 1 && v.len() != n {
        return Err(Error::config(
            key,
            format!("expected 1 or {n} entries, got {}", v.len()),
        ));
    }
    if let Some(bad) = v.iter().find(|&&x| !x.is_finite() || !ok(x)) {
        return Err(Error::config(key, format!("value {bad} out of range")));
    }
    Ok(())
}

/// Planar deployment. Users are dropped uniformly in the rectangle
/// `user_x × user_y` for every seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Geometry {
    pub bs: [f64; 2],
    pub irs: [f64; 2],
    pub user_x: [f64; 2],
    pub user_y: [f64; 2],
    /// IRS-to-target distance, m.
    pub target_distance_m: f64,
    /// Target direction seen from the IRS, rad.
    pub theta: f64,
}

impl Default for Geometry {
    fn default() -> Self {
        Self {
            bs: [-50.0, 0.0],
            irs: [0.0, 6.0],
            user_x: [10.0, 40.0],
            user_y: [0.0, 1.0],
            target_distance_m: 3.0,
            theta: 40f64.to_radians(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Exponents {
    /// BS ↔ IRS.
    pub br: f64,
    /// IRS ↔ user.
    pub ru: f64,
    /// IRS ↔ target.
    pub rt: f64,
    /// CP-UE ↔ CM-UE.
    pub mp: f64,
}

impl Default for Exponents {
    fn default() -> Self {
        Self {
            br: 2.2,
            ru: 2.5,
            rt: 2.2,
            mp: 3.9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    pub n_tx: usize,
    pub n_rx: usize,
    pub m_passive: usize,
    pub m_active: usize,
    pub n_cm: usize,
    pub n_cp: usize,
    pub bandwidth_hz: f64,
    pub coherence_time_s: f64,
    pub p_bs_watt: f64,
    pub gamma_tar_linear: f64,
    #[serde(deserialize_with = "one_or_many")]
    pub e_max_joule: Vec<f64>,
    pub zeta: f64,
    #[serde(deserialize_with = "one_or_many")]
    pub eps_cycles_per_bit: Vec<f64>,
    pub noise_bs_watt: f64,
    pub noise_ue_watt: f64,
    pub noise_irs_watt: f64,
    pub cache: CacheConfig,
    pub geometry: Geometry,
    /// Path gain at the reference distance, linear.
    pub pathloss: f64,
    pub d0_m: f64,
    pub exponents: Exponents,
    pub rician_k_db: f64,
    pub si_power_db: f64,
    /// Target reflection coefficient magnitude. When absent it is taken as the
    /// amplitude path gain over the IRS–target distance.
    pub eta_rt: Option<f64>,
    pub seed: u64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            n_tx: 4,
            n_rx: 4,
            m_passive: 16,
            m_active: 10,
            n_cm: 2,
            n_cp: 2,
            bandwidth_hz: 1e6,
            coherence_time_s: 1.0,
            p_bs_watt: dbm_to_watt(30.0),
            gamma_tar_linear: db_to_linear(7.0),
            e_max_joule: vec![0.01],
            zeta: 1e-26,
            eps_cycles_per_bit: vec![1000.0],
            noise_bs_watt: dbm_to_watt(-90.0),
            noise_ue_watt: dbm_to_watt(-90.0),
            noise_irs_watt: dbm_to_watt(-90.0),
            cache: CacheConfig::default(),
            geometry: Geometry::default(),
            pathloss: db_to_linear(-30.0),
            d0_m: 1.0,
            exponents: Exponents::default(),
            rician_k_db: 3.0,
            si_power_db: -110.0,
            eta_rt: None,
            seed: 1,
        }
    }
}

/// dB-valued key, the linear key it sets, and the conversion.
type DbAlias = (&'static str, &'static str, fn(f64) -> f64);

const DB_ALIASES: [DbAlias; 5] = [
    ("p_bs_dbm", "p_bs_watt", dbm_to_watt),
    ("gamma_tar_db", "gamma_tar_linear", db_to_linear),
    ("noise_bs_dbm", "noise_bs_watt", dbm_to_watt),
    ("noise_ue_dbm", "noise_ue_watt", dbm_to_watt),
    ("noise_irs_dbm", "noise_irs_watt", dbm_to_watt),
];

impl SystemConfig {
    /// Full-size surface: 50 reflecting and 10 sensing elements.
    pub fn paper_scale() -> Self {
        Self {
            m_passive: 50,
            m_active: 10,
            ..Self::default()
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Parse(e.to_string()))?;
        for (alias, key, convert) in DB_ALIASES {
            if let Some(v) = table.remove(alias) {
                let x = v
                    .as_float()
                    .or_else(|| v.as_integer().map(|i| i as f64))
                    .ok_or_else(|| Error::config(alias, "expected a number"))?;
                table.insert(key.to_string(), toml::Value::Float(convert(x)));
            }
        }
        let cfg: SystemConfig = table.try_into().map_err(|e: toml::de::Error| {
            let msg = e.to_string();
            let key = offending_key(&msg).unwrap_or_else(|| "<root>".to_string());
            Error::config(key, msg.trim())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Loads a config file; the literal path `default` yields the defaults.
    pub fn load(path: &Path) -> Result<Self> {
        if path.as_os_str() == "default" {
            return Ok(Self::default());
        }
        if path.as_os_str() == "paper" {
            return Ok(Self::paper_scale());
        }
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn e_max(&self, l: usize) -> f64 {
        per_item(&self.e_max_joule, l)
    }

    pub fn eps(&self, l: usize) -> f64 {
        per_item(&self.eps_cycles_per_bit, l)
    }

    pub fn rician_k(&self) -> f64 {
        crate::config::db_to_linear(self.rician_k_db)
    }

    pub fn si_power(&self) -> f64 {
        db_to_linear(self.si_power_db)
    }

    pub fn eta_rt(&self) -> f64 {
        self.eta_rt.unwrap_or_else(|| {
            let pl = self.pathloss * (self.geometry.target_distance_m / self.d0_m).powf(-self.exponents.rt);
            pl.sqrt()
        })
    }

    pub fn validate(&self) -> Result<()> {
        for (key, n) in [
            ("n_tx", self.n_tx),
            ("n_rx", self.n_rx),
            ("m_passive", self.m_passive),
            ("m_active", self.m_active),
        ] {
            if n == 0 {
                return Err(Error::config(key, "must be at least 1"));
            }
        }
        for (key, x) in [
            ("bandwidth_hz", self.bandwidth_hz),
            ("coherence_time_s", self.coherence_time_s),
            ("p_bs_watt", self.p_bs_watt),
            ("gamma_tar_linear", self.gamma_tar_linear),
            ("zeta", self.zeta),
            ("noise_bs_watt", self.noise_bs_watt),
            ("noise_ue_watt", self.noise_ue_watt),
            ("noise_irs_watt", self.noise_irs_watt),
            ("pathloss", self.pathloss),
            ("d0_m", self.d0_m),
            ("geometry.target_distance_m", self.geometry.target_distance_m),
        ] {
            if !(x.is_finite() && x > 0.0) {
                return Err(Error::config(key, format!("must be positive, got {x}")));
            }
        }
        if self.n_cp > 0 {
            check_list("e_max_joule", &self.e_max_joule, self.n_cp, |e| e > 0.0)?;
            check_list("eps_cycles_per_bit", &self.eps_cycles_per_bit, self.n_cp, |e| e > 0.0)?;
        }
        let theta = self.geometry.theta;
        if !(0.0..std::f64::consts::PI).contains(&theta) {
            return Err(Error::config("geometry.theta", "must lie in [0, pi)"));
        }
        if let Some(eta) = self.eta_rt {
            if !(eta.is_finite() && eta > 0.0) {
                return Err(Error::config("eta_rt", "must be positive"));
            }
        }
        if !self.rician_k_db.is_finite() || !self.si_power_db.is_finite() {
            return Err(Error::config("rician_k_db", "must be finite"));
        }
        self.cache.validate(self.n_cp)
    }
}

/// Pulls a key name out of a toml/serde diagnostic.
fn offending_key(msg: &str) -> Option<String> {
    for marker in ["unknown field `", "missing field `"] {
        if let Some(i) = msg.find(marker) {
            let rest = &msg[i + marker.len()..];
            return rest.find('`').map(|j| rest[..j].to_string());
        }
    }
    // toml renders type errors with the key path after "for key `".
    if let Some(i) = msg.find("for key `") {
        let rest = &msg[i + 9..];
        return rest.find('`').map(|j| rest[..j].to_string());
    }
    None
}
