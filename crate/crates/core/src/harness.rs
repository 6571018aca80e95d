//! Seeded Monte-Carlo sweeps over one system parameter, CSV emission and
//! median/IQR aggregation.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channels::draw_seeded;
use crate::config::{db_to_linear, dbm_to_watt, SystemConfig};
use crate::error::{Error, Result};
use crate::orchestrator::{run, RunOptions, RunStatus, Scheme};

/// A sweepable parameter. Sweep values use the unit in the variant docs;
/// CSV output is always linear.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    /// Reflecting elements.
    MPassive,
    /// BS power budget, dBm.
    PBsDbm,
    /// Radar SINR threshold, dB.
    GammaTarDb,
    /// Backhaul rate of every CP-UE, bit/s.
    BackhaulRate,
    /// Zipf skewness.
    Skew,
    /// Transmit antennas.
    NTx,
}

impl SweepParam {
    pub const ALL: [SweepParam; 6] = [
        SweepParam::MPassive,
        SweepParam::PBsDbm,
        SweepParam::GammaTarDb,
        SweepParam::BackhaulRate,
        SweepParam::Skew,
        SweepParam::NTx,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SweepParam::MPassive => "m_passive",
            SweepParam::PBsDbm => "p_bs_dbm",
            SweepParam::GammaTarDb => "gamma_tar_db",
            SweepParam::BackhaulRate => "backhaul_rate",
            SweepParam::Skew => "skew",
            SweepParam::NTx => "n_tx",
        }
    }

    fn is_count(self) -> bool {
        matches!(self, SweepParam::MPassive | SweepParam::NTx)
    }

    /// Returns `base` with this parameter set to `value`.
    pub fn apply(self, base: &SystemConfig, value: f64) -> Result<SystemConfig> {
        let bad = |reason: &str| Error::config(self.name(), format!("{reason}, got {value}"));
        if !value.is_finite() {
            return Err(bad("value must be finite"));
        }
        if self.is_count() && (value < 1.0 || value.fract() != 0.0) {
            return Err(bad("value must be a positive integer"));
        }
        let mut cfg = base.clone();
        match self {
            SweepParam::MPassive => cfg.m_passive = value as usize,
            SweepParam::NTx => cfg.n_tx = value as usize,
            SweepParam::PBsDbm => cfg.p_bs_watt = dbm_to_watt(value),
            SweepParam::GammaTarDb => cfg.gamma_tar_linear = db_to_linear(value),
            SweepParam::BackhaulRate => {
                if value < 0.0 {
                    return Err(bad("backhaul rate must be nonnegative"));
                }
                cfg.cache.backhaul_rate = vec![value];
            }
            SweepParam::Skew => {
                if value < 0.0 {
                    return Err(bad("skew must be nonnegative"));
                }
                cfg.cache.skew = value;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SweepParam::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::config("parameter", format!("unknown sweep parameter `{s}`")))
    }
}

fn default_schemes() -> Vec<Scheme> {
    vec![Scheme::Proposed]
}

fn default_seeds() -> usize {
    10
}

/// One sweep: every (value, scheme, seed) cell is an independent run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub parameter: SweepParam,
    pub values: Vec<f64>,
    #[serde(default = "default_schemes")]
    pub schemes: Vec<Scheme>,
    #[serde(default = "default_seeds")]
    pub n_seeds: usize,
    /// CSV destination; relative paths resolve against the caller's choice.
    #[serde(default)]
    pub output: Option<PathBuf>,
}

impl SweepSpec {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let spec: SweepSpec = toml::from_str(text).map_err(|e| {
            let key = e.span().map(|s| text[s].to_string()).unwrap_or_default();
            Error::config(key, e.message().to_string())
        })?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self, base: &SystemConfig) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::config("values", "at least one value is required"));
        }
        if self.schemes.is_empty() {
            return Err(Error::config("schemes", "at least one scheme is required"));
        }
        if self.n_seeds == 0 {
            return Err(Error::config("n_seeds", "must be at least 1"));
        }
        for &v in &self.values {
            self.parameter.apply(base, v)?;
        }
        Ok(())
    }
}

/// One CSV row. Field order is the CSV header and is part of the output format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub parameter: SweepParam,
    pub value: f64,
    pub scheme: Scheme,
    pub seed: u64,
    pub m_passive: usize,
    pub n_tx: usize,
    pub p_bs_watt: f64,
    pub gamma_tar_linear: f64,
    pub backhaul_rate: f64,
    pub skew: f64,
    pub status: RunStatus,
    pub iterations: usize,
    pub utility: f64,
    pub sum_bits: f64,
    pub comm_bits: f64,
    pub offload_bits: f64,
    pub local_bits: f64,
    pub backhaul_cost: f64,
    pub res_power: f64,
    pub res_radar: f64,
    pub res_unit_modulus: f64,
    pub res_energy: f64,
    pub res_cache: f64,
    pub wall_ms: f64,
}

pub const CSV_HEADER: [&str; 24] = [
    "parameter",
    "value",
    "scheme",
    "seed",
    "m_passive",
    "n_tx",
    "p_bs_watt",
    "gamma_tar_linear",
    "backhaul_rate",
    "skew",
    "status",
    "iterations",
    "utility",
    "sum_bits",
    "comm_bits",
    "offload_bits",
    "local_bits",
    "backhaul_cost",
    "res_power",
    "res_radar",
    "res_unit_modulus",
    "res_energy",
    "res_cache",
    "wall_ms",
];

/// Runs one cell: channels and optimizer randomness both come from `seed`.
pub fn run_cell(
    cfg: &SystemConfig,
    parameter: SweepParam,
    value: f64,
    scheme: Scheme,
    seed: u64,
    base_opts: &RunOptions,
) -> Result<SweepRow> {
    let ch = draw_seeded(cfg, seed)?;
    let opts = RunOptions {
        scheme,
        seed,
        ..*base_opts
    };
    let r = run(cfg, &ch, &opts)?;
    let m = &r.metrics;
    Ok(SweepRow {
        parameter,
        value,
        scheme,
        seed,
        m_passive: cfg.m_passive,
        n_tx: cfg.n_tx,
        p_bs_watt: cfg.p_bs_watt,
        gamma_tar_linear: cfg.gamma_tar_linear,
        backhaul_rate: cfg.cache.backhaul_rate(0),
        skew: cfg.cache.skew,
        status: r.status,
        iterations: r.iterations,
        utility: m.utility,
        sum_bits: m.sum_bits(),
        comm_bits: m.comm_bits(),
        offload_bits: m.offload_bits(),
        local_bits: m.local_bits(),
        backhaul_cost: m.d_total,
        res_power: r.residuals.power,
        res_radar: r.residuals.radar,
        res_unit_modulus: r.residuals.unit_modulus,
        res_energy: r.residuals.energy,
        res_cache: r.residuals.cache,
        wall_ms: r.wall_ms.iter().sum(),
    })
}

/// Runs every cell on the rayon pool. Rows come back ordered by
/// (value, scheme, seed) regardless of scheduling. Seeds are
/// `base.seed .. base.seed + n_seeds`.
pub fn run_sweep(base: &SystemConfig, spec: &SweepSpec, opts: &RunOptions) -> Result<Vec<SweepRow>> {
    spec.validate(base)?;
    let mut cells = Vec::new();
    for &value in &spec.values {
        let cfg = spec.parameter.apply(base, value)?;
        for &scheme in &spec.schemes {
            for s in 0..spec.n_seeds as u64 {
                cells.push((cfg.clone(), value, scheme, base.seed.wrapping_add(s)));
            }
        }
    }
    cells
        .into_par_iter()
        .map(|(cfg, value, scheme, seed)| run_cell(&cfg, spec.parameter, value, scheme, seed, opts))
        .collect()
}

pub fn write_csv<W: std::io::Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(CSV_HEADER)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv_file(rows: &[SweepRow], path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    write_csv(rows, std::fs::File::create(path)?)
}

pub fn read_csv<R: std::io::Read>(input: R) -> Result<Vec<SweepRow>> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != CSV_HEADER {
        return Err(Error::Parse(format!("unexpected CSV header: {}", header.join(","))));
    }
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

/// Median and interquartile range, quartiles by linear interpolation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
}

impl Summary {
    pub fn iqr(&self) -> f64 {
        self.q3 - self.q1
    }
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn summarize(values: &[f64]) -> Result<Summary> {
    if values.is_empty() {
        return Err(Error::EmptyGroup("no values to summarize".into()));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(Summary {
        n: v.len(),
        median: quantile(&v, 0.5),
        q1: quantile(&v, 0.25),
        q3: quantile(&v, 0.75),
    })
}

/// Plot-ready statistics of one (scheme, value) group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub scheme: Scheme,
    pub value: f64,
    pub utility: Summary,
    pub sum_bits: Summary,
}

/// Groups rows by (scheme, value) in first-seen order.
pub fn aggregate(rows: &[SweepRow]) -> Result<Vec<Aggregate>> {
    if rows.is_empty() {
        return Err(Error::EmptyGroup("no rows to aggregate".into()));
    }
    let mut order: Vec<(Scheme, u64)> = Vec::new();
    let mut groups: BTreeMap<(Scheme, u64), (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for row in rows {
        let key = (row.scheme, row.value.to_bits());
        let g = groups.entry(key).or_insert_with(|| {
            order.push(key);
            (Vec::new(), Vec::new())
        });
        g.0.push(row.utility);
        g.1.push(row.sum_bits);
    }
    order
        .into_iter()
        .map(|key| {
            let (u, b) = &groups[&key];
            Ok(Aggregate {
                scheme: key.0,
                value: f64::from_bits(key.1),
                utility: summarize(u)?,
                sum_bits: summarize(b)?,
            })
        })
        .collect()
}

pub fn write_aggregate_csv<W: std::io::Write>(aggs: &[Aggregate], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "scheme",
        "value",
        "n",
        "utility_median",
        "utility_q1",
        "utility_q3",
        "sum_bits_median",
        "sum_bits_q1",
        "sum_bits_q3",
    ])?;
    for a in aggs {
        w.write_record([
            a.scheme.name().to_string(),
            a.value.to_string(),
            a.utility.n.to_string(),
            a.utility.median.to_string(),
            a.utility.q1.to_string(),
            a.utility.q3.to_string(),
            a.sum_bits.median.to_string(),
            a.sum_bits.q1.to_string(),
            a.sum_bits.q3.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
