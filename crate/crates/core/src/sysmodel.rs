//! Physical-layer and computing metrics of a candidate allocation.
//!
//! All quadratic terms in the transmitted ISAC signal are evaluated in
//! expectation over the unit-variance symbols, so `|a^H x|²` becomes
//! `Σ_k |a^H w_k|²`. Rates are `B log2(1 + SINR)`.

use serde::{Deserialize, Serialize};

use crate::cacheopt::zipf_popularity;
use crate::channels::ChannelSet;
use crate::config::{CacheConfig, SystemConfig};
use crate::error::{Error, Result};
use crate::linalg::{CVec, C64};

/// Full duplex transmits and receives at once; half duplex splits the
/// coherence time into two equal orthogonal slots, which removes
/// co-channel and self interference but halves both throughput terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Duplex {
    #[default]
    Full,
    Half,
}

/// Evaluation context: scenario constants, one channel draw, duplex mode.
#[derive(Debug, Clone, Copy)]
pub struct Model<'a> {
    pub cfg: &'a SystemConfig,
    pub ch: &'a ChannelSet,
    pub duplex: Duplex,
}

impl<'a> Model<'a> {
    pub fn new(cfg: &'a SystemConfig, ch: &'a ChannelSet) -> Self {
        Self {
            cfg,
            ch,
            duplex: Duplex::Full,
        }
    }

    pub fn with_duplex(mut self, duplex: Duplex) -> Self {
        self.duplex = duplex;
        self
    }

    /// 1 when uplink users interfere with downlink users.
    pub fn cci(&self) -> f64 {
        match self.duplex {
            Duplex::Full => 1.0,
            Duplex::Half => 0.0,
        }
    }

    /// 1 when the downlink leaks into the BS receiver.
    pub fn si(&self) -> f64 {
        self.cci()
    }

    /// Fraction of the coherence time each throughput term is active.
    pub fn rate_weight(&self) -> f64 {
        match self.duplex {
            Duplex::Full => 1.0,
            Duplex::Half => 0.5,
        }
    }

    pub fn k(&self) -> usize {
        self.cfg.n_cm
    }

    pub fn l(&self) -> usize {
        self.cfg.n_cp
    }
}

/// Decision variables. `w[0]` is the dedicated sensing beam and `w[k + 1]`
/// serves CM-UE `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub w: Vec<CVec>,
    pub u: Vec<CVec>,
    pub phi: CVec,
    pub f: Vec<f64>,
    pub p: Vec<f64>,
    pub e: Vec<f64>,
}

impl Solution {
    pub fn tx_power(&self) -> f64 {
        self.w.iter().map(|w| w.norm_squared()).sum()
    }

    pub fn check_dims(&self, cfg: &SystemConfig) -> Result<()> {
        let ok = self.w.len() == cfg.n_cm + 1
            && self.w.iter().all(|w| w.len() == cfg.n_tx)
            && self.u.len() == cfg.n_cp
            && self.u.iter().all(|u| u.len() == cfg.n_rx)
            && self.phi.len() == cfg.m_passive
            && self.f.len() == cfg.n_cp
            && self.p.len() == cfg.n_cp
            && self.e.len() == cfg.cache.n_files;
        if ok {
            Ok(())
        } else {
            Err(Error::DimensionMismatch("solution does not match configuration".into()))
        }
    }
}

/// Effective channels through the IRS for a given phase vector.
#[derive(Debug, Clone)]
pub struct Composite {
    /// `h_k = h_PU,k^H Φ G_t`, stored as the row's entries.
    pub h: Vec<CVec>,
    /// `ē_{l,k} = e_{l,k} + h_PU,k^H Φ g_PU,l`, indexed `[l][k]`.
    pub ebar: Vec<Vec<C64>>,
    /// `g_l = G_r^H Φ g_PU,l`.
    pub g: Vec<CVec>,
}

pub fn composite_channels(ch: &ChannelSet, phi: &CVec) -> Result<Composite> {
    let m = ch.m();
    if phi.len() != m {
        return Err(Error::DimensionMismatch(format!(
            "phase vector has {} entries, surface has {m}",
            phi.len()
        )));
    }
    let h = ch
        .h_pu
        .iter()
        .map(|hpu| {
            let weighted = hpu.map(|z| z.conj()).component_mul(phi);
            ch.g_t.transpose() * weighted
        })
        .collect();
    let ebar = ch
        .g_pu
        .iter()
        .zip(&ch.e_direct)
        .map(|(gpu, row)| {
            let reflected = phi.component_mul(gpu);
            ch.h_pu
                .iter()
                .zip(row)
                .map(|(hpu, &e)| e + hpu.dotc(&reflected))
                .collect()
        })
        .collect();
    let g = ch
        .g_pu
        .iter()
        .map(|gpu| ch.g_r.adjoint() * phi.component_mul(gpu))
        .collect();
    Ok(Composite { h, ebar, g })
}

/// Total power received by CM-UE `k` (all beams, uplink interference, noise).
pub fn downlink_received_power(model: &Model, sol: &Solution, comp: &Composite, k: usize) -> f64 {
    let h = &comp.h[k];
    let beams: f64 = sol.w.iter().map(|w| h.dot(w).norm_sqr()).sum();
    let cci: f64 = (0..model.l()).map(|l| sol.p[l] * comp.ebar[l][k].norm_sqr()).sum();
    beams + model.cci() * cci + model.cfg.noise_ue_watt
}

/// SINR of CM-UE `k` (0-based; served by `w[k + 1]`).
pub fn downlink_sinr(model: &Model, sol: &Solution, comp: &Composite, k: usize) -> f64 {
    let signal = comp.h[k].dot(&sol.w[k + 1]).norm_sqr();
    let total = downlink_received_power(model, sol, comp, k);
    signal / (total - signal).max(f64::MIN_POSITIVE)
}

/// Echo power `Σ_k ||G_s Φ G_t w_k||²` at the sensing elements.
pub fn radar_echo(ch: &ChannelSet, sol: &Solution) -> f64 {
    sol.w
        .iter()
        .map(|w| (&ch.g_s * sol.phi.component_mul(&(&ch.g_t * w))).norm_squared())
        .sum()
}

pub fn radar_interference(model: &Model, p: &[f64]) -> f64 {
    let ul: f64 = model.ch.g_au.iter().zip(p).map(|(g, &p)| p * g.norm_squared()).sum();
    ul + model.cfg.noise_irs_watt
}

pub fn radar_sinr(model: &Model, sol: &Solution) -> f64 {
    radar_echo(model.ch, sol) / radar_interference(model, &sol.p)
}

/// `Σ_k |u^H H_SI w_k|²` (zero in half duplex).
pub fn self_interference(model: &Model, u: &CVec, w: &[CVec]) -> f64 {
    if model.si() == 0.0 {
        return 0.0;
    }
    let a = model.ch.h_si.adjoint() * u;
    w.iter().map(|wk| a.dotc(wk).norm_sqr()).sum()
}

/// Total power at the output of receive beamformer `u_l`.
pub fn uplink_received_power(model: &Model, sol: &Solution, comp: &Composite, l: usize) -> f64 {
    let u = &sol.u[l];
    let users: f64 = (0..model.l()).map(|j| sol.p[j] * u.dotc(&comp.g[j]).norm_sqr()).sum();
    users + self_interference(model, u, &sol.w) + u.norm_squared() * model.cfg.noise_bs_watt
}

pub fn offload_sinr(model: &Model, sol: &Solution, comp: &Composite, l: usize) -> f64 {
    let signal = sol.p[l] * sol.u[l].dotc(&comp.g[l]).norm_sqr();
    let total = uplink_received_power(model, sol, comp, l);
    signal / (total - signal).max(f64::MIN_POSITIVE)
}

/// Local computation rate `f / ε` (bit/s) and energy `T ζ f³` (J).
pub fn local_rate_energy(f: f64, eps: f64, t: f64, zeta: f64) -> (f64, f64) {
    (f / eps, t * zeta * f.powi(3))
}

/// Expected backhaul cost `T Σ_v ρ_v Σ_l (1 - e_v) c̃_v R_{0,l}`.
pub fn backhaul_cost(e: &[f64], cache: &CacheConfig, t: f64, n_cp: usize) -> f64 {
    let pop = zipf_popularity(cache.n_files, cache.skew);
    let rate_sum: f64 = (0..n_cp).map(|l| cache.backhaul_rate(l)).sum();
    let per_file: f64 = pop
        .iter()
        .enumerate()
        .map(|(v, c)| cache.price(v) * (1.0 - e[v]) * c)
        .sum();
    t * per_file * rate_sum
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub r_com: Vec<f64>,
    /// Effective downlink rates, bit/s (already time-shared in half duplex).
    pub rate_com: Vec<f64>,
    pub r_off: Vec<f64>,
    pub rate_off: Vec<f64>,
    pub r_tar: f64,
    pub rate_loc: Vec<f64>,
    pub energy_loc: Vec<f64>,
    pub d_total: f64,
    pub utility: f64,
    pub coherence_time_s: f64,
}

impl Metrics {
    pub fn comm_bits(&self) -> f64 {
        self.coherence_time_s * self.rate_com.iter().sum::<f64>()
    }

    pub fn offload_bits(&self) -> f64 {
        self.coherence_time_s * self.rate_off.iter().sum::<f64>()
    }

    pub fn local_bits(&self) -> f64 {
        self.coherence_time_s * self.rate_loc.iter().sum::<f64>()
    }

    /// Throughput plus computation bits, before the backhaul cost.
    pub fn sum_bits(&self) -> f64 {
        self.comm_bits() + self.offload_bits() + self.local_bits()
    }
}

pub fn rate(bandwidth: f64, sinr: f64) -> f64 {
    bandwidth * sinr.max(0.0).ln_1p() / std::f64::consts::LN_2
}

pub fn utility(model: &Model, sol: &Solution) -> Result<Metrics> {
    let cfg = model.cfg;
    let comp = composite_channels(model.ch, &sol.phi)?;
    let weight = model.rate_weight();
    let r_com: Vec<f64> = (0..model.k()).map(|k| downlink_sinr(model, sol, &comp, k)).collect();
    let r_off: Vec<f64> = (0..model.l()).map(|l| offload_sinr(model, sol, &comp, l)).collect();
    let rate_com = r_com
        .iter()
        .map(|&r| weight * rate(cfg.bandwidth_hz, r))
        .collect::<Vec<_>>();
    let rate_off = r_off
        .iter()
        .map(|&r| weight * rate(cfg.bandwidth_hz, r))
        .collect::<Vec<_>>();
    let (rate_loc, energy_loc): (Vec<f64>, Vec<f64>) = (0..model.l())
        .map(|l| local_rate_energy(sol.f[l], cfg.eps(l), cfg.coherence_time_s, cfg.zeta))
        .unzip();
    let d_total = backhaul_cost(&sol.e, &cfg.cache, cfg.coherence_time_s, cfg.n_cp);
    let t = cfg.coherence_time_s;
    let utility = t * rate_com.iter().sum::<f64>()
        + t * rate_off.iter().zip(&rate_loc).map(|(a, b)| a + b).sum::<f64>()
        - d_total;
    Ok(Metrics {
        r_com,
        rate_com,
        r_off,
        rate_off,
        r_tar: radar_sinr(model, sol),
        rate_loc,
        energy_loc,
        d_total,
        utility,
        coherence_time_s: t,
    })
}

/// Throughput-plus-compute objective normalized by `T B`, in bit/s/Hz:
/// `ω Σ_k log2(1 + r_k) + ω Σ_l log2(1 + r_l) + Σ_l R_l^loc / B`.
pub fn normalized_objective(model: &Model, sol: &Solution) -> Result<f64> {
    let comp = composite_channels(model.ch, &sol.phi)?;
    let w = model.rate_weight();
    let com: f64 = (0..model.k())
        .map(|k| downlink_sinr(model, sol, &comp, k).ln_1p())
        .sum();
    let off: f64 = (0..model.l()).map(|l| offload_sinr(model, sol, &comp, l).ln_1p()).sum();
    let loc: f64 = (0..model.l()).map(|l| sol.f[l] / model.cfg.eps(l)).sum();
    Ok(w * (com + off) / std::f64::consts::LN_2 + loc / model.cfg.bandwidth_hz)
}

/// Constraint violations (positive means violated), each in its own units
/// relative to the budget where one exists.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Residuals {
    /// `Σ||w||² / P_BS - 1`.
    pub power: f64,
    /// `1 - r_tar / Γ`.
    pub radar: f64,
    /// `max_m ||φ_m| - 1|`.
    pub unit_modulus: f64,
    /// `max_l (T p_l + T ζ f_l³ - E_l)`, J.
    pub energy: f64,
    /// `Σ q_v e_v / F - 1`.
    pub cache: f64,
}

impl Residuals {
    pub fn evaluate(model: &Model, sol: &Solution) -> Self {
        let cfg = model.cfg;
        let t = cfg.coherence_time_s;
        let energy = (0..cfg.n_cp)
            .map(|l| t * sol.p[l] + t * cfg.zeta * sol.f[l].powi(3) - cfg.e_max(l))
            .fold(f64::NEG_INFINITY, f64::max)
            .max(if cfg.n_cp == 0 { 0.0 } else { f64::NEG_INFINITY });
        let stored: f64 = sol.e.iter().enumerate().map(|(v, e)| cfg.cache.length(v) * e).sum();
        let cache = if cfg.cache.capacity > 0.0 {
            stored / cfg.cache.capacity - 1.0
        } else {
            stored
        };
        Self {
            power: sol.tx_power() / cfg.p_bs_watt - 1.0,
            radar: 1.0 - radar_sinr(model, sol) / cfg.gamma_tar_linear,
            unit_modulus: sol.phi.iter().fold(0.0, |m, z| f64::max(m, (z.norm() - 1.0).abs())),
            energy,
            cache,
        }
    }
}
