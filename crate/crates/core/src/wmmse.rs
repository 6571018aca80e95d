//! WMMSE auxiliaries and the concave surrogates they define.
//!
//! For a link with useful amplitude `a`, total received power `D` (signal
//! included) and auxiliaries `(α ≥ 0, β)`,
//!
//! `R̃ = ln(1+α) - α + 2√(1+α) Re{β* a} - |β|² D`,
//!
//! which is maximized by `α = SINR`, `β = √(1+α) a / D` where it equals
//! `ln(1 + SINR)`. Public values are reported in bits (divided by ln 2).

use serde::{Deserialize, Serialize};
use std::f64::consts::LN_2;

use crate::error::Result;
use crate::linalg::C64;
use crate::sysmodel::{composite_channels, downlink_received_power, uplink_received_power, Composite, Model, Solution};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuxVars {
    pub alpha1: Vec<f64>,
    pub beta1: Vec<C64>,
    pub alpha2: Vec<f64>,
    pub beta2: Vec<C64>,
}

impl AuxVars {
    pub fn zeros(k: usize, l: usize) -> Self {
        Self {
            alpha1: vec![0.0; k],
            beta1: vec![C64::from(0.0); k],
            alpha2: vec![0.0; l],
            beta2: vec![C64::from(0.0); l],
        }
    }
}

/// Useful amplitude `h_k w_k` of CM-UE `k`.
pub fn downlink_amplitude(sol: &Solution, comp: &Composite, k: usize) -> C64 {
    comp.h[k].dot(&sol.w[k + 1])
}

/// Useful amplitude `√p_l u_l^H g_l` of CP-UE `l`.
pub fn uplink_amplitude(sol: &Solution, comp: &Composite, l: usize) -> C64 {
    sol.u[l].dotc(&comp.g[l]) * sol.p[l].max(0.0).sqrt()
}

fn optimal_pair(amp: C64, total: f64) -> (f64, C64) {
    let signal = amp.norm_sqr();
    let alpha = signal / (total - signal).max(f64::MIN_POSITIVE);
    let beta = amp * ((1.0 + alpha).sqrt() / total);
    (alpha, beta)
}

pub fn update_aux_with(model: &Model, sol: &Solution, comp: &Composite) -> AuxVars {
    let (alpha1, beta1) = (0..model.k())
        .map(|k| {
            optimal_pair(
                downlink_amplitude(sol, comp, k),
                downlink_received_power(model, sol, comp, k),
            )
        })
        .unzip();
    let (alpha2, beta2) = (0..model.l())
        .map(|l| {
            optimal_pair(
                uplink_amplitude(sol, comp, l),
                uplink_received_power(model, sol, comp, l),
            )
        })
        .unzip();
    AuxVars {
        alpha1,
        beta1,
        alpha2,
        beta2,
    }
}

pub fn update_aux(model: &Model, sol: &Solution) -> Result<AuxVars> {
    let comp = composite_channels(model.ch, &sol.phi)?;
    Ok(update_aux_with(model, sol, &comp))
}

pub(crate) fn surrogate_nats(alpha: f64, beta: C64, amp: C64, total: f64) -> f64 {
    alpha.ln_1p() - alpha + 2.0 * (1.0 + alpha).sqrt() * (beta.conj() * amp).re - beta.norm_sqr() * total
}

pub(crate) fn surrogate_com_nats(model: &Model, sol: &Solution, comp: &Composite, aux: &AuxVars, k: usize) -> f64 {
    surrogate_nats(
        aux.alpha1[k],
        aux.beta1[k],
        downlink_amplitude(sol, comp, k),
        downlink_received_power(model, sol, comp, k),
    )
}

pub(crate) fn surrogate_off_nats(model: &Model, sol: &Solution, comp: &Composite, aux: &AuxVars, l: usize) -> f64 {
    surrogate_nats(
        aux.alpha2[l],
        aux.beta2[l],
        uplink_amplitude(sol, comp, l),
        uplink_received_power(model, sol, comp, l),
    )
}

/// Downlink surrogate of CM-UE `k` in bits.
pub fn surrogate_com(model: &Model, sol: &Solution, comp: &Composite, aux: &AuxVars, k: usize) -> f64 {
    surrogate_com_nats(model, sol, comp, aux, k) / LN_2
}

/// Offloading surrogate of CP-UE `l` in bits.
pub fn surrogate_off(model: &Model, sol: &Solution, comp: &Composite, aux: &AuxVars, l: usize) -> f64 {
    surrogate_off_nats(model, sol, comp, aux, l) / LN_2
}

/// Sum of throughput surrogates in nats, weighted by the duplex factor.
pub(crate) fn weighted_surrogate_nats(model: &Model, sol: &Solution, comp: &Composite, aux: &AuxVars) -> f64 {
    let com: f64 = (0..model.k())
        .map(|k| surrogate_com_nats(model, sol, comp, aux, k))
        .sum();
    let off: f64 = (0..model.l())
        .map(|l| surrogate_off_nats(model, sol, comp, aux, l))
        .sum();
    model.rate_weight() * (com + off)
}

/// Surrogate of the normalized utility, bit/s/Hz:
/// `ω (Σ_k R̃_k + Σ_l R̃_l) + Σ_l f_l / (ε_l B)`.
pub fn surrogate_objective(model: &Model, sol: &Solution, aux: &AuxVars) -> Result<f64> {
    let comp = composite_channels(model.ch, &sol.phi)?;
    Ok(surrogate_objective_with(model, sol, &comp, aux))
}

pub(crate) fn surrogate_objective_with(model: &Model, sol: &Solution, comp: &Composite, aux: &AuxVars) -> f64 {
    let loc: f64 = (0..model.l())
        .map(|l| sol.f[l] / (model.cfg.eps(l) * model.cfg.bandwidth_hz))
        .sum();
    weighted_surrogate_nats(model, sol, comp, aux) / LN_2 + loc
}
