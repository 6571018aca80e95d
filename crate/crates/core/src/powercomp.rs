//! CP-UE transmit power and local CPU frequency.
//!
//! Per user the objective is `a_l √p - B_l p + κ_l f` with one shared radar
//! budget `Σ b9_l p_l ≤ c8` and a private energy budget
//! `T p + T ζ f³ ≤ E_l`. Compute rate always helps, so the energy budget is
//! active and `f` follows from `p`. The remaining concave scalar problems
//! are solved by bisection on the derivative, nested in a bisection on the
//! radar multiplier `μ`.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sysmodel::{radar_echo, self_interference, Composite, Model, Solution};
use crate::wmmse::AuxVars;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerCoeffs {
    /// Offloading surrogate pieces (nats): `b2 + √p b6 - p b7`.
    pub b2: Vec<f64>,
    pub b6: Vec<f64>,
    pub b7: Vec<f64>,
    /// Downlink surrogate pieces (nats): `b10 - c1 Σ_l p_l b11`.
    pub b10: Vec<f64>,
    /// `[k][l]`, already multiplied by the co-channel factor.
    pub b11: Vec<Vec<f64>>,
    pub c1: Vec<f64>,
    pub b9: Vec<f64>,
    pub c8: f64,
    /// Weight turning nats into the bit/s/Hz objective.
    pub rate_scale: f64,
    /// `1 / (ε_l B)`.
    pub kappa: Vec<f64>,
    pub e_max: Vec<f64>,
    pub t: f64,
    pub zeta: f64,
}

impl PowerCoeffs {
    pub fn l(&self) -> usize {
        self.b6.len()
    }

    /// Linear price on `p_l` (nats).
    pub fn price(&self, l: usize) -> f64 {
        self.b7[l] + self.c1.iter().zip(&self.b11).map(|(c, row)| c * row[l]).sum::<f64>()
    }

    /// Variable part of the objective, bit/s/Hz.
    pub fn objective(&self, p: &[f64], f: &[f64]) -> f64 {
        (0..self.l())
            .map(|l| {
                self.rate_scale * (self.b6[l] * p[l].max(0.0).sqrt() - self.price(l) * p[l]) + self.kappa[l] * f[l]
            })
            .sum()
    }

    /// Sum of offloading surrogates. `b7_l` prices the interference user
    /// `l` causes at every combiner, so only the sum splits per user.
    pub fn offload_surrogate_sum(&self, p: &[f64]) -> f64 {
        (0..self.l())
            .map(|l| self.b2[l] + p[l].max(0.0).sqrt() * self.b6[l] - p[l] * self.b7[l])
            .sum()
    }

    pub fn downlink_surrogate(&self, k: usize, p: &[f64]) -> f64 {
        self.b10[k] - self.c1[k] * self.b11[k].iter().zip(p).map(|(b, p)| b * p).sum::<f64>()
    }

    /// Largest CPU frequency the energy left after transmitting allows.
    pub fn frequency_for(&self, l: usize, p: f64) -> f64 {
        ((self.e_max[l] - self.t * p).max(0.0) / (self.t * self.zeta)).cbrt()
    }

    pub fn p_max(&self, l: usize) -> f64 {
        self.e_max[l] / self.t
    }

    /// Radar budget usage `Σ b9 p - c8` (non-positive when feasible).
    pub fn radar_slack(&self, p: &[f64]) -> f64 {
        self.b9.iter().zip(p).map(|(b, p)| b * p).sum::<f64>() - self.c8
    }
}

pub fn assemble_power_coeffs(model: &Model, sol: &Solution, comp: &Composite, aux: &AuxVars) -> PowerCoeffs {
    let cfg = model.cfg;
    let (k_n, l_n) = (model.k(), model.l());
    let mut b2 = Vec::with_capacity(l_n);
    let mut b6 = Vec::with_capacity(l_n);
    for l in 0..l_n {
        let (alpha, beta) = (aux.alpha2[l], aux.beta2[l]);
        let u = &sol.u[l];
        let rest = self_interference(model, u, &sol.w) + u.norm_squared() * cfg.noise_bs_watt;
        b2.push(alpha.ln_1p() - alpha - beta.norm_sqr() * rest);
        b6.push(2.0 * (1.0 + alpha).sqrt() * (beta.conj() * u.dotc(&comp.g[l])).re);
    }
    let b7 = (0..l_n)
        .map(|l| {
            (0..l_n)
                .map(|j| aux.beta2[j].norm_sqr() * sol.u[j].dotc(&comp.g[l]).norm_sqr())
                .sum()
        })
        .collect();
    let mut b10 = Vec::with_capacity(k_n);
    for k in 0..k_n {
        let (alpha, beta) = (aux.alpha1[k], aux.beta1[k]);
        let h = &comp.h[k];
        let amp = h.dot(&sol.w[k + 1]);
        let beams: f64 = sol.w.iter().map(|w| h.dot(w).norm_sqr()).sum();
        b10.push(
            alpha.ln_1p() - alpha + 2.0 * (1.0 + alpha).sqrt() * (beta.conj() * amp).re
                - beta.norm_sqr() * (beams + cfg.noise_ue_watt),
        );
    }
    let cci = model.cci();
    PowerCoeffs {
        b2,
        b6,
        b7,
        b10,
        b11: (0..k_n)
            .map(|k| (0..l_n).map(|l| cci * comp.ebar[l][k].norm_sqr()).collect())
            .collect(),
        c1: aux.beta1.iter().map(|b| b.norm_sqr()).collect(),
        b9: model
            .ch
            .g_au
            .iter()
            .map(|g| cfg.gamma_tar_linear * g.norm_squared())
            .collect(),
        c8: radar_echo(model.ch, sol) - cfg.noise_irs_watt * cfg.gamma_tar_linear,
        rate_scale: model.rate_weight() / LN_2,
        kappa: (0..l_n).map(|l| 1.0 / (cfg.eps(l) * cfg.bandwidth_hz)).collect(),
        e_max: (0..l_n).map(|l| cfg.e_max(l)).collect(),
        t: cfg.coherence_time_s,
        zeta: cfg.zeta,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerSolution {
    pub p: Vec<f64>,
    pub f: Vec<f64>,
    /// Radar multiplier.
    pub mu: f64,
    /// Energy multipliers.
    pub nu: Vec<f64>,
    pub objective: f64,
}

const BISECTIONS: usize = 200;

/// Best `p` of one user for a given radar price `μ`.
fn best_power(c: &PowerCoeffs, l: usize, mu: f64) -> f64 {
    let a = c.rate_scale * c.b6[l];
    let lin = c.rate_scale * c.price(l) + mu * c.b9[l];
    let p_max = c.p_max(l);
    if a <= 0.0 || p_max <= 0.0 {
        return 0.0;
    }
    // d/dp of κ f(p) with f = ((E - T p)/(T ζ))^{1/3}.
    let compute_slope = |p: f64| {
        let left = (c.e_max[l] - c.t * p).max(0.0);
        c.kappa[l] * c.t / (3.0 * (c.t * c.zeta).cbrt() * left.powf(2.0 / 3.0))
    };
    let slope = |p: f64| a / (2.0 * p.sqrt()) - lin - compute_slope(p);
    let (mut lo, mut hi) = (0.0_f64, p_max);
    for _ in 0..BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if slope(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let p = 0.5 * (lo + hi);
    let value = |p: f64| a * p.sqrt() - lin * p + c.kappa[l] * c.frequency_for(l, p);
    if value(p) >= value(0.0) {
        p
    } else {
        0.0
    }
}

fn powers(c: &PowerCoeffs, mu: f64) -> Vec<f64> {
    (0..c.l()).map(|l| best_power(c, l, mu)).collect()
}

/// Global maximizer of the power/compute block under fixed coefficients.
pub fn solve_power_compute(c: &PowerCoeffs) -> Result<PowerSolution> {
    if c.c8 < 0.0 {
        return Err(Error::Infeasible(
            "echo power below the radar noise floor; no uplink power is admissible".into(),
        ));
    }
    let mut mu = 0.0;
    let mut p = powers(c, 0.0);
    if c.radar_slack(&p) > 0.0 {
        let mut hi = 1.0_f64;
        let scale = c.b9.iter().cloned().fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        hi /= scale;
        let mut p_hi = powers(c, hi);
        while c.radar_slack(&p_hi) > 0.0 {
            hi *= 2.0;
            p_hi = powers(c, hi);
            if !hi.is_finite() {
                p_hi = vec![0.0; c.l()];
                break;
            }
        }
        let mut lo = 0.0_f64;
        for _ in 0..BISECTIONS {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let pm = powers(c, mid);
            if c.radar_slack(&pm) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
                p_hi = pm;
            }
        }
        mu = hi;
        p = p_hi;
    }
    let f: Vec<f64> = (0..c.l()).map(|l| c.frequency_for(l, p[l])).collect();
    let nu = (0..c.l())
        .map(|l| {
            if f[l] > 0.0 {
                c.kappa[l] / (3.0 * c.t * c.zeta * f[l] * f[l])
            } else {
                f64::INFINITY
            }
        })
        .collect();
    Ok(PowerSolution {
        objective: c.objective(&p, &f),
        p,
        f,
        mu,
        nu,
    })
}

/// Solves the block and keeps the incumbent when it is feasible and no
/// worse under the same coefficients.
pub fn optimize_power(c: &PowerCoeffs, p_old: &[f64], f_old: &[f64]) -> Result<PowerSolution> {
    let new = solve_power_compute(c)?;
    let old_feasible = c.radar_slack(p_old) <= 1e-12 * c.c8.max(1.0)
        && (0..c.l()).all(|l| c.t * p_old[l] + c.t * c.zeta * f_old[l].powi(3) <= c.e_max[l] + 1e-12);
    let old_obj = c.objective(p_old, f_old);
    if old_feasible && old_obj > new.objective {
        return Ok(PowerSolution {
            p: p_old.to_vec(),
            f: f_old.to_vec(),
            objective: old_obj,
            ..new
        });
    }
    Ok(new)
}
