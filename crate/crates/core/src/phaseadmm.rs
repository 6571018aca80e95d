//! IRS phase update: quadratic form of the surrogate in φ, an ADMM split
//! of the unit-modulus constraint and a tangent minorant of the radar echo.

use serde::{Deserialize, Serialize};

use crate::conic::{solve_qcqp, QcqpMethod, QcqpProblem, Status};
use crate::error::{Error, Result};
use crate::linalg::{quad_form, unit_modulus, CMat, CVec, C64};
use crate::sysmodel::{radar_interference, self_interference, Model, Solution};
use crate::wmmse::AuxVars;

/// `Σ R̃ = -φ^H T12 φ + 2 Re{t12^H φ} + b12` (nats) and `echo = φ^H T0 φ ≥ b0`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseCoeffs {
    pub t12_mat: CMat,
    pub t12: CVec,
    pub b12: f64,
    pub t0: CMat,
    pub b0: f64,
}

impl PhaseCoeffs {
    pub fn surrogate(&self, phi: &CVec) -> f64 {
        -quad_form(&self.t12_mat, phi) + 2.0 * self.t12.dotc(phi).re + self.b12
    }

    pub fn echo(&self, phi: &CVec) -> f64 {
        quad_form(&self.t0, phi)
    }
}

/// ADMM iterate for the split `φ = ψ`, `|ψ_m| = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmmState {
    pub phi: CVec,
    pub psi: CVec,
    pub lambda: CVec,
    pub rho: f64,
}

/// Affine restriction `Re{d^H φ} + e ≤ 0` (already in solver orientation).
#[derive(Debug, Clone, PartialEq)]
pub struct LinearCut {
    pub d: CVec,
    pub e: f64,
}

impl LinearCut {
    pub fn value(&self, phi: &CVec) -> f64 {
        self.d.dotc(phi).re + self.e
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdmmOptions {
    pub rho0: f64,
    pub shrink: f64,
    pub rho_floor: f64,
    pub tol: f64,
    pub max_inner: usize,
}

impl Default for AdmmOptions {
    fn default() -> Self {
        Self {
            rho0: 1.0,
            shrink: 0.8,
            rho_floor: 1e-6,
            tol: 1e-5,
            max_inner: 200,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseTraceRow {
    pub inner: usize,
    /// `||φ - ψ||_∞`.
    pub residual: f64,
    /// Surrogate at ψ, nats.
    pub surrogate: f64,
    pub rho: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseOutcome {
    pub phi: CVec,
    /// False when the input was returned unchanged.
    pub improved: bool,
    /// The φ-subproblem was infeasible at some inner step.
    pub infeasible: bool,
    pub final_residual: f64,
    pub trace: Vec<PhaseTraceRow>,
}

pub fn assemble_phase_coeffs(model: &Model, sol: &Solution, aux: &AuxVars) -> Result<PhaseCoeffs> {
    let ch = model.ch;
    let cfg = model.cfg;
    let m = ch.m();
    sol.check_dims(cfg)?;
    let cci = model.cci();

    let gtw: Vec<CVec> = sol.w.iter().map(|w| &ch.g_t * w).collect();
    let mut t12_mat = CMat::zeros(m, m);
    let mut t12 = CVec::zeros(m);
    let mut b12 = 0.0;

    for k in 0..model.k() {
        let alpha = aux.alpha1[k];
        let beta = aux.beta1[k];
        let b2 = beta.norm_sqr();
        let s = (1.0 + alpha).sqrt();
        let hpu = &ch.h_pu[k];
        // h_k w_j = c_j^H φ with c_j = h_PU,k ∘ conj(G_t w_j).
        for (j, g) in gtw.iter().enumerate() {
            let c = hpu.component_mul(&g.map(|z| z.conj()));
            t12_mat.gerc(C64::from(b2), &c, &c, C64::from(1.0));
            if j == k + 1 {
                t12 += c * (beta * s);
            }
        }
        let mut bk = alpha.ln_1p() - alpha - b2 * cfg.noise_ue_watt;
        if cci != 0.0 {
            for l in 0..model.l() {
                let p = sol.p[l];
                let e = ch.e_direct[l][k];
                let a = hpu.component_mul(&ch.g_pu[l].map(|z| z.conj()));
                t12_mat.gerc(C64::from(b2 * p), &a, &a, C64::from(1.0));
                t12 -= a * (e * (b2 * p));
                bk -= b2 * p * e.norm_sqr();
            }
        }
        b12 += bk;
    }

    for l in 0..model.l() {
        let alpha = aux.alpha2[l];
        let beta = aux.beta2[l];
        let b2 = beta.norm_sqr();
        let s = (1.0 + alpha).sqrt();
        let gru = &ch.g_r * &sol.u[l];
        // u_l^H g_j = d_j^H φ with d_j = (G_r u_l) ∘ conj(g_PU,j).
        for j in 0..model.l() {
            let d = gru.component_mul(&ch.g_pu[j].map(|z| z.conj()));
            t12_mat.gerc(C64::from(b2 * sol.p[j]), &d, &d, C64::from(1.0));
            if j == l {
                t12 += d * (beta * (s * sol.p[l].max(0.0).sqrt()));
            }
        }
        let si = self_interference(model, &sol.u[l], &sol.w);
        b12 += alpha.ln_1p() - alpha - b2 * (si + sol.u[l].norm_squared() * cfg.noise_bs_watt);
    }

    let gsh_gs = ch.g_s.adjoint() * &ch.g_s;
    let mut t0 = CMat::zeros(m, m);
    for g in &gtw {
        // diag(g)^H Gs^H Gs diag(g)
        for c in 0..m {
            for r in 0..m {
                t0[(r, c)] += g[r].conj() * gsh_gs[(r, c)] * g[c];
            }
        }
    }
    let b0 = cfg.gamma_tar_linear * radar_interference(model, &sol.p);

    Ok(PhaseCoeffs {
        t12_mat: crate::linalg::hermitian_part(&t12_mat),
        t12,
        b12,
        t0: crate::linalg::hermitian_part(&t0),
        b0,
    })
}

/// Tangent minorant of `φ^H T0 φ` at `φ0`, turned into the cut
/// `-2 Re{(T0 φ0)^H φ} + φ0^H T0 φ0 + b0 ≤ 0`.
pub fn mm_linearize_radar(coeffs: &PhaseCoeffs, phi0: &CVec) -> LinearCut {
    let d = &coeffs.t0 * phi0;
    let e = d.dotc(phi0).re + coeffs.b0;
    LinearCut {
        d: d * C64::from(-2.0),
        e,
    }
}

/// Minimizes `φ^H T12 φ - 2Re{t12^H φ} + ||φ - ψ + ρλ||²/(2ρ)` over the cut.
pub fn admm_phi_step(coeffs: &PhaseCoeffs, state: &AdmmState, cut: &LinearCut) -> Result<CVec> {
    let center = &state.psi - &state.lambda * C64::from(state.rho);
    let prob = QcqpProblem::new(coeffs.t12_mat.clone(), coeffs.t12.clone())
        .with_prox(0.5 / state.rho, center)
        .with_constraint(cut.d.clone(), cut.e);
    let sol = solve_qcqp(&prob, QcqpMethod::Auto)?;
    match sol.status {
        Status::Infeasible => Err(Error::Infeasible("linearized radar cut is empty".into())),
        _ => Ok(sol.x),
    }
}

/// `ψ = exp(j∠(φ + ρλ))`.
pub fn psi_step(phi: &CVec, lambda: &CVec, rho: f64) -> CVec {
    unit_modulus(&(phi + lambda * C64::from(rho)))
}

/// `λ + (φ - ψ)/ρ`.
pub fn dual_step(state: &AdmmState) -> CVec {
    &state.lambda + (&state.phi - &state.psi) / C64::from(state.rho)
}

fn max_abs_diff(a: &CVec, b: &CVec) -> f64 {
    a.iter()
        .zip(b.iter())
        .fold(0.0, |m, (x, y)| f64::max(m, (x - y).norm()))
}

/// Runs the ADMM loop from `sol.phi`. The best unit-modulus iterate that
/// meets the true radar constraint and does not lower the surrogate is
/// returned; otherwise the input is kept.
pub fn optimize_phase(model: &Model, sol: &Solution, aux: &AuxVars, opts: &AdmmOptions) -> Result<PhaseOutcome> {
    let coeffs = assemble_phase_coeffs(model, sol, aux)?;
    Ok(optimize_phase_with(&coeffs, &sol.phi, opts))
}

pub fn optimize_phase_with(coeffs: &PhaseCoeffs, phi_in: &CVec, opts: &AdmmOptions) -> PhaseOutcome {
    let radar_ok = |phi: &CVec| coeffs.echo(phi) >= coeffs.b0 * (1.0 - 1e-8);
    let mut best = phi_in.clone();
    let mut best_val = coeffs.surrogate(phi_in);
    let mut improved = false;
    let mut infeasible = false;

    let mut state = AdmmState {
        phi: phi_in.clone(),
        psi: unit_modulus(phi_in),
        lambda: CVec::zeros(phi_in.len()),
        rho: opts.rho0,
    };
    let mut trace = Vec::new();
    let mut residual = f64::INFINITY;
    for inner in 0..opts.max_inner {
        let cut = mm_linearize_radar(coeffs, &state.phi);
        match admm_phi_step(coeffs, &state, &cut) {
            Ok(phi) => state.phi = phi,
            Err(_) => {
                infeasible = true;
                break;
            }
        }
        state.psi = psi_step(&state.phi, &state.lambda, state.rho);
        state.lambda = dual_step(&state);
        residual = max_abs_diff(&state.phi, &state.psi);
        let val = coeffs.surrogate(&state.psi);
        trace.push(PhaseTraceRow {
            inner,
            residual,
            surrogate: val,
            rho: state.rho,
        });
        if val > best_val && radar_ok(&state.psi) {
            best_val = val;
            best = state.psi.clone();
            improved = true;
        }
        state.rho = (state.rho * opts.shrink).max(opts.rho_floor);
        if residual <= opts.tol {
            break;
        }
    }
    PhaseOutcome {
        phi: best,
        improved,
        infeasible,
        final_residual: residual,
        trace,
    }
}
