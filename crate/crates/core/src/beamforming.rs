//! Transmit beams by semidefinite relaxation with randomized rank-one
//! recovery, and receive combiners in closed form.
//!
//! In `w` the surrogate sum reads
//! `Σ b3 + Σ b4 + Σ_k √(1+α_k) Tr(Ω_k W̃_{k+1}) - Σ_j Tr(Q W_j)`
//! with `Q = Σ_k |β_1k|² H_k + Σ_l |β_2l|² Z_l` and `W̃_j = [w_j; 1][w_j; 1]^H`.

use rand::Rng;

use crate::conic::{solve_sdp, SdpProblem, Sense, Status};
use crate::error::{Error, Result};
use crate::linalg::{cn, eigh_desc, principal_eig, quad_form, CMat, CVec, C64};
use crate::sysmodel::{composite_channels, radar_interference, Composite, Model, Solution};
use crate::wmmse::AuxVars;

#[derive(Debug, Clone, PartialEq)]
pub struct TxCoeffs {
    /// `(N_t+1)`-square linear-term matrices, one per CM-UE.
    pub omega: Vec<CMat>,
    pub omega0: CMat,
    pub h: Vec<CMat>,
    pub z: Vec<CMat>,
    /// `√(1 + α_1k)`.
    pub s1: Vec<f64>,
    pub beta1_sq: Vec<f64>,
    pub beta2_sq: Vec<f64>,
    pub b3: Vec<f64>,
    pub b4: Vec<f64>,
    pub b0: f64,
    pub p_bs: f64,
}

impl TxCoeffs {
    pub fn n_tx(&self) -> usize {
        self.omega0.nrows()
    }

    /// Combined quadratic weight shared by all beams.
    pub fn q(&self) -> CMat {
        let n = self.n_tx();
        let mut q = CMat::zeros(n, n);
        for (h, b) in self.h.iter().zip(&self.beta1_sq) {
            q += h * C64::from(*b);
        }
        for (z, b) in self.z.iter().zip(&self.beta2_sq) {
            q += z * C64::from(*b);
        }
        q
    }

    /// Linear part `√(1+α_k) Tr(Ω_k W̃)` for a rank-one `W̃`.
    fn linear(&self, k: usize, w: &CVec) -> f64 {
        let n = self.n_tx();
        // Ω = [[0, v], [v^H, 0]] ⇒ w̃^H Ω w̃ = 2 Re{v^H w}.
        let v = self.omega[k].view((0, n), (n, 1)).column(0).into_owned();
        2.0 * self.s1[k] * v.dotc(w).re
    }

    /// Surrogate sum (nats) as a function of the beams.
    pub fn objective(&self, w: &[CVec]) -> f64 {
        let q = self.q();
        let constant: f64 = self.b3.iter().sum::<f64>() + self.b4.iter().sum::<f64>();
        let linear: f64 = (0..self.omega.len()).map(|k| self.linear(k, &w[k + 1])).sum();
        let quad: f64 = w.iter().map(|wj| quad_form(&q, wj)).sum();
        constant + linear - quad
    }

    pub fn echo(&self, w: &[CVec]) -> f64 {
        w.iter().map(|wj| quad_form(&self.omega0, wj)).sum()
    }

    fn constant(&self) -> f64 {
        self.b3.iter().sum::<f64>() + self.b4.iter().sum::<f64>()
    }
}

pub fn assemble_tx_coeffs(model: &Model, sol: &Solution, aux: &AuxVars) -> Result<TxCoeffs> {
    let comp = composite_channels(model.ch, &sol.phi)?;
    Ok(assemble_tx_coeffs_with(model, sol, &comp, aux))
}

pub fn assemble_tx_coeffs_with(model: &Model, sol: &Solution, comp: &Composite, aux: &AuxVars) -> TxCoeffs {
    let cfg = model.cfg;
    let ch = model.ch;
    let n = cfg.n_tx;
    let cci = model.cci();

    let mut omega = Vec::with_capacity(model.k());
    let mut h = Vec::with_capacity(model.k());
    let mut b3 = Vec::with_capacity(model.k());
    for k in 0..model.k() {
        let hk = &comp.h[k];
        let beta = aux.beta1[k];
        // v = β conj(h) so that v^H w = β* h w.
        let v = hk.map(|z| z.conj()) * beta;
        let mut om = CMat::zeros(n + 1, n + 1);
        for i in 0..n {
            om[(i, n)] = v[i];
            om[(n, i)] = v[i].conj();
        }
        omega.push(om);
        let hc = hk.map(|z| z.conj());
        h.push(&hc * hk.transpose());
        let interference: f64 = (0..model.l()).map(|l| sol.p[l] * comp.ebar[l][k].norm_sqr()).sum();
        let alpha = aux.alpha1[k];
        b3.push(alpha.ln_1p() - alpha - beta.norm_sqr() * (cci * interference + cfg.noise_ue_watt));
    }

    let mut z = Vec::with_capacity(model.l());
    let mut b4 = Vec::with_capacity(model.l());
    for l in 0..model.l() {
        let u = &sol.u[l];
        let a = ch.h_si.adjoint() * u;
        z.push(&a * a.adjoint() * C64::from(model.si()));
        let alpha = aux.alpha2[l];
        let beta = aux.beta2[l];
        let amp = u.dotc(&comp.g[l]) * sol.p[l].max(0.0).sqrt();
        let users: f64 = (0..model.l()).map(|j| sol.p[j] * u.dotc(&comp.g[j]).norm_sqr()).sum();
        b4.push(
            alpha.ln_1p() - alpha + 2.0 * (1.0 + alpha).sqrt() * (beta.conj() * amp).re
                - beta.norm_sqr() * (users + u.norm_squared() * cfg.noise_bs_watt),
        );
    }

    let cascade = &ch.g_s * CMat::from_diagonal(&sol.phi) * &ch.g_t;
    TxCoeffs {
        omega,
        omega0: cascade.adjoint() * &cascade,
        h,
        z,
        s1: aux.alpha1.iter().map(|a| (1.0 + a).sqrt()).collect(),
        beta1_sq: aux.beta1.iter().map(|b| b.norm_sqr()).collect(),
        beta2_sq: aux.beta2.iter().map(|b| b.norm_sqr()).collect(),
        b3,
        b4,
        b0: cfg.gamma_tar_linear * radar_interference(model, &sol.p),
        p_bs: cfg.p_bs_watt,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TxRelaxation {
    /// Lifted variables `W̃_0..W̃_K`, each `(N_t+1)`-square.
    pub w_tilde: Vec<CMat>,
    /// Relaxed optimum of the surrogate sum (nats), an upper bound on any
    /// rank-one feasible point.
    pub bound: f64,
    pub status: Status,
}

fn padded(m: &CMat) -> CMat {
    let n = m.nrows();
    let mut out = CMat::zeros(n + 1, n + 1);
    out.view_mut((0, 0), (n, n)).copy_from(m);
    out
}

/// Radar threshold reachable within the power budget.
pub fn radar_reachable(coeffs: &TxCoeffs) -> bool {
    let lmax = principal_eig(&coeffs.omega0).0.max(0.0);
    coeffs.p_bs * lmax >= coeffs.b0
}

pub fn solve_tx_sdr(coeffs: &TxCoeffs) -> Result<TxRelaxation> {
    if !radar_reachable(coeffs) {
        return Err(Error::Infeasible(
            "radar threshold exceeds the power-limited echo".into(),
        ));
    }
    let n = coeffs.n_tx();
    let k = coeffs.omega.len();
    // Substituting W̃ = D X D with D = diag(√P I, 1) puts the beam block and
    // the corner entry on the same scale.
    let sigma = coeffs.p_bs.sqrt();
    let mut d = CVec::from_element(n + 1, C64::from(sigma));
    d[n] = C64::from(1.0);
    let congruence = |m: &CMat| CMat::from_fn(n + 1, n + 1, |i, j| d[i] * m[(i, j)] * d[j]);
    let mut prob = SdpProblem::new(vec![n + 1; k + 1]);
    let qt = congruence(&padded(&coeffs.q()));
    prob.set_objective(0, qt.clone());
    for j in 0..k {
        prob.set_objective(j + 1, &qt - congruence(&coeffs.omega[j]) * C64::from(coeffs.s1[j]));
    }
    let ident = padded(&CMat::identity(n, n));
    prob.add((0..=k).map(|j| (j, ident.clone())).collect(), Sense::Le, 1.0);
    if coeffs.b0 > 0.0 {
        let om0 = congruence(&padded(&coeffs.omega0)) / C64::from(coeffs.b0);
        prob.add((0..=k).map(|j| (j, om0.clone())).collect(), Sense::Ge, 1.0);
    }
    for j in 0..=k {
        prob.fix_entry(j, n, n, C64::from(1.0));
    }
    let mut sol = solve_sdp(&prob)?;
    if sol.status == Status::Infeasible {
        return Err(Error::Infeasible("transmit relaxation infeasible".into()));
    }
    for x in &mut sol.x {
        *x = congruence(x);
    }
    Ok(TxRelaxation {
        bound: coeffs.constant() - sol.primal_objective,
        w_tilde: sol.x,
        status: sol.status,
    })
}

/// Best common scaling `t` of a beam set: maximizes `t L - t² Q` within
/// the power and radar limits. `None` if no scaling is feasible.
fn scale_into_feasible(coeffs: &TxCoeffs, w: &mut [CVec]) -> Option<()> {
    let power: f64 = w.iter().map(|v| v.norm_squared()).sum();
    if power <= 0.0 {
        return (coeffs.b0 <= 0.0).then_some(());
    }
    let echo = coeffs.echo(w);
    let t_max = (coeffs.p_bs / power).sqrt();
    let t_min = if coeffs.b0 > 0.0 {
        if echo <= 0.0 {
            return None;
        }
        (coeffs.b0 / echo).sqrt()
    } else {
        0.0
    };
    if t_min > t_max * (1.0 + 1e-12) {
        return None;
    }
    let q = coeffs.q();
    let quad: f64 = w.iter().map(|v| quad_form(&q, v)).sum();
    let lin: f64 = (0..coeffs.omega.len()).map(|k| coeffs.linear(k, &w[k + 1])).sum();
    let t_star = if quad > 0.0 {
        lin / (2.0 * quad)
    } else if lin > 0.0 {
        t_max
    } else {
        t_min
    };
    // Keep the radar margin strictly inside the floating-point tolerance.
    let lo = (t_min * (1.0 + 1e-12)).min(t_max);
    let hi = (t_max * (1.0 - 1e-15)).max(lo);
    let t = t_star.clamp(lo, hi);
    for v in w.iter_mut() {
        *v *= C64::from(t);
    }
    Some(())
}

fn top_block(w: &CMat) -> CMat {
    let n = w.nrows() - 1;
    w.view((0, 0), (n, n)).into_owned()
}

/// Beams read off the lifted solution directly: `w_k` from the last column
/// of `W̃_k`, and the sensing beam from the dominant direction of the
/// remaining covariance.
fn structured_candidate(relax: &TxRelaxation) -> Vec<CVec> {
    let n = relax.w_tilde[0].nrows() - 1;
    let mut total = CMat::zeros(n, n);
    for wt in &relax.w_tilde {
        total += top_block(wt);
    }
    let mut w = vec![CVec::zeros(n)];
    for wt in &relax.w_tilde[1..] {
        let v = wt.view((0, n), (n, 1)).column(0).into_owned();
        total -= &v * v.adjoint();
        w.push(v);
    }
    let (lmax, vec) = principal_eig(&total);
    w[0] = vec * C64::from(lmax.max(0.0).sqrt());
    w
}

fn eigen_candidate(relax: &TxRelaxation) -> Vec<CVec> {
    let n = relax.w_tilde[0].nrows() - 1;
    relax
        .w_tilde
        .iter()
        .enumerate()
        .map(|(j, wt)| {
            if j == 0 {
                let (l, v) = principal_eig(&top_block(wt));
                return v * C64::from(l.max(0.0).sqrt());
            }
            let (l, v) = principal_eig(wt);
            let last = v[n];
            if last.norm() > 1e-12 {
                v.rows(0, n).into_owned() * (C64::from(l.max(0.0).sqrt()) * last.conj() / last.norm())
            } else {
                v.rows(0, n).into_owned() * C64::from(l.max(0.0).sqrt())
            }
        })
        .collect()
}

/// Draws `ξ ~ CN(0, M)` through the eigen-factorization of `M`.
fn draw<R: Rng + ?Sized>(factor: &CMat, rng: &mut R) -> CVec {
    let r = CVec::from_fn(factor.ncols(), |_, _| cn(rng));
    factor * r
}

fn psd_factor(m: &CMat) -> CMat {
    let (vals, vecs) = eigh_desc(m);
    let mut f = vecs;
    for (j, v) in vals.iter().enumerate() {
        let s = v.max(0.0).sqrt();
        f.column_mut(j).scale_mut(s);
    }
    f
}

fn rank_one(m: &CMat) -> bool {
    let (vals, _) = eigh_desc(m);
    vals.len() < 2 || vals[1].max(0.0) <= 1e-8 * vals[0].max(f64::MIN_POSITIVE)
}

/// Recovers feasible rank-one beams from the relaxation.
pub fn gaussian_randomize<R: Rng + ?Sized>(
    relax: &TxRelaxation,
    coeffs: &TxCoeffs,
    n_draws: usize,
    rng: &mut R,
) -> Result<Vec<CVec>> {
    let n = coeffs.n_tx();
    let mut best: Option<(f64, Vec<CVec>)> = None;
    let consider = |best: &mut Option<(f64, Vec<CVec>)>, mut w: Vec<CVec>| {
        if scale_into_feasible(coeffs, &mut w).is_some() {
            let v = coeffs.objective(&w);
            if best.as_ref().is_none_or(|(b, _)| v > *b) {
                *best = Some((v, w));
            }
        }
    };
    consider(&mut best, structured_candidate(relax));
    let all_rank_one = rank_one(&top_block(&relax.w_tilde[0])) && relax.w_tilde[1..].iter().all(rank_one);
    if !all_rank_one {
        let factors: Vec<CMat> = relax
            .w_tilde
            .iter()
            .enumerate()
            .map(|(j, wt)| psd_factor(&if j == 0 { top_block(wt) } else { wt.clone() }))
            .collect();
        for _ in 0..n_draws {
            let w: Vec<CVec> = factors
                .iter()
                .enumerate()
                .map(|(j, f)| {
                    let xi = draw(f, rng);
                    if j == 0 {
                        return xi;
                    }
                    let last = xi[n];
                    let head = xi.rows(0, n).into_owned();
                    if last.norm() > 0.0 {
                        head * (last.conj() / last.norm())
                    } else {
                        head
                    }
                })
                .collect();
            consider(&mut best, w);
        }
    }
    if best.is_none() {
        consider(&mut best, eigen_candidate(relax));
    }
    best.map(|(_, w)| w)
        .ok_or_else(|| Error::Infeasible("no randomized beam meets the radar threshold".into()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TxOutcome {
    pub w: Vec<CVec>,
    pub improved: bool,
    pub bound: f64,
}

/// Relax, randomize and keep the new beams only if the surrogate does not
/// drop and the constraints hold.
pub fn optimize_tx<R: Rng + ?Sized>(
    model: &Model,
    sol: &Solution,
    comp: &Composite,
    aux: &AuxVars,
    n_draws: usize,
    rng: &mut R,
) -> Result<TxOutcome> {
    let coeffs = assemble_tx_coeffs_with(model, sol, comp, aux);
    let relax = solve_tx_sdr(&coeffs)?;
    let w = gaussian_randomize(&relax, &coeffs, n_draws, rng)?;
    let old = coeffs.objective(&sol.w);
    let new = coeffs.objective(&w);
    let old_feasible = sol.tx_power() <= coeffs.p_bs * (1.0 + 1e-9) && coeffs.echo(&sol.w) >= coeffs.b0 * (1.0 - 1e-8);
    if new >= old || !old_feasible {
        Ok(TxOutcome {
            w,
            improved: new > old,
            bound: relax.bound,
        })
    } else {
        Ok(TxOutcome {
            w: sol.w.clone(),
            improved: false,
            bound: relax.bound,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RxCoeffs {
    pub t5_mat: Vec<CMat>,
    pub t5: Vec<CVec>,
    pub b5: Vec<f64>,
}

impl RxCoeffs {
    /// `b5 + 2 Re{t5^H u} - u^H T5 u`, nats.
    pub fn objective(&self, l: usize, u: &CVec) -> f64 {
        self.b5[l] + 2.0 * self.t5[l].dotc(u).re - quad_form(&self.t5_mat[l], u)
    }
}

pub fn assemble_rx_coeffs(model: &Model, sol: &Solution, comp: &Composite, aux: &AuxVars) -> RxCoeffs {
    let cfg = model.cfg;
    let nr = cfg.n_rx;
    let mut cov = CMat::identity(nr, nr) * C64::from(cfg.noise_bs_watt);
    for (g, p) in comp.g.iter().zip(&sol.p) {
        cov.gerc(C64::from(*p), g, g, C64::from(1.0));
    }
    if model.si() != 0.0 {
        for w in &sol.w {
            let leak = &model.ch.h_si * w;
            cov.gerc(C64::from(model.si()), &leak, &leak, C64::from(1.0));
        }
    }
    let mut out = RxCoeffs {
        t5_mat: Vec::new(),
        t5: Vec::new(),
        b5: Vec::new(),
    };
    for l in 0..model.l() {
        let alpha = aux.alpha2[l];
        let beta = aux.beta2[l];
        out.t5_mat.push(&cov * C64::from(beta.norm_sqr()));
        out.t5
            .push(&comp.g[l] * (beta.conj() * ((1.0 + alpha).sqrt() * sol.p[l].max(0.0).sqrt())));
        out.b5.push(alpha.ln_1p() - alpha);
    }
    out
}

/// `u_l = T5⁻¹ t5`. A user whose auxiliaries vanish keeps its combiner.
pub fn solve_rx(coeffs: &RxCoeffs, current: &[CVec]) -> Vec<CVec> {
    coeffs
        .t5_mat
        .iter()
        .zip(&coeffs.t5)
        .zip(current)
        .map(|((t, v), old)| {
            if v.norm() == 0.0 {
                return old.clone();
            }
            match t.clone().cholesky() {
                Some(c) => c.solve(v),
                None => old.clone(),
            }
        })
        .collect()
}
