//! Convex quadratic program in complex variables with affine inequalities.
//!
//! minimize   x^H A x - 2 Re{b^H x} + c + ρ ||x - x_c||²
//! subject to Re{d_i^H x} + e_i ≤ 0
//!
//! The problem is solved in the real embedding `z = [Re x; Im x]`. With at
//! most one constraint and a positive definite Hessian the dual is
//! one-dimensional and solved exactly; otherwise a Mehrotra
//! predictor-corrector interior-point method is used.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use super::{dump_matrix, fmt_complex, KktResiduals, Status};
use crate::error::{Error, Result};
use crate::linalg::{complex_from_embed, quad_form, real_embed, real_embed_vec, CMat, CVec, C64};

#[derive(Debug, Clone, PartialEq)]
pub struct QcqpProblem {
    pub a: CMat,
    pub b: CVec,
    pub c: f64,
    /// Weight of the proximal term; zero disables it.
    pub prox: f64,
    pub center: Option<CVec>,
    /// Rows `(d_i, e_i)` of `Re{d_i^H x} + e_i ≤ 0`.
    pub constraints: Vec<(CVec, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum QcqpMethod {
    #[default]
    Auto,
    InteriorPoint,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QcqpSolution {
    pub x: CVec,
    /// Multipliers of the inequality rows, in the caller's scaling.
    pub duals: Vec<f64>,
    pub status: Status,
    pub objective: f64,
    pub dual_objective: f64,
    pub kkt: KktResiduals,
    pub iterations: usize,
}

impl QcqpProblem {
    pub fn new(a: CMat, b: CVec) -> Self {
        Self {
            a,
            b,
            c: 0.0,
            prox: 0.0,
            center: None,
            constraints: Vec::new(),
        }
    }

    pub fn with_prox(mut self, weight: f64, center: CVec) -> Self {
        self.prox = weight;
        self.center = Some(center);
        self
    }

    pub fn with_constraint(mut self, d: CVec, e: f64) -> Self {
        self.constraints.push((d, e));
        self
    }

    pub fn dim(&self) -> usize {
        self.b.len()
    }

    fn validate(&self) -> Result<()> {
        let n = self.dim();
        let center_ok = self.center.as_ref().is_none_or(|c| c.len() == n);
        if self.a.shape() != (n, n) || !center_ok || self.constraints.iter().any(|(d, _)| d.len() != n) {
            return Err(Error::DimensionMismatch("QCQP data sizes disagree".into()));
        }
        if self.prox.is_nan() || self.prox < 0.0 {
            return Err(Error::Domain("proximal weight must be nonnegative".into()));
        }
        Ok(())
    }

    pub fn objective(&self, x: &CVec) -> f64 {
        let mut v = quad_form(&self.a, x) - 2.0 * self.b.dotc(x).re + self.c;
        if self.prox > 0.0 {
            let diff = match &self.center {
                Some(c) => x - c,
                None => x.clone(),
            };
            v += self.prox * diff.norm_squared();
        }
        v
    }

    pub fn constraint_values(&self, x: &CVec) -> Vec<f64> {
        self.constraints.iter().map(|(d, e)| d.dotc(x).re + e).collect()
    }

    /// Hessian and linear term with the proximal part folded in.
    fn folded(&self) -> (CMat, CVec) {
        let n = self.dim();
        let mut a = crate::linalg::hermitian_part(&self.a);
        let mut b = self.b.clone();
        if self.prox > 0.0 {
            for i in 0..n {
                a[(i, i)] += C64::from(self.prox);
            }
            if let Some(c) = &self.center {
                b += c.scale(self.prox);
            }
        }
        (a, b)
    }

    /// Plain-text dump for offline inspection.
    pub fn dump(&self) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        let _ = writeln!(out, "qcqp n={} m={}", self.dim(), self.constraints.len());
        dump_matrix(&mut out, "A", &self.a);
        dump_matrix(
            &mut out,
            "b",
            &CMat::from_column_slice(self.dim(), 1, self.b.as_slice()),
        );
        let _ = writeln!(out, "c {:e}", self.c);
        let _ = writeln!(out, "prox {:e}", self.prox);
        if let Some(center) = &self.center {
            dump_matrix(
                &mut out,
                "center",
                &CMat::from_column_slice(self.dim(), 1, center.as_slice()),
            );
        }
        for (i, (d, e)) in self.constraints.iter().enumerate() {
            let entries: Vec<String> = d.iter().map(fmt_complex).collect();
            let _ = writeln!(out, "row {i} e={e:e} d={}", entries.join("  "));
        }
        out
    }
}

pub fn solve_qcqp(prob: &QcqpProblem, method: QcqpMethod) -> Result<QcqpSolution> {
    prob.validate()?;
    if method == QcqpMethod::Auto && prob.constraints.len() <= 1 {
        if let Some(sol) = solve_single(prob) {
            return Ok(sol);
        }
    }
    solve_ipm(prob)
}

/// Exact solution through the scalar dual when `A + ρI` is positive definite.
fn solve_single(prob: &QcqpProblem) -> Option<QcqpSolution> {
    let (a, b) = prob.folded();
    let chol = Cholesky::new(a)?;
    let yb = chol.solve(&b);
    let (x, lambda) = match prob.constraints.first() {
        None => (yb, None),
        Some((d, e)) if d.norm() == 0.0 => {
            if *e > 0.0 {
                return Some(infeasible(prob, 0));
            }
            (yb, Some(0.0))
        }
        Some((d, e)) => {
            let yd = chol.solve(d);
            let slope = d.dotc(&yd).re;
            let at_zero = d.dotc(&yb).re + e;
            let lambda = (2.0 * at_zero / slope).max(0.0);
            (yb - yd.scale(lambda / 2.0), Some(lambda))
        }
    };
    let duals: Vec<f64> = lambda.into_iter().collect();
    Some(finish(prob, x, duals, Status::Optimal, 1))
}

fn infeasible(prob: &QcqpProblem, iterations: usize) -> QcqpSolution {
    let x = CVec::zeros(prob.dim());
    QcqpSolution {
        objective: prob.objective(&x),
        dual_objective: f64::INFINITY,
        x,
        duals: vec![0.0; prob.constraints.len()],
        status: Status::Infeasible,
        kkt: KktResiduals::default(),
        iterations,
    }
}

fn finish(prob: &QcqpProblem, x: CVec, duals: Vec<f64>, status: Status, iterations: usize) -> QcqpSolution {
    let objective = prob.objective(&x);
    let cons = prob.constraint_values(&x);
    let lagrangian = objective + cons.iter().zip(&duals).map(|(c, l)| c * l).sum::<f64>();
    let (a, b) = prob.folded();
    let mut grad = (&a * &x - &b).scale(2.0);
    for ((d, _), l) in prob.constraints.iter().zip(&duals) {
        grad += d.scale(*l);
    }
    let scale_q = 1.0 + 2.0 * b.camax();
    let row_scale = |i: usize| 1.0 + prob.constraints[i].0.camax() * x.camax() + prob.constraints[i].1.abs();
    let kkt = KktResiduals {
        stationarity: grad.camax() / scale_q,
        primal: cons
            .iter()
            .enumerate()
            .map(|(i, c)| c.max(0.0) / row_scale(i))
            .fold(0.0, f64::max),
        dual: duals.iter().map(|l| (-l).max(0.0)).fold(0.0, f64::max),
        complementarity: cons
            .iter()
            .zip(&duals)
            .enumerate()
            .map(|(i, (c, l))| (c * l).abs() / (1.0 + objective.abs()) / row_scale(i).max(1.0))
            .fold(0.0, f64::max),
    };
    QcqpSolution {
        x,
        duals,
        status,
        objective,
        dual_objective: lagrangian,
        kkt,
        iterations,
    }
}

const MAX_ITER: usize = 80;
const TOL: f64 = 1e-11;

fn factor(h: DMatrix<f64>) -> Cholesky<f64, Dyn> {
    let scale = 1.0 + h.diagonal().amax();
    let mut shift = 0.0;
    loop {
        let mut trial = h.clone();
        for i in 0..trial.nrows() {
            trial[(i, i)] += shift;
        }
        if let Some(c) = Cholesky::new(trial) {
            return c;
        }
        shift = if shift == 0.0 { 1e-13 * scale } else { shift * 10.0 };
    }
}

fn solve_ipm(prob: &QcqpProblem) -> Result<QcqpSolution> {
    let (a, b) = prob.folded();
    let p = real_embed(&a).scale(2.0);
    let q = -real_embed_vec(&b).scale(2.0);
    let nz = p.nrows();

    // Normalize rows; drop all-zero rows after checking their sign.
    let mut rows: Vec<(usize, DVector<f64>, f64, f64)> = Vec::new();
    for (i, (d, e)) in prob.constraints.iter().enumerate() {
        let g = real_embed_vec(d);
        let norm = g.norm();
        if norm == 0.0 {
            if *e > 0.0 {
                return Ok(infeasible(prob, 0));
            }
            continue;
        }
        rows.push((i, g.unscale(norm), -e / norm, norm));
    }
    let m = rows.len();
    let mut duals = vec![0.0; prob.constraints.len()];

    if m == 0 {
        let z = factor(p).solve(&(-&q));
        return Ok(finish(prob, complex_from_embed(&z), duals, Status::Optimal, 1));
    }

    let g = DMatrix::from_fn(m, nz, |i, j| rows[i].1[j]);
    let h = DVector::from_fn(m, |i, _| rows[i].2);
    let gt = g.transpose();

    let mut z = factor(p.clone()).solve(&(-&q));
    let mut s = (&h - &g * &z).map(|v| v.max(1.0));
    let mut lam = DVector::from_element(m, 1.0);
    let qn = 1.0 + q.amax();
    let hn = 1.0 + h.amax();

    let mut status = Status::MaxIter;
    let mut iterations = MAX_ITER;
    for it in 0..MAX_ITER {
        let rd = &p * &z + &q + &gt * &lam;
        let rp = &g * &z + &s - &h;
        let mu = s.dot(&lam) / m as f64;
        let pobj = 0.5 * z.dot(&(&p * &z)) + q.dot(&z);
        if rd.amax() <= TOL * qn && rp.amax() <= TOL * hn && mu <= TOL * (1.0 + pobj.abs()) {
            status = Status::Optimal;
            iterations = it;
            break;
        }
        let lnorm = lam.amax();
        if lnorm > 1e9 {
            let ray = lam.unscale(lnorm);
            if (&gt * &ray).amax() <= 1e-7 && h.dot(&ray) < -1e-9 {
                return Ok(infeasible(prob, it));
            }
        }

        let dvec = lam.component_div(&s);
        let mut hmat = p.clone();
        for i in 0..m {
            let gi = g.row(i);
            hmat.ger(dvec[i], &gi.transpose(), &gi.transpose(), 1.0);
        }
        let chol = factor(hmat);

        let direction = |rc: &DVector<f64>| {
            // rhs = -rd - G^T S^-1 (-rc + Λ rp)
            let inner = (-rc + lam.component_mul(&rp)).component_div(&s);
            let dz = chol.solve(&(-&rd - &gt * &inner));
            let ds = -&rp - &g * &dz;
            let dl = (-rc - lam.component_mul(&ds)).component_div(&s);
            (dz, ds, dl)
        };
        let step = |v: &DVector<f64>, dv: &DVector<f64>| {
            v.iter()
                .zip(dv.iter())
                .filter(|(_, d)| **d < 0.0)
                .map(|(x, d)| -x / d)
                .fold(1.0_f64, f64::min)
        };

        let rc_aff = s.component_mul(&lam);
        let (_, ds_a, dl_a) = direction(&rc_aff);
        let alpha_aff = step(&s, &ds_a).min(step(&lam, &dl_a));
        let mu_aff = (&s + ds_a.scale(alpha_aff)).dot(&(&lam + dl_a.scale(alpha_aff))) / m as f64;
        let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);
        let rc = &rc_aff + ds_a.component_mul(&dl_a) - DVector::from_element(m, sigma * mu);
        let (dz, ds, dl) = direction(&rc);
        let alpha = (0.99 * step(&s, &ds).min(step(&lam, &dl))).min(1.0);
        z += dz.scale(alpha);
        s += ds.scale(alpha);
        lam += dl.scale(alpha);
    }

    for (k, row) in rows.iter().enumerate() {
        duals[row.0] = lam[k] / row.3;
    }
    Ok(finish(prob, complex_from_embed(&z), duals, status, iterations))
}
