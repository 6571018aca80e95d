//! Block-diagonal complex semidefinite programs.
//!
//! minimize   Σ_k Re Tr(C_k X_k)
//! subject to Σ_k Re Tr(A_jk X_k) {≤, =, ≥} b_j,   X_k ⪰ 0
//!
//! Inequalities are turned into equalities with 1×1 slack blocks. The solver
//! is an infeasible-start primal-dual method with the HKM search direction
//! and Mehrotra's predictor-corrector.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::{dump_matrix, Status};
use crate::error::{Error, Result};
use crate::linalg::{hermitian_part, CMat, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpConstraint {
    /// Sparse list of `(block, A_jk)`; blocks not listed have zero data.
    pub terms: Vec<(usize, CMat)>,
    pub sense: Sense,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpProblem {
    pub blocks: Vec<usize>,
    pub c: Vec<CMat>,
    pub constraints: Vec<SdpConstraint>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpSolution {
    pub x: Vec<CMat>,
    pub z: Vec<CMat>,
    pub y: Vec<f64>,
    pub status: Status,
    pub primal_objective: f64,
    pub dual_objective: f64,
    /// Largest constraint violation relative to `1 + |b_j|`.
    pub primal_residual: f64,
    /// `||C - Z - Σ y_j A_j||_F` relative to `1 + ||C||_F`.
    pub dual_residual: f64,
    /// `|p - d| / (1 + |p| + |d|)`.
    pub gap: f64,
    pub min_eigenvalue: f64,
    pub iterations: usize,
}

impl SdpProblem {
    pub fn new(blocks: Vec<usize>) -> Self {
        let c = blocks.iter().map(|&n| CMat::zeros(n, n)).collect();
        Self {
            blocks,
            c,
            constraints: Vec::new(),
        }
    }

    pub fn set_objective(&mut self, block: usize, c: CMat) {
        self.c[block] = c;
    }

    pub fn add(&mut self, terms: Vec<(usize, CMat)>, sense: Sense, rhs: f64) {
        self.constraints.push(SdpConstraint { terms, sense, rhs });
    }

    /// Pins `X_k[i, j]` (and its conjugate mirror) to `value`.
    pub fn fix_entry(&mut self, block: usize, i: usize, j: usize, value: C64) {
        let n = self.blocks[block];
        if i == j {
            let mut a = CMat::zeros(n, n);
            a[(i, i)] = C64::from(1.0);
            self.add(vec![(block, a)], Sense::Eq, value.re);
            return;
        }
        let mut re = CMat::zeros(n, n);
        re[(i, j)] = C64::from(0.5);
        re[(j, i)] = C64::from(0.5);
        self.add(vec![(block, re)], Sense::Eq, value.re);
        let mut im = CMat::zeros(n, n);
        im[(i, j)] = C64::new(0.0, 0.5);
        im[(j, i)] = C64::new(0.0, -0.5);
        self.add(vec![(block, im)], Sense::Eq, value.im);
    }

    fn validate(&self) -> Result<()> {
        if self.c.len() != self.blocks.len() {
            return Err(Error::DimensionMismatch("one cost matrix per block".into()));
        }
        for (k, (c, &n)) in self.c.iter().zip(&self.blocks).enumerate() {
            if c.shape() != (n, n) || n == 0 {
                return Err(Error::DimensionMismatch(format!("cost block {k}")));
            }
        }
        for (j, con) in self.constraints.iter().enumerate() {
            for (k, a) in &con.terms {
                let n = *self
                    .blocks
                    .get(*k)
                    .ok_or_else(|| Error::DimensionMismatch(format!("constraint {j} block {k}")))?;
                if a.shape() != (n, n) {
                    return Err(Error::DimensionMismatch(format!("constraint {j} block {k}")));
                }
            }
        }
        Ok(())
    }

    pub fn objective(&self, x: &[CMat]) -> f64 {
        self.c.iter().zip(x).map(|(c, x)| trace_prod(c, x)).sum()
    }

    /// Violation of each constraint at `x` (positive means violated).
    pub fn violations(&self, x: &[CMat]) -> Vec<f64> {
        self.constraints
            .iter()
            .map(|con| {
                let lhs: f64 = con.terms.iter().map(|(k, a)| trace_prod(a, &x[*k])).sum();
                match con.sense {
                    Sense::Eq => (lhs - con.rhs).abs(),
                    Sense::Le => (lhs - con.rhs).max(0.0),
                    Sense::Ge => (con.rhs - lhs).max(0.0),
                }
            })
            .collect()
    }

    pub fn dump(&self) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        let _ = writeln!(out, "sdp blocks={:?} m={}", self.blocks, self.constraints.len());
        for (k, c) in self.c.iter().enumerate() {
            dump_matrix(&mut out, &format!("C[{k}]"), c);
        }
        for (j, con) in self.constraints.iter().enumerate() {
            let _ = writeln!(out, "constraint {j} {:?} {:e}", con.sense, con.rhs);
            for (k, a) in &con.terms {
                dump_matrix(&mut out, &format!("  A[{j},{k}]"), a);
            }
        }
        out
    }
}

/// `Re Tr(A X)` for Hermitian arguments.
fn trace_prod(a: &CMat, x: &CMat) -> f64 {
    // Tr(AX) = Σ_ij A_ij X_ji
    let mut s = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            let p = a[(i, j)] * x[(j, i)];
            s += p.re;
        }
    }
    s
}

fn identity_like(n: usize, v: f64) -> CMat {
    CMat::identity(n, n).scale(v)
}

fn chol_inverse(m: &CMat) -> Option<CMat> {
    Cholesky::new(m.clone()).map(|c| c.inverse())
}

/// Largest `α` with `X + α ΔX ⪰ 0`, capped at `cap`.
fn max_step(x: &CMat, dx: &CMat, cap: f64) -> f64 {
    let Some(chol) = Cholesky::new(x.clone()) else {
        return 0.0;
    };
    let l = chol.l();
    let n = x.nrows();
    let Some(linv) = l.solve_lower_triangular(&CMat::identity(n, n)) else {
        return 0.0;
    };
    let t = hermitian_part(&(&linv * dx * linv.adjoint()));
    let lmin = SymmetricEigen::new(t)
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    if lmin >= 0.0 {
        cap
    } else {
        (-1.0 / lmin).min(cap)
    }
}

fn min_eig(m: &CMat) -> f64 {
    SymmetricEigen::new(hermitian_part(m))
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Equality-form data after slack insertion and scaling.
struct Standard {
    blocks: Vec<usize>,
    c: Vec<CMat>,
    a: Vec<Vec<(usize, CMat)>>,
    b: DVector<f64>,
    row_scale: Vec<f64>,
    c_scale: f64,
    b_scale: f64,
}

fn standardize(prob: &SdpProblem) -> Standard {
    let mut blocks = prob.blocks.clone();
    let mut a = Vec::with_capacity(prob.constraints.len());
    let mut row_scale = Vec::with_capacity(prob.constraints.len());
    for con in &prob.constraints {
        let mut terms: Vec<(usize, CMat)> = con.terms.iter().map(|(k, m)| (*k, hermitian_part(m))).collect();
        let norm = terms.iter().map(|(_, m)| m.norm_squared()).sum::<f64>().sqrt();
        let norm = if norm > 0.0 { norm } else { 1.0 };
        let slack = match con.sense {
            Sense::Le => Some(1.0),
            Sense::Ge => Some(-1.0),
            Sense::Eq => None,
        };
        if let Some(sign) = slack {
            blocks.push(1);
            terms.push((blocks.len() - 1, CMat::from_element(1, 1, C64::from(sign))));
        }
        for (_, m) in &mut terms {
            *m /= C64::from(norm);
        }
        a.push(terms);
        row_scale.push(norm);
    }
    let c_norm = prob.c.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let c_scale = c_norm.max(1.0);
    let mut c: Vec<CMat> = prob.c.iter().map(|c| hermitian_part(c) / C64::from(c_scale)).collect();
    for &n in &blocks[prob.blocks.len()..] {
        c.push(CMat::zeros(n, n));
    }
    let b_raw = DVector::from_iterator(
        prob.constraints.len(),
        prob.constraints.iter().zip(&row_scale).map(|(con, s)| con.rhs / s),
    );
    let b_scale = b_raw.amax().max(1.0);
    Standard {
        blocks,
        c,
        a,
        b: b_raw / b_scale,
        row_scale,
        c_scale,
        b_scale,
    }
}

impl Standard {
    fn apply(&self, x: &[CMat]) -> DVector<f64> {
        DVector::from_iterator(
            self.a.len(),
            self.a
                .iter()
                .map(|terms| terms.iter().map(|(k, m)| trace_prod(m, &x[*k])).sum::<f64>()),
        )
    }

    fn adjoint(&self, y: &DVector<f64>) -> Vec<CMat> {
        let mut out: Vec<CMat> = self.blocks.iter().map(|&n| CMat::zeros(n, n)).collect();
        for (terms, &yj) in self.a.iter().zip(y.iter()) {
            for (k, m) in terms {
                out[*k] += m * C64::from(yj);
            }
        }
        out
    }
}

const MAX_ITER: usize = 100;
const TOL: f64 = 1e-10;

fn inner(a: &[CMat], b: &[CMat]) -> f64 {
    a.iter().zip(b).map(|(a, b)| trace_prod(a, b)).sum()
}

fn fro(a: &[CMat]) -> f64 {
    a.iter().map(|m| m.norm_squared()).sum::<f64>().sqrt()
}

pub fn solve_sdp(prob: &SdpProblem) -> Result<SdpSolution> {
    prob.validate()?;
    let std = standardize(prob);
    let m = std.a.len();
    let nblk = std.blocks.len();
    let n_total: usize = std.blocks.iter().sum();

    let c_norm = fro(&std.c);
    let b_norm = std.b.norm();
    let xi = 10.0_f64.max((n_total as f64).sqrt());
    let mut x: Vec<CMat> = std.blocks.iter().map(|&n| identity_like(n, xi)).collect();
    let mut z: Vec<CMat> = std.blocks.iter().map(|&n| identity_like(n, xi)).collect();
    let mut y = DVector::<f64>::zeros(m);

    let mut status = Status::MaxIter;
    let mut iterations = MAX_ITER;
    for it in 0..MAX_ITER {
        let rp = &std.b - std.apply(&x);
        let aty = std.adjoint(&y);
        let rd: Vec<CMat> = (0..nblk).map(|k| &std.c[k] - &z[k] - &aty[k]).collect();
        let mu = inner(&x, &z) / n_total as f64;
        let pobj = inner(&std.c, &x);
        let dobj = std.b.dot(&y);
        let gap = (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs());
        if rp.norm() / (1.0 + b_norm) <= TOL && fro(&rd) / (1.0 + c_norm) <= TOL && gap <= TOL {
            status = Status::Optimal;
            iterations = it;
            break;
        }
        let ynorm = y.amax();
        if ynorm > 1e8 && dobj / ynorm > 1e-10 {
            let yhat = &y / ynorm;
            let ray = std.adjoint(&yhat);
            if ray.iter().all(|s| -min_eig(&(-s)) <= 1e-7) {
                status = Status::Infeasible;
                iterations = it;
                break;
            }
        }

        let Some(zinv) = z.iter().map(chol_inverse).collect::<Option<Vec<_>>>() else {
            break;
        };

        // Schur complement M_ij = Re Σ_k Tr(A_ik X_k A_jk Z_k^-1).
        let g: Vec<Vec<(usize, CMat)>> = std
            .a
            .iter()
            .map(|terms| terms.iter().map(|(k, a)| (*k, &x[*k] * a * &zinv[*k])).collect())
            .collect();
        let mut schur = DMatrix::<f64>::zeros(m, m);
        for i in 0..m {
            for j in i..m {
                let mut s = 0.0;
                for (ki, ai) in &std.a[i] {
                    for (kj, gj) in &g[j] {
                        if ki == kj {
                            s += trace_prod(ai, gj);
                        }
                    }
                }
                schur[(i, j)] = s;
                schur[(j, i)] = s;
            }
        }
        let chol = Cholesky::new(schur.clone());
        let lu = schur.lu();
        let solve_m = |r: &DVector<f64>| match &chol {
            Some(c) => Some(c.solve(r)),
            None => lu.solve(r),
        };

        let xrdz: Vec<CMat> = (0..nblk).map(|k| &x[k] * &rd[k] * &zinv[k]).collect();
        let direction = |target: &[CMat]| -> Option<(Vec<CMat>, DVector<f64>, Vec<CMat>)> {
            // ΔX = R Z^-1 - X - X ΔZ Z^-1, ΔZ = R_d - A^T Δy, A(ΔX) = r_p.
            let rz: Vec<CMat> = (0..nblk).map(|k| &target[k] * &zinv[k] - &x[k]).collect();
            let rhs = &rp - std.apply(&rz) + std.apply(&xrdz);
            let dy = solve_m(&rhs)?;
            let atdy = std.adjoint(&dy);
            let dz: Vec<CMat> = (0..nblk).map(|k| &rd[k] - &atdy[k]).collect();
            let dx: Vec<CMat> = (0..nblk)
                .map(|k| hermitian_part(&(&rz[k] - &x[k] * &dz[k] * &zinv[k])))
                .collect();
            Some((dx, dy, dz))
        };
        let steps = |dx: &[CMat], dz: &[CMat]| {
            let ap = (0..nblk).map(|k| max_step(&x[k], &dx[k], 1.0)).fold(1.0, f64::min);
            let ad = (0..nblk).map(|k| max_step(&z[k], &dz[k], 1.0)).fold(1.0, f64::min);
            (ap, ad)
        };

        let zero: Vec<CMat> = std.blocks.iter().map(|&n| CMat::zeros(n, n)).collect();
        let Some((dxa, _, dza)) = direction(&zero) else {
            break;
        };
        let (apa, ada) = steps(&dxa, &dza);
        let xa: Vec<CMat> = (0..nblk).map(|k| &x[k] + &dxa[k] * C64::from(apa)).collect();
        let za: Vec<CMat> = (0..nblk).map(|k| &z[k] + &dza[k] * C64::from(ada)).collect();
        let mu_aff = inner(&xa, &za) / n_total as f64;
        let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);
        let target: Vec<CMat> = (0..nblk)
            .map(|k| identity_like(std.blocks[k], sigma * mu) - &dxa[k] * &dza[k])
            .collect();
        let Some((dx, dy, dz)) = direction(&target) else {
            break;
        };
        let (ap, ad) = steps(&dx, &dz);
        let gamma = if it < 5 { 0.9 } else { 0.98 };
        let (ap, ad) = ((gamma * ap).min(1.0), (gamma * ad).min(1.0));
        for k in 0..nblk {
            x[k] += &dx[k] * C64::from(ap);
            z[k] += &dz[k] * C64::from(ad);
            x[k] = hermitian_part(&x[k]);
            z[k] = hermitian_part(&z[k]);
        }
        y += dy * ad;
    }

    // Undo scaling.
    let nb = prob.blocks.len();
    let xs: Vec<CMat> = x[..nb].iter().map(|m| m * C64::from(std.b_scale)).collect();
    let zs: Vec<CMat> = z[..nb].iter().map(|m| m * C64::from(std.c_scale)).collect();
    let ys: Vec<f64> = y.iter().zip(&std.row_scale).map(|(v, r)| v * std.c_scale / r).collect();
    let primal_objective = prob.objective(&xs);
    let dual_objective: f64 = prob.constraints.iter().zip(&ys).map(|(c, y)| c.rhs * y).sum();
    let primal_residual = prob
        .violations(&xs)
        .iter()
        .zip(&prob.constraints)
        .map(|(v, c)| v / (1.0 + c.rhs.abs()))
        .fold(0.0, f64::max);
    let mut dres: Vec<CMat> = prob.c.iter().map(hermitian_part).collect();
    for (k, zk) in zs.iter().enumerate() {
        dres[k] -= zk;
    }
    for (con, &yj) in prob.constraints.iter().zip(&ys) {
        for (k, a) in &con.terms {
            dres[*k] -= hermitian_part(a) * C64::from(yj);
        }
    }
    let c_full = fro(&prob.c);
    let dual_residual = fro(&dres) / (1.0 + c_full);
    let gap = (primal_objective - dual_objective).abs() / (1.0 + primal_objective.abs() + dual_objective.abs());
    let min_eigenvalue = xs.iter().map(min_eig).fold(f64::INFINITY, f64::min);
    Ok(SdpSolution {
        x: xs,
        z: zs,
        y: ys,
        status,
        primal_objective,
        dual_objective,
        primal_residual,
        dual_residual,
        gap,
        min_eigenvalue,
        iterations,
    })
}
