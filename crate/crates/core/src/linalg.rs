//! Dense complex linear-algebra helpers shared by the optimizer blocks.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

pub type C64 = Complex64;
pub type CVec = DVector<C64>;
pub type CMat = DMatrix<C64>;

pub const fn c64(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Draws one CN(0, 1) sample.
pub fn cn<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    c64(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn cn_vector<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CVec {
    DVector::from_fn(n, |_, _| cn(rng))
}

pub fn cn_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMat {
    // Row-major fill keeps the draw order independent of nalgebra's storage.
    let mut m = CMat::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            m[(i, j)] = cn(rng);
        }
    }
    m
}

/// Random unit-modulus vector with i.i.d. uniform phases.
pub fn random_phases<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CVec {
    DVector::from_fn(n, |_, _| {
        C64::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU))
    })
}

/// Re{x^H A x}.
pub fn quad_form(a: &CMat, x: &CVec) -> f64 {
    x.dotc(&(a * x)).re
}

pub fn hermitian_part(m: &CMat) -> CMat {
    (m + m.adjoint()).scale(0.5)
}

pub fn outer(x: &CVec, y: &CVec) -> CMat {
    x * y.adjoint()
}

/// Eigen-decomposition of a Hermitian matrix with eigenvalues sorted descending.
pub fn eigh_desc(m: &CMat) -> (Vec<f64>, CMat) {
    let eig = SymmetricEigen::new(hermitian_part(m));
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vecs = CMat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vecs.set_column(dst, &eig.eigenvectors.column(src));
    }
    (vals, vecs)
}

/// Largest eigenvalue and a matching unit eigenvector.
pub fn principal_eig(m: &CMat) -> (f64, CVec) {
    let (vals, vecs) = eigh_desc(m);
    (vals[0], vecs.column(0).into_owned())
}

pub fn min_eigenvalue(m: &CMat) -> f64 {
    let (vals, _) = eigh_desc(m);
    *vals.last().unwrap_or(&0.0)
}

/// Real embedding `[[Re A, -Im A], [Im A, Re A]]` of a complex matrix.
pub fn real_embed(a: &CMat) -> DMatrix<f64> {
    let (r, c) = a.shape();
    let mut out = DMatrix::zeros(2 * r, 2 * c);
    for i in 0..r {
        for j in 0..c {
            let z = a[(i, j)];
            out[(i, j)] = z.re;
            out[(i, j + c)] = -z.im;
            out[(i + r, j)] = z.im;
            out[(i + r, j + c)] = z.re;
        }
    }
    out
}

pub fn real_embed_vec(x: &CVec) -> DVector<f64> {
    let n = x.len();
    DVector::from_fn(2 * n, |i, _| if i < n { x[i].re } else { x[i - n].im })
}

pub fn complex_from_embed(x: &DVector<f64>) -> CVec {
    let n = x.len() / 2;
    DVector::from_fn(n, |i, _| c64(x[i], x[i + n]))
}

/// Entrywise projection onto the unit circle; zero entries map to 1.
pub fn unit_modulus(x: &CVec) -> CVec {
    x.map(|z| {
        let r = z.norm();
        if r > 0.0 {
            z / r
        } else {
            c64(1.0, 0.0)
        }
    })
}

pub fn max_abs(x: &CVec) -> f64 {
    x.iter().fold(0.0, |m, z| m.max(z.norm()))
}

pub fn fro_norm(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}
