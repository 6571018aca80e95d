//! Seeded propagation environment: user drop, path loss, Rician/Rayleigh
//! small-scale fading, IRS steering vectors, target response and the residual
//! self-interference channel.

use std::f64::consts::PI;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::linalg::{cn_matrix, cn_vector, CMat, CVec, C64};

/// Half-wavelength ULA response: entry `i` is `exp(-j π i sin θ)`.
pub fn steering_vector(theta: f64, n: usize) -> Result<CVec> {
    if n == 0 {
        return Err(Error::InvalidDimension(
            "steering vector needs at least one element".into(),
        ));
    }
    let s = theta.sin();
    Ok(DVector::from_fn(n, |i, _| C64::from_polar(1.0, -PI * i as f64 * s)))
}

/// `Λ (d / d0)^(-η)`, linear.
pub fn path_loss(cfg: &SystemConfig, d_m: f64, exponent: f64) -> Result<f64> {
    path_loss_with(cfg.pathloss, cfg.d0_m, d_m, exponent)
}

pub fn path_loss_with(lambda: f64, d0: f64, d_m: f64, exponent: f64) -> Result<f64> {
    if d_m.is_nan() || d_m <= 0.0 {
        return Err(Error::Domain(format!("distance must be positive, got {d_m}")));
    }
    Ok(lambda * (d_m / d0).powf(-exponent))
}

fn distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Direction of `to` as seen from `from`.
fn bearing(from: [f64; 2], to: [f64; 2]) -> f64 {
    (to[1] - from[1]).atan2(to[0] - from[0])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layout {
    pub cm: Vec<[f64; 2]>,
    pub cp: Vec<[f64; 2]>,
}

/// One realization of every channel in the system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSet {
    pub layout: Layout,
    /// BS TX → IRS, M × N_t.
    pub g_t: CMat,
    /// BS RX ↔ IRS, M × N_r.
    pub g_r: CMat,
    /// IRS → CM-UE k, length M.
    pub h_pu: Vec<CVec>,
    /// CP-UE l → IRS reflecting elements, length M.
    pub g_pu: Vec<CVec>,
    /// CP-UE l → IRS sensing elements, length M_a.
    pub g_au: Vec<CVec>,
    /// CP-UE l → CM-UE k.
    pub e_direct: Vec<Vec<C64>>,
    /// Residual self-interference, N_r × N_t.
    pub h_si: CMat,
    pub a_active: CVec,
    pub a_passive: CVec,
    /// Target response `η a_a a_p^H`, M_a × M.
    pub g_s: CMat,
}

impl ChannelSet {
    /// Draws channels from the config's own seed.
    pub fn generate(cfg: &SystemConfig) -> Result<Self> {
        let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
        draw_channels(cfg, &mut rng)
    }

    pub fn n_tx(&self) -> usize {
        self.g_t.ncols()
    }

    pub fn n_rx(&self) -> usize {
        self.g_r.ncols()
    }

    pub fn m(&self) -> usize {
        self.g_t.nrows()
    }

    pub fn n_cm(&self) -> usize {
        self.h_pu.len()
    }

    pub fn n_cp(&self) -> usize {
        self.g_pu.len()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Checks every dimension against `cfg`.
    pub fn check_dims(&self, cfg: &SystemConfig) -> Result<()> {
        let (m, ma, nt, nr) = (cfg.m_passive, cfg.m_active, cfg.n_tx, cfg.n_rx);
        let ok = self.g_t.shape() == (m, nt)
            && self.g_r.shape() == (m, nr)
            && self.h_pu.len() == cfg.n_cm
            && self.h_pu.iter().all(|h| h.len() == m)
            && self.g_pu.len() == cfg.n_cp
            && self.g_pu.iter().all(|g| g.len() == m)
            && self.g_au.len() == cfg.n_cp
            && self.g_au.iter().all(|g| g.len() == ma)
            && self.e_direct.len() == cfg.n_cp
            && self.e_direct.iter().all(|row| row.len() == cfg.n_cm)
            && self.h_si.shape() == (nr, nt)
            && self.a_active.len() == ma
            && self.a_passive.len() == m
            && self.g_s.shape() == (ma, m);
        if ok {
            Ok(())
        } else {
            Err(Error::DimensionMismatch(
                "channel set does not match configuration".into(),
            ))
        }
    }
}

struct Rician {
    k: f64,
}

impl Rician {
    fn los_weight(&self) -> f64 {
        (self.k / (1.0 + self.k)).sqrt()
    }

    fn nlos_weight(&self) -> f64 {
        (1.0 / (1.0 + self.k)).sqrt()
    }

    fn vector<R: Rng>(&self, rng: &mut R, pl: f64, los: &CVec) -> CVec {
        let nlos = cn_vector(rng, los.len());
        (los.scale(self.los_weight()) + nlos.scale(self.nlos_weight())).scale(pl.sqrt())
    }

    fn matrix<R: Rng>(&self, rng: &mut R, pl: f64, rx: &CVec, tx: &CVec) -> CMat {
        let los = rx * tx.adjoint();
        let nlos = cn_matrix(rng, rx.len(), tx.len());
        (los.scale(self.los_weight()) + nlos.scale(self.nlos_weight())).scale(pl.sqrt())
    }
}

fn drop_user<R: Rng>(rng: &mut R, cfg: &SystemConfig) -> [f64; 2] {
    let g = &cfg.geometry;
    let x = if g.user_x[1] > g.user_x[0] {
        rng.random_range(g.user_x[0]..g.user_x[1])
    } else {
        g.user_x[0]
    };
    let y = if g.user_y[1] > g.user_y[0] {
        rng.random_range(g.user_y[0]..g.user_y[1])
    } else {
        g.user_y[0]
    };
    [x, y]
}

/// Generates a full channel realization. The draw order is fixed, so a given
/// RNG state always yields the same set.
pub fn draw_channels<R: Rng>(cfg: &SystemConfig, rng: &mut R) -> Result<ChannelSet> {
    cfg.validate()?;
    let g = &cfg.geometry;
    let (m, ma, nt, nr) = (cfg.m_passive, cfg.m_active, cfg.n_tx, cfg.n_rx);
    let fading = Rician { k: cfg.rician_k() };
    let ex = &cfg.exponents;

    let cm: Vec<[f64; 2]> = (0..cfg.n_cm).map(|_| drop_user(rng, cfg)).collect();
    let cp: Vec<[f64; 2]> = (0..cfg.n_cp).map(|_| drop_user(rng, cfg)).collect();

    let d_br = distance(g.bs, g.irs);
    let pl_br = path_loss(cfg, d_br, ex.br)?;
    let a_irs_bs = steering_vector(bearing(g.irs, g.bs), m)?;
    let g_t = fading.matrix(rng, pl_br, &a_irs_bs, &steering_vector(bearing(g.bs, g.irs), nt)?);
    let g_r = fading.matrix(rng, pl_br, &a_irs_bs, &steering_vector(bearing(g.bs, g.irs), nr)?);

    let mut h_pu = Vec::with_capacity(cfg.n_cm);
    for &pos in &cm {
        let pl = path_loss(cfg, distance(g.irs, pos), ex.ru)?;
        h_pu.push(fading.vector(rng, pl, &steering_vector(bearing(g.irs, pos), m)?));
    }
    let mut g_pu = Vec::with_capacity(cfg.n_cp);
    let mut g_au = Vec::with_capacity(cfg.n_cp);
    for &pos in &cp {
        let pl = path_loss(cfg, distance(g.irs, pos), ex.ru)?;
        let angle = bearing(g.irs, pos);
        g_pu.push(fading.vector(rng, pl, &steering_vector(angle, m)?));
        g_au.push(fading.vector(rng, pl, &steering_vector(angle, ma)?));
    }
    let mut e_direct = Vec::with_capacity(cfg.n_cp);
    for &pl_pos in &cp {
        let mut row = Vec::with_capacity(cfg.n_cm);
        for &cm_pos in &cm {
            // Co-located users are clamped to the reference distance.
            let d = distance(pl_pos, cm_pos).max(cfg.d0_m);
            let pl = path_loss(cfg, d, ex.mp)?;
            row.push(crate::linalg::cn(rng) * pl.sqrt());
        }
        e_direct.push(row);
    }

    let si_amp = cfg.si_power().sqrt();
    let mut h_si = CMat::zeros(nr, nt);
    for r in 0..nr {
        for t in 0..nt {
            h_si[(r, t)] = C64::from_polar(si_amp, rng.random_range(0.0..std::f64::consts::TAU));
        }
    }

    let a_active = steering_vector(g.theta, ma)?;
    let a_passive = steering_vector(g.theta, m)?;
    let g_s = (&a_active * a_passive.adjoint()).scale(cfg.eta_rt());

    Ok(ChannelSet {
        layout: Layout { cm, cp },
        g_t,
        g_r,
        h_pu,
        g_pu,
        g_au,
        e_direct,
        h_si,
        a_active,
        a_passive,
        g_s,
    })
}

/// Same as [`ChannelSet::generate`] with an explicit seed.
pub fn draw_seeded(cfg: &SystemConfig, seed: u64) -> Result<ChannelSet> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    draw_channels(cfg, &mut rng)
}

#[allow(dead_code)]
fn _assert_send_sync() {
    fn is<T: Send + Sync>() {}
    is::<ChannelSet>();
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c64;

    fn close(a: C64, b: C64) -> bool {
        (a - b).norm() < 1e-12
    }

    #[test]
    fn steering_examples() {
        let v = steering_vector(40f64.to_radians(), 1).unwrap();
        assert!(close(v[0], c64(1.0, 0.0)));
        let v = steering_vector(0.0, 4).unwrap();
        assert!(v.iter().all(|&z| close(z, c64(1.0, 0.0))));
        let v = steering_vector(PI / 2.0, 3).unwrap();
        assert!(close(v[0], c64(1.0, 0.0)));
        assert!(close(v[1], c64(-1.0, 0.0)));
        assert!(close(v[2], c64(1.0, 0.0)));
        assert!(matches!(steering_vector(0.3, 0), Err(Error::InvalidDimension(_))));
    }

    #[test]
    fn steering_entries_are_unit_modulus() {
        let v = steering_vector(1.1, 37).unwrap();
        assert!(v.iter().all(|z| (z.norm() - 1.0).abs() < 1e-14));
    }

    #[test]
    fn path_loss_examples() {
        let cfg = SystemConfig::default();
        assert!((path_loss(&cfg, 1.0, 2.2).unwrap() - 1e-3).abs() < 1e-15);
        assert!((path_loss(&cfg, cfg.d0_m, 3.7).unwrap() - cfg.pathloss).abs() < 1e-18);
        assert!((path_loss(&cfg, 10.0, 2.0).unwrap() - 1e-5).abs() < 1e-17);
        assert!(matches!(path_loss(&cfg, 0.0, 2.0), Err(Error::Domain(_))));
        assert!(matches!(path_loss(&cfg, -3.0, 2.0), Err(Error::Domain(_))));
    }

    #[test]
    fn deterministic_under_seed() {
        let cfg = SystemConfig::default();
        let a = ChannelSet::generate(&cfg).unwrap();
        let b = ChannelSet::generate(&cfg).unwrap();
        assert_eq!(a, b);
        let c = draw_seeded(&cfg, cfg.seed + 1).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn si_entries_have_exact_power() {
        let cfg = SystemConfig::default();
        let ch = ChannelSet::generate(&cfg).unwrap();
        let target = 10f64.powf(-5.5);
        for z in ch.h_si.iter() {
            assert!((z.norm() - target).abs() < 1e-12 * target);
        }
    }

    #[test]
    fn dimensions_and_target_response() {
        let cfg = SystemConfig::default();
        let ch = ChannelSet::generate(&cfg).unwrap();
        ch.check_dims(&cfg).unwrap();
        let expect = (&ch.a_active * ch.a_passive.adjoint()).scale(cfg.eta_rt());
        assert_eq!(ch.g_s, expect);
        let (vals, _) = crate::linalg::eigh_desc(&(ch.g_s.adjoint() * &ch.g_s));
        assert!(vals[1] <= 1e-12 * vals[0]);
    }

    #[test]
    fn users_inside_drop_region() {
        let cfg = SystemConfig::default();
        for seed in 0..20 {
            let ch = draw_seeded(&cfg, seed).unwrap();
            for p in ch.layout.cm.iter().chain(&ch.layout.cp) {
                assert!((10.0..=40.0).contains(&p[0]) && (0.0..=1.0).contains(&p[1]));
            }
        }
    }

    #[test]
    fn json_dump_round_trips_bitwise() {
        let cfg = SystemConfig::default();
        let ch = ChannelSet::generate(&cfg).unwrap();
        let back = ChannelSet::from_json(&ch.to_json().unwrap()).unwrap();
        assert_eq!(ch, back);
    }
}
