//! Block coordinate ascent over auxiliaries, IRS phases, transmit beams,
//! receive combiners and CP-UE power/CPU, plus the baseline schemes.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::beamforming::{assemble_rx_coeffs, optimize_tx, solve_rx};
use crate::cacheopt::{no_caching, random_caching, solve_caching};
use crate::channels::ChannelSet;
use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::linalg::{principal_eig, random_phases, CMat, CVec, C64};
use crate::phaseadmm::{optimize_phase, AdmmOptions};
use crate::powercomp::{assemble_power_coeffs, optimize_power};
use crate::sysmodel::{
    composite_channels, normalized_objective, radar_echo, utility, Duplex, Metrics, Model, Residuals, Solution,
};
use crate::wmmse::{surrogate_objective_with, update_aux_with};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    Proposed,
    FullOffloading,
    FixedPhase,
    Hd,
    RandomCaching,
    NoCaching,
}

impl Scheme {
    pub const ALL: [Scheme; 6] = [
        Scheme::Proposed,
        Scheme::FullOffloading,
        Scheme::FixedPhase,
        Scheme::Hd,
        Scheme::RandomCaching,
        Scheme::NoCaching,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Proposed => "proposed",
            Scheme::FullOffloading => "full-offloading",
            Scheme::FixedPhase => "fixed-phase",
            Scheme::Hd => "hd",
            Scheme::RandomCaching => "random-caching",
            Scheme::NoCaching => "no-caching",
        }
    }

    fn duplex(self) -> Duplex {
        if self == Scheme::Hd {
            Duplex::Half
        } else {
            Duplex::Full
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::UnknownScheme(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    pub scheme: Scheme,
    pub max_iter: usize,
    /// Relative surrogate improvement below which an iteration counts as stalled.
    pub tol: f64,
    /// Consecutive stalled iterations that end the run.
    pub patience: usize,
    pub n_draws: usize,
    pub admm: AdmmOptions,
    /// Seed of the optimizer's own randomness (initial phases, SDR draws,
    /// random caching). Channels are drawn separately.
    pub seed: u64,
    pub phase_init: PhaseInit,
}

/// Starting point of the phase shifts for schemes that optimize them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum PhaseInit {
    /// Co-phased with the strongest cascaded link, as in the fixed-phase baseline.
    #[default]
    Aligned,
    /// Uniform random unit-modulus phases.
    Random,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            scheme: Scheme::Proposed,
            max_iter: 50,
            tol: 1e-4,
            patience: 3,
            n_draws: 200,
            admm: AdmmOptions::default(),
            seed: 1,
            phase_init: PhaseInit::Aligned,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunStatus {
    Converged,
    MaxIter,
    InfeasibleSensing,
}

impl fmt::Display for RunStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RunStatus::Converged => "converged",
            RunStatus::MaxIter => "max-iter",
            RunStatus::InfeasibleSensing => "infeasible-sensing",
        })
    }
}

/// One row per outer iteration; row 0 is the initial point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationTrace {
    pub iter: usize,
    /// Surrogate objective with the auxiliaries used in this iteration, bit/s/Hz.
    pub surrogate: f64,
    /// Exact normalized objective, bit/s/Hz.
    pub objective: f64,
    pub utility_bits: f64,
    pub sum_bits: f64,
    pub res_power: f64,
    pub res_radar: f64,
    pub res_unit_modulus: f64,
    pub res_energy: f64,
    pub res_cache: f64,
    pub phase_updated: bool,
    pub beams_updated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub scheme: Scheme,
    pub status: RunStatus,
    pub iterations: usize,
    pub solution: Solution,
    pub metrics: Metrics,
    pub residuals: Residuals,
    pub trace: Vec<IterationTrace>,
    /// Wall time per trace row, ms. Kept apart from the trace so that the
    /// trace is reproducible bit for bit.
    pub wall_ms: Vec<f64>,
}

impl RunResult {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn write_trace_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for row in &self.trace {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Writes `result.json` and `trace.csv` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("result.json"), self.to_json()?)?;
        self.write_trace_csv(std::fs::File::create(dir.join("trace.csv"))?)?;
        Ok(())
    }
}

/// Receive filters `(Σ p g g^H + SI + σ² I)⁻¹ g_l`.
fn lmmse_combiners(model: &Model, sol: &Solution) -> Result<Vec<CVec>> {
    let comp = composite_channels(model.ch, &sol.phi)?;
    let mut aux = crate::wmmse::AuxVars::zeros(model.k(), model.l());
    aux.beta2.iter_mut().for_each(|b| *b = C64::from(1.0));
    let mut probe = sol.clone();
    // Unit powers in the numerator only; the covariance keeps the real ones.
    let mut rx = assemble_rx_coeffs(model, &probe, &comp, &aux);
    for (l, t) in rx.t5.iter_mut().enumerate() {
        *t = comp.g[l].clone();
    }
    probe.u = solve_rx(&rx, &sol.u);
    Ok(probe.u)
}

fn sensing_direction(ch: &ChannelSet, phi: &CVec) -> (f64, CVec) {
    let cascade = &ch.g_s * CMat::from_diagonal(phi) * &ch.g_t;
    principal_eig(&(cascade.adjoint() * cascade))
}

/// Feasible starting point, or `None` when the radar target cannot be met
/// even with the whole budget on the sensing beam.
pub fn initialize(model: &Model, phi: CVec, e: Vec<f64>) -> Result<Option<Solution>> {
    let cfg = model.cfg;
    let ch = model.ch;
    let comp = composite_channels(ch, &phi)?;
    let n = cfg.n_tx;
    let (lmax, w0_dir) = sensing_direction(ch, &phi);
    let dirs: Vec<CVec> = comp
        .h
        .iter()
        .map(|h| {
            let v = h.map(|z| z.conj());
            let norm = v.norm();
            if norm > 0.0 {
                v / C64::from(norm)
            } else {
                CVec::from_element(n, C64::from(1.0 / (n as f64).sqrt()))
            }
        })
        .collect();
    let k = dirs.len();
    let p_total = cfg.p_bs_watt;
    let cascade = &ch.g_s * CMat::from_diagonal(&phi) * &ch.g_t;
    let echo_of = |d: &CVec| (&cascade * d).norm_squared();
    let user_echo: f64 = dirs.iter().map(echo_of).sum::<f64>();

    let b9: Vec<f64> = ch
        .g_au
        .iter()
        .map(|g| cfg.gamma_tar_linear * g.norm_squared())
        .collect();
    let floor = cfg.gamma_tar_linear * cfg.noise_irs_watt;
    // Every beam keeps some power: a zero beam is a fixed point of the
    // WMMSE updates and would never be revived.
    let keep = 1e-3;
    let equal = p_total / (k + 1) as f64;
    let echo_at = |p0: f64| {
        let rest = if k == 0 { 0.0 } else { (p_total - p0) / k as f64 };
        p0 * lmax + rest * user_echo
    };
    let p0_max = if k == 0 { p_total } else { p_total * (1.0 - keep) };
    if echo_at(p0_max).max(echo_at(equal)) <= floor {
        return Ok(None);
    }
    // Twice the noise floor leaves room for uplink power; shift only as
    // much power to the sensing beam as that needs.
    let target = (2.0 * floor).min(0.5 * (floor + echo_at(p0_max)));
    let p0 = if k == 0 || echo_at(equal) >= target {
        equal.max(if k == 0 { p_total } else { 0.0 })
    } else {
        let per_user = user_echo / k as f64;
        ((target - p_total * per_user) / (lmax - per_user)).clamp(equal, p0_max)
    };
    let user_power = if k == 0 { 0.0 } else { (p_total - p0) / k as f64 };
    let mut w = vec![w0_dir * C64::from(p0.sqrt())];
    w.extend(dirs.into_iter().map(|d| d * C64::from(user_power.sqrt())));

    let mut sol = Solution {
        w,
        u: vec![CVec::zeros(cfg.n_rx); model.l()],
        phi,
        f: vec![0.0; model.l()],
        p: vec![0.0; model.l()],
        e,
    };
    let c8 = radar_echo(ch, &sol) - floor;
    if c8 <= 0.0 {
        return Ok(None);
    }
    let b9_sum: f64 = b9.iter().sum();
    let p_bar = if b9_sum > 0.0 { c8 / b9_sum } else { f64::INFINITY };
    for l in 0..model.l() {
        let t = cfg.coherence_time_s;
        sol.p[l] = (cfg.e_max(l) / (2.0 * t)).min(p_bar);
        sol.f[l] = ((cfg.e_max(l) - t * sol.p[l]).max(0.0) / (t * cfg.zeta)).cbrt();
    }
    sol.u = lmmse_combiners(model, &sol)?;
    for (u, g) in sol.u.iter_mut().zip(&comp.g) {
        if u.norm() == 0.0 {
            *u = g.clone();
        }
    }
    Ok(Some(sol))
}

/// IRS phases co-phasing the strongest CM-UE's cascaded channel for the
/// dominant transmit direction of the BS–IRS link.
pub fn fixed_phases(ch: &ChannelSet) -> CVec {
    let m = ch.m();
    let Some(k_star) = (0..ch.h_pu.len()).max_by(|&a, &b| {
        let gain = |k: usize| (CMat::from_diagonal(&ch.h_pu[k].map(|z| z.conj())) * &ch.g_t).norm();
        gain(a).total_cmp(&gain(b))
    }) else {
        return CVec::from_element(m, C64::from(1.0));
    };
    let (_, w_mrt) = principal_eig(&(ch.g_t.adjoint() * &ch.g_t));
    let gw = &ch.g_t * w_mrt;
    CVec::from_fn(m, |i, _| {
        let z = ch.h_pu[k_star][i].conj() * gw[i];
        C64::from_polar(1.0, -z.arg())
    })
}

fn trace_row(
    model: &Model,
    sol: &Solution,
    iter: usize,
    surrogate: f64,
    flags: (bool, bool),
) -> Result<(IterationTrace, Metrics, Residuals)> {
    let metrics = utility(model, sol)?;
    let res = Residuals::evaluate(model, sol);
    let row = IterationTrace {
        iter,
        surrogate,
        objective: normalized_objective(model, sol)?,
        utility_bits: metrics.utility,
        sum_bits: metrics.sum_bits(),
        res_power: res.power,
        res_radar: res.radar,
        res_unit_modulus: res.unit_modulus,
        res_energy: res.energy,
        res_cache: res.cache,
        phase_updated: flags.0,
        beams_updated: flags.1,
    };
    Ok((row, metrics, res))
}

/// Runs one scheme on one channel draw.
pub fn run(cfg: &SystemConfig, ch: &ChannelSet, opts: &RunOptions) -> Result<RunResult> {
    cfg.validate()?;
    ch.check_dims(cfg)?;
    let start = Instant::now();
    let scheme = opts.scheme;
    let model = Model::new(cfg, ch).with_duplex(scheme.duplex());
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);

    let cache = match scheme {
        Scheme::RandomCaching => random_caching(&cfg.cache, &mut rng),
        Scheme::NoCaching => no_caching(&cfg.cache),
        _ => solve_caching(&cfg.cache),
    };
    let phi = if scheme == Scheme::FixedPhase || opts.phase_init == PhaseInit::Aligned {
        fixed_phases(ch)
    } else {
        random_phases(&mut rng, ch.m())
    };
    let full_offload = scheme == Scheme::FullOffloading;

    let Some(mut sol) = initialize(&model, phi.clone(), cache.e.clone())? else {
        // Report the equal-split point so callers still see the shortfall.
        let k = cfg.n_cm;
        let share = (cfg.p_bs_watt / (k + 1) as f64).sqrt();
        let (_, dir) = sensing_direction(ch, &phi);
        let sol = Solution {
            w: vec![dir * C64::from(share); k + 1],
            u: vec![CVec::zeros(cfg.n_rx); cfg.n_cp],
            phi,
            f: vec![0.0; cfg.n_cp],
            p: vec![0.0; cfg.n_cp],
            e: cache.e,
        };
        let (row, metrics, residuals) = trace_row(&model, &sol, 0, f64::NAN, (false, false))?;
        return Ok(RunResult {
            scheme,
            status: RunStatus::InfeasibleSensing,
            iterations: 0,
            solution: sol,
            metrics,
            residuals,
            trace: vec![row],
            wall_ms: vec![start.elapsed().as_secs_f64() * 1e3],
        });
    };
    if full_offload {
        // All energy goes to the uplink; no local computing.
        sol.f.iter_mut().for_each(|f| *f = 0.0);
    }

    let initial = normalized_objective(&model, &sol)?;
    let (row, mut metrics, mut residuals) = trace_row(&model, &sol, 0, initial, (false, false))?;
    let mut trace = vec![row];
    let mut wall_ms = vec![start.elapsed().as_secs_f64() * 1e3];
    let mut status = RunStatus::MaxIter;
    let mut prev = initial;
    let mut stalled = 0;

    if cfg.n_cm == 0 && cfg.n_cp == 0 {
        status = RunStatus::Converged;
    }
    let mut iter = 0;
    while status == RunStatus::MaxIter && iter < opts.max_iter {
        iter += 1;
        let comp = composite_channels(ch, &sol.phi)?;
        let aux = update_aux_with(&model, &sol, &comp);

        let mut phase_updated = false;
        if scheme != Scheme::FixedPhase {
            // The starting penalty decays once per outer iteration.
            let admm = AdmmOptions {
                rho0: (opts.admm.rho0 * opts.admm.shrink.powi(iter as i32 - 1)).max(opts.admm.rho_floor),
                ..opts.admm
            };
            let out = optimize_phase(&model, &sol, &aux, &admm)?;
            phase_updated = out.improved;
            sol.phi = out.phi;
        }
        let comp = composite_channels(ch, &sol.phi)?;

        let mut beams_updated = false;
        match optimize_tx(&model, &sol, &comp, &aux, opts.n_draws, &mut rng) {
            Ok(out) => {
                beams_updated = out.improved;
                sol.w = out.w;
            }
            Err(Error::Infeasible(_)) => {}
            Err(e) => return Err(e),
        }

        let rx = assemble_rx_coeffs(&model, &sol, &comp, &aux);
        sol.u = solve_rx(&rx, &sol.u);

        let mut pc = assemble_power_coeffs(&model, &sol, &comp, &aux);
        if full_offload {
            pc.kappa.iter_mut().for_each(|k| *k = 0.0);
        }
        match optimize_power(&pc, &sol.p, &sol.f) {
            Ok(ps) => {
                sol.p = ps.p;
                sol.f = if full_offload { vec![0.0; ps.f.len()] } else { ps.f };
            }
            Err(Error::Infeasible(_)) => {}
            Err(e) => return Err(e),
        }

        let surrogate = surrogate_objective_with(&model, &sol, &comp, &aux);
        let (row, m, r) = trace_row(&model, &sol, iter, surrogate, (phase_updated, beams_updated))?;
        trace.push(row);
        wall_ms.push(start.elapsed().as_secs_f64() * 1e3);
        metrics = m;
        residuals = r;

        let gain = (surrogate - prev) / prev.abs().max(1e-12);
        prev = surrogate;
        stalled = if gain < opts.tol { stalled + 1 } else { 0 };
        if stalled >= opts.patience {
            status = RunStatus::Converged;
        }
    }

    Ok(RunResult {
        scheme,
        status,
        iterations: iter,
        solution: sol,
        metrics,
        residuals,
        trace,
        wall_ms,
    })
}

/// Same as [`run`] with the scheme overridden.
pub fn evaluate_baseline(cfg: &SystemConfig, ch: &ChannelSet, scheme: Scheme, opts: &RunOptions) -> Result<RunResult> {
    run(cfg, ch, &RunOptions { scheme, ..*opts })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::draw_seeded;
    use crate::sysmodel::backhaul_cost;

    fn desk() -> SystemConfig {
        SystemConfig::default()
    }

    fn quick() -> RunOptions {
        RunOptions {
            max_iter: 8,
            ..RunOptions::default()
        }
    }

    #[test]
    fn scheme_names_round_trip() {
        for s in Scheme::ALL {
            assert_eq!(s.name().parse::<Scheme>().unwrap(), s);
        }
        assert!(matches!("bogus".parse::<Scheme>(), Err(Error::UnknownScheme(_))));
    }

    #[test]
    fn initial_point_is_feasible() {
        let cfg = desk();
        for seed in 0..20 {
            let ch = draw_seeded(&cfg, seed).unwrap();
            let model = Model::new(&cfg, &ch);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let phi = random_phases(&mut rng, cfg.m_passive);
            let sol = initialize(&model, phi, solve_caching(&cfg.cache).e).unwrap().unwrap();
            let r = Residuals::evaluate(&model, &sol);
            assert!(r.power <= 1e-9, "{r:?}");
            assert!(r.radar <= 1e-6, "{r:?}");
            assert!(r.energy <= 1e-9 && r.unit_modulus <= 1e-12 && r.cache <= 0.0, "{r:?}");
            assert!(sol.p.iter().all(|&p| p > 0.0));
        }
    }

    #[test]
    fn zero_threshold_always_initializes() {
        let cfg = SystemConfig {
            gamma_tar_linear: 1e-30,
            ..desk()
        };
        let ch = draw_seeded(&cfg, 2).unwrap();
        let model = Model::new(&cfg, &ch);
        let phi = CVec::from_element(cfg.m_passive, C64::from(1.0));
        assert!(initialize(&model, phi, vec![0.0; cfg.cache.n_files]).unwrap().is_some());
    }

    #[test]
    fn unreachable_radar_target_is_reported() {
        let cfg = SystemConfig {
            gamma_tar_linear: 1e12,
            ..desk()
        };
        let ch = draw_seeded(&cfg, 2).unwrap();
        let r = run(&cfg, &ch, &quick()).unwrap();
        assert_eq!(r.status, RunStatus::InfeasibleSensing);
    }

    #[test]
    fn run_is_monotone_feasible_and_deterministic() {
        let cfg = desk();
        let ch = draw_seeded(&cfg, 3).unwrap();
        let a = run(&cfg, &ch, &quick()).unwrap();
        let b = run(&cfg, &ch, &quick()).unwrap();
        assert_eq!(a.trace, b.trace);
        assert_eq!(a.solution, b.solution);
        for pair in a.trace[1..].windows(2) {
            let (x, y) = (pair[0].surrogate, pair[1].surrogate);
            assert!(y >= x - 1e-8 * x.abs(), "{x} -> {y}");
        }
        assert!(a.trace[1].surrogate >= a.trace[0].objective - 1e-8 * a.trace[0].objective.abs());
        let r = a.residuals;
        assert!(
            r.power <= 1e-9 && r.radar <= 1e-6 && r.unit_modulus <= 1e-4 && r.energy <= 1e-9,
            "{r:?}"
        );
    }

    #[test]
    fn empty_system_returns_immediately() {
        let cfg = SystemConfig {
            n_cm: 0,
            n_cp: 0,
            ..desk()
        };
        let ch = draw_seeded(&cfg, 4).unwrap();
        let r = run(&cfg, &ch, &quick()).unwrap();
        assert_eq!(r.status, RunStatus::Converged);
        assert_eq!(r.iterations, 0);
        assert_eq!(r.metrics.sum_bits(), 0.0);
        assert_eq!(r.solution.w.len(), 1);
    }

    #[test]
    fn baselines_freeze_their_block() {
        let cfg = desk();
        let ch = draw_seeded(&cfg, 5).unwrap();
        let fixed = evaluate_baseline(&cfg, &ch, Scheme::FixedPhase, &quick()).unwrap();
        assert!(fixed.trace.iter().all(|r| !r.phase_updated));
        assert_eq!(fixed.solution.phi, fixed_phases(&ch));

        let none = evaluate_baseline(&cfg, &ch, Scheme::NoCaching, &quick()).unwrap();
        let expect = backhaul_cost(
            &vec![0.0; cfg.cache.n_files],
            &cfg.cache,
            cfg.coherence_time_s,
            cfg.n_cp,
        );
        assert!((none.metrics.d_total - expect).abs() <= 1e-9 * expect);

        let full = evaluate_baseline(&cfg, &ch, Scheme::FullOffloading, &quick()).unwrap();
        assert!(full.solution.f.iter().all(|&f| f == 0.0));

        let hd = evaluate_baseline(&cfg, &ch, Scheme::Hd, &quick()).unwrap();
        assert!(hd.residuals.radar <= 1e-6);
    }

    #[test]
    fn result_serializes() {
        let cfg = desk();
        let ch = draw_seeded(&cfg, 6).unwrap();
        let r = run(&cfg, &ch, &RunOptions { max_iter: 2, ..quick() }).unwrap();
        let back: RunResult = serde_json::from_str(&r.to_json().unwrap()).unwrap();
        assert_eq!(back, r);
        let mut buf = Vec::new();
        r.write_trace_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), r.trace.len() + 1);
        assert!(text.starts_with("iter,surrogate,objective,"));
    }
}
