use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use iscc_core::cacheopt::solve_caching;
use iscc_core::channels::draw_seeded;
use iscc_core::harness::{aggregate, run_sweep, write_aggregate_csv, write_csv_file, SweepSpec};
use iscc_core::orchestrator::{run, RunOptions, RunResult, RunStatus, Scheme};
use iscc_core::{Error, SystemConfig};

const EXIT_INFEASIBLE: u8 = 1;
const EXIT_USAGE: u8 = 2;

#[derive(Parser)]
#[command(
    name = "iscc",
    version,
    about = "Resource allocation for IRS-assisted full-duplex ISCC systems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimize one scenario, print its metrics and write result.json + trace.csv.
    Run(RunArgs),
    /// Run a parameter sweep described by a TOML file.
    Sweep(SweepArgs),
    /// Run a quick invariant suite on the built-in configuration.
    Selftest,
}

#[derive(Args)]
struct Common {
    /// Config file, or `default` / `paper` for the built-in ones.
    #[arg(long, default_value = "default")]
    config: PathBuf,
    /// Overrides the config seed (channels and optimizer).
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    max_iter: Option<usize>,
    /// Use the full-size surface (50 reflecting, 10 sensing elements).
    #[arg(long)]
    paper_scale: bool,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value = "proposed")]
    scheme: Scheme,
}

#[derive(Args)]
struct SweepArgs {
    /// Sweep description (parameter, values, schemes, n_seeds, output).
    spec: PathBuf,
    #[command(flatten)]
    common: Common,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Selftest => cmd_selftest(),
    };
    match outcome {
        Ok(code) => code,
        // Output piped into a reader that stopped early.
        Err(Error::Io(e)) if e.kind() == std::io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config { .. } | Error::Parse(_) | Error::UnknownScheme(_) => ExitCode::from(EXIT_USAGE),
                _ => ExitCode::from(EXIT_INFEASIBLE),
            }
        }
    }
}

fn load_config(c: &Common) -> iscc_core::Result<(SystemConfig, RunOptions)> {
    let mut cfg = SystemConfig::load(&c.config)?;
    if c.paper_scale {
        let full = SystemConfig::paper_scale();
        cfg.m_passive = full.m_passive;
        cfg.m_active = full.m_active;
    }
    if let Some(seed) = c.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    let mut opts = RunOptions {
        seed: cfg.seed,
        ..RunOptions::default()
    };
    if let Some(n) = c.max_iter {
        opts.max_iter = n;
    }
    Ok((cfg, opts))
}

fn cmd_run(a: RunArgs) -> iscc_core::Result<ExitCode> {
    let (cfg, opts) = load_config(&a.common)?;
    let ch = draw_seeded(&cfg, cfg.seed)?;
    let r = run(
        &cfg,
        &ch,
        &RunOptions {
            scheme: a.scheme,
            ..opts
        },
    )?;
    r.save(&a.common.out)?;
    writeln!(std::io::stdout(), "{}", serde_json::to_string_pretty(&summary(&r))?)?;
    if r.status == RunStatus::InfeasibleSensing {
        eprintln!("radar SINR threshold cannot be met at full power");
        return Ok(ExitCode::from(EXIT_INFEASIBLE));
    }
    Ok(ExitCode::SUCCESS)
}

fn summary(r: &RunResult) -> serde_json::Value {
    serde_json::json!({
        "scheme": r.scheme,
        "status": r.status,
        "iterations": r.iterations,
        "utility": r.metrics.utility,
        "sum_bits": r.metrics.sum_bits(),
        "metrics": r.metrics,
        "residuals": r.residuals,
    })
}

fn cmd_sweep(a: SweepArgs) -> iscc_core::Result<ExitCode> {
    let (cfg, opts) = load_config(&a.common)?;
    let spec = SweepSpec::load(&a.spec)?;
    let rows = run_sweep(&cfg, &spec, &opts)?;
    let path = match &spec.output {
        Some(p) if p.is_absolute() => p.clone(),
        Some(p) => a.common.out.join(p),
        None => a.common.out.join("sweep.csv"),
    };
    write_csv_file(&rows, &path)?;
    let aggs = aggregate(&rows)?;
    let summary_path = path.with_extension("summary.csv");
    write_aggregate_csv(&aggs, std::fs::File::create(&summary_path)?)?;
    write_aggregate_csv(&aggs, std::io::stdout())?;
    eprintln!("{} rows -> {}", rows.len(), path.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_selftest() -> iscc_core::Result<ExitCode> {
    let cfg = SystemConfig {
        n_tx: 2,
        n_rx: 2,
        m_passive: 6,
        m_active: 4,
        ..SystemConfig::default()
    };
    let mut failures = 0;
    let mut check = |name: &str, ok: bool| {
        let _ = writeln!(std::io::stdout(), "{} {name}", if ok { "PASS" } else { "FAIL" });
        if !ok {
            failures += 1;
        }
    };

    let cache = solve_caching(&SystemConfig::default().cache);
    let top10 = cache
        .e
        .iter()
        .enumerate()
        .all(|(v, &e)| e == if v < 10 { 1.0 } else { 0.0 });
    check("default cache holds the ten most popular files", top10);

    for seed in 0..3 {
        let ch = draw_seeded(&cfg, seed)?;
        let opts = RunOptions {
            seed,
            max_iter: 20,
            ..RunOptions::default()
        };
        let r = run(&cfg, &ch, &opts)?;
        let monotone = r
            .trace
            .windows(2)
            .skip(1)
            .all(|p| p[1].surrogate >= p[0].surrogate - 1e-8 * p[0].surrogate.abs().max(1.0));
        check(&format!("seed {seed}: surrogate trace nondecreasing"), monotone);
        let res = &r.residuals;
        check(
            &format!("seed {seed}: solution feasible"),
            res.power <= 1e-9
                && res.radar <= 1e-6
                && res.unit_modulus <= 1e-4
                && res.energy <= 1e-9
                && res.cache <= 1e-12,
        );
        let again = run(&cfg, &ch, &opts)?;
        check(&format!("seed {seed}: deterministic"), again.trace == r.trace);
    }
    Ok(if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_INFEASIBLE)
    })
}
