use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use kinetic_tc::error::{Error, Result};
use kinetic_tc::harness::{
    emit_outputs, error_record, parse_config, parse_paths_config, run_experiment, selftest,
    ExperimentConfig, Mode, Oracle, ERROR_FILE,
};
use kinetic_tc::path::generate;

/// Environment variable holding the worker thread count.
const THREADS_VAR: &str = "TCSIM_THREADS";

#[derive(Parser)]
#[command(
    name = "tcsim",
    version,
    about = "Transport-collapse simulations driven by rough paths"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the seed of random paths.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Single simulation at the finest configured time step.
    Run(Common),
    /// Self-convergence study against the reference time step.
    Converge(Common),
    /// Scheme against an oracle over the configured time steps.
    Compare {
        #[command(flatten)]
        common: Common,
        /// riemann, godunov, bgk or timechange
        #[arg(long)]
        oracle: Oracle,
    },
    /// Invariant checks of every module.
    Selftest,
    /// Generates a driver path and writes it as CSV.
    Paths {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })
}

fn load(common: &Common) -> Result<(ExperimentConfig, PathBuf)> {
    let mut cfg = parse_config(&read(&common.config)?)?;
    if let Some(seed) = common.seed {
        cfg.seed = Some(seed);
    }
    if let Some(out) = &common.out {
        cfg.output_dir = out.display().to_string();
    }
    let dir = PathBuf::from(&cfg.output_dir);
    Ok((cfg, dir))
}

fn experiment(common: &Common, mode: Mode) -> Result<()> {
    let (cfg, dir) = load(common)?;
    let report = run_experiment(&cfg, mode).inspect_err(|e| {
        // best effort: the record also goes to stderr
        if fs::create_dir_all(&dir).is_ok() {
            let _ = fs::write(dir.join(ERROR_FILE), error_record(e));
        }
    })?;
    for path in emit_outputs(&report, &cfg, &dir)? {
        println!("{}", path.display());
    }
    if let Some(rows) = &report.table {
        for r in rows {
            log::info!(
                "dt = {:e}, delta_z = {:e}, l1 = {:e}",
                r.dt,
                r.delta_z,
                r.l1_error
            );
        }
    }
    Ok(())
}

fn paths(spec: &Path, out: &Path) -> Result<()> {
    let cfg = parse_paths_config(&read(spec)?)?;
    let z = generate(&cfg.path, cfg.t_final, cfg.n_samples)?;
    z.write_csv(fs::File::create(out)?)?;
    println!("{}", out.display());
    Ok(())
}

fn run_selftest() -> Result<bool> {
    let results = selftest()?;
    let mut ok = true;
    for r in &results {
        let tag = if r.passed { "PASS" } else { "FAIL" };
        println!("{tag} {}: {}", r.name, r.detail);
        ok &= r.passed;
    }
    Ok(ok)
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var(THREADS_VAR) {
        let n: usize = v.trim().parse().map_err(|_| Error::InvalidParameter {
            name: THREADS_VAR.into(),
            reason: format!("expected a positive integer, got {v:?}"),
        })?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidParameter {
                name: THREADS_VAR.into(),
                reason: e.to_string(),
            })?;
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<bool> {
    configure_threads()?;
    match cli.command {
        Command::Run(c) => experiment(&c, Mode::Run)?,
        Command::Converge(c) => experiment(&c, Mode::Converge)?,
        Command::Compare { common, oracle } => experiment(&common, Mode::Compare(oracle))?,
        Command::Selftest => return run_selftest(),
        Command::Paths { spec, out } => paths(&spec, &out)?,
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match dispatch(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("{}", error_record(&e));
            ExitCode::FAILURE
        }
    }
}
