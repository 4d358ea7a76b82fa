//! The `homoglab` command line: every subcommand reads a JSON study
//! config, runs it, and writes CSV/JSON outputs under `--out`.
//!
//! Exit codes: 0 success, 1 validation/configuration error,
//! 2 numerical failure. `HOMOGLAB_THREADS` caps the worker pool
//! (0 or unset = automatic).

use crate::error::{Error, Result};
use crate::studies::{
    config_hash, run_convergence_1d, run_convergence_2d, run_dump_field, run_energy_convergence,
    run_ergodic_demo, run_homogenize, run_solve1d, run_solve2d, Converge1dConfig, Converge2dConfig,
    DumpFieldConfig, EnergyConvConfig, ErgodicConfig, HomogenizeConfig, Solve1dConfig,
    Solve2dConfig, StudyOutput,
};
use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(
    name = "homoglab",
    version,
    about = "Numerical laboratory for stochastic homogenization of elliptic PDEs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Path to the JSON study configuration.
    #[arg(long)]
    config: PathBuf,
    /// Override the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for reports.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Suppress progress output.
    #[arg(long)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Rasterize a coefficient field realization to CSV.
    #[command(name = "dump-field")]
    DumpField(CommonArgs),
    /// Solve one ε-scaled 1D problem and dump x,u,sigma.
    #[command(name = "solve1d")]
    Solve1d(CommonArgs),
    /// Solve one ε-scaled 2D problem and dump solution and flux.
    #[command(name = "solve2d")]
    Solve2d(CommonArgs),
    /// Estimate the effective tensor by ensemble periodization.
    #[command(name = "homogenize")]
    Homogenize(CommonArgs),
    /// 1D ε-sweep of solution and flux errors vs the homogenized limit.
    #[command(name = "converge-1d")]
    Converge1d(CommonArgs),
    /// 2D ε-sweep vs the constant-A⁰ reference on one realization.
    #[command(name = "converge-2d")]
    Converge2d(CommonArgs),
    /// Weighted energy-density convergence (div–curl demonstration).
    #[command(name = "energy-conv")]
    EnergyConv(CommonArgs),
    /// Cat-map orbit dumps with discrepancy/period diagnostics.
    #[command(name = "ergodic-orbit")]
    ErgodicOrbit(CommonArgs),
}

/// Entry point used by the binary and by tests; returns the process
/// exit code.
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    init_worker_pool();
    let outcome = match &cli.command {
        Command::DumpField(a) => execute(a, set_seed_dump, run_dump_field),
        Command::Solve1d(a) => execute(a, set_seed_solve1d, run_solve1d),
        Command::Solve2d(a) => execute(a, set_seed_solve2d, run_solve2d),
        Command::Homogenize(a) => execute(a, set_seed_homogenize, run_homogenize),
        Command::Converge1d(a) => execute(a, set_seed_conv1d, run_convergence_1d),
        Command::Converge2d(a) => execute(a, set_seed_conv2d, run_convergence_2d),
        Command::EnergyConv(a) => execute(a, set_seed_energy, run_energy_convergence),
        Command::ErgodicOrbit(a) => execute(a, |_: &mut ErgodicConfig, _| {}, run_ergodic_demo),
    };
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidSpec(_) | Error::Config(_) | Error::Io(_) => 1,
        Error::CoefficientOutOfRange { .. }
        | Error::NotConverged { .. }
        | Error::QuorumNotMet { .. } => 2,
    }
}

fn set_seed_dump(c: &mut DumpFieldConfig, s: u64) {
    c.seed = s;
}
fn set_seed_solve1d(c: &mut Solve1dConfig, s: u64) {
    c.seed = s;
}
fn set_seed_solve2d(c: &mut Solve2dConfig, s: u64) {
    c.seed = s;
}
fn set_seed_homogenize(c: &mut HomogenizeConfig, s: u64) {
    c.seed = s;
}
fn set_seed_conv1d(c: &mut Converge1dConfig, s: u64) {
    c.seed = s;
}
fn set_seed_conv2d(c: &mut Converge2dConfig, s: u64) {
    c.seed = s;
}
fn set_seed_energy(c: &mut EnergyConvConfig, s: u64) {
    c.seed = s;
}

fn execute<C, S, R>(args: &CommonArgs, set_seed: S, run: R) -> Result<()>
where
    C: DeserializeOwned + Serialize,
    S: Fn(&mut C, u64),
    R: Fn(&C) -> Result<StudyOutput>,
{
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| Error::Config(format!("cannot read config {}: {e}", args.config.display())))?;
    let mut config: C = serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("{}: {e}", args.config.display())))?;
    if let Some(seed) = args.seed {
        set_seed(&mut config, seed);
    }
    // Hash the effective config (after the seed override) so the
    // header identifies exactly what ran.
    let canonical = serde_json::to_string(&config)
        .map_err(|e| Error::Config(format!("cannot canonicalize config: {e}")))?;
    let hash = config_hash(&canonical);

    let output = run(&config)?;
    write_output(&args.out, output, &hash, args.quiet)
}

fn write_output(out_dir: &Path, output: StudyOutput, hash: &str, quiet: bool) -> Result<()> {
    std::fs::create_dir_all(out_dir)?;
    for (name, mut report) in output.reports {
        report
            .provenance
            .insert(1, ("config_hash".into(), hash.to_string()));
        let path = out_dir.join(&name);
        report.write_to(&path)?;
        if !quiet {
            println!("wrote {}", path.display());
        }
    }
    if let Some(summary) = output.summary {
        let path = out_dir.join("summary.json");
        let mut value = summary;
        if let Some(map) = value.as_object_mut() {
            map.insert(
                "config_hash".into(),
                serde_json::Value::String(hash.to_string()),
            );
        }
        let text = serde_json::to_string_pretty(&value)
            .map_err(|e| Error::Config(format!("cannot serialize summary: {e}")))?;
        std::fs::write(&path, text + "\n")?;
        if !quiet {
            println!("wrote {}", path.display());
        }
    }
    for (name, bytes) in output.blobs {
        let path = out_dir.join(&name);
        std::fs::write(&path, bytes)?;
        if !quiet {
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn init_worker_pool() {
    if let Ok(v) = std::env::var("HOMOGLAB_THREADS") {
        if let Ok(n) = v.trim().parse::<usize>() {
            if n > 0 {
                // Ignore the error if a pool already exists.
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global();
            }
        }
    }
}
