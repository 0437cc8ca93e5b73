use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use polydiff_core::config::RunConfig;
use polydiff_core::experiments::{self, Outcome};
use polydiff_core::Error;

/// Viscoelastic polymer diffusion: simulation and long-time diagnostics.
#[derive(Parser)]
#[command(name = "polydiff", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// One trajectory, energy series and final snapshots.
    Simulate(Common),
    /// Calibrate the absorbing level and validate the dissipation estimate.
    Dissipation(Common),
    /// Attraction of an ensemble towards its late-time tails.
    Attract(Common),
    /// Manufactured-solution convergence tables.
    Mms(Common),
    /// Identity and oracle suite.
    Verify(Common),
}

#[derive(Args)]
struct Common {
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output.directory`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for random ensembles; overrides `diagnostics.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long, env = "POLYDIFF_THREADS")]
    threads: Option<usize>,
}

const FAILED_CHECK: u8 = 2;
const USAGE: u8 = 1;

fn write_outputs(dir: &Path, resolved_toml: &str, outcome: &Outcome) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("config.resolved.toml"), resolved_toml)?;
    fs::write(dir.join("report.txt"), &outcome.report)?;
    for a in &outcome.artifacts {
        fs::write(dir.join(&a.name), &a.bytes)?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<bool, (u8, String)> {
    let (name, common, exp): (&str, Common, fn(&_) -> _) = match cli.command {
        Command::Simulate(c) => ("simulate", c, experiments::simulate),
        Command::Dissipation(c) => ("dissipation", c, experiments::dissipation),
        Command::Attract(c) => ("attract", c, experiments::attract),
        Command::Mms(c) => ("mms", c, experiments::mms),
        Command::Verify(c) => ("verify", c, experiments::verify),
    };
    let usage = |e: Error| (USAGE, format!("{}: {e}", common.config.display()));
    let mut cfg = RunConfig::from_path(&common.config).map_err(usage)?;
    if let Some(seed) = common.seed {
        cfg.diagnostics.seed = seed;
    }
    if let Some(out) = &common.out {
        cfg.output.directory = out.to_string_lossy().into_owned();
    }
    let resolved = cfg.resolve().map_err(usage)?;
    match common.threads {
        Some(0) => return Err((USAGE, "--threads must be at least 1".into())),
        Some(n) => {
            polydiff_core::set_threads(n);
        }
        None => {}
    }
    let resolved_toml = resolved.to_toml().map_err(usage)?;
    let outcome = exp(&resolved).map_err(|e| (FAILED_CHECK, format!("{name} failed: {e}")))?;
    let dir = PathBuf::from(&resolved.source.output.directory);
    write_outputs(&dir, &resolved_toml, &outcome)
        .map_err(|e| (USAGE, format!("cannot write to {}: {e}", dir.display())))?;
    print!("{}", outcome.report);
    Ok(outcome.passed)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(FAILED_CHECK),
        Err((code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
