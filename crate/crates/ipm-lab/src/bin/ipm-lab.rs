//! Command-line entry point.
//!
//! ```text
//! ipm-lab <simulate|ipm|compare|counterexample|sweep> --config <path>
//!         [--out <dir>] [--jobs <int>] [--seed-override <u64>]
//! ```
//!
//! Exit codes: 0 success, 2 config error, 3 numerical error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ipm_lab::config::{parse_config, ExperimentKind};
use ipm_lab::error::Error;
use ipm_lab::runner::{run_experiment, RunOptions};

#[derive(Parser)]
#[command(
    name = "ipm-lab",
    version,
    about = "Finite-population evolutionary dynamics vs. infinite-population predictions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides the config's `output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for replicate-level parallelism (default: all cores).
    /// Results are independent of this value.
    #[arg(long)]
    jobs: Option<usize>,
    /// Replace the config's master seed for this run.
    #[arg(long)]
    seed_override: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Finite-EA trajectories.
    Simulate(CommonArgs),
    /// Infinite-population trajectory (grid or particles).
    Ipm(CommonArgs),
    /// One (generation, population-size) distance report.
    Compare(CommonArgs),
    /// Dependence and transition-gap demonstrations.
    Counterexample(CommonArgs),
    /// Full distance-versus-population-size curve.
    Sweep(CommonArgs),
}

impl Command {
    fn kind(&self) -> ExperimentKind {
        match self {
            Command::Simulate(_) => ExperimentKind::Simulate,
            Command::Ipm(_) => ExperimentKind::Ipm,
            Command::Compare(_) => ExperimentKind::Compare,
            Command::Counterexample(_) => ExperimentKind::Counterexample,
            Command::Sweep(_) => ExperimentKind::Sweep,
        }
    }

    fn args(&self) -> &CommonArgs {
        match self {
            Command::Simulate(a)
            | Command::Ipm(a)
            | Command::Compare(a)
            | Command::Counterexample(a)
            | Command::Sweep(a) => a,
        }
    }
}

fn run(cli: &Cli) -> Result<(), Error> {
    let args = cli.command.args();
    let config = parse_config(&args.config)?;
    if config.kind() != cli.command.kind() {
        return Err(Error::config(
            "kind",
            format!(
                "config file declares kind `{}` but the `{}` subcommand was invoked",
                config.kind().name(),
                cli.command.kind().name()
            ),
        ));
    }
    let manifest = run_experiment(
        &config,
        &RunOptions {
            out_dir: args.out.clone(),
            jobs: args.jobs,
            seed_override: args.seed_override,
        },
    )?;
    println!(
        "{} run complete (seed {}, config {})",
        manifest.kind,
        manifest.seed,
        &manifest.config_hash[..12]
    );
    for file in &manifest.files {
        println!("  {}: {} rows", file.path, file.rows);
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
