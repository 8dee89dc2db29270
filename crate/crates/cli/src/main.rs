use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dkcf_core::config::ExperimentConfig;
use dkcf_core::consensus::ConsensusMode;
use dkcf_core::evaluation::{compare, render_deltas, render_table};
use dkcf_core::experiment::{load_report, run_to_dir, sweep, SweepPoint};
use dkcf_core::Error;

#[derive(Parser)]
#[command(name = "dkcf", version, about = "Multi-robot tracking with distributed Kalman-consensus fusion")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Overrides {
    /// Overrides world.rng_seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides output_dir.
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Overrides consensus.mode.
    #[arg(long, value_parser = clap::value_parser!(ConsensusMode))]
    mode: Option<ConsensusMode>,
}

#[derive(Subcommand)]
enum Command {
    /// Run a single simulation.
    Run {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run the configured mode x latency x drift x seed grid.
    Sweep {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Print per-cell mean differences (b - a) between two reports.
    Compare { report_a: PathBuf, report_b: PathBuf },
    /// Check a configuration and list every problem found.
    Validate { config: PathBuf },
}

fn load(path: &Path, o: &Overrides) -> Result<ExperimentConfig, Error> {
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(seed) = o.seed {
        cfg.world.rng_seed = seed;
        if let Some(s) = &mut cfg.sweep {
            s.seeds = vec![seed];
        }
    }
    if let Some(mode) = o.mode {
        cfg.consensus.mode = mode;
        if let Some(s) = &mut cfg.sweep {
            s.modes = vec![mode];
        }
    }
    if let Some(dir) = &o.output_dir {
        cfg.output_dir = dir.clone();
    }
    Ok(cfg)
}

fn execute(cmd: Command) -> Result<(), Error> {
    match cmd {
        Command::Run { config, overrides } => {
            let cfg = load(&config, &overrides)?;
            let mut single = cfg.clone();
            single.sweep = None;
            let point = SweepPoint { mode: cfg.consensus.mode, latency: None, drift_scale: 1.0, seed: cfg.world.rng_seed };
            let name = point.name(&cfg);
            let report = run_to_dir(&single, &cfg.output_dir, &name, 1.0)?;
            print!("{}", render_table(&report));
            println!("wrote {}", cfg.output_dir.display());
        }
        Command::Sweep { config, overrides } => {
            let cfg = load(&config, &overrides)?;
            if cfg.sweep.is_none() {
                return Err(Error::Validation(vec!["sweep: section required for the sweep command".into()]));
            }
            let report = sweep(&cfg, Some(&cfg.output_dir))?;
            print!("{}", render_table(&report));
            println!("wrote {} runs under {}", report.runs.len(), cfg.output_dir.display());
        }
        Command::Compare { report_a, report_b } => {
            let rows = compare(&load_report(&report_a)?, &load_report(&report_b)?)?;
            print!("{}", render_deltas(&rows));
        }
        Command::Validate { config } => {
            ExperimentConfig::load(&config)?;
            println!("{}: ok", config.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Validation(_) | Error::Parse { .. } => ExitCode::from(1),
                _ => ExitCode::from(2),
            }
        }
    }
}
