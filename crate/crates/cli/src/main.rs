use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use evfl_core::experiment::{self, ExperimentManifest};
use evfl_core::federation::Strategy;
use evfl_core::{Error, ErrorClass};

/// Federated battery-model experiments on EV fleet trip data.
///
/// Log verbosity is read from `EVFL_LOG` (e.g. `EVFL_LOG=debug`).
#[derive(Debug, Parser)]
#[command(name = "evfl", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic fleet (one CSV per member plus ground truth).
    Synth(CommonArgs),
    /// Train every listed strategy and write logs and model dumps.
    Train(CommonArgs),
    /// Evaluate saved models on the held-out test records.
    Evaluate(CommonArgs),
    /// Train, evaluate and write the comparison table.
    Compare(CommonArgs),
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// Experiment manifest (TOML).
    #[arg(long)]
    manifest: PathBuf,
    /// Overrides the manifest seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Strategy to run; repeat to run several. Replaces the manifest list.
    #[arg(long = "strategy")]
    strategies: Vec<Strategy>,
    /// Overrides the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl CommonArgs {
    fn manifest(&self) -> Result<ExperimentManifest, Error> {
        let mut m = ExperimentManifest::load(&self.manifest)?;
        if let Some(seed) = self.seed {
            m.set_seed(seed);
        }
        if !self.strategies.is_empty() {
            m.strategies = self.strategies.clone();
        }
        if let Some(out) = &self.out {
            m.output_dir = out.clone();
        }
        Ok(m)
    }
}

fn exit_code(err: &Error) -> u8 {
    match err.class() {
        ErrorClass::Config => 2,
        ErrorClass::Data => 3,
        ErrorClass::Numeric => 4,
        ErrorClass::Io => 5,
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Synth(args) => {
            let files = experiment::synth(&args.manifest()?)?;
            log::info!("wrote {} files", files.len());
            for f in files {
                println!("{}", f.display());
            }
        }
        Command::Train(args) => {
            let m = args.manifest()?;
            let out = experiment::train(&m)?;
            for run in &out.runs {
                let per_member = run.metrics.final_sqrt_mse()?;
                let avg = per_member.iter().sum::<f64>() / per_member.len().max(1) as f64;
                println!("{}: averaged training sqrt MSE {avg:.6}", run.strategy);
            }
            println!("outputs in {}", m.output_dir.display());
        }
        Command::Evaluate(args) => {
            let m = args.manifest()?;
            let rows = experiment::evaluate_saved(&m)?;
            let ids = rows.first().map(|(_, t)| t.trip_ids.clone()).unwrap_or_default();
            print!("{}", experiment::evaluation_csv(&ids, &rows));
        }
        Command::Compare(args) => {
            let m = args.manifest()?;
            let out = experiment::compare(&m)?;
            print!("{}", out.report.to_text());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("EVFL_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
