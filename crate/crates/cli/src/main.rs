use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use invkit_cli::{adjoint_check, dataset, experiment, ExperimentConfig, ADJOINT_TOLERANCE};

#[derive(Parser)]
#[command(name = "invkit", about = "Simulate, reconstruct and benchmark imaging inverse problems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the configured dataset.
    Generate { config: PathBuf },
    /// Reconstruct every sample and write results.csv.
    Run { config: PathBuf },
    /// Check the configured operator against its adjoint.
    AdjointCheck { config: PathBuf },
    /// Print the version.
    Version,
}

fn execute(command: Command) -> invkit_cli::Result<ExitCode> {
    match command {
        Command::Generate { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let manifest = dataset::generate(&cfg)?;
            println!("wrote {} samples to {}", manifest.count, cfg.dataset_dir().display());
        }
        Command::Run { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let rows = experiment::run(&cfg)?;
            let failed = rows.iter().filter(|r| r.error.is_some()).count();
            println!(
                "{} samples, {failed} failed; results in {}",
                rows.len(),
                cfg.output_dir().join(experiment::RESULTS).display()
            );
        }
        Command::AdjointCheck { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let err = adjoint_check(&cfg)?;
            println!("max adjoint error: {err:.3e}");
            if err > ADJOINT_TOLERANCE {
                eprintln!("adjoint mismatch exceeds {ADJOINT_TOLERANCE:e}");
                return Ok(ExitCode::from(2));
            }
        }
        Command::Version => println!("invkit {}", env!("CARGO_PKG_VERSION")),
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
