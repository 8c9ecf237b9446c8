use std::path::PathBuf;
use std::process::ExitCode;

use cdcert_cli::{registry, verify, Options, EXIT_PARSE};
use clap::{Parser, Subcommand};

/// Numerical certificates for curvature-dimension conditions with drift.
#[derive(Parser)]
#[command(name = "cdcert", version)]
struct Cli {
    /// multiply every check tolerance by this factor
    #[arg(long, global = true, default_value_t = 1.0)]
    tolerance_scale: f64,
    /// worker threads (default: all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// directory for CSV curves, overriding the scenario
    #[arg(long, global = true)]
    csv_dir: Option<PathBuf>,
    /// seed for random instances, overriding the scenario
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every check of a scenario file
    Verify { scenario: PathBuf },
    /// Print the available checks with their parameters
    ListChecks,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if !(cli.tolerance_scale.is_finite() && cli.tolerance_scale > 0.0) {
        eprintln!("error: --tolerance-scale must be positive");
        return ExitCode::from(EXIT_PARSE as u8);
    }
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_PARSE as u8);
        }
    }
    match cli.command {
        Command::ListChecks => {
            print!("{}", registry::listing());
            ExitCode::SUCCESS
        }
        Command::Verify { scenario } => {
            let opts = Options {
                tolerance_scale: cli.tolerance_scale,
                csv_dir: cli.csv_dir,
                seed: cli.seed,
            };
            let run = verify(&scenario, &opts);
            print!("{}", run.report);
            ExitCode::from(run.exit_code as u8)
        }
    }
}
