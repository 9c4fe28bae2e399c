use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use hardy_lab::experiments::{error_exit_code, run, Command, ExperimentConfig, Overrides};

/// Hardy/BMO experiments for divergence-form operators.
#[derive(Parser)]
#[command(name = "hardy-lab", version)]
struct Cli {
    /// assemble, functional, decompose, validate, bmo, carleson, riesz,
    /// equivalence, oracle or report
    command: String,
    /// JSON config; defaults apply to every missing field.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Grid override, `64` or `16x16`.
    #[arg(long)]
    grid: Option<String>,
    /// Corpus seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory override.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated oracle suites.
    #[arg(long)]
    filter: Option<String>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(3);
        }
    };
    let fail = |e: hardy_lab::Error| {
        eprintln!("error: {e}");
        ExitCode::from(error_exit_code(&e) as u8)
    };
    let command: Command = match cli.command.parse() {
        Ok(c) => c,
        Err(e) => return fail(e),
    };
    let mut config = match &cli.config {
        Some(path) => match ExperimentConfig::load(path) {
            Ok(c) => c,
            Err(e) => return fail(e),
        },
        None => ExperimentConfig::default(),
    };
    let overrides = Overrides { grid: cli.grid, seed: cli.seed, out: cli.out, filter: cli.filter };
    if let Err(e) = config.apply(&overrides) {
        return fail(e);
    }
    match run(command, &config) {
        Ok(outcome) => {
            for check in &outcome.checks {
                println!("{}", check.line());
            }
            println!("{} reports in {}", outcome.files.len(), outcome.output_dir.display());
            ExitCode::from(outcome.exit_code() as u8)
        }
        Err(e) => fail(e),
    }
}
