use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use econflow::{init_threads, load_config, run, CliError, Mode};

/// Kinetic, transaction-fluid and reduced-moment simulations of credit cycles.
#[derive(Debug, Parser)]
#[command(name = "econflow", version)]
struct Args {
    mode: Mode,

    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,

    /// Directory for CSV, manifest and report files.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

fn execute(args: &Args) -> Result<(), CliError> {
    init_threads()?;
    let cfg = load_config(&args.config, args.mode)?;
    let outcome = run(&cfg, &args.out_dir)?;
    for f in &outcome.files {
        println!("wrote {}", f.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let args = Args::parse();
    match execute(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("econflow {}: {e}", args.mode.name());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
