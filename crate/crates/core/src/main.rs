use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use progrom::cli::{exit_code, report, run, RunConfig};

#[derive(Parser)]
#[command(name = "progrom", version, about = "Progressive ROM-constrained optimization runs")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a JSON run configuration.
    Run { config: PathBuf },
    /// Print a comparison table for run logs or output directories.
    Report {
        #[arg(required = true)]
        logs: Vec<PathBuf>,
    },
}

fn main() -> ExitCode {
    let args = Args::parse();
    let result = match args.command {
        Command::Run { config } => RunConfig::from_path(&config).and_then(|c| run(&c)).map(|summary| {
            for s in &summary.runs {
                println!(
                    "{}: {} HDM evaluations, {} ROM evaluations, final objective {:e}, status {}",
                    s.mode, s.hdm_evaluations, s.rom_evaluations, s.final_objective, s.status
                );
                if let Some(e) = s.relative_parameter_error {
                    println!("  relative parameter error {e:e}");
                }
            }
        }),
        Command::Report { logs } => report(&logs).map(|table| print!("{table}")),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
