use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sphereflow_core::harness::{diagnose_command, exit_code, run_command, sweep_command, Manifest, RunStatus};
use sphereflow_core::Error;

#[derive(Parser)]
#[command(name = "sphereflow", version, about = "Sphere-valued heat flow runs and diagnostics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write the step log, snapshots and manifest.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate anchored diagnostics on a stored trace.
    Diagnose {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        anchors: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Penalized runs over a lambda ladder.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        lambda: Vec<f64>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn report(result: Result<Manifest, Error>) -> ExitCode {
    match result {
        Ok(m) => match m.status {
            RunStatus::Ok => {
                eprintln!("ok: {} outputs in {:.2}s", m.outputs.len(), m.wall_clock_seconds);
                ExitCode::SUCCESS
            }
            RunStatus::NumericalFailure => {
                eprintln!("numerical failure: {}", m.message.unwrap_or_default());
                ExitCode::from(2)
            }
        },
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Run { config, out } => run_command(&config, &out),
        Command::Diagnose { trace, anchors, out } => diagnose_command(&trace, &anchors, &out),
        Command::Sweep { config, lambda, out } => sweep_command(&config, &lambda, &out),
    };
    report(result)
}
