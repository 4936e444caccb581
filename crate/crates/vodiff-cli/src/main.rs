use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use vodiff::scenario::{classify, run, RunOptions, Scenario, Solver};

/// Fundamental solutions of variable-order subdiffusion with mode changes.
#[derive(Parser)]
#[command(name = "vodiff", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a scenario and write fields, symbols, MSD and a report.
    Run {
        scenario: PathBuf,
        /// Output directory (defaults to the scenario's `output`, then out/<name>).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the scenario's solver.
        #[arg(long, value_parser = ["spectral", "oracle", "hybrid", "both"])]
        solver: Option<String>,
        /// Halve the stepping base size this many times.
        #[arg(long, default_value_t = 0)]
        refine: u32,
    },
    /// Write the memory report only.
    Classify {
        scenario: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn execute(cli: Cli) -> vodiff::Result<bool> {
    match cli.command {
        Command::Run { scenario, out, solver, refine } => {
            let sc = Scenario::load(&scenario)?;
            let solver = solver.map(|s| s.parse::<Solver>()).transpose()?;
            let summary = run(&sc, &RunOptions { out_dir: out, solver, refine })?;
            print!("{}", summary.report());
            Ok(summary.passed())
        }
        Command::Classify { scenario, out } => {
            let sc = Scenario::load(&scenario)?;
            let dir = classify(&sc, &RunOptions { out_dir: out, ..Default::default() })?;
            println!("{}", dir.join("memory_report.csv").display());
            Ok(true)
        }
    }
}
