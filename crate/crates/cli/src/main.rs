use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use kirchhoff_lab::{parse_config, run_experiment, ExperimentKind};

const THREADS_VAR: &str = "KIRCHHOFF_LAB_THREADS";

#[derive(Parser)]
#[command(name = "kirchhoff-lab", version, about = "Kirchhoff equation experiment runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        config: PathBuf,
        /// Output directory (overrides `out` in the config).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Seed (overrides `seed` in the config).
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the verification checks for the problem in a config file.
    Verify {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Ok(v) = std::env::var(THREADS_VAR) {
        let threads = match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => n,
            _ => {
                eprintln!("error: {THREADS_VAR} must be a positive integer, got {v:?}");
                return ExitCode::from(2);
            }
        };
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }

    let (path, out, seed, force_verify) = match cli.command {
        Command::Run { config, out, seed } => (config, out, seed, false),
        Command::Verify { config, out } => (config, out, None, true),
    };
    let text = match std::fs::read_to_string(&path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: reading {}: {e}", path.display());
            return ExitCode::from(2);
        }
    };
    let mut config = match parse_config(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {}: {e}", path.display());
            return ExitCode::from(2);
        }
    };
    if force_verify {
        config.kind = ExperimentKind::Verify;
    }
    if let Some(out) = out {
        config.out = out;
    }
    if let Some(seed) = seed {
        config.solver_config.seed = seed;
    }

    match run_experiment(&config) {
        Ok(code) => {
            let report = config.out.join("report.txt");
            println!("report written to {}", report.display());
            ExitCode::from(code as u8)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
