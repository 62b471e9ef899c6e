use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "picocell", version, about = "mm-wave street-canyon picocell simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file and write its CSVs.
    Run {
        config: PathBuf,
        /// Master seed (overrides [experiment] seed).
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (overrides [experiment] out).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Monte Carlo drops per scenario (overrides [experiment] drops).
        #[arg(long)]
        drops: Option<usize>,
    },
}

fn run(config: PathBuf, seed: Option<u64>, out: Option<PathBuf>, drops: Option<usize>) -> picocell::Result<()> {
    let (mut scenario, mut spec) = picocell::parse_config(&config)?;
    if let Some(s) = seed {
        spec.seed = s;
        scenario.seed = s;
    }
    if let Some(o) = out {
        spec.out_dir = o;
    }
    if let Some(n) = drops {
        if n == 0 {
            return Err(picocell::Error::InvalidScenario("--drops must be at least 1".into()));
        }
        spec.drops = n;
    }
    for path in picocell::run_experiment(&scenario, &spec)? {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            config,
            seed,
            out,
            drops,
        } => run(config, seed, out, drops),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
