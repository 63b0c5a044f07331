//! `vastop run <config>`: prices a contract, extracts its surrender region
//! and writes CSV files plus `summary.json`.

mod config;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::Overrides;

#[derive(Parser)]
#[command(name = "vastop", version, about = "Optimal surrender valuation for variable annuities")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Runs the tasks of a JSON config.
    Run {
        config: PathBuf,
        /// Output directory (overrides `out`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Monte Carlo seed (overrides `mc.seed`).
        #[arg(long)]
        seed: Option<u64>,
        /// Number of time steps (overrides `grid.N`).
        #[arg(long = "grid-N")]
        grid_n: Option<usize>,
        /// Number of state nodes (overrides `grid.M`).
        #[arg(long = "grid-M")]
        grid_m: Option<usize>,
    },
}

const EXIT_SOLVER: u8 = 1;
const EXIT_CONFIG: u8 = 2;

fn init_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var("VASTOP_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("VASTOP_THREADS must be a positive integer, got `{raw}`"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let Command::Run {
        config,
        out,
        seed,
        grid_n,
        grid_m,
    } = cli.command;
    if let Err(e) = init_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(EXIT_CONFIG);
    }
    let overrides = Overrides {
        out,
        seed,
        n_steps: grid_n,
        m_nodes: grid_m,
    };
    let cfg = match config::load(&config, &overrides) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    match run::run(&cfg) {
        Ok(_) => {
            eprintln!("wrote {}", cfg.out_dir().display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_SOLVER)
        }
    }
}
