mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::Failure;
use config::Config;

/// Soliton dynamics experiments in slowly varying potentials.
#[derive(Parser, Debug)]
#[command(name = "soliton", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Configuration file (`[section]` headers with `key = value` lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Seed for the random initial perturbation.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Concurrent sweep members.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Solve for the ground state and print λ, mass, energy and decay rate.
    GroundState,
    /// Run the PDE next to the effective ODE and record tracking errors.
    Evolve,
    /// Tracking experiment for every h in the list, with a slope fit.
    Sweep,
    /// Kernel, coercivity, invariance and corrector diagnostics.
    SpectralReport,
    /// Perturbed against exact effective trajectories across h.
    OdeCompare,
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let text = match &cli.config {
        Some(path) => std::fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?,
        None => String::new(),
    };
    let mut cfg = Config::parse(&text)?;
    if let Some(seed) = cli.seed {
        cfg.evolve.seed = seed;
    }
    log::info!("running {:?} for {}", cli.command, cfg.evolve.model.name());
    match cli.command {
        Command::GroundState => commands::ground_state_cmd(&cfg, &cli.out),
        Command::Evolve => commands::evolve_cmd(&cfg, &cli.out),
        Command::Sweep => commands::sweep_cmd(&cfg, &cli.out, cli.threads),
        Command::SpectralReport => commands::spectral_cmd(&cfg, &cli.out),
        Command::OdeCompare => commands::ode_compare_cmd(&cfg, &cli.out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}
