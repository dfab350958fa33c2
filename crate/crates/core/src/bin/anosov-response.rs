use std::path::PathBuf;
use std::process::ExitCode;

use anosov_response::cli::{self, Overrides};
use clap::{Args, Parser, Subcommand};

/// Optimal linear response of SRB measures for torus maps.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// SRB density estimate of the configured map.
    Srb(Common),
    /// Optimal perturbation field and its response.
    Optimal(Common),
    /// Finite-difference and Cauchy–Schwarz checks of the optimal field.
    Validate(Common),
    /// SRB density of the map perturbed along the optimal field.
    PerturbedSrb(Common),
}

#[derive(Args)]
struct Common {
    /// Run configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Perturbation size for perturbed-srb.
    #[arg(long)]
    delta: Option<f64>,
    /// Random spot-check trials for validate.
    #[arg(long)]
    trials: Option<usize>,
    /// Seed of the spot-check generator.
    #[arg(long)]
    seed: Option<u64>,
    /// Quiver grid points per axis.
    #[arg(long)]
    quiver: Option<usize>,
}

fn main() -> ExitCode {
    let args = Cli::parse();
    let (run, common): (fn(&cli::RunConfig, &std::path::Path) -> anosov_response::Result<cli::Summary>, Common) =
        match args.command {
            Command::Srb(c) => (cli::cmd_srb, c),
            Command::Optimal(c) => (cli::cmd_optimal, c),
            Command::Validate(c) => (cli::cmd_validate, c),
            Command::PerturbedSrb(c) => (cli::cmd_perturbed_srb, c),
        };
    let overrides = Overrides {
        delta: common.delta,
        trials: common.trials,
        seed: common.seed,
        quiver: common.quiver,
    };
    let result = cli::load_config(common.config.as_deref(), &overrides).and_then(|cfg| run(&cfg, &common.out));
    match result {
        Ok(summary) => {
            print!("{}", summary.render());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(cli::exit_code(&e) as u8)
        }
    }
}
