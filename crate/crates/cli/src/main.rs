use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lqt_cli::{CliError, Experiment, ExperimentConfig};

/// Linear quadratic tracking experiments on the BAAM extruder model.
#[derive(Parser)]
#[command(name = "lqt", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Finite-horizon tracking by backward Riccati recursion.
    Finite(Overrides),
    /// Infinite-horizon discounted tracking by policy iteration.
    Infinite(Overrides),
    /// Model-free Q-learning from simulated plant data.
    Qlearn(Overrides),
    /// Model-based vs learned controller, with a scored report.
    Compare {
        #[command(flatten)]
        overrides: Overrides,
        /// Exit with status 3 if any acceptance band fails.
        #[arg(long)]
        check: bool,
    },
}

#[derive(Args)]
struct Overrides {
    /// Config file or run manifest (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output root; results go to `<out>/<experiment>/`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long = "n-samples")]
    n_samples: Option<usize>,
}

impl Overrides {
    fn resolve(&self) -> Result<ExperimentConfig, CliError> {
        let mut c = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if let Some(v) = &self.out {
            c.out_dir = v.clone();
        }
        if let Some(v) = self.gamma {
            c.gamma = v;
        }
        if let Some(v) = self.mu {
            c.mu = v;
        }
        if let Some(v) = self.horizon {
            c.horizon = v;
        }
        if let Some(v) = self.n_samples {
            c.n_samples = v;
        }
        Ok(c)
    }
}

fn print_summary(dir: &std::path::Path) {
    if let Ok(text) = std::fs::read_to_string(dir.join("summary.toml")) {
        print!("{text}");
    }
    println!("artifacts: {}", dir.display());
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Finite(o) => print_summary(&lqt_cli::run(Experiment::Finite, &o.resolve()?)?),
        Command::Infinite(o) => print_summary(&lqt_cli::run(Experiment::Infinite, &o.resolve()?)?),
        Command::Qlearn(o) => print_summary(&lqt_cli::run(Experiment::Qlearn, &o.resolve()?)?),
        Command::Compare { overrides, check } => {
            let config = overrides.resolve()?;
            let report = lqt_cli::run_compare(&config)?;
            print!("{}", report.table());
            println!("artifacts: {}", config.run_dir(Experiment::Compare).display());
            if check && !report.passed {
                return Err(CliError::BandFailure(report.failures()));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
