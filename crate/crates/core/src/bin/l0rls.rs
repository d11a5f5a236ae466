use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use l0rls::report::{cmd_predict, cmd_simulate, cmd_verify, Options};

/// l0-RLS adaptive filter: steady-state theory and Monte Carlo verification.
#[derive(Debug, Parser)]
#[command(name = "l0rls", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evaluate the closed-form steady-state predictions.
    Predict(Common),
    /// Run the Monte Carlo ensemble and write learning curves.
    Simulate(Common),
    /// Predict, simulate and compare against tolerances.
    Verify(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// Experiment config (.json or .toml).
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads for the ensemble (default: hardware parallelism).
    #[arg(long)]
    threads: Option<usize>,
    /// Relative tolerance on the total steady-state MSD, in percent.
    #[arg(long, default_value_t = 10.0)]
    tol_msd: f64,
    /// Relative slack on per-tap steady means, in percent.
    #[arg(long, default_value_t = 25.0)]
    tol_mean: f64,
    /// Override the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Use this noise variance on the theory side only (negative control).
    #[arg(long)]
    predict_sigma_v2: Option<f64>,
}

impl From<Common> for Options {
    fn from(c: Common) -> Self {
        Options {
            config: c.config,
            out: c.out,
            threads: c.threads,
            tol_msd: c.tol_msd,
            tol_mean: c.tol_mean,
            seed: c.seed,
            predict_sigma_v2: c.predict_sigma_v2,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = match cli.command {
        Command::Predict(c) => cmd_predict(&c.into()),
        Command::Simulate(c) => cmd_simulate(&c.into()),
        Command::Verify(c) => cmd_verify(&c.into()),
    };
    match &outcome.result {
        Ok(summary) => eprintln!("{summary}"),
        Err(e) => eprintln!("error: {e}"),
    }
    ExitCode::from(outcome.exit_code() as u8)
}
