use std::path::PathBuf;
use std::process::ExitCode;

use adaptive_autopilot::harness::{self, CommandOutput, HarnessError, RunConfig, StyleSelection};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "aa", about = "Driving-style aware car-following pipeline", version)]
struct Cli {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// aggressive, normal, conservative or all.
    #[arg(long, global = true)]
    style: Option<StyleSelection>,
    /// Generate N synthetic episodes per style instead of reading data files.
    #[arg(long, global = true)]
    synthetic: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the episode store from trajectory files or the generator.
    Ingest,
    /// Label episodes and write per-style training datasets.
    Classify,
    TrainRegressor,
    CalibrateIdm,
    TrainAgent,
    /// Evaluate trained agents on held-out traces.
    Evaluate,
    /// Comparison tables, rollouts and multiplier trajectories.
    Report,
}

fn run(cli: Cli) -> Result<CommandOutput, HarnessError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => {
            let mut c = RunConfig::default();
            c.apply_env();
            c
        }
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(s) = cli.style {
        cfg.style = s;
    }
    if let Some(n) = cli.synthetic {
        cfg.ingest.synthetic = n;
    }
    match cli.command {
        Command::Ingest => harness::cmd_ingest(&cfg),
        Command::Classify => harness::cmd_classify(&cfg),
        Command::TrainRegressor => harness::cmd_train_regressor(&cfg),
        Command::CalibrateIdm => harness::cmd_calibrate_idm(&cfg),
        Command::TrainAgent => harness::cmd_train_agent(&cfg),
        Command::Evaluate => harness::cmd_evaluate(&cfg),
        Command::Report => harness::cmd_report(&cfg),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(out) => {
            println!("{}", out.summary);
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
