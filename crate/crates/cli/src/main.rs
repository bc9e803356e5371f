//! `graphaf` — data generation, training, sampling, evaluation and
//! property-targeted fine-tuning for flow-based graph generation.
//!
//! Exit codes: 0 success, 1 usage, 2 data error, 3 numerical failure.

mod commands;
mod config;
mod error;
mod manifest;
mod selfcheck;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{Ctx, Io};
use config::RunConfig;
use error::CliError;

#[derive(Parser, Debug)]
#[command(name = "graphaf", version, about = "Flow-based autoregressive graph generation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Run configuration file (`key = value`, `#` comments).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override any config key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    epochs: Option<usize>,
    /// Dataset: `synthetic`, `community` or a MOLT file.
    #[arg(long, global = true)]
    data: Option<String>,
    /// Property scorer: `toy:atom-count`, `toy:ring-penalty`, `toy:fraction:<symbol>`, `exec:<path>`.
    #[arg(long, global = true)]
    scorer: Option<String>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Model checkpoint to read.
    #[arg(long, global = true)]
    checkpoint: Option<PathBuf>,
    /// Samples file for `evaluate` (default `<out>/samples.molt`).
    #[arg(long, global = true)]
    input: Option<PathBuf>,
    /// Also write per-step sampling traces.
    #[arg(long, global = true)]
    trace: bool,
    /// Print and write the evaluation report as CSV.
    #[arg(long, global = true)]
    csv: bool,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Generate a dataset and write it as MOLT.
    GenData,
    /// Maximum-likelihood training; writes `model.ckpt`.
    Train,
    /// Sample molecules from a checkpoint.
    Sample,
    /// Validity, uniqueness, novelty and reconstruction of a samples file.
    Evaluate,
    /// Policy-gradient fine-tuning toward a property scorer.
    Finetune,
    /// Improve low-scoring dataset molecules under similarity constraints.
    OptimizeConstrained,
    /// Invertibility, masking, gradient and valency self-tests.
    Selfcheck,
    /// Print the effective configuration.
    Config,
}

fn effective_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::default();
    if let Some(p) = &cli.config {
        let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
        cfg.apply_text(&text)?;
    }
    for kv in &cli.set {
        cfg.apply_override(kv)?;
    }
    let flags = [
        ("out", cli.out.clone()),
        ("seed", cli.seed.map(|v| v.to_string())),
        ("epochs", cli.epochs.map(|v| v.to_string())),
        ("dataset", cli.data.clone()),
        ("scorer", cli.scorer.clone()),
    ];
    for (key, v) in flags {
        if let Some(v) = v {
            cfg.set(key, &v)?;
        }
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("--threads: {e}")))?;
    }
    let cfg = effective_config(&cli)?;
    let io = Io {
        checkpoint: cli.checkpoint,
        input: cli.input,
        trace: cli.trace,
        csv: cli.csv,
    };
    match cli.command {
        Command::Config => {
            cfg.validate()?;
            print!("{}", cfg.render());
            Ok(())
        }
        Command::Selfcheck => {
            if selfcheck::run(cfg.seed) {
                Ok(())
            } else {
                Err(CliError::Numerical("self-check failed".into()))
            }
        }
        cmd => {
            let ctx = Ctx::new(cfg, io)?;
            match cmd {
                Command::GenData => commands::gen_data(ctx),
                Command::Train => commands::train_cmd(ctx),
                Command::Sample => commands::sample(ctx),
                Command::Evaluate => commands::evaluate(ctx),
                Command::Finetune => commands::finetune_cmd(ctx),
                Command::OptimizeConstrained => commands::optimize(ctx),
                Command::Selfcheck | Command::Config => unreachable!(),
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
