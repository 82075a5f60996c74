use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use blockgrad_cli::{parse_config_with, Experiment, Overrides};
use blockgrad_cli::{run, selftest, CliError};
use clap::{Args, Parser, Subcommand};

/// Blockwise adaptive gradient experiments.
#[derive(Parser)]
#[command(name = "blockgrad", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Online hinge-loss regret of BAG for several partitions
    Regret(RunArgs),
    /// BAGM convergence of the full-gradient norm on the smoothed hinge loss
    Nonconvex(RunArgs),
    /// BAG on an underdetermined least-squares problem
    Minnorm(RunArgs),
    /// Training one layer of a square MLP towards the minimum-norm solution
    Layerwise(RunArgs),
    /// Divergence between runs on datasets differing in one example
    Stability(RunArgs),
    /// Second-moment diagnostics for a block partition
    Diag(RunArgs),
    /// Reduction identities, gradient checks and small solver checks
    Selftest,
}

#[derive(Args)]
struct RunArgs {
    /// TOML configuration file
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// default, paper, quick or check (optionally prefixed, e.g. regret-paper)
    #[arg(long, value_name = "NAME")]
    preset: Option<String>,
    /// Master seed (default 42)
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    /// Output CSV path
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Worker threads (falls back to BLOCKGRAD_THREADS)
    #[arg(long, value_name = "N")]
    threads: Option<usize>,
    /// Write the final optimizer state here (minnorm and layerwise only)
    #[arg(long, value_name = "PATH")]
    checkpoint: Option<PathBuf>,
}

fn threads_from_env() -> Result<Option<usize>, CliError> {
    match std::env::var("BLOCKGRAD_THREADS") {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| CliError::Usage(format!("BLOCKGRAD_THREADS: cannot parse `{v}`"))),
        Err(_) => Ok(None),
    }
}

fn run_experiment(experiment: Experiment, args: RunArgs) -> Result<(), CliError> {
    let text = match &args.config {
        Some(p) => std::fs::read_to_string(p).map_err(|e| CliError::Io {
            path: p.clone(),
            source: e,
        })?,
        None => String::new(),
    };
    let threads = match args.threads {
        Some(t) => Some(t),
        None => threads_from_env()?,
    };
    let overrides = Overrides {
        experiment: Some(experiment),
        preset: args.preset,
        seed: args.seed,
        out: args.out,
        checkpoint: args.checkpoint,
        threads,
    };
    let cfg = parse_config_with(&text, overrides)?;
    log::info!("resolved configuration:\n{}", cfg.to_canonical());
    run(&cfg, &mut std::io::stdout().lock())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Regret(a) => run_experiment(Experiment::Regret, a),
        Command::Nonconvex(a) => run_experiment(Experiment::Nonconvex, a),
        Command::Minnorm(a) => run_experiment(Experiment::Minnorm, a),
        Command::Layerwise(a) => run_experiment(Experiment::Layerwise, a),
        Command::Stability(a) => run_experiment(Experiment::Stability, a),
        Command::Diag(a) => run_experiment(Experiment::Diag, a),
        Command::Selftest => {
            let mut out = std::io::stdout().lock();
            let ok = selftest::run_all(&mut out);
            let _ = out.flush();
            if ok {
                Ok(())
            } else {
                Err(CliError::Assertion("selftest".into()))
            }
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
