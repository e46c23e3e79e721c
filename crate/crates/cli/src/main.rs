//! `safe-explore` command line: experiment grids, network training and the
//! influence and reachable-set studies. Every subcommand writes CSV only.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use safe_explore::experiment::{
    loss_path, run_matrix, train_nn, CellResult, ExperimentConfig, InfluenceConfig, RunOptions,
    TrainConfig,
};

#[derive(Parser, Debug)]
#[command(
    name = "safe-explore",
    version,
    about = "Safe exploration simulator for human-robot interaction"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run every cell of an experiment grid over its seeds.
    Run(GridArgs),
    /// Generate a dataset, train the network and write it with its loss log.
    TrainNn(TrainArgs),
    /// Tabulate how far the human moves for each robot position.
    InfluenceMap(FileArgs),
    /// Run a grid with the reachable-set metric switched on.
    ReachableSet(GridArgs),
    /// Run a grid with held-out evaluation switched on.
    HeldOut(GridArgs),
}

#[derive(Args, Debug)]
struct GridArgs {
    /// Experiment config (JSON); built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Added to every seed in the config.
    #[arg(long, default_value_t = 0)]
    seed_offset: u64,
    /// Worker threads for grid cells (0 = all cores).
    #[arg(long, default_value_t = 0)]
    jobs: usize,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Model file to write.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct FileArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// CSV file to write.
    #[arg(long)]
    out: PathBuf,
}

fn load_grid(path: Option<&Path>) -> Result<ExperimentConfig> {
    match path {
        Some(p) => ExperimentConfig::load(p).with_context(|| format!("loading {}", p.display())),
        None => Ok(ExperimentConfig::default()),
    }
}

fn run_grid(args: &GridArgs, tweak: impl FnOnce(&mut ExperimentConfig)) -> Result<()> {
    let mut cfg = load_grid(args.config.as_deref())?;
    tweak(&mut cfg);
    let opts = RunOptions {
        seed_offset: args.seed_offset,
        jobs: args.jobs,
    };
    let results = run_matrix(&cfg, &args.out, opts)?;
    report(&results, &args.out);
    Ok(())
}

fn report(results: &[CellResult], out: &Path) {
    let failed: Vec<&CellResult> = results.iter().filter(|r| r.error.is_some()).collect();
    println!("{} cells written to {}", results.len(), out.display());
    for r in failed {
        eprintln!("cell {} failed: {}", r.id, r.error.as_deref().unwrap_or(""));
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(args) => run_grid(&args, |_| {}),
        Command::ReachableSet(args) => run_grid(&args, |c| c.base.metrics.reachable_set = true),
        Command::HeldOut(args) => run_grid(&args, |c| {
            if c.base.metrics.held_out_every == 0 {
                c.base.metrics.held_out_every = 10;
            }
        }),
        Command::TrainNn(args) => {
            let cfg = match &args.config {
                Some(p) => {
                    TrainConfig::load(p).with_context(|| format!("loading {}", p.display()))?
                }
                None => TrainConfig::default(),
            };
            let outcome = train_nn(&cfg, &args.out)?;
            println!(
                "trained on {} samples: mse {:.6e}, label variance {:.6e}; wrote {} and {}",
                outcome.samples,
                outcome.mse,
                outcome.label_variance,
                args.out.display(),
                loss_path(&args.out).display()
            );
            Ok(())
        }
        Command::InfluenceMap(args) => {
            let cfg = match &args.config {
                Some(p) => {
                    InfluenceConfig::load(p).with_context(|| format!("loading {}", p.display()))?
                }
                None => InfluenceConfig::default(),
            };
            if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            cfg.write(&args.out)?;
            println!("wrote {}", args.out.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
