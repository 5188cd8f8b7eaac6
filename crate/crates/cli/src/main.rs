//! `cellfree` command line: drop archives, single solves, experiment sweeps,
//! and per-iteration timing, all driven by a plain-text config file.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use cellfree_cli::config::ExperimentConfig;
use cellfree_cli::{experiments, timing};
use cellfree_core::generate_drop;

#[derive(Parser)]
#[command(
    name = "cellfree",
    version,
    about = "Downlink power control experiments for cell-free massive MIMO"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Config file (key = value sections; see README)
    #[arg(long)]
    config: PathBuf,
    /// Output directory, overriding the config's output_dir
    #[arg(long)]
    out: Option<PathBuf>,
    /// Base seed, overriding the config's seed
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate one network drop and archive it as a CSV bundle
    Generate {
        #[command(flatten)]
        common: Common,
    },
    /// Generate one drop, maximize a single utility, write trace and results
    Solve {
        #[command(flatten)]
        common: Common,
        /// Utility to maximize (defaults to the first configured one)
        #[arg(long)]
        utility: Option<String>,
    },
    /// Run the experiment described by the config
    Experiment {
        #[command(flatten)]
        common: Common,
    },
    /// Time solver iterations across AP counts and check linear scaling
    Bench {
        #[command(flatten)]
        common: Common,
    },
}

fn load(common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::from_file(&common.config)?;
    if let Some(out) = &common.out {
        cfg.output_dir = out.clone();
    }
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn real_main() -> Result<()> {
    match Cli::parse().command {
        Command::Generate { common } => {
            let cfg = load(&common)?;
            let drop = generate_drop(&cfg.scenario, cfg.seed)?;
            drop.save_bundle(&cfg.output_dir)
                .with_context(|| format!("writing bundle to {}", cfg.output_dir.display()))?;
            println!(
                "wrote drop (M={}, K={}, seed={}) to {}",
                drop.num_aps,
                drop.num_users,
                drop.seed,
                cfg.output_dir.display()
            );
        }
        Command::Solve { common, utility } => {
            let cfg = load(&common)?;
            let name = utility.unwrap_or_else(|| cfg.utilities[0].clone());
            let record = experiments::run_single_solve(&cfg, &name)?;
            println!(
                "{}: total {:.4} bit/s/Hz, min {:.4} bit/s/Hz, {} iterations, {:.3} s",
                record.kind,
                record.total_se_bits,
                record.min_se_bits,
                record.iterations,
                record.wall_s
            );
            println!("outputs in {}", cfg.output_dir.display());
        }
        Command::Experiment { common } => {
            let cfg = load(&common)?;
            experiments::run_experiment(&cfg)?;
            println!("experiment '{}' written to {}", cfg.experiment.name(), cfg.output_dir.display());
        }
        Command::Bench { common } => {
            let cfg = load(&common)?;
            let rows = timing::timing_benchmark(&cfg)?;
            std::fs::create_dir_all(&cfg.output_dir)?;
            timing::write_timing_csv(&rows, &cfg.output_dir.join("timing.csv"))?;
            println!("num_aps  iters  total_s   per_iter_s  ratio");
            for r in &rows {
                println!(
                    "{:>7}  {:>5}  {:>8.3}  {:>10.6}  {}",
                    r.num_aps,
                    r.iterations,
                    r.total_s,
                    r.per_iter_s,
                    r.ratio_vs_prev.map_or("-".into(), |x| format!("{x:.2}"))
                );
            }
            timing::check_scaling(&rows)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match real_main() {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
