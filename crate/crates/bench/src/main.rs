use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use ssp_bench::config::ExperimentConfig;
use ssp_bench::runner::{aggregate_dir, oracle_summary, report, run_experiment};
use ssp_core::env::{Scenario, ScenarioParams};

#[derive(Parser)]
#[command(
    name = "ssp-bench",
    version,
    about = "Seeded regret experiments on stochastic shortest path problems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every algorithm and seed of a JSON experiment config.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Recompute the aggregates of a run directory.
    Aggregate {
        #[arg(long)]
        dir: PathBuf,
    },
    /// Print final regret per algorithm, optionally writing SVG charts.
    Report {
        #[arg(long)]
        dir: PathBuf,
        #[arg(long)]
        plot: bool,
    },
    /// Print V*(s0), the SSP diameter and the optimal hitting time of a scenario.
    Oracle {
        #[arg(long)]
        scenario: String,
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long)]
        eta: Option<f64>,
        #[arg(long)]
        c_min: Option<f64>,
        #[arg(long)]
        c_max: Option<f64>,
        #[arg(long)]
        p_f: Option<f64>,
    },
}

fn main() -> anyhow::Result<ExitCode> {
    match Cli::parse().command {
        Command::Run { config } => {
            let cfg = ExperimentConfig::from_file(&config).with_context(|| format!("reading {}", config.display()))?;
            let out = run_experiment(&cfg)?;
            for agg in &out.aggregates {
                println!(
                    "{:<24} runs={:<4} final mean regret={:.4}",
                    agg.algorithm,
                    agg.n_runs,
                    agg.final_mean().unwrap_or(f64::NAN)
                );
            }
            println!("wrote {}", out.dir.display());
            if !out.manifest.failed.is_empty() {
                for f in &out.manifest.failed {
                    eprintln!("failed: {} seed {}: {}", f.algorithm, f.seed, f.error);
                }
                return Ok(ExitCode::from(2));
            }
        }
        Command::Aggregate { dir } => {
            for agg in aggregate_dir(&dir)? {
                println!("{:<24} runs={:<4} episodes={}", agg.algorithm, agg.n_runs, agg.len());
            }
        }
        Command::Report { dir, plot } => {
            println!(
                "{:<24} {:>5} {:>7} {:>12} {:>10} {:>11} {:>10}",
                "algorithm", "runs", "K", "regret", "stderr", "regret/V*", "sublinear"
            );
            for r in report(&dir, plot)? {
                println!(
                    "{:<24} {:>5} {:>7} {:>12.4} {:>10.4} {:>11.4} {:>10}",
                    r.algorithm, r.n_runs, r.episodes, r.final_regret, r.stderr, r.normalized, r.verdict.sublinear
                );
            }
        }
        Command::Oracle {
            scenario,
            beta,
            eta,
            c_min,
            c_max,
            p_f,
        } => {
            let params = ScenarioParams {
                beta,
                eta,
                c_min,
                c_max,
                p_f,
            };
            let inst = Scenario::from_name(&scenario, &params)?.build()?;
            let o = oracle_summary(&inst)?;
            println!("{}", serde_json::to_string_pretty(&o)?);
        }
    }
    Ok(ExitCode::SUCCESS)
}
