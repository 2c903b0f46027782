use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use bwk_core::harness::{emit_results, read_summary_csv, RunOptions};
use bwk_core::{
    build_thm2_adversary, build_thm5_adversary, build_thm5_adversary_random, fit_loglog_slope, run_experiment,
    ExperimentConfig, InstanceParams, RngStream,
};

#[derive(Parser)]
#[command(name = "bwk", version, about = "Budgeted bandit experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a budget sweep and write summary, config and optional trace files.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output prefix; files are written as <PREFIX>_summary.csv etc.
        #[arg(long)]
        out: Option<String>,
        #[arg(long)]
        threads: Option<usize>,
        /// Also write one trace CSV per episode.
        #[arg(long)]
        emit_traces: bool,
    },
    /// Fit the log-log slope of mean regret against B from a summary CSV.
    Slope { summary: PathBuf },
    /// Generate a lower-bound environment file.
    GenEnv {
        #[command(subcommand)]
        kind: GenEnv,
    },
}

#[derive(Subcommand)]
enum GenEnv {
    /// Bernoulli instance with one arm lifted by sqrt(K c_min / B), as JSON.
    Thm2 {
        #[arg(long)]
        k: usize,
        #[arg(long)]
        budget: f64,
        #[arg(long)]
        c_min: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Two-arm matrix whose wrong arm charges B^alpha once, as CSV.
    Thm5 {
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        budget: f64,
        /// Designated arm; drawn from --seed when omitted.
        #[arg(long)]
        optimal_arm: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            config,
            out,
            threads,
            emit_traces,
        } => {
            let cfg = ExperimentConfig::load(&config)?;
            let prefix = match out.or_else(|| cfg.output.clone()) {
                Some(p) => p,
                None => bail!("no output prefix: pass --out or set \"output\" in the config"),
            };
            if threads == Some(0) {
                bail!("--threads must be at least 1");
            }
            let output = run_experiment(
                &cfg,
                RunOptions {
                    threads,
                    keep_traces: emit_traces,
                },
            )?;
            for row in &output.rows {
                log::info!(
                    "B = {}: mean regret {} (stderr {}), mean tau {}",
                    row.budget,
                    row.mean_regret,
                    row.stderr_regret,
                    row.mean_tau
                );
            }
            for path in emit_results(&output, &prefix)? {
                println!("{}", path.display());
            }
        }
        Command::Slope { summary } => {
            let file = std::fs::File::open(&summary).with_context(|| format!("opening {}", summary.display()))?;
            let rows = read_summary_csv(file, &summary.display().to_string())?;
            let points: Vec<(f64, f64)> = rows.iter().map(|r| (r.budget, r.mean_regret)).collect();
            println!("{}", fit_loglog_slope(&points)?);
        }
        Command::GenEnv { kind } => match kind {
            GenEnv::Thm2 {
                k,
                budget,
                c_min,
                seed,
                out,
            } => {
                let params = InstanceParams::new(k, budget, c_min, 1.0)?;
                let spec = build_thm2_adversary(params, &mut RngStream::new(seed, 0))?;
                let mut text = serde_json::to_string_pretty(&spec)?;
                text.push('\n');
                std::fs::write(&out, text).with_context(|| format!("writing {}", out.display()))?;
                println!("{}", out.display());
            }
            GenEnv::Thm5 {
                alpha,
                budget,
                optimal_arm,
                seed,
                out,
            } => {
                let spec = match optimal_arm {
                    Some(arm) => build_thm5_adversary(alpha, budget, arm)?,
                    None => build_thm5_adversary_random(alpha, budget, &mut RngStream::new(seed, 0))?,
                };
                spec.save_csv(&out)?;
                println!("{}", out.display());
            }
        },
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
