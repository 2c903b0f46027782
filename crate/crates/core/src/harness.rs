//! Experiment runner: episodes, seeded replication sweeps over budgets,
//! log-log slope fitting and CSV/JSON output.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::env::{
    build_thm2_adversary, build_thm5_adversary, build_thm5_adversary_random, ArmSpec, DriftingMatrixConfig,
    Environment, MatrixData, StochasticEnvSpec,
};
use crate::error::{BwkError, Result};
use crate::eval::{adversarial_regret, aggregate_regret, mean_and_stderr, RegretReport};
use crate::policy::{Policy, PolicyConfig, Step};
use crate::rng::{stable_hash, RngStream};
use crate::types::{AbortedPull, InstanceParams, RoundRecord, RunTrace, Termination};

/// Stream used to construct an episode's environment.
pub const ENV_BUILD_STREAM: u64 = 0;
/// Stream passed to [`run_episode`] by the experiment runner.
pub const EPISODE_STREAM: u64 = 1;

/// Drives `policy` against `env` until it stops or the horizon cap fires.
///
/// Selection draws come from `policy_rng`, environment draws from `env_rng`.
pub fn drive_episode(
    policy: &mut dyn Policy,
    env: &Environment,
    policy_rng: &mut RngStream,
    env_rng: &mut RngStream,
) -> Result<RunTrace> {
    let params = env.params();
    let cap = params.horizon_cap();
    let mut rounds: Vec<RoundRecord> = Vec::new();
    let mut aborted_pull = None;
    let mut total_reward = 0.0;

    for _ in 0..cap {
        if policy.is_terminated() {
            break;
        }
        let t = rounds.len() + 1;
        if env.horizon().is_some_and(|h| t > h) {
            break;
        }
        let selection = policy.select(policy_rng)?;
        let outcome = env.step(t, selection.arm, env_rng)?;
        match policy.update(&selection, outcome)? {
            Step::Paid => {
                total_reward += outcome.reward;
                rounds.push(RoundRecord {
                    t,
                    arm: selection.arm,
                    probs: selection.probs,
                    outcome,
                    budget_after: policy.budget().remaining(),
                });
            }
            Step::Aborted => {
                aborted_pull = Some(AbortedPull {
                    arm: selection.arm,
                    outcome,
                });
            }
        }
    }

    let terminated_by = if policy.is_terminated() {
        Termination::BudgetExhausted
    } else {
        Termination::HorizonCap
    };
    Ok(RunTrace {
        budget: params.budget,
        tau: rounds.len(),
        rounds,
        terminated_by,
        aborted_pull,
        total_reward,
        total_cost: policy.budget().spent(),
    })
}

/// One seeded episode. The policy draws from stream `2 * stream_id` and the
/// environment from `2 * stream_id + 1`.
pub fn run_episode(policy: &PolicyConfig, env: &Environment, seed: u64, stream_id: u64) -> Result<RunTrace> {
    let mut p = policy.build(*env.params())?;
    let mut policy_rng = RngStream::new(seed, stream_id.wrapping_mul(2));
    let mut env_rng = RngStream::new(seed, stream_id.wrapping_mul(2).wrapping_add(1));
    drive_episode(p.as_mut(), env, &mut policy_rng, &mut env_rng)
}

/// Per-replication seed from `(base_seed, B, replication)`.
pub fn replication_seed(base_seed: u64, budget: f64, replication: usize) -> u64 {
    stable_hash(&[base_seed, budget.to_bits(), replication as u64])
}

fn default_c_max() -> f64 {
    1.0
}

/// Environment recipe; the budget comes from the sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EnvironmentConfig {
    Stochastic {
        c_min: f64,
        #[serde(default = "default_c_max")]
        c_max: f64,
        arms: Vec<ArmSpec>,
    },
    MatrixFile {
        path: PathBuf,
        #[serde(default)]
        c_min: Option<f64>,
        #[serde(default)]
        c_max: Option<f64>,
    },
    /// Bernoulli lower-bound instance with point-mass costs at `c_min`.
    Thm2 { k: usize, c_min: f64 },
    /// Two-arm large-cost instance; the designated arm is drawn per
    /// replication unless fixed here.
    Thm5 {
        alpha: f64,
        #[serde(default)]
        optimal_arm: Option<usize>,
    },
    Drifting(DriftingMatrixConfig),
}

/// An [`EnvironmentConfig`] with any files already read.
#[derive(Debug, Clone)]
pub struct EnvironmentFactory {
    config: EnvironmentConfig,
    matrix: Option<MatrixData>,
}

impl EnvironmentConfig {
    pub fn prepare(&self) -> Result<EnvironmentFactory> {
        let matrix = match self {
            EnvironmentConfig::MatrixFile { path, .. } => {
                let file = std::fs::File::open(path).map_err(|e| BwkError::io(path, e))?;
                Some(MatrixData::read(file, &path.display().to_string())?)
            }
            _ => None,
        };
        Ok(EnvironmentFactory {
            config: self.clone(),
            matrix,
        })
    }
}

impl EnvironmentFactory {
    pub fn c_min(&self) -> f64 {
        match &self.config {
            EnvironmentConfig::Stochastic { c_min, .. } => *c_min,
            EnvironmentConfig::MatrixFile { c_min, .. } => c_min.unwrap_or_else(|| {
                let m = self.matrix.as_ref().expect("matrix loaded in prepare");
                m.costs.iter().copied().fold(f64::INFINITY, f64::min)
            }),
            EnvironmentConfig::Thm2 { c_min, .. } => *c_min,
            EnvironmentConfig::Thm5 { .. } => 1.0,
            EnvironmentConfig::Drifting(d) => d.c_min,
        }
    }

    pub fn build(&self, budget: f64, rng: &mut RngStream) -> Result<Environment> {
        Ok(match &self.config {
            EnvironmentConfig::Stochastic { c_min, c_max, arms } => {
                let params = InstanceParams::new(arms.len(), budget, *c_min, *c_max)?;
                Environment::Stochastic(StochasticEnvSpec::new(params, arms.clone())?)
            }
            EnvironmentConfig::MatrixFile { c_min, c_max, .. } => {
                let data = self.matrix.clone().expect("matrix loaded in prepare");
                let bounds = match (c_min, c_max) {
                    (None, None) => None,
                    _ => {
                        let lo = data.costs.iter().copied().fold(f64::INFINITY, f64::min);
                        let hi = data.costs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                        Some((c_min.unwrap_or(lo), c_max.unwrap_or(hi)))
                    }
                };
                Environment::Adversarial(data.into_spec(budget, bounds)?)
            }
            EnvironmentConfig::Thm2 { k, c_min } => {
                let params = InstanceParams::new(*k, budget, *c_min, 1.0)?;
                Environment::Stochastic(build_thm2_adversary(params, rng)?)
            }
            EnvironmentConfig::Thm5 { alpha, optimal_arm } => Environment::Adversarial(match optimal_arm {
                Some(arm) => build_thm5_adversary(*alpha, budget, *arm)?,
                None => build_thm5_adversary_random(*alpha, budget, rng)?,
            }),
            EnvironmentConfig::Drifting(d) => Environment::Adversarial(d.generate(budget, rng)?),
        })
    }
}

/// Headline regret of one episode: pseudo-regret against a stochastic
/// environment, reward-sum regret against an adversarial one.
pub fn episode_regret(trace: &RunTrace, env: &Environment) -> Result<RegretReport> {
    match env {
        Environment::Stochastic(s) => RegretReport::stochastic(trace, s),
        Environment::Adversarial(a) => adversarial_regret(trace, a),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub policy: PolicyConfig,
    pub environment: EnvironmentConfig,
    pub budgets: Vec<f64>,
    pub replications: usize,
    pub base_seed: u64,
    #[serde(default)]
    pub output: Option<String>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| BwkError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| BwkError::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            BwkError::Config(msg) => BwkError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(BwkError::Config("replications must be at least 1".into()));
        }
        if self.budgets.is_empty() {
            return Err(BwkError::Config("budgets must not be empty".into()));
        }
        if self.budgets.iter().any(|b| !(b.is_finite() && *b > 0.0)) {
            return Err(BwkError::Config("budgets must be positive".into()));
        }
        if self.budgets.windows(2).any(|w| w[0] >= w[1]) {
            return Err(BwkError::Config("budgets must be strictly increasing".into()));
        }
        Ok(())
    }
}

/// One output row per budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub policy: String,
    #[serde(rename = "B")]
    pub budget: f64,
    pub replications: usize,
    pub mean_regret: f64,
    pub stderr_regret: f64,
    pub mean_tau: f64,
    pub mean_total_cost: f64,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Worker threads; `None` uses the rayon default.
    pub threads: Option<usize>,
    pub keep_traces: bool,
}

/// One finished episode of an experiment.
#[derive(Debug, Clone)]
pub struct EpisodeResult {
    pub budget: f64,
    pub replication: usize,
    pub seed: u64,
    pub tau: usize,
    pub total_cost: f64,
    pub regret: RegretReport,
    pub trace: Option<RunTrace>,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub rows: Vec<SummaryRow>,
    pub episodes: Vec<EpisodeResult>,
    /// Configuration with defaults made explicit.
    pub resolved: ExperimentConfig,
}

fn run_replication(
    config: &ExperimentConfig,
    factory: &EnvironmentFactory,
    budget: f64,
    replication: usize,
    keep_trace: bool,
) -> Result<EpisodeResult> {
    let seed = replication_seed(config.base_seed, budget, replication);
    let wrap = |e: BwkError| BwkError::Episode {
        budget,
        replication,
        seed,
        source: Box::new(e),
    };
    let env = factory
        .build(budget, &mut RngStream::new(seed, ENV_BUILD_STREAM))
        .map_err(wrap)?;
    let trace = run_episode(&config.policy, &env, seed, EPISODE_STREAM).map_err(wrap)?;
    let regret = episode_regret(&trace, &env).map_err(wrap)?;
    Ok(EpisodeResult {
        budget,
        replication,
        seed,
        tau: trace.tau,
        total_cost: trace.total_cost,
        regret,
        trace: keep_trace.then_some(trace),
    })
}

/// Runs every `(B, replication)` episode and aggregates one row per budget.
/// Output is identical for any thread count.
pub fn run_experiment(config: &ExperimentConfig, options: RunOptions) -> Result<ExperimentOutput> {
    config.validate()?;
    let factory = config.environment.prepare()?;
    let jobs: Vec<(f64, usize)> = config
        .budgets
        .iter()
        .flat_map(|b| (0..config.replications).map(move |r| (*b, r)))
        .collect();

    // collect every result first so the reported error is the lowest-indexed one
    let run_all = || -> Result<Vec<EpisodeResult>> {
        let results: Vec<Result<EpisodeResult>> = jobs
            .par_iter()
            .map(|(b, r)| run_replication(config, &factory, *b, *r, options.keep_traces))
            .collect();
        results.into_iter().collect()
    };
    let episodes = match options.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| BwkError::Config(format!("thread pool: {e}")))?
            .install(run_all)?,
        None => run_all()?,
    };

    let label = config.policy.label().to_string();
    let mut rows = Vec::with_capacity(config.budgets.len());
    for (chunk, budget) in episodes.chunks(config.replications).zip(&config.budgets) {
        let reports: Vec<RegretReport> = chunk.iter().map(|e| e.regret.clone()).collect();
        let agg = aggregate_regret(&reports)?;
        let taus: Vec<f64> = chunk.iter().map(|e| e.tau as f64).collect();
        let costs: Vec<f64> = chunk.iter().map(|e| e.total_cost).collect();
        rows.push(SummaryRow {
            policy: label.clone(),
            budget: *budget,
            replications: config.replications,
            mean_regret: agg.mean,
            stderr_regret: agg.stderr,
            mean_tau: mean_and_stderr(&taus).0,
            // every episode cost is <= B; the min only absorbs summation rounding
            mean_total_cost: mean_and_stderr(&costs).0.min(*budget),
        });
    }

    let mut resolved = config.clone();
    let probe = InstanceParams::new(1, config.budgets[0], factory.c_min(), factory.c_min().max(1.0))?;
    resolved.policy = config.policy.resolved(&probe);
    Ok(ExperimentOutput {
        rows,
        episodes,
        resolved,
    })
}

/// Least-squares slope of `ln(regret)` against `ln(B)`. Points with a
/// nonpositive coordinate are dropped with a warning.
pub fn fit_loglog_slope(points: &[(f64, f64)]) -> Result<f64> {
    let usable: Vec<(f64, f64)> = points
        .iter()
        .filter(|(b, r)| {
            let keep = *b > 0.0 && *r > 0.0 && b.is_finite() && r.is_finite();
            if !keep {
                log::warn!("dropping point (B = {b}, regret = {r}) from log-log fit");
            }
            keep
        })
        .map(|(b, r)| (b.ln(), r.ln()))
        .collect();
    if usable.len() < 3 {
        return Err(BwkError::NotEnoughPoints(usable.len()));
    }
    let n = usable.len() as f64;
    let mx = usable.iter().map(|p| p.0).sum::<f64>() / n;
    let my = usable.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = usable.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = usable.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(BwkError::param("all budgets are equal; slope undefined"));
    }
    Ok(sxy / sxx)
}

pub const SUMMARY_HEADER: [&str; 7] = [
    "policy",
    "B",
    "replications",
    "mean_regret",
    "stderr_regret",
    "mean_tau",
    "mean_total_cost",
];

pub const TRACE_HEADER: [&str; 6] = ["t", "arm", "reward", "cost", "budget_after", "prob_selected"];

fn csv_err(e: csv::Error) -> BwkError {
    BwkError::Config(format!("CSV error: {e}"))
}

pub fn write_summary_csv<W: Write>(rows: &[SummaryRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(SUMMARY_HEADER).map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.policy.clone(),
            r.budget.to_string(),
            r.replications.to_string(),
            r.mean_regret.to_string(),
            r.stderr_regret.to_string(),
            r.mean_tau.to_string(),
            r.mean_total_cost.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| BwkError::Config(format!("CSV flush: {e}")))?;
    Ok(())
}

pub fn read_summary_csv<R: Read>(reader: R, source: &str) -> Result<Vec<SummaryRow>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers().map_err(csv_err)?.clone();
    if headers.iter().collect::<Vec<_>>() != SUMMARY_HEADER {
        return Err(BwkError::Parse {
            path: source.to_string(),
            line: 1,
            message: format!("unexpected header {headers:?}"),
        });
    }
    rdr.deserialize()
        .map(|r| {
            r.map_err(|e: csv::Error| BwkError::Parse {
                path: source.to_string(),
                line: e.position().map(|p| p.line()).unwrap_or(0),
                message: e.to_string(),
            })
        })
        .collect()
}

pub fn write_trace_csv<W: Write>(trace: &RunTrace, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(TRACE_HEADER).map_err(csv_err)?;
    for r in &trace.rounds {
        w.write_record([
            r.t.to_string(),
            r.arm.to_string(),
            r.outcome.reward.to_string(),
            r.outcome.cost.to_string(),
            r.budget_after.to_string(),
            r.probs[r.arm].to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| BwkError::Config(format!("CSV flush: {e}")))?;
    Ok(())
}

fn create(path: &Path) -> Result<std::io::BufWriter<std::fs::File>> {
    let f = std::fs::File::create(path).map_err(|e| BwkError::io(path, e))?;
    Ok(std::io::BufWriter::new(f))
}

/// Writes `<prefix>_summary.csv`, `<prefix>_config.json` and one
/// `<prefix>_trace_<seed>.csv` per kept trace. Returns the paths written.
pub fn emit_results(output: &ExperimentOutput, prefix: &str) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();

    let summary = PathBuf::from(format!("{prefix}_summary.csv"));
    write_summary_csv(&output.rows, create(&summary)?).map_err(|e| match e {
        BwkError::Config(m) => BwkError::Config(format!("{}: {m}", summary.display())),
        other => other,
    })?;
    written.push(summary);

    let config_path = PathBuf::from(format!("{prefix}_config.json"));
    let mut resolved = output.resolved.clone();
    resolved.output = Some(prefix.to_string());
    let mut text = serde_json::to_string_pretty(&resolved).map_err(|e| BwkError::Config(e.to_string()))?;
    text.push('\n');
    std::fs::write(&config_path, text).map_err(|e| BwkError::io(&config_path, e))?;
    written.push(config_path);

    for ep in &output.episodes {
        if let Some(trace) = &ep.trace {
            let path = PathBuf::from(format!("{prefix}_trace_{}.csv", ep.seed));
            write_trace_csv(trace, create(&path)?)?;
            written.push(path);
        }
    }
    Ok(written)
}
