//! Hindsight oracles and regret figures.

use serde::{Deserialize, Serialize};

use crate::env::{argmax, AdversarialMatrixSpec, StochasticEnvSpec};
use crate::error::{BwkError, Result};
use crate::types::{Budget, RunTrace};

/// Playout of a single arm held fixed until the budget runs out.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedArmPlayout {
    /// Feasible rounds `T(i)`.
    pub rounds: usize,
    pub reward_sum: f64,
    pub cost_sum: f64,
    /// `Σ_{t ≤ T(i)} r_t(i) / c_t(i)`.
    pub efficiency_sum: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HindsightReport {
    pub arms: Vec<FixedArmPlayout>,
    pub best_reward_arm: usize,
    /// Arm maximizing cumulative efficiency over its own feasible rounds.
    pub best_efficiency_arm: usize,
}

impl HindsightReport {
    pub fn best_reward(&self) -> f64 {
        self.arms[self.best_reward_arm].reward_sum
    }
}

/// Plays every arm alone against the matrix until the next pull is
/// unaffordable. Fails if the matrix ends while a pull is still affordable.
pub fn hindsight_fixed_arms(spec: &AdversarialMatrixSpec) -> Result<HindsightReport> {
    let params = spec.params();
    let mut arms = Vec::with_capacity(params.k);
    for arm in 0..params.k {
        let mut budget = Budget::new(params.budget);
        let mut playout = FixedArmPlayout {
            rounds: 0,
            reward_sum: 0.0,
            cost_sum: 0.0,
            efficiency_sum: 0.0,
        };
        loop {
            let t = playout.rounds + 1;
            if t > spec.horizon() {
                if budget.can_afford(params.c_min) {
                    return Err(BwkError::HorizonTooShort {
                        arm,
                        rounds: playout.rounds,
                        remaining: budget.remaining(),
                    });
                }
                break;
            }
            let o = spec.step(t, arm)?;
            if !budget.try_spend(o.cost) {
                break;
            }
            playout.rounds = t;
            playout.reward_sum += o.reward;
            playout.efficiency_sum += o.efficiency();
            if budget.is_exhausted() {
                break;
            }
        }
        playout.cost_sum = budget.spent();
        arms.push(playout);
    }
    let rewards: Vec<f64> = arms.iter().map(|a| a.reward_sum).collect();
    let effs: Vec<f64> = arms.iter().map(|a| a.efficiency_sum).collect();
    Ok(HindsightReport {
        best_reward_arm: argmax(&rewards),
        best_efficiency_arm: argmax(&effs),
        arms,
    })
}

fn bundle_cost(counts: &[u64], means: &[(f64, f64)]) -> f64 {
    counts.iter().zip(means).map(|(n, (_, rho))| *n as f64 * rho).sum()
}

fn bundle_gain(counts: &[u64], means: &[(f64, f64)]) -> f64 {
    counts.iter().zip(means).map(|(n, (mu, _))| *n as f64 * mu).sum()
}

fn check_means(means: &[(f64, f64)]) -> Result<()> {
    if means.is_empty() {
        return Err(BwkError::EmptyCollection);
    }
    if means.iter().any(|(mu, rho)| !(mu.is_finite() && *mu >= 0.0 && rho.is_finite() && *rho > 0.0)) {
        return Err(BwkError::param("means need μ >= 0 and ρ > 0"));
    }
    Ok(())
}

/// Pull counts chosen by the efficiency-greedy knapsack heuristic.
pub fn greedy_pull_counts(means: &[(f64, f64)], budget: f64) -> Result<Vec<u64>> {
    check_means(means)?;
    let mut order: Vec<usize> = (0..means.len()).collect();
    // stable sort keeps lowest index first among equal efficiencies
    order.sort_by(|&a, &b| {
        let ea = means[a].0 / means[a].1;
        let eb = means[b].0 / means[b].1;
        eb.partial_cmp(&ea).unwrap()
    });
    let mut counts = vec![0u64; means.len()];
    for arm in order {
        let rho = means[arm].1;
        let room = budget - bundle_cost(&counts, means);
        let mut n = if room > 0.0 { (room / rho).floor() as u64 } else { 0 };
        counts[arm] = n;
        while n > 0 && bundle_cost(&counts, means) > budget {
            n -= 1;
            counts[arm] = n;
        }
        loop {
            counts[arm] = n + 1;
            if bundle_cost(&counts, means) <= budget {
                n += 1;
            } else {
                counts[arm] = n;
                break;
            }
        }
    }
    Ok(counts)
}

/// Expected reward of the greedy knapsack heuristic on per-arm `(μ, ρ)`.
pub fn greedy_oracle_gain(means: &[(f64, f64)], budget: f64) -> Result<f64> {
    let counts = greedy_pull_counts(means, budget)?;
    Ok(bundle_gain(&counts, means))
}

/// Largest state count the exhaustive oracle will enumerate.
pub const ORACLE_STATE_LIMIT: u128 = 1_000_000;

fn multiset_count(k: usize, cap: u64) -> u128 {
    // C(cap + k, k): multisets of size <= cap over k arms
    let mut c: u128 = 1;
    for i in 1..=k as u128 {
        c = c * (cap as u128 + i) / i;
        if c > u64::MAX as u128 {
            return c;
        }
    }
    c
}

/// Exact optimum of the unbounded knapsack over pull multisets with
/// `Σ n_i ρ_i <= B`, by exhaustive enumeration. `pull_cap` must cover the
/// largest affordable number of pulls.
pub fn brute_force_optimal_gain(means: &[(f64, f64)], budget: f64, pull_cap: u64) -> Result<f64> {
    check_means(means)?;
    let cheapest = means.iter().map(|m| m.1).fold(f64::INFINITY, f64::min);
    let max_pulls = (budget / cheapest).floor().max(0.0) as u64;
    if pull_cap < max_pulls {
        return Err(BwkError::param(format!(
            "pull cap {pull_cap} is below the {max_pulls} affordable pulls"
        )));
    }
    let states = multiset_count(means.len(), pull_cap);
    if states > ORACLE_STATE_LIMIT {
        return Err(BwkError::OracleTooBig { states });
    }
    let mut counts = vec![0u64; means.len()];
    let mut best = 0.0f64;
    enumerate(means, budget, pull_cap, 0, 0, &mut counts, &mut best);
    Ok(best)
}

fn enumerate(
    means: &[(f64, f64)],
    budget: f64,
    cap: u64,
    arm: usize,
    used: u64,
    counts: &mut Vec<u64>,
    best: &mut f64,
) {
    if arm == means.len() {
        if bundle_cost(counts, means) <= budget {
            let g = bundle_gain(counts, means);
            if g > *best {
                *best = g;
            }
        }
        return;
    }
    let mut n = 0;
    loop {
        counts[arm] = n;
        if bundle_cost(&counts[..=arm], &means[..=arm]) > budget {
            break;
        }
        enumerate(means, budget, cap, arm + 1, used + n, counts, best);
        if used + n >= cap {
            break;
        }
        n += 1;
    }
    counts[arm] = 0;
}

/// `Σ_i Δ(i) N(i)` with `Δ(i) = e(i*) - e(i)` from the closed-form means.
pub fn stochastic_pseudo_regret(trace: &RunTrace, spec: &StochasticEnvSpec) -> Result<f64> {
    let (_, gaps) = spec.gaps();
    let mut counts = vec![0usize; spec.params.k];
    for r in &trace.rounds {
        spec.params.check_arm(r.arm)?;
        counts[r.arm] += 1;
    }
    Ok(gaps.iter().zip(&counts).map(|(g, n)| g * *n as f64).sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RegretMode {
    Stochastic,
    Adversarial,
}

/// Regret figures for one episode, or aggregated over several.
///
/// The headline figure is `mean`: pseudo-regret in stochastic mode,
/// reward-sum regret against the best fixed arm in adversarial mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretReport {
    pub mode: RegretMode,
    pub pseudo_regret: Option<f64>,
    pub reward_sum_regret: Option<f64>,
    pub efficiency_regret: Option<f64>,
    pub z_value: Option<f64>,
    pub n_episodes: usize,
    pub mean: f64,
    pub stderr: f64,
}

impl RegretReport {
    pub fn stochastic(trace: &RunTrace, spec: &StochasticEnvSpec) -> Result<Self> {
        let r = stochastic_pseudo_regret(trace, spec)?;
        Ok(RegretReport {
            mode: RegretMode::Stochastic,
            pseudo_regret: Some(r),
            reward_sum_regret: None,
            efficiency_regret: None,
            z_value: None,
            n_episodes: 1,
            mean: r,
            stderr: 0.0,
        })
    }

    /// Headline figure of a single-episode report.
    pub fn primary(&self) -> f64 {
        self.mean
    }
}

/// Reward-sum regret against the best fixed arm, plus the scaled
/// efficiency regret `z (Σ_{t≤T(i*)} e_t(i*) - Σ_{t≤τ} e_t(i_t))`.
///
/// `z = max(C(i*)/T(i*), total_cost/τ)` where `C(i*)` is what the hindsight
/// arm actually spent.
pub fn adversarial_regret(trace: &RunTrace, spec: &AdversarialMatrixSpec) -> Result<RegretReport> {
    let hindsight = hindsight_fixed_arms(spec)?;
    adversarial_regret_with(trace, &hindsight)
}

/// [`adversarial_regret`] with a precomputed hindsight report.
pub fn adversarial_regret_with(trace: &RunTrace, hindsight: &HindsightReport) -> Result<RegretReport> {
    if trace.tau == 0 {
        return Err(BwkError::EmptyTrace);
    }
    let reward_regret = hindsight.best_reward() - trace.total_reward;
    let star = &hindsight.arms[hindsight.best_efficiency_arm];
    let algo_rate = trace.total_cost / trace.tau as f64;
    let z = if star.rounds > 0 {
        (star.cost_sum / star.rounds as f64).max(algo_rate)
    } else {
        algo_rate
    };
    let eff_regret = z * (star.efficiency_sum - trace.efficiency_sum());
    Ok(RegretReport {
        mode: RegretMode::Adversarial,
        pseudo_regret: None,
        reward_sum_regret: Some(reward_regret),
        efficiency_regret: Some(eff_regret),
        z_value: Some(z),
        n_episodes: 1,
        mean: reward_regret,
        stderr: 0.0,
    })
}

/// `|T(i*) - τ|` between the hindsight efficiency arm and an episode.
pub fn stopping_time_gap(trace: &RunTrace, hindsight: &HindsightReport) -> usize {
    hindsight.arms[hindsight.best_efficiency_arm].rounds.abs_diff(trace.tau)
}

fn mean_of(values: impl Iterator<Item = f64>) -> Option<f64> {
    let v: Vec<f64> = values.collect();
    if v.is_empty() {
        None
    } else {
        Some(v.iter().sum::<f64>() / v.len() as f64)
    }
}

/// Mean and standard error (`sample std / sqrt(n)`) of each episode's
/// headline figure. Component fields become their means.
pub fn aggregate_regret(reports: &[RegretReport]) -> Result<RegretReport> {
    let first = reports.first().ok_or(BwkError::EmptyCollection)?;
    if reports.iter().any(|r| r.mode != first.mode) {
        return Err(BwkError::MixedModes);
    }
    let n = reports.len();
    let values: Vec<f64> = reports.iter().map(|r| r.mean).collect();
    let (mean, stderr) = mean_and_stderr(&values);
    let field = |f: fn(&RegretReport) -> Option<f64>| {
        if reports.iter().all(|r| f(r).is_some()) {
            mean_of(reports.iter().filter_map(f))
        } else {
            None
        }
    };
    Ok(RegretReport {
        mode: first.mode,
        pseudo_regret: field(|r| r.pseudo_regret),
        reward_sum_regret: field(|r| r.reward_sum_regret),
        efficiency_regret: field(|r| r.efficiency_regret),
        z_value: field(|r| r.z_value),
        n_episodes: n,
        mean,
        stderr,
    })
}

/// Sample mean and standard error; the error is 0 for a single value.
pub fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}
