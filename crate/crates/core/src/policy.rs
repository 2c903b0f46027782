//! Budgeted bandit policies as select/update state machines.
//!
//! Every policy owns its [`Budget`]. A pull whose cost exceeds what is
//! left ends the episode without paying or collecting anything, and a
//! policy whose budget reaches exactly zero stops as well.

use serde::{Deserialize, Serialize};

use crate::error::{BwkError, Result};
use crate::numeric::normalized_probs_from_log_weights;
use crate::rng::RngStream;
use crate::types::{Budget, InstanceParams, Outcome, ProbVector};

/// Arm chosen at a round together with the distribution it was drawn from.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub arm: usize,
    pub probs: ProbVector,
}

/// What happened to a pull handed to [`Policy::update`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Step {
    /// Cost paid, reward collected.
    Paid,
    /// Cost exceeded the remaining budget; the episode is over.
    Aborted,
}

pub trait Policy: Send {
    fn name(&self) -> &'static str;

    fn select(&mut self, rng: &mut RngStream) -> Result<Selection>;

    fn update(&mut self, selection: &Selection, outcome: Outcome) -> Result<Step>;

    fn budget(&self) -> &Budget;

    fn is_terminated(&self) -> bool;
}

/// Pays for a pull or terminates. Shared by every policy.
fn settle(budget: &mut Budget, terminated: &mut bool, cost: f64) -> Step {
    if !budget.try_spend(cost) {
        *terminated = true;
        return Step::Aborted;
    }
    if budget.is_exhausted() {
        *terminated = true;
    }
    Step::Paid
}

fn check_selection(k: usize, selection: &Selection) -> Result<f64> {
    if selection.probs.len() != k {
        return Err(BwkError::InvalidProbVector(format!(
            "expected {k} entries, got {}",
            selection.probs.len()
        )));
    }
    let p = selection
        .probs
        .get(selection.arm)
        .ok_or(BwkError::ArmOutOfRange { arm: selection.arm, k })?;
    if p <= 0.0 {
        return Err(BwkError::ImpossibleSelection(selection.arm));
    }
    Ok(p)
}

// ---------------------------------------------------------------------------
// EXP3.BwK
// ---------------------------------------------------------------------------

/// Exploration rate used by default:
/// `min(1, sqrt(c_min K ln K / (B(e-1) + K(e-2))))`, and 0 for a single arm.
pub fn exp3bwk_default_gamma(params: &InstanceParams) -> f64 {
    let k = params.k as f64;
    let e = std::f64::consts::E;
    let denom = params.budget * (e - 1.0) + k * (e - 2.0);
    (params.c_min * k * k.ln() / denom).sqrt().min(1.0)
}

/// The simpler rate `sqrt(c_min K ln K / (B(e-1)))`, clamped to 1. The two
/// agree as `B` grows.
pub fn exp3bwk_asymptotic_gamma(params: &InstanceParams) -> f64 {
    let k = params.k as f64;
    (params.c_min * k * k.ln() / (params.budget * (std::f64::consts::E - 1.0)))
        .sqrt()
        .min(1.0)
}

/// Exponential weights over per-unit-cost reward estimates, mixed with
/// uniform exploration `γ/K`. Weights are kept in log domain.
#[derive(Debug, Clone)]
pub struct Exp3Bwk {
    params: InstanceParams,
    gamma: f64,
    log_weights: Vec<f64>,
    budget: Budget,
    t: usize,
    terminated: bool,
}

impl Exp3Bwk {
    pub fn new(params: InstanceParams, gamma_override: Option<f64>) -> Result<Self> {
        params.validate()?;
        let gamma = match gamma_override {
            Some(g) if g > 0.0 && g <= 1.0 => g,
            Some(g) => return Err(BwkError::param(format!("gamma must lie in (0, 1], got {g}"))),
            None => exp3bwk_default_gamma(&params),
        };
        Ok(Exp3Bwk {
            params,
            gamma,
            log_weights: vec![0.0; params.k],
            budget: Budget::new(params.budget),
            t: 1,
            terminated: false,
        })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    /// Round about to be played (1-based).
    pub fn round(&self) -> usize {
        self.t
    }

    /// `p_t(i) = (1-γ) w_t(i)/W_t + γ/K`.
    pub fn probabilities(&self) -> Result<ProbVector> {
        let k = self.params.k as f64;
        let w = normalized_probs_from_log_weights(&self.log_weights)?;
        let probs = w
            .as_slice()
            .iter()
            .map(|p| (1.0 - self.gamma) * p + self.gamma / k)
            .collect();
        ProbVector::new(probs)
    }

    /// Log-weight increment `γ c_min ê / K` for the pulled arm, with
    /// `ê = r / (p c)`.
    pub fn weight_increment(&self, prob: f64, outcome: &Outcome) -> f64 {
        let estimate = outcome.reward / (prob * outcome.cost);
        self.gamma * self.params.c_min * estimate / self.params.k as f64
    }
}

impl Policy for Exp3Bwk {
    fn name(&self) -> &'static str {
        "exp3_bwk"
    }

    fn select(&mut self, rng: &mut RngStream) -> Result<Selection> {
        if self.terminated {
            return Err(BwkError::EpisodeOver);
        }
        let probs = self.probabilities()?;
        let arm = probs.sample_with(rng.next_f64());
        Ok(Selection { arm, probs })
    }

    fn update(&mut self, selection: &Selection, outcome: Outcome) -> Result<Step> {
        if self.terminated {
            return Err(BwkError::EpisodeOver);
        }
        let p = check_selection(self.params.k, selection)?;
        let step = settle(&mut self.budget, &mut self.terminated, outcome.cost);
        if step == Step::Paid {
            self.log_weights[selection.arm] += self.weight_increment(p, &outcome);
            self.t += 1;
        }
        Ok(step)
    }

    fn budget(&self) -> &Budget {
        &self.budget
    }

    fn is_terminated(&self) -> bool {
        self.terminated
    }
}

// ---------------------------------------------------------------------------
// EXP3++.BwK
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Phase {
    InitSweep,
    Main,
}

/// Tuning of [`Exp3PlusPlusBwk`]. `None` means the default derived from
/// `c_min`: `β = 256 / c_min²`, `λ = c_min`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Exp3PlusPlusConfig {
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub beta: Option<f64>,
    #[serde(default)]
    pub lambda: Option<f64>,
}

fn default_alpha() -> f64 {
    3.0
}

impl Default for Exp3PlusPlusConfig {
    fn default() -> Self {
        Exp3PlusPlusConfig {
            alpha: default_alpha(),
            beta: None,
            lambda: None,
        }
    }
}

impl Exp3PlusPlusConfig {
    /// Fills `beta` and `lambda` from `c_min`.
    pub fn resolved(&self, c_min: f64) -> Exp3PlusPlusConfig {
        Exp3PlusPlusConfig {
            alpha: self.alpha,
            beta: Some(self.beta.unwrap_or(256.0 / (c_min * c_min))),
            lambda: Some(self.lambda.unwrap_or(c_min)),
        }
    }
}

/// Everything computed to pick an arm at one round of the main phase.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedDistribution {
    pub gamma: f64,
    pub ucb: Vec<f64>,
    pub lcb: Vec<f64>,
    pub gaps: Vec<f64>,
    pub epsilon: Vec<f64>,
    /// Exponential-weights part `p_t`.
    pub weights: ProbVector,
    /// Sampling distribution `p̃_t`.
    pub mixed: ProbVector,
}

/// Radius `(1 + 1/λ) η / (λ - η)`, or `None` when `η >= λ` and the bound
/// is vacuous.
pub fn confidence_radius(eta: f64, lambda: f64) -> Option<f64> {
    if eta >= lambda {
        None
    } else {
        Some((1.0 + 1.0 / lambda) * eta / (lambda - eta))
    }
}

/// `Δ̂(i) = max(0, max_{j≠i} lcb(j) - ucb(i))`; zero for a single arm.
pub fn gap_estimates(ucb: &[f64], lcb: &[f64]) -> Result<Vec<f64>> {
    if ucb.len() != lcb.len() {
        return Err(BwkError::param("ucb and lcb lengths differ"));
    }
    let k = ucb.len();
    Ok((0..k)
        .map(|i| {
            let best_other = (0..k)
                .filter(|&j| j != i)
                .map(|j| lcb[j])
                .fold(f64::NEG_INFINITY, f64::max);
            (best_other - ucb[i]).max(0.0)
        })
        .collect())
}

/// Exponential weights over importance-weighted losses with a
/// gap-driven exploration term fed by confidence bounds on each arm's
/// efficiency.
#[derive(Debug, Clone)]
pub struct Exp3PlusPlusBwk {
    params: InstanceParams,
    alpha: f64,
    beta: f64,
    lambda: f64,
    cum_loss: Vec<f64>,
    pull_count: Vec<u64>,
    reward_sum: Vec<f64>,
    cost_sum: Vec<f64>,
    budget: Budget,
    t: usize,
    phase: Phase,
    terminated: bool,
}

impl Exp3PlusPlusBwk {
    pub fn new(params: InstanceParams, config: Exp3PlusPlusConfig) -> Result<Self> {
        params.validate()?;
        let needed = params.k as f64 * params.c_max;
        if params.budget < needed {
            return Err(BwkError::BudgetBelowInitSweep {
                budget: params.budget,
                needed,
            });
        }
        let cfg = config.resolved(params.c_min);
        let (alpha, beta, lambda) = (cfg.alpha, cfg.beta.unwrap(), cfg.lambda.unwrap());
        if alpha.is_nan() || alpha < 3.0 {
            return Err(BwkError::param(format!("alpha must be at least 3, got {alpha}")));
        }
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(BwkError::param(format!("beta must be positive, got {beta}")));
        }
        if !(lambda > 0.0 && lambda <= params.c_min) {
            return Err(BwkError::param(format!(
                "lambda must lie in (0, c_min = {}], got {lambda}",
                params.c_min
            )));
        }
        let k = params.k;
        Ok(Exp3PlusPlusBwk {
            params,
            alpha,
            beta,
            lambda,
            cum_loss: vec![0.0; k],
            pull_count: vec![0; k],
            reward_sum: vec![0.0; k],
            cost_sum: vec![0.0; k],
            budget: Budget::new(params.budget),
            t: 1,
            phase: Phase::InitSweep,
            terminated: false,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    /// Round about to be played (1-based, counting the initial sweep).
    pub fn round(&self) -> usize {
        self.t
    }

    pub fn pull_counts(&self) -> &[u64] {
        &self.pull_count
    }

    pub fn cumulative_losses(&self) -> &[f64] {
        &self.cum_loss
    }

    /// Empirical efficiencies `r̄(i) / c̄(i)`.
    pub fn empirical_efficiencies(&self) -> Vec<f64> {
        self.reward_sum
            .iter()
            .zip(&self.cost_sum)
            .map(|(r, c)| if *c > 0.0 { r / c } else { 0.0 })
            .collect()
    }

    /// `η_t(i) = sqrt(α ln(K^{1/α} t) / (2 N(i)))`.
    pub fn eta(&self, arm: usize) -> f64 {
        let k = self.params.k as f64;
        let log_term = k.ln() / self.alpha + (self.t as f64).ln();
        (self.alpha * log_term / (2.0 * self.pull_count[arm] as f64)).sqrt()
    }

    /// Upper and lower confidence bounds on each arm's efficiency, clamped
    /// to `[0, 1/c_min]`.
    pub fn confidence_bounds(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        if self.phase != Phase::Main {
            return Err(BwkError::param("confidence bounds need every arm pulled once"));
        }
        let ceiling = 1.0 / self.params.c_min;
        let eff = self.empirical_efficiencies();
        let mut ucb = Vec::with_capacity(self.params.k);
        let mut lcb = Vec::with_capacity(self.params.k);
        for (arm, e) in eff.iter().enumerate() {
            match confidence_radius(self.eta(arm), self.lambda) {
                Some(r) => {
                    ucb.push(ceiling.min(e + r));
                    lcb.push((e - r).max(0.0));
                }
                None => {
                    ucb.push(ceiling);
                    lcb.push(0.0);
                }
            }
        }
        Ok((ucb, lcb))
    }

    /// The sampling distribution for the current round of the main phase.
    pub fn mixed_distribution(&self) -> Result<MixedDistribution> {
        let (ucb, lcb) = self.confidence_bounds()?;
        let gaps = gap_estimates(&ucb, &lcb)?;
        let k = self.params.k as f64;
        let t = self.t as f64;
        let ln_k = k.ln();
        let ln_t = t.ln();

        let gamma = 0.5 * self.params.c_min * (ln_k / (t * k)).sqrt();
        let log_w: Vec<f64> = self.cum_loss.iter().map(|l| -gamma * l).collect();
        let weights = normalized_probs_from_log_weights(&log_w)?;

        let cap = (1.0 / (2.0 * k)).min(0.5 * (ln_k / t).sqrt());
        let epsilon: Vec<f64> = gaps
            .iter()
            .map(|g| {
                let delta = if *g > 0.0 {
                    self.beta * ln_t / (t * g * g)
                } else {
                    f64::INFINITY
                };
                cap.min(delta)
            })
            .collect();
        let eps_total: f64 = epsilon.iter().sum();
        let mixed = weights
            .as_slice()
            .iter()
            .zip(&epsilon)
            .map(|(p, e)| (1.0 - eps_total) * p + e)
            .collect();
        Ok(MixedDistribution {
            gamma,
            ucb,
            lcb,
            gaps,
            epsilon,
            weights,
            mixed: ProbVector::new(mixed)?,
        })
    }

    /// Loss estimate `1/(c_min p̃) - r/(p̃ c)` for the pulled arm.
    pub fn loss_estimate(&self, prob: f64, outcome: &Outcome) -> f64 {
        1.0 / (self.params.c_min * prob) - outcome.reward / (prob * outcome.cost)
    }
}

impl Policy for Exp3PlusPlusBwk {
    fn name(&self) -> &'static str {
        "exp3pp_bwk"
    }

    fn select(&mut self, rng: &mut RngStream) -> Result<Selection> {
        if self.terminated {
            return Err(BwkError::EpisodeOver);
        }
        match self.phase {
            Phase::InitSweep => {
                let arm = self.t - 1;
                Ok(Selection {
                    arm,
                    probs: ProbVector::point_mass(self.params.k, arm)?,
                })
            }
            Phase::Main => {
                let dist = self.mixed_distribution()?;
                let arm = dist.mixed.sample_with(rng.next_f64());
                Ok(Selection { arm, probs: dist.mixed })
            }
        }
    }

    fn update(&mut self, selection: &Selection, outcome: Outcome) -> Result<Step> {
        if self.terminated {
            return Err(BwkError::EpisodeOver);
        }
        let p = check_selection(self.params.k, selection)?;
        let arm = selection.arm;
        if self.phase == Phase::InitSweep && arm != self.t - 1 {
            return Err(BwkError::param(format!(
                "initial sweep expects arm {} at round {}, got {arm}",
                self.t - 1,
                self.t
            )));
        }
        let step = settle(&mut self.budget, &mut self.terminated, outcome.cost);
        if step == Step::Aborted {
            return Ok(step);
        }
        if self.phase == Phase::Main {
            self.cum_loss[arm] += self.loss_estimate(p, &outcome);
        }
        self.pull_count[arm] += 1;
        self.reward_sum[arm] += outcome.reward;
        self.cost_sum[arm] += outcome.cost;
        self.t += 1;
        if self.phase == Phase::InitSweep && self.t > self.params.k {
            self.phase = Phase::Main;
        }
        Ok(step)
    }

    fn budget(&self) -> &Budget {
        &self.budget
    }

    fn is_terminated(&self) -> bool {
        self.terminated
    }
}

// ---------------------------------------------------------------------------
// Baselines
// ---------------------------------------------------------------------------

/// Always plays the same arm.
#[derive(Debug, Clone)]
pub struct FixedArm {
    k: usize,
    arm: usize,
    budget: Budget,
    terminated: bool,
}

impl FixedArm {
    pub fn new(params: InstanceParams, arm: usize) -> Result<Self> {
        params.validate()?;
        params.check_arm(arm)?;
        Ok(FixedArm {
            k: params.k,
            arm,
            budget: Budget::new(params.budget),
            terminated: false,
        })
    }
}

impl Policy for FixedArm {
    fn name(&self) -> &'static str {
        "fixed_arm"
    }

    fn select(&mut self, _rng: &mut RngStream) -> Result<Selection> {
        if self.terminated {
            return Err(BwkError::EpisodeOver);
        }
        Ok(Selection {
            arm: self.arm,
            probs: ProbVector::point_mass(self.k, self.arm)?,
        })
    }

    fn update(&mut self, selection: &Selection, outcome: Outcome) -> Result<Step> {
        if self.terminated {
            return Err(BwkError::EpisodeOver);
        }
        check_selection(self.k, selection)?;
        Ok(settle(&mut self.budget, &mut self.terminated, outcome.cost))
    }

    fn budget(&self) -> &Budget {
        &self.budget
    }

    fn is_terminated(&self) -> bool {
        self.terminated
    }
}

/// Picks an arm uniformly at random every round.
#[derive(Debug, Clone)]
pub struct UniformArm {
    k: usize,
    budget: Budget,
    terminated: bool,
}

impl UniformArm {
    pub fn new(params: InstanceParams) -> Result<Self> {
        params.validate()?;
        Ok(UniformArm {
            k: params.k,
            budget: Budget::new(params.budget),
            terminated: false,
        })
    }
}

impl Policy for UniformArm {
    fn name(&self) -> &'static str {
        "uniform"
    }

    fn select(&mut self, rng: &mut RngStream) -> Result<Selection> {
        if self.terminated {
            return Err(BwkError::EpisodeOver);
        }
        let probs = ProbVector::uniform(self.k)?;
        let arm = probs.sample_with(rng.next_f64());
        Ok(Selection { arm, probs })
    }

    fn update(&mut self, selection: &Selection, outcome: Outcome) -> Result<Step> {
        if self.terminated {
            return Err(BwkError::EpisodeOver);
        }
        check_selection(self.k, selection)?;
        Ok(settle(&mut self.budget, &mut self.terminated, outcome.cost))
    }

    fn budget(&self) -> &Budget {
        &self.budget
    }

    fn is_terminated(&self) -> bool {
        self.terminated
    }
}

/// Serializable policy choice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PolicyConfig {
    Exp3Bwk {
        #[serde(default)]
        gamma: Option<f64>,
    },
    Exp3ppBwk {
        #[serde(default = "default_alpha")]
        alpha: f64,
        #[serde(default)]
        beta: Option<f64>,
        #[serde(default)]
        lambda: Option<f64>,
    },
    FixedArm {
        arm: usize,
    },
    Uniform,
}

impl PolicyConfig {
    pub fn label(&self) -> &'static str {
        match self {
            PolicyConfig::Exp3Bwk { .. } => "exp3_bwk",
            PolicyConfig::Exp3ppBwk { .. } => "exp3pp_bwk",
            PolicyConfig::FixedArm { .. } => "fixed_arm",
            PolicyConfig::Uniform => "uniform",
        }
    }

    pub fn build(&self, params: InstanceParams) -> Result<Box<dyn Policy>> {
        Ok(match *self {
            PolicyConfig::Exp3Bwk { gamma } => Box::new(Exp3Bwk::new(params, gamma)?),
            PolicyConfig::Exp3ppBwk { alpha, beta, lambda } => {
                Box::new(Exp3PlusPlusBwk::new(params, Exp3PlusPlusConfig { alpha, beta, lambda })?)
            }
            PolicyConfig::FixedArm { arm } => Box::new(FixedArm::new(params, arm)?),
            PolicyConfig::Uniform => Box::new(UniformArm::new(params)?),
        })
    }

    /// Same policy with the `c_min`-derived defaults made explicit. The
    /// EXP3.BwK rate depends on the budget and stays as configured.
    pub fn resolved(&self, params: &InstanceParams) -> PolicyConfig {
        match *self {
            PolicyConfig::Exp3ppBwk { alpha, beta, lambda } => {
                let r = Exp3PlusPlusConfig { alpha, beta, lambda }.resolved(params.c_min);
                PolicyConfig::Exp3ppBwk {
                    alpha: r.alpha,
                    beta: r.beta,
                    lambda: r.lambda,
                }
            }
            other => other,
        }
    }
}
