//! Bandit environments: i.i.d. stochastic arms, oblivious adversarial
//! matrices, and the two lower-bound adversary constructions.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{BwkError, Result};
use crate::rng::RngStream;
use crate::types::{InstanceParams, Outcome};

/// A distribution on a bounded interval with a closed-form mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Distribution {
    PointMass { value: f64 },
    Uniform { low: f64, high: f64 },
    /// `high` with probability `p`, else `low`.
    Bernoulli { low: f64, high: f64, p: f64 },
}

impl Distribution {
    /// Bernoulli on `{0, 1}` with the given mean.
    pub fn bernoulli(mean: f64) -> Self {
        Distribution::Bernoulli {
            low: 0.0,
            high: 1.0,
            p: mean,
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Distribution::PointMass { value } => value,
            Distribution::Uniform { low, high } => 0.5 * (low + high),
            Distribution::Bernoulli { low, high, p } => low + p * (high - low),
        }
    }

    /// Smallest and largest values in the support.
    pub fn support(&self) -> (f64, f64) {
        match *self {
            Distribution::PointMass { value } => (value, value),
            Distribution::Uniform { low, high } => (low, high),
            Distribution::Bernoulli { low, high, p } => {
                if p == 0.0 {
                    (low, low)
                } else if p == 1.0 {
                    (high, high)
                } else {
                    (low, high)
                }
            }
        }
    }

    /// Draws one value. Every family consumes exactly one uniform, except
    /// point masses which consume none.
    pub fn sample(&self, rng: &mut RngStream) -> f64 {
        match *self {
            Distribution::PointMass { value } => value,
            Distribution::Uniform { low, high } => low + rng.next_f64() * (high - low),
            Distribution::Bernoulli { low, high, p } => {
                if rng.next_f64() < p {
                    high
                } else {
                    low
                }
            }
        }
    }

    fn validate(&self, lo: f64, hi: f64, what: &str) -> Result<()> {
        let ok_params = match *self {
            Distribution::PointMass { value } => value.is_finite(),
            Distribution::Uniform { low, high } => low.is_finite() && high.is_finite() && low <= high,
            Distribution::Bernoulli { low, high, p } => {
                low.is_finite() && high.is_finite() && low <= high && (0.0..=1.0).contains(&p)
            }
        };
        if !ok_params {
            return Err(BwkError::param(format!("malformed {what} distribution {self:?}")));
        }
        let (a, b) = self.support();
        if a < lo || b > hi {
            return Err(BwkError::param(format!(
                "{what} distribution {self:?} has support outside [{lo}, {hi}]"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArmSpec {
    pub reward: Distribution,
    pub cost: Distribution,
}

/// I.i.d. stochastic instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StochasticEnvSpec {
    pub params: InstanceParams,
    pub arms: Vec<ArmSpec>,
    /// Arm singled out by a generator, if any.
    #[serde(default)]
    pub designated_arm: Option<usize>,
}

impl StochasticEnvSpec {
    pub fn new(params: InstanceParams, arms: Vec<ArmSpec>) -> Result<Self> {
        let spec = StochasticEnvSpec {
            params,
            arms,
            designated_arm: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.arms.len() != self.params.k {
            return Err(BwkError::param(format!(
                "{} arm specs for K = {}",
                self.arms.len(),
                self.params.k
            )));
        }
        for arm in &self.arms {
            arm.reward.validate(0.0, 1.0, "reward")?;
            arm.cost.validate(self.params.c_min, self.params.c_max, "cost")?;
        }
        if let Some(a) = self.designated_arm {
            self.params.check_arm(a)?;
        }
        Ok(())
    }

    pub fn with_budget(&self, budget: f64) -> Result<Self> {
        let mut spec = self.clone();
        spec.params = self.params.with_budget(budget)?;
        Ok(spec)
    }

    /// One independent `(reward, cost)` draw for `arm`. The reward is drawn
    /// before the cost.
    pub fn step(&self, arm: usize, rng: &mut RngStream) -> Result<Outcome> {
        self.params.check_arm(arm)?;
        let spec = &self.arms[arm];
        let reward = spec.reward.sample(rng);
        let cost = spec.cost.sample(rng);
        Ok(Outcome { reward, cost })
    }

    pub fn mean_reward(&self, arm: usize) -> Result<f64> {
        self.params.check_arm(arm)?;
        Ok(self.arms[arm].reward.mean())
    }

    pub fn mean_cost(&self, arm: usize) -> Result<f64> {
        self.params.check_arm(arm)?;
        Ok(self.arms[arm].cost.mean())
    }

    /// `e(i) = μ(i)/ρ(i)`.
    pub fn true_efficiency(&self, arm: usize) -> Result<f64> {
        Ok(self.mean_reward(arm)? / self.mean_cost(arm)?)
    }

    pub fn efficiencies(&self) -> Vec<f64> {
        self.arms.iter().map(|a| a.reward.mean() / a.cost.mean()).collect()
    }

    /// Per-arm `(μ, ρ)` pairs.
    pub fn means(&self) -> Vec<(f64, f64)> {
        self.arms.iter().map(|a| (a.reward.mean(), a.cost.mean())).collect()
    }

    /// Best arm by true efficiency (lowest index on ties) and the gaps `Δ(i)`.
    pub fn gaps(&self) -> (usize, Vec<f64>) {
        let eff = self.efficiencies();
        let best = argmax(&eff);
        let gaps = eff.iter().map(|e| eff[best] - e).collect();
        (best, gaps)
    }
}

/// Oblivious adversary: all rewards and costs fixed up front.
///
/// Entries are stored round-major; round `t` (1-based) and arm `i` live at
/// index `(t - 1) * K + i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdversarialMatrixSpec {
    params: InstanceParams,
    horizon: usize,
    rewards: Vec<f64>,
    costs: Vec<f64>,
    designated_arm: Option<usize>,
}

impl AdversarialMatrixSpec {
    pub fn new(params: InstanceParams, horizon: usize, rewards: Vec<f64>, costs: Vec<f64>) -> Result<Self> {
        params.validate()?;
        let n = horizon * params.k;
        if rewards.len() != n || costs.len() != n {
            return Err(BwkError::param(format!(
                "matrix needs {n} entries ({horizon} rounds x {} arms), got {} rewards and {} costs",
                params.k,
                rewards.len(),
                costs.len()
            )));
        }
        let needed = (params.budget / params.c_min).ceil() as usize;
        if horizon < needed {
            return Err(BwkError::param(format!(
                "matrix horizon {horizon} is shorter than ceil(B/c_min) = {needed}"
            )));
        }
        for (idx, (r, c)) in rewards.iter().zip(&costs).enumerate() {
            Outcome::check_values(*r, *c, params.c_min, params.c_max).map_err(|e| {
                BwkError::InvalidOutcome(format!(
                    "round {}, arm {}: {e}",
                    idx / params.k + 1,
                    idx % params.k
                ))
            })?;
        }
        Ok(AdversarialMatrixSpec {
            params,
            horizon,
            rewards,
            costs,
            designated_arm: None,
        })
    }

    pub fn params(&self) -> &InstanceParams {
        &self.params
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn designated_arm(&self) -> Option<usize> {
        self.designated_arm
    }

    /// Pure lookup of round `t` (1-based) for `arm`.
    pub fn step(&self, t: usize, arm: usize) -> Result<Outcome> {
        if t == 0 || t > self.horizon {
            return Err(BwkError::RoundOutOfRange {
                t,
                horizon: self.horizon,
            });
        }
        self.params.check_arm(arm)?;
        let idx = (t - 1) * self.params.k + arm;
        Ok(Outcome {
            reward: self.rewards[idx],
            cost: self.costs[idx],
        })
    }

    /// Same matrix under a different budget; the horizon must still cover it.
    pub fn with_budget(&self, budget: f64) -> Result<Self> {
        let mut spec = AdversarialMatrixSpec::new(
            self.params.with_budget(budget)?,
            self.horizon,
            self.rewards.clone(),
            self.costs.clone(),
        )?;
        spec.designated_arm = self.designated_arm;
        Ok(spec)
    }

    /// Writes the `t,arm,reward,cost` CSV, round-major.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let io = |e: csv::Error| BwkError::Config(format!("CSV write failed: {e}"));
        w.write_record(["t", "arm", "reward", "cost"]).map_err(io)?;
        let k = self.params.k;
        for t in 1..=self.horizon {
            for arm in 0..k {
                let idx = (t - 1) * k + arm;
                w.write_record([
                    t.to_string(),
                    arm.to_string(),
                    self.rewards[idx].to_string(),
                    self.costs[idx].to_string(),
                ])
                .map_err(io)?;
            }
        }
        w.flush().map_err(|e| BwkError::Config(format!("CSV flush failed: {e}")))?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| BwkError::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    /// Loads a matrix CSV. `K` and the horizon are inferred from the rows;
    /// cost bounds default to the smallest and largest cost in the file.
    pub fn load_csv(path: &Path, budget: f64, cost_bounds: Option<(f64, f64)>) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| BwkError::io(path, e))?;
        let data = MatrixData::read(file, &path.display().to_string())?;
        data.into_spec(budget, cost_bounds)
    }
}

/// Raw contents of a matrix CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixData {
    pub k: usize,
    pub horizon: usize,
    pub rewards: Vec<f64>,
    pub costs: Vec<f64>,
}

#[derive(Deserialize)]
struct MatrixRow {
    t: usize,
    arm: usize,
    reward: f64,
    cost: f64,
}

impl MatrixData {
    /// Parses `t,arm,reward,cost` rows. Errors carry the 1-based file line.
    pub fn read<R: Read>(reader: R, source: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let parse_err = |line: u64, message: String| BwkError::Parse {
            path: source.to_string(),
            line,
            message,
        };
        let headers = rdr.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
        if headers.iter().collect::<Vec<_>>() != ["t", "arm", "reward", "cost"] {
            return Err(parse_err(1, format!("expected header t,arm,reward,cost, got {:?}", headers)));
        }

        let mut rows = Vec::new();
        for rec in rdr.deserialize::<MatrixRow>() {
            match rec {
                Ok(row) => rows.push(row),
                Err(e) => {
                    let line = e.position().map(|p| p.line()).unwrap_or(0);
                    return Err(parse_err(line, e.to_string()));
                }
            }
        }
        if rows.is_empty() {
            return Err(parse_err(1, "no data rows".into()));
        }

        // K is the number of leading rows of round 1.
        let k = rows.iter().take_while(|r| r.t == 1).count();
        if k == 0 || rows.len() % k != 0 {
            return Err(parse_err(2, format!("cannot infer K from {} rows", rows.len())));
        }
        let horizon = rows.len() / k;
        let mut rewards = Vec::with_capacity(rows.len());
        let mut costs = Vec::with_capacity(rows.len());
        for (idx, row) in rows.iter().enumerate() {
            let (t, arm) = (idx / k + 1, idx % k);
            if row.t != t || row.arm != arm {
                return Err(parse_err(
                    idx as u64 + 2,
                    format!("expected (t={t}, arm={arm}) in round-major order, got (t={}, arm={})", row.t, row.arm),
                ));
            }
            rewards.push(row.reward);
            costs.push(row.cost);
        }
        Ok(MatrixData {
            k,
            horizon,
            rewards,
            costs,
        })
    }

    pub fn into_spec(self, budget: f64, cost_bounds: Option<(f64, f64)>) -> Result<AdversarialMatrixSpec> {
        let (c_min, c_max) = cost_bounds.unwrap_or_else(|| {
            let lo = self.costs.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = self.costs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            (lo, hi)
        });
        let params = InstanceParams::new(self.k, budget, c_min, c_max)?;
        AdversarialMatrixSpec::new(params, self.horizon, self.rewards, self.costs)
    }
}

/// Any environment an episode can run against.
#[derive(Debug, Clone, PartialEq)]
pub enum Environment {
    Stochastic(StochasticEnvSpec),
    Adversarial(AdversarialMatrixSpec),
}

impl Environment {
    pub fn params(&self) -> &InstanceParams {
        match self {
            Environment::Stochastic(s) => &s.params,
            Environment::Adversarial(a) => a.params(),
        }
    }

    /// Last round the environment can serve, if bounded.
    pub fn horizon(&self) -> Option<usize> {
        match self {
            Environment::Stochastic(_) => None,
            Environment::Adversarial(a) => Some(a.horizon()),
        }
    }

    pub fn step(&self, t: usize, arm: usize, rng: &mut RngStream) -> Result<Outcome> {
        match self {
            Environment::Stochastic(s) => s.step(arm, rng),
            Environment::Adversarial(a) => a.step(t, arm),
        }
    }
}

pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// `ε = sqrt(K c_min / B)` for the Bernoulli lower-bound instance.
pub fn lower_bound_epsilon(params: &InstanceParams) -> f64 {
    (params.k as f64 * params.c_min / params.budget).sqrt()
}

/// Lower-bound adversary with point-mass costs at `c_min`: a uniformly
/// random arm gets Bernoulli rewards with mean `0.5 + ε`, all others mean
/// `0.5`, where `ε = sqrt(K c_min / B)`. Consumes one draw for the arm.
pub fn build_thm2_adversary(params: InstanceParams, rng: &mut RngStream) -> Result<StochasticEnvSpec> {
    params.validate()?;
    if params.c_max != 1.0 {
        return Err(BwkError::param(format!(
            "this construction requires c_max = 1, got {}",
            params.c_max
        )));
    }
    let eps = lower_bound_epsilon(&params);
    if 0.5 + eps > 1.0 {
        return Err(BwkError::BudgetTooSmallForLowerBound(eps));
    }
    let best = rng.below(params.k);
    let arms = (0..params.k)
        .map(|i| ArmSpec {
            reward: Distribution::bernoulli(if i == best { 0.5 + eps } else { 0.5 }),
            cost: Distribution::PointMass { value: params.c_min },
        })
        .collect();
    let mut spec = StochasticEnvSpec::new(params, arms)?;
    spec.designated_arm = Some(best);
    Ok(spec)
}

/// The switch round `t* = floor(B - B^α)` of the large-cost construction.
pub fn thm5_switch_round(alpha: f64, budget: f64) -> usize {
    (budget - budget.powf(alpha)).floor() as usize
}

/// Two-arm unbounded-cost adversary with `c_max = B^α`.
///
/// Up to `t*` both arms pay 1 for nothing. From `t*+1` the designated arm
/// pays 1 for reward 1; the other arm charges `B^α` for reward 0 at
/// `t*+1`, then behaves like the designated arm.
pub fn build_thm5_adversary(alpha: f64, budget: f64, optimal_arm: usize) -> Result<AdversarialMatrixSpec> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(BwkError::param(format!("alpha must lie in [0, 1], got {alpha}")));
    }
    if !(budget.is_finite() && budget >= 1.0) {
        return Err(BwkError::param(format!("need B^alpha >= 1, i.e. B >= 1, got B = {budget}")));
    }
    let k = 2;
    if optimal_arm >= k {
        return Err(BwkError::ArmOutOfRange { arm: optimal_arm, k });
    }
    let big_cost = budget.powf(alpha);
    let t_star = thm5_switch_round(alpha, budget);
    let params = InstanceParams::new(k, budget, 1.0, big_cost)?;
    let horizon = budget.ceil() as usize;
    let mut rewards = Vec::with_capacity(horizon * k);
    let mut costs = Vec::with_capacity(horizon * k);
    for t in 1..=horizon {
        for arm in 0..k {
            let (r, c) = if t <= t_star {
                (0.0, 1.0)
            } else if arm == optimal_arm || t > t_star + 1 {
                (1.0, 1.0)
            } else {
                (0.0, big_cost)
            };
            rewards.push(r);
            costs.push(c);
        }
    }
    let mut spec = AdversarialMatrixSpec::new(params, horizon, rewards, costs)?;
    spec.designated_arm = Some(optimal_arm);
    Ok(spec)
}

/// Large-cost construction with the designated arm drawn uniformly.
pub fn build_thm5_adversary_random(alpha: f64, budget: f64, rng: &mut RngStream) -> Result<AdversarialMatrixSpec> {
    let arm = rng.below(2);
    build_thm5_adversary(alpha, budget, arm)
}

/// Seeded non-stationary matrix family.
///
/// Arm `i` has Bernoulli rewards with mean
/// `clamp(base_means[π(i)] + amplitude * sin(2π t / period + φ_i), 0, 1)`
/// and costs uniform on `[c_min, c_max]`, where the permutation `π` and
/// phases `φ` are drawn from the rng before the matrix entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriftingMatrixConfig {
    pub base_means: Vec<f64>,
    pub amplitude: f64,
    pub period: f64,
    pub c_min: f64,
    pub c_max: f64,
}

impl DriftingMatrixConfig {
    pub fn validate(&self) -> Result<()> {
        if self.base_means.is_empty() {
            return Err(BwkError::param("drifting family needs at least one arm"));
        }
        if self.base_means.iter().any(|m| !(0.0..=1.0).contains(m)) {
            return Err(BwkError::param("base means must lie in [0, 1]"));
        }
        if !(self.amplitude >= 0.0 && self.period > 0.0) {
            return Err(BwkError::param("need amplitude >= 0 and period > 0"));
        }
        if !(self.c_min > 0.0 && self.c_min <= self.c_max) {
            return Err(BwkError::param("need 0 < c_min <= c_max"));
        }
        Ok(())
    }

    pub fn generate(&self, budget: f64, rng: &mut RngStream) -> Result<AdversarialMatrixSpec> {
        self.validate()?;
        let k = self.base_means.len();
        let params = InstanceParams::new(k, budget, self.c_min, self.c_max)?;
        let horizon = (budget / self.c_min).ceil() as usize;

        let mut perm: Vec<usize> = (0..k).collect();
        for i in (1..k).rev() {
            let j = rng.below(i + 1);
            perm.swap(i, j);
        }
        let phases: Vec<f64> = (0..k).map(|_| rng.next_f64() * std::f64::consts::TAU).collect();

        let mut rewards = Vec::with_capacity(horizon * k);
        let mut costs = Vec::with_capacity(horizon * k);
        for t in 1..=horizon {
            let angle = std::f64::consts::TAU * t as f64 / self.period;
            for arm in 0..k {
                let mean = (self.base_means[perm[arm]] + self.amplitude * (angle + phases[arm]).sin()).clamp(0.0, 1.0);
                let r = if rng.next_f64() < mean { 1.0 } else { 0.0 };
                let c = self.c_min + rng.next_f64() * (self.c_max - self.c_min);
                rewards.push(r);
                costs.push(c);
            }
        }
        AdversarialMatrixSpec::new(params, horizon, rewards, costs)
    }
}
