//! Domain types shared by environments, policies and evaluation.
//!
//! Arms are 0-based everywhere. Rounds are 1-based, matching the trace
//! files and the matrix CSV format.

use serde::{Deserialize, Serialize};

use crate::error::{BwkError, Result};

/// Tolerance used for the simplex check on probability vectors.
pub const SIMPLEX_TOL: f64 = 1e-9;

/// Size of a bandit-with-knapsack instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InstanceParams {
    /// Number of arms.
    pub k: usize,
    /// Total budget.
    pub budget: f64,
    pub c_min: f64,
    pub c_max: f64,
}

impl InstanceParams {
    pub fn new(k: usize, budget: f64, c_min: f64, c_max: f64) -> Result<Self> {
        let p = InstanceParams {
            k,
            budget,
            c_min,
            c_max,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(BwkError::param("K must be at least 1"));
        }
        if !(self.budget.is_finite() && self.budget > 0.0) {
            return Err(BwkError::param(format!("budget must be positive, got {}", self.budget)));
        }
        if !(self.c_min.is_finite() && self.c_max.is_finite() && self.c_min > 0.0 && self.c_min <= self.c_max) {
            return Err(BwkError::param(format!(
                "need 0 < c_min <= c_max, got c_min = {}, c_max = {}",
                self.c_min, self.c_max
            )));
        }
        Ok(())
    }

    /// Same instance with a different budget.
    pub fn with_budget(&self, budget: f64) -> Result<Self> {
        InstanceParams::new(self.k, budget, self.c_min, self.c_max)
    }

    /// Hard cap on the number of pull attempts in one episode: `ceil(B/c_min) + 1`.
    pub fn horizon_cap(&self) -> usize {
        (self.budget / self.c_min).ceil() as usize + 1
    }

    pub fn check_arm(&self, arm: usize) -> Result<()> {
        if arm >= self.k {
            Err(BwkError::ArmOutOfRange { arm, k: self.k })
        } else {
            Ok(())
        }
    }
}

/// Reward and cost observed for one pull.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub reward: f64,
    pub cost: f64,
}

impl Outcome {
    /// Builds an outcome, checking `reward ∈ [0,1]` and `cost ∈ [c_min, c_max]`.
    pub fn new(reward: f64, cost: f64, params: &InstanceParams) -> Result<Self> {
        Self::check_values(reward, cost, params.c_min, params.c_max)?;
        Ok(Outcome { reward, cost })
    }

    pub(crate) fn check_values(reward: f64, cost: f64, c_min: f64, c_max: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&reward) {
            return Err(BwkError::InvalidOutcome(format!("reward {reward} outside [0, 1]")));
        }
        if !(c_min..=c_max).contains(&cost) {
            return Err(BwkError::InvalidOutcome(format!(
                "cost {cost} outside [{c_min}, {c_max}]"
            )));
        }
        Ok(())
    }

    /// Per-round efficiency `reward / cost`.
    pub fn efficiency(&self) -> f64 {
        self.reward / self.cost
    }
}

/// A probability distribution over the K arms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ProbVector(Vec<f64>);

impl ProbVector {
    /// Validates nonnegativity and that the entries sum to 1 within [`SIMPLEX_TOL`].
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(BwkError::EmptyCollection);
        }
        if let Some(bad) = probs.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
            return Err(BwkError::InvalidProbVector(format!("entry {bad} is not a nonnegative number")));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(BwkError::InvalidProbVector(format!("entries sum to {sum}")));
        }
        Ok(ProbVector(probs))
    }

    pub fn uniform(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(BwkError::EmptyCollection);
        }
        Ok(ProbVector(vec![1.0 / k as f64; k]))
    }

    /// Point mass on `arm`.
    pub fn point_mass(k: usize, arm: usize) -> Result<Self> {
        if arm >= k {
            return Err(BwkError::ArmOutOfRange { arm, k });
        }
        let mut v = vec![0.0; k];
        v[arm] = 1.0;
        Ok(ProbVector(v))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, arm: usize) -> Option<f64> {
        self.0.get(arm).copied()
    }

    /// Inverse-CDF sampling from a uniform draw `u ∈ [0, 1)`.
    ///
    /// Rounding can leave the cumulative sum just below `u`; the last arm
    /// with positive mass is returned in that case.
    pub fn sample_with(&self, u: f64) -> usize {
        let mut acc = 0.0;
        for (i, p) in self.0.iter().enumerate() {
            acc += p;
            if u < acc {
                return i;
            }
        }
        self.0.iter().rposition(|p| *p > 0.0).unwrap_or(0)
    }
}

impl std::ops::Index<usize> for ProbVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Running budget. Affordability is decided on the accumulated spend so
/// that `total_cost <= B` holds exactly, with no drift from repeated
/// subtraction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Budget {
    total: f64,
    spent: f64,
}

impl Budget {
    pub fn new(total: f64) -> Self {
        Budget { total, spent: 0.0 }
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn spent(&self) -> f64 {
        self.spent
    }

    pub fn remaining(&self) -> f64 {
        self.total - self.spent
    }

    pub fn can_afford(&self, cost: f64) -> bool {
        self.spent + cost <= self.total
    }

    /// Pays `cost` if affordable. Returns `false` (and pays nothing) otherwise.
    pub fn try_spend(&mut self, cost: f64) -> bool {
        if self.can_afford(cost) {
            self.spent += cost;
            true
        } else {
            false
        }
    }

    pub fn is_exhausted(&self) -> bool {
        self.spent >= self.total
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Termination {
    BudgetExhausted,
    HorizonCap,
}

/// One completed round of an episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub t: usize,
    pub arm: usize,
    pub probs: ProbVector,
    pub outcome: Outcome,
    pub budget_after: f64,
}

/// The last pull of an episode whose cost exceeded the remaining budget.
/// Neither its reward nor its cost counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AbortedPull {
    pub arm: usize,
    pub outcome: Outcome,
}

/// Complete record of one episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub budget: f64,
    pub rounds: Vec<RoundRecord>,
    pub terminated_by: Termination,
    pub aborted_pull: Option<AbortedPull>,
    pub total_reward: f64,
    pub total_cost: f64,
    pub tau: usize,
}

impl RunTrace {
    /// Number of completed pulls of each arm.
    pub fn pull_counts(&self, k: usize) -> Vec<usize> {
        let mut counts = vec![0; k];
        for r in &self.rounds {
            counts[r.arm] += 1;
        }
        counts
    }

    /// Sum of per-round efficiencies `r_t(i_t)/c_t(i_t)` over completed rounds.
    pub fn efficiency_sum(&self) -> f64 {
        self.rounds.iter().map(|r| r.outcome.efficiency()).sum()
    }
}
