//! Shared fixtures for the criterion benchmarks.

use bwk_core::{ArmSpec, Distribution, InstanceParams, StochasticEnvSpec};

/// Five Bernoulli arms with costs in `[0.25, 1]`.
pub fn five_arm_instance(budget: f64) -> StochasticEnvSpec {
    let arms = [(0.5, 0.25), (0.9, 0.5), (0.6, 0.5), (0.6, 0.75), (0.3, 1.0)]
        .into_iter()
        .map(|(mu, c)| ArmSpec {
            reward: Distribution::bernoulli(mu),
            cost: Distribution::PointMass { value: c },
        })
        .collect();
    let params = InstanceParams::new(5, budget, 0.25, 1.0).expect("valid instance");
    StochasticEnvSpec::new(params, arms).expect("valid arms")
}

/// Random knapsack instance with `k` arms and costs in `[0.25, 1]`.
pub fn knapsack_means(k: usize, seed: u64) -> Vec<(f64, f64)> {
    let mut rng = bwk_core::RngStream::new(seed, 0);
    (0..k).map(|_| (rng.next_f64(), 0.25 + 0.75 * rng.next_f64())).collect()
}
