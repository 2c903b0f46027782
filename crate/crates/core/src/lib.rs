//! Budgeted multi-armed bandits ("bandits with knapsacks").
//!
//! Policies ([`Exp3Bwk`], [`Exp3PlusPlusBwk`] and two baselines) are
//! select/update state machines that own their budget. Environments are
//! either stochastic (per-arm reward and cost distributions) or adversarial
//! (a fixed reward/cost matrix). [`eval`] computes hindsight regret and the
//! knapsack oracles; [`harness`] runs seeded budget sweeps and writes CSV.

pub mod env;
pub mod error;
pub mod eval;
pub mod harness;
pub mod numeric;
pub mod policy;
pub mod rng;
pub mod types;

pub use env::{
    build_thm2_adversary, build_thm5_adversary, build_thm5_adversary_random, AdversarialMatrixSpec, ArmSpec,
    Distribution, DriftingMatrixConfig, Environment, StochasticEnvSpec,
};
pub use error::{BwkError, Result};
pub use eval::{adversarial_regret, hindsight_fixed_arms, RegretMode, RegretReport};
pub use harness::{fit_loglog_slope, run_episode, run_experiment, ExperimentConfig, SummaryRow};
pub use policy::{Exp3Bwk, Exp3PlusPlusBwk, Exp3PlusPlusConfig, FixedArm, Policy, PolicyConfig, UniformArm};
pub use rng::RngStream;
pub use types::{Budget, InstanceParams, Outcome, ProbVector, RunTrace, Termination};
