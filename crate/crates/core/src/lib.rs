//! Trust-region-guided clipping for proximal policy optimization.
//!
//! - [`clip_solver`]: KL-constrained ratio ranges for discrete and Gaussian policies.
//! - [`clip_table`]: precomputed ranges over a probability grid with interpolated lookup.
//! - [`bandit_dynamics`]: exact exploration analysis of simplified policy iteration on bandits.
//! - [`policy_opt`]: gradient-based bandit experiments and trap-rate statistics.
//! - [`envs`]: small built-in environments.
//! - [`ppo_trainer`]: actor-critic PPO / adaptive-range trainer with diagnostics.
//! - [`report`]: CSV / JSON artifacts and run manifests.

pub mod bandit_dynamics;
pub mod clip_solver;
pub mod clip_table;
pub mod envs;
pub mod error;
pub mod policy_opt;
pub mod ppo_trainer;
pub mod report;

pub use error::{Error, Result};
