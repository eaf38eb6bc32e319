//! Actor-critic trainer for PPO, TRGPPO and the PPO-0.6 / PPO-entropy baselines.

mod config;
mod mlp;
mod model;
mod rollout;
mod update;

pub use config::{MethodVariant, RangeSource, TrainerConfig, VariantTag};
pub use mlp::{param_count, Mlp, Trace};
pub use model::{ActorCritic, Dist};
pub use rollout::{collect_rollout, RolloutBatch};
pub use update::{
    bound_constant, compute_ranges, diagnostics, empirical_bound, policy_objective, update_policy, value_loss,
    BoundTerms, DiagnosticsRecord, Optimizers, RangeBackend, RangeSet, UpdateSettings,
};

use crate::clip_table::{ClipTable, ClipTableSpec};
use crate::envs::make_env;
use crate::error::{Error, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::time::Instant;

/// Budget of the shared lookup table. Batch budgets differ; lookups rescale.
pub const TABLE_DELTA: f64 = 0.03;

/// Builds the lookup table used by [`RangeSource::Table`].
pub fn default_table(config: &TrainerConfig) -> Result<ClipTable> {
    ClipTable::build(ClipTableSpec::new(TABLE_DELTA), &config.solver)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationReturn {
    pub iteration: usize,
    /// Environment steps taken so far, including this iteration's rollout.
    pub timesteps: usize,
    /// Mean return of the episodes that finished in this rollout, if any.
    pub mean_return: Option<f64>,
    pub episodes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingRun {
    pub config: TrainerConfig,
    pub returns: Vec<IterationReturn>,
    pub diagnostics: Vec<DiagnosticsRecord>,
    /// Set when an iteration aborted; the series stop there.
    pub failure: Option<String>,
    /// Wall-clock spent computing clipping ranges.
    pub range_seconds: f64,
    pub total_seconds: f64,
}

impl TrainingRun {
    /// Mean episode return over the last tenth of the iterations (at least one).
    pub fn final_return(&self) -> Option<f64> {
        let n = self.returns.len();
        if n == 0 {
            return None;
        }
        let tail = &self.returns[n - (n / 10).max(1)..];
        let values: Vec<f64> = tail.iter().filter_map(|r| r.mean_return).collect();
        if values.is_empty() {
            None
        } else {
            Some(values.iter().sum::<f64>() / values.len() as f64)
        }
    }

    pub fn mean_entropy(&self) -> f64 {
        mean(self.diagnostics.iter().map(|d| d.entropy))
    }

    pub fn max_kl_series(&self) -> Vec<f64> {
        self.diagnostics.iter().map(|d| d.max_kl).collect()
    }
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

/// Runs one seeded training run. `table` is only used with
/// [`RangeSource::Table`]; one is built when missing.
pub fn run_training(config: &TrainerConfig, table: Option<&ClipTable>) -> Result<TrainingRun> {
    config.validate()?;
    let start = Instant::now();
    let owned;
    let backend = match (config.range_source, table) {
        (RangeSource::Solver, _) => RangeBackend::Solver,
        (RangeSource::Table, Some(t)) => RangeBackend::Table(t),
        (RangeSource::Table, None) => {
            owned = default_table(config)?;
            RangeBackend::Table(&owned)
        }
    };
    let mut env = make_env(&config.env)?;
    let spec = env.spec().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut model = ActorCritic::new(spec.obs_dim, &spec.action_space, &config.hidden, &mut rng);
    if let Some(bias) = &config.init_bias {
        model.set_policy_bias(bias)?;
    }
    if config.zero_value_init {
        model.zero_value_head();
    }
    let mut optimizers = Optimizers::adam(&model, config.learning_rate);
    let settings = UpdateSettings {
        epochs: config.epochs,
        minibatches: config.minibatches,
        max_grad_norm: config.max_grad_norm,
        gamma: config.gamma,
    };

    let mut run = TrainingRun {
        config: config.clone(),
        returns: Vec::with_capacity(config.iterations),
        diagnostics: Vec::with_capacity(config.iterations),
        failure: None,
        range_seconds: 0.0,
        total_seconds: 0.0,
    };
    for iteration in 0..config.iterations {
        let step = (|| -> Result<(RolloutBatch, DiagnosticsRecord)> {
            let batch = collect_rollout(
                env.as_mut(),
                &model,
                config.rollout_steps,
                config.gamma,
                config.lambda,
                &mut rng,
            )?;
            let t0 = Instant::now();
            let ranges = compute_ranges(
                &batch,
                &batch.normalized_advantages(),
                &config.variant,
                backend,
                &config.solver,
            )?;
            let range_seconds = t0.elapsed().as_secs_f64();
            let mut d = update_policy(
                &mut model,
                &mut optimizers,
                &batch,
                &ranges,
                &config.variant,
                &settings,
                &mut rng,
            )?;
            d.iteration = iteration;
            d.range_seconds = range_seconds;
            Ok((batch, d))
        })();
        match step {
            Ok((batch, d)) => {
                run.range_seconds += d.range_seconds;
                run.returns.push(IterationReturn {
                    iteration,
                    timesteps: (iteration + 1) * config.rollout_steps,
                    mean_return: batch.mean_episode_return(),
                    episodes: batch.episode_returns.len(),
                });
                run.diagnostics.push(d);
            }
            Err(e @ (Error::Numerical(_) | Error::NoConvergence { .. })) => {
                run.failure = Some(format!("iteration {iteration}: {e}"));
                break;
            }
            Err(e) => return Err(e),
        }
    }
    run.total_seconds = start.elapsed().as_secs_f64();
    Ok(run)
}

/// Runs `base` once per seed in parallel. The table is built once and shared.
pub fn sweep(base: &TrainerConfig, seeds: &[u64]) -> Result<Vec<TrainingRun>> {
    sweep_with_table(base, seeds, None)
}

/// Like [`sweep`], reusing `table` when the config reads ranges from one.
pub fn sweep_with_table(base: &TrainerConfig, seeds: &[u64], table: Option<&ClipTable>) -> Result<Vec<TrainingRun>> {
    base.validate()?;
    let owned = match (base.range_source, table) {
        (RangeSource::Table, None) if base.variant.is_adaptive() => Some(default_table(base)?),
        _ => None,
    };
    let table = table.or(owned.as_ref());
    seeds
        .par_iter()
        .map(|&seed| {
            let config = TrainerConfig { seed, ..base.clone() };
            run_training(&config, table)
        })
        .collect()
}
