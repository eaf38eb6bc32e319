//! On-policy collection and advantage estimation.

use super::model::{ActorCritic, Dist};
use crate::envs::{Action, Env};
use crate::error::{Error, Result};
use rand::Rng;

/// Transitions from one rollout plus everything the update needs from the
/// policy that collected them.
#[derive(Debug, Clone, PartialEq)]
pub struct RolloutBatch {
    pub states: Vec<Vec<f64>>,
    pub actions: Vec<Action>,
    pub rewards: Vec<f64>,
    /// Old-policy distribution at each state, recorded before any update.
    pub old_dists: Vec<Dist>,
    pub old_log_probs: Vec<f64>,
    pub values: Vec<f64>,
    pub advantages: Vec<f64>,
    /// Regression targets for the value network: `advantage + value`.
    pub returns: Vec<f64>,
    /// Undiscounted returns of the episodes that finished inside the rollout.
    pub episode_returns: Vec<f64>,
}

impl RolloutBatch {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Advantages shifted and scaled to zero mean and unit variance. A batch
    /// with (near) constant advantages is only centred.
    pub fn normalized_advantages(&self) -> Vec<f64> {
        let n = self.advantages.len() as f64;
        if n == 0.0 {
            return Vec::new();
        }
        let mean = self.advantages.iter().sum::<f64>() / n;
        let var = self.advantages.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n;
        let sd = var.sqrt();
        let scale = if sd > 1e-8 { 1.0 / sd } else { 1.0 };
        self.advantages.iter().map(|a| (a - mean) * scale).collect()
    }

    /// Old probability (discrete) of each taken action.
    pub fn old_probs(&self) -> Vec<f64> {
        self.old_log_probs.iter().map(|l| l.exp()).collect()
    }

    pub fn mean_episode_return(&self) -> Option<f64> {
        if self.episode_returns.is_empty() {
            None
        } else {
            Some(self.episode_returns.iter().sum::<f64>() / self.episode_returns.len() as f64)
        }
    }
}

/// Runs `steps` environment steps with actions sampled from `model`, starting a
/// fresh episode first and whenever one ends. Episode seeds come from `rng`.
///
/// Advantages use exponentially weighted TD errors with `(gamma, lambda)`.
/// Terminal transitions bootstrap from zero; cut-off transitions and the
/// unfinished tail bootstrap from the value of the next state.
pub fn collect_rollout(
    env: &mut dyn Env,
    model: &ActorCritic,
    steps: usize,
    gamma: f64,
    lambda: f64,
    rng: &mut impl Rng,
) -> Result<RolloutBatch> {
    if steps == 0 {
        return Err(Error::invalid("a rollout needs at least one step"));
    }
    let mut b = RolloutBatch {
        states: Vec::with_capacity(steps),
        actions: Vec::with_capacity(steps),
        rewards: Vec::with_capacity(steps),
        old_dists: Vec::with_capacity(steps),
        old_log_probs: Vec::with_capacity(steps),
        values: Vec::with_capacity(steps),
        advantages: vec![0.0; steps],
        returns: vec![0.0; steps],
        episode_returns: Vec::new(),
    };
    // value of the successor used when bootstrapping, and whether the episode continues
    let mut next_values = Vec::with_capacity(steps);
    let mut continues = Vec::with_capacity(steps);

    let mut obs = env.reset(rng.random());
    let mut episode_return = 0.0;
    for t in 0..steps {
        let dist = model.dist(&obs);
        let action = dist.sample(rng);
        let value = model.value_of(&obs);
        let tr = env.step(&action)?;
        if !tr.reward.is_finite() {
            return Err(Error::Numerical(format!("non-finite reward at rollout step {t}")));
        }
        episode_return += tr.reward;
        b.old_log_probs.push(dist.log_prob(&action));
        b.old_dists.push(dist);
        b.states.push(obs);
        b.actions.push(action);
        b.rewards.push(tr.reward);
        b.values.push(value);
        let last = t + 1 == steps;
        if tr.terminal {
            next_values.push(0.0);
        } else if tr.truncated || last {
            next_values.push(model.value_of(&tr.next_state));
        } else {
            // filled from the next step's value below
            next_values.push(f64::NAN);
        }
        continues.push(!tr.done());
        if tr.done() {
            b.episode_returns.push(episode_return);
            episode_return = 0.0;
            if !last {
                obs = env.reset(rng.random());
            } else {
                obs = tr.next_state;
            }
        } else {
            obs = tr.next_state;
        }
    }

    let mut running = 0.0;
    for t in (0..steps).rev() {
        let next_value = if next_values[t].is_nan() {
            b.values[t + 1]
        } else {
            next_values[t]
        };
        let td = b.rewards[t] + gamma * next_value - b.values[t];
        let carry = if continues[t] && t + 1 < steps { running } else { 0.0 };
        running = td + gamma * lambda * carry;
        b.advantages[t] = running;
        b.returns[t] = running + b.values[t];
    }
    Ok(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::make_env;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn model(env: &dyn Env, seed: u64) -> ActorCritic {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ActorCritic::new(env.spec().obs_dim, &env.spec().action_space, &[8], &mut rng)
    }

    #[test]
    fn single_bandit_step() {
        let mut env = make_env("bandit").unwrap();
        let m = model(env.as_ref(), 0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let b = collect_rollout(env.as_mut(), &m, 1, 0.99, 0.95, &mut rng).unwrap();
        assert_eq!(b.len(), 1);
        assert_eq!(b.advantages[0], b.rewards[0] - b.values[0]);
        assert_eq!(b.episode_returns, vec![b.rewards[0]]);
    }

    #[test]
    fn zero_discount_gives_td_errors() {
        let mut env = make_env("chain").unwrap();
        let m = model(env.as_ref(), 2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let b = collect_rollout(env.as_mut(), &m, 100, 0.0, 0.7, &mut rng).unwrap();
        for t in 0..b.len() {
            assert_eq!(b.advantages[t], b.rewards[t] - b.values[t]);
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let run = || {
            let mut env = make_env("cartpole").unwrap();
            let m = model(env.as_ref(), 4);
            let mut rng = ChaCha8Rng::seed_from_u64(5);
            collect_rollout(env.as_mut(), &m, 300, 0.99, 0.95, &mut rng).unwrap()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn advantages_match_direct_sum() {
        // with lambda = 1 the advantage is the discounted return minus the value
        let mut env = make_env("chain").unwrap();
        let m = model(env.as_ref(), 6);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let gamma = 0.9;
        let b = collect_rollout(env.as_mut(), &m, 200, gamma, 1.0, &mut rng).unwrap();
        // first episode of the rollout
        let end = (0..b.len()).find(|&t| b.rewards[t] != 0.0 || t + 1 == b.len()).unwrap();
        let mut g = 0.0;
        for t in (0..=end).rev() {
            g = b.rewards[t] + gamma * g;
        }
        if b.rewards[end] != 0.0 && end < env.spec().horizon {
            assert!((b.advantages[0] - (g - b.values[0])).abs() < 1e-12);
        }
        assert!(b.old_log_probs.iter().all(|l| *l <= 0.0));
    }
}
