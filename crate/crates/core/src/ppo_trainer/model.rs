//! Actor-critic parameters and the action distributions they induce.

use super::mlp::{Mlp, Trace};
use crate::envs::{Action, ActionSpace};
use crate::error::{Error, Result};
use crate::policy_opt::{sample_categorical, softmax};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

const LN_2PI: f64 = 1.8378770664093453;

/// Action distribution at one state.
#[derive(Debug, Clone, PartialEq)]
pub enum Dist {
    Categorical { probs: Vec<f64> },
    Gaussian { mean: Vec<f64>, log_std: Vec<f64> },
}

impl Dist {
    pub fn log_prob(&self, action: &Action) -> f64 {
        match (self, action) {
            (Dist::Categorical { probs }, Action::Discrete(a)) => probs[*a].ln(),
            (Dist::Gaussian { mean, log_std }, Action::Continuous(x)) => mean
                .iter()
                .zip(log_std)
                .zip(x)
                .map(|((m, s), x)| {
                    let z = (x - m) / s.exp();
                    -0.5 * z * z - s - 0.5 * LN_2PI
                })
                .sum(),
            _ => panic!("action kind does not match the distribution"),
        }
    }

    pub fn entropy(&self) -> f64 {
        match self {
            Dist::Categorical { probs } => probs.iter().filter(|&&p| p > 0.0).map(|p| -p * p.ln()).sum(),
            Dist::Gaussian { log_std, .. } => log_std.iter().map(|s| s + 0.5 * (LN_2PI + 1.0)).sum(),
        }
    }

    /// `KL(self || other)`.
    pub fn kl_to(&self, other: &Dist) -> f64 {
        match (self, other) {
            (Dist::Categorical { probs: p }, Dist::Categorical { probs: q }) => p
                .iter()
                .zip(q)
                .filter(|(&a, _)| a > 0.0)
                .map(|(&a, &b)| a * (a.ln() - b.ln()))
                .sum::<f64>()
                .max(0.0),
            (Dist::Gaussian { mean: m0, log_std: s0 }, Dist::Gaussian { mean: m1, log_std: s1 }) => {
                let mut kl = 0.0;
                for i in 0..m0.len() {
                    let v0 = (2.0 * s0[i]).exp();
                    let v1 = (2.0 * s1[i]).exp();
                    kl += s1[i] - s0[i] + (v0 + (m0[i] - m1[i]).powi(2)) / (2.0 * v1) - 0.5;
                }
                kl.max(0.0)
            }
            _ => panic!("KL between different distribution kinds"),
        }
    }

    pub fn sample(&self, rng: &mut impl Rng) -> Action {
        match self {
            Dist::Categorical { probs } => Action::Discrete(sample_categorical(probs, rng)),
            Dist::Gaussian { mean, log_std } => Action::Continuous(
                mean.iter()
                    .zip(log_std)
                    .map(|(m, s)| {
                        let z: f64 = StandardNormal.sample(rng);
                        m + s.exp() * z
                    })
                    .collect(),
            ),
        }
    }

    /// Gradient of `log_prob(action)` with respect to the network outputs and
    /// the free log-std parameters (empty for categorical).
    pub fn grad_log_prob(&self, action: &Action) -> (Vec<f64>, Vec<f64>) {
        match (self, action) {
            (Dist::Categorical { probs }, Action::Discrete(a)) => {
                let mut g: Vec<f64> = probs.iter().map(|p| -p).collect();
                g[*a] += 1.0;
                (g, Vec::new())
            }
            (Dist::Gaussian { mean, log_std }, Action::Continuous(x)) => {
                let mut gm = Vec::with_capacity(mean.len());
                let mut gs = Vec::with_capacity(mean.len());
                for i in 0..mean.len() {
                    let sd = log_std[i].exp();
                    let z = (x[i] - mean[i]) / sd;
                    gm.push(z / sd);
                    gs.push(z * z - 1.0);
                }
                (gm, gs)
            }
            _ => panic!("action kind does not match the distribution"),
        }
    }

    /// Gradient of the entropy with respect to the outputs and log-std parameters.
    pub fn grad_entropy(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            Dist::Categorical { probs } => {
                let h = self.entropy();
                let g = probs
                    .iter()
                    .map(|&p| if p > 0.0 { -p * (p.ln() + h) } else { 0.0 })
                    .collect();
                (g, Vec::new())
            }
            Dist::Gaussian { mean, log_std } => (vec![0.0; mean.len()], vec![1.0; log_std.len()]),
        }
    }
}

/// Separate policy and value networks. Continuous policies add a
/// state-independent log standard deviation per action dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActorCritic {
    pub policy: Mlp,
    pub log_std: Vec<f64>,
    pub value: Mlp,
    pub discrete: bool,
}

impl ActorCritic {
    pub fn new(obs_dim: usize, action_space: &ActionSpace, hidden: &[usize], rng: &mut impl Rng) -> Self {
        let out = action_space.size();
        let mut policy_sizes = vec![obs_dim];
        policy_sizes.extend_from_slice(hidden);
        policy_sizes.push(out);
        let mut value_sizes = vec![obs_dim];
        value_sizes.extend_from_slice(hidden);
        value_sizes.push(1);
        let policy = Mlp::new(&policy_sizes, 0.01, rng);
        let value = Mlp::new(&value_sizes, 1.0, rng);
        let discrete = action_space.is_discrete();
        ActorCritic {
            policy,
            log_std: if discrete { Vec::new() } else { vec![0.0; out] },
            value,
            discrete,
        }
    }

    /// Sets the policy's output bias (logits or means) before training.
    pub fn set_policy_bias(&mut self, bias: &[f64]) -> Result<()> {
        let out = self.policy.output_bias_mut();
        if bias.len() != out.len() {
            return Err(Error::Config(format!(
                "policy bias has {} entries, the policy has {} outputs",
                bias.len(),
                out.len()
            )));
        }
        out.copy_from_slice(bias);
        Ok(())
    }

    /// Zeroes the value network's last layer so it starts out predicting 0.
    pub fn zero_value_head(&mut self) {
        let sizes = self.value.sizes().to_vec();
        let last = sizes[sizes.len() - 2] * sizes[sizes.len() - 1] + sizes[sizes.len() - 1];
        let len = self.value.params().len();
        for p in &mut self.value.params_mut()[len - last..] {
            *p = 0.0;
        }
    }

    pub fn dist_from_output(&self, output: &[f64]) -> Dist {
        if self.discrete {
            Dist::Categorical { probs: softmax(output) }
        } else {
            Dist::Gaussian {
                mean: output.to_vec(),
                log_std: self.log_std.clone(),
            }
        }
    }

    pub fn dist(&self, obs: &[f64]) -> Dist {
        self.dist_from_output(&self.policy.forward(obs))
    }

    pub fn dist_trace(&self, obs: &[f64]) -> (Dist, Trace) {
        let trace = self.policy.trace(obs);
        (self.dist_from_output(trace.output()), trace)
    }

    pub fn value_of(&self, obs: &[f64]) -> f64 {
        self.value.forward(obs)[0]
    }

    /// Network weights followed by the log-std entries.
    pub fn policy_params(&self) -> Vec<f64> {
        let mut p = self.policy.params().to_vec();
        p.extend_from_slice(&self.log_std);
        p
    }

    pub fn set_policy_params(&mut self, params: &[f64]) {
        let n = self.policy.params().len();
        self.policy.params_mut().copy_from_slice(&params[..n]);
        self.log_std.copy_from_slice(&params[n..]);
    }

    pub fn policy_param_count(&self) -> usize {
        self.policy.params().len() + self.log_std.len()
    }

    pub fn is_finite(&self) -> bool {
        self.policy
            .params()
            .iter()
            .chain(&self.log_std)
            .chain(self.value.params())
            .all(|p| p.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn categorical_kl_and_entropy() {
        let p = Dist::Categorical { probs: vec![0.5, 0.5] };
        let q = Dist::Categorical { probs: vec![0.9, 0.1] };
        assert_abs_diff_eq!(p.entropy(), 2f64.ln(), epsilon = 1e-15);
        assert_eq!(p.kl_to(&p), 0.0);
        assert_abs_diff_eq!(
            p.kl_to(&q),
            0.5 * (0.5f64 / 0.9).ln() + 0.5 * (0.5f64 / 0.1).ln(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn gaussian_kl_closed_form() {
        let p = Dist::Gaussian {
            mean: vec![0.0],
            log_std: vec![0.0],
        };
        let q = Dist::Gaussian {
            mean: vec![1.0],
            log_std: vec![0.0],
        };
        assert_abs_diff_eq!(p.kl_to(&q), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(p.entropy(), 0.5 * (LN_2PI + 1.0), epsilon = 1e-15);
    }

    #[test]
    fn log_prob_gradients_match_finite_differences() {
        let h = 1e-6;
        let logits = [0.3, -0.4, 0.8];
        let f = |l: &[f64]| Dist::Categorical { probs: softmax(l) }.log_prob(&Action::Discrete(1));
        let (g, _) = Dist::Categorical {
            probs: softmax(&logits),
        }
        .grad_log_prob(&Action::Discrete(1));
        for i in 0..3 {
            let mut a = logits;
            a[i] += h;
            let mut b = logits;
            b[i] -= h;
            assert_abs_diff_eq!((f(&a) - f(&b)) / (2.0 * h), g[i], epsilon = 1e-8);
        }
        let e = |l: &[f64]| Dist::Categorical { probs: softmax(l) }.entropy();
        let (g, _) = Dist::Categorical {
            probs: softmax(&logits),
        }
        .grad_entropy();
        for i in 0..3 {
            let mut a = logits;
            a[i] += h;
            let mut b = logits;
            b[i] -= h;
            assert_abs_diff_eq!((e(&a) - e(&b)) / (2.0 * h), g[i], epsilon = 1e-8);
        }
    }
}
