//! Gradient-based training on bandits: Gibbs and Gaussian policies, the clipped
//! surrogate with constant or trust-region ranges, a plain policy-gradient
//! baseline, and trap-rate statistics over seeds.

use crate::bandit_dynamics::BanditSpec;
use crate::clip_solver::{
    gaussian_adaptive_delta, truncate_range, BatchExtremes, ClipRange, ConstraintPoint, GaussianBoundary, SolverConfig,
};
use crate::error::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

/// Logits are re-centred after each step and kept within this distance of
/// their mean, so no probability underflows to zero.
pub const LOGIT_LIMIT: f64 = 30.0;
/// Bounds on `ln sigma` for the Gaussian policy.
pub const LOG_SIGMA_RANGE: (f64, f64) = (-12.0, 4.0);

/// A policy whose log-probabilities are differentiable in a flat parameter vector.
pub trait BanditPolicy: Clone {
    type Action: Copy;

    fn sample(&self, rng: &mut impl Rng) -> Self::Action;
    fn log_prob(&self, action: Self::Action) -> f64;
    /// Gradient of `log_prob(action)` with respect to [`params`](Self::params).
    fn grad_log_prob(&self, action: Self::Action) -> Vec<f64>;
    fn params(&self) -> Vec<f64>;
    fn set_params(&mut self, params: &[f64]);
    /// Brings the parameters back into their representable region.
    fn guard(&mut self);
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GibbsPolicy {
    pub theta: Vec<f64>,
}

impl GibbsPolicy {
    pub fn new(theta: Vec<f64>) -> Self {
        GibbsPolicy { theta }
    }

    pub fn from_probs(probs: &[f64]) -> Self {
        GibbsPolicy {
            theta: probs.iter().map(|p| p.ln()).collect(),
        }
    }

    pub fn probs(&self) -> Vec<f64> {
        softmax(&self.theta)
    }

    pub fn entropy(&self) -> f64 {
        self.probs().iter().filter(|&&p| p > 0.0).map(|p| -p * p.ln()).sum()
    }
}

pub(crate) fn softmax(logits: &[f64]) -> Vec<f64> {
    let top = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|t| (t - top).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

pub(crate) fn sample_categorical(probs: &[f64], rng: &mut impl Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (a, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return a;
        }
    }
    // rounding left u above the last partial sum
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(probs.len() - 1)
}

impl BanditPolicy for GibbsPolicy {
    type Action = usize;

    fn sample(&self, rng: &mut impl Rng) -> usize {
        sample_categorical(&self.probs(), rng)
    }

    fn log_prob(&self, action: usize) -> f64 {
        let top = self.theta.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = top + self.theta.iter().map(|t| (t - top).exp()).sum::<f64>().ln();
        self.theta[action] - lse
    }

    fn grad_log_prob(&self, action: usize) -> Vec<f64> {
        let mut g: Vec<f64> = self.probs().into_iter().map(|p| -p).collect();
        g[action] += 1.0;
        g
    }

    fn params(&self) -> Vec<f64> {
        self.theta.clone()
    }

    fn set_params(&mut self, params: &[f64]) {
        self.theta.copy_from_slice(params);
    }

    fn guard(&mut self) {
        let mean = self.theta.iter().sum::<f64>() / self.theta.len() as f64;
        for t in self.theta.iter_mut() {
            *t = (*t - mean).clamp(-LOGIT_LIMIT, LOGIT_LIMIT);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianPolicy1D {
    pub mu: f64,
    pub log_sigma: f64,
}

impl GaussianPolicy1D {
    pub fn sigma(&self) -> f64 {
        self.log_sigma.exp()
    }

    /// Standardized offset of `action` under this policy.
    pub fn standardize(&self, action: f64) -> f64 {
        (action - self.mu) / self.sigma()
    }

    pub fn entropy(&self) -> f64 {
        0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E).ln() + self.log_sigma
    }
}

impl BanditPolicy for GaussianPolicy1D {
    type Action = f64;

    fn sample(&self, rng: &mut impl Rng) -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        self.mu + self.sigma() * z
    }

    fn log_prob(&self, action: f64) -> f64 {
        let z = self.standardize(action);
        -0.5 * z * z - self.log_sigma - 0.5 * (2.0 * std::f64::consts::PI).ln()
    }

    fn grad_log_prob(&self, action: f64) -> Vec<f64> {
        let z = self.standardize(action);
        vec![z / self.sigma(), z * z - 1.0]
    }

    fn params(&self) -> Vec<f64> {
        vec![self.mu, self.log_sigma]
    }

    fn set_params(&mut self, params: &[f64]) {
        self.mu = params[0];
        self.log_sigma = params[1];
    }

    fn guard(&mut self) {
        self.log_sigma = self.log_sigma.clamp(LOG_SIGMA_RANGE.0, LOG_SIGMA_RANGE.1);
    }
}

/// Piecewise-constant reward on the real line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuousBanditSpec {
    /// `(lo, hi, value)`: reward `value` on the open interval `(lo, hi)`.
    pub intervals: Vec<(f64, f64, f64)>,
}

impl Default for ContinuousBanditSpec {
    /// 0.5 on (1, 2), 1 on (2.5, 5), 0 elsewhere.
    fn default() -> Self {
        ContinuousBanditSpec {
            intervals: vec![(1.0, 2.0, 0.5), (2.5, 5.0, 1.0)],
        }
    }
}

impl ContinuousBanditSpec {
    pub fn new(intervals: Vec<(f64, f64, f64)>) -> Result<Self> {
        for &(lo, hi, v) in &intervals {
            if !(lo < hi) || !v.is_finite() || !lo.is_finite() || !hi.is_finite() {
                return Err(Error::invalid(format!("bad reward interval ({lo}, {hi}) -> {v}")));
            }
        }
        Ok(ContinuousBanditSpec { intervals })
    }

    pub fn reward(&self, action: f64) -> f64 {
        self.intervals
            .iter()
            .find(|&&(lo, hi, _)| action > lo && action < hi)
            .map_or(0.0, |&(_, _, v)| v)
    }

    pub fn optimal_reward(&self) -> f64 {
        self.intervals.iter().map(|i| i.2).fold(0.0, f64::max)
    }

    /// Expected reward of `N(mu, sigma^2)`.
    pub fn expected_reward(&self, policy: &GaussianPolicy1D) -> f64 {
        let s = policy.sigma();
        self.intervals
            .iter()
            .map(|&(lo, hi, v)| v * (normal_cdf((hi - policy.mu) / s) - normal_cdf((lo - policy.mu) / s)))
            .sum()
    }
}

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// One sampled action with its reward, recorded under the old policy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample<A> {
    pub action: A,
    pub reward: f64,
    pub old_log_prob: f64,
}

/// Mean clipped surrogate over the batch and its gradient.
///
/// A sample contributes no gradient when its clipped term is the minimum and is
/// flat: positive reward with the ratio at or above `upper`, negative reward
/// with the ratio at or below `lower`.
pub fn clipped_surrogate<P: BanditPolicy>(
    policy: &P,
    batch: &[Sample<P::Action>],
    ranges: &[ClipRange],
) -> Result<(f64, Vec<f64>)> {
    if batch.len() != ranges.len() {
        return Err(Error::invalid(format!(
            "batch has {} samples but {} ranges",
            batch.len(),
            ranges.len()
        )));
    }
    if batch.is_empty() {
        return Err(Error::invalid("empty batch"));
    }
    let mut value = 0.0;
    let mut grad = vec![0.0; policy.params().len()];
    for (s, range) in batch.iter().zip(ranges) {
        let ratio = (policy.log_prob(s.action) - s.old_log_prob).exp();
        let c = s.reward;
        value += (ratio * c).min(range.clip(ratio) * c);
        let saturated = (c > 0.0 && ratio >= range.upper) || (c < 0.0 && ratio <= range.lower);
        if !saturated && c != 0.0 {
            for (g, d) in grad.iter_mut().zip(policy.grad_log_prob(s.action)) {
                *g += c * ratio * d;
            }
        }
    }
    let n = batch.len() as f64;
    Ok((value / n, grad.into_iter().map(|g| g / n).collect()))
}

/// Score-function estimate of the expected-reward gradient.
pub fn vanilla_pg_gradient<P: BanditPolicy>(policy: &P, batch: &[Sample<P::Action>]) -> Result<Vec<f64>> {
    if batch.is_empty() {
        return Err(Error::invalid("empty batch"));
    }
    let mut grad = vec![0.0; policy.params().len()];
    for s in batch {
        for (g, d) in grad.iter_mut().zip(policy.grad_log_prob(s.action)) {
            *g += s.reward * d;
        }
    }
    let n = batch.len() as f64;
    Ok(grad.into_iter().map(|g| g / n).collect())
}

/// Exact `∇θ E[c]` for a Gibbs policy: `π_a (c_a - E[c])`.
pub fn exact_gibbs_gradient(policy: &GibbsPolicy, rewards: &[f64]) -> Vec<f64> {
    let probs = policy.probs();
    let mean: f64 = probs.iter().zip(rewards).map(|(p, c)| p * c).sum();
    probs.iter().zip(rewards).map(|(p, c)| p * (c - mean)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Ppo,
    Trgppo,
    VanillaPg,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Ppo => "ppo",
            Method::Trgppo => "trgppo",
            Method::VanillaPg => "vanilla-pg",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "ppo" => Ok(Method::Ppo),
            "trgppo" => Ok(Method::Trgppo),
            "vanilla-pg" | "pg" => Ok(Method::VanillaPg),
            other => Err(Error::invalid(format!("unknown bandit method `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DeltaPolicy {
    Fixed(f64),
    /// Recomputed from each batch so the most likely sample of each advantage
    /// sign gets exactly the PPO range.
    Adaptive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainRunConfig {
    pub iterations: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Ascent steps on each batch's surrogate. Vanilla PG always takes one.
    pub ascent_steps: usize,
    pub optimizer: OptimizerKind,
    pub seed: u64,
    pub method: Method,
    pub epsilon: f64,
    pub delta: DeltaPolicy,
    /// Start from these parameters instead of the random initialization.
    pub initial_params: Option<Vec<f64>>,
    pub solver: SolverConfig,
}

impl TrainRunConfig {
    /// Settings for the discrete three-armed bandit.
    pub fn discrete(method: Method, seed: u64) -> Self {
        TrainRunConfig {
            iterations: 1000,
            batch_size: 32,
            learning_rate: 0.85,
            ascent_steps: 25,
            optimizer: OptimizerKind::Sgd,
            seed,
            method,
            epsilon: 0.2,
            delta: DeltaPolicy::Adaptive,
            initial_params: None,
            solver: SolverConfig::default(),
        }
    }

    /// Settings for the continuous bandit.
    pub fn continuous(method: Method, seed: u64) -> Self {
        TrainRunConfig {
            learning_rate: 0.1,
            ascent_steps: 10,
            ..TrainRunConfig::discrete(method, seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 || self.batch_size == 0 || self.ascent_steps == 0 {
            return Err(Error::Config(
                "iterations, batch size and ascent steps must be >= 1".into(),
            ));
        }
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::Config(format!(
                "learning rate must be >= 0, got {}",
                self.learning_rate
            )));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::Config(format!(
                "epsilon must lie in (0, 1), got {}",
                self.epsilon
            )));
        }
        if let DeltaPolicy::Fixed(d) = self.delta {
            if !(d > 0.0) {
                return Err(Error::Config(format!("fixed delta must be > 0, got {d}")));
            }
        }
        self.solver.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum BanditTask {
    Discrete(BanditSpec),
    Continuous(ContinuousBanditSpec),
}

impl BanditTask {
    pub fn optimal_reward(&self) -> f64 {
        match self {
            BanditTask::Discrete(s) => s.optimal_reward(),
            BanditTask::Continuous(s) => s.optimal_reward(),
        }
    }
}

/// Outcome of one seeded run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BanditRun {
    pub seed: u64,
    pub method: Method,
    /// Expected reward of the policy after each iteration.
    pub curve: Vec<f64>,
    /// Policy entropy after each iteration.
    pub entropy: Vec<f64>,
    pub final_params: Vec<f64>,
    /// Set when the parameters stopped being finite; the curve is truncated there.
    pub failure: Option<String>,
}

/// Gradient ascent with optional Adam moments.
#[derive(Debug, Clone)]
pub struct Optimizer {
    kind: OptimizerKind,
    lr: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, lr: f64, dims: usize) -> Self {
        Optimizer {
            kind,
            lr,
            m: vec![0.0; dims],
            v: vec![0.0; dims],
            t: 0,
        }
    }

    /// Moves `params` along `grad` (ascent).
    pub fn ascend(&mut self, params: &mut [f64], grad: &[f64]) {
        match self.kind {
            OptimizerKind::Sgd => {
                for (p, g) in params.iter_mut().zip(grad) {
                    *p += self.lr * g;
                }
            }
            OptimizerKind::Adam => {
                const B1: f64 = 0.9;
                const B2: f64 = 0.999;
                self.t += 1;
                let c1 = 1.0 - B1.powi(self.t);
                let c2 = 1.0 - B2.powi(self.t);
                for i in 0..params.len() {
                    self.m[i] = B1 * self.m[i] + (1.0 - B1) * grad[i];
                    self.v[i] = B2 * self.v[i] + (1.0 - B2) * grad[i] * grad[i];
                    params[i] += self.lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + 1e-8);
                }
            }
        }
    }
}

/// Per-sample ranges for a discrete batch. Samples sharing an old probability
/// share a solve.
pub fn discrete_ranges(
    batch: &[Sample<usize>],
    method: Method,
    epsilon: f64,
    delta: DeltaPolicy,
    solver: &SolverConfig,
) -> Result<Vec<ClipRange>> {
    if method != Method::Trgppo {
        return Ok(vec![ClipRange::constant(epsilon); batch.len()]);
    }
    let delta = match delta {
        DeltaPolicy::Fixed(d) => d,
        DeltaPolicy::Adaptive => {
            let ex =
                BatchExtremes::from_samples(batch.iter().map(|s| (s.old_log_prob.exp(), s.reward)), epsilon, solver);
            match ex.delta(epsilon) {
                Ok(d) => d,
                // nothing to clip: every reward is zero
                Err(Error::EmptyBatch) => return Ok(vec![ClipRange::constant(epsilon); batch.len()]),
                Err(e) => return Err(e),
            }
        }
    };
    let mut cache: HashMap<usize, ClipRange> = HashMap::new();
    batch
        .iter()
        .enumerate()
        .map(|(i, s)| {
            if let Some(r) = cache.get(&s.action) {
                return Ok(*r);
            }
            let point = ConstraintPoint::new(s.old_log_prob.exp(), delta, solver)?;
            let range = crate::clip_solver::solve_clip_range(&point, solver)
                .map_err(|e| Error::Numerical(format!("sample {i}: {e}")))?;
            let range = truncate_range(range, epsilon).range();
            cache.insert(s.action, range);
            Ok(range)
        })
        .collect()
}

/// Per-sample ranges for a one-dimensional Gaussian batch, on offsets
/// standardized under the old policy.
pub fn gaussian_ranges(
    batch: &[Sample<f64>],
    old: &GaussianPolicy1D,
    method: Method,
    epsilon: f64,
    delta: DeltaPolicy,
    solver: &SolverConfig,
) -> Result<Vec<ClipRange>> {
    if method != Method::Trgppo {
        return Ok(vec![ClipRange::constant(epsilon); batch.len()]);
    }
    let delta = match delta {
        DeltaPolicy::Fixed(d) => d,
        DeltaPolicy::Adaptive => {
            let closest = |sign: f64| {
                batch
                    .iter()
                    .filter(|s| s.reward * sign > 0.0)
                    .map(|s| old.standardize(s.action).abs())
                    .fold(None, |m: Option<f64>, z| Some(m.map_or(z, |m| m.min(z))))
            };
            let (plus, minus) = (closest(1.0), closest(-1.0));
            match gaussian_adaptive_delta(
                plus.as_ref().map(std::slice::from_ref),
                minus.as_ref().map(std::slice::from_ref),
                epsilon,
                solver,
            ) {
                Ok(d) => d,
                Err(Error::EmptyBatch) => return Ok(vec![ClipRange::constant(epsilon); batch.len()]),
                Err(e) => return Err(e),
            }
        }
    };
    let boundary = GaussianBoundary::new(delta, solver)?;
    batch
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let range = boundary
                .range(old.standardize(s.action))
                .map_err(|e| Error::Numerical(format!("sample {i}: {e}")))?;
            Ok(truncate_range(range, epsilon).range())
        })
        .collect()
}

/// Runs one seeded training run.
pub fn run_bandit_training(task: &BanditTask, config: &TrainRunConfig) -> Result<BanditRun> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    match task {
        BanditTask::Discrete(spec) => {
            let theta = match &config.initial_params {
                Some(p) if p.len() == spec.action_count() => p.clone(),
                Some(p) => {
                    return Err(Error::Config(format!(
                        "initial parameters have {} entries, the bandit has {} actions",
                        p.len(),
                        spec.action_count()
                    )))
                }
                None => (0..spec.action_count())
                    .map(|_| StandardNormal.sample(&mut rng))
                    .collect(),
            };
            let rewards = spec.rewards().to_vec();
            train_loop(
                GibbsPolicy::new(theta),
                config,
                &mut rng,
                |_, a| rewards[*a],
                |pi| pi.probs().iter().zip(&rewards).map(|(p, c)| p * c).sum(),
                GibbsPolicy::entropy,
                |batch, _old| discrete_ranges(batch, config.method, config.epsilon, config.delta, &config.solver),
            )
        }
        BanditTask::Continuous(spec) => {
            let init = match &config.initial_params {
                Some(p) if p.len() == 2 => GaussianPolicy1D {
                    mu: p[0],
                    log_sigma: p[1],
                },
                Some(_) => return Err(Error::Config("Gaussian initial parameters are (mu, log_sigma)".into())),
                None => GaussianPolicy1D {
                    mu: rng.random_range(-1.0..6.0),
                    log_sigma: 0.0,
                },
            };
            train_loop(
                init,
                config,
                &mut rng,
                |_, a| spec.reward(*a),
                |pi| spec.expected_reward(pi),
                GaussianPolicy1D::entropy,
                |batch, old| gaussian_ranges(batch, old, config.method, config.epsilon, config.delta, &config.solver),
            )
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn train_loop<P: BanditPolicy>(
    mut policy: P,
    config: &TrainRunConfig,
    rng: &mut ChaCha8Rng,
    reward: impl Fn(&P, &P::Action) -> f64,
    expected: impl Fn(&P) -> f64,
    entropy: impl Fn(&P) -> f64,
    ranges: impl Fn(&[Sample<P::Action>], &P) -> Result<Vec<ClipRange>>,
) -> Result<BanditRun> {
    let mut opt = Optimizer::new(config.optimizer, config.learning_rate, policy.params().len());
    let mut curve = Vec::with_capacity(config.iterations);
    let mut entropies = Vec::with_capacity(config.iterations);
    let mut failure = None;
    for iteration in 0..config.iterations {
        let old = policy.clone();
        let batch: Vec<Sample<P::Action>> = (0..config.batch_size)
            .map(|_| {
                let action = old.sample(rng);
                Sample {
                    action,
                    reward: reward(&old, &action),
                    old_log_prob: old.log_prob(action),
                }
            })
            .collect();
        let mut params = policy.params();
        if config.method == Method::VanillaPg {
            let grad = vanilla_pg_gradient(&policy, &batch)?;
            opt.ascend(&mut params, &grad);
            policy.set_params(&params);
            policy.guard();
        } else {
            let ranges = ranges(&batch, &old)?;
            for _ in 0..config.ascent_steps {
                let (_, grad) = clipped_surrogate(&policy, &batch, &ranges)?;
                opt.ascend(&mut params, &grad);
                policy.set_params(&params);
                policy.guard();
                params = policy.params();
            }
        }
        if policy.params().iter().any(|p| !p.is_finite()) {
            failure = Some(format!("parameters became non-finite at iteration {iteration}"));
            policy = old;
            break;
        }
        curve.push(expected(&policy));
        entropies.push(entropy(&policy));
    }
    Ok(BanditRun {
        seed: config.seed,
        method: config.method,
        curve,
        entropy: entropies,
        final_params: policy.params(),
        failure,
    })
}

/// Runs `seeds` with the same configuration otherwise, in parallel.
pub fn sweep(task: &BanditTask, base: &TrainRunConfig, seeds: impl IntoIterator<Item = u64>) -> Result<Vec<BanditRun>> {
    let seeds: Vec<u64> = seeds.into_iter().collect();
    seeds
        .par_iter()
        .map(|&seed| {
            let cfg = TrainRunConfig { seed, ..base.clone() };
            run_bandit_training(task, &cfg)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrapRateReport {
    pub trapped: usize,
    pub total: usize,
    /// Runs excluded because they failed numerically.
    pub failed: usize,
    pub threshold_fraction: f64,
    pub window_fraction: f64,
    pub optimal_reward: f64,
}

impl TrapRateReport {
    pub fn rate(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.trapped as f64 / self.total as f64
        }
    }
}

/// Whether the trailing window of `curve` averages below the threshold.
pub fn is_trapped(curve: &[f64], optimal: f64, threshold_fraction: f64, window_fraction: f64) -> bool {
    if curve.is_empty() {
        return true;
    }
    let window = ((curve.len() as f64 * window_fraction).round() as usize).clamp(1, curve.len());
    let tail = &curve[curve.len() - window..];
    let mean = tail.iter().sum::<f64>() / window as f64;
    mean < threshold_fraction * optimal
}

/// Fraction of runs whose trailing-window mean is below
/// `threshold_fraction * optimal`. Failed runs are counted separately.
pub fn trap_rate(runs: &[BanditRun], optimal: f64, threshold_fraction: f64, window_fraction: f64) -> TrapRateReport {
    let (ok, failed): (Vec<&BanditRun>, Vec<&BanditRun>) = runs.iter().partition(|r| r.failure.is_none());
    TrapRateReport {
        trapped: ok
            .iter()
            .filter(|r| is_trapped(&r.curve, optimal, threshold_fraction, window_fraction))
            .count(),
        total: ok.len(),
        failed: failed.len(),
        threshold_fraction,
        window_fraction,
        optimal_reward: optimal,
    }
}
