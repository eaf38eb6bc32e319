//! Clipping ranges per batch, minibatch updates, diagnostics and the empirical
//! lower bound.

use super::config::MethodVariant;
use super::model::{ActorCritic, Dist};
use super::rollout::RolloutBatch;
use crate::clip_solver::{
    gaussian_adaptive_delta, solve_clip_range, truncate_range, BatchExtremes, ClipRange, ConstraintPoint,
    GaussianBoundary, SolverConfig, TruncatedClipRange,
};
use crate::clip_table::ClipTable;
use crate::envs::Action;
use crate::error::{Error, Result};
use crate::policy_opt::{DeltaPolicy, Optimizer, OptimizerKind};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

/// How discrete TRGPPO ranges are obtained.
#[derive(Debug, Clone, Copy)]
pub enum RangeBackend<'a> {
    Solver,
    Table(&'a ClipTable),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RangeSet {
    /// Ranges used by the surrogate.
    pub ranges: Vec<TruncatedClipRange>,
    /// Ranges before truncation; equal to `ranges` for constant variants.
    pub raw: Vec<ClipRange>,
    /// Budget used for this batch (TRGPPO only).
    pub delta: Option<f64>,
}

impl RangeSet {
    fn constant(n: usize, epsilon: f64) -> Self {
        let r = ClipRange::constant(epsilon);
        RangeSet {
            ranges: vec![truncate_range(r, epsilon); n],
            raw: vec![r; n],
            delta: None,
        }
    }
}

/// Per-sample clipping ranges. Constant variants get `(1 - epsilon, 1 + epsilon)`.
/// TRGPPO fixes one budget for the whole batch, from the most likely sample of
/// each advantage sign, and then solves per sample: by old probability for
/// discrete actions, by standardized offset for Gaussian ones.
pub fn compute_ranges(
    batch: &RolloutBatch,
    advantages: &[f64],
    variant: &MethodVariant,
    backend: RangeBackend<'_>,
    solver: &SolverConfig,
) -> Result<RangeSet> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    if advantages.len() != batch.len() {
        return Err(Error::invalid("advantages are not aligned with the batch"));
    }
    let eps = variant.epsilon;
    if !variant.is_adaptive() {
        return Ok(RangeSet::constant(batch.len(), eps));
    }
    match &batch.old_dists[0] {
        Dist::Categorical { .. } => discrete(batch, advantages, variant, backend, solver),
        Dist::Gaussian { .. } => gaussian(batch, advantages, variant, solver),
    }
}

fn discrete(
    batch: &RolloutBatch,
    advantages: &[f64],
    variant: &MethodVariant,
    backend: RangeBackend<'_>,
    solver: &SolverConfig,
) -> Result<RangeSet> {
    let eps = variant.epsilon;
    let probs = batch.old_probs();
    let delta = match variant.delta {
        DeltaPolicy::Fixed(d) => d,
        DeltaPolicy::Adaptive => {
            match BatchExtremes::from_samples(probs.iter().copied().zip(advantages.iter().copied()), eps, solver)
                .delta(eps)
            {
                Ok(d) => d,
                Err(Error::EmptyBatch) => return Ok(RangeSet::constant(batch.len(), eps)),
                Err(e) => return Err(e),
            }
        }
    };
    let mut cache: HashMap<u64, ClipRange> = HashMap::new();
    let mut raw = Vec::with_capacity(batch.len());
    for (i, &p) in probs.iter().enumerate() {
        let range = match cache.get(&p.to_bits()) {
            Some(r) => *r,
            None => {
                let r = match backend {
                    RangeBackend::Solver => {
                        ConstraintPoint::new(p, delta, solver).and_then(|pt| solve_clip_range(&pt, solver))
                    }
                    RangeBackend::Table(t) => t.query_at(p, delta, solver).map(|q| q.range),
                }
                .map_err(|e| Error::Numerical(format!("sample {i}: {e}")))?;
                cache.insert(p.to_bits(), r);
                r
            }
        };
        raw.push(range);
    }
    Ok(RangeSet {
        ranges: raw.iter().map(|r| truncate_range(*r, eps)).collect(),
        raw,
        delta: Some(delta),
    })
}

fn standardized(dist: &Dist, action: &Action) -> Vec<f64> {
    match (dist, action) {
        (Dist::Gaussian { mean, log_std }, Action::Continuous(x)) => {
            (0..mean.len()).map(|i| (x[i] - mean[i]) / log_std[i].exp()).collect()
        }
        _ => panic!("standardized offsets need a Gaussian distribution"),
    }
}

fn gaussian(
    batch: &RolloutBatch,
    advantages: &[f64],
    variant: &MethodVariant,
    solver: &SolverConfig,
) -> Result<RangeSet> {
    let eps = variant.epsilon;
    let zs: Vec<Vec<f64>> = batch
        .old_dists
        .iter()
        .zip(&batch.actions)
        .map(|(d, a)| standardized(d, a))
        .collect();
    let dims = zs[0].len();
    let delta = match variant.delta {
        DeltaPolicy::Fixed(d) => d,
        DeltaPolicy::Adaptive => {
            // most likely sample of each sign: smallest squared offset
            let closest = |sign: f64| {
                zs.iter()
                    .zip(advantages)
                    .filter(|(_, a)| **a * sign > 0.0)
                    .map(|(z, _)| (z.iter().map(|v| v * v).sum::<f64>(), z))
                    .min_by(|a, b| a.0.total_cmp(&b.0))
                    .map(|(_, z)| z.as_slice())
            };
            match gaussian_adaptive_delta(closest(1.0), closest(-1.0), eps, solver) {
                Ok(d) => d,
                Err(Error::EmptyBatch) => return Ok(RangeSet::constant(batch.len(), eps)),
                Err(e) => return Err(e),
            }
        }
    };
    let boundary = GaussianBoundary::new(delta / dims as f64, solver)?;
    let mut raw = Vec::with_capacity(zs.len());
    for (i, z) in zs.iter().enumerate() {
        let mut lo = 0.0;
        let mut hi = 0.0;
        for &v in z {
            let (l, h) = boundary
                .log_ratio_extremes(v)
                .map_err(|e| Error::Numerical(format!("sample {i}: {e}")))?;
            lo += l;
            hi += h;
        }
        raw.push(ClipRange::new(lo.exp(), hi.exp()));
    }
    Ok(RangeSet {
        ranges: raw.iter().map(|r| truncate_range(*r, eps)).collect(),
        raw,
        delta: Some(delta),
    })
}

/// The surrogate only passes gradient through samples whose ratio has not left
/// the range on the side the advantage pushes towards.
fn is_active(ratio: f64, advantage: f64, range: &TruncatedClipRange) -> bool {
    !((advantage > 0.0 && ratio > range.upper) || (advantage < 0.0 && ratio < range.lower))
}

/// Mean clipped surrogate plus `entropy_coef` times mean entropy over `indices`,
/// and its gradient with respect to [`ActorCritic::policy_params`].
pub fn policy_objective(
    model: &ActorCritic,
    batch: &RolloutBatch,
    advantages: &[f64],
    ranges: &[TruncatedClipRange],
    entropy_coef: f64,
    indices: &[usize],
) -> (f64, Vec<f64>) {
    let n_net = model.policy.params().len();
    let mut grad = vec![0.0; model.policy_param_count()];
    let mut value = 0.0;
    let scale = 1.0 / indices.len().max(1) as f64;
    for &i in indices {
        let (dist, trace) = model.dist_trace(&batch.states[i]);
        let action = &batch.actions[i];
        let ratio = (dist.log_prob(action) - batch.old_log_probs[i]).exp();
        let a = advantages[i];
        let r = &ranges[i];
        value += (ratio * a).min(ratio.clamp(r.lower, r.upper) * a);
        let (mut g_out, mut g_std) = if is_active(ratio, a, r) {
            let (go, gs) = dist.grad_log_prob(action);
            let w = a * ratio;
            (
                go.into_iter().map(|g| g * w).collect(),
                gs.into_iter().map(|g| g * w).collect(),
            )
        } else {
            (vec![0.0; model.policy.output_dim()], vec![0.0; model.log_std.len()])
        };
        if entropy_coef > 0.0 {
            value += entropy_coef * dist.entropy();
            let (ho, hs) = dist.grad_entropy();
            for (g, h) in g_out.iter_mut().zip(ho) {
                *g += entropy_coef * h;
            }
            for (g, h) in g_std.iter_mut().zip(hs) {
                *g += entropy_coef * h;
            }
        }
        for g in g_out.iter_mut() {
            *g *= scale;
        }
        model.policy.backward(&trace, &g_out, &mut grad[..n_net]);
        for (g, h) in grad[n_net..].iter_mut().zip(g_std) {
            *g += h * scale;
        }
    }
    (value * scale, grad)
}

/// Mean of `0.5 (V(s) - target)^2` over `indices` and its gradient.
pub fn value_loss(model: &ActorCritic, batch: &RolloutBatch, indices: &[usize]) -> (f64, Vec<f64>) {
    let mut grad = vec![0.0; model.value.params().len()];
    let mut loss = 0.0;
    let scale = 1.0 / indices.len().max(1) as f64;
    for &i in indices {
        let trace = model.value.trace(&batch.states[i]);
        let err = trace.output()[0] - batch.returns[i];
        loss += 0.5 * err * err;
        model.value.backward(&trace, &[err * scale], &mut grad);
    }
    (loss * scale, grad)
}

fn clip_norm(grad: &mut [f64], max_norm: f64) {
    let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm {
        let s = max_norm / norm;
        for g in grad.iter_mut() {
            *g *= s;
        }
    }
}

/// Adam state for both networks, kept across iterations.
#[derive(Debug, Clone)]
pub struct Optimizers {
    pub policy: Optimizer,
    pub value: Optimizer,
}

impl Optimizers {
    pub fn adam(model: &ActorCritic, learning_rate: f64) -> Self {
        Optimizers {
            policy: Optimizer::new(OptimizerKind::Adam, learning_rate, model.policy_param_count()),
            value: Optimizer::new(OptimizerKind::Adam, learning_rate, model.value.params().len()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateSettings {
    pub epochs: usize,
    pub minibatches: usize,
    pub max_grad_norm: f64,
    pub gamma: f64,
}

/// Terms of the empirical lower bound `M = L - C * max KL`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundTerms {
    /// Estimated performance of the old policy.
    pub eta_hat: f64,
    /// `eta_hat` plus the mean ratio-weighted advantage.
    pub surrogate: f64,
    pub max_kl: f64,
    pub c: f64,
    pub m_hat: f64,
}

/// `max|A| * 4 gamma / (1 - gamma)^2`.
pub fn bound_constant(max_abs_advantage: f64, gamma: f64) -> f64 {
    max_abs_advantage * 4.0 * gamma / ((1.0 - gamma) * (1.0 - gamma))
}

/// Bound terms for `new` against the policy that collected `batch`. The old
/// policy's performance is estimated by the mean return of the finished
/// episodes, or by the mean value target when none finished.
pub fn empirical_bound(batch: &RolloutBatch, new: &ActorCritic, gamma: f64) -> BoundTerms {
    let n = batch.len() as f64;
    let eta_hat = batch
        .mean_episode_return()
        .unwrap_or_else(|| batch.returns.iter().sum::<f64>() / n);
    let mut weighted = 0.0;
    let mut max_kl: f64 = 0.0;
    for i in 0..batch.len() {
        let dist = new.dist(&batch.states[i]);
        let ratio = (dist.log_prob(&batch.actions[i]) - batch.old_log_probs[i]).exp();
        weighted += ratio * batch.advantages[i];
        max_kl = max_kl.max(batch.old_dists[i].kl_to(&dist));
    }
    let max_abs = batch.advantages.iter().fold(0.0f64, |m, a| m.max(a.abs()));
    let c = bound_constant(max_abs, gamma);
    let surrogate = eta_hat + weighted / n;
    BoundTerms {
        eta_hat,
        surrogate,
        max_kl,
        c,
        m_hat: surrogate - c * max_kl,
    }
}

/// Per-iteration diagnostics, computed on the updated parameters against the
/// policy that collected the batch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub iteration: usize,
    pub entropy: f64,
    pub mean_kl: f64,
    pub max_kl: f64,
    pub upper_min: f64,
    pub upper_mean: f64,
    pub upper_max: f64,
    /// Fraction of samples whose ratio ended outside the range on the clipped side.
    pub saturation: f64,
    /// `NaN` for constant-range variants.
    pub delta: f64,
    pub bound: BoundTerms,
    pub value_loss: f64,
    pub range_seconds: f64,
}

/// Runs `epochs` passes of shuffled minibatch ascent on the surrogate and descent
/// on the value error. On a non-finite objective the model is restored and the
/// iteration is abandoned with an error.
#[allow(clippy::too_many_arguments)]
pub fn update_policy(
    model: &mut ActorCritic,
    optimizers: &mut Optimizers,
    batch: &RolloutBatch,
    ranges: &RangeSet,
    variant: &MethodVariant,
    settings: &UpdateSettings,
    rng: &mut impl Rng,
) -> Result<DiagnosticsRecord> {
    if ranges.ranges.len() != batch.len() {
        return Err(Error::invalid("ranges are not aligned with the batch"));
    }
    let advantages = batch.normalized_advantages();
    let snapshot = model.clone();
    let mut order: Vec<usize> = (0..batch.len()).collect();
    let mb = settings.minibatches.clamp(1, batch.len());
    let mut params = model.policy_params();
    for epoch in 0..settings.epochs {
        order.shuffle(rng);
        for k in 0..mb {
            let idx = &order[k * batch.len() / mb..(k + 1) * batch.len() / mb];
            let (obj, mut grad) =
                policy_objective(model, batch, &advantages, &ranges.ranges, variant.entropy_coef, idx);
            let (vl, mut vgrad) = value_loss(model, batch, idx);
            if !obj.is_finite() || !vl.is_finite() || grad.iter().chain(&vgrad).any(|g| !g.is_finite()) {
                *model = snapshot;
                return Err(Error::Numerical(format!(
                    "non-finite loss in epoch {epoch}, minibatch {k}"
                )));
            }
            clip_norm(&mut grad, settings.max_grad_norm);
            clip_norm(&mut vgrad, settings.max_grad_norm);
            optimizers.policy.ascend(&mut params, &grad);
            model.set_policy_params(&params);
            for g in vgrad.iter_mut() {
                *g = -*g;
            }
            optimizers.value.ascend(model.value.params_mut(), &vgrad);
        }
    }
    if !model.is_finite() {
        *model = snapshot;
        return Err(Error::Numerical("parameters became non-finite".into()));
    }
    Ok(diagnostics(model, batch, ranges, settings.gamma))
}

/// Diagnostics of `model` against the batch's old policy.
pub fn diagnostics(model: &ActorCritic, batch: &RolloutBatch, ranges: &RangeSet, gamma: f64) -> DiagnosticsRecord {
    let n = batch.len() as f64;
    let advantages = batch.normalized_advantages();
    let mut entropy = 0.0;
    let mut kl_sum = 0.0;
    let mut saturated = 0usize;
    for i in 0..batch.len() {
        let dist = model.dist(&batch.states[i]);
        entropy += dist.entropy();
        kl_sum += batch.old_dists[i].kl_to(&dist);
        let ratio = (dist.log_prob(&batch.actions[i]) - batch.old_log_probs[i]).exp();
        if !is_active(ratio, advantages[i], &ranges.ranges[i]) {
            saturated += 1;
        }
    }
    let uppers = ranges.ranges.iter().map(|r| r.upper);
    let bound = empirical_bound(batch, model, gamma);
    let all: Vec<usize> = (0..batch.len()).collect();
    DiagnosticsRecord {
        iteration: 0,
        entropy: entropy / n,
        mean_kl: kl_sum / n,
        max_kl: bound.max_kl,
        upper_min: uppers.clone().fold(f64::INFINITY, f64::min),
        upper_mean: uppers.clone().sum::<f64>() / n,
        upper_max: uppers.fold(f64::NEG_INFINITY, f64::max),
        saturation: saturated as f64 / n,
        delta: ranges.delta.unwrap_or(f64::NAN),
        bound,
        value_loss: value_loss(model, batch, &all).0,
        range_seconds: 0.0,
    }
}
