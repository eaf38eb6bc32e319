//! Exact dynamics of the simplified policy iteration on a stateless bandit.
//!
//! Each step samples one action from the current policy and moves its
//! probability to the edge of its clipping range: up to `u π(a)` for a positive
//! reward, down to `l π(a)` for a negative one. The mass difference is spread
//! uniformly over the other actions. Expectations over the sampled actions are
//! computed by walking every action sequence, which is exact but exponential in
//! the horizon.

use crate::clip_solver::{eval_g, solve_clip_range, truncate_range, ClipRange, ConstraintPoint, SolverConfig};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Largest number of leaf sequences [`exploration_curve_exact`] will walk by default.
pub const DEFAULT_ENUMERATION_BUDGET: u64 = 10_000_000;

const SUM_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct BanditSpec {
    rewards: Vec<f64>,
    optimal: usize,
}

impl BanditSpec {
    /// Needs at least two actions, finite rewards and a unique best action.
    pub fn new(rewards: Vec<f64>) -> Result<Self> {
        if rewards.len() < 2 {
            return Err(Error::invalid("a bandit needs at least two actions"));
        }
        if rewards.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("rewards must be finite"));
        }
        let best = rewards.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let winners: Vec<usize> = (0..rewards.len()).filter(|&a| rewards[a] == best).collect();
        if winners.len() != 1 {
            return Err(Error::invalid(format!(
                "the optimal action must be unique, actions {winners:?} tie at {best}"
            )));
        }
        Ok(BanditSpec {
            optimal: winners[0],
            rewards,
        })
    }

    /// The three-armed bandit with rewards `(1, 0.5, -50)`.
    pub fn three_armed() -> Self {
        BanditSpec::new(vec![1.0, 0.5, -50.0]).expect("fixture is valid")
    }

    pub fn rewards(&self) -> &[f64] {
        &self.rewards
    }

    pub fn action_count(&self) -> usize {
        self.rewards.len()
    }

    pub fn optimal_action(&self) -> usize {
        self.optimal
    }

    pub fn optimal_reward(&self) -> f64 {
        self.rewards[self.optimal]
    }

    /// Positive-reward actions other than the optimal one.
    pub fn suboptimal_actions(&self) -> Vec<usize> {
        (0..self.rewards.len())
            .filter(|&a| a != self.optimal && self.rewards[a] > 0.0)
            .collect()
    }

    pub fn negative_actions(&self) -> Vec<usize> {
        (0..self.rewards.len()).filter(|&a| self.rewards[a] < 0.0).collect()
    }

    fn check_action(&self, action: usize) -> Result<()> {
        if action >= self.rewards.len() {
            return Err(Error::invalid(format!(
                "action {action} out of range for {} actions",
                self.rewards.len()
            )));
        }
        Ok(())
    }
}

impl TryFrom<Vec<f64>> for BanditSpec {
    type Error = Error;

    fn try_from(rewards: Vec<f64>) -> Result<Self> {
        BanditSpec::new(rewards)
    }
}

impl From<BanditSpec> for Vec<f64> {
    fn from(spec: BanditSpec) -> Self {
        spec.rewards
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TabularPolicy {
    probs: Vec<f64>,
}

impl TabularPolicy {
    /// Entries must be non-negative and sum to one within `1e-12`.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::invalid("a policy needs at least one action"));
        }
        if probs.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
            return Err(Error::invalid(format!(
                "probabilities must be finite and >= 0: {probs:?}"
            )));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::invalid(format!("probabilities sum to {total}, not 1")));
        }
        Ok(TabularPolicy { probs })
    }

    pub fn uniform(actions: usize) -> Self {
        TabularPolicy {
            probs: vec![1.0 / actions as f64; actions],
        }
    }

    /// The initial policy `(0.2, 0.6, 0.2)` paired with [`BanditSpec::three_armed`].
    pub fn three_armed_start() -> Self {
        TabularPolicy {
            probs: vec![0.2, 0.6, 0.2],
        }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, action: usize) -> f64 {
        self.probs[action]
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn expected_reward(&self, spec: &BanditSpec) -> f64 {
        self.probs.iter().zip(spec.rewards()).map(|(p, c)| p * c).sum()
    }

    /// `max_a |π(a) - π*(a)|` for the deterministic policy on `optimal`.
    pub fn distance_to_vertex(&self, optimal: usize) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .map(|(a, &p)| if a == optimal { (1.0 - p).abs() } else { p })
            .fold(0.0, f64::max)
    }
}

/// How clipping ranges are chosen in the update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClipRule {
    /// `(1 - epsilon, 1 + epsilon)` for every action.
    Constant { epsilon: f64 },
    /// Trust-region range at the current probability, truncated by `epsilon`.
    TrustRegion { delta: f64, epsilon: f64 },
}

impl ClipRule {
    pub fn epsilon(&self) -> f64 {
        match *self {
            ClipRule::Constant { epsilon } | ClipRule::TrustRegion { epsilon, .. } => epsilon,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ClipRule::Constant { .. } => "ppo",
            ClipRule::TrustRegion { .. } => "trgppo",
        }
    }

    /// Range for an action whose current probability is `p`.
    pub fn range(&self, p: f64, solver: &SolverConfig) -> Result<ClipRange> {
        match *self {
            ClipRule::Constant { epsilon } => Ok(ClipRange::constant(epsilon)),
            ClipRule::TrustRegion { delta, epsilon } => {
                let point = ConstraintPoint::new(p, delta, solver)?;
                Ok(truncate_range(solve_clip_range(&point, solver)?, epsilon).range())
            }
        }
    }

    /// Ranges for every action of `policy`.
    pub fn ranges(&self, policy: &TabularPolicy, solver: &SolverConfig) -> Result<Vec<ClipRange>> {
        policy.probs().iter().map(|&p| self.range(p, solver)).collect()
    }
}

/// A policy after one update, and whether it had to be projected back onto
/// the simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct UpdateOutcome {
    pub policy: TabularPolicy,
    pub projected: bool,
}

/// One step of the simplified policy iteration after sampling `action`.
pub fn ppo_update(
    policy: &TabularPolicy,
    action: usize,
    spec: &BanditSpec,
    rule: &ClipRule,
    solver: &SolverConfig,
) -> Result<UpdateOutcome> {
    spec.check_action(action)?;
    if policy.len() != spec.action_count() {
        return Err(Error::invalid("policy and bandit have different action counts"));
    }
    let reward = spec.rewards()[action];
    if reward == 0.0 {
        return Ok(UpdateOutcome {
            policy: policy.clone(),
            projected: false,
        });
    }
    let p = policy.prob(action);
    let range = rule.range(p, solver)?;
    let target = if reward > 0.0 { p * range.upper } else { p * range.lower };
    Ok(apply_move(policy, action, target))
}

fn apply_move(policy: &TabularPolicy, action: usize, target: f64) -> UpdateOutcome {
    let probs = policy.probs();
    let share = (target - probs[action]) / (probs.len() - 1) as f64;
    let mut next: Vec<f64> = probs.iter().map(|q| q - share).collect();
    next[action] = target;
    let projected = next.iter().any(|q| !(0.0..=1.0).contains(q));
    if projected {
        for q in next.iter_mut() {
            *q = q.clamp(0.0, 1.0);
        }
        let total: f64 = next.iter().sum();
        for q in next.iter_mut() {
            *q /= total;
        }
    }
    UpdateOutcome {
        policy: TabularPolicy { probs: next },
        projected,
    }
}

/// Expectations along the exact policy iteration, indexed by step `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExplorationCurve {
    /// `1 - E[π_t(a_opt)]`.
    pub values: Vec<f64>,
    /// `E[max_a |π_t(a) - π*(a)|]`, computed separately from `values`.
    pub distances: Vec<f64>,
    /// `E[Σ π_t(a)]` over the sub-optimal positive-reward actions.
    pub suboptimal_mass: Vec<f64>,
    /// Probability of having reached step `t` through an update that was projected.
    pub projected_weight: Vec<f64>,
}

impl ExplorationCurve {
    pub fn horizon(&self) -> usize {
        self.values.len() - 1
    }

    pub fn is_strictly_increasing(&self) -> bool {
        self.values.windows(2).all(|w| w[1] > w[0])
    }
}

/// Number of action sequences of length `horizon`.
pub fn enumeration_size(actions: usize, horizon: usize) -> u128 {
    let mut n: u128 = 1;
    for _ in 0..horizon {
        n = n.saturating_mul(actions as u128);
    }
    n
}

/// Walks every action sequence up to `horizon`, calling `visit(t, weight, policy)`
/// on each reached policy. Zero-probability actions are never taken.
pub fn enumerate_policies(
    policy0: &TabularPolicy,
    spec: &BanditSpec,
    rule: &ClipRule,
    horizon: usize,
    budget: u64,
    solver: &SolverConfig,
    mut visit: impl FnMut(usize, f64, &TabularPolicy, bool),
) -> Result<()> {
    let needed = enumeration_size(spec.action_count(), horizon);
    if needed > budget as u128 {
        return Err(Error::BudgetExceeded { needed, budget });
    }
    if policy0.len() != spec.action_count() {
        return Err(Error::invalid("policy and bandit have different action counts"));
    }
    walk(policy0, 1.0, 0, false, spec, rule, horizon, solver, &mut visit)
}

#[allow(clippy::too_many_arguments)]
fn walk(
    policy: &TabularPolicy,
    weight: f64,
    t: usize,
    projected: bool,
    spec: &BanditSpec,
    rule: &ClipRule,
    horizon: usize,
    solver: &SolverConfig,
    visit: &mut impl FnMut(usize, f64, &TabularPolicy, bool),
) -> Result<()> {
    visit(t, weight, policy, projected);
    if t == horizon {
        return Ok(());
    }
    for action in 0..policy.len() {
        let p = policy.prob(action);
        if p <= 0.0 {
            continue;
        }
        let next = ppo_update(policy, action, spec, rule, solver)?;
        walk(
            &next.policy,
            weight * p,
            t + 1,
            projected || next.projected,
            spec,
            rule,
            horizon,
            solver,
            visit,
        )?;
    }
    Ok(())
}

/// Exact `E_t` for `t = 0..=horizon`.
pub fn exploration_curve_exact(
    policy0: &TabularPolicy,
    spec: &BanditSpec,
    rule: &ClipRule,
    horizon: usize,
    budget: u64,
    solver: &SolverConfig,
) -> Result<ExplorationCurve> {
    let opt = spec.optimal_action();
    let subopt = spec.suboptimal_actions();
    let mut opt_mass = vec![0.0; horizon + 1];
    let mut distances = vec![0.0; horizon + 1];
    let mut suboptimal_mass = vec![0.0; horizon + 1];
    let mut projected_weight = vec![0.0; horizon + 1];
    enumerate_policies(policy0, spec, rule, horizon, budget, solver, |t, w, pi, projected| {
        opt_mass[t] += w * pi.prob(opt);
        distances[t] += w * pi.distance_to_vertex(opt);
        suboptimal_mass[t] += w * subopt.iter().map(|&a| pi.prob(a)).sum::<f64>();
        if projected {
            projected_weight[t] += w;
        }
    })?;
    Ok(ExplorationCurve {
        values: opt_mass.iter().map(|m| 1.0 - m).collect(),
        distances,
        suboptimal_mass,
        projected_weight,
    })
}

/// `E[π_{t+1}(a) | π_t]` in closed form for an action with positive reward,
/// assuming the raw update stays in the simplex.
pub fn expected_next_prob(
    policy: &TabularPolicy,
    action: usize,
    spec: &BanditSpec,
    rule: &ClipRule,
    solver: &SolverConfig,
) -> Result<f64> {
    spec.check_action(action)?;
    let c = spec.rewards();
    if !(c[action] > 0.0) {
        return Err(Error::invalid(format!(
            "closed form needs a positive-reward action, action {action} has reward {}",
            c[action]
        )));
    }
    let pi = policy.probs();
    let others = (pi.len() - 1) as f64;
    let mut change = pi[action].powi(2) * (rule.range(pi[action], solver)?.upper - 1.0);
    for b in 0..pi.len() {
        if b == action || c[b] == 0.0 {
            continue;
        }
        let range = rule.range(pi[b], solver)?;
        if c[b] > 0.0 {
            change -= pi[b].powi(2) * (range.upper - 1.0) / others;
        } else {
            change += pi[b].powi(2) * (1.0 - range.lower) / others;
        }
    }
    Ok(pi[action] + change)
}

/// `π0(a_opt)² |A| < Σ_subopt π0(a)² - Σ_neg π0(a)²`, the condition under which
/// constant clipping drifts away from the optimum in expectation.
pub fn check_trap_condition(policy0: &TabularPolicy, spec: &BanditSpec) -> bool {
    let sq = |a: usize| policy0.prob(a).powi(2);
    let lhs = sq(spec.optimal_action()) * spec.action_count() as f64;
    let rhs: f64 = spec.suboptimal_actions().into_iter().map(sq).sum::<f64>()
        - spec.negative_actions().into_iter().map(sq).sum::<f64>();
    lhs < rhs
}

/// `delta <= g(max_subopt π(a), 1 + epsilon)`. The threshold is infinite when
/// `1 + epsilon` is outside the domain of `g` at that probability.
pub fn check_budget_condition(policy: &TabularPolicy, spec: &BanditSpec, delta: f64, epsilon: f64) -> Result<bool> {
    Ok(delta <= budget_threshold(policy, spec, epsilon)?)
}

/// `g(max_subopt π(a), 1 + epsilon)`.
pub fn budget_threshold(policy: &TabularPolicy, spec: &BanditSpec, epsilon: f64) -> Result<f64> {
    let p = spec
        .suboptimal_actions()
        .into_iter()
        .map(|a| policy.prob(a))
        .fold(None, |m: Option<f64>, p| Some(m.map_or(p, |m| m.max(p))))
        .ok_or_else(|| Error::invalid("the bandit has no sub-optimal positive-reward action"))?;
    if p <= 0.0 {
        return Ok(f64::INFINITY);
    }
    match eval_g(p.min(1.0 - f64::EPSILON), 1.0 + epsilon) {
        Ok(v) => Ok(v),
        Err(Error::Domain { .. }) => Ok(f64::INFINITY),
        Err(e) => Err(e),
    }
}

/// `KL(p || q)` between two distributions on the same support.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(&a, _)| a > 0.0)
        .map(|(&a, &b)| a * (a / b).ln())
        .sum()
}

/// The closest distribution to `old` (in `KL(old || .)`) that puts ratio
/// `ratio` on `action`: the other actions are rescaled proportionally.
pub fn min_kl_with_ratio(old: &TabularPolicy, action: usize, ratio: f64) -> Result<TabularPolicy> {
    let p = old.prob(action);
    let target = p * ratio;
    if !(target > 0.0 && target < 1.0) || !(p < 1.0) {
        return Err(Error::invalid(format!(
            "ratio {ratio} is not reachable from probability {p}"
        )));
    }
    let scale = (1.0 - target) / (1.0 - p);
    let probs = old
        .probs()
        .iter()
        .enumerate()
        .map(|(b, &q)| if b == action { target } else { q * scale })
        .collect();
    Ok(TabularPolicy { probs })
}

/// Writes curves as `t,e_t,rule,exact` rows.
pub fn write_curves_csv(curves: &[(&str, &ExplorationCurve)], mut out: impl Write) -> Result<()> {
    writeln!(out, "t,e_t,rule,exact")?;
    for (rule, curve) in curves {
        for (t, e) in curve.values.iter().enumerate() {
            writeln!(out, "{t},{e:.15},{rule},true")?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    const PPO: ClipRule = ClipRule::Constant { epsilon: 0.2 };

    fn cfg() -> SolverConfig {
        SolverConfig::default()
    }

    #[test]
    fn spec_rejects_ties_and_tiny_bandits() {
        assert!(BanditSpec::new(vec![1.0]).is_err());
        assert!(BanditSpec::new(vec![1.0, 1.0, 0.0]).is_err());
        assert!(BanditSpec::new(vec![0.0, f64::NAN]).is_err());
        let s = BanditSpec::three_armed();
        assert_eq!(s.optimal_action(), 0);
        assert_eq!(s.suboptimal_actions(), vec![1]);
        assert_eq!(s.negative_actions(), vec![2]);
    }

    #[test]
    fn policy_must_be_a_distribution() {
        assert!(TabularPolicy::new(vec![0.5, 0.6]).is_err());
        assert!(TabularPolicy::new(vec![-0.1, 1.1]).is_err());
        assert!(TabularPolicy::new(vec![0.3, 0.7]).is_ok());
    }

    #[test]
    fn positive_sample_moves_mass_to_it() {
        let s = BanditSpec::three_armed();
        let out = ppo_update(&TabularPolicy::three_armed_start(), 1, &s, &PPO, &cfg()).unwrap();
        let p = out.policy.probs();
        assert_abs_diff_eq!(p[1], 0.72, epsilon = 1e-15);
        assert_abs_diff_eq!(p[0], 0.14, epsilon = 1e-15);
        assert_abs_diff_eq!(p[2], 0.14, epsilon = 1e-15);
        assert_abs_diff_eq!(p.iter().sum::<f64>(), 1.0, epsilon = 1e-15);
        assert!(!out.projected);
    }

    #[test]
    fn negative_sample_gives_mass_away() {
        let s = BanditSpec::three_armed();
        let out = ppo_update(&TabularPolicy::three_armed_start(), 2, &s, &PPO, &cfg()).unwrap();
        let p = out.policy.probs();
        assert_abs_diff_eq!(p[2], 0.16, epsilon = 1e-15);
        assert_abs_diff_eq!(p[0], 0.22, epsilon = 1e-15);
        assert_abs_diff_eq!(p[1], 0.62, epsilon = 1e-15);
    }

    #[test]
    fn zero_reward_leaves_policy_alone() {
        let s = BanditSpec::new(vec![1.0, 0.0, -1.0]).unwrap();
        let pi = TabularPolicy::new(vec![0.1, 0.5, 0.4]).unwrap();
        assert_eq!(ppo_update(&pi, 1, &s, &PPO, &cfg()).unwrap().policy, pi);
        assert!(ppo_update(&pi, 3, &s, &PPO, &cfg()).is_err());
    }

    #[test]
    fn overshoot_is_projected() {
        let s = BanditSpec::new(vec![1.0, 0.5]).unwrap();
        let pi = TabularPolicy::new(vec![0.95, 0.05]).unwrap();
        let out = ppo_update(&pi, 0, &s, &PPO, &cfg()).unwrap();
        assert!(out.projected);
        assert_eq!(out.policy.probs(), &[1.0, 0.0]);
    }

    #[test]
    fn first_two_steps_of_three_armed_bandit() {
        let s = BanditSpec::three_armed();
        let c = exploration_curve_exact(
            &TabularPolicy::three_armed_start(),
            &s,
            &PPO,
            1,
            DEFAULT_ENUMERATION_BUDGET,
            &cfg(),
        )
        .unwrap();
        assert_abs_diff_eq!(c.values[0], 0.8, epsilon = 1e-15);
        assert_abs_diff_eq!(c.values[1], 0.824, epsilon = 1e-12);
    }

    #[test]
    fn horizon_zero_is_initial_gap() {
        let s = BanditSpec::three_armed();
        let pi = TabularPolicy::new(vec![0.35, 0.5, 0.15]).unwrap();
        let c = exploration_curve_exact(&pi, &s, &PPO, 0, 1, &cfg()).unwrap();
        assert_eq!(c.values, vec![0.65]);
    }

    #[test]
    fn vertex_policy_stays_put() {
        let s = BanditSpec::three_armed();
        let pi = TabularPolicy::new(vec![1.0, 0.0, 0.0]).unwrap();
        let c = exploration_curve_exact(&pi, &s, &PPO, 4, DEFAULT_ENUMERATION_BUDGET, &cfg()).unwrap();
        assert!(c.values.iter().all(|&v| v == 0.0), "{:?}", c.values);
        assert!(c.projected_weight[1] == 1.0);
    }

    #[test]
    fn budget_is_enforced() {
        let s = BanditSpec::three_armed();
        let err = exploration_curve_exact(&TabularPolicy::three_armed_start(), &s, &PPO, 10, 1000, &cfg()).unwrap_err();
        assert!(matches!(
            err,
            Error::BudgetExceeded {
                needed: 59049,
                budget: 1000
            }
        ));
    }

    #[test]
    fn closed_form_examples() {
        let s = BanditSpec::three_armed();
        let pi = TabularPolicy::three_armed_start();
        assert_abs_diff_eq!(
            expected_next_prob(&pi, 0, &s, &PPO, &cfg()).unwrap(),
            0.176,
            epsilon = 1e-15
        );
        assert!(expected_next_prob(&pi, 2, &s, &PPO, &cfg()).is_err());
        let two = BanditSpec::new(vec![1.0, 0.3]).unwrap();
        let u = TabularPolicy::uniform(2);
        assert_abs_diff_eq!(
            expected_next_prob(&u, 0, &two, &PPO, &cfg()).unwrap(),
            0.5,
            epsilon = 1e-15
        );
    }

    #[test]
    fn trap_condition_examples() {
        let s = BanditSpec::three_armed();
        assert!(check_trap_condition(&TabularPolicy::three_armed_start(), &s));
        let two = BanditSpec::new(vec![1.0, 0.5]).unwrap();
        assert!(!check_trap_condition(&TabularPolicy::uniform(2), &two));
        let good = TabularPolicy::new(vec![0.9, 0.05, 0.05]).unwrap();
        assert!(!check_trap_condition(&good, &s));
    }

    #[test]
    fn budget_condition_examples() {
        let s = BanditSpec::three_armed();
        let pi = TabularPolicy::three_armed_start();
        let thr = eval_g(0.6, 1.2).unwrap();
        assert!(check_budget_condition(&pi, &s, 0.5 * thr, 0.2).unwrap());
        assert!(!check_budget_condition(&pi, &s, 2.0 * thr, 0.2).unwrap());
        assert!(check_budget_condition(&pi, &s, 1e-300, 0.2).unwrap());
        let none = BanditSpec::new(vec![1.0, -1.0]).unwrap();
        assert!(check_budget_condition(&TabularPolicy::uniform(2), &none, 0.1, 0.2).is_err());
    }

    #[test]
    fn min_kl_ratio_matches_g() {
        let old = TabularPolicy::new(vec![0.3, 0.5, 0.2]).unwrap();
        let new = min_kl_with_ratio(&old, 0, 1.2).unwrap();
        assert_abs_diff_eq!(new.prob(0), 0.36, epsilon = 1e-15);
        assert_abs_diff_eq!(
            kl_divergence(old.probs(), new.probs()),
            eval_g(0.3, 1.2).unwrap(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn csv_has_header_and_rows() {
        let s = BanditSpec::three_armed();
        let c = exploration_curve_exact(&TabularPolicy::three_armed_start(), &s, &PPO, 2, 100, &cfg()).unwrap();
        let mut buf = Vec::new();
        write_curves_csv(&[("ppo", &c)], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), "t,e_t,rule,exact");
        assert_eq!(text.lines().count(), 4);
        assert!(text.lines().nth(2).unwrap().starts_with("1,0.824"));
    }
}
