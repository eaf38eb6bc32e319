//! wasm-bindgen bindings for the static demo page in `www/`.
//!
//! Every export takes plain numbers or comma-separated lists and returns a JSON
//! string. The `*_json` functions hold the logic and are what native tests call.

use serde::Serialize;
use trgppo::bandit_dynamics::{
    budget_threshold, exploration_curve_exact, BanditSpec, ClipRule, TabularPolicy, DEFAULT_ENUMERATION_BUDGET,
};
use trgppo::clip_solver::{adaptive_delta, solve_clip_range_detailed, truncate_range, ConstraintPoint, SolverConfig};
use wasm_bindgen::prelude::*;

/// Longest horizon the page may request; keeps enumeration interactive.
pub const MAX_HORIZON: usize = 8;

#[derive(Serialize)]
struct RangeOut {
    p: f64,
    delta: f64,
    lower: f64,
    upper: f64,
    truncated_lower: f64,
    truncated_upper: f64,
    residual_lower: f64,
    residual_upper: f64,
}

#[derive(Serialize)]
struct ProfileOut {
    delta: f64,
    p: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

#[derive(Serialize)]
struct CurvesOut {
    ppo: Vec<f64>,
    trgppo: Vec<f64>,
    /// Largest budget at which the most likely sub-optimal arm keeps the PPO upper bound.
    budget_threshold: Option<f64>,
}

fn to_json<T: Serialize>(v: &T) -> Result<String, String> {
    serde_json::to_string(v).map_err(|e| e.to_string())
}

fn parse_list(text: &str) -> Result<Vec<f64>, String> {
    text.split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|_| format!("`{s}` is not a number")))
        .collect()
}

/// Both roots at `(p, delta)` and their truncation by `epsilon`.
pub fn solve_range_json(p: f64, delta: f64, epsilon: f64) -> Result<String, String> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(format!("epsilon must lie in (0, 1), got {epsilon}"));
    }
    let cfg = SolverConfig::default();
    let point = ConstraintPoint::new(p, delta, &cfg).map_err(|e| e.to_string())?;
    let sol = solve_clip_range_detailed(&point, &cfg, None).map_err(|e| e.to_string())?;
    let (residual_lower, residual_upper) = sol.residuals(&point);
    let t = truncate_range(sol.range, epsilon);
    to_json(&RangeOut {
        p: point.p(),
        delta,
        lower: sol.range.lower,
        upper: sol.range.upper,
        truncated_lower: t.lower,
        truncated_upper: t.upper,
        residual_lower,
        residual_upper,
    })
}

/// Ranges over `points` logit-spaced probabilities for the budget that gives
/// a sample at `p_ref` exactly the PPO range on both sides.
pub fn range_profile_json(p_ref: f64, epsilon: f64, points: usize) -> Result<String, String> {
    if !(p_ref > 0.0 && p_ref < 1.0 / (1.0 + epsilon)) {
        return Err(format!(
            "reference probability must lie in (0, 1/(1+epsilon)), got {p_ref}"
        ));
    }
    if !(2..=2000).contains(&points) {
        return Err(format!("points must lie in [2, 2000], got {points}"));
    }
    let delta = adaptive_delta(Some(p_ref), Some(p_ref), epsilon).map_err(|e| e.to_string())?;
    let cfg = SolverConfig::default();
    let (lo, hi) = ((1e-3f64 / 0.999).ln(), (0.999f64 / 1e-3).ln());
    let mut out = ProfileOut {
        delta,
        p: Vec::new(),
        lower: Vec::new(),
        upper: Vec::new(),
    };
    for i in 0..points {
        let x = lo + (hi - lo) * i as f64 / (points - 1) as f64;
        let p = 1.0 / (1.0 + (-x).exp());
        let point = ConstraintPoint::new(p, delta, &cfg).map_err(|e| e.to_string())?;
        let sol = solve_clip_range_detailed(&point, &cfg, None).map_err(|e| e.to_string())?;
        out.p.push(p);
        out.lower.push(sol.range.lower);
        out.upper.push(sol.range.upper);
    }
    to_json(&out)
}

/// Exact exploration curves `E_t` of the constant and trust-region rules.
pub fn exploration_curves_json(
    rewards: &str,
    probs: &str,
    epsilon: f64,
    delta: f64,
    horizon: usize,
) -> Result<String, String> {
    if horizon > MAX_HORIZON {
        return Err(format!("horizon is capped at {MAX_HORIZON} in the demo"));
    }
    let spec = BanditSpec::new(parse_list(rewards)?).map_err(|e| e.to_string())?;
    let policy = TabularPolicy::new(parse_list(probs)?).map_err(|e| e.to_string())?;
    if policy.len() != spec.action_count() {
        return Err("rewards and probabilities need the same number of actions".into());
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(format!("epsilon must lie in (0, 1), got {epsilon}"));
    }
    let cfg = SolverConfig::default();
    let curve = |rule: ClipRule| {
        exploration_curve_exact(&policy, &spec, &rule, horizon, DEFAULT_ENUMERATION_BUDGET, &cfg)
            .map(|c| c.values)
            .map_err(|e| e.to_string())
    };
    to_json(&CurvesOut {
        ppo: curve(ClipRule::Constant { epsilon })?,
        trgppo: curve(ClipRule::TrustRegion { delta, epsilon })?,
        budget_threshold: budget_threshold(&policy, &spec, epsilon).ok().filter(|t| t.is_finite()),
    })
}

#[wasm_bindgen]
pub fn solve_range(p: f64, delta: f64, epsilon: f64) -> Result<String, JsValue> {
    solve_range_json(p, delta, epsilon).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn range_profile(p_ref: f64, epsilon: f64, points: usize) -> Result<String, JsValue> {
    range_profile_json(p_ref, epsilon, points).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn exploration_curves(
    rewards: &str,
    probs: &str,
    epsilon: f64,
    delta: f64,
    horizon: usize,
) -> Result<String, JsValue> {
    exploration_curves_json(rewards, probs, epsilon, delta, horizon).map_err(|e| JsValue::from_str(&e))
}
