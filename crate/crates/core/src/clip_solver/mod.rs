//! Trust-region-guided clipping ranges.
//!
//! For a discrete policy the largest and smallest probability ratio reachable
//! on one action inside a KL ball of radius `delta` around the old policy are the
//! two roots of
//!
//! ```text
//! g(p, X) = (1 - p) ln((1 - p) / (1 - pX)) - p ln X = delta
//! ```
//!
//! where `p` is the old probability of the action. `g(p, .)` is strictly convex,
//! vanishes at `X = 1`, decreases on `(0, 1)` and increases on `(1, 1/p)`.
//!
//! Both roots are solved in coordinates where they stay representable at the
//! edges of the simplex: the lower root as `ln l`, and the upper root as
//! `ln(1 - p u)`, the log of the mass left for the other actions. In those
//! coordinates each branch is a convex decreasing function with an explicit
//! bracket, so a safeguarded Newton iteration converges from any start.

mod gaussian;

pub use gaussian::{
    gaussian_adaptive_delta, gaussian_clip_range, gaussian_clip_range_multi, kl_standard_to, log_density_ratio,
    GaussianBoundary, GaussianQuery,
};

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Residual target is tightened to this fraction of `delta` for small budgets so
/// that tiny trust regions still resolve the actual root rather than any point
/// with `g` below `abs_tol`.
const RELATIVE_RESIDUAL: f64 = 1e-9;

/// A positive-advantage arm of the adaptive budget is evaluated at most at this
/// fraction of `1 / (1 + epsilon)`. Beyond `1 / (1 + epsilon)` the ratio `1 + epsilon`
/// leaves the domain of `g` and the budget would be infinite.
pub const POSITIVE_ARM_MASS: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Residual tolerance on `|g - delta|`, in nats.
    pub abs_tol: f64,
    pub max_iter: usize,
    /// Probabilities are clamped to `[p_min, 1 - p_min]` before solving.
    pub p_min: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            abs_tol: 1e-10,
            max_iter: 200,
            p_min: 1e-8,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0) {
            return Err(Error::invalid(format!("abs_tol must be > 0, got {}", self.abs_tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::invalid("max_iter must be at least 1"));
        }
        if !(self.p_min > 0.0 && self.p_min < 0.5) {
            return Err(Error::invalid(format!(
                "p_min must lie in (0, 0.5), got {}",
                self.p_min
            )));
        }
        Ok(())
    }

    pub fn clamp(&self, p: f64) -> f64 {
        p.clamp(self.p_min, 1.0 - self.p_min)
    }
}

/// Old-policy probability of an action together with the KL budget.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstraintPoint {
    p: f64,
    delta: f64,
    clamped: bool,
}

impl ConstraintPoint {
    /// Validates `p ∈ [0, 1]` and `delta > 0`, then clamps `p` into
    /// `[p_min, 1 - p_min]`.
    pub fn new(p: f64, delta: f64, config: &SolverConfig) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::invalid(format!("probability must lie in [0, 1], got {p}")));
        }
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(Error::invalid(format!("KL budget must be finite and > 0, got {delta}")));
        }
        let clamped_p = config.clamp(p);
        Ok(ConstraintPoint {
            p: clamped_p,
            delta,
            clamped: clamped_p != p,
        })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Whether `p` had to be moved into `[p_min, 1 - p_min]`.
    pub fn was_clamped(&self) -> bool {
        self.clamped
    }
}

/// Lower/upper bound on the probability ratio of one state-action.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClipRange {
    pub lower: f64,
    pub upper: f64,
}

impl ClipRange {
    pub fn new(lower: f64, upper: f64) -> Self {
        ClipRange { lower, upper }
    }

    /// The constant PPO range `(1 - epsilon, 1 + epsilon)`.
    pub fn constant(epsilon: f64) -> Self {
        ClipRange {
            lower: 1.0 - epsilon,
            upper: 1.0 + epsilon,
        }
    }

    pub fn clip(&self, ratio: f64) -> f64 {
        ratio.clamp(self.lower, self.upper)
    }

    /// `0 < lower < 1 < upper`.
    pub fn is_proper(&self) -> bool {
        self.lower > 0.0 && self.lower < 1.0 && self.upper > 1.0
    }
}

/// A range widened so that it always contains `[1 - epsilon, 1 + epsilon]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncatedClipRange {
    pub lower: f64,
    pub upper: f64,
    pub epsilon: f64,
}

impl TruncatedClipRange {
    pub fn range(&self) -> ClipRange {
        ClipRange::new(self.lower, self.upper)
    }
}

pub fn truncate_range(range: ClipRange, epsilon: f64) -> TruncatedClipRange {
    TruncatedClipRange {
        lower: range.lower.min(1.0 - epsilon),
        upper: range.upper.max(1.0 + epsilon),
        epsilon,
    }
}

/// Both roots of `g(p, X) = delta`, with the coordinates they were solved in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RangeSolution {
    pub range: ClipRange,
    /// `ln l`.
    pub log_lower: f64,
    /// `ln(1 - p u)`.
    pub log_upper_slack: f64,
    /// Solver steps spent on both branches.
    pub iterations: usize,
}

impl RangeSolution {
    /// `g - delta` at both roots, evaluated in the solve coordinates so that
    /// roots too close to `0` or `1/p` for a plain `f64` ratio are still
    /// checked exactly.
    pub fn residuals(&self, point: &ConstraintPoint) -> (f64, f64) {
        let branch = Branches::new(point.p());
        (
            branch.lower(self.log_lower).0 - point.delta(),
            branch.upper(self.log_upper_slack).0 - point.delta(),
        )
    }
}

/// `g(p, x)` evaluated directly on the ratio.
pub fn eval_g(p: f64, x: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::invalid(format!("probability must lie in (0, 1), got {p}")));
    }
    // 1 - p x with a single rounding
    let rest = (-p).mul_add(x, 1.0);
    if !(x > 0.0) || !(rest > 0.0) {
        return Err(Error::Domain { p, x, limit: 1.0 / p });
    }
    // (1 - p) / (1 - p x) = 1 + p (x - 1) / (1 - p x), exact zero at x = 1
    Ok((1.0 - p) * (p * (x - 1.0) / rest).ln_1p() - p * x.ln())
}

/// Derivative of `g(p, .)` at `x`.
pub fn eval_g_derivative(p: f64, x: f64) -> Result<f64> {
    eval_g(p, x)?;
    let rest = (-p).mul_add(x, 1.0);
    Ok(p * (1.0 - p) / rest - p / x)
}

/// The two branches of `g` in solve coordinates, with derivatives.
struct Branches {
    p: f64,
    ln_p: f64,
    ln_q: f64,
}

impl Branches {
    fn new(p: f64) -> Self {
        Branches {
            p,
            ln_p: p.ln(),
            ln_q: (-p).ln_1p(),
        }
    }

    /// `g(p, e^y)` and its derivative in `y`; decreasing and convex on `y < 0`.
    fn lower(&self, y: f64) -> (f64, f64) {
        let p = self.p;
        let px = p * y.exp();
        let value = (1.0 - p) * (self.ln_q - (-px).ln_1p()) - p * y;
        let slope = (1.0 - p) * px / (1.0 - px) - p;
        (value, slope)
    }

    /// `g(p, (1 - e^z) / p)` and its derivative in `z`; decreasing and convex on
    /// `z < ln(1 - p)`.
    fn upper(&self, z: f64) -> (f64, f64) {
        let p = self.p;
        let taken = -z.exp_m1(); // p u
        let value = (1.0 - p) * (self.ln_q - z) - p * (taken.ln() - self.ln_p);
        let slope = -(1.0 - p) + p * z.exp() / taken;
        (value, slope)
    }

    fn lower_bracket(&self, delta: f64) -> (f64, f64) {
        // g >= (1 - p) ln(1 - p) - p y, so this point has g >= delta
        let asymptote = ((1.0 - self.p) * self.ln_q - delta) / self.p;
        (asymptote - 1.0, asymptote)
    }

    fn upper_bracket(&self, delta: f64) -> (f64, f64) {
        // g >= (1 - p)(ln(1 - p) - z) + p ln p
        let asymptote = self.ln_q - (delta - self.p * self.ln_p) / (1.0 - self.p);
        (asymptote - 1.0, asymptote)
    }

    /// `X - 1 ≈ ±sqrt(2 delta (1 - p) / p)` from the curvature at `X = 1`.
    fn quadratic_offset(&self, delta: f64) -> f64 {
        (2.0 * delta * (1.0 - self.p) / self.p).sqrt()
    }
}

/// Safeguarded Newton for a strictly decreasing convex `f` with
/// `f(lo) > 0 > f(hi)`. Returns the root and the number of steps taken after
/// the first evaluation.
///
/// Once the residual is inside `tol` one more Newton step is applied without
/// re-evaluating, which moves the root error from `tol / |f'|` to roughly its
/// square. Steps that stop moving `x` at the ulp level also count as converged,
/// since `f` cannot be resolved any further in double precision.
fn decreasing_root(
    f: impl Fn(f64) -> (f64, f64),
    mut lo: f64,
    mut hi: f64,
    start: f64,
    tol: f64,
    max_iter: usize,
) -> Result<(f64, usize)> {
    let mut x = if start > lo && start < hi {
        start
    } else {
        0.5 * (lo + hi)
    };
    let mut residual = f64::NAN;
    for step in 0..max_iter {
        let (fx, slope) = f(x);
        residual = fx;
        let newton = x - fx / slope;
        let newton_ok = slope < 0.0 && newton.is_finite();
        if fx.abs() <= tol {
            let polished = if newton_ok && newton >= lo && newton <= hi {
                newton
            } else {
                x
            };
            return Ok((polished, step));
        }
        if fx > 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let next = if newton_ok && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (next - x).abs() <= 4.0 * f64::EPSILON * x.abs().max(f64::MIN_POSITIVE) {
            return Ok((next, step + 1));
        }
        if !(hi > lo) {
            break;
        }
        x = next;
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
        lo,
        hi,
        residual,
    })
}

fn residual_target(delta: f64, config: &SolverConfig) -> f64 {
    config.abs_tol.min(delta * RELATIVE_RESIDUAL)
}

/// Solves both roots of `g(p, X) = delta`.
pub fn solve_clip_range(point: &ConstraintPoint, config: &SolverConfig) -> Result<ClipRange> {
    Ok(solve_clip_range_detailed(point, config, None)?.range)
}

/// Solves both roots, optionally starting from a nearby range (for instance an
/// interpolated table entry).
pub fn solve_clip_range_detailed(
    point: &ConstraintPoint,
    config: &SolverConfig,
    guess: Option<ClipRange>,
) -> Result<RangeSolution> {
    config.validate()?;
    let p = point.p();
    let delta = point.delta();
    let branch = Branches::new(p);
    let tol = residual_target(delta, config);
    let offset = branch.quadratic_offset(delta);

    let (y_lo, y_asym) = branch.lower_bracket(delta);
    let y_start = match guess {
        Some(g) if g.lower > 0.0 && g.lower < 1.0 => g.lower.ln(),
        _ if offset < 1.0 => (-offset).ln_1p().max(y_asym),
        _ => y_asym,
    };
    let (log_lower, lower_iters) = decreasing_root(
        |y| shifted(branch.lower(y), delta),
        y_lo,
        0.0,
        y_start,
        tol,
        config.max_iter,
    )?;

    let (z_lo, z_asym) = branch.upper_bracket(delta);
    let z_hi = branch.ln_q;
    let slack_from = |u: f64| (-p).mul_add(u, 1.0);
    let z_start = match guess {
        Some(g) if g.upper > 1.0 && slack_from(g.upper) > 0.0 => slack_from(g.upper).ln(),
        _ => {
            let slack = slack_from(1.0 + offset);
            if slack > 0.0 {
                slack.ln().max(z_asym)
            } else {
                z_asym
            }
        }
    };
    let (log_upper_slack, upper_iters) = decreasing_root(
        |z| shifted(branch.upper(z), delta),
        z_lo,
        z_hi,
        z_start,
        tol,
        config.max_iter,
    )?;

    let lower = log_lower.exp().max(f64::MIN_POSITIVE);
    let upper = -log_upper_slack.exp_m1() / p;
    Ok(RangeSolution {
        range: ClipRange { lower, upper },
        log_lower,
        log_upper_slack,
        iterations: lower_iters + upper_iters,
    })
}

fn shifted((value, slope): (f64, f64), delta: f64) -> (f64, f64) {
    (value - delta, slope)
}

/// KL budget matched to the PPO coefficient: the larger of `g(p+, 1 + epsilon)` and
/// `g(p-, 1 - epsilon)`. A missing sign class drops its arm.
pub fn adaptive_delta(p_plus: Option<f64>, p_minus: Option<f64>, epsilon: f64) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::invalid(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    let plus = p_plus.map(|p| eval_g(p, 1.0 + epsilon)).transpose()?;
    let minus = p_minus.map(|p| eval_g(p, 1.0 - epsilon)).transpose()?;
    match (plus, minus) {
        (None, None) => Err(Error::EmptyBatch),
        (Some(a), None) | (None, Some(a)) => Ok(a),
        (Some(a), Some(b)) => Ok(a.max(b)),
    }
}

/// Largest probability at which the positive arm of [`adaptive_delta`] is evaluated.
pub fn positive_arm_ceiling(epsilon: f64) -> f64 {
    POSITIVE_ARM_MASS / (1.0 + epsilon)
}

/// The probabilities the adaptive budget is scaled against.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BatchExtremes {
    /// Largest clamped probability among positive-advantage samples, capped at
    /// [`positive_arm_ceiling`].
    pub p_plus: Option<f64>,
    /// Largest clamped probability among negative-advantage samples.
    pub p_minus: Option<f64>,
}

impl BatchExtremes {
    pub fn from_samples(samples: impl IntoIterator<Item = (f64, f64)>, epsilon: f64, config: &SolverConfig) -> Self {
        let mut out = BatchExtremes::default();
        for (p, advantage) in samples {
            let p = config.clamp(p);
            if advantage > 0.0 {
                out.p_plus = Some(out.p_plus.map_or(p, |m: f64| m.max(p)));
            } else if advantage < 0.0 {
                out.p_minus = Some(out.p_minus.map_or(p, |m: f64| m.max(p)));
            }
        }
        out.p_plus = out.p_plus.map(|p| p.min(positive_arm_ceiling(epsilon)));
        out
    }

    pub fn delta(&self, epsilon: f64) -> Result<f64> {
        adaptive_delta(self.p_plus, self.p_minus, epsilon)
    }
}
