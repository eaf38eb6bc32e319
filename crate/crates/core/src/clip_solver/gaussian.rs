//! Clipping ranges for Gaussian policies.
//!
//! After standardizing the sampled action, `z = (a - mu) / sigma`, the old policy
//! is `N(0, 1)` and the question becomes: over all `N(m, s^2)` with
//! `KL(N(0,1) || N(m, s^2)) <= delta`, how large and how small can the density
//! ratio at `z` get? The ratio has no interior stationary point, so both extremes
//! sit on the boundary `KL = delta`. Writing `t = ln s`, the boundary is
//! `m^2 = 2 e^{2t} (delta + 1/2 - t) - 1`, nonempty for `t` between two roots, and
//! the search is one-dimensional in `t`.

use super::{ClipRange, SolverConfig};
use crate::error::{Error, Result};

const SCAN_POINTS: usize = 48;
const GOLDEN_TOL: f64 = 1e-11;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianQuery {
    /// Standardized action offset `(a - mu) / sigma`.
    pub z: f64,
    /// Per-dimension KL budget.
    pub delta: f64,
}

/// `KL(N(0, 1) || N(mu, sigma^2))`.
pub fn kl_standard_to(mu: f64, sigma: f64) -> f64 {
    sigma.ln() + (1.0 + mu * mu) / (2.0 * sigma * sigma) - 0.5
}

/// `ln N(z; mu, sigma^2) - ln N(z; 0, 1)`.
pub fn log_density_ratio(z: f64, mu: f64, sigma: f64) -> f64 {
    let d = z - mu;
    -sigma.ln() - d * d / (2.0 * sigma * sigma) + 0.5 * z * z
}

/// The saturated KL boundary for one budget, reusable across many offsets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianBoundary {
    delta: f64,
    t_min: f64,
    t_max: f64,
    max_iter: usize,
}

impl GaussianBoundary {
    pub fn new(delta: f64, config: &SolverConfig) -> Result<Self> {
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(Error::invalid(format!("KL budget must be finite and > 0, got {delta}")));
        }
        let h = |t: f64| mean_sq(delta, t);
        // h rises from -1 to its peak at t = delta, then falls to -1 at t = delta + 1/2
        let mut far = -1.0;
        while h(far) >= 0.0 {
            far *= 2.0;
            if far < -1e6 {
                return Err(Error::Numerical(format!(
                    "no lower log-scale bound for delta = {delta}"
                )));
            }
        }
        let t_min = bisect_sign_change(h, far, delta.min(0.0), config.max_iter)?;
        let t_max = bisect_sign_change(h, delta + 0.5, delta, config.max_iter)?;
        Ok(GaussianBoundary {
            delta,
            t_min,
            t_max,
            max_iter: config.max_iter,
        })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Range of the log-scale `ln s` over which the boundary is nonempty.
    pub fn log_scale_span(&self) -> (f64, f64) {
        (self.t_min, self.t_max)
    }

    /// Largest and smallest log density ratio at `z` on the boundary.
    pub fn log_ratio_extremes(&self, z: f64) -> Result<(f64, f64)> {
        if !z.is_finite() {
            return Err(Error::invalid(format!("standardized offset must be finite, got {z}")));
        }
        // the problem is symmetric under (z, m) -> (-z, -m)
        let z = z.abs();
        let delta = self.delta;
        let toward = |t: f64| {
            let m = mean_sq(delta, t).max(0.0).sqrt();
            log_density_ratio(z, m, t.exp())
        };
        let away = |t: f64| {
            let m = mean_sq(delta, t).max(0.0).sqrt();
            -log_density_ratio(z, -m, t.exp())
        };
        let hi = maximize(toward, self.t_min, self.t_max, self.max_iter)?;
        let lo = -maximize(away, self.t_min, self.t_max, self.max_iter)?;
        Ok((lo, hi))
    }

    pub fn range(&self, z: f64) -> Result<ClipRange> {
        let (lo, hi) = self.log_ratio_extremes(z)?;
        Ok(ClipRange::new(lo.exp(), hi.exp()))
    }
}

/// `m^2` on the boundary `KL = delta` at log-scale `t`.
fn mean_sq(delta: f64, t: f64) -> f64 {
    2.0 * (2.0 * t).exp() * (delta + 0.5 - t) - 1.0
}

/// Root of `f` between `neg` (where `f < 0`) and `pos` (where `f >= 0`).
fn bisect_sign_change(f: impl Fn(f64) -> f64, mut neg: f64, mut pos: f64, max_iter: usize) -> Result<f64> {
    for _ in 0..max_iter {
        let mid = 0.5 * (neg + pos);
        if mid == neg || mid == pos {
            return Ok(pos);
        }
        if f(mid) < 0.0 {
            neg = mid;
        } else {
            pos = mid;
        }
    }
    if (pos - neg).abs() <= 1e-12 {
        Ok(pos)
    } else {
        Err(Error::NoConvergence {
            iterations: max_iter,
            lo: neg.min(pos),
            hi: neg.max(pos),
            residual: f(pos),
        })
    }
}

/// Grid scan followed by golden-section refinement around the best grid point.
fn maximize(f: impl Fn(f64) -> f64, lo: f64, hi: f64, max_iter: usize) -> Result<f64> {
    let step = (hi - lo) / (SCAN_POINTS - 1) as f64;
    let (mut best_i, mut best) = (0, f64::NEG_INFINITY);
    for i in 0..SCAN_POINTS {
        let v = f(lo + step * i as f64);
        if v > best {
            best = v;
            best_i = i;
        }
    }
    let mut a = lo + step * best_i.saturating_sub(1) as f64;
    let mut b = (lo + step * (best_i + 1) as f64).min(hi);
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    let mut iter = 0;
    while b - a > GOLDEN_TOL {
        iter += 1;
        if iter > max_iter {
            return Err(Error::NoConvergence {
                iterations: max_iter,
                lo: a,
                hi: b,
                residual: b - a,
            });
        }
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = f(d);
        }
    }
    Ok(best.max(fc).max(fd))
}

/// Extreme density ratios at one standardized offset inside a KL ball of radius
/// `query.delta` around the standard normal.
pub fn gaussian_clip_range(query: &GaussianQuery, config: &SolverConfig) -> Result<ClipRange> {
    GaussianBoundary::new(query.delta, config)?.range(query.z)
}

/// Diagonal Gaussian over `zs.len()` dimensions. The budget is split evenly
/// across dimensions (diagonal KL is additive), each dimension is solved on its
/// own, and the joint ratio bounds are the products of the per-dimension bounds.
pub fn gaussian_clip_range_multi(zs: &[f64], delta: f64, config: &SolverConfig) -> Result<ClipRange> {
    if zs.is_empty() {
        return Err(Error::invalid("action must have at least one dimension"));
    }
    let boundary = GaussianBoundary::new(delta / zs.len() as f64, config)?;
    let mut log_lo = 0.0;
    let mut log_hi = 0.0;
    for &z in zs {
        let (lo, hi) = boundary.log_ratio_extremes(z)?;
        log_lo += lo;
        log_hi += hi;
    }
    Ok(ClipRange::new(log_lo.exp(), log_hi.exp()))
}

/// KL budget for a diagonal Gaussian matched to the PPO coefficient.
///
/// `z_plus` (`z_minus`) is the standardized offset vector of the reference
/// positive- (negative-) advantage sample, normally the most likely one. The
/// budget is the smallest total `delta` for which the joint ratio bound at that
/// offset reaches `1 + epsilon` (resp. `1 - epsilon`), with the budget split
/// evenly across dimensions as in [`gaussian_clip_range_multi`]. Per-dimension
/// bounds grow with `|z|`, so in one dimension every sample of the class then
/// gets at least the PPO range.
pub fn gaussian_adaptive_delta(
    z_plus: Option<&[f64]>,
    z_minus: Option<&[f64]>,
    epsilon: f64,
    config: &SolverConfig,
) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::invalid(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    let dims = z_plus.or(z_minus).map_or(1, |z| z.len());
    if dims == 0 || [z_plus, z_minus].iter().flatten().any(|z| z.len() != dims) {
        return Err(Error::invalid("reference offsets must share a nonzero dimension"));
    }
    let target_hi = (1.0 + epsilon).ln();
    let target_lo = (1.0 - epsilon).ln();
    let joint = |b: &GaussianBoundary, zs: &[f64]| -> Result<(f64, f64)> {
        let mut lo = 0.0;
        let mut hi = 0.0;
        for &z in zs {
            let (l, h) = b.log_ratio_extremes(z)?;
            lo += l;
            hi += h;
        }
        Ok((lo, hi))
    };
    let plus = z_plus
        .map(|zs| budget_reaching(|b| Ok(joint(b, zs)?.1 - target_hi), config))
        .transpose()?;
    let minus = z_minus
        .map(|zs| budget_reaching(|b| Ok(target_lo - joint(b, zs)?.0), config))
        .transpose()?;
    let dim_delta = match (plus, minus) {
        (None, None) => return Err(Error::EmptyBatch),
        (Some(a), None) | (None, Some(a)) => a,
        (Some(a), Some(b)) => a.max(b),
    };
    Ok(dim_delta * dims as f64)
}

/// Smallest per-dimension budget at which `excess` (increasing in the budget)
/// becomes nonnegative: Illinois false position on `ln delta`, keeping a
/// bracket throughout.
fn budget_reaching(excess: impl Fn(&GaussianBoundary) -> Result<f64>, config: &SolverConfig) -> Result<f64> {
    let at = |log_delta: f64| -> Result<f64> { excess(&GaussianBoundary::new(log_delta.exp(), config)?) };
    let (mut lo, mut hi) = (-40.0_f64, 2.0_f64);
    let mut f_lo = at(lo)?;
    if f_lo >= 0.0 {
        return Ok(lo.exp());
    }
    let mut f_hi = at(hi)?;
    while f_hi < 0.0 {
        lo = hi;
        f_lo = f_hi;
        hi += 2.0;
        if hi > 10.0 {
            return Err(Error::Numerical("ratio target unreachable for any budget".into()));
        }
        f_hi = at(hi)?;
    }
    let mut last_side = 0i8;
    for _ in 0..config.max_iter {
        if hi - lo <= 1e-10 {
            break;
        }
        let mut mid = hi - f_hi * (hi - lo) / (f_hi - f_lo);
        if !(mid > lo && mid < hi) {
            mid = 0.5 * (lo + hi);
        }
        let f_mid = at(mid)?;
        if f_mid == 0.0 {
            return Ok(mid.exp());
        }
        if f_mid > 0.0 {
            hi = mid;
            f_hi = f_mid;
            if last_side == 1 {
                f_lo *= 0.5;
            }
            last_side = 1;
        } else {
            lo = mid;
            f_lo = f_mid;
            if last_side == -1 {
                f_hi *= 0.5;
            }
            last_side = -1;
        }
        if f_hi.abs() <= 1e-14 {
            break;
        }
    }
    Ok(hi.exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn kl_is_zero_at_the_standard_normal() {
        assert_eq!(kl_standard_to(0.0, 1.0), 0.0);
        assert!(kl_standard_to(0.3, 1.0) > 0.0);
        assert!(kl_standard_to(0.0, 1.3) > 0.0);
    }

    #[test]
    fn boundary_points_saturate_the_budget() {
        let cfg = SolverConfig::default();
        let b = GaussianBoundary::new(0.05, &cfg).unwrap();
        let (t0, t1) = b.log_scale_span();
        assert!(t0 < 0.0 && t1 > 0.05);
        for i in 0..=10 {
            let t = t0 + (t1 - t0) * i as f64 / 10.0;
            let m = mean_sq(0.05, t).max(0.0).sqrt();
            assert_abs_diff_eq!(kl_standard_to(m, t.exp()), 0.05, epsilon = 1e-9);
        }
    }

    #[test]
    fn zero_budget_limit_is_the_unit_range() {
        let cfg = SolverConfig::default();
        let r = gaussian_clip_range(&GaussianQuery { z: 0.7, delta: 1e-12 }, &cfg).unwrap();
        assert_abs_diff_eq!(r.lower, 1.0, epsilon = 1e-5);
        assert_abs_diff_eq!(r.upper, 1.0, epsilon = 1e-5);
    }

    #[test]
    fn reflection_symmetry() {
        let cfg = SolverConfig::default();
        for &z in &[0.3, 1.5, 2.7] {
            let a = gaussian_clip_range(&GaussianQuery { z, delta: 0.03 }, &cfg).unwrap();
            let b = gaussian_clip_range(&GaussianQuery { z: -z, delta: 0.03 }, &cfg).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn multi_dimensional_ranges_multiply() {
        let cfg = SolverConfig::default();
        let one = gaussian_clip_range(&GaussianQuery { z: 0.5, delta: 0.02 }, &cfg).unwrap();
        let two = gaussian_clip_range_multi(&[0.5, 0.5], 0.04, &cfg).unwrap();
        assert_abs_diff_eq!(two.upper, one.upper * one.upper, epsilon = 1e-12);
        assert_abs_diff_eq!(two.lower, one.lower * one.lower, epsilon = 1e-12);
    }

    #[test]
    fn adaptive_budget_hits_the_ppo_bound_at_the_reference_offset() {
        let cfg = SolverConfig::default();
        let d = gaussian_adaptive_delta(Some(&[0.4]), None, 0.2, &cfg).unwrap();
        let r = gaussian_clip_range(&GaussianQuery { z: 0.4, delta: d }, &cfg).unwrap();
        assert_abs_diff_eq!(r.upper, 1.2, epsilon = 1e-8);
        let d = gaussian_adaptive_delta(None, Some(&[1.0]), 0.2, &cfg).unwrap();
        let r = gaussian_clip_range(&GaussianQuery { z: 1.0, delta: d }, &cfg).unwrap();
        assert_abs_diff_eq!(r.lower, 0.8, epsilon = 1e-8);
        assert!(matches!(
            gaussian_adaptive_delta(None, None, 0.2, &cfg),
            Err(Error::EmptyBatch)
        ));
        let d = gaussian_adaptive_delta(Some(&[0.4, -1.1]), None, 0.2, &cfg).unwrap();
        let r = gaussian_clip_range_multi(&[0.4, -1.1], d, &cfg).unwrap();
        assert_abs_diff_eq!(r.upper, 1.2, epsilon = 1e-8);
    }
}
