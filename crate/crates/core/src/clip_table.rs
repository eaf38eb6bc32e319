//! Precomputed trust-region ranges over a probability grid.
//!
//! For a fixed budget the ranges depend on the old probability alone, so they
//! can be solved once on a grid and looked up. Knots are uniform in
//! `logit(p)`, which puts them densely near both ends of the simplex where the
//! upper bound moves fastest. Lookups interpolate `ln(1 - l)` and `ln(u - 1)`
//! linearly in `logit(p)`; both are smooth there, and the interpolated range is
//! always proper (`0 < l < 1 < u`). With `polish` set, the interpolated range
//! seeds the Newton solver, which then needs one or two steps.

use crate::clip_solver::{solve_clip_range_detailed, ClipRange, ConstraintPoint, SolverConfig};
use crate::error::{Error, Result};
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

const MAGIC: &[u8; 8] = b"TRGCLIP\0";
pub const FORMAT_VERSION: u32 = 1;
pub const DEFAULT_GRID_SIZE: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClipTableSpec {
    pub delta: f64,
    pub grid_size: usize,
    /// The grid spans `[p_min, 1 - p_min]`.
    pub p_min: f64,
    pub polish: bool,
}

impl ClipTableSpec {
    pub fn new(delta: f64) -> Self {
        ClipTableSpec {
            delta,
            grid_size: DEFAULT_GRID_SIZE,
            p_min: SolverConfig::default().p_min,
            polish: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0) || !self.delta.is_finite() {
            return Err(Error::invalid(format!(
                "table budget must be finite and > 0, got {}",
                self.delta
            )));
        }
        if self.grid_size < 2 {
            return Err(Error::invalid("a table needs at least two knots"));
        }
        if !(self.p_min > 0.0 && self.p_min < 0.5) {
            return Err(Error::invalid(format!(
                "p_min must lie in (0, 0.5), got {}",
                self.p_min
            )));
        }
        Ok(())
    }

    /// File name used by the on-disk cache. Encodes everything that changes the table.
    pub fn cache_file_name(&self) -> String {
        format!(
            "clip-table-v{FORMAT_VERSION}-delta{:e}-n{}-pmin{:e}.bin",
            self.delta, self.grid_size, self.p_min
        )
    }
}

fn logit(p: f64) -> f64 {
    p.ln() - (-p).ln_1p()
}

fn expit(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Result of a table lookup.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TableQuery {
    pub range: ClipRange,
    /// `p` fell outside the grid and was moved onto it.
    pub clamped: bool,
    /// Solver steps spent polishing (zero without polish).
    pub polish_steps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClipTable {
    spec: ClipTableSpec,
    knots: Vec<f64>,
    lowers: Vec<f64>,
    uppers: Vec<f64>,
    // interpolation coordinates
    logit_lo: f64,
    logit_step: f64,
    log_lower_gap: Vec<f64>,
    log_upper_gap: Vec<f64>,
    max_interpolation_error: f64,
}

impl ClipTable {
    pub fn build(spec: ClipTableSpec, solver: &SolverConfig) -> Result<Self> {
        spec.validate()?;
        let (knots, logit_lo, logit_step) = knot_grid(&spec);
        let mut lowers = Vec::with_capacity(knots.len());
        let mut uppers = Vec::with_capacity(knots.len());
        for (index, &p) in knots.iter().enumerate() {
            let point = ConstraintPoint::new(p, spec.delta, solver)?;
            let sol = solve_clip_range_detailed(&point, solver, None)
                .map_err(|e| Error::Numerical(format!("table knot {index} (p = {p}) failed: {e}")))?;
            lowers.push(sol.range.lower);
            uppers.push(sol.range.upper);
        }
        let mut table = ClipTable::assemble(spec, knots, lowers, uppers, logit_lo, logit_step);
        table.max_interpolation_error = table.measure_interpolation_error(solver)?;
        Ok(table)
    }

    fn assemble(
        spec: ClipTableSpec,
        knots: Vec<f64>,
        lowers: Vec<f64>,
        uppers: Vec<f64>,
        logit_lo: f64,
        logit_step: f64,
    ) -> Self {
        let log_lower_gap = lowers.iter().map(|l| (-l).ln_1p()).collect();
        let log_upper_gap = uppers.iter().map(|u| (u - 1.0).ln()).collect();
        ClipTable {
            spec,
            knots,
            lowers,
            uppers,
            logit_lo,
            logit_step,
            log_lower_gap,
            log_upper_gap,
            max_interpolation_error: f64::NAN,
        }
    }

    /// Largest unpolished error (ratio units, either bound) at the midpoints
    /// between knots.
    fn measure_interpolation_error(&self, solver: &SolverConfig) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for i in 0..self.knots.len() - 1 {
            let p = expit(self.logit_lo + self.logit_step * (i as f64 + 0.5));
            let exact = solve_clip_range_detailed(&ConstraintPoint::new(p, self.spec.delta, solver)?, solver, None)?;
            let approx = self.interpolate(p).0;
            worst = worst
                .max((approx.lower - exact.range.lower).abs())
                .max((approx.upper - exact.range.upper).abs());
        }
        Ok(worst)
    }

    pub fn spec(&self) -> &ClipTableSpec {
        &self.spec
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn lowers(&self) -> &[f64] {
        &self.lowers
    }

    pub fn uppers(&self) -> &[f64] {
        &self.uppers
    }

    pub fn max_interpolation_error(&self) -> f64 {
        self.max_interpolation_error
    }

    /// Uppers strictly decreasing and lowers non-decreasing along the grid.
    /// Lowers at tiny `p` underflow to the smallest positive `f64` and tie.
    pub fn is_monotone(&self) -> bool {
        self.uppers.windows(2).all(|w| w[0] > w[1]) && self.lowers.windows(2).all(|w| w[0] <= w[1])
    }

    fn interpolate(&self, p: f64) -> (ClipRange, bool) {
        let lo = self.knots[0];
        let hi = self.knots[self.knots.len() - 1];
        let clamped = !(lo..=hi).contains(&p);
        let p = p.clamp(lo, hi);
        if let Ok(i) = self.knots.binary_search_by(|k| k.total_cmp(&p)) {
            return (ClipRange::new(self.lowers[i], self.uppers[i]), clamped);
        }
        let pos = (logit(p) - self.logit_lo) / self.logit_step;
        let last = self.knots.len() - 1;
        let i = (pos.floor().max(0.0) as usize).min(last - 1);
        let frac = (pos - i as f64).clamp(0.0, 1.0);
        if frac == 0.0 {
            return (ClipRange::new(self.lowers[i], self.uppers[i]), clamped);
        }
        if frac == 1.0 {
            return (ClipRange::new(self.lowers[i + 1], self.uppers[i + 1]), clamped);
        }
        let mix = |v: &[f64]| v[i] + (v[i + 1] - v[i]) * frac;
        let lower = -mix(&self.log_lower_gap).exp_m1();
        let upper = 1.0 + mix(&self.log_upper_gap).exp();
        (ClipRange::new(lower, upper), clamped)
    }

    /// Range at `p` for the table's own budget.
    pub fn query(&self, p: f64, solver: &SolverConfig) -> Result<TableQuery> {
        let (range, clamped) = self.interpolate(p);
        if !self.spec.polish {
            return Ok(TableQuery {
                range,
                clamped,
                polish_steps: 0,
            });
        }
        let point = ConstraintPoint::new(p.clamp(0.0, 1.0), self.spec.delta, solver)?;
        let sol = solve_clip_range_detailed(&point, solver, Some(range))?;
        Ok(TableQuery {
            range: sol.range,
            clamped: clamped || point.was_clamped(),
            polish_steps: sol.iterations,
        })
    }

    /// Range at `p` for a different budget. The stored range is rescaled by
    /// `sqrt(delta / table_delta)` (the small-budget scaling of `X - 1`) and always
    /// polished.
    pub fn query_at(&self, p: f64, delta: f64, solver: &SolverConfig) -> Result<TableQuery> {
        let (range, clamped) = self.interpolate(p);
        let scale = (delta / self.spec.delta).sqrt();
        let guess = ClipRange::new(
            1.0 - ((1.0 - range.lower) * scale).min(1.0 - 1e-300),
            1.0 + (range.upper - 1.0) * scale,
        );
        let point = ConstraintPoint::new(p.clamp(0.0, 1.0), delta, solver)?;
        let sol = solve_clip_range_detailed(&point, solver, Some(guess))?;
        Ok(TableQuery {
            range: sol.range,
            clamped: clamped || point.was_clamped(),
            polish_steps: sol.iterations,
        })
    }

    /// Flat little-endian layout: magic, version, spec, then knots, lowers, uppers.
    pub fn write_binary(&self, mut out: impl Write) -> Result<()> {
        out.write_all(MAGIC)?;
        out.write_all(&FORMAT_VERSION.to_le_bytes())?;
        out.write_all(&self.spec.delta.to_le_bytes())?;
        out.write_all(&(self.spec.grid_size as u64).to_le_bytes())?;
        out.write_all(&self.spec.p_min.to_le_bytes())?;
        out.write_all(&[self.spec.polish as u8])?;
        out.write_all(&self.max_interpolation_error.to_le_bytes())?;
        for column in [&self.knots, &self.lowers, &self.uppers] {
            for v in column.iter() {
                out.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_binary(mut input: impl Read) -> Result<Self> {
        let mut magic = [0u8; 8];
        input.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::TableFormat("missing clip-table header".into()));
        }
        let version = u32::from_le_bytes(read_array(&mut input)?);
        if version != FORMAT_VERSION {
            return Err(Error::TableFormat(format!(
                "format version {version}, expected {FORMAT_VERSION}"
            )));
        }
        let delta = f64::from_le_bytes(read_array(&mut input)?);
        let grid_size = u64::from_le_bytes(read_array(&mut input)?) as usize;
        let p_min = f64::from_le_bytes(read_array(&mut input)?);
        let [polish] = read_array::<1>(&mut input)?;
        let max_err = f64::from_le_bytes(read_array(&mut input)?);
        let spec = ClipTableSpec {
            delta,
            grid_size,
            p_min,
            polish: polish != 0,
        };
        spec.validate().map_err(|e| Error::TableFormat(e.to_string()))?;
        let mut column = || -> Result<Vec<f64>> {
            (0..grid_size)
                .map(|_| Ok(f64::from_le_bytes(read_array(&mut input)?)))
                .collect()
        };
        let knots = column()?;
        let lowers = column()?;
        let uppers = column()?;
        let (expected, logit_lo, logit_step) = knot_grid(&spec);
        if expected != knots {
            return Err(Error::TableFormat("knots do not match the header".into()));
        }
        let mut table = ClipTable::assemble(spec, knots, lowers, uppers, logit_lo, logit_step);
        table.max_interpolation_error = max_err;
        Ok(table)
    }

    /// Whitespace-separated text: a commented header, then `p lower upper` rows.
    pub fn write_text(&self, mut out: impl Write) -> Result<()> {
        writeln!(
            out,
            "# clip table v{FORMAT_VERSION} delta={:e} grid_size={} p_min={:e} polish={}",
            self.spec.delta, self.spec.grid_size, self.spec.p_min, self.spec.polish
        )?;
        writeln!(out, "# p lower upper")?;
        for i in 0..self.knots.len() {
            writeln!(
                out,
                "{:.17e} {:.17e} {:.17e}",
                self.knots[i], self.lowers[i], self.uppers[i]
            )?;
        }
        Ok(())
    }

    /// Loads `dir/<cache_file_name>` if it exists and matches, otherwise builds
    /// the table and writes it there.
    pub fn load_or_build(dir: &Path, spec: ClipTableSpec, solver: &SolverConfig) -> Result<Self> {
        let path = cache_path(dir, &spec);
        if let Ok(bytes) = fs::read(&path) {
            if let Ok(table) = ClipTable::read_binary(bytes.as_slice()) {
                if table.spec == spec {
                    return Ok(table);
                }
            }
        }
        let table = ClipTable::build(spec, solver)?;
        fs::create_dir_all(dir)?;
        let mut buf = Vec::new();
        table.write_binary(&mut buf)?;
        fs::write(&path, buf)?;
        Ok(table)
    }
}

pub fn cache_path(dir: &Path, spec: &ClipTableSpec) -> PathBuf {
    dir.join(spec.cache_file_name())
}

fn knot_grid(spec: &ClipTableSpec) -> (Vec<f64>, f64, f64) {
    let lo = logit(spec.p_min);
    let hi = logit(1.0 - spec.p_min);
    let step = (hi - lo) / (spec.grid_size - 1) as f64;
    let knots = (0..spec.grid_size)
        .map(|i| {
            if i == 0 {
                spec.p_min
            } else if i == spec.grid_size - 1 {
                1.0 - spec.p_min
            } else {
                expit(lo + step * i as f64)
            }
        })
        .collect();
    (knots, lo, step)
}

fn read_array<const N: usize>(input: &mut impl Read) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    input
        .read_exact(&mut buf)
        .map_err(|e| Error::TableFormat(format!("truncated table: {e}")))?;
    Ok(buf)
}
