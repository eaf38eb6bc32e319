//! Run artifacts on disk.
//!
//! Every run gets its own directory named by the first 16 hex digits of its
//! config hash (SHA-256 of the config text). Trainer runs write
//!
//! * `config.txt`: the `key = value` config that reproduces the run,
//! * `manifest.json`: schema version, kind, hash, seed, the config and a summary,
//! * `returns.csv`: `iteration,timesteps,episodes,mean_return`
//!   (`mean_return` is empty when no episode finished),
//! * `diagnostics.csv`: `iteration,entropy,mean_kl,max_kl,upper_min,upper_mean,upper_max,
//!   saturation,delta,eta_hat,surrogate,bound_c,max_kl_bound,m_hat,value_loss`.
//!
//! Bandit runs write `manifest.json` and `returns.csv` with
//! `iteration,expected_reward,entropy`. Timings go into the manifest only, so
//! the CSV files are byte-identical across reruns. Aggregates live under
//! `reports/` as `summary.csv` and `summary.json`.

use crate::error::{Error, Result};
use crate::policy_opt::{is_trapped, BanditRun, BanditTask, TrainRunConfig};
use crate::ppo_trainer::TrainingRun;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

/// Bumped whenever a CSV or manifest layout changes.
pub const SCHEMA_VERSION: u32 = 1;

/// Trailing-window rule used for trapped flags in manifests and summaries.
pub const TRAP_THRESHOLD: f64 = 0.9;
pub const TRAP_WINDOW: f64 = 0.1;

pub const RETURNS_HEADER: &str = "iteration,timesteps,episodes,mean_return";
pub const DIAGNOSTICS_HEADER: &str = "iteration,entropy,mean_kl,max_kl,upper_min,upper_mean,upper_max,saturation,delta,eta_hat,surrogate,bound_c,max_kl_bound,m_hat,value_loss";
pub const BANDIT_RETURNS_HEADER: &str = "iteration,expected_reward,entropy";
pub const SUMMARY_HEADER: &str = "kind,env,method,runs,failed,trapped,mean_final_return,mean_entropy,mean_max_kl";

pub fn config_hash(config_text: &str) -> String {
    hex::encode(Sha256::digest(config_text.as_bytes()))
}

fn run_dir_name(hash: &str) -> &str {
    &hash[..16]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub env: String,
    pub method: String,
    pub failed: bool,
    pub trapped: Option<bool>,
    pub final_return: Option<f64>,
    pub mean_entropy: f64,
    pub mean_max_kl: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    /// `train` or `bandit-train`.
    pub kind: String,
    pub config_hash: String,
    pub seed: u64,
    pub config: serde_json::Value,
    pub files: Vec<String>,
    pub summary: RunSummary,
    pub failure: Option<String>,
    pub wall_seconds: Option<f64>,
    pub range_seconds: Option<f64>,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

pub fn write_returns_csv(run: &TrainingRun, mut out: impl Write) -> Result<()> {
    writeln!(out, "{RETURNS_HEADER}")?;
    for r in &run.returns {
        writeln!(
            out,
            "{},{},{},{}",
            r.iteration,
            r.timesteps,
            r.episodes,
            fmt_opt(r.mean_return)
        )?;
    }
    Ok(())
}

pub fn write_diagnostics_csv(run: &TrainingRun, mut out: impl Write) -> Result<()> {
    writeln!(out, "{DIAGNOSTICS_HEADER}")?;
    for d in &run.diagnostics {
        let b = &d.bound;
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            d.iteration,
            d.entropy,
            d.mean_kl,
            d.max_kl,
            d.upper_min,
            d.upper_mean,
            d.upper_max,
            d.saturation,
            if d.delta.is_nan() {
                String::new()
            } else {
                d.delta.to_string()
            },
            b.eta_hat,
            b.surrogate,
            b.c,
            b.max_kl,
            b.m_hat,
            d.value_loss
        )?;
    }
    Ok(())
}

pub fn write_bandit_returns_csv(run: &BanditRun, mut out: impl Write) -> Result<()> {
    writeln!(out, "{BANDIT_RETURNS_HEADER}")?;
    for (i, (r, h)) in run.curve.iter().zip(&run.entropy).enumerate() {
        writeln!(out, "{i},{r},{h}")?;
    }
    Ok(())
}

fn write_file(path: &Path, f: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<()> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    fs::write(path, buf)?;
    Ok(())
}

fn write_manifest(dir: &Path, manifest: &RunManifest) -> Result<()> {
    let text = serde_json::to_string_pretty(manifest)?;
    fs::write(dir.join("manifest.json"), text + "\n")?;
    Ok(())
}

/// Writes a trainer run under `root` and returns its directory.
pub fn write_training_run(root: &Path, run: &TrainingRun) -> Result<PathBuf> {
    let text = run.config.to_kv();
    let hash = config_hash(&text);
    let dir = root.join(run_dir_name(&hash));
    fs::create_dir_all(&dir)?;
    fs::write(dir.join("config.txt"), &text)?;
    write_file(&dir.join("returns.csv"), |b| write_returns_csv(run, b))?;
    write_file(&dir.join("diagnostics.csv"), |b| write_diagnostics_csv(run, b))?;
    let n = run.diagnostics.len().max(1) as f64;
    let manifest = RunManifest {
        schema_version: SCHEMA_VERSION,
        kind: "train".into(),
        config_hash: hash,
        seed: run.config.seed,
        config: serde_json::to_value(&run.config)?,
        files: vec!["config.txt".into(), "returns.csv".into(), "diagnostics.csv".into()],
        summary: RunSummary {
            env: run.config.env.clone(),
            method: run.config.variant.tag.name().into(),
            failed: run.failure.is_some(),
            trapped: None,
            final_return: run.final_return(),
            mean_entropy: run.mean_entropy(),
            mean_max_kl: Some(run.diagnostics.iter().map(|d| d.max_kl).sum::<f64>() / n),
        },
        failure: run.failure.clone(),
        wall_seconds: Some(run.total_seconds),
        range_seconds: Some(run.range_seconds),
    };
    write_manifest(&dir, &manifest)?;
    Ok(dir)
}

#[derive(Serialize)]
struct BanditConfigRecord<'a> {
    task: &'a BanditTask,
    config: &'a TrainRunConfig,
}

/// Writes a bandit training run under `root` and returns its directory.
pub fn write_bandit_run(root: &Path, task: &BanditTask, config: &TrainRunConfig, run: &BanditRun) -> Result<PathBuf> {
    let record = serde_json::to_value(BanditConfigRecord { task, config })?;
    let text = serde_json::to_string(&record)?;
    let hash = config_hash(&text);
    let dir = root.join(run_dir_name(&hash));
    fs::create_dir_all(&dir)?;
    write_file(&dir.join("returns.csv"), |b| write_bandit_returns_csv(run, b))?;
    let optimal = task.optimal_reward();
    let env = match task {
        BanditTask::Discrete(_) => "bandit",
        BanditTask::Continuous(_) => "continuous-bandit",
    };
    let manifest = RunManifest {
        schema_version: SCHEMA_VERSION,
        kind: "bandit-train".into(),
        config_hash: hash,
        seed: config.seed,
        config: record,
        files: vec!["returns.csv".into()],
        summary: RunSummary {
            env: env.into(),
            method: run.method.name().into(),
            failed: run.failure.is_some(),
            trapped: run
                .failure
                .is_none()
                .then(|| is_trapped(&run.curve, optimal, TRAP_THRESHOLD, TRAP_WINDOW)),
            final_return: run.curve.last().copied(),
            mean_entropy: run.entropy.iter().sum::<f64>() / run.entropy.len().max(1) as f64,
            mean_max_kl: None,
        },
        failure: run.failure.clone(),
        wall_seconds: None,
        range_seconds: None,
    };
    write_manifest(&dir, &manifest)?;
    Ok(dir)
}

/// Reads every `*/manifest.json` directly under `root`, sorted by directory name.
pub fn read_manifests(root: &Path) -> Result<Vec<RunManifest>> {
    let mut dirs: Vec<PathBuf> = match fs::read_dir(root) {
        Ok(entries) => entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.join("manifest.json").is_file())
            .collect(),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Vec::new(),
        Err(e) => return Err(e.into()),
    };
    dirs.sort();
    dirs.iter()
        .map(|d| {
            let text = fs::read_to_string(d.join("manifest.json"))?;
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", d.display())))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub kind: String,
    pub env: String,
    pub method: String,
    pub runs: usize,
    pub failed: usize,
    /// Bandit runs only.
    pub trapped: Option<usize>,
    pub mean_final_return: Option<f64>,
    pub mean_entropy: f64,
    pub mean_max_kl: Option<f64>,
}

/// Groups manifests by kind, env and method.
pub fn summarize(manifests: &[RunManifest]) -> Vec<SummaryRow> {
    let mut keys: Vec<(String, String, String)> = manifests
        .iter()
        .map(|m| (m.kind.clone(), m.summary.env.clone(), m.summary.method.clone()))
        .collect();
    keys.sort();
    keys.dedup();
    let avg = |xs: Vec<f64>| (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64);
    keys.into_iter()
        .map(|(kind, env, method)| {
            let group: Vec<&RunSummary> = manifests
                .iter()
                .filter(|m| m.kind == kind && m.summary.env == env && m.summary.method == method)
                .map(|m| &m.summary)
                .collect();
            let ok: Vec<&&RunSummary> = group.iter().filter(|s| !s.failed).collect();
            let trapped = ok.iter().map(|s| s.trapped).collect::<Option<Vec<bool>>>();
            SummaryRow {
                runs: group.len(),
                failed: group.len() - ok.len(),
                trapped: trapped
                    .filter(|_| !ok.is_empty())
                    .map(|t| t.iter().filter(|&&x| x).count()),
                mean_final_return: avg(ok.iter().filter_map(|s| s.final_return).collect()),
                mean_entropy: avg(ok.iter().map(|s| s.mean_entropy).collect()).unwrap_or(f64::NAN),
                mean_max_kl: avg(ok.iter().filter_map(|s| s.mean_max_kl).collect()),
                kind,
                env,
                method,
            }
        })
        .collect()
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::new();
    writeln!(out, "{SUMMARY_HEADER}").unwrap();
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.kind,
            r.env,
            r.method,
            r.runs,
            r.failed,
            r.trapped.map_or_else(String::new, |t| t.to_string()),
            fmt_opt(r.mean_final_return),
            if r.mean_entropy.is_nan() {
                String::new()
            } else {
                r.mean_entropy.to_string()
            },
            fmt_opt(r.mean_max_kl)
        )
        .unwrap();
    }
    out
}

/// Summarizes every run under `root` into `root/reports/`. Returns the rows.
pub fn write_report(root: &Path) -> Result<Vec<SummaryRow>> {
    let rows = summarize(&read_manifests(root)?);
    let dir = root.join("reports");
    fs::create_dir_all(&dir)?;
    fs::write(dir.join("summary.csv"), summary_csv(&rows))?;
    fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&rows)? + "\n")?;
    Ok(rows)
}
