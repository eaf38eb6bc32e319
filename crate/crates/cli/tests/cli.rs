use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn trgppo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_trgppo"))
        .args(args)
        .env_remove("TRGPPO_TABLE_CACHE")
        .output()
        .unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn field(text: &str, key: &str) -> f64 {
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key} = ")))
        .unwrap_or_else(|| panic!("no `{key}` in {text}"))
        .parse()
        .unwrap()
}

fn g(p: f64, x: f64) -> f64 {
    (1.0 - p) * ((1.0 - p) / (1.0 - p * x)).ln() - p * x.ln()
}

#[test]
fn solve_recovers_the_constructed_root() {
    let delta = g(0.2, 1.2).to_string();
    let out = trgppo(&["solve", "--p", "0.2", "--delta", &delta, "--epsilon", "0.2"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!((field(&text, "upper") - 1.2).abs() < 1e-9);
    assert!(field(&text, "residual_upper").abs() <= 1e-10);
    assert_eq!(field(&text, "truncated_lower"), 0.8);
}

#[test]
fn tiny_budget_collapses_the_range() {
    let text = stdout(&trgppo(&["solve", "--p", "0.5", "--delta", "1e-12"]));
    assert!((field(&text, "lower") - 1.0).abs() < 1e-5);
    assert!((field(&text, "upper") - 1.0).abs() < 1e-5);
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(
        trgppo(&["solve", "--p", "1.5", "--delta", "0.1"]).status.code(),
        Some(1)
    );
    assert_eq!(trgppo(&["solve", "--p", "0.5", "--delta", "-1"]).status.code(), Some(1));
    assert_eq!(trgppo(&["solve", "--delta", "0.1"]).status.code(), Some(1));
    assert_eq!(trgppo(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(
        trgppo(&["train", "--env", "nowhere", "--out", "/nonexistent"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(trgppo(&["bandit-exact", "--rewards", "1,1,0"]).status.code(), Some(1));
}

#[test]
fn bandit_exact_reproduces_the_first_step() {
    let text = stdout(&trgppo(&["bandit-exact", "--horizon", "1"]));
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "t,e_t,rule,exact");
    let row = lines
        .iter()
        .find(|l| l.starts_with("1,") && l.contains(",ppo,"))
        .unwrap();
    let e1: f64 = row.split(',').nth(1).unwrap().parse().unwrap();
    assert!((e1 - 0.824).abs() < 5e-4);
}

#[test]
fn bandit_exact_horizon_zero_is_the_start() {
    let text = stdout(&trgppo(&["bandit-exact", "--horizon", "0", "--probs", "0.3,0.5,0.2"]));
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 2);
    for row in rows {
        let e0: f64 = row.split(',').nth(1).unwrap().parse().unwrap();
        assert!((e0 - 0.7).abs() < 1e-15);
    }
}

#[test]
fn report_on_an_empty_directory_is_an_empty_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = trgppo(&["report", "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success());
    assert_eq!(stdout(&out).lines().count(), 1);
    assert!(dir.path().join("reports/summary.csv").exists());
}

fn csvs(root: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files = Vec::new();
    for entry in fs::read_dir(root).unwrap() {
        let path = entry.unwrap().path();
        if path.is_dir() && path.file_name().unwrap() != "reports" {
            for f in ["returns.csv", "diagnostics.csv", "config.txt"] {
                if let Ok(bytes) = fs::read(path.join(f)) {
                    files.push((format!("{}/{f}", path.file_name().unwrap().to_string_lossy()), bytes));
                }
            }
        }
    }
    files.sort();
    files
}

#[test]
fn reruns_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for dir in [&a, &b] {
        let out = trgppo(&[
            "train",
            "--env",
            "chain",
            "--method",
            "trgppo",
            "--seeds",
            "0,1",
            "--iterations",
            "2",
            "--out",
            dir.path().to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let out = trgppo(&[
            "bandit-train",
            "--seeds",
            "0..3",
            "--iterations",
            "20",
            "--out",
            dir.path().to_str().unwrap(),
        ]);
        assert!(out.status.success());
    }
    let (fa, fb) = (csvs(a.path()), csvs(b.path()));
    assert_eq!(fa.len(), 2 * 3 + 6);
    assert_eq!(fa, fb);
}

#[test]
fn train_reads_a_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.cfg");
    fs::write(
        &config,
        "# short cartpole run\nenv = cartpole\nmethod = ppo-0.6\niterations = 2\nrollout_steps = 64\nepochs = 1\nhidden = 8\n",
    )
    .unwrap();
    let runs = dir.path().join("runs");
    let out = trgppo(&[
        "train",
        "--config",
        config.to_str().unwrap(),
        "--out",
        runs.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = fs::read_to_string(runs.join("reports/summary.csv")).unwrap();
    assert!(
        summary.lines().any(|l| l.starts_with("train,cartpole,ppo-0.6,1,0")),
        "{summary}"
    );
}

#[test]
fn table_build_and_query_use_the_cache() {
    let dir = tempfile::tempdir().unwrap();
    let run = |args: &[&str]| {
        Command::new(env!("CARGO_BIN_EXE_trgppo"))
            .args(args)
            .env("TRGPPO_TABLE_CACHE", dir.path())
            .output()
            .unwrap()
    };
    let out = run(&["table-build", "--delta", "0.03", "--grid-size", "256"]);
    assert!(out.status.success());
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    let text = stdout(&run(&[
        "table-query",
        "--delta",
        "0.03",
        "--grid-size",
        "256",
        "--p",
        "0.3",
    ]));
    let direct = stdout(&trgppo(&["solve", "--p", "0.3", "--delta", "0.03"]));
    assert!((field(&text, "upper") - field(&direct, "upper")).abs() < 1e-9);
    assert!((field(&text, "lower") - field(&direct, "lower")).abs() < 1e-9);
}
