//! `trgppo` command-line tool.
//!
//! Exit codes: 0 on success, 1 for usage errors (bad flags, bad config), 2 when
//! a solver or training run fails numerically.

use clap::{Args, Parser, Subcommand};
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use trgppo::bandit_dynamics::{
    exploration_curve_exact, write_curves_csv, BanditSpec, ClipRule, TabularPolicy, DEFAULT_ENUMERATION_BUDGET,
};
use trgppo::clip_solver::{solve_clip_range_detailed, truncate_range, ConstraintPoint, SolverConfig};
use trgppo::clip_table::{ClipTable, ClipTableSpec, DEFAULT_GRID_SIZE};
use trgppo::policy_opt::{self, trap_rate, BanditTask, ContinuousBanditSpec, DeltaPolicy, Method, TrainRunConfig};
use trgppo::ppo_trainer::{sweep_with_table, MethodVariant, RangeSource, TrainerConfig, VariantTag, TABLE_DELTA};
use trgppo::report::{self, TRAP_THRESHOLD, TRAP_WINDOW};

/// Directory for cached lookup tables.
const TABLE_CACHE_ENV: &str = "TRGPPO_TABLE_CACHE";

#[derive(Parser)]
#[command(
    name = "trgppo",
    version,
    about = "Trust-region-guided clipping ranges, bandit analysis and PPO training"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the clipping range at one probability and KL budget.
    Solve(SolveArgs),
    /// Build a lookup table and write it to a file or the table cache.
    TableBuild(TableBuildArgs),
    /// Look up a clipping range in a table.
    TableQuery(TableQueryArgs),
    /// Exact exploration curves of PPO and TRGPPO on a bandit, as CSV.
    BanditExact(BanditExactArgs),
    /// Seeded gradient-based bandit runs with trap-rate statistics.
    BanditTrain(BanditTrainArgs),
    /// Actor-critic training runs on a built-in environment.
    Train(TrainArgs),
    /// Aggregate run directories into reports/summary.{csv,json}.
    Report(ReportArgs),
}

#[derive(Args)]
struct SolveArgs {
    /// Old-policy probability of the action, in (0, 1).
    #[arg(long)]
    p: f64,
    /// KL budget in nats.
    #[arg(long)]
    delta: f64,
    /// Also print the range truncated by this clip coefficient.
    #[arg(long)]
    epsilon: Option<f64>,
}

#[derive(Args)]
struct TableSpecArgs {
    #[arg(long)]
    delta: f64,
    #[arg(long, default_value_t = DEFAULT_GRID_SIZE)]
    grid_size: usize,
    #[arg(long, default_value_t = SolverConfig::default().p_min)]
    p_min: f64,
    /// Return raw interpolated ranges without solver polish.
    #[arg(long)]
    no_polish: bool,
}

impl TableSpecArgs {
    fn spec(&self) -> ClipTableSpec {
        ClipTableSpec {
            delta: self.delta,
            grid_size: self.grid_size,
            p_min: self.p_min,
            polish: !self.no_polish,
        }
    }
}

#[derive(Args)]
struct TableBuildArgs {
    #[command(flatten)]
    spec: TableSpecArgs,
    /// Binary output file. Defaults to the table cache directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write a whitespace-separated text export here.
    #[arg(long)]
    text: Option<PathBuf>,
}

#[derive(Args)]
struct TableQueryArgs {
    #[command(flatten)]
    spec: TableSpecArgs,
    #[arg(long)]
    p: f64,
    /// Read this binary table instead of using the cache.
    #[arg(long)]
    table: Option<PathBuf>,
}

#[derive(Args)]
struct BanditExactArgs {
    /// Comma-separated rewards; exactly one maximum.
    #[arg(long, default_value = "1,0.5,-50")]
    rewards: String,
    /// Comma-separated initial policy.
    #[arg(long, default_value = "0.2,0.6,0.2")]
    probs: String,
    #[arg(long, default_value_t = 6)]
    horizon: usize,
    #[arg(long, default_value_t = 0.2)]
    epsilon: f64,
    /// KL budget of the TRGPPO rule.
    #[arg(long, default_value_t = 0.02)]
    delta: f64,
    /// CSV output file. Defaults to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BanditTrainArgs {
    /// `bandit` (three-armed, discrete) or `continuous-bandit`.
    #[arg(long, default_value = "bandit")]
    env: String,
    /// Comma-separated methods: ppo, trgppo, vanilla-pg.
    #[arg(long, default_value = "ppo,trgppo")]
    method: String,
    /// Seeds: `a..b` (end exclusive), a comma list, or a single seed.
    #[arg(long, default_value = "0..10")]
    seeds: String,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    epsilon: Option<f64>,
    /// Fixed KL budget instead of the per-batch adaptive one.
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long, default_value = "runs")]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    /// `key = value` trainer config. Flags given on the command line override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    env: Option<String>,
    /// ppo, trgppo, ppo-0.6 or ppo-entropy.
    #[arg(long)]
    method: Option<String>,
    #[arg(long, default_value = "0")]
    seeds: String,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long, default_value = "runs")]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// Directory holding run directories.
    #[arg(long, default_value = "runs")]
    out: PathBuf,
}

enum Failure {
    Usage(String),
    Numerical(String),
}

impl From<trgppo::Error> for Failure {
    fn from(e: trgppo::Error) -> Self {
        use trgppo::Error::*;
        match e {
            InvalidArgument(_) | Config(_) | UnknownEnv(_) | BudgetExceeded { .. } | TableFormat(_) => {
                Failure::Usage(e.to_string())
            }
            _ => Failure::Numerical(e.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Numerical(e.to_string())
    }
}

type CliResult = Result<(), Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn parse_list(text: &str, what: &str) -> Result<Vec<f64>, Failure> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| usage(format!("bad {what} entry `{s}`")))
        })
        .collect()
}

fn parse_seeds(text: &str) -> Result<Vec<u64>, Failure> {
    let bad = || usage(format!("bad seed list `{text}`"));
    if let Some((a, b)) = text.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|_| bad())?;
        let b: u64 = b.trim().parse().map_err(|_| bad())?;
        if a >= b {
            return Err(bad());
        }
        return Ok((a..b).collect());
    }
    text.split(',').map(|s| s.trim().parse().map_err(|_| bad())).collect()
}

fn cache_dir() -> Option<PathBuf> {
    std::env::var_os(TABLE_CACHE_ENV)
        .filter(|v| !v.is_empty())
        .map(PathBuf::from)
}

fn load_table(spec: ClipTableSpec, solver: &SolverConfig) -> Result<ClipTable, Failure> {
    spec.validate()?;
    Ok(match cache_dir() {
        Some(dir) => ClipTable::load_or_build(&dir, spec, solver)?,
        None => ClipTable::build(spec, solver)?,
    })
}

fn solve(args: &SolveArgs) -> CliResult {
    if !(args.p > 0.0 && args.p < 1.0) {
        return Err(usage(format!("--p must lie in (0, 1), got {}", args.p)));
    }
    if !(args.delta > 0.0 && args.delta.is_finite()) {
        return Err(usage(format!("--delta must be finite and > 0, got {}", args.delta)));
    }
    if let Some(eps) = args.epsilon {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(usage(format!("--epsilon must lie in (0, 1), got {eps}")));
        }
    }
    let cfg = SolverConfig::default();
    let point = ConstraintPoint::new(args.p, args.delta, &cfg)?;
    let sol = solve_clip_range_detailed(&point, &cfg, None)?;
    let (res_lo, res_hi) = sol.residuals(&point);
    println!("p = {}", point.p());
    println!("clamped = {}", point.was_clamped());
    println!("delta = {}", args.delta);
    println!("lower = {}", sol.range.lower);
    println!("upper = {}", sol.range.upper);
    println!("residual_lower = {res_lo:e}");
    println!("residual_upper = {res_hi:e}");
    println!("iterations = {}", sol.iterations);
    if let Some(eps) = args.epsilon {
        let t = truncate_range(sol.range, eps);
        println!("truncated_lower = {}", t.lower);
        println!("truncated_upper = {}", t.upper);
    }
    Ok(())
}

fn table_build(args: &TableBuildArgs) -> CliResult {
    let spec = args.spec.spec();
    spec.validate()?;
    let cfg = SolverConfig::default();
    let path = match (&args.out, cache_dir()) {
        (Some(p), _) => p.clone(),
        (None, Some(dir)) => trgppo::clip_table::cache_path(&dir, &spec),
        (None, None) => return Err(usage(format!("give --out or set {TABLE_CACHE_ENV}"))),
    };
    let table = ClipTable::build(spec, &cfg)?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut buf = Vec::new();
    table.write_binary(&mut buf)?;
    fs::write(&path, buf)?;
    if let Some(text) = &args.text {
        let mut buf = Vec::new();
        table.write_text(&mut buf)?;
        fs::write(text, buf)?;
    }
    println!("path = {}", path.display());
    println!("knots = {}", table.knots().len());
    println!("max_interpolation_error = {:e}", table.max_interpolation_error());
    println!("monotone = {}", table.is_monotone());
    Ok(())
}

fn table_query(args: &TableQueryArgs) -> CliResult {
    if !(0.0..=1.0).contains(&args.p) {
        return Err(usage(format!("--p must lie in [0, 1], got {}", args.p)));
    }
    let cfg = SolverConfig::default();
    let table = match &args.table {
        Some(path) => {
            let table = ClipTable::read_binary(fs::read(path)?.as_slice())?;
            if table.spec().delta != args.spec.delta {
                return Err(usage(format!(
                    "table {} was built for delta {}, not {}",
                    path.display(),
                    table.spec().delta,
                    args.spec.delta
                )));
            }
            table
        }
        None => load_table(args.spec.spec(), &cfg)?,
    };
    let q = table.query(args.p, &cfg)?;
    println!("p = {}", args.p);
    println!("lower = {}", q.range.lower);
    println!("upper = {}", q.range.upper);
    println!("clamped = {}", q.clamped);
    println!("polish_steps = {}", q.polish_steps);
    Ok(())
}

fn bandit_exact(args: &BanditExactArgs) -> CliResult {
    let spec = BanditSpec::new(parse_list(&args.rewards, "reward")?)?;
    let policy = TabularPolicy::new(parse_list(&args.probs, "probability")?)?;
    if policy.len() != spec.action_count() {
        return Err(usage("--rewards and --probs need the same number of actions"));
    }
    if !(args.epsilon > 0.0 && args.epsilon < 1.0) {
        return Err(usage(format!("--epsilon must lie in (0, 1), got {}", args.epsilon)));
    }
    if !(args.delta > 0.0 && args.delta.is_finite()) {
        return Err(usage(format!("--delta must be finite and > 0, got {}", args.delta)));
    }
    let cfg = SolverConfig::default();
    let ppo_rule = ClipRule::Constant { epsilon: args.epsilon };
    let trg_rule = ClipRule::TrustRegion {
        delta: args.delta,
        epsilon: args.epsilon,
    };
    let ppo = exploration_curve_exact(
        &policy,
        &spec,
        &ppo_rule,
        args.horizon,
        DEFAULT_ENUMERATION_BUDGET,
        &cfg,
    )?;
    let trg = exploration_curve_exact(
        &policy,
        &spec,
        &trg_rule,
        args.horizon,
        DEFAULT_ENUMERATION_BUDGET,
        &cfg,
    )?;
    let mut buf = Vec::new();
    write_curves_csv(&[("ppo", &ppo), ("trgppo", &trg)], &mut buf)?;
    emit(args.out.as_deref(), &buf)
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> CliResult {
    match out {
        Some(path) => fs::write(path, bytes)?,
        None => io::stdout().write_all(bytes)?,
    }
    Ok(())
}

fn bandit_train(args: &BanditTrainArgs) -> CliResult {
    let (task, base): (BanditTask, fn(Method, u64) -> TrainRunConfig) = match args.env.as_str() {
        "bandit" => (
            BanditTask::Discrete(BanditSpec::three_armed()),
            TrainRunConfig::discrete,
        ),
        "continuous-bandit" => (
            BanditTask::Continuous(ContinuousBanditSpec::default()),
            TrainRunConfig::continuous,
        ),
        other => return Err(usage(format!("unknown bandit `{other}` (bandit, continuous-bandit)"))),
    };
    let seeds = parse_seeds(&args.seeds)?;
    let methods: Vec<Method> = args
        .method
        .split(',')
        .map(|m| Method::parse(m.trim()))
        .collect::<Result<_, _>>()?;
    let mut failed = 0;
    println!("env,method,runs,failed,trapped,trap_rate");
    for method in methods {
        let mut config = base(method, 0);
        if let Some(n) = args.iterations {
            config.iterations = n;
        }
        if let Some(eps) = args.epsilon {
            config.epsilon = eps;
        }
        if let Some(d) = args.delta {
            config.delta = DeltaPolicy::Fixed(d);
        }
        config.validate()?;
        let runs = policy_opt::sweep(&task, &config, seeds.iter().copied())?;
        for run in &runs {
            let seeded = TrainRunConfig {
                seed: run.seed,
                ..config.clone()
            };
            report::write_bandit_run(&args.out, &task, &seeded, run)?;
            if let Some(f) = &run.failure {
                eprintln!("seed {} ({}): {f}", run.seed, method.name());
                failed += 1;
            }
        }
        let r = trap_rate(&runs, task.optimal_reward(), TRAP_THRESHOLD, TRAP_WINDOW);
        println!(
            "{},{},{},{},{},{}",
            args.env,
            method.name(),
            r.total,
            r.failed,
            r.trapped,
            r.rate()
        );
    }
    report::write_report(&args.out)?;
    if failed > 0 {
        return Err(Failure::Numerical(format!("{failed} runs failed")));
    }
    Ok(())
}

fn train(args: &TrainArgs) -> CliResult {
    let mut config = match &args.config {
        Some(path) => TrainerConfig::from_kv(&fs::read_to_string(path)?)?,
        None => {
            let env = args.env.as_deref().unwrap_or("chain");
            let variant = MethodVariant::new(VariantTag::Trgppo);
            if env == "chain" {
                TrainerConfig::chain(variant, 0)
            } else {
                TrainerConfig::new(env, variant, 0)
            }
        }
    };
    if let Some(env) = &args.env {
        config.env = env.clone();
    }
    if let Some(method) = &args.method {
        let tag: VariantTag = method.parse().map_err(|e: trgppo::Error| usage(e.to_string()))?;
        config.variant = MethodVariant::new(tag);
    }
    if let Some(eps) = args.epsilon {
        config.variant.epsilon = eps;
    }
    if let Some(n) = args.iterations {
        config.iterations = n;
    }
    config.validate()?;
    let seeds = parse_seeds(&args.seeds)?;
    let table = if config.range_source == RangeSource::Table && config.variant.is_adaptive() {
        Some(load_table(ClipTableSpec::new(TABLE_DELTA), &config.solver)?)
    } else {
        None
    };
    let runs = sweep_with_table(&config, &seeds, table.as_ref())?;
    let mut failed = 0;
    println!("seed,dir,final_return,mean_entropy,failure");
    for run in &runs {
        let dir = report::write_training_run(&args.out, run)?;
        let ret = run.final_return().map_or(String::new(), |r| r.to_string());
        println!(
            "{},{},{},{},{}",
            run.config.seed,
            dir.display(),
            ret,
            run.mean_entropy(),
            run.failure.as_deref().unwrap_or("")
        );
        if run.failure.is_some() {
            failed += 1;
        }
    }
    report::write_report(&args.out)?;
    if failed > 0 {
        return Err(Failure::Numerical(format!("{failed} runs failed")));
    }
    Ok(())
}

fn report_cmd(args: &ReportArgs) -> CliResult {
    let rows = report::write_report(&args.out)?;
    print!("{}", report::summary_csv(&rows));
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Solve(a) => solve(a),
        Command::TableBuild(a) => table_build(a),
        Command::TableQuery(a) => table_query(a),
        Command::BanditExact(a) => bandit_exact(a),
        Command::BanditTrain(a) => bandit_train(a),
        Command::Train(a) => train(a),
        Command::Report(a) => report_cmd(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Numerical(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
