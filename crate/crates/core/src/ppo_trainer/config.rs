//! Method variants and run configuration with a plain `key = value` text form.

use crate::clip_solver::SolverConfig;
use crate::envs::ENV_NAMES;
use crate::error::{Error, Result};
use crate::policy_opt::DeltaPolicy;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VariantTag {
    Ppo,
    Trgppo,
    Ppo06,
    PpoEntropy,
}

impl VariantTag {
    pub const ALL: [VariantTag; 4] = [
        VariantTag::Ppo,
        VariantTag::Trgppo,
        VariantTag::Ppo06,
        VariantTag::PpoEntropy,
    ];

    pub fn name(self) -> &'static str {
        match self {
            VariantTag::Ppo => "ppo",
            VariantTag::Trgppo => "trgppo",
            VariantTag::Ppo06 => "ppo-0.6",
            VariantTag::PpoEntropy => "ppo-entropy",
        }
    }
}

impl FromStr for VariantTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        VariantTag::ALL
            .into_iter()
            .find(|t| t.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown method `{s}` (expected ppo, trgppo, ppo-0.6 or ppo-entropy)"
                ))
            })
    }
}

impl fmt::Display for VariantTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MethodVariant {
    pub tag: VariantTag,
    pub epsilon: f64,
    pub entropy_coef: f64,
    /// Only read by TRGPPO.
    pub delta: DeltaPolicy,
}

impl MethodVariant {
    pub fn new(tag: VariantTag) -> Self {
        let (epsilon, entropy_coef) = match tag {
            VariantTag::Ppo | VariantTag::Trgppo => (0.2, 0.0),
            VariantTag::Ppo06 => (0.6, 0.0),
            VariantTag::PpoEntropy => (0.2, 0.01),
        };
        MethodVariant {
            tag,
            epsilon,
            entropy_coef,
            delta: DeltaPolicy::Adaptive,
        }
    }

    pub fn ppo() -> Self {
        Self::new(VariantTag::Ppo)
    }

    pub fn trgppo() -> Self {
        Self::new(VariantTag::Trgppo)
    }

    pub fn is_adaptive(&self) -> bool {
        self.tag == VariantTag::Trgppo
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::Config(format!(
                "epsilon must lie in (0, 1), got {}",
                self.epsilon
            )));
        }
        if !(self.entropy_coef >= 0.0 && self.entropy_coef.is_finite()) {
            return Err(Error::Config(format!(
                "entropy coefficient must be >= 0, got {}",
                self.entropy_coef
            )));
        }
        if let DeltaPolicy::Fixed(d) = self.delta {
            if !(d > 0.0 && d.is_finite()) {
                return Err(Error::Config(format!("fixed delta must be positive, got {d}")));
            }
        }
        Ok(())
    }
}

/// Where TRGPPO ranges for discrete policies come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RangeSource {
    /// A fresh root solve per distinct probability.
    Solver,
    /// Table lookup rescaled to the batch budget, then polished.
    Table,
}

impl RangeSource {
    pub fn name(self) -> &'static str {
        match self {
            RangeSource::Solver => "solver",
            RangeSource::Table => "table",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainerConfig {
    pub env: String,
    pub variant: MethodVariant,
    pub seed: u64,
    pub iterations: usize,
    pub rollout_steps: usize,
    pub epochs: usize,
    pub minibatches: usize,
    pub learning_rate: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub max_grad_norm: f64,
    pub hidden: Vec<usize>,
    pub range_source: RangeSource,
    /// Initial policy output bias (logits or means); zero when absent.
    pub init_bias: Option<Vec<f64>>,
    /// Start the value network at exactly zero output.
    pub zero_value_init: bool,
    pub solver: SolverConfig,
}

impl TrainerConfig {
    pub fn new(env: &str, variant: MethodVariant, seed: u64) -> Self {
        TrainerConfig {
            env: env.to_string(),
            variant,
            seed,
            iterations: 100,
            rollout_steps: 2048,
            epochs: 10,
            minibatches: 4,
            learning_rate: 3e-4,
            gamma: 0.99,
            lambda: 0.95,
            max_grad_norm: 0.5,
            hidden: vec![32, 32],
            range_source: RangeSource::Solver,
            init_bias: None,
            zero_value_init: false,
            solver: SolverConfig::default(),
        }
    }

    /// Chain corridor setup: short rollouts, a policy that starts out leaning
    /// towards the attractor and a value network that knows nothing.
    pub fn chain(variant: MethodVariant, seed: u64) -> Self {
        TrainerConfig {
            iterations: 60,
            rollout_steps: 256,
            epochs: 10,
            minibatches: 4,
            learning_rate: 3e-4,
            init_bias: Some(vec![0.1, -0.1]),
            zero_value_init: true,
            range_source: RangeSource::Table,
            ..TrainerConfig::new("chain", variant, seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !ENV_NAMES.contains(&self.env.as_str()) {
            return Err(Error::UnknownEnv(self.env.clone()));
        }
        self.variant.validate()?;
        if self.rollout_steps < 1 {
            return Err(Error::Config("rollout_steps must be >= 1".into()));
        }
        if self.minibatches < 1 || self.minibatches > self.rollout_steps {
            return Err(Error::Config(format!(
                "minibatches must lie in 1..={}, got {}",
                self.rollout_steps, self.minibatches
            )));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.gamma) || !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::Config("need 0 <= gamma < 1 and 0 <= lambda <= 1".into()));
        }
        if !(self.max_grad_norm > 0.0) {
            return Err(Error::Config("max_grad_norm must be positive".into()));
        }
        if self.hidden.iter().any(|&h| h == 0) {
            return Err(Error::Config("hidden layer widths must be >= 1".into()));
        }
        self.solver.validate()
    }

    /// One `key = value` line per field, in a fixed order.
    pub fn to_kv(&self) -> String {
        let delta = match self.variant.delta {
            DeltaPolicy::Adaptive => "adaptive".to_string(),
            DeltaPolicy::Fixed(d) => format!("{d:?}"),
        };
        let list = |v: &[f64]| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(",");
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        };
        put("env", self.env.clone());
        put("method", self.variant.tag.name().into());
        put("epsilon", format!("{:?}", self.variant.epsilon));
        put("entropy_coef", format!("{:?}", self.variant.entropy_coef));
        put("delta", delta);
        put("seed", self.seed.to_string());
        put("iterations", self.iterations.to_string());
        put("rollout_steps", self.rollout_steps.to_string());
        put("epochs", self.epochs.to_string());
        put("minibatches", self.minibatches.to_string());
        put("learning_rate", format!("{:?}", self.learning_rate));
        put("gamma", format!("{:?}", self.gamma));
        put("lambda", format!("{:?}", self.lambda));
        put("max_grad_norm", format!("{:?}", self.max_grad_norm));
        put(
            "hidden",
            self.hidden.iter().map(|h| h.to_string()).collect::<Vec<_>>().join(","),
        );
        put("range_source", self.range_source.name().into());
        put(
            "init_bias",
            self.init_bias.as_deref().map_or_else(|| "none".into(), list),
        );
        put("zero_value_init", self.zero_value_init.to_string());
        put("solver_abs_tol", format!("{:?}", self.solver.abs_tol));
        put("solver_max_iter", self.solver.max_iter.to_string());
        put("solver_p_min", format!("{:?}", self.solver.p_min));
        out
    }

    /// Parses the text form. Unlisted keys keep the defaults of
    /// [`TrainerConfig::new`] for the given env and method; `#` starts a comment.
    pub fn from_kv(text: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", n + 1)))?;
            pairs.push((n + 1, k.trim().to_string(), v.trim().to_string()));
        }
        let find = |key: &str| {
            pairs
                .iter()
                .rev()
                .find(|(_, k, _)| k == key)
                .map(|(_, _, v)| v.as_str())
        };
        let env = find("env").ok_or_else(|| Error::Config("missing `env`".into()))?;
        let tag: VariantTag = find("method").unwrap_or("ppo").parse()?;
        let mut c = TrainerConfig::new(env, MethodVariant::new(tag), 0);
        for (line, key, value) in &pairs {
            let bad = |what: &str| Error::Config(format!("line {line}: `{key}` {what}, got `{value}`"));
            let float = || value.parse::<f64>().map_err(|_| bad("needs a number"));
            let int = || value.parse::<usize>().map_err(|_| bad("needs a non-negative integer"));
            match key.as_str() {
                "env" | "method" => {}
                "epsilon" => c.variant.epsilon = float()?,
                "entropy_coef" => c.variant.entropy_coef = float()?,
                "delta" => {
                    c.variant.delta = if value == "adaptive" {
                        DeltaPolicy::Adaptive
                    } else {
                        DeltaPolicy::Fixed(float()?)
                    }
                }
                "seed" => c.seed = value.parse().map_err(|_| bad("needs a non-negative integer"))?,
                "iterations" => c.iterations = int()?,
                "rollout_steps" => c.rollout_steps = int()?,
                "epochs" => c.epochs = int()?,
                "minibatches" => c.minibatches = int()?,
                "learning_rate" => c.learning_rate = float()?,
                "gamma" => c.gamma = float()?,
                "lambda" => c.lambda = float()?,
                "max_grad_norm" => c.max_grad_norm = float()?,
                "hidden" => {
                    c.hidden = if value.is_empty() {
                        Vec::new()
                    } else {
                        value
                            .split(',')
                            .map(|s| {
                                s.trim()
                                    .parse::<usize>()
                                    .map_err(|_| bad("needs comma-separated widths"))
                            })
                            .collect::<Result<_>>()?
                    }
                }
                "range_source" => {
                    c.range_source = match value.as_str() {
                        "solver" => RangeSource::Solver,
                        "table" => RangeSource::Table,
                        _ => return Err(bad("must be `solver` or `table`")),
                    }
                }
                "init_bias" => {
                    c.init_bias = if value == "none" {
                        None
                    } else {
                        Some(
                            value
                                .split(',')
                                .map(|s| {
                                    s.trim()
                                        .parse::<f64>()
                                        .map_err(|_| bad("needs comma-separated numbers"))
                                })
                                .collect::<Result<_>>()?,
                        )
                    }
                }
                "zero_value_init" => c.zero_value_init = value.parse().map_err(|_| bad("must be true or false"))?,
                "solver_abs_tol" => c.solver.abs_tol = float()?,
                "solver_max_iter" => c.solver.max_iter = int()?,
                "solver_p_min" => c.solver.p_min = float()?,
                _ => return Err(Error::Config(format!("line {line}: unknown key `{key}`"))),
            }
        }
        c.validate()?;
        Ok(c)
    }
}
