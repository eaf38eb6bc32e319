//! Small episodic environments for the trainer.
//!
//! * `bandit`: the three-armed bandit as a one-step episode.
//! * `continuous-bandit`: the piecewise-constant bandit on the real line.
//! * `chain`: a corridor where a small reward sits one step behind the start
//!   and a large one at the far end.
//! * `cartpole`: an unstable balancing task given directly as difference
//!   equations.

use crate::bandit_dynamics::BanditSpec;
use crate::error::{Error, Result};
use crate::policy_opt::ContinuousBanditSpec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Names accepted by [`make_env`].
pub const ENV_NAMES: [&str; 4] = ["bandit", "continuous-bandit", "chain", "cartpole"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ActionSpace {
    Discrete(usize),
    Box { low: Vec<f64>, high: Vec<f64> },
}

impl ActionSpace {
    pub fn contains(&self, action: &Action) -> bool {
        match (self, action) {
            (ActionSpace::Discrete(n), Action::Discrete(a)) => a < n,
            (ActionSpace::Box { low, high }, Action::Continuous(v)) => {
                v.len() == low.len() && v.iter().zip(low.iter().zip(high)).all(|(x, (l, h))| x >= l && x <= h)
            }
            _ => false,
        }
    }

    /// Number of discrete actions or box dimensions.
    pub fn size(&self) -> usize {
        match self {
            ActionSpace::Discrete(n) => *n,
            ActionSpace::Box { low, .. } => low.len(),
        }
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self, ActionSpace::Discrete(_))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvSpec {
    pub name: String,
    pub obs_dim: usize,
    pub action_space: ActionSpace,
    /// Episodes are cut after this many steps.
    pub horizon: usize,
    /// Upper bound on `|reward|` for a single step.
    pub reward_scale: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Action {
    Discrete(usize),
    Continuous(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: Action,
    pub reward: f64,
    pub next_state: Vec<f64>,
    /// The episode ended in an absorbing state.
    pub terminal: bool,
    /// The episode was cut at the horizon.
    pub truncated: bool,
}

impl Transition {
    pub fn done(&self) -> bool {
        self.terminal || self.truncated
    }
}

pub trait Env: Send {
    fn spec(&self) -> &EnvSpec;
    /// Starts an episode. The initial state depends only on `seed`.
    fn reset(&mut self, seed: u64) -> Vec<f64>;
    fn step(&mut self, action: &Action) -> Result<Transition>;
}

fn check_action(spec: &EnvSpec, action: &Action) -> Result<()> {
    if spec.action_space.contains(action) {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "action {action:?} is outside the action space of `{}`",
            spec.name
        )))
    }
}

/// Builds a registered environment with its default parameters.
pub fn make_env(name: &str) -> Result<Box<dyn Env>> {
    match name {
        "bandit" => Ok(Box::new(BanditEnv::new(BanditSpec::three_armed()))),
        "continuous-bandit" => Ok(Box::new(ContinuousBanditEnv::new(ContinuousBanditSpec::default()))),
        "chain" => Ok(Box::new(ChainEnv::new(ChainConfig::default())?)),
        "cartpole" => Ok(Box::new(CartPoleEnv::new(CartPoleConfig::default()))),
        other => Err(Error::UnknownEnv(other.to_string())),
    }
}

#[derive(Debug, Clone)]
pub struct BanditEnv {
    bandit: BanditSpec,
    spec: EnvSpec,
    done: bool,
}

impl BanditEnv {
    pub fn new(bandit: BanditSpec) -> Self {
        let spec = EnvSpec {
            name: "bandit".into(),
            obs_dim: 1,
            action_space: ActionSpace::Discrete(bandit.action_count()),
            horizon: 1,
            reward_scale: bandit.rewards().iter().fold(0.0, |m: f64, c| m.max(c.abs())),
        };
        BanditEnv {
            bandit,
            spec,
            done: true,
        }
    }

    pub fn bandit(&self) -> &BanditSpec {
        &self.bandit
    }
}

impl Env for BanditEnv {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, _seed: u64) -> Vec<f64> {
        self.done = false;
        vec![0.0]
    }

    fn step(&mut self, action: &Action) -> Result<Transition> {
        check_action(&self.spec, action)?;
        if self.done {
            return Err(Error::invalid("step called on a finished episode"));
        }
        let Action::Discrete(a) = *action else { unreachable!() };
        self.done = true;
        Ok(Transition {
            state: vec![0.0],
            action: action.clone(),
            reward: self.bandit.rewards()[a],
            next_state: vec![0.0],
            terminal: true,
            truncated: false,
        })
    }
}

#[derive(Debug, Clone)]
pub struct ContinuousBanditEnv {
    bandit: ContinuousBanditSpec,
    spec: EnvSpec,
    done: bool,
}

/// Actions of the continuous bandit are limited to `[-BOUND, BOUND]`.
pub const CONTINUOUS_BANDIT_BOUND: f64 = 20.0;

impl ContinuousBanditEnv {
    pub fn new(bandit: ContinuousBanditSpec) -> Self {
        let spec = EnvSpec {
            name: "continuous-bandit".into(),
            obs_dim: 1,
            action_space: ActionSpace::Box {
                low: vec![-CONTINUOUS_BANDIT_BOUND],
                high: vec![CONTINUOUS_BANDIT_BOUND],
            },
            horizon: 1,
            reward_scale: bandit.intervals.iter().fold(0.0, |m: f64, i| m.max(i.2.abs())),
        };
        ContinuousBanditEnv {
            bandit,
            spec,
            done: true,
        }
    }
}

impl Env for ContinuousBanditEnv {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, _seed: u64) -> Vec<f64> {
        self.done = false;
        vec![0.0]
    }

    fn step(&mut self, action: &Action) -> Result<Transition> {
        check_action(&self.spec, action)?;
        if self.done {
            return Err(Error::invalid("step called on a finished episode"));
        }
        let Action::Continuous(v) = action else { unreachable!() };
        self.done = true;
        Ok(Transition {
            state: vec![0.0],
            action: action.clone(),
            reward: self.bandit.reward(v[0]),
            next_state: vec![0.0],
            terminal: true,
            truncated: false,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    /// Right moves from the start to the goal.
    pub length: usize,
    /// Paid on stepping left from the start, which ends the episode.
    pub attractor_reward: f64,
    /// Paid on reaching the far end, which ends the episode.
    pub goal_reward: f64,
    pub horizon: usize,
}

impl Default for ChainConfig {
    fn default() -> Self {
        ChainConfig {
            length: 12,
            attractor_reward: 0.1,
            goal_reward: 1.0,
            horizon: 40,
        }
    }
}

/// Corridor of cells `0..=length`, starting at 0. Action 0 moves left, 1 moves
/// right. Left from cell 0 enters the attractor; reaching `length` is the goal.
/// Observations are one-hot over the cells.
#[derive(Debug, Clone)]
pub struct ChainEnv {
    config: ChainConfig,
    spec: EnvSpec,
    position: usize,
    steps: usize,
    done: bool,
}

pub const CHAIN_LEFT: usize = 0;
pub const CHAIN_RIGHT: usize = 1;

impl ChainEnv {
    pub fn new(config: ChainConfig) -> Result<Self> {
        if config.length < 1 || config.horizon < 1 {
            return Err(Error::invalid("chain length and horizon must be >= 1"));
        }
        let spec = EnvSpec {
            name: "chain".into(),
            obs_dim: config.length + 1,
            action_space: ActionSpace::Discrete(2),
            horizon: config.horizon,
            reward_scale: config.attractor_reward.abs().max(config.goal_reward.abs()),
        };
        Ok(ChainEnv {
            config,
            spec,
            position: 0,
            steps: 0,
            done: true,
        })
    }

    pub fn config(&self) -> &ChainConfig {
        &self.config
    }

    fn observe(&self, position: usize) -> Vec<f64> {
        let mut obs = vec![0.0; self.config.length + 1];
        obs[position] = 1.0;
        obs
    }
}

impl Env for ChainEnv {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, _seed: u64) -> Vec<f64> {
        self.position = 0;
        self.steps = 0;
        self.done = false;
        self.observe(0)
    }

    fn step(&mut self, action: &Action) -> Result<Transition> {
        check_action(&self.spec, action)?;
        if self.done {
            return Err(Error::invalid("step called on a finished episode"));
        }
        let Action::Discrete(a) = *action else { unreachable!() };
        let state = self.observe(self.position);
        self.steps += 1;
        let (reward, terminal) = if a == CHAIN_LEFT {
            if self.position == 0 {
                (self.config.attractor_reward, true)
            } else {
                self.position -= 1;
                (0.0, false)
            }
        } else {
            self.position += 1;
            if self.position == self.config.length {
                (self.config.goal_reward, true)
            } else {
                (0.0, false)
            }
        };
        let truncated = !terminal && self.steps >= self.config.horizon;
        self.done = terminal || truncated;
        Ok(Transition {
            state,
            action: action.clone(),
            reward,
            next_state: self.observe(self.position.min(self.config.length)),
            terminal,
            truncated,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CartPoleConfig {
    pub dt: f64,
    /// Growth rate of the pole angle: `omega' = gain * theta - coupling * force`.
    pub gain: f64,
    pub coupling: f64,
    pub force: f64,
    pub angle_limit: f64,
    pub position_limit: f64,
    /// Initial state entries are drawn uniformly from `[-init_noise, init_noise]`.
    pub init_noise: f64,
    pub horizon: usize,
}

impl Default for CartPoleConfig {
    fn default() -> Self {
        CartPoleConfig {
            dt: 0.05,
            gain: 10.0,
            coupling: 1.0,
            force: 1.0,
            angle_limit: 0.2,
            position_limit: 2.4,
            init_noise: 0.05,
            horizon: 200,
        }
    }
}

/// State `(x, v, theta, omega)` advanced by explicit Euler steps. Actions push
/// left, do nothing, or push right; every surviving step pays 1.
#[derive(Debug, Clone)]
pub struct CartPoleEnv {
    config: CartPoleConfig,
    spec: EnvSpec,
    state: [f64; 4],
    steps: usize,
    done: bool,
}

pub const CART_LEFT: usize = 0;
pub const CART_IDLE: usize = 1;
pub const CART_RIGHT: usize = 2;

impl CartPoleEnv {
    pub fn new(config: CartPoleConfig) -> Self {
        let spec = EnvSpec {
            name: "cartpole".into(),
            obs_dim: 4,
            action_space: ActionSpace::Discrete(3),
            horizon: config.horizon,
            reward_scale: 1.0,
        };
        CartPoleEnv {
            config,
            spec,
            state: [0.0; 4],
            steps: 0,
            done: true,
        }
    }

    pub fn state(&self) -> [f64; 4] {
        self.state
    }

    /// The action pushing the cart back towards `x = 0`.
    pub fn centering_action(state: &[f64]) -> usize {
        if state[0] > 0.0 {
            CART_LEFT
        } else if state[0] < 0.0 {
            CART_RIGHT
        } else {
            CART_IDLE
        }
    }
}

impl Env for CartPoleEnv {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = self.config.init_noise;
        for s in self.state.iter_mut() {
            *s = if n > 0.0 { rng.random_range(-n..=n) } else { 0.0 };
        }
        self.steps = 0;
        self.done = false;
        self.state.to_vec()
    }

    fn step(&mut self, action: &Action) -> Result<Transition> {
        check_action(&self.spec, action)?;
        if self.done {
            return Err(Error::invalid("step called on a finished episode"));
        }
        let Action::Discrete(a) = *action else { unreachable!() };
        let c = &self.config;
        let f = c.force * (a as f64 - 1.0);
        let [x, v, th, om] = self.state;
        let before = self.state.to_vec();
        self.state = [
            x + c.dt * v,
            v + c.dt * f,
            th + c.dt * om,
            om + c.dt * (c.gain * th - c.coupling * f),
        ];
        self.steps += 1;
        let failed = self.state[2].abs() > c.angle_limit || self.state[0].abs() > c.position_limit;
        let truncated = !failed && self.steps >= c.horizon;
        self.done = failed || truncated;
        Ok(Transition {
            state: before,
            action: action.clone(),
            reward: if failed { 0.0 } else { 1.0 },
            next_state: self.state.to_vec(),
            terminal: failed,
            truncated,
        })
    }
}
