//! Temporal-difference signal agents over six alphas plus the current
//! position: a tabular Q learner, DQN and DDQN.

mod deep;
mod heatmap;
mod replay;
mod tabular;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::alpha_model::Normalization;
use crate::codec;
use crate::error::{Error, Result};
use crate::labeling::{AlphaVector, HORIZONS};
use crate::nn::{Mlp, OutputActivation};

pub use deep::{train_ddqn, train_dqn, NetworkAgent};
pub use heatmap::{export_q_heatmap, Heatmap, HeatmapValue, Transition};
pub use replay::{ReplayBuffer, Transition as Experience};
pub use tabular::{q_update, train_q, QTable, TableState, TabularAgent, TABLE_CELLS};

/// Position assumed before the first trade of a run. The first action always
/// opens a trade regardless, so this only affects the position input of the
/// first state.
pub const INITIAL_POSITION: Position = Position::Short;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Position {
    Long,
    Short,
}

impl Position {
    pub fn sign(self) -> f64 {
        match self {
            Position::Long => 1.0,
            Position::Short => -1.0,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Position::Long => 0,
            Position::Short => 1,
        }
    }

    /// The action that keeps this position.
    pub fn holding_action(self) -> Action {
        match self {
            Position::Long => Action::Buy,
            Position::Short => Action::Sell,
        }
    }
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Position::Long => "long",
            Position::Short => "short",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Buy,
    Sell,
}

impl Action {
    pub const ALL: [Action; 2] = [Action::Buy, Action::Sell];

    pub fn index(self) -> usize {
        match self {
            Action::Buy => 0,
            Action::Sell => 1,
        }
    }

    pub fn from_index(i: usize) -> Self {
        if i == 0 {
            Action::Buy
        } else {
            Action::Sell
        }
    }

    pub fn position(self) -> Position {
        match self {
            Action::Buy => Position::Long,
            Action::Sell => Position::Short,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Action::Buy => "buy",
            Action::Sell => "sell",
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    /// Alphas in pips.
    pub alphas: AlphaVector,
    pub position: Position,
}

pub const BUCKETS: usize = 5;

/// Equal-width bucketing of each alpha over `[lower, upper]`, with values
/// outside the bounds clamped to the edge buckets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketSpec {
    pub lower: AlphaVector,
    pub upper: AlphaVector,
}

/// Bound width in standard deviations on each side of the mean.
pub const BUCKET_STD_WIDTH: f64 = 2.5;

impl BucketSpec {
    pub fn new(lower: AlphaVector, upper: AlphaVector) -> Result<Self> {
        for h in 0..HORIZONS {
            if !(lower[h].is_finite() && upper[h].is_finite() && lower[h] < upper[h]) {
                return Err(Error::invalid(format!(
                    "bucket bounds for horizon {} must be finite with lower < upper",
                    h + 1
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    /// Bounds at mean +/- 2.5 std of the given alphas (pips). A horizon with
    /// zero spread gets a unit half-width so the bounds stay ordered.
    pub fn fit(alphas: &[AlphaVector]) -> Result<Self> {
        if alphas.is_empty() {
            return Err(Error::invalid("cannot fit buckets to no data"));
        }
        let norm = Normalization::fit(alphas.iter().map(|a| &a[..]), HORIZONS);
        let mut lower = [0.0; HORIZONS];
        let mut upper = [0.0; HORIZONS];
        for h in 0..HORIZONS {
            lower[h] = norm.mean[h] - BUCKET_STD_WIDTH * norm.std[h];
            upper[h] = norm.mean[h] + BUCKET_STD_WIDTH * norm.std[h];
        }
        Self::new(lower, upper)
    }

    pub fn bucket(&self, h: usize, value: f64) -> usize {
        let width = (self.upper[h] - self.lower[h]) / BUCKETS as f64;
        let k = ((value - self.lower[h]) / width).floor();
        if k.is_nan() || k < 0.0 {
            0
        } else {
            (k as usize).min(BUCKETS - 1)
        }
    }

    pub fn bucketize(&self, alphas: &AlphaVector) -> [usize; HORIZONS] {
        let mut out = [0; HORIZONS];
        for (h, o) in out.iter_mut().enumerate() {
            *o = self.bucket(h, alphas[h]);
        }
        out
    }

    pub fn center(&self, h: usize, bucket: usize) -> f64 {
        let width = (self.upper[h] - self.lower[h]) / BUCKETS as f64;
        self.lower[h] + (bucket as f64 + 0.5) * width
    }
}

/// Scalings fitted to training alphas (pips): buckets for the table and
/// heatmaps, standardization for network inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    pub buckets: BucketSpec,
    pub alpha_norm: Normalization,
}

impl StateSpace {
    pub fn fit(alphas: &[AlphaVector]) -> Result<Self> {
        Ok(Self {
            buckets: BucketSpec::fit(alphas)?,
            alpha_norm: Normalization::fit(alphas.iter().map(|a| &a[..]), HORIZONS),
        })
    }
}

/// Trains `algo` on `env`.
pub fn train<E: crate::env::Environment>(
    algo: Algo,
    env: &mut E,
    space: &StateSpace,
    cfg: &AgentConfig,
) -> Result<TrainOutcome> {
    match algo {
        Algo::Q => train_q(env, space, cfg),
        Algo::Dqn => train_dqn(env, space, cfg),
        Algo::Ddqn => train_ddqn(env, space, cfg),
    }
}

pub fn bucketize(alphas: &AlphaVector, spec: &BucketSpec) -> [usize; HORIZONS] {
    spec.bucketize(alphas)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algo {
    Q,
    Dqn,
    Ddqn,
}

impl Algo {
    pub fn as_str(self) -> &'static str {
        match self {
            Algo::Q => "q",
            Algo::Dqn => "dqn",
            Algo::Ddqn => "ddqn",
        }
    }
}

impl FromStr for Algo {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "q" => Ok(Algo::Q),
            "dqn" => Ok(Algo::Dqn),
            "ddqn" => Ok(Algo::Ddqn),
            _ => Err(Error::invalid(format!("unknown algorithm `{s}` (q, dqn, ddqn)"))),
        }
    }
}

impl fmt::Display for Algo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AgentConfig {
    pub learning_rate: f64,
    pub gamma: f64,
    pub epsilon_max: f64,
    pub epsilon_min: f64,
    pub epsilon_decay: f64,
    pub episodes: usize,
    pub batch_size: usize,
    /// Steps between hard target syncs (DQN).
    pub target_update_frequency: usize,
    /// Soft target update weight (DDQN).
    pub tau: f64,
    pub l2_lambda: f64,
    pub hidden_layers: Vec<usize>,
    pub buffer_capacity: usize,
    /// Logistic squashing on the value network output.
    pub sigmoid_output: bool,
    /// Network rewards are divided by the environment's reward scale and
    /// clipped to this many units. Zero disables clipping.
    pub reward_clip: f64,
    /// Gradient steps happen every `train_every` environment steps.
    pub train_every: usize,
    pub seed: u64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            gamma: 0.95,
            epsilon_max: 1.0,
            epsilon_min: 0.1,
            epsilon_decay: 0.935,
            episodes: 80,
            batch_size: 128,
            target_update_frequency: 3,
            tau: 0.2,
            l2_lambda: 0.0,
            hidden_layers: vec![64, 64],
            buffer_capacity: 10_000,
            sigmoid_output: true,
            reward_clip: 10.0,
            train_every: 1,
            seed: 0,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("learning_rate must be positive"));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::invalid("gamma must lie in (0, 1)"));
        }
        if !(unit(self.epsilon_min) && unit(self.epsilon_max) && self.epsilon_min <= self.epsilon_max)
        {
            return Err(Error::invalid("epsilon bounds must satisfy 0 <= min <= max <= 1"));
        }
        if !(self.epsilon_decay > 0.0 && self.epsilon_decay <= 1.0) {
            return Err(Error::invalid("epsilon_decay must lie in (0, 1]"));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(Error::invalid("tau must lie in (0, 1]"));
        }
        if self.episodes == 0
            || self.batch_size == 0
            || self.target_update_frequency == 0
            || self.buffer_capacity == 0
            || self.train_every == 0
        {
            return Err(Error::invalid(
                "episodes, batch_size, target_update_frequency, buffer_capacity and train_every must be positive",
            ));
        }
        if self.batch_size > self.buffer_capacity {
            return Err(Error::invalid("batch_size exceeds buffer_capacity"));
        }
        if !(self.l2_lambda >= 0.0 && self.reward_clip >= 0.0) {
            return Err(Error::invalid("l2_lambda and reward_clip must be non-negative"));
        }
        if self.hidden_layers.contains(&0) {
            return Err(Error::invalid("hidden layers must be non-empty"));
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub(crate) fn output_activation(&self) -> OutputActivation {
        if self.sigmoid_output {
            OutputActivation::Sigmoid
        } else {
            OutputActivation::Identity
        }
    }
}

/// `max(epsilon_min, epsilon_max * decay^episode)`.
pub fn epsilon_at(episode: usize, cfg: &AgentConfig) -> f64 {
    let raw = cfg.epsilon_max * cfg.epsilon_decay.powf(episode as f64);
    raw.max(cfg.epsilon_min)
}

/// Greedy choice over `[Q(buy), Q(sell)]`; exact ties keep the position.
pub fn greedy_action(values: [f64; 2], position: Position) -> Action {
    if values[0] > values[1] {
        Action::Buy
    } else if values[1] > values[0] {
        Action::Sell
    } else {
        position.holding_action()
    }
}

/// Epsilon-greedy selection. A uniform draw below `epsilon` picks a uniform
/// random action; otherwise the greedy one.
pub fn act<R: Rng + ?Sized>(
    values: [f64; 2],
    position: Position,
    epsilon: f64,
    rng: &mut R,
) -> Action {
    if epsilon > 0.0 && rng.random::<f64>() < epsilon {
        if rng.random::<bool>() {
            Action::Buy
        } else {
            Action::Sell
        }
    } else {
        greedy_action(values, position)
    }
}

/// Anything that picks an action for a state.
pub trait Decider {
    fn decide(&mut self, state: &AgentState) -> Action;
}

/// Uniform random actions, reproducible per seed.
pub struct RandomAgent {
    rng: ChaCha8Rng,
}

pub fn random_agent(seed: u64) -> RandomAgent {
    RandomAgent {
        rng: ChaCha8Rng::seed_from_u64(seed),
    }
}

impl Decider for RandomAgent {
    fn decide(&mut self, _state: &AgentState) -> Action {
        if self.rng.random::<bool>() {
            Action::Buy
        } else {
            Action::Sell
        }
    }
}

/// A trained agent; immutable and shareable across threads.
#[derive(Debug, Clone, PartialEq)]
pub enum TrainedAgent {
    Tabular(TabularAgent),
    Network(NetworkAgent),
}

impl TrainedAgent {
    pub fn algo(&self) -> Algo {
        match self {
            TrainedAgent::Tabular(_) => Algo::Q,
            TrainedAgent::Network(n) => n.algo,
        }
    }

    pub fn buckets(&self) -> &BucketSpec {
        match self {
            TrainedAgent::Tabular(t) => &t.buckets,
            TrainedAgent::Network(n) => &n.buckets,
        }
    }

    /// `[Q(s, buy), Q(s, sell)]`.
    pub fn action_values(&self, state: &AgentState) -> [f64; 2] {
        match self {
            TrainedAgent::Tabular(t) => t.action_values(state),
            TrainedAgent::Network(n) => n.action_values(state),
        }
    }

    pub fn greedy(&self, state: &AgentState) -> Action {
        greedy_action(self.action_values(state), state.position)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path.as_ref(), self.to_bytes()?)?;
        Ok(())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        match self {
            TrainedAgent::Tabular(t) => {
                let header = AgentHeader {
                    algo: Algo::Q,
                    buckets: t.buckets.clone(),
                    alpha_norm: None,
                    layer_sizes: vec![],
                    output: None,
                };
                let mut payload = t.table.values().to_vec();
                payload.extend(t.table.visits().iter().map(|&v| v as f64));
                codec::encode(AGENT_MAGIC, &header, &payload)
            }
            TrainedAgent::Network(n) => {
                let header = AgentHeader {
                    algo: n.algo,
                    buckets: n.buckets.clone(),
                    alpha_norm: Some(n.alpha_norm.clone()),
                    layer_sizes: n.net.sizes(),
                    output: Some(n.net.output),
                };
                codec::encode(AGENT_MAGIC, &header, &n.net.flat_params())
            }
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let (header, payload): (AgentHeader, Vec<f64>) = codec::read_file(path, AGENT_MAGIC)?;
        let bad = |message: String| Error::Artifact {
            path: path.to_path_buf(),
            message,
        };
        let buckets = BucketSpec::new(header.buckets.lower, header.buckets.upper)?;
        match header.algo {
            Algo::Q => {
                if payload.len() != 2 * TABLE_CELLS {
                    return Err(bad(format!(
                        "expected {} table values, found {}",
                        2 * TABLE_CELLS,
                        payload.len()
                    )));
                }
                let (values, visits) = payload.split_at(TABLE_CELLS);
                let table = QTable::from_parts(
                    values.to_vec(),
                    visits.iter().map(|&v| v as u64).collect(),
                )?;
                Ok(TrainedAgent::Tabular(TabularAgent { buckets, table }))
            }
            algo => {
                let output = header.output.ok_or_else(|| bad("missing output activation".into()))?;
                let alpha_norm = header
                    .alpha_norm
                    .ok_or_else(|| bad("missing alpha normalization".into()))?;
                let sizes = header.layer_sizes;
                if sizes.len() < 2 || sizes[0] != HORIZONS + 1 || sizes[sizes.len() - 1] != 2 {
                    return Err(bad(format!("unexpected value network shape {sizes:?}")));
                }
                let mut net = Mlp::zeros(&sizes, output);
                if payload.len() != net.param_count() {
                    return Err(bad(format!(
                        "expected {} parameters, found {}",
                        net.param_count(),
                        payload.len()
                    )));
                }
                net.set_flat_params(&payload);
                Ok(TrainedAgent::Network(NetworkAgent {
                    algo,
                    buckets,
                    alpha_norm,
                    net,
                }))
            }
        }
    }
}

impl Decider for &TrainedAgent {
    fn decide(&mut self, state: &AgentState) -> Action {
        self.greedy(state)
    }
}

impl Decider for TrainedAgent {
    fn decide(&mut self, state: &AgentState) -> Action {
        self.greedy(state)
    }
}

const AGENT_MAGIC: &str = "OFITRADE-AGENT v1";

#[derive(Serialize, Deserialize)]
struct AgentHeader {
    algo: Algo,
    buckets: BucketSpec,
    alpha_norm: Option<Normalization>,
    layer_sizes: Vec<usize>,
    output: Option<OutputActivation>,
}

/// Result of a training run.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub agent: TrainedAgent,
    /// Target network at the end of training (network agents only).
    pub target: Option<Mlp>,
    /// Total raw reward per episode.
    pub episode_rewards: Vec<f64>,
}
