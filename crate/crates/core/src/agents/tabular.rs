use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{
    act, epsilon_at, Action, AgentConfig, AgentState, BucketSpec, Position, StateSpace, TrainOutcome,
    TrainedAgent, BUCKETS,
};
use crate::env::Environment;
use crate::error::{Error, Result};
use crate::labeling::HORIZONS;

/// `5^6` alpha buckets x 2 positions x 2 actions.
pub const TABLE_CELLS: usize = BUCKETS.pow(HORIZONS as u32) * 2 * 2;

/// Dense action-value table with per-cell visit counts.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    values: Vec<f64>,
    visits: Vec<u64>,
}

impl Default for QTable {
    fn default() -> Self {
        Self::new()
    }
}

impl QTable {
    pub fn new() -> Self {
        Self {
            values: vec![0.0; TABLE_CELLS],
            visits: vec![0; TABLE_CELLS],
        }
    }

    pub fn from_parts(values: Vec<f64>, visits: Vec<u64>) -> Result<Self> {
        if values.len() != TABLE_CELLS || visits.len() != TABLE_CELLS {
            return Err(Error::invalid(format!("a table has exactly {TABLE_CELLS} cells")));
        }
        Ok(Self { values, visits })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn visits(&self) -> &[u64] {
        &self.visits
    }

    /// Flat cell index. The first horizon is the most significant digit.
    pub fn index(buckets: &[usize; HORIZONS], position: Position, action: Action) -> usize {
        let state = buckets.iter().fold(0, |acc, &b| acc * BUCKETS + b);
        (state * 2 + position.index()) * 2 + action.index()
    }

    pub fn get(&self, buckets: &[usize; HORIZONS], position: Position, action: Action) -> f64 {
        self.values[Self::index(buckets, position, action)]
    }

    pub fn set(&mut self, buckets: &[usize; HORIZONS], position: Position, action: Action, v: f64) {
        self.values[Self::index(buckets, position, action)] = v;
    }

    pub fn visit_count(&self, buckets: &[usize; HORIZONS], position: Position, action: Action) -> u64 {
        self.visits[Self::index(buckets, position, action)]
    }

    pub fn action_values(&self, buckets: &[usize; HORIZONS], position: Position) -> [f64; 2] {
        [
            self.get(buckets, position, Action::Buy),
            self.get(buckets, position, Action::Sell),
        ]
    }

    pub fn max_value(&self, buckets: &[usize; HORIZONS], position: Position) -> f64 {
        let [b, s] = self.action_values(buckets, position);
        b.max(s)
    }
}

/// Discretized state used to address the table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TableState {
    pub buckets: [usize; HORIZONS],
    pub position: Position,
}

/// `Q(s,a) += lr * (r + gamma * max_a' Q(s',a') - Q(s,a))`. A terminal step
/// (`next == None`) bootstraps from zero. Returns the new cell value.
pub fn q_update(
    q: &mut QTable,
    s: TableState,
    a: Action,
    r: f64,
    next: Option<TableState>,
    cfg: &AgentConfig,
) -> f64 {
    let future = next.map_or(0.0, |n| q.max_value(&n.buckets, n.position));
    let idx = QTable::index(&s.buckets, s.position, a);
    let old = q.values[idx];
    let new = old + cfg.learning_rate * (r + cfg.gamma * future - old);
    q.values[idx] = new;
    q.visits[idx] += 1;
    new
}

#[derive(Debug, Clone, PartialEq)]
pub struct TabularAgent {
    pub buckets: BucketSpec,
    pub table: QTable,
}

impl TabularAgent {
    pub fn table_state(&self, state: &AgentState) -> TableState {
        TableState {
            buckets: self.buckets.bucketize(&state.alphas),
            position: state.position,
        }
    }

    pub fn action_values(&self, state: &AgentState) -> [f64; 2] {
        let s = self.table_state(state);
        self.table.action_values(&s.buckets, s.position)
    }
}

/// Epsilon-greedy tabular Q learning with one Bellman update per step.
pub fn train_q<E: Environment>(
    env: &mut E,
    space: &StateSpace,
    cfg: &AgentConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut agent = TabularAgent {
        buckets: space.buckets.clone(),
        table: QTable::new(),
    };
    let mut episode_rewards = Vec::with_capacity(cfg.episodes);
    for episode in 0..cfg.episodes {
        let epsilon = epsilon_at(episode, cfg);
        let mut state = env.reset();
        let mut total = 0.0;
        loop {
            let s = agent.table_state(&state);
            let values = agent.table.action_values(&s.buckets, s.position);
            let action = act(values, state.position, epsilon, &mut rng);
            let step = env.step(action);
            let next = (!step.done).then(|| agent.table_state(&step.next_state));
            q_update(&mut agent.table, s, action, step.reward, next, cfg);
            total += step.reward;
            if step.done {
                break;
            }
            state = step.next_state;
        }
        episode_rewards.push(total);
    }
    Ok(TrainOutcome {
        agent: TrainedAgent::Tabular(agent),
        target: None,
        episode_rewards,
    })
}
