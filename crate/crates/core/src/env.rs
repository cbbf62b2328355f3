//! Replay environment for agent training.
//!
//! Each timestep exposes the six alphas (in pips) and the current position.
//! The agent picks the position to hold over the next tick; the reward is
//! the mark-to-market PnL of that tick, minus the round-trip cost whenever a
//! new trade is opened. The very first step of an episode always opens a
//! trade. One episode is one UTC day of data; days are replayed in order and
//! cycled.

use std::ops::Range;

use crate::agents::{Action, AgentState, Position, INITIAL_POSITION};
use crate::error::{Error, Result};
use crate::labeling::{to_pips, AlphaVector, InstrumentSpec, LabeledExample, HORIZONS};

pub const MS_PER_DAY: i64 = 86_400_000;

pub fn utc_day(timestamp_ms: i64) -> i64 {
    timestamp_ms.div_euclid(MS_PER_DAY)
}

/// Contiguous index ranges sharing a UTC day.
pub fn day_ranges(timestamps: &[i64]) -> Vec<Range<usize>> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=timestamps.len() {
        if i == timestamps.len() || utc_day(timestamps[i]) != utc_day(timestamps[start]) {
            if start < i {
                out.push(start..i);
            }
            start = i;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub next_state: AgentState,
    pub reward: f64,
    pub done: bool,
}

/// Episodic interface the training loops run against.
pub trait Environment {
    /// Starts the next episode and returns its first state.
    fn reset(&mut self) -> AgentState;
    fn step(&mut self, action: Action) -> Step;
    /// Typical magnitude of a per-step reward, used to standardize rewards
    /// for network regression.
    fn reward_scale(&self) -> f64 {
        1.0
    }
}

pub struct MarketEnv {
    states: Vec<AlphaVector>,
    /// `mid(t+1) - mid(t)` in price units.
    moves: Vec<f64>,
    days: Vec<Range<usize>>,
    value_per_unit: f64,
    trade_cost: f64,
    day: usize,
    t: usize,
    end: usize,
    position: Position,
    opened: bool,
}

impl MarketEnv {
    /// Environment over realized alphas: the state at `t` holds the labeled
    /// forward mid changes.
    pub fn from_examples(examples: &[LabeledExample], spec: &InstrumentSpec) -> Result<Self> {
        let alphas: Vec<AlphaVector> = examples.iter().map(|e| e.label).collect();
        Self::with_state_alphas(examples, &alphas, spec)
    }

    /// Environment whose states use `state_alphas` (price units), for example
    /// model predictions, while rewards still follow realized moves.
    pub fn with_state_alphas(
        examples: &[LabeledExample],
        state_alphas: &[AlphaVector],
        spec: &InstrumentSpec,
    ) -> Result<Self> {
        spec.validate()?;
        if examples.is_empty() {
            return Err(Error::invalid("no training data"));
        }
        if state_alphas.len() != examples.len() {
            return Err(Error::Length {
                needed: examples.len(),
                got: state_alphas.len(),
            });
        }
        let mut states = Vec::with_capacity(examples.len());
        for a in state_alphas {
            let mut p = [0.0; HORIZONS];
            for (o, v) in p.iter_mut().zip(a) {
                *o = to_pips(*v, spec)?;
            }
            states.push(p);
        }
        let ts: Vec<i64> = examples.iter().map(|e| e.timestamp).collect();
        Ok(Self {
            states,
            moves: examples.iter().map(|e| e.label[0]).collect(),
            days: day_ranges(&ts),
            value_per_unit: spec.value_per_price_unit(),
            trade_cost: spec.round_trip_cost(),
            day: 0,
            t: 0,
            end: 0,
            position: INITIAL_POSITION,
            opened: false,
        })
    }

    pub fn days(&self) -> usize {
        self.days.len()
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// State alphas in pips, for bucket and normalization fitting.
    pub fn state_alphas(&self) -> &[AlphaVector] {
        &self.states
    }

    fn state_at(&self, t: usize) -> AgentState {
        AgentState {
            alphas: self.states[t],
            position: self.position,
        }
    }
}

impl Environment for MarketEnv {
    fn reset(&mut self) -> AgentState {
        let range = self.days[self.day % self.days.len()].clone();
        self.day += 1;
        self.t = range.start;
        self.end = range.end;
        self.position = INITIAL_POSITION;
        self.opened = false;
        self.state_at(self.t)
    }

    fn step(&mut self, action: Action) -> Step {
        let target = action.position();
        let mut reward = target.sign() * self.moves[self.t] * self.value_per_unit;
        if !self.opened || target != self.position {
            reward -= self.trade_cost;
            self.opened = true;
        }
        self.position = target;
        let done = self.t + 1 >= self.end;
        if !done {
            self.t += 1;
        }
        Step {
            next_state: self.state_at(self.t),
            reward,
            done,
        }
    }

    fn reward_scale(&self) -> f64 {
        let n = self.moves.len() as f64;
        let mean = self.moves.iter().sum::<f64>() / n;
        let var = self.moves.iter().map(|m| (m - mean) * (m - mean)).sum::<f64>() / n;
        let s = var.sqrt() * self.value_per_unit;
        if s > 0.0 && s.is_finite() {
            s
        } else {
            1.0
        }
    }
}
