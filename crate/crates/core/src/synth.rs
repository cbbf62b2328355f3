//! Synthetic tick streams with known structure, for exercising the pipeline
//! end to end.
//!
//! Mid moves are whole ticks: zero with probability 1/4, otherwise 1, 2 or 3
//! ticks with probabilities 0.7, 0.2 and 0.1 and a random sign. OFI at tick
//! `t` describes the move from `t` to `t + 1`:
//!
//! * `predictive_alpha`: the sign of level 1 matches the sign of the next
//!   nonzero move with probability `(1 + signal_strength) / 2`.
//! * `random_walk`: OFI is independent of prices.
//! * `mean_reverting`: the mid is pulled back toward its starting level and
//!   level 1 carries a noisy reading of that pull.
//!
//! Levels 2 to 10 are attenuated, noisier copies of level 1, with occasional
//! zero entries.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::env::MS_PER_DAY;
use crate::error::{Error, Result};
use crate::lob::{TickRecord, LEVELS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthKind {
    RandomWalk,
    PredictiveAlpha,
    MeanReverting,
}

impl FromStr for SynthKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random_walk" => Ok(SynthKind::RandomWalk),
            "predictive_alpha" => Ok(SynthKind::PredictiveAlpha),
            "mean_reverting" => Ok(SynthKind::MeanReverting),
            _ => Err(Error::invalid(format!(
                "unknown kind `{s}` (random_walk, predictive_alpha, mean_reverting)"
            ))),
        }
    }
}

impl fmt::Display for SynthKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SynthKind::RandomWalk => "random_walk",
            SynthKind::PredictiveAlpha => "predictive_alpha",
            SynthKind::MeanReverting => "mean_reverting",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub kind: SynthKind,
    pub steps: usize,
    pub tick_size: f64,
    pub signal_strength: f64,
    pub noise_std: f64,
    pub seed: u64,
    /// Ticks per UTC day; timestamps are spread evenly over each day.
    pub ticks_per_day: usize,
    /// Epoch milliseconds of the first tick (start of a UTC day).
    pub start_ms: i64,
    pub base_price: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            kind: SynthKind::PredictiveAlpha,
            steps: 10_000,
            tick_size: 0.01,
            signal_strength: 0.9,
            noise_std: 0.5,
            seed: 0,
            ticks_per_day: 1_000,
            start_ms: 1_684_800_000_000,
            base_price: 100.0,
        }
    }
}

pub const MIN_STEPS: usize = 100;
const ZERO_MOVE_PROB: f64 = 0.25;
const ATTENUATION: f64 = 0.8;
/// Mean-reversion strength per tick of displacement.
const PULL: f64 = 0.02;

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps < MIN_STEPS {
            return Err(Error::invalid(format!("steps must be at least {MIN_STEPS}")));
        }
        if !(self.tick_size > 0.0 && self.tick_size.is_finite()) {
            return Err(Error::invalid("tick_size must be positive"));
        }
        if !(0.0..=1.0).contains(&self.signal_strength) {
            return Err(Error::invalid("signal_strength must lie in [0, 1]"));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(Error::invalid("noise_std must be non-negative"));
        }
        if self.ticks_per_day == 0 || self.ticks_per_day as i64 > MS_PER_DAY {
            return Err(Error::invalid("ticks_per_day must lie in [1, 86400000]"));
        }
        if !(self.base_price > 0.0 && self.base_price / self.tick_size >= 1.0) {
            return Err(Error::invalid("base_price must be at least one tick"));
        }
        Ok(())
    }

    pub fn timestamp(&self, t: usize) -> i64 {
        let tpd = self.ticks_per_day;
        let spacing = MS_PER_DAY / tpd as i64;
        self.start_ms + (t / tpd) as i64 * MS_PER_DAY + (t % tpd) as i64 * spacing
    }
}

fn move_size<R: Rng>(rng: &mut R) -> i64 {
    let u: f64 = rng.random();
    if u < 0.7 {
        1
    } else if u < 0.9 {
        2
    } else {
        3
    }
}

/// Signed move in ticks: zero with probability 1/4.
fn random_move<R: Rng>(rng: &mut R) -> i64 {
    if rng.random::<f64>() < ZERO_MOVE_PROB {
        0
    } else {
        let m = move_size(rng);
        if rng.random::<bool>() {
            m
        } else {
            -m
        }
    }
}

pub fn generate(cfg: &SynthConfig) -> Result<Vec<TickRecord>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let noise = Normal::new(0.0, cfg.noise_std).map_err(|e| Error::invalid(e.to_string()))?;
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let base_ticks = (cfg.base_price / cfg.tick_size).round() as i64;
    let mut offset = 0i64;
    let mut out = Vec::with_capacity(cfg.steps);

    for t in 0..cfg.steps {
        let (step, level1) = match cfg.kind {
            SynthKind::PredictiveAlpha => {
                let step = random_move(&mut rng);
                let agree = rng.random::<f64>() < (1.0 + cfg.signal_strength) / 2.0;
                let dir = if step != 0 {
                    step.signum() as f64
                } else if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                };
                let sign = if agree { dir } else { -dir };
                let magnitude = 1.0 + noise.sample(&mut rng).abs();
                (step, sign * magnitude)
            }
            SynthKind::RandomWalk => {
                let step = random_move(&mut rng);
                let magnitude = 1.0 + noise.sample(&mut rng).abs();
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                (step, sign * magnitude)
            }
            SynthKind::MeanReverting => {
                let pull = -(offset as f64) * PULL;
                let p_up = (0.5 + pull.clamp(-0.4, 0.4)).clamp(0.05, 0.95);
                let step = if rng.random::<f64>() < ZERO_MOVE_PROB {
                    0
                } else if rng.random::<f64>() < p_up {
                    move_size(&mut rng)
                } else {
                    -move_size(&mut rng)
                };
                let reading = cfg.signal_strength * pull * 10.0
                    + (1.0 - cfg.signal_strength) * unit.sample(&mut rng)
                    + noise.sample(&mut rng) * 0.1;
                (step, reading)
            }
        };

        let mut ofi = [0.0; LEVELS];
        ofi[0] = level1;
        for (k, o) in ofi.iter_mut().enumerate().skip(1) {
            let zero_prob = 0.05 * k as f64;
            let copy = level1 * ATTENUATION.powi(k as i32) + noise.sample(&mut rng) * 0.5;
            *o = if rng.random::<f64>() < zero_prob { 0.0 } else { copy };
        }

        out.push(TickRecord {
            timestamp: cfg.timestamp(t),
            ofi,
            mid: (base_ticks + offset) as f64 * cfg.tick_size,
        });
        // Reflect at one tick above zero so mids stay positive.
        offset += step;
        if base_ticks + offset < 1 {
            offset = 2 - base_ticks - (base_ticks + offset);
        }
    }
    Ok(out)
}
