use std::fmt;

use ndarray::Array2;

use super::{Action, Position, TrainedAgent, BUCKETS};
use crate::labeling::HORIZONS;

/// A position reversal: the position held and the action that reverses it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transition {
    ShortToLong,
    LongToShort,
}

impl Transition {
    pub const ALL: [Transition; 2] = [Transition::ShortToLong, Transition::LongToShort];

    pub fn position(self) -> Position {
        match self {
            Transition::ShortToLong => Position::Short,
            Transition::LongToShort => Position::Long,
        }
    }

    pub fn action(self) -> Action {
        match self {
            Transition::ShortToLong => Action::Buy,
            Transition::LongToShort => Action::Sell,
        }
    }
}

impl fmt::Display for Transition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Transition::ShortToLong => "short_to_long",
            Transition::LongToShort => "long_to_short",
        })
    }
}

/// Quantity averaged into each heatmap cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HeatmapValue {
    /// `Q(position, reversing action)`.
    #[default]
    ActionValue,
    /// `Q(position, reversing action) - Q(position, holding action)`.
    Advantage,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    pub transition: Transition,
    /// `raw[h][b]`: mean value with horizon `h` in bucket `b`, averaged over
    /// the buckets of every other horizon.
    pub raw: [[f64; BUCKETS]; HORIZONS],
    /// `raw / max|raw|`, so signs are kept and values lie in `[-1, 1]`. A
    /// constant matrix maps to zeros.
    pub normalized: [[f64; BUCKETS]; HORIZONS],
}

fn normalize(raw: &[[f64; BUCKETS]; HORIZONS]) -> [[f64; BUCKETS]; HORIZONS] {
    let flat = raw.iter().flatten();
    let max = flat.clone().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = flat.clone().cloned().fold(f64::INFINITY, f64::min);
    let scale = flat.map(|v| v.abs()).fold(0.0, f64::max);
    let mut out = [[0.0; BUCKETS]; HORIZONS];
    if max == min || scale == 0.0 || !scale.is_finite() {
        return out;
    }
    for (o, r) in out.iter_mut().zip(raw) {
        for (ov, rv) in o.iter_mut().zip(r) {
            *ov = rv / scale;
        }
    }
    out
}

fn digits(state: usize) -> [usize; HORIZONS] {
    let mut b = [0; HORIZONS];
    let mut r = state;
    for h in (0..HORIZONS).rev() {
        b[h] = r % BUCKETS;
        r /= BUCKETS;
    }
    b
}

const STATES: usize = BUCKETS.pow(HORIZONS as u32);

/// Per-transition heatmaps. Tabular agents average over cells whose value was
/// learned (visited at least once; both actions for the advantage), so the
/// zero initialization of unvisited cells does not dilute the means. Network
/// agents are evaluated at every combination of bucket centers.
pub fn export_q_heatmap(agent: &TrainedAgent, value: HeatmapValue) -> Vec<Heatmap> {
    Transition::ALL
        .iter()
        .map(|&transition| {
            let raw = match agent {
                TrainedAgent::Tabular(t) => {
                    let pos = transition.position();
                    let act = transition.action();
                    let hold = pos.holding_action();
                    cell_means(|s| {
                        let b = digits(s);
                        let q = t.table.get(&b, pos, act);
                        let seen = t.table.visit_count(&b, pos, act) > 0;
                        match value {
                            HeatmapValue::ActionValue => seen.then_some(q),
                            HeatmapValue::Advantage => (seen
                                && t.table.visit_count(&b, pos, hold) > 0)
                                .then(|| q - t.table.get(&b, pos, hold)),
                        }
                    })
                }
                TrainedAgent::Network(n) => {
                    let pos = transition.position();
                    let mut x = Array2::zeros((STATES, HORIZONS + 1));
                    for s in 0..STATES {
                        let b = digits(s);
                        let mut alphas = [0.0; HORIZONS];
                        for h in 0..HORIZONS {
                            alphas[h] = n.buckets.center(h, b[h]);
                        }
                        let e = n.encode(&super::AgentState {
                            alphas,
                            position: pos,
                        });
                        for (j, v) in e.iter().enumerate() {
                            x[[s, j]] = *v;
                        }
                    }
                    let q = n.net.forward(x.view());
                    let a = transition.action().index();
                    let hold = pos.holding_action().index();
                    cell_means(|s| {
                        Some(match value {
                            HeatmapValue::ActionValue => q[[s, a]],
                            HeatmapValue::Advantage => q[[s, a]] - q[[s, hold]],
                        })
                    })
                }
            };
            Heatmap {
                transition,
                normalized: normalize(&raw),
                raw,
            }
        })
        .collect()
}

/// Mean of `f(state)` over states with horizon `h` in bucket `b`, skipping
/// states where `f` is `None`. Empty cells are zero.
fn cell_means(f: impl Fn(usize) -> Option<f64>) -> [[f64; BUCKETS]; HORIZONS] {
    let mut sum = [[0.0; BUCKETS]; HORIZONS];
    let mut count = [[0usize; BUCKETS]; HORIZONS];
    for s in 0..STATES {
        if let Some(v) = f(s) {
            let b = digits(s);
            for h in 0..HORIZONS {
                sum[h][b[h]] += v;
                count[h][b[h]] += 1;
            }
        }
    }
    let mut out = [[0.0; BUCKETS]; HORIZONS];
    for h in 0..HORIZONS {
        for b in 0..BUCKETS {
            if count[h][b] > 0 {
                out[h][b] = sum[h][b] / count[h][b] as f64;
            }
        }
    }
    out
}

impl Heatmap {
    /// CSV rows `transition,horizon,scale,bucket_1..bucket_5` for the
    /// normalized and raw matrices.
    pub fn to_csv(maps: &[Heatmap]) -> String {
        let mut s = String::from("transition,horizon,scale");
        for b in 1..=BUCKETS {
            s.push_str(&format!(",bucket_{b}"));
        }
        s.push('\n');
        for (label, pick) in [("normalized", true), ("raw", false)] {
            for m in maps {
                let rows = if pick { &m.normalized } else { &m.raw };
                for (h, row) in rows.iter().enumerate() {
                    s.push_str(&format!("{},{},{}", m.transition, h + 1, label));
                    for v in row {
                        s.push_str(&format!(",{v}"));
                    }
                    s.push('\n');
                }
            }
        }
        s
    }
}
