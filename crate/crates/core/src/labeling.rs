//! Multi-horizon alpha labels, pip conversion, chronological splits and
//! instrument configuration.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lob::{summary_stats, LevelStats, TickRecord, LEVELS};

/// Number of forecast horizons.
pub const HORIZONS: usize = 6;

/// Forward mid-price changes `mid(t+h) - mid(t)` for `h = 1..=6`, in price units.
pub type AlphaVector = [f64; HORIZONS];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledExample {
    pub timestamp: i64,
    pub features: [f64; LEVELS],
    pub label: AlphaVector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pub train: Vec<LabeledExample>,
    pub validation: Vec<LabeledExample>,
    pub test: Vec<LabeledExample>,
}

impl DatasetSplit {
    pub fn sizes(&self) -> (usize, usize, usize) {
        (self.train.len(), self.validation.len(), self.test.len())
    }
}

/// Tick size and retail cost parameters of one instrument.
///
/// Loaded from a TOML key/value file:
///
/// ```toml
/// name = "XAUUSD"
/// tick_size = 0.01
/// commission_per_lot_per_side = 3.5
/// lot_size = 100.0
/// fixed_spread_pips = 2.0
/// ```
///
/// Cost values are placeholders to be set per broker.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstrumentSpec {
    pub name: String,
    /// Price units per pip.
    pub tick_size: f64,
    #[serde(default)]
    pub commission_per_lot_per_side: f64,
    /// Units per lot; one lot is traded, so PnL is `price change * lot_size`.
    #[serde(default = "default_lot_size")]
    pub lot_size: f64,
    #[serde(default)]
    pub fixed_spread_pips: f64,
}

fn default_lot_size() -> f64 {
    1.0
}

impl InstrumentSpec {
    /// Zero-cost instrument with unit lot size.
    pub fn frictionless(name: impl Into<String>, tick_size: f64) -> Self {
        Self {
            name: name.into(),
            tick_size,
            commission_per_lot_per_side: 0.0,
            lot_size: 1.0,
            fixed_spread_pips: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tick_size > 0.0 && self.tick_size.is_finite()) {
            return Err(Error::Config(format!(
                "tick_size must be positive, got {}",
                self.tick_size
            )));
        }
        if !(self.commission_per_lot_per_side >= 0.0) {
            return Err(Error::Config("commission must be non-negative".into()));
        }
        if !(self.fixed_spread_pips >= 0.0) {
            return Err(Error::Config("spread must be non-negative".into()));
        }
        if !(self.lot_size > 0.0 && self.lot_size.is_finite()) {
            return Err(Error::Config("lot_size must be positive".into()));
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let spec: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("instrument spec serializes")
    }

    /// Currency value of a one-price-unit move for one lot.
    pub fn value_per_price_unit(&self) -> f64 {
        self.lot_size
    }

    /// Round-trip cost of one trade: commission on both sides plus the full
    /// spread, charged once.
    pub fn round_trip_cost(&self) -> f64 {
        2.0 * self.commission_per_lot_per_side
            + self.fixed_spread_pips * self.tick_size * self.lot_size
    }
}

/// `out[t][h-1] = mids[t+h] - mids[t]`; the last `horizons` points get no label.
pub fn compute_alphas(mids: &[f64], horizons: usize) -> Result<Vec<Vec<f64>>> {
    if horizons == 0 {
        return Err(Error::invalid("horizons must be at least 1"));
    }
    if mids.len() < horizons + 1 {
        return Err(Error::Length {
            needed: horizons + 1,
            got: mids.len(),
        });
    }
    Ok((0..mids.len() - horizons)
        .map(|t| (1..=horizons).map(|h| mids[t + h] - mids[t]).collect())
        .collect())
}

pub fn to_pips(alpha: f64, spec: &InstrumentSpec) -> Result<f64> {
    if !(spec.tick_size > 0.0) {
        return Err(Error::invalid(format!(
            "tick size must be positive, got {}",
            spec.tick_size
        )));
    }
    Ok(alpha / spec.tick_size)
}

/// Pairs each tick's OFI with its six forward alphas. Ticks from one file
/// only; the last six ticks are dropped.
pub fn label_ticks(ticks: &[TickRecord]) -> Result<Vec<LabeledExample>> {
    let mids: Vec<f64> = ticks.iter().map(|t| t.mid).collect();
    let alphas = compute_alphas(&mids, HORIZONS)?;
    Ok(ticks
        .iter()
        .zip(alphas)
        .map(|(tick, a)| {
            let mut label = [0.0; HORIZONS];
            label.copy_from_slice(&a);
            LabeledExample {
                timestamp: tick.timestamp,
                features: tick.ofi,
                label,
            }
        })
        .collect())
}

/// Contiguous chronological 8:1:1 split. Validation and test get
/// `floor(n / 10)` each; the remainder goes to train.
pub fn split_dataset(examples: Vec<LabeledExample>) -> Result<DatasetSplit> {
    let n = examples.len();
    if n < 10 {
        return Err(Error::Length { needed: 10, got: n });
    }
    for (i, pair) in examples.windows(2).enumerate() {
        if pair[1].timestamp <= pair[0].timestamp {
            return Err(Error::Ordering {
                row: i + 1,
                timestamp: pair[1].timestamp,
                previous: pair[0].timestamp,
            });
        }
    }
    let tenth = n / 10;
    let n_train = n - 2 * tenth;
    let mut train = examples;
    let mut validation = train.split_off(n_train);
    let test = validation.split_off(tenth);
    Ok(DatasetSplit {
        train,
        validation,
        test,
    })
}

/// Index ranges of the 8:1:1 split for a sequence of length `n`.
pub fn split_ranges(n: usize) -> [std::ops::Range<usize>; 3] {
    let tenth = n / 10;
    let n_train = n - 2 * tenth;
    [0..n_train, n_train..n_train + tenth, n_train + tenth..n]
}

/// Per-horizon stats of alpha labels, in pips.
pub fn alpha_stats(labels: &[AlphaVector], spec: &InstrumentSpec) -> Result<Vec<LevelStats>> {
    if labels.is_empty() {
        return Err(Error::invalid("alpha statistics of an empty label set"));
    }
    let pips = labels
        .iter()
        .map(|a| {
            let mut p = [0.0; HORIZONS];
            for (dst, src) in p.iter_mut().zip(a) {
                *dst = to_pips(*src, spec)?;
            }
            Ok(p)
        })
        .collect::<Result<Vec<_>>>()?;
    summary_stats(&pips)
}

pub fn labeled_header() -> Vec<String> {
    let mut cols = vec!["time".to_string()];
    cols.extend((1..=LEVELS).map(|i| format!("ofi_{i}")));
    cols.extend((1..=HORIZONS).map(|h| format!("alpha_{h}")));
    cols
}

pub fn write_labeled<W: Write>(writer: W, examples: &[LabeledExample]) -> Result<()> {
    let mut w = std::io::BufWriter::new(writer);
    writeln!(w, "{}", labeled_header().join(","))?;
    for ex in examples {
        write!(w, "{}", ex.timestamp)?;
        for v in ex.features.iter().chain(&ex.label) {
            write!(w, ",{v}")?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_labeled_csv(path: impl AsRef<Path>, examples: &[LabeledExample]) -> Result<()> {
    write_labeled(std::fs::File::create(path.as_ref())?, examples)
}

pub fn read_labeled<R: Read>(reader: R) -> Result<Vec<LabeledExample>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let expected = labeled_header();
    let mut records = rdr.records();
    let header = records
        .next()
        .ok_or_else(|| Error::Format {
            row: 1,
            message: "missing header".into(),
        })?
        .map_err(|e| Error::Format {
            row: 1,
            message: e.to_string(),
        })?;
    if header.iter().map(str::trim).ne(expected.iter().map(String::as_str)) {
        return Err(Error::Format {
            row: 1,
            message: format!("header must be `{}`", expected.join(",")),
        });
    }
    let mut out: Vec<LabeledExample> = Vec::new();
    for (i, rec) in records.enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| Error::Format {
            row,
            message: e.to_string(),
        })?;
        if rec.len() != expected.len() {
            return Err(Error::Format {
                row,
                message: format!("expected {} columns, found {}", expected.len(), rec.len()),
            });
        }
        let timestamp: i64 = rec[0].trim().parse().map_err(|e| Error::Parse {
            row,
            column: "time".into(),
            message: format!("{e}"),
        })?;
        let mut values = [0.0; LEVELS + HORIZONS];
        for (k, v) in values.iter_mut().enumerate() {
            *v = rec[k + 1].trim().parse().map_err(|e| Error::Parse {
                row,
                column: expected[k + 1].clone(),
                message: format!("{e}"),
            })?;
        }
        if let Some(prev) = out.last() {
            if timestamp <= prev.timestamp {
                return Err(Error::Ordering {
                    row,
                    timestamp,
                    previous: prev.timestamp,
                });
            }
        }
        let mut features = [0.0; LEVELS];
        let mut label = [0.0; HORIZONS];
        features.copy_from_slice(&values[..LEVELS]);
        label.copy_from_slice(&values[LEVELS..]);
        out.push(LabeledExample {
            timestamp,
            features,
            label,
        });
    }
    Ok(out)
}

pub fn read_labeled_csv(path: impl AsRef<Path>) -> Result<Vec<LabeledExample>> {
    read_labeled(std::fs::File::open(path.as_ref())?)
}
