//! Limit-order-book features: mid-price, order flow, order flow imbalance,
//! the classic price/volume extractors, and per-level summary statistics.
//!
//! A book is the first ten levels on each side. Ask prices ascend from the
//! best ask, bid prices descend from the best bid. Tick files store only the
//! derived OFI vector and the post-update mid-price for each LOB update.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of book levels per side.
pub const LEVELS: usize = 10;

/// Ten levels of an order book, both sides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LobState {
    pub ask_prices: [f64; LEVELS],
    pub ask_volumes: [f64; LEVELS],
    pub bid_prices: [f64; LEVELS],
    pub bid_volumes: [f64; LEVELS],
}

impl LobState {
    /// Builds a book and checks its invariants.
    pub fn new(
        ask_prices: [f64; LEVELS],
        ask_volumes: [f64; LEVELS],
        bid_prices: [f64; LEVELS],
        bid_volumes: [f64; LEVELS],
    ) -> Result<Self> {
        let book = Self {
            ask_prices,
            ask_volumes,
            bid_prices,
            bid_volumes,
        };
        book.validate()?;
        Ok(book)
    }

    pub fn validate(&self) -> Result<()> {
        let all = self
            .ask_prices
            .iter()
            .chain(&self.bid_prices)
            .chain(&self.ask_volumes)
            .chain(&self.bid_volumes);
        if all.clone().any(|v| !v.is_finite()) {
            return Err(Error::Invariant("book contains a non-finite value".into()));
        }
        if let Some(v) = self
            .ask_volumes
            .iter()
            .chain(&self.bid_volumes)
            .find(|v| **v < 0.0)
        {
            return Err(Error::Invariant(format!("negative volume {v}")));
        }
        for i in 1..LEVELS {
            if self.ask_prices[i] <= self.ask_prices[i - 1] {
                return Err(Error::Invariant(format!(
                    "ask prices not strictly increasing at level {}",
                    i + 1
                )));
            }
            if self.bid_prices[i] >= self.bid_prices[i - 1] {
                return Err(Error::Invariant(format!(
                    "bid prices not strictly decreasing at level {}",
                    i + 1
                )));
            }
        }
        if self.best_ask() <= self.best_bid() {
            return Err(Error::Invariant(format!(
                "crossed book: best ask {} <= best bid {}",
                self.best_ask(),
                self.best_bid()
            )));
        }
        Ok(())
    }

    pub fn best_ask(&self) -> f64 {
        self.ask_prices[0]
    }

    pub fn best_bid(&self) -> f64 {
        self.bid_prices[0]
    }

    /// Net resting volume, ask minus bid, over the ten levels.
    pub fn volume_delta(&self) -> f64 {
        self.ask_volumes
            .iter()
            .zip(&self.bid_volumes)
            .map(|(a, b)| a - b)
            .sum()
    }
}

/// One timestep of a tick file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TickRecord {
    /// Epoch milliseconds, UTC.
    pub timestamp: i64,
    pub ofi: [f64; LEVELS],
    pub mid: f64,
}

/// Classic extractors evaluated at the latest book of a history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureBundle {
    pub mid: f64,
    pub mid_deltas: [f64; LEVELS],
    /// `(a1, b1, a2, b2, ..., a10, b10)`
    pub prices: [f64; 2 * LEVELS],
    /// `(va1, vb1, ..., va10, vb10)`
    pub volumes: [f64; 2 * LEVELS],
    /// `[sum of ask volumes, sum of bid volumes]`
    pub volume_sums: [f64; 2],
    pub vd: f64,
    pub cvd: [f64; LEVELS],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelStats {
    pub mean: f64,
    pub std: f64,
    pub pct_positive: f64,
    pub pct_negative: f64,
    pub pct_zero: f64,
}

pub fn mid_price(book: &LobState) -> Result<f64> {
    book.validate()?;
    Ok((book.best_ask() + book.best_bid()) / 2.0)
}

fn ask_flow(prev_price: f64, prev_vol: f64, price: f64, vol: f64) -> f64 {
    if price < prev_price {
        vol
    } else if price > prev_price {
        -vol
    } else {
        vol - prev_vol
    }
}

fn bid_flow(prev_price: f64, prev_vol: f64, price: f64, vol: f64) -> f64 {
    if price > prev_price {
        vol
    } else if price < prev_price {
        -vol
    } else {
        vol - prev_vol
    }
}

/// Order flow between two consecutive books: bid flow for levels 1..10
/// followed by ask flow for levels 1..10.
pub fn order_flow(prev: &LobState, cur: &LobState) -> Result<[f64; 2 * LEVELS]> {
    prev.validate()?;
    cur.validate()?;
    let mut of = [0.0; 2 * LEVELS];
    for i in 0..LEVELS {
        of[i] = bid_flow(
            prev.bid_prices[i],
            prev.bid_volumes[i],
            cur.bid_prices[i],
            cur.bid_volumes[i],
        );
        of[LEVELS + i] = ask_flow(
            prev.ask_prices[i],
            prev.ask_volumes[i],
            cur.ask_prices[i],
            cur.ask_volumes[i],
        );
    }
    Ok(of)
}

/// Order flow imbalance per level: bid flow minus ask flow.
pub fn ofi(prev: &LobState, cur: &LobState) -> Result<[f64; LEVELS]> {
    let of = order_flow(prev, cur)?;
    let mut out = [0.0; LEVELS];
    for (i, v) in out.iter_mut().enumerate() {
        *v = of[i] - of[LEVELS + i];
    }
    Ok(out)
}

/// Price, mid, volume, VD and CVD extractors at the last book of `history`.
/// `window` consecutive deltas are taken, so `history` needs `window + 1`
/// books; the fixed-width bundle requires `window == 10`.
pub fn classic_features(history: &[LobState], window: usize) -> Result<FeatureBundle> {
    if window != LEVELS {
        return Err(Error::invalid(format!(
            "window must be {LEVELS} for the fixed-width bundle, got {window}"
        )));
    }
    if history.len() < window + 1 {
        return Err(Error::Length {
            needed: window + 1,
            got: history.len(),
        });
    }
    for book in history {
        book.validate()?;
    }
    let tail = &history[history.len() - window - 1..];
    let last = tail.last().expect("non-empty");
    let mid = |b: &LobState| (b.best_ask() + b.best_bid()) / 2.0;

    let mut mid_deltas = [0.0; LEVELS];
    let mut cvd = [0.0; LEVELS];
    for (k, pair) in tail.windows(2).enumerate() {
        mid_deltas[k] = mid(&pair[1]) - mid(&pair[0]);
        cvd[k] = pair[1].volume_delta() - pair[0].volume_delta();
    }

    let mut prices = [0.0; 2 * LEVELS];
    let mut volumes = [0.0; 2 * LEVELS];
    for i in 0..LEVELS {
        prices[2 * i] = last.ask_prices[i];
        prices[2 * i + 1] = last.bid_prices[i];
        volumes[2 * i] = last.ask_volumes[i];
        volumes[2 * i + 1] = last.bid_volumes[i];
    }
    let ask_sum: f64 = last.ask_volumes.iter().sum();
    let bid_sum: f64 = last.bid_volumes.iter().sum();

    Ok(FeatureBundle {
        mid: mid(last),
        mid_deltas,
        prices,
        volumes,
        volume_sums: [ask_sum, bid_sum],
        vd: last.volume_delta(),
        cvd,
    })
}

/// Per-dimension mean, population standard deviation and sign shares.
pub fn summary_stats<V: AsRef<[f64]>>(series: &[V]) -> Result<Vec<LevelStats>> {
    let first = series
        .first()
        .ok_or_else(|| Error::invalid("summary statistics of an empty series"))?;
    let dim = first.as_ref().len();
    if dim == 0 {
        return Err(Error::invalid("summary statistics of zero-dimensional rows"));
    }
    if let Some(pos) = series.iter().position(|r| r.as_ref().len() != dim) {
        return Err(Error::invalid(format!(
            "row {pos} has dimension {} (expected {dim})",
            series[pos].as_ref().len()
        )));
    }
    let n = series.len() as f64;
    let stats = (0..dim)
        .map(|d| {
            let column = series.iter().map(|r| r.as_ref()[d]);
            let mean = column.clone().sum::<f64>() / n;
            let var = column.clone().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
            let (mut pos, mut neg, mut zero) = (0usize, 0usize, 0usize);
            for x in column {
                if x > 0.0 {
                    pos += 1;
                } else if x < 0.0 {
                    neg += 1;
                } else {
                    zero += 1;
                }
            }
            LevelStats {
                mean,
                std: var.sqrt(),
                pct_positive: 100.0 * pos as f64 / n,
                pct_negative: 100.0 * neg as f64 / n,
                pct_zero: 100.0 * zero as f64 / n,
            }
        })
        .collect();
    Ok(stats)
}

const TICK_COLUMNS: usize = LEVELS + 2;

pub fn tick_header() -> Vec<String> {
    let mut cols = vec!["time".to_string()];
    cols.extend((1..=LEVELS).map(|i| format!("ofi_{i}")));
    cols.push("mid".into());
    cols
}

pub fn parse_tick_csv(path: impl AsRef<Path>) -> Result<Vec<TickRecord>> {
    let file = std::fs::File::open(path.as_ref())?;
    read_ticks(file)
}

/// Reads the `time,ofi_1..ofi_10,mid` format. Row numbers in errors are
/// file line numbers (the header is line 1).
pub fn read_ticks<R: Read>(reader: R) -> Result<Vec<TickRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let mut records = rdr.records();
    let header = match records.next() {
        Some(h) => h.map_err(|e| Error::Format {
            row: 1,
            message: e.to_string(),
        })?,
        None => {
            return Err(Error::Format {
                row: 1,
                message: "missing header".into(),
            })
        }
    };
    let expected = tick_header();
    if header.iter().map(str::trim).ne(expected.iter().map(String::as_str)) {
        return Err(Error::Format {
            row: 1,
            message: format!("header must be `{}`", expected.join(",")),
        });
    }

    let mut out = Vec::new();
    for (i, rec) in records.enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| Error::Format {
            row,
            message: e.to_string(),
        })?;
        if rec.len() != TICK_COLUMNS {
            return Err(Error::Format {
                row,
                message: format!("expected {TICK_COLUMNS} columns, found {}", rec.len()),
            });
        }
        let timestamp: i64 = rec[0].trim().parse().map_err(|e| Error::Parse {
            row,
            column: "time".into(),
            message: format!("{e}"),
        })?;
        let mut values = [0.0f64; LEVELS + 1];
        for (k, v) in values.iter_mut().enumerate() {
            let cell = rec[k + 1].trim();
            let column = &expected[k + 1];
            *v = cell.parse().map_err(|e| Error::Parse {
                row,
                column: column.clone(),
                message: format!("`{cell}`: {e}"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row,
                    column: column.clone(),
                    message: "non-finite value".into(),
                });
            }
        }
        let mid = values[LEVELS];
        if mid <= 0.0 {
            return Err(Error::Parse {
                row,
                column: "mid".into(),
                message: format!("mid must be positive, got {mid}"),
            });
        }
        if let Some(prev) = out.last().map(|r: &TickRecord| r.timestamp) {
            if timestamp <= prev {
                return Err(Error::Ordering {
                    row,
                    timestamp,
                    previous: prev,
                });
            }
        }
        let mut ofi = [0.0; LEVELS];
        ofi.copy_from_slice(&values[..LEVELS]);
        out.push(TickRecord {
            timestamp,
            ofi,
            mid,
        });
    }
    Ok(out)
}

/// Writes ticks with shortest round-trip float formatting.
pub fn write_ticks<W: Write>(writer: W, ticks: &[TickRecord]) -> Result<()> {
    let mut w = std::io::BufWriter::new(writer);
    writeln!(w, "{}", tick_header().join(","))?;
    for t in ticks {
        write!(w, "{}", t.timestamp)?;
        for v in &t.ofi {
            write!(w, ",{v}")?;
        }
        writeln!(w, ",{}", t.mid)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_tick_csv(path: impl AsRef<Path>, ticks: &[TickRecord]) -> Result<()> {
    let file = std::fs::File::create(path.as_ref())?;
    write_ticks(file, ticks)
}

/// Per-level stats as CSV rows `level,mean,std,pct_positive,pct_negative,pct_zero`.
pub fn write_level_stats<W: Write>(
    mut w: W,
    label: &str,
    stats: &[LevelStats],
) -> Result<()> {
    writeln!(w, "{label},mean,std,pct_positive,pct_negative,pct_zero")?;
    for (i, s) in stats.iter().enumerate() {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            i + 1,
            s.mean,
            s.std,
            s.pct_positive,
            s.pct_negative,
            s.pct_zero
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn flat_book(best_ask: f64, best_bid: f64, vol: f64) -> LobState {
        let mut ap = [0.0; LEVELS];
        let mut bp = [0.0; LEVELS];
        for i in 0..LEVELS {
            ap[i] = best_ask + i as f64;
            bp[i] = best_bid - i as f64;
        }
        LobState::new(ap, [vol; LEVELS], bp, [vol; LEVELS]).unwrap()
    }

    #[test]
    fn mid_price_examples() {
        let b = flat_book(1.10, 1.08, 1.0);
        assert!((mid_price(&b).unwrap() - 1.09).abs() < 1e-12);
        let b = flat_book(100.01, 100.00, 1.0);
        assert!((mid_price(&b).unwrap() - 100.005).abs() < 1e-9);
    }

    #[test]
    fn crossed_book_rejected() {
        let mut ap = [0.0; LEVELS];
        let mut bp = [0.0; LEVELS];
        for i in 0..LEVELS {
            ap[i] = 99.0 + i as f64;
            bp[i] = 100.0 - i as f64;
        }
        let err = LobState::new(ap, [1.0; LEVELS], bp, [1.0; LEVELS]).unwrap_err();
        assert!(matches!(err, Error::Invariant(_)));
        let crossed = LobState {
            ask_prices: ap,
            ask_volumes: [1.0; LEVELS],
            bid_prices: bp,
            bid_volumes: [1.0; LEVELS],
        };
        assert!(mid_price(&crossed).is_err());
    }

    #[test]
    fn order_flow_cases() {
        let prev = flat_book(101.0, 100.0, 5.0);
        assert_eq!(order_flow(&prev, &prev).unwrap(), [0.0; 20]);

        let mut cur = prev.clone();
        cur.bid_prices[0] = 100.5;
        cur.bid_volumes[0] = 7.0;
        assert_eq!(order_flow(&prev, &cur).unwrap()[0], 7.0);

        let mut cur = prev.clone();
        cur.ask_prices[0] = 101.5;
        cur.ask_volumes[0] = 5.0;
        assert_eq!(order_flow(&prev, &cur).unwrap()[LEVELS], -5.0);
    }

    #[test]
    fn ofi_examples() {
        let mut prev = flat_book(101.0, 100.0, 5.0);
        prev.bid_volumes[0] = 4.0;
        let mut cur = prev.clone();
        cur.bid_volumes[0] = 7.0;
        cur.ask_volumes[0] = 8.0;
        assert_eq!(ofi(&prev, &cur).unwrap()[0], 0.0);

        let mut cur = prev.clone();
        cur.bid_prices[0] = 100.5;
        cur.bid_volumes[0] = 7.0;
        cur.ask_volumes[0] = 8.0;
        assert_eq!(ofi(&prev, &cur).unwrap()[0], 4.0);
    }

    #[test]
    fn classic_features_constant_book() {
        let hist = vec![flat_book(101.0, 100.0, 3.0); 11];
        let f = classic_features(&hist, 10).unwrap();
        assert_eq!(f.mid_deltas, [0.0; LEVELS]);
        assert_eq!(f.cvd, [0.0; LEVELS]);
        assert_eq!(f.mid, 100.5);
        assert_eq!(f.prices[0], 101.0);
        assert_eq!(f.prices[1], 100.0);
    }

    #[test]
    fn classic_features_volume_delta() {
        let mut a = flat_book(101.0, 100.0, 1.0);
        a.ask_volumes = [3.0; LEVELS];
        a.bid_volumes = [2.0; LEVELS];
        let mut hist = vec![a.clone(); 11];
        let f = classic_features(&hist, 10).unwrap();
        assert_eq!(f.volume_sums, [30.0, 20.0]);
        assert_eq!(f.vd, 10.0);

        let mut b = a.clone();
        b.ask_volumes = [2.4; LEVELS];
        b.bid_volumes = [2.0; LEVELS];
        hist.push(b);
        let f = classic_features(&hist, 10).unwrap();
        assert!((f.vd - 4.0).abs() < 1e-12);
        assert!((f.cvd[9] + 6.0).abs() < 1e-12);
    }

    #[test]
    fn classic_features_needs_history() {
        let hist = vec![flat_book(101.0, 100.0, 3.0); 10];
        assert!(matches!(
            classic_features(&hist, 10),
            Err(Error::Length { needed: 11, got: 10 })
        ));
    }

    #[test]
    fn summary_stats_examples() {
        let s = summary_stats(&[[1.0], [-1.0], [0.0], [0.0]]).unwrap();
        assert_eq!(s[0].mean, 0.0);
        assert_eq!(s[0].pct_positive, 25.0);
        assert_eq!(s[0].pct_negative, 25.0);
        assert_eq!(s[0].pct_zero, 50.0);

        let s = summary_stats(&[[2.5], [2.5]]).unwrap();
        assert_eq!(s[0].std, 0.0);

        let empty: Vec<[f64; 1]> = vec![];
        assert!(summary_stats(&empty).is_err());
    }

    fn row(ofi_cols: usize) -> String {
        let mut s = "1684800000000".to_string();
        for i in 0..ofi_cols {
            s.push_str(if i == 0 { ",0.1" } else { ",0" });
        }
        s.push_str(",1950.55");
        s
    }

    #[test]
    fn parse_valid_row() {
        let text = format!("{}\n{}\n", tick_header().join(","), row(10));
        let ticks = read_ticks(text.as_bytes()).unwrap();
        assert_eq!(ticks.len(), 1);
        assert_eq!(ticks[0].timestamp, 1_684_800_000_000);
        assert_eq!(ticks[0].ofi[0], 0.1);
        assert_eq!(&ticks[0].ofi[1..], &[0.0; 9]);
        assert_eq!(ticks[0].mid, 1950.55);
    }

    #[test]
    fn parse_short_row_names_row() {
        let text = format!("{}\n{}\n", tick_header().join(","), row(9));
        match read_ticks(text.as_bytes()) {
            Err(Error::Format { row, .. }) => assert_eq!(row, 2),
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn parse_non_numeric_cell() {
        let text = format!(
            "{}\n{}\n",
            tick_header().join(","),
            row(10).replace(",0.1,", ",abc,")
        );
        assert!(matches!(
            read_ticks(text.as_bytes()),
            Err(Error::Parse { row: 2, .. })
        ));
    }

    #[test]
    fn parse_equal_timestamps_rejected() {
        let text = format!("{}\n{}\n{}\n", tick_header().join(","), row(10), row(10));
        assert!(matches!(
            read_ticks(text.as_bytes()),
            Err(Error::Ordering { row: 3, .. })
        ));
    }
}
