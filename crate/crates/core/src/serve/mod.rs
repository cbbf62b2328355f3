//! Forward-testing signal service.
//!
//! A session owns a model, an agent and a running single-position ledger.
//! Each signal request carries one tick (`time`, `ofi`, `mid`); the session
//! answers with the greedy action and whether it reverses the position.
//! Requests within a session are processed one at a time; sessions are
//! independent.

mod http;

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::agents::{Action, AgentState, TrainedAgent};
use crate::alpha_model::AlphaModel;
use crate::backtest::{compute_metrics, predicted_pips, Ledger, MetricsReport, Trade};
use crate::error::{Error, Result};
use crate::labeling::InstrumentSpec;
use crate::lob::{TickRecord, LEVELS};

pub use http::{router, serve, ServeConfig, BIND_ENV};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalRequest {
    pub time: i64,
    pub ofi: [f64; LEVELS],
    pub mid: f64,
}

impl From<&TickRecord> for SignalRequest {
    fn from(t: &TickRecord) -> Self {
        Self {
            time: t.timestamp,
            ofi: t.ofi,
            mid: t.mid,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalResponse {
    pub action: Action,
    pub changed: bool,
    pub latency_ms: f64,
}

fn field_error(field: &str, message: impl Into<String>) -> Error {
    Error::Validation {
        field: field.to_string(),
        message: message.into(),
    }
}

/// Validates a decoded JSON body, naming the first offending field.
pub fn parse_signal_request(body: &Value) -> Result<SignalRequest> {
    let obj = body
        .as_object()
        .ok_or_else(|| field_error("body", "expected a JSON object"))?;
    let time = match obj.get("time") {
        Some(v) => v
            .as_i64()
            .ok_or_else(|| field_error("time", "expected an integer of epoch milliseconds"))?,
        None => return Err(field_error("time", "missing")),
    };
    let ofi_value = obj.get("ofi").ok_or_else(|| field_error("ofi", "missing"))?;
    let arr = ofi_value
        .as_array()
        .ok_or_else(|| field_error("ofi", "expected an array"))?;
    if arr.len() != LEVELS {
        return Err(field_error(
            "ofi",
            format!("expected {LEVELS} numbers, got {}", arr.len()),
        ));
    }
    let mut ofi = [0.0; LEVELS];
    for (o, v) in ofi.iter_mut().zip(arr) {
        *o = v
            .as_f64()
            .filter(|x| x.is_finite())
            .ok_or_else(|| field_error("ofi", "entries must be finite numbers"))?;
    }
    let mid = obj
        .get("mid")
        .ok_or_else(|| field_error("mid", "missing"))?
        .as_f64()
        .filter(|m| m.is_finite() && *m > 0.0)
        .ok_or_else(|| field_error("mid", "expected a positive number"))?;
    Ok(SignalRequest { time, ofi, mid })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencyStats {
    pub count: usize,
    pub p50_ms: Option<f64>,
    pub p95_ms: Option<f64>,
    pub p99_ms: Option<f64>,
}

/// Nearest-rank percentile of already sorted samples.
pub fn percentile(sorted: &[f64], p: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let rank = ((p / 100.0) * sorted.len() as f64).ceil() as usize;
    Some(sorted[rank.clamp(1, sorted.len()) - 1])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionReport {
    pub instrument: String,
    pub requests: usize,
    pub actions: Vec<Action>,
    /// Closed trades, with any open trade closed at the last tick.
    pub trades: Vec<Trade>,
    pub metrics: Option<MetricsReport>,
    pub latency: LatencyStats,
}

pub struct Session {
    spec: InstrumentSpec,
    model: Arc<AlphaModel>,
    agent: Arc<TrainedAgent>,
    ledger: Ledger,
    last: Option<(i64, f64)>,
    actions: Vec<Action>,
    latencies: Vec<f64>,
    journal: Option<File>,
}

#[derive(Serialize, Deserialize)]
struct JournalRecord {
    time: i64,
    ofi: [f64; LEVELS],
    mid: f64,
    action: Action,
    changed: bool,
}

impl Session {
    pub fn new(spec: InstrumentSpec, model: Arc<AlphaModel>, agent: Arc<TrainedAgent>) -> Result<Self> {
        Ok(Self {
            ledger: Ledger::new(&spec)?,
            spec,
            model,
            agent,
            last: None,
            actions: Vec::new(),
            latencies: Vec::new(),
            journal: None,
        })
    }

    /// Appends one JSON line per handled request to `path`.
    pub fn with_journal(mut self, path: &Path) -> Result<Self> {
        self.journal = Some(File::options().create(true).append(true).open(path)?);
        Ok(self)
    }

    pub fn handle(&mut self, req: &SignalRequest) -> Result<SignalResponse> {
        let started = Instant::now();
        if let Some((prev, _)) = self.last {
            if req.time <= prev {
                return Err(Error::Ordering {
                    row: self.actions.len() + 1,
                    timestamp: req.time,
                    previous: prev,
                });
            }
        }
        let tick = TickRecord {
            timestamp: req.time,
            ofi: req.ofi,
            mid: req.mid,
        };
        let state = AgentState {
            alphas: predicted_pips(&self.model, &tick, &self.spec)?,
            position: self.ledger.position(),
        };
        let action = self.agent.greedy(&state);
        let changed = self.ledger.apply(req.time, req.mid, action);
        self.last = Some((req.time, req.mid));
        self.actions.push(action);
        if let Some(j) = &mut self.journal {
            let rec = JournalRecord {
                time: req.time,
                ofi: req.ofi,
                mid: req.mid,
                action,
                changed,
            };
            serde_json::to_writer(&mut *j, &rec)?;
            j.write_all(b"\n")?;
        }
        let latency_ms = started.elapsed().as_secs_f64() * 1e3;
        self.latencies.push(latency_ms);
        Ok(SignalResponse {
            action,
            changed,
            latency_ms,
        })
    }

    pub fn actions(&self) -> &[Action] {
        &self.actions
    }

    pub fn report(&self) -> SessionReport {
        let trades = match self.last {
            Some((ts, mid)) => self.ledger.snapshot(ts, mid),
            None => self.ledger.log().clone(),
        };
        let mut sorted = self.latencies.clone();
        sorted.sort_by(f64::total_cmp);
        SessionReport {
            instrument: self.spec.name.clone(),
            requests: self.actions.len(),
            actions: self.actions.clone(),
            metrics: compute_metrics(&trades).ok(),
            trades: trades.trades,
            latency: LatencyStats {
                count: sorted.len(),
                p50_ms: percentile(&sorted, 50.0),
                p95_ms: percentile(&sorted, 95.0),
                p99_ms: percentile(&sorted, 99.0),
            },
        }
    }
}

/// Requests recorded in a session journal, in order.
pub fn read_journal(path: &Path) -> Result<Vec<SignalRequest>> {
    let r = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for line in r.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: JournalRecord = serde_json::from_str(&line)?;
        out.push(SignalRequest {
            time: rec.time,
            ofi: rec.ofi,
            mid: rec.mid,
        });
    }
    Ok(out)
}

/// Where a new session's instrument comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InstrumentSource {
    Path(PathBuf),
    Inline(InstrumentSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CreateSession {
    pub instrument: InstrumentSource,
    pub model: PathBuf,
    pub agent: PathBuf,
}

pub fn parse_create_session(body: &Value) -> Result<CreateSession> {
    let obj = body
        .as_object()
        .ok_or_else(|| field_error("body", "expected a JSON object"))?;
    let path = |name: &str| -> Result<PathBuf> {
        obj.get(name)
            .ok_or_else(|| field_error(name, "missing"))?
            .as_str()
            .map(PathBuf::from)
            .ok_or_else(|| field_error(name, "expected a file path"))
    };
    let instrument = match obj.get("instrument") {
        Some(Value::String(s)) => InstrumentSource::Path(PathBuf::from(s)),
        Some(v @ Value::Object(_)) => InstrumentSource::Inline(
            serde_json::from_value(v.clone()).map_err(|e| field_error("instrument", e.to_string()))?,
        ),
        Some(_) => return Err(field_error("instrument", "expected a path or an object")),
        None => return Err(field_error("instrument", "missing")),
    };
    Ok(CreateSession {
        instrument,
        model: path("model")?,
        agent: path("agent")?,
    })
}

/// Live sessions keyed by id.
pub struct SessionManager {
    sessions: RwLock<HashMap<String, Arc<Mutex<Session>>>>,
    next_id: AtomicU64,
    journal_dir: Option<PathBuf>,
}

impl SessionManager {
    pub fn new(journal_dir: Option<PathBuf>) -> Self {
        Self {
            sessions: RwLock::new(HashMap::new()),
            next_id: AtomicU64::new(1),
            journal_dir,
        }
    }

    pub fn create(&self, req: &CreateSession) -> Result<String> {
        let spec = match &req.instrument {
            InstrumentSource::Path(p) => InstrumentSpec::load(p)?,
            InstrumentSource::Inline(s) => {
                s.validate()?;
                s.clone()
            }
        };
        let model = AlphaModel::load(&req.model)?;
        let agent = TrainedAgent::load(&req.agent)?;
        self.insert(Session::new(spec, Arc::new(model), Arc::new(agent))?)
    }

    pub fn insert(&self, session: Session) -> Result<String> {
        let id = format!("s{}", self.next_id.fetch_add(1, Ordering::Relaxed));
        let session = match &self.journal_dir {
            Some(dir) => session.with_journal(&dir.join(format!("{id}.jsonl")))?,
            None => session,
        };
        self.sessions
            .write()
            .expect("session map lock")
            .insert(id.clone(), Arc::new(Mutex::new(session)));
        Ok(id)
    }

    pub fn get(&self, id: &str) -> Result<Arc<Mutex<Session>>> {
        self.sessions
            .read()
            .expect("session map lock")
            .get(id)
            .cloned()
            .ok_or_else(|| Error::UnknownSession(id.to_string()))
    }

    pub fn signal(&self, id: &str, req: &SignalRequest) -> Result<SignalResponse> {
        let s = self.get(id)?;
        let mut guard = s.lock().expect("session lock");
        guard.handle(req)
    }

    pub fn report(&self, id: &str) -> Result<SessionReport> {
        let s = self.get(id)?;
        let guard = s.lock().expect("session lock");
        Ok(guard.report())
    }

    pub fn remove(&self, id: &str) -> Result<()> {
        self.sessions
            .write()
            .expect("session map lock")
            .remove(id)
            .map(|_| ())
            .ok_or_else(|| Error::UnknownSession(id.to_string()))
    }

    pub fn len(&self) -> usize {
        self.sessions.read().expect("session map lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::{BucketSpec, NetworkAgent, Algo};
    use crate::alpha_model::{init_model, MlpSpec, Normalization};
    use crate::labeling::HORIZONS;
    use crate::nn::{Mlp, OutputActivation};
    use serde_json::json;

    fn session() -> Session {
        let model = init_model(&MlpSpec::with_hidden(vec![8]), 1).unwrap();
        // Buy when the first predicted alpha is positive.
        let mut net = Mlp::zeros(&[7, 2], OutputActivation::Identity);
        net.layers[0].weights[[0, 0]] = 1.0;
        net.layers[0].weights[[0, 1]] = -1.0;
        let agent = TrainedAgent::Network(NetworkAgent {
            algo: Algo::Dqn,
            buckets: BucketSpec::new([-1.0; HORIZONS], [1.0; HORIZONS]).unwrap(),
            alpha_norm: Normalization::identity(HORIZONS),
            net,
        });
        Session::new(
            InstrumentSpec::frictionless("T", 0.01),
            Arc::new(model),
            Arc::new(agent),
        )
        .unwrap()
    }

    fn req(time: i64, x: f64) -> SignalRequest {
        SignalRequest {
            time,
            ofi: [x; LEVELS],
            mid: 100.0 + time as f64 * 0.01,
        }
    }

    #[test]
    fn first_request_opens_and_repeat_does_not_change() {
        let mut s = session();
        let a = s.handle(&req(1, 0.5)).unwrap();
        assert!(a.changed);
        let b = s.handle(&SignalRequest { time: 2, ..req(1, 0.5) }).unwrap();
        assert!(!b.changed);
        assert_eq!(a.action, b.action);
        assert!(matches!(s.handle(&req(2, 0.5)), Err(Error::Ordering { .. })));
    }

    #[test]
    fn report_counts_latency_samples() {
        let mut s = session();
        let empty = s.report();
        assert!(empty.trades.is_empty() && empty.metrics.is_none());
        assert_eq!(empty.latency.count, 0);
        for t in 0..100 {
            s.handle(&req(t, (t as f64 * 0.7).sin() * 3.0)).unwrap();
        }
        let r = s.report();
        assert_eq!(r.latency.count, 100);
        assert_eq!(r.requests, 100);
        assert!(r.metrics.is_some());
        let (p50, p99) = (r.latency.p50_ms.unwrap(), r.latency.p99_ms.unwrap());
        assert!(p50 <= p99);
    }

    #[test]
    fn payload_validation_names_fields() {
        let nine = json!({"time": 1, "ofi": vec![0.0; 9], "mid": 1.0});
        match parse_signal_request(&nine) {
            Err(Error::Validation { field, .. }) => assert_eq!(field, "ofi"),
            other => panic!("{other:?}"),
        }
        let no_mid = json!({"time": 1, "ofi": vec![0.0; 10]});
        assert!(matches!(parse_signal_request(&no_mid), Err(Error::Validation { field, .. }) if field == "mid"));
        let bad_time = json!({"time": "x", "ofi": vec![0.0; 10], "mid": 1.0});
        assert!(matches!(parse_signal_request(&bad_time), Err(Error::Validation { field, .. }) if field == "time"));
        let ok = json!({"time": 5, "ofi": [1, 2, 3, 4, 5, 6, 7, 8, 9, 10], "mid": 2.5});
        let r = parse_signal_request(&ok).unwrap();
        assert_eq!(r.ofi[9], 10.0);
    }

    #[test]
    fn percentiles_nearest_rank() {
        let xs: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(percentile(&xs, 50.0), Some(50.0));
        assert_eq!(percentile(&xs, 95.0), Some(95.0));
        assert_eq!(percentile(&xs, 99.0), Some(99.0));
        assert_eq!(percentile(&[], 50.0), None);
        assert_eq!(percentile(&[3.0], 99.0), Some(3.0));
    }

    #[test]
    fn manager_lifecycle_and_journal() {
        let dir = tempfile::tempdir().unwrap();
        let m = SessionManager::new(Some(dir.path().to_path_buf()));
        let id = m.insert(session()).unwrap();
        assert!(m.signal("nope", &req(1, 0.0)).is_err());
        for t in 1..=5 {
            m.signal(&id, &req(t, 1.0)).unwrap();
        }
        let replay = read_journal(&dir.path().join(format!("{id}.jsonl"))).unwrap();
        assert_eq!(replay, (1..=5).map(|t| req(t, 1.0)).collect::<Vec<_>>());
        m.remove(&id).unwrap();
        assert!(matches!(m.report(&id), Err(Error::UnknownSession(_))));
        assert!(m.is_empty());
    }
}
