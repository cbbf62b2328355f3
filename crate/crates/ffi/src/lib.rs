//! C ABI over the alpha model, trained agents and signal sessions.
//!
//! Every fallible function returns an [`OfitStatus`]; on failure the message
//! is available from [`ofit_last_error`] on the same thread. Handles are
//! opaque and must be released with the matching `*_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::sync::Arc;

use ofitrade::agents::{Action, AgentState, Position, TrainedAgent};
use ofitrade::alpha_model::AlphaModel;
use ofitrade::error::Error;
use ofitrade::labeling::{InstrumentSpec, HORIZONS};
use ofitrade::lob::{self, LobState, LEVELS};
use ofitrade::serve::{Session, SignalRequest};

/// Number of OFI levels expected by the model.
pub const OFIT_LEVELS: usize = 10;
/// Number of alpha horizons produced by the model.
pub const OFIT_HORIZONS: usize = 6;

const _: () = assert!(OFIT_LEVELS == LEVELS && OFIT_HORIZONS == HORIZONS);

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OfitStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Format = 4,
    Ordering = 5,
    Artifact = 6,
    Internal = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OfitAction {
    Buy = 0,
    Sell = 1,
}

impl From<Action> for OfitAction {
    fn from(a: Action) -> Self {
        match a {
            Action::Buy => OfitAction::Buy,
            Action::Sell => OfitAction::Sell,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OfitPosition {
    Long = 0,
    Short = 1,
}

/// Ten book levels per side, best level first.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct OfitBook {
    pub ask_prices: [f64; OFIT_LEVELS],
    pub ask_volumes: [f64; OFIT_LEVELS],
    pub bid_prices: [f64; OFIT_LEVELS],
    pub bid_volumes: [f64; OFIT_LEVELS],
}

pub struct OfitModel {
    inner: Arc<AlphaModel>,
}

pub struct OfitAgent {
    inner: Arc<TrainedAgent>,
}

pub struct OfitSession {
    inner: Session,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> OfitStatus {
    match e {
        Error::Io(_) => OfitStatus::Io,
        Error::Format { .. } | Error::Parse { .. } | Error::Json(_) => OfitStatus::Format,
        Error::Ordering { .. } => OfitStatus::Ordering,
        Error::Artifact { .. } => OfitStatus::Artifact,
        Error::InvalidArgument(_)
        | Error::Invariant(_)
        | Error::Length { .. }
        | Error::Validation { .. }
        | Error::Config(_) => OfitStatus::InvalidArgument,
        _ => OfitStatus::Internal,
    }
}

struct Fail(OfitStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(OfitStatus::NullPointer, format!("`{what}` is null"))
}

/// Runs `f`, recording any error or panic for `ofit_last_error`.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> OfitStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            OfitStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("panic inside ofitrade");
            OfitStatus::Panic
        }
    }
}

unsafe fn path_arg(p: *const c_char, what: &str) -> Result<PathBuf, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(OfitStatus::InvalidArgument, format!("`{what}` is not UTF-8")))?;
    Ok(PathBuf::from(s))
}

unsafe fn array_arg<const N: usize>(p: *const f64, what: &str) -> Result<[f64; N], Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    let mut out = [0.0; N];
    out.copy_from_slice(std::slice::from_raw_parts(p, N));
    Ok(out)
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(what))
}

/// Message of the last failure on this thread; empty after a success. The
/// pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn ofit_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ofit_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads an alpha model file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn ofit_model_load(path: *const c_char, out: *mut *mut OfitModel) -> OfitStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let model = AlphaModel::load(path_arg(path, "path")?)?;
        *out = Box::into_raw(Box::new(OfitModel {
            inner: Arc::new(model),
        }));
        Ok(())
    })
}

/// # Safety
/// `model` must come from `ofit_model_load` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn ofit_model_free(model: *mut OfitModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Predicts the six alphas (price units) from ten OFI values.
///
/// # Safety
/// `ofi` must point to 10 doubles and `alphas_out` to room for 6.
#[no_mangle]
pub unsafe extern "C" fn ofit_model_predict(
    model: *const OfitModel,
    ofi: *const f64,
    alphas_out: *mut f64,
) -> OfitStatus {
    guard(|| {
        let model = model.as_ref().ok_or_else(|| null("model"))?;
        let ofi: [f64; LEVELS] = array_arg(ofi, "ofi")?;
        if alphas_out.is_null() {
            return Err(null("alphas_out"));
        }
        let alphas = model.inner.forward(&ofi)?;
        std::slice::from_raw_parts_mut(alphas_out, HORIZONS).copy_from_slice(&alphas);
        Ok(())
    })
}

/// Loads a trained agent file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn ofit_agent_load(path: *const c_char, out: *mut *mut OfitAgent) -> OfitStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let agent = TrainedAgent::load(path_arg(path, "path")?)?;
        *out = Box::into_raw(Box::new(OfitAgent {
            inner: Arc::new(agent),
        }));
        Ok(())
    })
}

/// # Safety
/// `agent` must come from `ofit_agent_load` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn ofit_agent_free(agent: *mut OfitAgent) {
    if !agent.is_null() {
        drop(Box::from_raw(agent));
    }
}

/// Greedy action for six alphas in pips and the current position.
///
/// # Safety
/// `alphas_pips` must point to 6 doubles and `action_out` be writable.
#[no_mangle]
pub unsafe extern "C" fn ofit_agent_decide(
    agent: *const OfitAgent,
    alphas_pips: *const f64,
    position: OfitPosition,
    action_out: *mut OfitAction,
) -> OfitStatus {
    guard(|| {
        let agent = agent.as_ref().ok_or_else(|| null("agent"))?;
        let alphas = array_arg(alphas_pips, "alphas_pips")?;
        let out = out_arg(action_out, "action_out")?;
        let position = match position {
            OfitPosition::Long => Position::Long,
            OfitPosition::Short => Position::Short,
        };
        *out = agent.inner.greedy(&AgentState { alphas, position }).into();
        Ok(())
    })
}

/// Opens a signal session. The model and agent are shared, so their handles
/// may be freed independently of the session.
///
/// # Safety
/// `instrument_toml` must be a NUL-terminated path; the handles must be live.
#[no_mangle]
pub unsafe extern "C" fn ofit_session_new(
    instrument_toml: *const c_char,
    model: *const OfitModel,
    agent: *const OfitAgent,
    out: *mut *mut OfitSession,
) -> OfitStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let spec = InstrumentSpec::load(path_arg(instrument_toml, "instrument_toml")?)?;
        let model = model.as_ref().ok_or_else(|| null("model"))?;
        let agent = agent.as_ref().ok_or_else(|| null("agent"))?;
        let session = Session::new(spec, model.inner.clone(), agent.inner.clone())?;
        *out = Box::into_raw(Box::new(OfitSession { inner: session }));
        Ok(())
    })
}

/// Feeds one tick; timestamps must strictly increase within a session.
///
/// # Safety
/// `ofi` must point to 10 doubles; the out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn ofit_session_signal(
    session: *mut OfitSession,
    timestamp_ms: i64,
    ofi: *const f64,
    mid: f64,
    action_out: *mut OfitAction,
    changed_out: *mut bool,
) -> OfitStatus {
    guard(|| {
        let session = session.as_mut().ok_or_else(|| null("session"))?;
        let req = SignalRequest {
            time: timestamp_ms,
            ofi: array_arg(ofi, "ofi")?,
            mid,
        };
        let action_out = out_arg(action_out, "action_out")?;
        let changed_out = out_arg(changed_out, "changed_out")?;
        let resp = session.inner.handle(&req)?;
        *action_out = resp.action.into();
        *changed_out = resp.changed;
        Ok(())
    })
}

/// Net PnL of the session so far, marked at the last mid.
///
/// # Safety
/// `session` must be live and `pnl_out` writable.
#[no_mangle]
pub unsafe extern "C" fn ofit_session_pnl(session: *const OfitSession, pnl_out: *mut f64) -> OfitStatus {
    guard(|| {
        let session = session.as_ref().ok_or_else(|| null("session"))?;
        let out = out_arg(pnl_out, "pnl_out")?;
        *out = session.inner.report().metrics.map_or(0.0, |m| m.net_pnl);
        Ok(())
    })
}

/// # Safety
/// `session` must come from `ofit_session_new` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn ofit_session_free(session: *mut OfitSession) {
    if !session.is_null() {
        drop(Box::from_raw(session));
    }
}

/// Order flow imbalance per level between two consecutive books.
///
/// # Safety
/// `prev` and `cur` must be valid books; `ofi_out` must have room for 10.
#[no_mangle]
pub unsafe extern "C" fn ofit_ofi(prev: *const OfitBook, cur: *const OfitBook, ofi_out: *mut f64) -> OfitStatus {
    guard(|| {
        let prev = prev.as_ref().ok_or_else(|| null("prev"))?;
        let cur = cur.as_ref().ok_or_else(|| null("cur"))?;
        if ofi_out.is_null() {
            return Err(null("ofi_out"));
        }
        let book = |b: &OfitBook| LobState::new(b.ask_prices, b.ask_volumes, b.bid_prices, b.bid_volumes);
        let v = lob::ofi(&book(prev)?, &book(cur)?)?;
        std::slice::from_raw_parts_mut(ofi_out, LEVELS).copy_from_slice(&v);
        Ok(())
    })
}
