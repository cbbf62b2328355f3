use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::ptr;

use ofitrade::agents::{self, AgentConfig, Algo, StateSpace};
use ofitrade::alpha_model::{init_model, MlpSpec};
use ofitrade::backtest::run_backtest;
use ofitrade::env::MarketEnv;
use ofitrade::labeling::{label_ticks, split_dataset, InstrumentSpec};
use ofitrade::lob::TickRecord;
use ofitrade::synth::{generate, SynthConfig};
use ofitrade_ffi::*;

struct Fixture {
    _dir: tempfile::TempDir,
    model: PathBuf,
    agent: PathBuf,
    instrument: PathBuf,
    ticks: Vec<TickRecord>,
}

fn fixture() -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let ticks = generate(&SynthConfig {
        steps: 3000,
        seed: 5,
        ..SynthConfig::default()
    })
    .unwrap();
    let spec = InstrumentSpec::frictionless("SYN", 0.01);
    let train = split_dataset(label_ticks(&ticks).unwrap()).unwrap().train;
    let mut env = MarketEnv::from_examples(&train, &spec).unwrap();
    let space = StateSpace::fit(env.state_alphas()).unwrap();
    let cfg = AgentConfig {
        episodes: 5,
        ..AgentConfig::default()
    };
    let agent = agents::train(Algo::Q, &mut env, &space, &cfg).unwrap().agent;
    let model = init_model(&MlpSpec::with_hidden(vec![8]), 1).unwrap();

    let paths = (dir.path().join("m.bin"), dir.path().join("a.bin"), dir.path().join("i.toml"));
    model.save(&paths.0).unwrap();
    agent.save(&paths.1).unwrap();
    std::fs::write(&paths.2, spec.to_toml_string()).unwrap();
    Fixture {
        _dir: dir,
        model: paths.0,
        agent: paths.1,
        instrument: paths.2,
        ticks,
    }
}

fn c_path(p: &Path) -> CString {
    CString::new(p.to_str().unwrap()).unwrap()
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(ofit_last_error()) }.to_string_lossy().into_owned()
}

#[test]
fn session_matches_backtest_actions() {
    let fx = fixture();
    unsafe {
        let mut model = ptr::null_mut();
        let mut agent = ptr::null_mut();
        let mut session = ptr::null_mut();
        assert_eq!(ofit_model_load(c_path(&fx.model).as_ptr(), &mut model), OfitStatus::Ok);
        assert_eq!(ofit_agent_load(c_path(&fx.agent).as_ptr(), &mut agent), OfitStatus::Ok);
        assert_eq!(
            ofit_session_new(c_path(&fx.instrument).as_ptr(), model, agent, &mut session),
            OfitStatus::Ok
        );
        // The session keeps its own references.
        ofit_model_free(model);
        ofit_agent_free(agent);

        let mut got = Vec::new();
        for t in &fx.ticks {
            let mut action = OfitAction::Buy;
            let mut changed = false;
            let st = ofit_session_signal(session, t.timestamp, t.ofi.as_ptr(), t.mid, &mut action, &mut changed);
            assert_eq!(st, OfitStatus::Ok, "{}", last_error());
            got.push(action);
        }
        let mut pnl = f64::NAN;
        assert_eq!(ofit_session_pnl(session, &mut pnl), OfitStatus::Ok);

        let m = ofitrade::alpha_model::AlphaModel::load(&fx.model).unwrap();
        let a = ofitrade::agents::TrainedAgent::load(&fx.agent).unwrap();
        let spec = InstrumentSpec::load(&fx.instrument).unwrap();
        let bt = run_backtest(&mut &a, &fx.ticks, &m, &spec).unwrap();
        let expected: Vec<OfitAction> = bt.actions.iter().map(|&x| x.into()).collect();
        assert_eq!(got, expected);
        let net: f64 = bt.log.trades.iter().map(|t| t.net).sum();
        assert!((pnl - net).abs() < 1e-9, "{pnl} vs {net}");

        // Replaying an old timestamp is rejected.
        let t = &fx.ticks[0];
        let (mut action, mut changed) = (OfitAction::Buy, false);
        let st = ofit_session_signal(session, t.timestamp, t.ofi.as_ptr(), t.mid, &mut action, &mut changed);
        assert_eq!(st, OfitStatus::Ordering);
        assert!(last_error().contains("ordering"));
        ofit_session_free(session);
    }
}

#[test]
fn model_predict_matches_library() {
    let fx = fixture();
    let lib = ofitrade::alpha_model::AlphaModel::load(&fx.model).unwrap();
    unsafe {
        let mut model = ptr::null_mut();
        assert_eq!(ofit_model_load(c_path(&fx.model).as_ptr(), &mut model), OfitStatus::Ok);
        let ofi = [0.5, -1.0, 2.0, 0.0, 1.0, -0.5, 0.25, 3.0, -2.0, 1.5];
        let mut out = [0.0; OFIT_HORIZONS];
        assert_eq!(ofit_model_predict(model, ofi.as_ptr(), out.as_mut_ptr()), OfitStatus::Ok);
        assert_eq!(out, lib.forward(&ofi).unwrap());
        ofit_model_free(model);
    }
}

#[test]
fn agent_decide_matches_library() {
    let fx = fixture();
    let lib = ofitrade::agents::TrainedAgent::load(&fx.agent).unwrap();
    unsafe {
        let mut agent = ptr::null_mut();
        assert_eq!(ofit_agent_load(c_path(&fx.agent).as_ptr(), &mut agent), OfitStatus::Ok);
        for k in -4..=4 {
            let alphas = [k as f64 * 0.75; OFIT_HORIZONS];
            for (pos, lib_pos) in [
                (OfitPosition::Long, ofitrade::agents::Position::Long),
                (OfitPosition::Short, ofitrade::agents::Position::Short),
            ] {
                let mut action = OfitAction::Buy;
                assert_eq!(ofit_agent_decide(agent, alphas.as_ptr(), pos, &mut action), OfitStatus::Ok);
                let expected = lib.greedy(&ofitrade::agents::AgentState {
                    alphas,
                    position: lib_pos,
                });
                assert_eq!(action, OfitAction::from(expected));
            }
        }
        ofit_agent_free(agent);
    }
}

#[test]
fn errors_are_reported() {
    unsafe {
        let mut model = ptr::null_mut();
        let missing = CString::new("/nonexistent/model.bin").unwrap();
        assert_eq!(ofit_model_load(missing.as_ptr(), &mut model), OfitStatus::Io);
        assert!(model.is_null());
        assert!(!last_error().is_empty());

        assert_eq!(ofit_model_load(ptr::null(), &mut model), OfitStatus::NullPointer);
        assert!(last_error().contains("path"));

        let mut out = [0.0; OFIT_HORIZONS];
        let ofi = [0.0; OFIT_LEVELS];
        assert_eq!(
            ofit_model_predict(ptr::null(), ofi.as_ptr(), out.as_mut_ptr()),
            OfitStatus::NullPointer
        );

        let dir = tempfile::tempdir().unwrap();
        let junk = dir.path().join("junk.bin");
        std::fs::write(&junk, b"not a model").unwrap();
        let st = ofit_model_load(c_path(&junk).as_ptr(), &mut model);
        assert_ne!(st, OfitStatus::Ok);
        assert!(model.is_null());

        // Freeing null is a no-op.
        ofit_model_free(ptr::null_mut());
        ofit_agent_free(ptr::null_mut());
        ofit_session_free(ptr::null_mut());
    }
}

fn book(bid: f64, ask: f64, bid_vol: f64, ask_vol: f64) -> OfitBook {
    let mut b = OfitBook {
        ask_prices: [0.0; OFIT_LEVELS],
        ask_volumes: [ask_vol; OFIT_LEVELS],
        bid_prices: [0.0; OFIT_LEVELS],
        bid_volumes: [bid_vol; OFIT_LEVELS],
    };
    for i in 0..OFIT_LEVELS {
        b.ask_prices[i] = ask + i as f64;
        b.bid_prices[i] = bid - i as f64;
    }
    b
}

#[test]
fn ofi_through_c_abi() {
    let prev = book(100.0, 101.0, 5.0, 5.0);
    let mut out = [f64::NAN; OFIT_LEVELS];
    unsafe {
        assert_eq!(ofit_ofi(&prev, &prev, out.as_mut_ptr()), OfitStatus::Ok);
        assert_eq!(out, [0.0; OFIT_LEVELS]);

        // Same prices, bid queues grow by 3 and ask queues shrink by 2.
        let cur = book(100.0, 101.0, 8.0, 3.0);
        assert_eq!(ofit_ofi(&prev, &cur, out.as_mut_ptr()), OfitStatus::Ok);
        assert_eq!(out, [5.0; OFIT_LEVELS]);

        let bad = book(100.0, 101.0, -1.0, 5.0);
        assert_eq!(ofit_ofi(&prev, &bad, out.as_mut_ptr()), OfitStatus::InvalidArgument);
    }
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/ofitrade.h")).unwrap();
    for f in [
        "ofit_last_error",
        "ofit_version",
        "ofit_model_load",
        "ofit_model_free",
        "ofit_model_predict",
        "ofit_agent_load",
        "ofit_agent_free",
        "ofit_agent_decide",
        "ofit_session_new",
        "ofit_session_signal",
        "ofit_session_pnl",
        "ofit_session_free",
        "ofit_ofi",
    ] {
        assert!(header.contains(&format!("{f}(")), "{f} missing from header");
    }
    let v = unsafe { CStr::from_ptr(ofit_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_compiles_as_c() {
    let Ok(cc) = which_cc() else { return };
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("t.c");
    std::fs::write(
        &src,
        "#include \"ofitrade.h\"\nint main(void) { OfitModel *m = 0; double o[OFIT_HORIZONS];\n\
         return ofit_model_predict(m, o, o) == OFIT_STATUS_NULL_POINTER ? 0 : 1; }\n",
    )
    .unwrap();
    let status = std::process::Command::new(cc)
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(concat!(env!("CARGO_MANIFEST_DIR"), "/include"))
        .arg(&src)
        .status()
        .unwrap();
    assert!(status.success());
}

fn which_cc() -> Result<&'static str, ()> {
    for cc in ["cc", "gcc", "clang"] {
        if std::process::Command::new(cc).arg("--version").output().is_ok() {
            return Ok(cc);
        }
    }
    Err(())
}
