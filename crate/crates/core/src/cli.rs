//! Command-line front end. Commands that write files also write a run
//! manifest beside their first output; tabular results without `--out` go
//! to stdout.

use std::io::Write;
use std::num::NonZeroUsize;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::agents::{self, export_q_heatmap, random_agent, AgentConfig, Algo, HeatmapValue, StateSpace, TrainedAgent};
use crate::alpha_model::{self, AlphaModel, MlpSpec, TrainConfig};
use crate::backtest::{self, compute_metrics, daily_pnl, mann_whitney_u, run_backtest};
use crate::env::MarketEnv;
use crate::labeling::{self, split_dataset, split_ranges, InstrumentSpec, LabeledExample};
use crate::lob::{self, TickRecord};
use crate::manifest::RunManifest;
use crate::serve::{self, ServeConfig};
use crate::synth::{self, SynthConfig, SynthKind};

#[derive(Parser, Debug, Serialize)]
#[command(name = "ofitrade", version, about = "OFI alpha models, trading agents and backtests")]
pub struct Cli {
    /// Seed for every random stream of the run.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads for parallel sections (grid cells, service runtime).
    #[arg(long, global = true, default_value = "1")]
    pub jobs: NonZeroUsize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Serialize)]
pub enum Command {
    /// Generate a synthetic tick stream.
    Synth(SynthArgs),
    /// OFI feature tools.
    #[command(subcommand)]
    Features(FeaturesCmd),
    /// Attach the six forward alphas to every tick.
    Label(LabelArgs),
    /// Alpha extraction model.
    #[command(subcommand)]
    Alpha(AlphaCmd),
    /// Trading agents.
    #[command(subcommand)]
    Agent(AgentCmd),
    /// Offline replay and agent comparison.
    #[command(subcommand)]
    Backtest(BacktestCmd),
    /// Run the JSON signal service.
    Serve(ServeArgs),
}

#[derive(Args, Debug, Serialize)]
pub struct SynthArgs {
    /// random_walk, predictive_alpha or mean_reverting.
    #[arg(long)]
    pub kind: SynthKind,
    #[arg(long)]
    pub steps: usize,
    #[arg(long, default_value_t = 0.9)]
    pub signal_strength: f64,
    #[arg(long, default_value_t = 0.5)]
    pub noise_std: f64,
    #[arg(long, default_value_t = 0.01)]
    pub tick_size: f64,
    #[arg(long, default_value_t = 1000)]
    pub ticks_per_day: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Subcommand, Debug, Serialize)]
pub enum FeaturesCmd {
    /// Per-level OFI statistics as CSV.
    Stats {
        /// Tick CSV.
        file: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug, Serialize)]
pub struct LabelArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write per-horizon alpha statistics in pips to `<out>.alpha_stats.csv`.
    #[arg(long)]
    pub instrument: Option<PathBuf>,
}

#[derive(Subcommand, Debug, Serialize)]
pub enum AlphaCmd {
    /// Train one model on the 8:1:1 chronological split.
    Train(AlphaTrainArgs),
    /// Grid search over widths, learning rates, patience and batch sizes.
    Tune(AlphaTuneArgs),
    /// Per-horizon RMSE and out-of-sample R^2.
    Eval(AlphaEvalArgs),
}

#[derive(Args, Debug, Serialize)]
pub struct AlphaTrainArgs {
    /// Labeled CSV.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub instrument: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "2048,2048,2048,2048")]
    pub hidden: Vec<usize>,
    #[arg(long, default_value_t = 1e-4)]
    pub lr: f64,
    #[arg(long, default_value_t = 256)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 5)]
    pub patience: usize,
    #[arg(long, default_value_t = 100)]
    pub max_epochs: usize,
    #[arg(long, default_value_t = 1e-5)]
    pub l2: f64,
}

#[derive(Args, Debug, Serialize)]
pub struct AlphaTuneArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub instrument: Option<PathBuf>,
    /// Grid results CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// Retrain the best cell and save it here.
    #[arg(long)]
    pub model_out: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "512,1024,2048")]
    pub widths: Vec<usize>,
    #[arg(long, default_value_t = 4)]
    pub depth: usize,
    #[arg(long, value_delimiter = ',', default_value = "1e-5,1e-4")]
    pub lrs: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "5,10")]
    pub patiences: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "128,256,512")]
    pub batch_sizes: Vec<usize>,
    #[arg(long, default_value_t = 100)]
    pub max_epochs: usize,
    #[arg(long, default_value_t = 1e-5)]
    pub l2: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
pub enum Segment {
    Train,
    Validation,
    Test,
    All,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
pub enum Benchmark {
    /// Training-label mean stored in the model.
    Train,
    /// Mean of the evaluated segment.
    Segment,
}

#[derive(Args, Debug, Serialize)]
pub struct AlphaEvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Report errors in pips instead of price units.
    #[arg(long)]
    pub instrument: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Segment::Test)]
    pub segment: Segment,
    #[arg(long, value_enum, default_value_t = Benchmark::Train)]
    pub benchmark: Benchmark,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand, Debug, Serialize)]
pub enum AgentCmd {
    /// Train on the training segment of a labeled file.
    Train(AgentTrainArgs),
    /// Q-value heatmaps per position transition.
    Explain(AgentExplainArgs),
}

#[derive(Args, Debug, Serialize)]
pub struct AgentTrainArgs {
    #[arg(long, value_parser = parse_algo)]
    pub algo: Algo,
    #[arg(long)]
    pub instrument: PathBuf,
    /// Labeled CSV.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Agent hyperparameters (TOML); defaults otherwise.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the configured episode count.
    #[arg(long)]
    pub episodes: Option<usize>,
    /// Use this model's predictions as state alphas instead of realized ones.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Per-episode reward CSV.
    #[arg(long)]
    pub rewards_out: Option<PathBuf>,
}

fn parse_algo(s: &str) -> Result<Algo, String> {
    s.parse().map_err(|e: crate::error::Error| e.to_string())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
pub enum ValueKind {
    Action,
    Advantage,
}

#[derive(Args, Debug, Serialize)]
pub struct AgentExplainArgs {
    #[arg(long)]
    pub agent: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ValueKind::Action)]
    pub value: ValueKind,
}

#[derive(Subcommand, Debug, Serialize)]
pub enum BacktestCmd {
    /// Replay ticks through a model and an agent.
    Run(BacktestRunArgs),
    /// One-sided Mann-Whitney U test on two daily PnL files.
    Compare(CompareArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
pub enum TickSegment {
    All,
    Test,
}

#[derive(Args, Debug, Serialize)]
pub struct BacktestRunArgs {
    /// Agent file, or `random` for the uniform random agent.
    #[arg(long)]
    pub agent: String,
    #[arg(long)]
    pub model: PathBuf,
    /// Tick CSV.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub instrument: PathBuf,
    /// `test` keeps the ticks of the last tenth of labeled rows.
    #[arg(long, value_enum, default_value_t = TickSegment::All)]
    pub segment: TickSegment,
    /// Trade log CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub daily_out: Option<PathBuf>,
    #[arg(long)]
    pub metrics_out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct CompareArgs {
    /// Daily PnL CSV of the agent expected to do better.
    #[arg(long)]
    pub a: PathBuf,
    #[arg(long)]
    pub b: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct ServeArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
}

/// Parses `std::env::args`, runs, and maps failures to exit codes: 2 for
/// usage errors, 1 for everything else.
pub fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code().clamp(0, 255) as u8);
        }
    };
    let _ = tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("warn")),
        )
        .try_init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", format!("{e:#}").replace('\n', " "));
            ExitCode::FAILURE
        }
    }
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    let jobs = cli.jobs.get();
    // A second call in the same process keeps the first pool.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
    let config = serde_json::to_value(&cli)?;
    let seed = cli.seed;
    let m = |name: &str| RunManifest::begin(name, config.clone(), vec![seed]);
    match &cli.command {
        Command::Synth(a) => cmd_synth(a, seed, m("synth")),
        Command::Features(FeaturesCmd::Stats { file, out }) => {
            cmd_features_stats(file, out.as_deref(), m("features stats"))
        }
        Command::Label(a) => cmd_label(a, m("label")),
        Command::Alpha(AlphaCmd::Train(a)) => cmd_alpha_train(a, seed, m("alpha train")),
        Command::Alpha(AlphaCmd::Tune(a)) => cmd_alpha_tune(a, seed, m("alpha tune")),
        Command::Alpha(AlphaCmd::Eval(a)) => cmd_alpha_eval(a, m("alpha eval")),
        Command::Agent(AgentCmd::Train(a)) => cmd_agent_train(a, seed, m("agent train")),
        Command::Agent(AgentCmd::Explain(a)) => cmd_agent_explain(a, m("agent explain")),
        Command::Backtest(BacktestCmd::Run(a)) => cmd_backtest_run(a, seed, m("backtest run")),
        Command::Backtest(BacktestCmd::Compare(a)) => cmd_compare(a, m("backtest compare")),
        Command::Serve(a) => cmd_serve(a, jobs),
    }
}

/// Refuses to write over any input of the run.
fn guard(manifest: &RunManifest, outputs: &[Option<&Path>]) -> anyhow::Result<()> {
    for out in outputs.iter().flatten() {
        let Ok(o) = out.canonicalize() else { continue };
        for input in &manifest.inputs {
            if input.path.canonicalize().is_ok_and(|i| i == o) {
                bail!("output {} would overwrite an input", out.display());
            }
        }
    }
    Ok(())
}

fn emit(manifest: &mut RunManifest, out: Option<&Path>, bytes: &[u8]) -> anyhow::Result<()> {
    match out {
        Some(p) => {
            std::fs::write(p, bytes).with_context(|| format!("writing {}", p.display()))?;
            manifest.output(p)?;
        }
        None => std::io::stdout().lock().write_all(bytes)?,
    }
    Ok(())
}

fn read_ticks(path: &Path, m: &mut RunManifest) -> anyhow::Result<Vec<TickRecord>> {
    m.input(path).with_context(|| format!("reading {}", path.display()))?;
    lob::parse_tick_csv(path).with_context(|| format!("reading {}", path.display()))
}

fn read_labeled(path: &Path, m: &mut RunManifest) -> anyhow::Result<Vec<LabeledExample>> {
    m.input(path).with_context(|| format!("reading {}", path.display()))?;
    labeling::read_labeled_csv(path).with_context(|| format!("reading {}", path.display()))
}

fn read_instrument(path: &Path, m: &mut RunManifest) -> anyhow::Result<InstrumentSpec> {
    m.input(path).with_context(|| format!("reading {}", path.display()))?;
    InstrumentSpec::load(path).with_context(|| format!("reading {}", path.display()))
}

fn read_model(path: &Path, m: &mut RunManifest) -> anyhow::Result<AlphaModel> {
    m.input(path).with_context(|| format!("reading {}", path.display()))?;
    AlphaModel::load(path).with_context(|| format!("loading model {}", path.display()))
}

fn finish(m: RunManifest) -> anyhow::Result<()> {
    if let Some(p) = m.finish()? {
        tracing::info!(manifest = %p.display(), "wrote run manifest");
    }
    Ok(())
}

fn cmd_synth(a: &SynthArgs, seed: u64, mut m: RunManifest) -> anyhow::Result<()> {
    let cfg = SynthConfig {
        kind: a.kind,
        steps: a.steps,
        tick_size: a.tick_size,
        signal_strength: a.signal_strength,
        noise_std: a.noise_std,
        seed,
        ticks_per_day: a.ticks_per_day,
        ..SynthConfig::default()
    };
    let ticks = synth::generate(&cfg)?;
    let mut buf = Vec::new();
    lob::write_ticks(&mut buf, &ticks)?;
    emit(&mut m, Some(&a.out), &buf)?;
    finish(m)
}

fn cmd_features_stats(file: &Path, out: Option<&Path>, mut m: RunManifest) -> anyhow::Result<()> {
    let ticks = read_ticks(file, &mut m)?;
    guard(&m, &[out])?;
    let ofi: Vec<[f64; lob::LEVELS]> = ticks.iter().map(|t| t.ofi).collect();
    let stats = lob::summary_stats(&ofi)?;
    let mut buf = Vec::new();
    lob::write_level_stats(&mut buf, "level", &stats)?;
    emit(&mut m, out, &buf)?;
    finish(m)
}

fn cmd_label(a: &LabelArgs, mut m: RunManifest) -> anyhow::Result<()> {
    let ticks = read_ticks(&a.data, &mut m)?;
    let spec = a.instrument.as_deref().map(|p| read_instrument(p, &mut m)).transpose()?;
    guard(&m, &[Some(&a.out)])?;
    let examples = labeling::label_ticks(&ticks)?;
    let mut buf = Vec::new();
    labeling::write_labeled(&mut buf, &examples)?;
    emit(&mut m, Some(&a.out), &buf)?;
    if let Some(spec) = spec {
        let labels: Vec<_> = examples.iter().map(|e| e.label).collect();
        let stats = labeling::alpha_stats(&labels, &spec)?;
        let mut buf = Vec::new();
        lob::write_level_stats(&mut buf, "horizon", &stats)?;
        let path = sibling(&a.out, "alpha_stats.csv");
        emit(&mut m, Some(&path), &buf)?;
    }
    finish(m)
}

/// `<path>.<suffix>`.
fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".");
    name.push(suffix);
    path.with_file_name(name)
}

fn cmd_alpha_train(a: &AlphaTrainArgs, seed: u64, mut m: RunManifest) -> anyhow::Result<()> {
    let examples = read_labeled(&a.data, &mut m)?;
    if let Some(p) = &a.instrument {
        read_instrument(p, &mut m)?;
    }
    guard(&m, &[Some(&a.out)])?;
    let split = split_dataset(examples)?;
    let spec = MlpSpec::with_hidden(a.hidden.clone());
    let cfg = TrainConfig {
        learning_rate: a.lr,
        batch_size: a.batch_size,
        patience: a.patience,
        max_epochs: a.max_epochs,
        l2_lambda: a.l2,
        seed,
    };
    let model = alpha_model::train(&split, &spec, &cfg)?;
    tracing::info!(
        epochs = model.summary.epochs_run,
        best_epoch = model.summary.best_epoch,
        val_mse = model.summary.best_val_mse,
        "alpha model trained"
    );
    emit(&mut m, Some(&a.out), &model.to_bytes()?)?;
    finish(m)
}

fn cmd_alpha_tune(a: &AlphaTuneArgs, seed: u64, mut m: RunManifest) -> anyhow::Result<()> {
    let examples = read_labeled(&a.data, &mut m)?;
    if let Some(p) = &a.instrument {
        read_instrument(p, &mut m)?;
    }
    guard(&m, &[Some(&a.out), a.model_out.as_deref()])?;
    let split = split_dataset(examples)?;
    let base = TrainConfig {
        max_epochs: a.max_epochs,
        l2_lambda: a.l2,
        seed,
        ..TrainConfig::default()
    };
    let cells = alpha_model::grid(&a.widths, a.depth, &a.lrs, &a.patiences, &a.batch_sizes, &base);
    let outcome = alpha_model::grid_search(&split, &cells)?;
    emit(&mut m, Some(&a.out), outcome.to_csv().as_bytes())?;
    if let Some(path) = &a.model_out {
        let Some(best) = outcome.best else {
            bail!("every grid cell failed");
        };
        let cell = &outcome.results[best].cell;
        let model = alpha_model::train(&split, &cell.spec, &cell.cfg)?;
        emit(&mut m, Some(path), &model.to_bytes()?)?;
    }
    finish(m)
}

fn cmd_alpha_eval(a: &AlphaEvalArgs, mut m: RunManifest) -> anyhow::Result<()> {
    let model = read_model(&a.model, &mut m)?;
    let examples = read_labeled(&a.data, &mut m)?;
    let spec = a.instrument.as_deref().map(|p| read_instrument(p, &mut m)).transpose()?;
    guard(&m, &[a.out.as_deref()])?;
    let rows: Vec<LabeledExample> = match a.segment {
        Segment::All => examples,
        seg => {
            let split = split_dataset(examples)?;
            match seg {
                Segment::Train => split.train,
                Segment::Validation => split.validation,
                _ => split.test,
            }
        }
    };
    let benchmark = match a.benchmark {
        Benchmark::Train => model.train_label_mean(),
        Benchmark::Segment => {
            let n = rows.len().max(1) as f64;
            let mut mean = [0.0; labeling::HORIZONS];
            for r in &rows {
                for (m, l) in mean.iter_mut().zip(r.label) {
                    *m += l / n;
                }
            }
            mean
        }
    };
    let mut report = alpha_model::evaluate(&model, &rows, &benchmark)?;
    if let Some(spec) = &spec {
        report = report.in_pips(spec)?;
    }
    emit(&mut m, a.out.as_deref(), report.to_csv().as_bytes())?;
    finish(m)
}

fn cmd_agent_train(a: &AgentTrainArgs, seed: u64, mut m: RunManifest) -> anyhow::Result<()> {
    let spec = read_instrument(&a.instrument, &mut m)?;
    let examples = read_labeled(&a.data, &mut m)?;
    let mut cfg = match &a.config {
        Some(p) => {
            m.input(p)?;
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            AgentConfig::from_toml_str(&text).with_context(|| format!("in {}", p.display()))?
        }
        None => AgentConfig::default(),
    };
    if let Some(e) = a.episodes {
        cfg.episodes = e;
    }
    cfg.seed = seed;
    cfg.validate()?;
    let model = a.model.as_deref().map(|p| read_model(p, &mut m)).transpose()?;
    guard(&m, &[Some(&a.out), a.rewards_out.as_deref()])?;

    let train = split_dataset(examples)?.train;
    let mut env = match &model {
        Some(model) => MarketEnv::with_state_alphas(&train, &model.predict(&train), &spec)?,
        None => MarketEnv::from_examples(&train, &spec)?,
    };
    let space = StateSpace::fit(env.state_alphas())?;
    let outcome = agents::train(a.algo, &mut env, &space, &cfg)?;
    tracing::info!(
        algo = %a.algo,
        episodes = outcome.episode_rewards.len(),
        last_reward = outcome.episode_rewards.last().copied().unwrap_or(0.0),
        "agent trained"
    );
    emit(&mut m, Some(&a.out), &outcome.agent.to_bytes()?)?;
    if let Some(p) = &a.rewards_out {
        let mut s = String::from("episode,reward\n");
        for (i, r) in outcome.episode_rewards.iter().enumerate() {
            s.push_str(&format!("{},{r}\n", i + 1));
        }
        emit(&mut m, Some(p), s.as_bytes())?;
    }
    finish(m)
}

fn cmd_agent_explain(a: &AgentExplainArgs, mut m: RunManifest) -> anyhow::Result<()> {
    m.input(&a.agent)?;
    guard(&m, &[a.out.as_deref()])?;
    let agent = TrainedAgent::load(&a.agent).with_context(|| format!("loading agent {}", a.agent.display()))?;
    let value = match a.value {
        ValueKind::Action => HeatmapValue::ActionValue,
        ValueKind::Advantage => HeatmapValue::Advantage,
    };
    let maps = export_q_heatmap(&agent, value);
    emit(&mut m, a.out.as_deref(), agents::Heatmap::to_csv(&maps).as_bytes())?;
    finish(m)
}

fn cmd_backtest_run(a: &BacktestRunArgs, seed: u64, mut m: RunManifest) -> anyhow::Result<()> {
    let spec = read_instrument(&a.instrument, &mut m)?;
    let model = read_model(&a.model, &mut m)?;
    let mut ticks = read_ticks(&a.data, &mut m)?;
    let agent = if a.agent == "random" {
        None
    } else {
        let p = Path::new(&a.agent);
        m.input(p).with_context(|| format!("reading {}", p.display()))?;
        Some(TrainedAgent::load(p).with_context(|| format!("loading agent {}", p.display()))?)
    };
    guard(&m, &[a.out.as_deref(), a.daily_out.as_deref(), a.metrics_out.as_deref()])?;
    if a.segment == TickSegment::Test {
        let labeled = ticks.len().saturating_sub(labeling::HORIZONS);
        if labeled < 10 {
            bail!("too few ticks for a test segment: {}", ticks.len());
        }
        let range = split_ranges(labeled)[2].clone();
        ticks = ticks[range].to_vec();
    }
    let result = match agent {
        Some(agent) => run_backtest(&mut &agent, &ticks, &model, &spec)?,
        None => run_backtest(&mut random_agent(seed), &ticks, &model, &spec)?,
    };
    let metrics = compute_metrics(&result.log)?;
    eprint!("{}", metrics.to_table());

    let mut buf = Vec::new();
    backtest::write_trades(&mut buf, &result.log)?;
    emit(&mut m, a.out.as_deref(), &buf)?;
    if let Some(p) = &a.daily_out {
        let mut buf = Vec::new();
        backtest::write_daily(&mut buf, &daily_pnl(&result.log))?;
        emit(&mut m, Some(p), &buf)?;
    }
    if let Some(p) = &a.metrics_out {
        emit(&mut m, Some(p), metrics.to_csv().as_bytes())?;
    }
    finish(m)
}

fn cmd_compare(a: &CompareArgs, mut m: RunManifest) -> anyhow::Result<()> {
    let mut load = |p: &Path| -> anyhow::Result<Vec<f64>> {
        m.input(p).with_context(|| format!("reading {}", p.display()))?;
        let f = std::fs::File::open(p).with_context(|| format!("reading {}", p.display()))?;
        Ok(backtest::read_daily(f).with_context(|| format!("reading {}", p.display()))?)
    };
    let xa = load(&a.a)?;
    let xb = load(&a.b)?;
    guard(&m, &[a.out.as_deref()])?;
    let u = mann_whitney_u(&xa, &xb)?;
    let method = serde_json::to_value(u.method)?;
    let text = format!(
        "n_a,n_b,rank_sum_a,rank_sum_b,u_a,u_b,one_sided_p,method\n{},{},{},{},{},{},{},{}\n",
        xa.len(),
        xb.len(),
        u.rank_sum_a,
        u.rank_sum_b,
        u.u_a,
        u.u_b,
        u.one_sided_p,
        method.as_str().unwrap_or_default()
    );
    emit(&mut m, a.out.as_deref(), text.as_bytes())?;
    finish(m)
}

fn cmd_serve(a: &ServeArgs, jobs: usize) -> anyhow::Result<()> {
    let cfg = ServeConfig::load(a.config.as_deref())?;
    tracing::info!(config = %json!(cfg), "starting service");
    let rt = tokio::runtime::Builder::new_multi_thread()
        .worker_threads(jobs)
        .enable_all()
        .build()?;
    rt.block_on(serve::serve(cfg))?;
    Ok(())
}
