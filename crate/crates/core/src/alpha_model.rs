//! Multi-horizon alpha regressor: OFI (10) -> rectifier MLP -> alphas (6).
//!
//! Features are standardized with train-split statistics. Labels are
//! standardized the same way inside the network and mapped back to price
//! units on output, so learning rates do not depend on the instrument's
//! price scale. Training uses Adam on sequential mini-batches with an L2
//! weight penalty and validation early stopping, and returns the
//! best-validation snapshot.

use std::path::Path;

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::codec;
use crate::error::{Error, Result};
use crate::labeling::{to_pips, AlphaVector, DatasetSplit, InstrumentSpec, LabeledExample, HORIZONS};
use crate::lob::LEVELS;
use crate::nn::{mse_with_grad, Adam, AdamConfig, Mlp, OutputActivation};

const MAGIC: &str = "OFITRADE-ALPHA-MODEL v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub input_dim: usize,
    pub hidden_layers: Vec<usize>,
    pub output_dim: usize,
}

impl Default for MlpSpec {
    fn default() -> Self {
        Self::with_hidden(vec![2048; 4])
    }
}

impl MlpSpec {
    pub fn with_hidden(hidden_layers: Vec<usize>) -> Self {
        Self {
            input_dim: LEVELS,
            hidden_layers,
            output_dim: HORIZONS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim != LEVELS {
            return Err(Error::invalid(format!("input_dim must be {LEVELS}")));
        }
        if self.output_dim != HORIZONS {
            return Err(Error::invalid(format!("output_dim must be {HORIZONS}")));
        }
        if let Some(i) = self.hidden_layers.iter().position(|&n| n == 0) {
            return Err(Error::invalid(format!("hidden layer {i} has zero nodes")));
        }
        Ok(())
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![self.input_dim];
        s.extend(&self.hidden_layers);
        s.push(self.output_dim);
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub patience: usize,
    pub max_epochs: usize,
    pub l2_lambda: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            batch_size: 256,
            patience: 5,
            max_epochs: 100,
            l2_lambda: 1e-5,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("learning_rate must be non-negative"));
        }
        if self.batch_size == 0 || self.patience == 0 || self.max_epochs == 0 {
            return Err(Error::invalid("batch_size, patience and max_epochs must be positive"));
        }
        if self.patience >= self.max_epochs {
            return Err(Error::invalid("patience must be smaller than max_epochs"));
        }
        if !(self.l2_lambda >= 0.0) {
            return Err(Error::invalid("l2_lambda must be non-negative"));
        }
        Ok(())
    }
}

/// Per-dimension affine standardization. A zero std passes the dimension
/// through unscaled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Normalization {
    pub fn identity(dim: usize) -> Self {
        Self {
            mean: vec![0.0; dim],
            std: vec![1.0; dim],
        }
    }

    pub fn fit<'a>(rows: impl Iterator<Item = &'a [f64]> + Clone, dim: usize) -> Self {
        let n = rows.clone().count().max(1) as f64;
        let mut mean = vec![0.0; dim];
        for r in rows.clone() {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; dim];
        for r in rows {
            for ((s, v), m) in var.iter_mut().zip(r).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std = var
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd > 0.0 && sd.is_finite() {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, std }
    }

    pub fn apply(&self, x: f64, dim: usize) -> f64 {
        (x - self.mean[dim]) / self.std[dim]
    }

    pub fn invert(&self, z: f64, dim: usize) -> f64 {
        z * self.std[dim] + self.mean[dim]
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingSummary {
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub best_val_mse: f64,
    pub final_train_mse: f64,
    pub final_val_mse: f64,
    pub train_curve: Vec<f64>,
    pub val_curve: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlphaModel {
    pub spec: MlpSpec,
    pub net: Mlp,
    pub features: Normalization,
    /// Label standardization; its mean is the train-split mean alpha.
    pub labels: Normalization,
    pub summary: TrainingSummary,
}

pub fn init_model(spec: &MlpSpec, seed: u64) -> Result<AlphaModel> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(AlphaModel {
        spec: spec.clone(),
        net: Mlp::init(&spec.sizes(), OutputActivation::Identity, &mut rng),
        features: Normalization::identity(spec.input_dim),
        labels: Normalization::identity(spec.output_dim),
        summary: TrainingSummary::default(),
    })
}

impl AlphaModel {
    fn feature_matrix(&self, rows: &[LabeledExample]) -> Array2<f64> {
        Array2::from_shape_fn((rows.len(), LEVELS), |(i, d)| {
            self.features.apply(rows[i].features[d], d)
        })
    }

    fn label_matrix(&self, rows: &[LabeledExample]) -> Array2<f64> {
        Array2::from_shape_fn((rows.len(), HORIZONS), |(i, h)| {
            self.labels.apply(rows[i].label[h], h)
        })
    }

    /// Predicted alphas, in price units, for one OFI vector.
    pub fn forward(&self, ofi: &[f64]) -> Result<AlphaVector> {
        if ofi.len() != self.spec.input_dim {
            return Err(Error::invalid(format!(
                "expected {} OFI values, got {}",
                self.spec.input_dim,
                ofi.len()
            )));
        }
        let x: Vec<f64> = ofi
            .iter()
            .enumerate()
            .map(|(d, v)| self.features.apply(*v, d))
            .collect();
        let z = self.net.forward_one(&x);
        let mut out = [0.0; HORIZONS];
        for (h, o) in out.iter_mut().enumerate() {
            *o = self.labels.invert(z[h], h);
        }
        Ok(out)
    }

    pub fn predict(&self, rows: &[LabeledExample]) -> Vec<AlphaVector> {
        self.predict_features(&rows.iter().map(|r| r.features).collect::<Vec<_>>())
    }

    pub fn predict_features(&self, features: &[[f64; LEVELS]]) -> Vec<AlphaVector> {
        let mut out = Vec::with_capacity(features.len());
        for chunk in features.chunks(4096) {
            let x = Array2::from_shape_fn((chunk.len(), LEVELS), |(i, d)| {
                self.features.apply(chunk[i][d], d)
            });
            let z = self.net.forward(x.view());
            for row in z.rows() {
                let mut a = [0.0; HORIZONS];
                for (h, v) in a.iter_mut().enumerate() {
                    *v = self.labels.invert(row[h], h);
                }
                out.push(a);
            }
        }
        out
    }

    /// Mean squared error over all horizons, in price units.
    pub fn mse(&self, rows: &[LabeledExample]) -> f64 {
        if rows.is_empty() {
            return f64::NAN;
        }
        let preds = self.predict(rows);
        let total: f64 = preds
            .iter()
            .zip(rows)
            .flat_map(|(p, r)| p.iter().zip(&r.label).map(|(a, b)| (a - b) * (a - b)))
            .sum();
        total / (rows.len() * HORIZONS) as f64
    }

    /// Train-split mean alpha per horizon.
    pub fn train_label_mean(&self) -> AlphaVector {
        let mut m = [0.0; HORIZONS];
        m.copy_from_slice(&self.labels.mean);
        m
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        codec::write_file(path, MAGIC, &self.header(), &self.net.flat_params())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        codec::encode(MAGIC, &self.header(), &self.net.flat_params())
    }

    fn header(&self) -> ModelHeader {
        ModelHeader {
            spec: self.spec.clone(),
            layer_sizes: self.net.sizes(),
            features: self.features.clone(),
            labels: self.labels.clone(),
            summary: self.summary.clone(),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let (header, params): (ModelHeader, Vec<f64>) = codec::read_file(path, MAGIC)?;
        header.spec.validate()?;
        if header.layer_sizes != header.spec.sizes() {
            return Err(Error::Artifact {
                path: path.to_path_buf(),
                message: "layer sizes disagree with spec".into(),
            });
        }
        let mut net = Mlp::zeros(&header.layer_sizes, OutputActivation::Identity);
        if params.len() != net.param_count() {
            return Err(Error::Artifact {
                path: path.to_path_buf(),
                message: format!(
                    "expected {} parameters, found {}",
                    net.param_count(),
                    params.len()
                ),
            });
        }
        net.set_flat_params(&params);
        Ok(Self {
            spec: header.spec,
            net,
            features: header.features,
            labels: header.labels,
            summary: header.summary,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct ModelHeader {
    spec: MlpSpec,
    layer_sizes: Vec<usize>,
    features: Normalization,
    labels: Normalization,
    summary: TrainingSummary,
}

/// Patience counter over a stream of validation losses.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    best: f64,
    best_epoch: usize,
    strikes: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopDecision {
    Improved,
    Continue,
    Stop,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        Self {
            patience,
            best: f64::INFINITY,
            best_epoch: 0,
            strikes: 0,
        }
    }

    /// Records the validation loss of `epoch` (1-based).
    pub fn observe(&mut self, epoch: usize, val_loss: f64) -> StopDecision {
        if val_loss < self.best {
            self.best = val_loss;
            self.best_epoch = epoch;
            self.strikes = 0;
            StopDecision::Improved
        } else {
            self.strikes += 1;
            if self.strikes >= self.patience {
                StopDecision::Stop
            } else {
                StopDecision::Continue
            }
        }
    }

    pub fn best(&self) -> (usize, f64) {
        (self.best_epoch, self.best)
    }
}

pub fn train(split: &DatasetSplit, spec: &MlpSpec, cfg: &TrainConfig) -> Result<AlphaModel> {
    cfg.validate()?;
    if split.train.is_empty() || split.validation.is_empty() {
        return Err(Error::invalid("train and validation splits must be non-empty"));
    }
    let mut model = init_model(spec, cfg.seed)?;
    model.features = Normalization::fit(split.train.iter().map(|r| &r.features[..]), LEVELS);
    model.labels = Normalization::fit(split.train.iter().map(|r| &r.label[..]), HORIZONS);

    let x_train = model.feature_matrix(&split.train);
    let y_train = model.label_matrix(&split.train);
    let label_var: Vec<f64> = model.labels.std.iter().map(|s| s * s).collect();

    let mut adam = Adam::new(&model.net, AdamConfig::new(cfg.learning_rate));
    let mut stopper = EarlyStopping::new(cfg.patience);
    let mut best_net = model.net.clone();
    let mut summary = TrainingSummary::default();
    let n = split.train.len();

    for epoch in 1..=cfg.max_epochs {
        let mut sq_err = 0.0;
        let mut start = 0;
        while start < n {
            let end = (start + cfg.batch_size).min(n);
            let xb = x_train.slice(ndarray::s![start..end, ..]);
            let yb = y_train.slice(ndarray::s![start..end, ..]);
            let cache = model.net.forward_cached(xb);
            let (_, d_out) = mse_with_grad(&cache.output, yb);
            for (row_p, row_y) in cache.output.rows().into_iter().zip(yb.rows()) {
                for h in 0..HORIZONS {
                    let d = row_p[h] - row_y[h];
                    sq_err += d * d * label_var[h];
                }
            }
            let (mut grads, _) = model.net.backward(&cache, &d_out);
            model.net.add_l2(&mut grads, cfg.l2_lambda);
            if !sq_err.is_finite() || !grads.all_finite() {
                return Err(Error::Divergence { epoch });
            }
            adam.step(&mut model.net, &grads);
            start = end;
        }
        let train_mse = sq_err / (n * HORIZONS) as f64;
        let val_mse = model.mse(&split.validation);
        if !val_mse.is_finite() || !train_mse.is_finite() {
            return Err(Error::Divergence { epoch });
        }
        summary.train_curve.push(train_mse);
        summary.val_curve.push(val_mse);
        summary.epochs_run = epoch;
        summary.final_train_mse = train_mse;
        summary.final_val_mse = val_mse;

        let decision = stopper.observe(epoch, val_mse);
        if decision == StopDecision::Improved {
            best_net = model.net.clone();
        }
        if decision == StopDecision::Stop {
            break;
        }
    }
    let (best_epoch, best_val) = stopper.best();
    summary.best_epoch = best_epoch;
    summary.best_val_mse = best_val;
    model.net = best_net;
    model.summary = summary;
    Ok(model)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorizonEval {
    pub horizon: usize,
    pub rmse: f64,
    pub label_std: f64,
    pub mse_model: f64,
    pub mse_benchmark: f64,
    /// Percent.
    pub r2_os: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub test_records: usize,
    pub horizons: Vec<HorizonEval>,
    pub average_rmse: f64,
    pub average_r2_os: f64,
}

/// Out-of-sample R^2 against a constant benchmark forecast, per horizon.
pub fn r2_os_report(
    predictions: &[AlphaVector],
    labels: &[AlphaVector],
    benchmark_mean: &AlphaVector,
) -> Result<EvalReport> {
    if labels.is_empty() || predictions.len() != labels.len() {
        return Err(Error::invalid("evaluation needs matching non-empty predictions and labels"));
    }
    let n = labels.len() as f64;
    let mut horizons = Vec::with_capacity(HORIZONS);
    for h in 0..HORIZONS {
        let mean = labels.iter().map(|l| l[h]).sum::<f64>() / n;
        let label_var = labels.iter().map(|l| (l[h] - mean) * (l[h] - mean)).sum::<f64>() / n;
        let mse_model = predictions
            .iter()
            .zip(labels)
            .map(|(p, l)| (p[h] - l[h]) * (p[h] - l[h]))
            .sum::<f64>()
            / n;
        let mse_benchmark = labels
            .iter()
            .map(|l| (benchmark_mean[h] - l[h]) * (benchmark_mean[h] - l[h]))
            .sum::<f64>()
            / n;
        if mse_benchmark == 0.0 {
            return Err(Error::UndefinedR2 { horizon: h + 1 });
        }
        horizons.push(HorizonEval {
            horizon: h + 1,
            rmse: mse_model.sqrt(),
            label_std: label_var.sqrt(),
            mse_model,
            mse_benchmark,
            r2_os: 100.0 * (1.0 - mse_model / mse_benchmark),
        });
    }
    let k = horizons.len() as f64;
    Ok(EvalReport {
        test_records: labels.len(),
        average_rmse: horizons.iter().map(|e| e.rmse).sum::<f64>() / k,
        average_r2_os: horizons.iter().map(|e| e.r2_os).sum::<f64>() / k,
        horizons,
    })
}

pub fn evaluate(
    model: &AlphaModel,
    test: &[LabeledExample],
    benchmark_mean: &AlphaVector,
) -> Result<EvalReport> {
    if test.is_empty() {
        return Err(Error::invalid("empty test set"));
    }
    let preds = model.predict(test);
    let labels: Vec<AlphaVector> = test.iter().map(|r| r.label).collect();
    r2_os_report(&preds, &labels, benchmark_mean)
}

impl EvalReport {
    /// Rescales error columns from price units to pips. R^2 is unchanged.
    pub fn in_pips(&self, spec: &InstrumentSpec) -> Result<Self> {
        let k = to_pips(1.0, spec)?;
        let mut out = self.clone();
        for e in &mut out.horizons {
            e.rmse *= k;
            e.label_std *= k;
            e.mse_model *= k * k;
            e.mse_benchmark *= k * k;
        }
        out.average_rmse *= k;
        Ok(out)
    }

    /// CSV shaped like a per-horizon evaluation table.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("horizon,rmse,label_std,mse_model,mse_benchmark,r2_os_pct\n");
        for e in &self.horizons {
            s.push_str(&format!(
                "{},{},{},{},{},{}\n",
                e.horizon, e.rmse, e.label_std, e.mse_model, e.mse_benchmark, e.r2_os
            ));
        }
        s.push_str(&format!(
            "average,{},,,,{}\n",
            self.average_rmse, self.average_r2_os
        ));
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub spec: MlpSpec,
    pub cfg: TrainConfig,
}

/// The 36-cell grid: widths 512/1024/2048 at depth 4, learning rates
/// 1e-5/1e-4, patience 5/10, batch sizes 128/256/512. Other settings come
/// from `base`.
pub fn default_grid(base: &TrainConfig) -> Vec<GridCell> {
    grid(&[512, 1024, 2048], 4, &[1e-5, 1e-4], &[5, 10], &[128, 256, 512], base)
}

pub fn grid(
    widths: &[usize],
    depth: usize,
    learning_rates: &[f64],
    patiences: &[usize],
    batch_sizes: &[usize],
    base: &TrainConfig,
) -> Vec<GridCell> {
    let mut cells = Vec::new();
    for &w in widths {
        for &lr in learning_rates {
            for &p in patiences {
                for &b in batch_sizes {
                    cells.push(GridCell {
                        spec: MlpSpec::with_hidden(vec![w; depth]),
                        cfg: TrainConfig {
                            learning_rate: lr,
                            patience: p,
                            batch_size: b,
                            ..base.clone()
                        },
                    });
                }
            }
        }
    }
    cells
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub cell: GridCell,
    pub val_mse: Option<f64>,
    pub epochs_run: usize,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct GridOutcome {
    pub results: Vec<GridResult>,
    /// Index of the lowest validation MSE; ties go to the earliest cell.
    pub best: Option<usize>,
}

/// Trains every cell (in parallel on the current rayon pool) and picks the
/// lowest validation MSE. Failing cells are recorded and skipped.
pub fn grid_search(split: &DatasetSplit, cells: &[GridCell]) -> Result<GridOutcome> {
    if cells.is_empty() {
        return Err(Error::invalid("empty grid"));
    }
    let results: Vec<GridResult> = cells
        .par_iter()
        .map(|cell| match train(split, &cell.spec, &cell.cfg) {
            Ok(model) => GridResult {
                cell: cell.clone(),
                val_mse: Some(model.summary.best_val_mse),
                epochs_run: model.summary.epochs_run,
                error: None,
            },
            Err(e) => GridResult {
                cell: cell.clone(),
                val_mse: None,
                epochs_run: 0,
                error: Some(e.to_string()),
            },
        })
        .collect();
    let mut best: Option<(usize, f64)> = None;
    for (i, r) in results.iter().enumerate() {
        if let Some(v) = r.val_mse {
            if best.is_none_or(|(_, b)| v < b) {
                best = Some((i, v));
            }
        }
    }
    Ok(GridOutcome {
        results,
        best: best.map(|(i, _)| i),
    })
}

impl GridOutcome {
    pub fn to_csv(&self) -> String {
        let mut s = String::from(
            "cell,hidden_layers,learning_rate,patience,batch_size,epochs_run,val_mse,error\n",
        );
        for (i, r) in self.results.iter().enumerate() {
            let hidden: Vec<String> = r.cell.spec.hidden_layers.iter().map(|n| n.to_string()).collect();
            s.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                i,
                hidden.join("x"),
                r.cell.cfg.learning_rate,
                r.cell.cfg.patience,
                r.cell.cfg.batch_size,
                r.epochs_run,
                r.val_mse.map(|v| v.to_string()).unwrap_or_default(),
                r.error.as_deref().unwrap_or("").replace(',', ";"),
            ));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array1;

    #[test]
    fn init_is_deterministic() {
        let spec = MlpSpec::with_hidden(vec![8, 8]);
        let a = init_model(&spec, 7).unwrap();
        let b = init_model(&spec, 7).unwrap();
        let c = init_model(&spec, 8).unwrap();
        assert_eq!(a.net.flat_params(), b.net.flat_params());
        assert_ne!(a.net.flat_params(), c.net.flat_params());
        assert!(init_model(&MlpSpec::with_hidden(vec![0]), 0).is_err());
    }

    #[test]
    fn zero_weights_return_bias() {
        let mut m = init_model(&MlpSpec::with_hidden(vec![4]), 0).unwrap();
        m.net = Mlp::zeros(&m.spec.sizes(), OutputActivation::Identity);
        m.net.layers[1].bias = Array1::from(vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let out = m.forward(&[0.3; LEVELS]).unwrap();
        assert_eq!(out, [1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert!(m.forward(&[0.0; 9]).is_err());
    }

    #[test]
    fn linear_identity_block_selects_inputs() {
        let mut m = init_model(&MlpSpec::with_hidden(vec![]), 0).unwrap();
        let mut w = Array2::zeros((LEVELS, HORIZONS));
        for h in 0..HORIZONS {
            w[[h, h]] = 1.0;
        }
        m.net.layers[0].weights = w;
        let x: Vec<f64> = (0..LEVELS).map(|i| i as f64 - 3.5).collect();
        assert_eq!(m.forward(&x).unwrap().to_vec(), x[..HORIZONS].to_vec());
    }

    #[test]
    fn early_stopping_counts_strikes() {
        let mut es = EarlyStopping::new(3);
        assert_eq!(es.observe(1, 1.0), StopDecision::Improved);
        assert_eq!(es.observe(2, 1.0), StopDecision::Continue);
        assert_eq!(es.observe(3, 0.5), StopDecision::Improved);
        assert_eq!(es.observe(4, 0.6), StopDecision::Continue);
        assert_eq!(es.observe(5, 0.7), StopDecision::Continue);
        assert_eq!(es.observe(6, 0.8), StopDecision::Stop);
        assert_eq!(es.best(), (3, 0.5));
    }

    #[test]
    fn r2_identities() {
        let labels: Vec<AlphaVector> = (0..50).map(|i| [(i % 7) as f64 - 3.0; HORIZONS]).collect();
        let mean = [0.25; HORIZONS];
        let preds = vec![mean; labels.len()];
        let rep = r2_os_report(&preds, &labels, &mean).unwrap();
        assert!(rep.horizons.iter().all(|e| e.r2_os.abs() < 1e-12));
        let rep = r2_os_report(&labels, &labels, &mean).unwrap();
        assert!(rep.horizons.iter().all(|e| e.r2_os == 100.0));
        let avg = rep.horizons.iter().map(|e| e.r2_os).sum::<f64>() / 6.0;
        assert_eq!(rep.average_r2_os, avg);

        let flat = vec![[1.0; HORIZONS]; 5];
        assert!(matches!(
            r2_os_report(&flat, &flat, &[1.0; HORIZONS]),
            Err(Error::UndefinedR2 { horizon: 1 })
        ));
    }

    #[test]
    fn config_validation() {
        let mut cfg = TrainConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.patience = 100;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn grid_has_36_cells() {
        let cells = default_grid(&TrainConfig::default());
        assert_eq!(cells.len(), 36);
        assert_eq!(cells[0].spec.hidden_layers, vec![512; 4]);
        assert_eq!(cells[35].spec.hidden_layers, vec![2048; 4]);
    }
}
