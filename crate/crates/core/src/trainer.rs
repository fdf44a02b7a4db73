//! Mean-squared-error training with Adam or plain SGD, loss history and
//! checkpoints.

use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::datapipe::WindowedDataset;
use crate::gradcore::blob::{assign_params, read_params, write_params};
use crate::gradcore::{Array, Parameter, Parameterized, Rng};
use crate::models::{Forecaster, ModelSpec};
use crate::textio::{fmt_f64, read_json, write_json};
use crate::{Error, Result};

pub const SPEC_FILE: &str = "spec.json";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Adam,
    Sgd,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub shuffle_seed: u64,
    /// Stop after this many epochs without a validation improvement.
    pub patience: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 500,
            batch_size: 32,
            learning_rate: 1e-3,
            optimizer: OptimizerKind::Adam,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            shuffle_seed: 0,
            patience: Some(50),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::config("epochs must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size must be at least 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || !(self.epsilon > 0.0) {
            return Err(Error::config("adam needs 0 ≤ beta1, beta2 < 1 and epsilon > 0"));
        }
        if self.patience == Some(0) {
            return Err(Error::config("patience must be at least 1 when set"));
        }
        Ok(())
    }
}

/// Mean of squared errors over every entry, with its gradient
/// `2 (pred − target) / n`.
pub fn mse_loss(pred: &Array, target: &Array) -> Result<(f64, Array)> {
    if pred.shape() != target.shape() {
        return Err(Error::shape(format!(
            "prediction {:?} and target {:?} differ",
            pred.shape(),
            target.shape()
        )));
    }
    let n = pred.len() as f64;
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(pred.len());
    for (&p, &t) in pred.data().iter().zip(target.data()) {
        let e = p - t;
        loss += e * e;
        grad.push(2.0 * e / n);
    }
    Ok((loss / n, Array::from_vec(pred.shape(), grad)?))
}

fn non_finite_grad(params: &[&mut Parameter]) -> Option<String> {
    params
        .iter()
        .find(|p| !p.grad.is_finite())
        .map(|p| p.name.clone())
}

fn divergence() -> Error {
    Error::Divergence {
        epoch: 0,
        last_finite_epoch: None,
    }
}

/// Bias-corrected Adam.
#[derive(Clone, Debug)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(learning_rate: f64, beta1: f64, beta2: f64, epsilon: f64) -> Self {
        Self {
            learning_rate,
            beta1,
            beta2,
            epsilon,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    pub fn moments(&self) -> (&[Vec<f64>], &[Vec<f64>]) {
        (&self.m, &self.v)
    }

    pub fn step(&mut self, params: &mut [&mut Parameter]) -> Result<()> {
        if non_finite_grad(params).is_some() {
            return Err(divergence());
        }
        if self.m.is_empty() {
            self.m = params.iter().map(|p| vec![0.0; p.value.len()]).collect();
            self.v = self.m.clone();
        }
        if self.m.len() != params.len() {
            return Err(Error::State("optimizer state does not match parameter list".into()));
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.learning_rate, self.epsilon);
        for ((p, m), v) in params.iter_mut().zip(&mut self.m).zip(&mut self.v) {
            let grad = p.grad.data().to_vec();
            for (((w, g), m), v) in p.value.data_mut().iter_mut().zip(&grad).zip(m).zip(v) {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                let m_hat = *m / c1;
                let v_hat = *v / c2;
                *w -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub enum Optimizer {
    Adam(Adam),
    Sgd { learning_rate: f64 },
}

impl Optimizer {
    pub fn from_config(config: &TrainConfig) -> Self {
        match config.optimizer {
            OptimizerKind::Adam => Self::Adam(Adam::new(
                config.learning_rate,
                config.beta1,
                config.beta2,
                config.epsilon,
            )),
            OptimizerKind::Sgd => Self::Sgd {
                learning_rate: config.learning_rate,
            },
        }
    }

    pub fn step(&mut self, params: &mut [&mut Parameter]) -> Result<()> {
        match self {
            Self::Adam(a) => a.step(params),
            Self::Sgd { learning_rate } => {
                if non_finite_grad(params).is_some() {
                    return Err(divergence());
                }
                for p in params.iter_mut() {
                    let lr = *learning_rate;
                    let grad = p.grad.data().to_vec();
                    for (w, g) in p.value.data_mut().iter_mut().zip(grad) {
                        *w -= lr * g;
                    }
                }
                Ok(())
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_mse: f64,
    pub val_mse: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_mse: f64,
    /// Not part of any deterministic artifact.
    #[serde(skip)]
    pub wall_time_s: f64,
}

impl TrainHistory {
    /// `epoch,train_mse,val_mse` at full precision.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_mse,val_mse\n");
        for r in &self.epochs {
            out.push_str(&format!("{},{},{}\n", r.epoch, fmt_f64(r.train_mse), fmt_f64(r.val_mse)));
        }
        out
    }

    pub fn train_mse(&self) -> Vec<f64> {
        self.epochs.iter().map(|r| r.train_mse).collect()
    }
}

fn check_dataset(spec: &ModelSpec, ds: &WindowedDataset, what: &str) -> Result<()> {
    if ds.lag() != spec.lag || ds.horizon() != spec.horizon || ds.channels() != spec.channels {
        return Err(Error::shape(format!(
            "{what} set has d={}, p={}, C={} but the model expects d={}, p={}, C={}",
            ds.lag(),
            ds.horizon(),
            ds.channels(),
            spec.lag,
            spec.horizon,
            spec.channels
        )));
    }
    if ds.is_empty() {
        return Err(Error::domain(format!("{what} set is empty")));
    }
    Ok(())
}

/// Batched predictions `[n × p]` for every window of `ds`, in order.
pub fn predict_all(model: &mut Forecaster, ds: &WindowedDataset, batch_size: usize) -> Result<Array> {
    check_dataset(model.spec(), ds, "evaluation")?;
    let p = ds.horizon();
    let mut out = Vec::with_capacity(ds.len() * p);
    let indices: Vec<usize> = (0..ds.len()).collect();
    for chunk in indices.chunks(batch_size.max(1)) {
        let (x, _) = ds.batch(chunk);
        out.extend_from_slice(model.forward(&x)?.data());
    }
    Array::from_vec(&[ds.len(), p], out)
}

/// MSE over every target entry of `ds`, in normalized units.
pub fn dataset_mse(model: &mut Forecaster, ds: &WindowedDataset, batch_size: usize) -> Result<f64> {
    let pred = predict_all(model, ds, batch_size)?;
    Ok(mse_loss(&pred, &ds.targets)?.0)
}

fn snapshot(model: &Forecaster) -> Vec<Array> {
    model.params().iter().map(|p| p.value.clone()).collect()
}

fn restore(model: &mut Forecaster, values: &[Array]) {
    for (p, v) in model.params_mut().into_iter().zip(values) {
        p.value = v.clone();
    }
}

/// Mini-batch training. Windows are reshuffled every epoch from one seeded
/// stream; the parameters with the lowest validation MSE are restored before
/// returning.
pub fn train(
    model: &mut Forecaster,
    train_set: &WindowedDataset,
    val_set: &WindowedDataset,
    config: &TrainConfig,
) -> Result<TrainHistory> {
    config.validate()?;
    check_dataset(model.spec(), train_set, "training")?;
    check_dataset(model.spec(), val_set, "validation")?;
    let started = Instant::now();
    let mut rng = Rng::seed_from_u64(config.shuffle_seed);
    let mut optimizer = Optimizer::from_config(config);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut epochs = Vec::new();
    let mut best: Option<(usize, f64, Vec<Array>)> = None;

    for epoch in 1..=config.epochs {
        let last_finite_epoch = epochs.last().map(|r: &EpochRecord| r.epoch);
        let diverged = |_| Error::Divergence { epoch, last_finite_epoch };
        rng.shuffle(&mut order);
        let mut sum = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let (x, y) = train_set.batch(chunk);
            model.zero_grad();
            let pred = model.forward(&x)?;
            let (loss, grad) = mse_loss(&pred, &y)?;
            if !loss.is_finite() {
                return Err(diverged(()));
            }
            model.backward(&grad)?;
            optimizer.step(&mut model.params_mut()).map_err(|e| match e {
                Error::Divergence { .. } => diverged(()),
                other => other,
            })?;
            sum += loss * chunk.len() as f64;
        }
        let train_mse = sum / train_set.len() as f64;
        let val_mse = dataset_mse(model, val_set, config.batch_size.max(64))?;
        if !train_mse.is_finite() || !val_mse.is_finite() {
            return Err(diverged(()));
        }
        epochs.push(EpochRecord { epoch, train_mse, val_mse });
        log::debug!("epoch {epoch}: train {train_mse:.6e} val {val_mse:.6e}");
        if best.as_ref().is_none_or(|(_, b, _)| val_mse < *b) {
            best = Some((epoch, val_mse, snapshot(model)));
        }
        let best_epoch = best.as_ref().map_or(epoch, |b| b.0);
        if config.patience.is_some_and(|p| epoch - best_epoch >= p) {
            break;
        }
    }
    let (best_epoch, best_val_mse, values) = best.expect("at least one epoch ran");
    restore(model, &values);
    Ok(TrainHistory {
        epochs,
        best_epoch,
        best_val_mse,
        wall_time_s: started.elapsed().as_secs_f64(),
    })
}

/// Writes the parameter manifest, value blob and `spec.json` into `dir`.
pub fn save_checkpoint(model: &Forecaster, dir: &Path) -> Result<()> {
    write_params(&model.params(), dir)?;
    write_json(&dir.join(SPEC_FILE), model.spec())
}

/// Rebuilds the model from `spec.json` and loads its parameters.
pub fn load_checkpoint(dir: &Path) -> Result<Forecaster> {
    let spec: ModelSpec = read_json(&dir.join(SPEC_FILE))
        .map_err(|e| Error::Checkpoint(format!("unreadable model spec: {e}")))?;
    let mut model = Forecaster::build(&spec)
        .map_err(|e| Error::Checkpoint(format!("invalid model spec in checkpoint: {e}")))?;
    load_params_into(&mut model, dir)?;
    Ok(model)
}

/// Loads the parameters stored in `dir` into an already built model; shapes
/// must match exactly.
pub fn load_params_into(model: &mut Forecaster, dir: &Path) -> Result<()> {
    let stored = read_params(dir)?;
    assign_params(&mut model.params_mut(), stored)
}
