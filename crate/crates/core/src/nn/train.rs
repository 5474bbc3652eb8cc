//! Mini-batch training with a chronological validation tail and early
//! stopping.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamState};
use super::network::{mse_with_grad, Mode, Network};
use super::spec::{InputShape, ModelSpec};
use crate::error::{contract, validation, Error, Result};
use crate::features::WindowedSet;
use crate::seed::derive_seed;

/// Samples per inference batch when scoring whole sets.
const EVAL_BATCH: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub validation_split: f64,
    pub patience: usize,
    pub seed: u64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-4,
            batch_size: 16,
            max_epochs: 250,
            validation_split: 0.1,
            patience: 5,
            seed: 42,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(validation("learning rate must be positive"));
        }
        if !(self.validation_split > 0.0 && self.validation_split < 1.0) {
            return Err(validation("validation split must lie in (0, 1)"));
        }
        if self.patience == 0 || self.batch_size == 0 || self.max_epochs == 0 {
            return Err(validation("patience, batch size and max epochs must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) || self.adam_epsilon <= 0.0 {
            return Err(validation("Adam betas must lie in [0, 1) and epsilon be positive"));
        }
        Ok(())
    }
}

/// Per-epoch losses (MSE in scaled units). Epochs are numbered from 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    pub best_epoch: usize,
    pub stopped_epoch: usize,
}

impl TrainHistory {
    pub fn best_val_loss(&self) -> f64 {
        self.val_loss[self.best_epoch - 1]
    }

    /// `epoch,train_loss,val_loss`
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["epoch", "train_loss", "val_loss"])?;
        for (i, (t, v)) in self.train_loss.iter().zip(&self.val_loss).enumerate() {
            wtr.write_record([(i + 1).to_string(), t.to_string(), v.to_string()])?;
        }
        wtr.flush().map_err(|e| Error::io("<history writer>", e))?;
        Ok(())
    }
}

/// Tracks the best validation loss and decides when to stop.
///
/// Improvement means strictly lower loss; ties keep the earlier epoch. A
/// snapshot of whatever should be restored is kept for the best epoch.
#[derive(Debug, Clone)]
pub struct EarlyStopping<S> {
    patience: usize,
    best: Option<(usize, f64, S)>,
    epochs_without_improvement: usize,
}

impl<S> EarlyStopping<S> {
    pub fn new(patience: usize) -> Self {
        EarlyStopping { patience, best: None, epochs_without_improvement: 0 }
    }

    /// Records `loss` for `epoch`; `snapshot` is only called on improvement.
    /// Returns true once `patience` epochs have passed without improvement.
    pub fn observe(&mut self, epoch: usize, loss: f64, snapshot: impl FnOnce() -> S) -> bool {
        let improved = match &self.best {
            None => !loss.is_nan(),
            Some((_, best, _)) => loss < *best,
        };
        if improved {
            self.best = Some((epoch, loss, snapshot()));
            self.epochs_without_improvement = 0;
        } else {
            self.epochs_without_improvement += 1;
        }
        self.epochs_without_improvement >= self.patience
    }

    pub fn best_epoch(&self) -> Option<usize> {
        self.best.as_ref().map(|b| b.0)
    }

    pub fn into_best(self) -> Option<(usize, f64, S)> {
        self.best
    }
}

/// Splits off the chronologically last `ceil(split * m)` windows for
/// validation.
pub fn validation_tail(windows: &WindowedSet, split: f64) -> Result<(WindowedSet, WindowedSet)> {
    let m = windows.len();
    let n_val = (split * m as f64).ceil() as usize;
    if n_val == 0 || n_val >= m {
        return Err(validation(format!("validation split {split} of {m} windows leaves an empty side")));
    }
    Ok((windows.slice(0, m - n_val), windows.slice(m - n_val, m)))
}

/// Fits a freshly initialised network. Initial weights, batch order and
/// dropout masks are drawn from generators derived from `config.seed`.
pub fn train(spec: &ModelSpec, windows: &WindowedSet, config: &TrainConfig) -> Result<(Network, TrainHistory)> {
    config.validate()?;
    if windows.is_empty() {
        return Err(validation("no training windows"));
    }
    let input = InputShape { window: windows.window, width: windows.width() };
    let network = Network::init(spec.clone(), input, derive_seed(config.seed, "init"))?;
    train_network(network, windows, config)
}

/// Continues training `network` in place of a fresh initialisation.
pub fn train_network(mut network: Network, windows: &WindowedSet, config: &TrainConfig) -> Result<(Network, TrainHistory)> {
    config.validate()?;
    let (fit_set, val_set) = validation_tail(windows, config.validation_split)?;
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, "shuffle"));
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, "dropout"));
    let mut adam = AdamState::new(network.params());
    let mut stopper = EarlyStopping::new(config.patience);
    let mut train_loss = Vec::new();
    let mut val_loss = Vec::new();
    let mut order: Vec<usize> = (0..fit_set.len()).collect();

    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut shuffle_rng);
        let mut loss_sum = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let batch = fit_set.select(chunk);
            let (preds, cache) = network.forward(&batch.samples, Mode::Train, &mut dropout_rng)?;
            let (loss, dpred) = mse_with_grad(&preds, &batch.targets);
            let grads = network.backward(&cache, &dpred)?;
            drop(cache);
            adam_step(network.params_mut(), &grads, &mut adam, config)
                .map_err(|e| Error::Training(format!("epoch {epoch}: {e}")))?;
            loss_sum += loss * chunk.len() as f64;
        }
        let epoch_train = loss_sum / fit_set.len() as f64;
        let epoch_val = evaluate_mse(&network, &val_set)?;
        if !epoch_train.is_finite() {
            return Err(Error::Training(format!("epoch {epoch}: training loss diverged")));
        }
        train_loss.push(epoch_train);
        val_loss.push(epoch_val);
        if stopper.observe(epoch, epoch_val, || network.params().clone()) {
            break;
        }
    }

    let stopped_epoch = val_loss.len();
    let (best_epoch, _, best_params) = stopper
        .into_best()
        .ok_or_else(|| Error::Training("validation loss was never finite".into()))?;
    *network.params_mut() = best_params;
    Ok((network, TrainHistory { train_loss, val_loss, best_epoch, stopped_epoch }))
}

/// Inference-mode predictions for every window, in order.
pub fn predict(network: &Network, windows: &WindowedSet) -> Result<Vec<f64>> {
    let input = network.input_shape();
    if windows.window != input.window || windows.width() != input.width {
        return Err(contract(format!(
            "windows are {}x{}, network expects {}x{}",
            windows.window,
            windows.width(),
            input.window,
            input.width
        )));
    }
    let mut out = Vec::with_capacity(windows.len());
    let mut start = 0;
    while start < windows.len() {
        let end = (start + EVAL_BATCH).min(windows.len());
        out.extend(network.predict_batch(&windows.slice(start, end).samples)?);
        start = end;
    }
    Ok(out)
}

/// Inference-mode MSE over a window set.
pub fn evaluate_mse(network: &Network, windows: &WindowedSet) -> Result<f64> {
    let preds = predict(network, windows)?;
    Ok(super::network::mse(&preds, &windows.targets))
}
