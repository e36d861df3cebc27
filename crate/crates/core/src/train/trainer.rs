use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::patches::PatchPair;
use crate::error::{ensure, Error, Result};
use crate::rng::stream;
use crate::tensor::{AdamState, Graph, Tensor};
use crate::unet::{WaveUnet, BN_MOMENTUM};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Save a numbered checkpoint every this many epochs; 0 disables.
    pub checkpoint_every: usize,
    /// Compute validation loss every this many epochs.
    pub eval_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 150,
            batch_size: 12,
            learning_rate: 1e-4,
            seed: 0,
            checkpoint_every: 0,
            eval_every: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        ensure!(self.epochs >= 1, Config, "epochs must be at least 1");
        ensure!(self.batch_size >= 1, Config, "batch_size must be at least 1");
        ensure!(
            self.learning_rate >= 0.0 && self.learning_rate.is_finite(),
            Config,
            "learning_rate must be a non-negative number"
        );
        ensure!(self.eval_every >= 1, Config, "eval_every must be at least 1");
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
}

/// Passed to the observer after every epoch.
pub struct EpochEvent<'a> {
    pub record: &'a EpochRecord,
    pub model: &'a WaveUnet<f32>,
    pub adam: &'a AdamState<f32>,
    /// The validation loss is the lowest seen so far.
    pub is_best: bool,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub history: Vec<EpochRecord>,
    pub best_epoch: Option<usize>,
    pub best_val_loss: Option<f64>,
    pub best_model: Option<WaveUnet<f32>>,
}

fn stack(batch: &[&PatchPair]) -> Result<(Tensor<f32>, Tensor<f32>)> {
    let x: Vec<_> = batch.iter().map(|p| p.input.clone()).collect();
    let y: Vec<_> = batch.iter().map(|p| p.target.clone()).collect();
    Ok((Tensor::stack_batch(&x)?, Tensor::stack_batch(&y)?))
}

/// One forward/backward/update round on a batch. Returns the batch loss.
pub fn train_step(model: &mut WaveUnet<f32>, adam: &mut AdamState<f32>, batch: &[&PatchPair]) -> Result<f64> {
    let (x, y) = stack(batch)?;
    let mut g = Graph::new();
    let vars = model.store().bind(&mut g, true);
    let xv = g.leaf(x, false);
    let yv = g.leaf(y, false);
    let (out, stats) = model.forward(&mut g, &vars, xv, true)?;
    let loss = g.mse_loss(out, yv)?;
    let value = f64::from(g.value(loss).data()[0]);
    if !value.is_finite() {
        return Err(Error::Numeric(format!("non-finite training loss {value}")));
    }
    g.backward(loss)?;
    let grads: BTreeMap<String, Vec<f32>> = vars
        .iter()
        .map(|(name, v)| (name.clone(), g.grad(*v).map(<[f32]>::to_vec).unwrap_or_default()))
        .filter(|(_, gr)| !gr.is_empty())
        .collect();
    adam.step(&mut model.store_mut().params, &grads)?;
    model.store_mut().apply_batch_stats(&stats, BN_MOMENTUM);
    Ok(value)
}

/// Mean squared error of eval-mode predictions over `set`.
pub fn evaluate_loss(model: &WaveUnet<f32>, set: &[PatchPair], batch_size: usize) -> Result<f64> {
    ensure!(!set.is_empty(), Usage, "evaluation set is empty");
    let mut total = 0.0;
    let mut count = 0usize;
    for chunk in set.chunks(batch_size.max(1)) {
        let refs: Vec<&PatchPair> = chunk.iter().collect();
        let (x, y) = stack(&refs)?;
        let out = model.predict(&x)?;
        total += out
            .data()
            .iter()
            .zip(y.data())
            .map(|(a, b)| f64::from(a - b).powi(2))
            .sum::<f64>();
        count += y.numel();
    }
    let loss = total / count as f64;
    if !loss.is_finite() {
        return Err(Error::Numeric(format!("non-finite validation loss {loss}")));
    }
    Ok(loss)
}

/// Shuffled mini-batch training. Each epoch visits every training patch
/// once in an order fixed by `cfg.seed` and the epoch number. The model
/// with the lowest validation loss is kept alongside the final one.
pub fn train(
    model: &mut WaveUnet<f32>,
    adam: &mut AdamState<f32>,
    train_set: &[PatchPair],
    val_set: &[PatchPair],
    cfg: &TrainConfig,
    mut observer: impl FnMut(&EpochEvent<'_>) -> Result<()>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    ensure!(!train_set.is_empty(), Usage, "training set is empty");
    adam.config.learning_rate = cfg.learning_rate;
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(usize, f64, WaveUnet<f32>)> = None;
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    for epoch in 1..=cfg.epochs {
        order.sort_unstable();
        order.shuffle(&mut stream(cfg.seed, &[0x7a1e, epoch as u64]));
        let mut sum = 0.0;
        for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let batch: Vec<&PatchPair> = chunk.iter().map(|&i| &train_set[i]).collect();
            let loss = train_step(model, adam, &batch).map_err(|e| match e {
                Error::Numeric(m) => {
                    let ids: Vec<String> = batch
                        .iter()
                        .map(|p| format!("vol{}/frame{}/patch{}", p.volume, p.frame, p.patch))
                        .collect();
                    Error::Numeric(format!("epoch {epoch}, batch {b} [{}]: {m}", ids.join(", ")))
                }
                other => other,
            })?;
            sum += loss * chunk.len() as f64;
        }
        let val_loss = if !val_set.is_empty() && epoch % cfg.eval_every == 0 {
            Some(evaluate_loss(model, val_set, cfg.batch_size)?)
        } else {
            None
        };
        let is_best = match (val_loss, &best) {
            (Some(v), Some((_, b, _))) => v < *b,
            (Some(_), None) => true,
            _ => false,
        };
        if is_best {
            best = Some((epoch, val_loss.unwrap(), model.clone()));
        }
        let record = EpochRecord {
            epoch,
            train_loss: sum / train_set.len() as f64,
            val_loss,
        };
        observer(&EpochEvent {
            record: &record,
            model,
            adam,
            is_best,
        })?;
        history.push(record);
    }
    let (best_epoch, best_val_loss, best_model) = match best {
        Some((e, v, m)) => (Some(e), Some(v), Some(m)),
        None => (None, None, None),
    };
    Ok(TrainOutcome {
        history,
        best_epoch,
        best_val_loss,
        best_model,
    })
}

/// `epoch,train_loss,val_loss` with an empty field when validation was
/// skipped.
pub fn history_csv(history: &[EpochRecord]) -> String {
    let mut out = String::from("epoch,train_loss,val_loss\n");
    for r in history {
        let val = r.val_loss.map(|v| v.to_string()).unwrap_or_default();
        out.push_str(&format!("{},{},{}\n", r.epoch, r.train_loss, val));
    }
    out
}
