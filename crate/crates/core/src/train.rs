//! The epoch loop: batching, gradient averaging, Adam updates, evaluation,
//! metrics and checkpoint-on-best.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::Instant;

use crate::data::{make_batches, DatasetSplit, Sample};
use crate::error::{Error, Result};
use crate::layers::{softmax_cross_entropy, Mode};
use crate::model::{encode_checkpoint, write_atomic, Preset, Sequential};
use crate::optim::{AdamConfig, AdamState};
use crate::tensor::{argmax, Tensor};

pub const METRICS_HEADER: &str = "epoch,train_loss,train_acc,val_loss,val_acc,elapsed_s";

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
    pub split_ratio: f64,
    pub preset: Preset,
    pub checkpoint_path: Option<PathBuf>,
    pub metrics_path: Option<PathBuf>,
    /// Record wall-clock seconds per epoch. Off by default so that
    /// identical runs produce identical metrics files.
    pub record_time: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 32,
            batch_size: 32,
            lr: 0.001,
            seed: 42,
            split_ratio: 0.8,
            preset: Preset::Paper,
            checkpoint_path: None,
            metrics_path: None,
            record_time: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::config("epochs must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch size must be at least 1"));
        }
        if !(self.split_ratio > 0.0 && self.split_ratio < 1.0) {
            return Err(Error::config(format!(
                "split ratio must be in (0, 1), got {}",
                self.split_ratio
            )));
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::config(format!("learning rate must be >= 0, got {}", self.lr)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_loss: f64,
    pub val_acc: f64,
    pub elapsed_s: f64,
}

impl EpochMetrics {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{:.6},{:.6},{:.6},{:.6},{:.6}",
            self.epoch, self.train_loss, self.train_acc, self.val_loss, self.val_acc, self.elapsed_s
        )
    }
}

pub fn metrics_csv(history: &[EpochMetrics]) -> String {
    let mut out = String::from(METRICS_HEADER);
    out.push('\n');
    for m in history {
        let _ = writeln!(out, "{}", m.csv_row());
    }
    out
}

/// The highest-validation-accuracy snapshot of a run.
#[derive(Debug, Clone)]
pub struct BestCheckpoint {
    pub epoch: usize,
    pub val_acc: f64,
    /// Encoded CNCK bytes.
    pub bytes: Vec<u8>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub history: Vec<EpochMetrics>,
    pub best: BestCheckpoint,
}

/// Fraction of positions where `predictions` equals `truths`.
pub fn accuracy(predictions: &[usize], truths: &[usize]) -> Result<f64> {
    if predictions.len() != truths.len() {
        return Err(Error::dim(format!(
            "{} predictions for {} labels",
            predictions.len(),
            truths.len()
        )));
    }
    if truths.is_empty() {
        return Err(Error::config("accuracy of an empty list"));
    }
    let hits = predictions.iter().zip(truths).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / truths.len() as f64)
}

/// Mean cross-entropy and accuracy under inference mode, reduced in sample order.
pub fn evaluate(model: &Sequential<f32>, samples: &[Sample]) -> Result<(f64, f64)> {
    if samples.is_empty() {
        return Err(Error::config("cannot evaluate an empty sample list"));
    }
    let mut total = 0.0f64;
    let mut predictions = Vec::with_capacity(samples.len());
    for s in samples {
        let logits = model.infer(&s.image)?;
        total += softmax_cross_entropy(&logits, s.label)?.loss as f64;
        predictions.push(argmax(&logits)?);
    }
    let truths: Vec<usize> = samples.iter().map(|s| s.label).collect();
    Ok((total / samples.len() as f64, accuracy(&predictions, &truths)?))
}

fn check_samples(model: &Sequential<f32>, samples: &[Sample], which: &str) -> Result<()> {
    if samples.is_empty() {
        return Err(Error::config(format!("the {which} split is empty")));
    }
    for s in samples {
        if s.image.shape() != model.input_shape() {
            return Err(Error::dim(format!(
                "{} has shape {:?}, model expects {:?}",
                s.path.display(),
                s.image.shape(),
                model.input_shape()
            )));
        }
        if s.label >= model.num_classes() {
            return Err(Error::Index(format!(
                "label {} of {} exceeds the model's {} classes",
                s.label,
                s.path.display(),
                model.num_classes()
            )));
        }
    }
    Ok(())
}

/// One Adam step on the batch-averaged gradient. Returns the mean loss.
fn train_batch(
    model: &mut Sequential<f32>,
    optimizer: &mut AdamState<f32>,
    samples: &[Sample],
    batch: &[usize],
    (epoch, index): (usize, usize),
) -> Result<f64> {
    let at = || format!("epoch {epoch}, batch {index}");
    let mut sum: Option<Vec<Tensor<f32>>> = None;
    let mut loss = 0.0f64;
    for &i in batch {
        let s = &samples[i];
        let logits = model.forward(&s.image, Mode::Train)?;
        let head = softmax_cross_entropy(&logits, s.label).map_err(|e| match e {
            Error::Numeric(m) => Error::Numeric(format!("{}: {m}", at())),
            other => other,
        })?;
        loss += head.loss as f64;
        let grads = model.backward(&head.dlogits)?;
        match sum.as_mut() {
            None => sum = Some(grads),
            Some(acc) => {
                for (a, g) in acc.iter_mut().zip(&grads) {
                    a.add_assign(g)?;
                }
            }
        }
    }
    let loss = loss / batch.len() as f64;
    if !loss.is_finite() {
        return Err(Error::Numeric(format!("non-finite loss {loss} at {}", at())));
    }
    let mut grads = sum.expect("batches are never empty");
    let inv = 1.0 / batch.len() as f32;
    grads.iter_mut().for_each(|g| g.scale(inv));
    optimizer.step(&mut model.params_mut(), &grads)?;
    Ok(loss)
}

/// Trains for `config.epochs` epochs with Adam at `config.lr`.
///
/// After every epoch both splits are evaluated in inference mode. The model
/// is snapshotted whenever validation accuracy strictly beats every earlier
/// epoch, and written to `config.checkpoint_path` if set. `on_epoch` is
/// told about each epoch and whether it produced a new best.
pub fn run_training(
    model: &mut Sequential<f32>,
    data: &DatasetSplit<Sample>,
    classes: &[String],
    config: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochMetrics, bool),
) -> Result<TrainOutcome> {
    config.validate()?;
    check_samples(model, &data.train, "training")?;
    check_samples(model, &data.val, "validation")?;
    let adam = AdamConfig {
        lr: config.lr,
        ..AdamConfig::default()
    };
    let mut optimizer = AdamState::new(adam, &model.params())?;
    model.reseed_dropout(config.seed);

    let mut history = Vec::with_capacity(config.epochs);
    let mut best: Option<BestCheckpoint> = None;
    for epoch in 1..=config.epochs {
        let started = Instant::now();
        let batches = make_batches(data.train.len(), config.batch_size, config.seed, epoch)?;
        for (index, batch) in batches.iter().enumerate() {
            train_batch(model, &mut optimizer, &data.train, batch, (epoch, index + 1))?;
        }
        let (train_loss, train_acc) = evaluate(model, &data.train)?;
        let (val_loss, val_acc) = evaluate(model, &data.val)?;
        let metrics = EpochMetrics {
            epoch,
            train_loss,
            train_acc,
            val_loss,
            val_acc,
            elapsed_s: if config.record_time {
                started.elapsed().as_secs_f64()
            } else {
                0.0
            },
        };

        let improved = best.as_ref().is_none_or(|b| val_acc > b.val_acc);
        if improved {
            let bytes = encode_checkpoint(model, classes)?;
            if let Some(path) = &config.checkpoint_path {
                write_atomic(path, &bytes)?;
            }
            best = Some(BestCheckpoint {
                epoch,
                val_acc,
                bytes,
            });
        }
        history.push(metrics);
        if let Some(path) = &config.metrics_path {
            write_atomic(path, metrics_csv(&history).as_bytes())?;
        }
        on_epoch(history.last().unwrap(), improved);
    }
    Ok(TrainOutcome {
        history,
        best: best.expect("at least one epoch ran"),
    })
}
