use std::io::Write;
use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{GcnClassifier, ModelInput};
use crate::graph::DatasetSplit;
use crate::nn::{bce_loss, Adam, Matrix};
use crate::rng::{self, streams};
use crate::{Error, Result};

/// Graphs per forward pass when only evaluating.
const EVAL_CHUNK: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub train_accuracy: f64,
    pub val_accuracy: f64,
    /// Wall-clock time; excluded from the CSV export.
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters were restored (lowest validation loss).
    pub best_epoch: usize,
}

impl TrainReport {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let err = |e: csv::Error| Error::parse("<train report>", e);
        w.write_record(["epoch", "train_loss", "val_loss", "train_acc", "val_acc"])
            .map_err(err)?;
        for e in &self.epochs {
            w.write_record([
                e.epoch.to_string(),
                e.train_loss.to_string(),
                e.val_loss.to_string(),
                e.train_accuracy.to_string(),
                e.val_accuracy.to_string(),
            ])
            .map_err(err)?;
        }
        w.flush().map_err(|e| Error::io("<train report>", e))
    }
}

fn correct(probs: &Matrix, targets: &[f64]) -> usize {
    probs
        .as_slice()
        .iter()
        .zip(targets)
        .filter(|(&p, &y)| (p >= 0.5) == (y >= 0.5))
        .count()
}

/// Mean BCE and accuracy over `indices` in evaluation mode.
pub fn evaluate(
    model: &mut GcnClassifier,
    input: &ModelInput,
    indices: &[usize],
) -> Result<(f64, f64)> {
    if indices.is_empty() {
        return Err(Error::Empty("evaluation split"));
    }
    let (mut loss, mut hits) = (0.0, 0usize);
    for chunk in indices.chunks(EVAL_CHUNK) {
        let batch = input.batch(chunk);
        let probs = model.forward(&batch, false)?;
        loss += bce_loss(probs.as_slice(), &batch.targets)?.loss * chunk.len() as f64;
        hits += correct(&probs, &batch.targets);
    }
    let n = indices.len() as f64;
    Ok((loss / n, hits as f64 / n))
}

/// Minibatch Adam on BCE for `config.epochs` epochs.
///
/// Training order is reshuffled every epoch from the configured seed. After
/// the last epoch the parameters from the epoch with the lowest validation
/// loss are restored.
pub fn train_classifier(
    model: &mut GcnClassifier,
    input: &ModelInput,
    split: &DatasetSplit,
) -> Result<TrainReport> {
    if split.train.is_empty() {
        return Err(Error::Empty("training split"));
    }
    if split.val.is_empty() {
        return Err(Error::Empty("validation split"));
    }
    if let Some(&bad) = split
        .train
        .iter()
        .chain(&split.val)
        .find(|&&i| i >= input.len())
    {
        return Err(Error::ShapeMismatch(format!(
            "split index {bad} outside a dataset of {} graphs",
            input.len()
        )));
    }
    let cfg = model.config().clone();
    let optimizer = Adam::new(cfg.learning_rate);
    let mut shuffle = rng::substream(cfg.seed, streams::SHUFFLE);
    let mut order = split.train.clone();
    let mut epochs = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, usize, Vec<Matrix>)> = None;

    model.zero_grad();
    for epoch in 0..cfg.epochs {
        let started = Instant::now();
        order.shuffle(&mut shuffle);
        let (mut loss_sum, mut hits) = (0.0, 0usize);
        for chunk in order.chunks(cfg.batch_size) {
            let batch = input.batch(chunk);
            let probs = model.forward(&batch, true)?;
            let bce = bce_loss(probs.as_slice(), &batch.targets)?;
            model.backward(&batch, &bce.grad)?;
            optimizer.step(model.parameters_mut());
            loss_sum += bce.loss * chunk.len() as f64;
            hits += correct(&probs, &batch.targets);
        }
        let n = order.len() as f64;
        let (val_loss, val_accuracy) = evaluate(model, input, &split.val)?;
        if !val_loss.is_finite() {
            return Err(Error::NonFinite("validation loss"));
        }
        if best.as_ref().is_none_or(|(l, _, _)| val_loss < *l) {
            let snapshot = model
                .named_parameters()
                .iter()
                .map(|(_, p)| p.value.clone())
                .collect();
            best = Some((val_loss, epoch, snapshot));
        }
        epochs.push(EpochRecord {
            epoch,
            train_loss: loss_sum / n,
            val_loss,
            train_accuracy: hits as f64 / n,
            val_accuracy,
            seconds: started.elapsed().as_secs_f64(),
        });
    }

    let (_, best_epoch, snapshot) = best.expect("at least one epoch ran");
    for ((_, p), value) in model.named_parameters_mut().into_iter().zip(snapshot) {
        p.set_value(value)?;
    }
    Ok(TrainReport { epochs, best_epoch })
}

impl GcnClassifier {
    /// Class-1 probabilities for the listed graphs, evaluation mode.
    pub fn predict(&mut self, input: &ModelInput, indices: &[usize]) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(indices.len());
        for chunk in indices.chunks(EVAL_CHUNK) {
            out.extend_from_slice(self.forward(&input.batch(chunk), false)?.as_slice());
        }
        Ok(out)
    }

    /// Graph-level embeddings (mean-pooled last GCN layer) from the
    /// three-layer dense architecture.
    pub fn extract_embeddings(&mut self, input: &ModelInput, indices: &[usize]) -> Result<Matrix> {
        if self.architecture().id() != 4 {
            return Err(Error::InvalidParameter(format!(
                "embeddings are extracted from architecture 4, not {}",
                self.architecture().id()
            )));
        }
        let mut parts = Vec::new();
        for chunk in indices.chunks(EVAL_CHUNK) {
            parts.push(self.embed(&input.batch(chunk))?);
        }
        if parts.is_empty() {
            return Ok(Matrix::zeros(0, self.config().hidden_dim));
        }
        let out = Matrix::vstack(&parts)?;
        out.ensure_finite("embeddings")?;
        Ok(out)
    }
}
