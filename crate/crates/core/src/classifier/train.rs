//! Training loop, stratified splitting, and evaluation.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::net::{Batch, Network, NetworkCheckpoint};
use super::{CnnConfig, LabeledExample, TrainConfig};
use crate::error::{Error, Result};
use crate::rng::{fnv1a, rng_from};

/// A trained network ready for inference.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    net: Network,
}

impl TrainedModel {
    pub fn num_classes(&self) -> usize {
        self.net.cfg.num_classes
    }

    pub fn input_len(&self) -> usize {
        self.net.input_len
    }

    pub fn predict(&self, examples: &[&LabeledExample]) -> Vec<usize> {
        let mut out = Vec::with_capacity(examples.len());
        // Chunked to bound activation memory.
        for chunk in examples.chunks(64) {
            let batch = pack_batch(chunk);
            let logits = self.net.forward_eval(&batch);
            let c = self.num_classes();
            for ex in 0..chunk.len() {
                out.push(argmax(&logits[ex * c..(ex + 1) * c]));
            }
        }
        out
    }

    pub fn to_checkpoint(&self) -> NetworkCheckpoint {
        self.net.to_checkpoint()
    }

    pub fn from_checkpoint(ck: &NetworkCheckpoint) -> Result<Self> {
        Ok(Self { net: Network::from_checkpoint(ck)? })
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        let text = serde_json::to_string(&self.to_checkpoint())?;
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let ck: NetworkCheckpoint = serde_json::from_str(&text)?;
        Self::from_checkpoint(&ck)
    }

    #[cfg(test)]
    pub(crate) fn network_mut(&mut self) -> &mut Network {
        &mut self.net
    }
}

/// Per-epoch accuracy record. Train accuracy is measured on the training
/// batches as they are consumed; test accuracy on the held-out slice in
/// inference mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub train_accuracy: Vec<f64>,
    pub test_accuracy: Vec<f64>,
    pub train_loss: Vec<f64>,
}

/// Accuracy plus a true-class-by-predicted-class count matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub accuracy: f64,
    pub confusion: Vec<Vec<u64>>,
}

impl EvalResult {
    /// trace / total, recomputed from the matrix.
    pub fn accuracy_from_confusion(&self) -> f64 {
        let trace: u64 = (0..self.confusion.len()).map(|i| self.confusion[i][i]).sum();
        let total: u64 = self.confusion.iter().flatten().sum();
        trace as f64 / total as f64
    }
}

fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in scores.iter().enumerate() {
        if v > scores[best] {
            best = i;
        }
    }
    best
}

fn pack_batch(examples: &[&LabeledExample]) -> Batch {
    let w = examples[0].features.cols();
    let mut batch = Batch::zeros(examples.len(), 2, w);
    for (ex, e) in examples.iter().enumerate() {
        batch.row_mut(ex, 0).copy_from_slice(e.features.row(0));
        batch.row_mut(ex, 1).copy_from_slice(e.features.row(1));
    }
    batch
}

/// Deterministic stratified 90/10-style split by (device, domain) group.
///
/// Examples are first placed in a canonical order (labels, then a content
/// hash) so the split depends only on the dataset's contents and the seed,
/// not on input ordering. Every group keeps at least one test example.
pub fn stratified_split(
    dataset: &[LabeledExample],
    train_fraction: f64,
    seed: u64,
) -> (Vec<usize>, Vec<usize>) {
    let mut groups: BTreeMap<(usize, &str), Vec<usize>> = BTreeMap::new();
    for (i, e) in dataset.iter().enumerate() {
        groups.entry((e.device_label, e.domain_label.as_str())).or_default().push(i);
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    for ((device, domain), mut members) in groups {
        members.sort_by_key(|&i| {
            let bytes: Vec<u8> =
                dataset[i].features.as_slice().iter().flat_map(|v| v.to_le_bytes()).collect();
            fnv1a(&bytes)
        });
        let mut rng = rng_from(seed, &[0x73706c69, device as u64, fnv1a(domain.as_bytes())]);
        // Fisher-Yates on the canonical ordering.
        for i in (1..members.len()).rev() {
            let j = rand::Rng::gen_range(&mut rng, 0..=i);
            members.swap(i, j);
        }
        let n_train =
            ((members.len() as f64 * train_fraction).floor() as usize).min(members.len() - 1);
        train.extend_from_slice(&members[..n_train]);
        test.extend_from_slice(&members[n_train..]);
    }
    (train, test)
}

/// Mean softmax cross-entropy and its gradient w.r.t. the logits.
fn cross_entropy(logits: &[f64], labels: &[usize], c: usize, scale: f64) -> (f64, Vec<f64>) {
    let n = labels.len();
    let mut loss = 0.0;
    let mut grad = vec![0.0; logits.len()];
    for ex in 0..n {
        let row = &logits[ex * c..(ex + 1) * c];
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut denom = 0.0;
        for &v in row {
            denom += (v - max).exp();
        }
        let log_denom = denom.ln() + max;
        loss += log_denom - row[labels[ex]];
        for k in 0..c {
            let p = (row[k] - max).exp() / denom;
            grad[ex * c + k] =
                scale * (p - if k == labels[ex] { 1.0 } else { 0.0 }) / n as f64;
        }
    }
    (scale * loss / n as f64, grad)
}

pub(crate) fn softmax_ce_for_check(
    logits: &[f64],
    labels: &[usize],
    c: usize,
    scale: f64,
) -> (f64, Vec<f64>) {
    cross_entropy(logits, labels, c, scale)
}

/// Train a model with mini-batch Adam on a stratified split of `dataset`.
pub fn train(
    dataset: &[LabeledExample],
    cnn_cfg: &CnnConfig,
    train_cfg: &TrainConfig,
) -> Result<(TrainedModel, TrainHistory)> {
    if dataset.is_empty() {
        return Err(Error::validation("empty dataset"));
    }
    let (train_idx, test_idx) = stratified_split(dataset, train_cfg.train_fraction, train_cfg.seed);
    if train_idx.is_empty() || test_idx.is_empty() {
        return Err(Error::validation("split produced an empty train or test slice"));
    }
    let train_set: Vec<LabeledExample> = train_idx.iter().map(|&i| dataset[i].clone()).collect();
    let eval_set: Vec<LabeledExample> = test_idx.iter().map(|&i| dataset[i].clone()).collect();
    train_on(&train_set, &eval_set, cnn_cfg, train_cfg)
}

/// Train on an explicit training set, recording per-epoch accuracy on
/// `history_eval` (in inference mode). Callers that manage their own
/// splits use this directly.
pub fn train_on(
    train_set: &[LabeledExample],
    history_eval: &[LabeledExample],
    cnn_cfg: &CnnConfig,
    train_cfg: &TrainConfig,
) -> Result<(TrainedModel, TrainHistory)> {
    cnn_cfg.validate()?;
    train_cfg.validate()?;
    if train_set.is_empty() {
        return Err(Error::validation("empty training set"));
    }
    let c = cnn_cfg.num_classes;
    let mut present = vec![false; c];
    for e in train_set.iter().chain(history_eval.iter()) {
        if e.device_label >= c {
            return Err(Error::validation(format!(
                "label {} outside {c} classes",
                e.device_label
            )));
        }
        present[e.device_label] = true;
    }
    if present.iter().filter(|&&p| p).count() < 2 {
        return Err(Error::validation("dataset holds fewer than 2 classes"));
    }
    let input_len = train_set[0].features.cols();
    if train_set
        .iter()
        .chain(history_eval.iter())
        .any(|e| e.features.cols() != input_len)
    {
        return Err(Error::validation("inconsistent feature lengths"));
    }

    let mut net = Network::new(cnn_cfg, input_len)?;
    let mut dropout_rng = rng_from(train_cfg.seed, &[0x64726f70, cnn_cfg.seed]);
    let mut history = TrainHistory {
        train_accuracy: Vec::with_capacity(train_cfg.epochs),
        test_accuracy: Vec::with_capacity(train_cfg.epochs),
        train_loss: Vec::with_capacity(train_cfg.epochs),
    };
    let test_refs: Vec<&LabeledExample> = history_eval.iter().collect();
    let test_labels: Vec<usize> = test_refs.iter().map(|e| e.device_label).collect();

    let mut step = 0usize;
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    for epoch in 0..train_cfg.epochs {
        let mut rng = rng_from(train_cfg.seed, &[0x65706f63, epoch as u64]);
        for i in (1..order.len()).rev() {
            let j = rand::Rng::gen_range(&mut rng, 0..=i);
            order.swap(i, j);
        }
        let mut correct = 0usize;
        let mut seen = 0usize;
        let mut loss_sum = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(train_cfg.batch_size) {
            let refs: Vec<&LabeledExample> = chunk.iter().map(|&i| &train_set[i]).collect();
            let labels: Vec<usize> = refs.iter().map(|e| e.device_label).collect();
            let batch = pack_batch(&refs);
            net.zero_grads();
            let (logits, tape) = net.forward_train(&batch, Some(&mut dropout_rng), true);
            for (ex, &label) in labels.iter().enumerate() {
                if argmax(&logits[ex * c..(ex + 1) * c]) == label {
                    correct += 1;
                }
            }
            seen += labels.len();
            let (loss, dlogits) = cross_entropy(&logits, &labels, c, 1.0);
            loss_sum += loss;
            batches += 1;
            net.backward(&tape, &dlogits);
            step += 1;
            net.adam_step(train_cfg.learning_rate, step);
        }
        history.train_accuracy.push(correct as f64 / seen as f64);
        history.train_loss.push(loss_sum / batches as f64);

        if !test_refs.is_empty() {
            let model = TrainedModel { net };
            let preds = model.predict(&test_refs);
            let test_correct =
                preds.iter().zip(test_labels.iter()).filter(|(p, l)| p == l).count();
            history.test_accuracy.push(test_correct as f64 / test_labels.len() as f64);
            net = model.net;
        }
    }

    Ok((TrainedModel { net }, history))
}

/// Accuracy and confusion matrix of a model over a dataset.
pub fn evaluate(model: &TrainedModel, dataset: &[LabeledExample]) -> Result<EvalResult> {
    if dataset.is_empty() {
        return Err(Error::validation("cannot evaluate on an empty dataset"));
    }
    let c = model.num_classes();
    if dataset.iter().any(|e| e.device_label >= c) {
        return Err(Error::validation("dataset label outside the model's class count"));
    }
    let refs: Vec<&LabeledExample> = dataset.iter().collect();
    let preds = model.predict(&refs);
    let mut confusion = vec![vec![0u64; c]; c];
    let mut correct = 0u64;
    for (e, &p) in dataset.iter().zip(preds.iter()) {
        confusion[e.device_label][p] += 1;
        if e.device_label == p {
            correct += 1;
        }
    }
    Ok(EvalResult { accuracy: correct as f64 / dataset.len() as f64, confusion })
}
