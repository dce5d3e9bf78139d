//! Minibatch training with softmax cross-entropy. Binary layers keep real
//! shadow weights, binarized in the forward pass and updated through a
//! straight-through estimator.

mod gradcheck;
mod model;

use std::io::Write;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::Dataset;
use crate::error::{Error, Result};
use crate::nn::{LayerShape, Network, NetworkDims};
use crate::numerics::Scalar;

pub use gradcheck::{gradient_check, GradCheckReport, REL_ERROR_FLOOR};
pub use model::{param_blocks, ParamBlocks, TrainScalar};

pub(crate) use model::param_blocks_mut;
use model::{backward, forward};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub optimizer: Optimizer,
    pub rng_seed: u64,
    pub validation_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 20,
            batch_size: 32,
            learning_rate: 3e-3,
            optimizer: Optimizer::Adam,
            rng_seed: 1,
            validation_fraction: 0.2,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::config("epochs and batch_size must be >= 1"));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(Error::config(format!("invalid learning_rate {}", self.learning_rate)));
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return Err(Error::config("validation_fraction must lie in (0, 1)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_acc: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<F> {
    /// Parameters at the epoch with the lowest validation loss.
    pub network: Network<F>,
    pub best_epoch: usize,
    pub log: Vec<EpochLog>,
}

/// Random initial parameters: uniform with a He-style bound for real conv
/// layers, uniform on `[-1, 1]` for binary shadow weights, zero biases.
pub fn init_network<F: TrainScalar>(dims: &NetworkDims, rng_seed: u64) -> Result<Network<F>> {
    let mut net = Network::<F>::zeros(dims)?;
    let shapes = net.layer_shapes();
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let fc_bound = (3.0 / net.fc().in_features() as f64).sqrt();
    let mut blocks = param_blocks_mut(&mut net);
    for (li, s) in shapes.iter().enumerate() {
        let bound = if s.binary { 1.0 } else { (6.0 / s.taps() as f64).sqrt() };
        for w in blocks[2 * li].iter_mut() {
            *w = F::from_f32(rng.random_range(-bound..bound) as f32);
        }
    }
    let fc_w = blocks.len() - 2;
    for w in blocks[fc_w].iter_mut() {
        *w = F::from_f32(rng.random_range(-fc_bound..fc_bound) as f32);
    }
    Ok(net)
}

/// Copy with every binary-layer weight replaced by its sign (`+1` or `-1`).
/// Decisions are unchanged, since binary layers only read the sign.
pub fn binarize<F: TrainScalar>(net: &Network<F>) -> Network<F> {
    let mut out = net.clone();
    let binary: Vec<bool> = out.conv_layers().iter().map(|l| l.binary).collect();
    let mut blocks = param_blocks_mut(&mut out);
    for (li, is_binary) in binary.into_iter().enumerate() {
        if is_binary {
            for w in blocks[2 * li].iter_mut() {
                *w = if w.is_sign_negative() { -F::one() } else { F::one() };
            }
        }
    }
    out
}

fn check_data<F: TrainScalar>(net: &Network<F>, data: &Dataset) -> Result<()> {
    if data.is_empty() {
        return Err(Error::domain("empty dataset"));
    }
    if net.input_channels() != 1 || data.window_len() != net.input_length() {
        return Err(Error::domain(format!(
            "dataset windows have length {}, network expects 1x{}",
            data.window_len(),
            net.input_length()
        )));
    }
    if let Some(&bad) = data.labels().iter().find(|&&l| l as usize >= net.fc().out_classes()) {
        return Err(Error::domain(format!("label {bad} out of range")));
    }
    Ok(())
}

fn window<F: TrainScalar>(data: &Dataset, i: usize) -> Vec<F> {
    data.window(i).iter().map(|&v| F::from_f32(v)).collect()
}

/// Mean loss and accuracy over `idx`. Per-sample values are computed in
/// parallel and summed in index order.
fn evaluate<F: TrainScalar>(net: &Network<F>, shapes: &[LayerShape], data: &Dataset, idx: &[usize]) -> (f64, f64) {
    let per: Vec<(f64, bool)> = idx
        .par_iter()
        .map(|&i| {
            let cache = forward(net, shapes, &window::<F>(data, i));
            let label = data.label(i) as usize;
            let (loss, _) = model::cross_entropy(&cache.scores, label);
            (Scalar::to_f64(loss), crate::nn::argmax(&cache.scores) == label)
        })
        .collect();
    let n = idx.len().max(1) as f64;
    let loss = per.iter().map(|p| p.0).sum::<f64>() / n;
    let acc = per.iter().filter(|p| p.1).count() as f64 / n;
    (loss, acc)
}

/// Fraction of frames of `data` classified correctly by `net`.
pub fn accuracy<F: TrainScalar>(net: &Network<F>, data: &Dataset) -> Result<f64> {
    check_data(net, data)?;
    let idx: Vec<usize> = (0..data.len()).collect();
    Ok(evaluate(net, &net.layer_shapes(), data, &idx).1)
}

/// Samples per gradient chunk. Chunks run in parallel; their sums are combined
/// in a fixed order, so results do not depend on the thread count.
const CHUNK: usize = 8;

struct AdamState<F> {
    m: ParamBlocks<F>,
    v: ParamBlocks<F>,
    t: i32,
}

pub fn train<F: TrainScalar>(init: &Network<F>, data: &Dataset, cfg: &TrainConfig) -> Result<TrainOutcome<F>> {
    cfg.validate()?;
    check_data(init, data)?;
    let n = data.len();
    let n_val = ((n as f64 * cfg.validation_fraction).round() as usize).max(1);
    if n_val >= n {
        return Err(Error::domain(format!("{n} frames leave nothing to train on")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let (val_idx, train_idx) = order.split_at(n_val);
    let mut train_idx = train_idx.to_vec();

    let shapes = init.layer_shapes();
    let binary: Vec<bool> = shapes.iter().map(|s| s.binary).collect();
    let mut net = init.clone();
    let lr = F::from_f32(cfg.learning_rate as f32);
    let mut adam = AdamState {
        m: ParamBlocks::zeros_like(&net),
        v: ParamBlocks::zeros_like(&net),
        t: 0,
    };

    let (val_loss0, _) = evaluate(&net, &shapes, data, val_idx);
    let mut best = (net.clone(), 0usize, val_loss0);
    let mut log = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        train_idx.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in train_idx.chunks(cfg.batch_size) {
            let parts: Vec<(ParamBlocks<F>, f64)> = batch
                .par_chunks(CHUNK)
                .map(|chunk| {
                    let mut g = ParamBlocks::zeros_like(&net);
                    let mut loss = 0.0;
                    for &i in chunk {
                        let cache = forward(&net, &shapes, &window::<F>(data, i));
                        let l = backward(&net, &shapes, &cache, data.label(i) as usize, &mut g);
                        loss += Scalar::to_f64(l);
                    }
                    (g, loss)
                })
                .collect();
            let mut grad = ParamBlocks::zeros_like(&net);
            for (g, loss) in &parts {
                grad.add_assign(g);
                epoch_loss += loss;
            }
            grad.scale(F::one() / F::from_f32(batch.len() as f32));
            step(&mut net, &grad, cfg.optimizer, lr, &mut adam);
            clip_shadow(&mut net, &binary);
        }
        let (val_loss, val_acc) = evaluate(&net, &shapes, data, val_idx);
        log.push(EpochLog {
            epoch,
            train_loss: epoch_loss / train_idx.len() as f64,
            val_loss,
            val_acc,
        });
        log::debug!("epoch {epoch}: val_loss {val_loss:.5} val_acc {val_acc:.4}");
        if val_loss < best.2 {
            best = (net.clone(), epoch, val_loss);
        }
    }
    Ok(TrainOutcome {
        network: best.0,
        best_epoch: best.1,
        log,
    })
}

fn step<F: TrainScalar>(net: &mut Network<F>, grad: &ParamBlocks<F>, opt: Optimizer, lr: F, adam: &mut AdamState<F>) {
    let mut blocks = param_blocks_mut(net);
    match opt {
        Optimizer::Sgd => {
            for (p, g) in blocks.iter_mut().zip(&grad.0) {
                for (w, &d) in p.iter_mut().zip(g) {
                    *w = *w - lr * d;
                }
            }
        }
        Optimizer::Adam => {
            let (b1, b2) = (F::from_f32(0.9), F::from_f32(0.999));
            let eps = F::from_f32(1e-8);
            adam.t += 1;
            let c1 = F::one() - b1.powi(adam.t);
            let c2 = F::one() - b2.powi(adam.t);
            for (bi, p) in blocks.iter_mut().enumerate() {
                let (m, v, g) = (&mut adam.m.0[bi], &mut adam.v.0[bi], &grad.0[bi]);
                for k in 0..p.len() {
                    m[k] = b1 * m[k] + (F::one() - b1) * g[k];
                    v[k] = b2 * v[k] + (F::one() - b2) * g[k] * g[k];
                    let mh = m[k] / c1;
                    let vh = v[k] / c2;
                    p[k] = p[k] - lr * mh / (vh.sqrt() + eps);
                }
            }
        }
    }
}

fn clip_shadow<F: TrainScalar>(net: &mut Network<F>, binary: &[bool]) {
    let mut blocks = param_blocks_mut(net);
    for (li, &b) in binary.iter().enumerate() {
        if b {
            for w in blocks[2 * li].iter_mut() {
                *w = w.max(-F::one()).min(F::one());
            }
        }
    }
}

pub const LOG_COLUMNS: [&str; 4] = ["epoch", "train_loss", "val_loss", "val_acc"];

pub fn write_log_csv<W: Write>(out: W, log: &[EpochLog]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    let err = |e: csv::Error| Error::format(e.to_string());
    w.write_record(LOG_COLUMNS).map_err(err)?;
    for e in log {
        w.serialize(e).map_err(err)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests;
