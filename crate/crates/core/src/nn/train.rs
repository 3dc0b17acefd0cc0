//! Minibatch training with validation-based model selection.
//!
//! Every epoch shuffles the training set, runs gradient steps per batch, and
//! evaluates the validation loss. The parameters with the lowest validation
//! loss seen so far are kept; training stops early after a configurable
//! number of consecutive non-improving validation epochs.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::error::NnError;
use super::models::{GraphGrads, GraphScratch, TrainGraph, TrainSet};
use super::network::{GradientSet, MlpNetwork};

/// Gradient step rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    /// Plain gradient descent.
    Sgd,
    /// Adaptive-moment estimation.
    Adam,
}

/// Hyperparameters for [`fit`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    /// Maximum epochs; 0 leaves the model untouched.
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: Optimizer,
    /// Seed for per-epoch shuffling.
    pub seed: u64,
    /// Consecutive non-improving validation epochs before stopping;
    /// 0 disables early stopping.
    pub early_stop_patience: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            epochs: 500,
            batch_size: 128,
            optimizer: Optimizer::Adam,
            seed: 0,
            early_stop_patience: 25,
        }
    }
}

/// Losses recorded after one epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

/// Outcome of a training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// One entry per completed epoch.
    pub history: Vec<EpochStats>,
    /// Epoch whose parameters were kept; 0 means the initial parameters
    /// (only when `epochs` was 0).
    pub best_epoch: usize,
    pub best_val_loss: f64,
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

struct OptState {
    kind: Optimizer,
    step: u64,
    m: Vec<GradientSet>,
    v: Vec<GradientSet>,
}

impl OptState {
    fn new(kind: Optimizer, zeros: &GraphGrads) -> Self {
        let (m, v) = match kind {
            Optimizer::Sgd => (Vec::new(), Vec::new()),
            Optimizer::Adam => (zeros.sets.clone(), zeros.sets.clone()),
        };
        Self {
            kind,
            step: 0,
            m,
            v,
        }
    }

    fn apply(&mut self, graph: &mut TrainGraph, grads: &GraphGrads, lr: f64) {
        self.step += 1;
        let nets = graph.trainable_nets_mut();
        match self.kind {
            Optimizer::Sgd => {
                for (net, gs) in nets.into_iter().zip(&grads.sets) {
                    for (l, layer) in net.layers_mut().iter_mut().enumerate() {
                        sgd_update(layer.weights_mut(), &gs.weights[l], lr);
                        sgd_update(layer.biases_mut(), &gs.biases[l], lr);
                    }
                }
            }
            Optimizer::Adam => {
                let bc1 = 1.0 - ADAM_BETA1.powi(self.step.min(i32::MAX as u64) as i32);
                let bc2 = 1.0 - ADAM_BETA2.powi(self.step.min(i32::MAX as u64) as i32);
                for (ni, net) in nets.into_iter().enumerate() {
                    let gs = &grads.sets[ni];
                    let ms = &mut self.m[ni];
                    let vs = &mut self.v[ni];
                    for (l, layer) in net.layers_mut().iter_mut().enumerate() {
                        adam_update(
                            layer.weights_mut(),
                            &gs.weights[l],
                            &mut ms.weights[l],
                            &mut vs.weights[l],
                            lr,
                            bc1,
                            bc2,
                        );
                        adam_update(
                            layer.biases_mut(),
                            &gs.biases[l],
                            &mut ms.biases[l],
                            &mut vs.biases[l],
                            lr,
                            bc1,
                            bc2,
                        );
                    }
                }
            }
        }
    }
}

fn sgd_update(params: &mut [f64], grads: &[f64], lr: f64) {
    for (p, &g) in params.iter_mut().zip(grads) {
        *p -= lr * g;
    }
}

#[allow(clippy::too_many_arguments)]
fn adam_update(
    params: &mut [f64],
    grads: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    lr: f64,
    bc1: f64,
    bc2: f64,
) {
    for i in 0..params.len() {
        let g = grads[i];
        m[i] = ADAM_BETA1 * m[i] + (1.0 - ADAM_BETA1) * g;
        v[i] = ADAM_BETA2 * v[i] + (1.0 - ADAM_BETA2) * g * g;
        let m_hat = m[i] / bc1;
        let v_hat = v[i] / bc2;
        params[i] -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
    }
}

fn validate(graph: &TrainGraph, train: &TrainSet, val: &TrainSet, cfg: &TrainConfig) -> Result<(), NnError> {
    if !(cfg.learning_rate > 0.0 && cfg.learning_rate.is_finite()) {
        return Err(NnError::InvalidTrainConfig(format!(
            "learning_rate must be positive and finite, got {}",
            cfg.learning_rate
        )));
    }
    if cfg.batch_size == 0 {
        return Err(NnError::InvalidTrainConfig("batch_size must be >= 1".into()));
    }
    if train.is_empty() || val.is_empty() {
        return Err(NnError::EmptyInput);
    }
    if cfg.batch_size > train.len() {
        return Err(NnError::InvalidTrainConfig(format!(
            "batch_size {} exceeds training-set size {}",
            cfg.batch_size,
            train.len()
        )));
    }
    for (set, which) in [(train, "training"), (val, "validation")] {
        if set.input_dim() != graph.input_dim() {
            return Err(NnError::InvalidTrainConfig(format!(
                "{which} set input width {} does not match model input width {}",
                set.input_dim(),
                graph.input_dim()
            )));
        }
        if set.target_dim() != graph.output_dim() {
            return Err(NnError::InvalidTrainConfig(format!(
                "{which} set target width {} does not match model output width {}",
                set.target_dim(),
                graph.output_dim()
            )));
        }
    }
    Ok(())
}

/// Trains `graph` in place and returns the loss history.
///
/// On return the graph holds the parameters with the lowest recorded
/// validation loss. A non-finite loss aborts with a divergence error naming
/// the last epoch that completed with finite losses.
pub fn fit(
    graph: &mut TrainGraph,
    train: &TrainSet,
    val: &TrainSet,
    cfg: &TrainConfig,
) -> Result<TrainReport, NnError> {
    validate(graph, train, val, cfg)?;
    let mut scratch = GraphScratch::new();
    if cfg.epochs == 0 {
        let v = graph.loss_on(val, &mut scratch);
        return Ok(TrainReport {
            history: Vec::new(),
            best_epoch: 0,
            best_val_loss: v,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut idx: Vec<usize> = (0..train.len()).collect();
    let mut grads = GraphGrads::zeros_like(graph);
    let mut opt = OptState::new(cfg.optimizer, &grads);
    let mut ibuf = Vec::new();
    let mut tbuf = Vec::new();
    let mut dbuf = Vec::new();
    let out_dim = graph.output_dim();
    let mut best: Option<(usize, f64, TrainGraph)> = None;
    let mut stale = 0usize;
    let mut history = Vec::new();
    let mut last_finite = 0usize;
    for epoch in 1..=cfg.epochs {
        idx.shuffle(&mut rng);
        let mut sq_sum = 0.0;
        for chunk in idx.chunks(cfg.batch_size) {
            let bn = chunk.len();
            train.gather(chunk, &mut ibuf, &mut tbuf);
            graph.forward_batch(&ibuf, bn, &mut scratch);
            dbuf.resize(out_dim * bn, 0.0);
            let scale = 2.0 / (out_dim * bn) as f64;
            let mut batch_sq = 0.0;
            {
                let out = graph.output(&scratch);
                for (j, (&o, &t)) in out.iter().zip(tbuf.iter()).enumerate() {
                    let d = o - t;
                    batch_sq += d * d;
                    dbuf[j] = scale * d;
                }
            }
            if !batch_sq.is_finite() {
                return Err(NnError::Diverged {
                    last_finite_epoch: last_finite,
                });
            }
            sq_sum += batch_sq;
            grads.reset();
            graph.backward_batch(&ibuf, bn, &mut scratch, &dbuf, &mut grads);
            opt.apply(graph, &grads, cfg.learning_rate);
        }
        let train_loss = sq_sum / (train.len() * out_dim) as f64;
        let val_loss = graph.loss_on(val, &mut scratch);
        if !val_loss.is_finite() {
            return Err(NnError::Diverged {
                last_finite_epoch: last_finite,
            });
        }
        last_finite = epoch;
        history.push(EpochStats {
            epoch,
            train_loss,
            val_loss,
        });
        let improved = best.as_ref().map_or(true, |(_, b, _)| val_loss < *b);
        if improved {
            best = Some((epoch, val_loss, graph.clone()));
            stale = 0;
        } else {
            stale += 1;
            if cfg.early_stop_patience > 0 && stale >= cfg.early_stop_patience {
                break;
            }
        }
    }
    let (best_epoch, best_val_loss, best_graph) =
        best.expect("at least one epoch ran");
    *graph = best_graph;
    Ok(TrainReport {
        history,
        best_epoch,
        best_val_loss,
    })
}

/// Trains a single network; see [`fit`] for semantics.
pub fn train(
    net: MlpNetwork,
    train_set: &TrainSet,
    val_set: &TrainSet,
    cfg: &TrainConfig,
) -> Result<(MlpNetwork, TrainReport), NnError> {
    let mut graph = TrainGraph::chain(net);
    let report = fit(&mut graph, train_set, val_set, cfg)?;
    let (mut branches, _) = graph.into_parts();
    Ok((branches.swap_remove(0).net, report))
}
