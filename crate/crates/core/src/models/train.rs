use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{predict_rows, Architecture, Dropout, ModelParams, ModelSpec};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::tensor::{DenseMatrix, Tape, Var};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub weight_decay: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub dropout: f64,
    pub hidden: usize,
    pub gin_hidden: usize,
    pub layers: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 0.01,
            weight_decay: 5e-4,
            max_epochs: 200,
            patience: 20,
            dropout: 0.5,
            hidden: 16,
            gin_hidden: 64,
            layers: 2,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0) || !self.lr.is_finite() {
            return Err(Error::Config(format!("learning rate {} must be positive", self.lr)));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(Error::Config("weight decay must be non-negative".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        if self.max_epochs == 0 || self.patience > self.max_epochs {
            return Err(Error::Config(
                "need max_epochs >= 1 and patience <= max_epochs".into(),
            ));
        }
        Ok(())
    }

    pub fn spec(&self, arch: Architecture, g: &Graph) -> ModelSpec {
        ModelSpec {
            arch,
            layers: self.layers,
            in_dim: g.num_features(),
            hidden: self.hidden,
            out_dim: g.num_classes(),
            gin_hidden: self.gin_hidden,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Training objective before the step, including weight decay.
    pub loss: f64,
    /// Validation accuracy after the step.
    pub val_accuracy: f64,
}

/// Frozen parameters from the best validation epoch.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    params: ModelParams,
    config: TrainConfig,
    val_accuracy: f64,
    best_epoch: usize,
    history: Vec<EpochStats>,
}

impl TrainedModel {
    pub fn new(params: ModelParams, config: TrainConfig, val_accuracy: f64, best_epoch: usize) -> Self {
        Self {
            params,
            config,
            val_accuracy,
            best_epoch,
            history: Vec::new(),
        }
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn val_accuracy(&self) -> f64 {
        self.val_accuracy
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }

    pub fn history(&self) -> &[EpochStats] {
        &self.history
    }
}

/// Fraction of `mask` nodes whose prediction equals the label.
pub fn accuracy(pred: &[usize], g: &Graph, mask: &[usize]) -> Result<f64> {
    if mask.is_empty() {
        return Err(Error::Config("accuracy over an empty mask".into()));
    }
    let correct = mask
        .iter()
        .filter(|&&v| g.label(v) == Some(pred[v]))
        .count();
    Ok(correct as f64 / mask.len() as f64)
}

struct Adam {
    beta1: f64,
    beta2: f64,
    eps: f64,
    lr: f64,
    t: i32,
    m: Vec<DenseMatrix>,
    v: Vec<DenseMatrix>,
}

impl Adam {
    fn new(params: &ModelParams, lr: f64) -> Self {
        let zeros = |t: &DenseMatrix| DenseMatrix::zeros(t.rows(), t.cols());
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            lr,
            t: 0,
            m: params.tensors().iter().map(zeros).collect(),
            v: params.tensors().iter().map(zeros).collect(),
        }
    }

    fn step(&mut self, params: &mut ModelParams, grads: &[DenseMatrix]) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t);
        let bc2 = 1.0 - self.beta2.powi(self.t);
        for (i, p) in params.tensors_mut().iter_mut().enumerate() {
            let (m, v) = (self.m[i].data_mut(), self.v[i].data_mut());
            for (k, (w, &g)) in p.data_mut().iter_mut().zip(grads[i].data()).enumerate() {
                m[k] = self.beta1 * m[k] + (1.0 - self.beta1) * g;
                v[k] = self.beta2 * v[k] + (1.0 - self.beta2) * g * g;
                let mh = m[k] / bc1;
                let vh = v[k] / bc2;
                *w -= self.lr * mh / (vh.sqrt() + self.eps);
            }
        }
    }
}

/// Data-loss builder: `(epoch, current params, tape, bound params) -> loss`.
pub(crate) type LossFn<'a> =
    dyn FnMut(usize, &ModelParams, &mut Tape, &[Var]) -> Result<Var> + 'a;

/// Mean training cross-entropy under dropout, on the full graph.
pub(crate) fn clean_loss(
    g: &Graph,
    params: &ModelParams,
    config: &TrainConfig,
    epoch: usize,
    tape: &mut Tape,
    bound: &[Var],
    nodes: &[usize],
) -> Result<Var> {
    let d = Dropout {
        rate: config.dropout,
        seed: config.seed,
        epoch: epoch as u64,
        nodes,
    };
    let x = Arc::new(d.apply_sparse(g.sparse_features())?);
    let proj = params.project_on_tape(tape, bound, &x)?;
    let w = tape.constant(DenseMatrix::filled(g.edges().len(), 1, 1.0));
    let logits = params.forward(tape, bound, &proj, g.adjacency(), w, Some(&d))?;
    let labels: Vec<usize> = g.train_mask().iter().map(|&v| g.label(v).unwrap()).collect();
    tape.cross_entropy(logits, g.train_mask(), &labels)
}

/// Adam with coupled L2 weight decay and best-validation early stopping.
pub(crate) fn fit(
    g: &Graph,
    arch: Architecture,
    config: &TrainConfig,
    loss_fn: &mut LossFn<'_>,
) -> Result<TrainedModel> {
    config.validate()?;
    if g.train_mask().is_empty() {
        return Err(Error::Training("empty train mask".into()));
    }
    if g.val_mask().is_empty() {
        return Err(Error::Training("empty validation mask".into()));
    }
    let mut params = ModelParams::init(config.spec(arch, g), config.seed)?;
    let mut adam = Adam::new(&params, config.lr);
    let mut best = (f64::NEG_INFINITY, 0usize, params.clone());
    let mut since_best = 0;
    let mut history = Vec::new();

    for epoch in 0..config.max_epochs {
        let mut tape = Tape::new();
        let bound = params.bind(&mut tape, true);
        let loss = loss_fn(epoch, &params, &mut tape, &bound)?;
        let data_loss = tape.value(loss).item();
        let mut grads = tape.backward(loss)?;
        let mut decay = 0.0;
        let mut gs = Vec::with_capacity(bound.len());
        for (p, v) in params.tensors().iter().zip(&bound) {
            let mut gr = grads.take(*v)?;
            for (gk, &w) in gr.data_mut().iter_mut().zip(p.data()) {
                *gk += config.weight_decay * w;
                decay += w * w;
            }
            gs.push(gr);
        }
        let total = data_loss + 0.5 * config.weight_decay * decay;
        if !total.is_finite() || gs.iter().any(|g| !g.is_finite()) {
            return Err(Error::Training(format!("non-finite loss at epoch {epoch}")));
        }
        adam.step(&mut params, &gs);

        let val = accuracy(&predict_rows(&params.logits(g)?), g, g.val_mask())?;
        history.push(EpochStats {
            epoch,
            loss: total,
            val_accuracy: val,
        });
        if val > best.0 {
            best = (val, epoch, params.clone());
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= config.patience {
                break;
            }
        }
    }
    let (val_accuracy, best_epoch, params) = best;
    Ok(TrainedModel {
        params,
        config: config.clone(),
        val_accuracy,
        best_epoch,
        history,
    })
}

/// Supervised training on the train mask.
pub fn train(g: &Graph, arch: Architecture, config: &TrainConfig) -> Result<TrainedModel> {
    let nodes: Vec<usize> = (0..g.num_nodes()).collect();
    fit(g, arch, config, &mut |epoch, params, tape, bound| {
        clean_loss(g, params, config, epoch, tape, bound, &nodes)
    })
}
