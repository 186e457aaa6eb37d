//! Training against the single-node attack: every epoch, each labeled
//! training node gets a fresh attacker and perturbation computed against the
//! current parameters, and the optimizer minimizes the mean of the clean and
//! perturbed cross-entropies.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attacks::{
    choose_attacker_random, choose_attacker_topology, single_node_attack, Budget, FrozenModel, Goal,
    RandomVariant,
};
use crate::error::{Error, Result};
use crate::graph::{Graph, Subgraph};
use crate::models::{clean_loss, fit, Architecture, Dropout, ModelParams, TrainConfig, TrainedModel};
use crate::rng;
use crate::tensor::{CsrMatrix, DenseMatrix, Tape, Var};

const ATTACKER_DOMAIN: u64 = 0xad7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AdvStrategy {
    Random,
    Topology,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdvTrainConfig {
    pub base: TrainConfig,
    pub strategy: AdvStrategy,
    /// Inner attack budget; `iters` is the per-epoch step count.
    pub budget: Budget,
}

impl AdvTrainConfig {
    /// Inner attack with 5 steps and the given feature budget.
    pub fn new(base: TrainConfig, strategy: AdvStrategy, mut budget: Budget) -> Self {
        budget.iters = 5;
        Self {
            base,
            strategy,
            budget,
        }
    }
}

/// Perturbed copy of one training node's receptive field.
struct AdvSample {
    nodes: Vec<usize>,
    x: Arc<CsrMatrix>,
    adj: Arc<crate::tensor::SparseWeightedAdj>,
    label: usize,
}

fn pick_attacker(g: &Graph, cfg: &AdvTrainConfig, layers: usize, epoch: usize, v: usize) -> Option<usize> {
    match cfg.strategy {
        AdvStrategy::Random => {
            let mut r = rng::stream(&[ATTACKER_DOMAIN, cfg.base.seed, epoch as u64, v as u64]);
            choose_attacker_random(g, v, RandomVariant::Any, layers, &mut r).ok()
        }
        AdvStrategy::Topology => choose_attacker_topology(g, v).ok(),
    }
}

/// Runs the inner attack for `v` against `model` and returns its subgraph
/// with the attacker row perturbed. Nodes without a usable attacker keep
/// their clean features.
fn adversarial_sample(g: &Graph, model: &FrozenModel, cfg: &AdvTrainConfig, epoch: usize, v: usize) -> Result<AdvSample> {
    let layers = model.layers();
    let sub = Subgraph::receptive(g, v, layers)?;
    let mut x = g.features().select_rows(sub.nodes());
    if let Some(a) = pick_attacker(g, cfg, layers, epoch, v) {
        let out = single_node_attack(model, g, v, &[a], Goal::NonTargeted, &cfg.budget)?;
        for change in &out.features {
            let l = sub.require_local(change.attacker)?;
            for &(col, orig, delta) in &change.entries {
                x.set(l, col, orig + delta);
            }
        }
    }
    Ok(AdvSample {
        nodes: sub.nodes().to_vec(),
        x: Arc::new(CsrMatrix::from_dense(&x)),
        adj: sub.adjacency().clone(),
        label: g.label(v).ok_or_else(|| Error::Training(format!("training node {v} is unlabeled")))?,
    })
}

/// Sum of victim cross-entropies over the perturbed samples, under the same
/// dropout masks the clean pass uses for those nodes.
fn adversarial_sum(
    params: &ModelParams,
    config: &TrainConfig,
    epoch: usize,
    tape: &mut Tape,
    bound: &[Var],
    samples: &[AdvSample],
) -> Result<Var> {
    let mut total: Option<Var> = None;
    for s in samples {
        let d = Dropout {
            rate: config.dropout,
            seed: config.seed,
            epoch: epoch as u64,
            nodes: &s.nodes,
        };
        let x = Arc::new(d.apply_sparse(&s.x)?);
        let proj = params.project_on_tape(tape, bound, &x)?;
        let w = tape.constant(DenseMatrix::filled(s.adj.num_edges(), 1, 1.0));
        let logits = params.forward(tape, bound, &proj, &s.adj, w, Some(&d))?;
        let ce = tape.cross_entropy(logits, &[0], &[s.label])?;
        total = Some(match total {
            None => ce,
            Some(t) => tape.add(t, ce)?,
        });
    }
    total.ok_or_else(|| Error::Training("empty train mask".into()))
}

/// Adversarial training with loss `0.5 * (clean mean + adversarial mean)`
/// over the train mask; early stopping uses clean validation accuracy.
pub fn adversarial_train(g: &Graph, arch: Architecture, cfg: &AdvTrainConfig) -> Result<TrainedModel> {
    cfg.budget.validate(g.feature_kind())?;
    let config = &cfg.base;
    let nodes: Vec<usize> = (0..g.num_nodes()).collect();
    let n = g.train_mask().len() as f64;
    fit(g, arch, config, &mut |epoch, params, tape, bound| {
        let frozen = FrozenModel::new(params.clone(), g)?;
        let samples = g
            .train_mask()
            .par_iter()
            .map(|&v| adversarial_sample(g, &frozen, cfg, epoch, v))
            .collect::<Result<Vec<_>>>()?;
        let clean = clean_loss(g, params, config, epoch, tape, bound, &nodes)?;
        let adv = adversarial_sum(params, config, epoch, tape, bound, &samples)?;
        let adv_mean = tape.scale(adv, 1.0 / n)?;
        let both = tape.add(clean, adv_mean)?;
        tape.scale(both, 0.5)
    })
}
