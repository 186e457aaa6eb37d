use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{AttackOutcome, EdgeFlip, FrozenModel, Goal};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::tensor::{argmax, DenseMatrix, SparseWeightedAdj, Tape};

/// Which pairs an edge attack may toggle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeCandidates {
    /// Edges incident to one attacker node.
    Attacker(usize),
    /// Any pair touching the victim's `(L-1)`-hop vicinity.
    Global,
}

/// A toggleable pair `(u, w)` with `u < w` and its current state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateEdge {
    pub u: usize,
    pub w: usize,
    pub present: bool,
}

fn has_edge(g: &Graph, a: usize, b: usize) -> bool {
    g.neighbors(a).binary_search(&b).is_ok()
}

fn vicinity(g: &Graph, v: usize, layers: usize) -> Result<Vec<usize>> {
    let mut near = g.k_hop_neighborhood(v, layers.saturating_sub(1))?;
    near.push(v);
    near.sort_unstable();
    Ok(near)
}

fn tag(g: &Graph, pairs: BTreeSet<(usize, usize)>) -> Vec<CandidateEdge> {
    pairs
        .into_iter()
        .map(|(u, w)| CandidateEdge {
            u,
            w,
            present: has_edge(g, u, w),
        })
        .collect()
}

/// Existing edges of `u` plus every pair `(u, w)` with `w` within `L - 1`
/// hops of `v` (including `v`). Sorted and deduplicated.
pub fn candidate_edges(g: &Graph, v: usize, u: usize, layers: usize) -> Result<Vec<CandidateEdge>> {
    if u >= g.num_nodes() {
        return Err(Error::Index(format!("attacker {u} of {}", g.num_nodes())));
    }
    if layers == 0 {
        return Err(Error::Config("edge candidates need at least one layer".into()));
    }
    let mut pairs = BTreeSet::new();
    for &w in g.neighbors(u) {
        pairs.insert((u.min(w), u.max(w)));
    }
    for w in vicinity(g, v, layers)? {
        if w != u {
            pairs.insert((u.min(w), u.max(w)));
        }
    }
    Ok(tag(g, pairs))
}

/// All pairs `(u, w)` with `w` within `L - 1` hops of `v` (including `v`)
/// and `u` anywhere in the graph.
pub fn global_candidate_edges(g: &Graph, v: usize, layers: usize) -> Result<Vec<CandidateEdge>> {
    if layers == 0 {
        return Err(Error::Config("edge candidates need at least one layer".into()));
    }
    let mut pairs = BTreeSet::new();
    for w in vicinity(g, v, layers)? {
        for u in (0..g.num_nodes()).filter(|&u| u != w) {
            pairs.insert((u.min(w), u.max(w)));
        }
    }
    Ok(tag(g, pairs))
}

/// Full graph extended with absent candidates as zero-weight edges.
struct EdgeProblem<'a> {
    model: &'a FrozenModel,
    v: usize,
    adj: Arc<SparseWeightedAdj>,
    weights: Vec<f64>,
    candidates: Vec<CandidateEdge>,
    /// Position of each candidate in `adj.edges()`.
    slots: Vec<usize>,
}

impl<'a> EdgeProblem<'a> {
    fn new(model: &'a FrozenModel, g: &Graph, v: usize, candidates: Vec<CandidateEdge>) -> Result<Self> {
        let position: HashMap<(usize, usize), usize> =
            g.edges().iter().enumerate().map(|(i, &e)| (e, i)).collect();
        let mut edges = g.edges().to_vec();
        let mut weights = vec![1.0; edges.len()];
        let mut slots = Vec::with_capacity(candidates.len());
        for c in &candidates {
            match position.get(&(c.u, c.w)) {
                Some(&i) => slots.push(i),
                None => {
                    slots.push(edges.len());
                    edges.push((c.u, c.w));
                    weights.push(0.0);
                }
            }
        }
        let adj = Arc::new(SparseWeightedAdj::new(g.num_nodes(), edges)?.with_self_loops());
        Ok(Self {
            model,
            v,
            adj,
            weights,
            candidates,
            slots,
        })
    }

    fn evaluate(&self, class: usize, want_grad: bool) -> Result<(Vec<f64>, Option<Vec<f64>>)> {
        let params = self.model.params();
        let mut tape = Tape::new();
        let bound = params.bind(&mut tape, false);
        let proj: Vec<_> = self
            .model
            .projections()
            .iter()
            .map(|p| tape.constant(p.clone()))
            .collect();
        let wm = DenseMatrix::column(&self.weights);
        let w = if want_grad { tape.leaf(wm) } else { tape.constant(wm) };
        let out = params.forward(&mut tape, &bound, &proj, &self.adj, w, None)?;
        let logits = tape.value(out).row(self.v).to_vec();
        if !want_grad {
            return Ok((logits, None));
        }
        let loss = tape.cross_entropy(out, &[self.v], &[class])?;
        let g = tape.backward(loss)?.wrt(w)?;
        Ok((logits, Some(g.into_vec())))
    }

    /// Victim logits on the structure that keeps only weight-1 edges.
    fn final_logits(&self) -> Result<Vec<f64>> {
        let kept: Vec<(usize, usize)> = self
            .adj
            .edges()
            .iter()
            .zip(&self.weights)
            .filter(|(_, &w)| w == 1.0)
            .map(|(&e, _)| e)
            .collect();
        let adj = Arc::new(SparseWeightedAdj::new(self.adj.n(), kept)?.with_self_loops());
        let ones = vec![1.0; adj.num_edges()];
        let logits = self
            .model
            .params()
            .logits_from_projections(self.model.projections().to_vec(), &adj, &ones)?;
        Ok(logits.row(self.v).to_vec())
    }
}

/// Greedy edge flipping: score each unflipped candidate by
/// `(1 - 2w) * dJ/dw` (sign reversed for targeted goals), flip the best,
/// recompute gradients, and repeat up to `budget_edges` flips or success.
pub fn multi_edge_attack(
    model: &FrozenModel,
    g: &Graph,
    v: usize,
    budget_edges: usize,
    candidates: EdgeCandidates,
    goal: Goal,
) -> Result<AttackOutcome> {
    if budget_edges == 0 {
        return Err(Error::Budget("edge budget must be at least 1".into()));
    }
    if v >= g.num_nodes() {
        return Err(Error::Index(format!("victim {v} of {}", g.num_nodes())));
    }
    let reference = model.prediction(v);
    goal.validate(reference, g.num_classes())?;
    let layers = model.layers();
    let list = match candidates {
        EdgeCandidates::Attacker(u) => candidate_edges(g, v, u, layers)?,
        EdgeCandidates::Global => global_candidate_edges(g, v, layers)?,
    };
    if list.is_empty() {
        return Err(Error::NoAttacker {
            victim: v,
            reason: "empty edge candidate set".into(),
        });
    }
    let mut p = EdgeProblem::new(model, g, v, list)?;
    let class = goal.loss_class(reference);
    let dir = goal.direction();
    let mut flipped = vec![false; p.candidates.len()];
    let mut flips = Vec::new();
    loop {
        let more = flips.len() < budget_edges;
        let (logits, grad) = p.evaluate(class, more)?;
        if goal.reached(reference, argmax(&logits)) || !more {
            break;
        }
        let grad = grad.expect("gradient requested");
        let mut best: Option<(f64, usize)> = None;
        for (c, &slot) in p.slots.iter().enumerate() {
            if flipped[c] {
                continue;
            }
            let score = (1.0 - 2.0 * p.weights[slot]) * dir * grad[slot];
            if best.is_none_or(|(s, _)| score > s) {
                best = Some((score, c));
            }
        }
        let Some((_, c)) = best else { break };
        let slot = p.slots[c];
        let inserted = p.weights[slot] == 0.0;
        p.weights[slot] = if inserted { 1.0 } else { 0.0 };
        flipped[c] = true;
        flips.push(EdgeFlip {
            u: p.candidates[c].u,
            v: p.candidates[c].w,
            inserted,
        });
    }
    let pred_after = argmax(&p.final_logits()?);
    let attackers = match candidates {
        EdgeCandidates::Attacker(u) => vec![u],
        EdgeCandidates::Global => {
            let mut a: Vec<usize> = flips
                .iter()
                .map(|f| if f.u == v { f.v } else { f.u })
                .collect();
            a.dedup();
            a
        }
    };
    Ok(AttackOutcome {
        victim: v,
        attackers,
        variant: if budget_edges == 1 { "single-edge" } else { "multi-edge" }.into(),
        success: goal.reached(reference, pred_after),
        pred_before: reference,
        pred_after,
        target: goal.target(),
        iters: flips.len(),
        l0_used: 0,
        linf_used: 0.0,
        flipped_edges: flips,
        features: Vec::new(),
    })
}

/// One gradient-chosen edge flip.
pub fn single_edge_attack(
    model: &FrozenModel,
    g: &Graph,
    v: usize,
    candidates: EdgeCandidates,
    goal: Goal,
) -> Result<AttackOutcome> {
    multi_edge_attack(model, g, v, 1, candidates, goal)
}
