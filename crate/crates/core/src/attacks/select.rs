use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{FrozenModel, Goal};
use crate::error::{Error, Result};
use crate::graph::{Graph, Subgraph};
use crate::tensor::{DenseMatrix, Tape};

/// Sampling domain for randomly chosen attackers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RandomVariant {
    /// Any node within `L` hops other than the victim.
    Any,
    /// Nodes within `L` hops that are not direct neighbours.
    Hops,
    /// The victim itself.
    Direct,
}

fn no_attacker(v: usize, reason: &str) -> Error {
    Error::NoAttacker {
        victim: v,
        reason: reason.to_string(),
    }
}

/// Candidate pool for a random variant, ascending by node id.
pub(crate) fn random_pool(g: &Graph, v: usize, variant: RandomVariant, layers: usize) -> Result<Vec<usize>> {
    Ok(match variant {
        RandomVariant::Direct => {
            if v >= g.num_nodes() {
                return Err(Error::Index(format!("victim {v} of {}", g.num_nodes())));
            }
            vec![v]
        }
        RandomVariant::Any => g.k_hop_neighborhood(v, layers)?,
        RandomVariant::Hops => {
            let mut c: Vec<usize> = g
                .index()
                .bfs_within(v, layers)?
                .into_iter()
                .filter(|&(_, d)| d >= 2)
                .map(|(u, _)| u)
                .collect();
            c.sort_unstable();
            c
        }
    })
}

pub fn choose_attacker_random(
    g: &Graph,
    v: usize,
    variant: RandomVariant,
    layers: usize,
    rng: &mut impl Rng,
) -> Result<usize> {
    let pool = random_pool(g, v, variant, layers)?;
    if pool.is_empty() {
        return Err(no_attacker(v, "no candidate attacker in range"));
    }
    Ok(pool[rng.gen_range(0..pool.len())])
}

/// Draws `count` distinct attackers one at a time; the first draw matches
/// [`choose_attacker_random`] for the same RNG state.
pub fn choose_attackers_random(
    g: &Graph,
    v: usize,
    variant: RandomVariant,
    layers: usize,
    count: usize,
    rng: &mut impl Rng,
) -> Result<Vec<usize>> {
    let mut pool = random_pool(g, v, variant, layers)?;
    if pool.len() < count || count == 0 {
        return Err(no_attacker(v, &format!("{} candidates for {count} attackers", pool.len())));
    }
    Ok((0..count).map(|_| pool.remove(rng.gen_range(0..pool.len()))).collect())
}

/// Candidate within `L` hops whose feature row has the largest loss-gradient
/// infinity norm; ties go to the lowest node id.
pub fn choose_attacker_gradchoice(model: &FrozenModel, g: &Graph, v: usize, goal: Goal) -> Result<usize> {
    let norms = gradient_norms(model, g, v, goal)?;
    let mut best: Option<(f64, usize)> = None;
    for (u, n) in norms {
        if best.is_none_or(|(b, _)| n > b) {
            best = Some((n, u));
        }
    }
    best.map(|(_, u)| u)
        .ok_or_else(|| no_attacker(v, "no candidate attacker in range"))
}

/// `(node, max_j |dJ/dx_{node,j}|)` for every node within `L` hops of `v`
/// (excluding `v`), ascending by node id.
pub fn gradient_norms(model: &FrozenModel, g: &Graph, v: usize, goal: Goal) -> Result<Vec<(usize, f64)>> {
    let reference = model.prediction(v);
    goal.validate(reference, g.num_classes())?;
    let sub = Subgraph::receptive(g, v, model.layers())?;
    let params = model.params();
    let mut tape = Tape::new();
    let bound = params.bind(&mut tape, false);
    let proj: Vec<_> = model
        .projections()
        .iter()
        .map(|p| tape.leaf(sub.restrict(p)))
        .collect();
    let adj = sub.adjacency();
    let ones = tape.constant(DenseMatrix::filled(adj.num_edges(), 1, 1.0));
    let out = params.forward(&mut tape, &bound, &proj, adj, ones, None)?;
    let loss = tape.cross_entropy(out, &[0], &[goal.loss_class(reference)])?;
    let grads = tape.backward(loss)?;
    let mut gx = DenseMatrix::zeros(sub.len(), g.num_features());
    for (p, w) in proj.iter().zip(params.projection_weights()) {
        gx.add_assign(&grads.wrt(*p)?.matmul_transpose_b(w)?);
    }
    let mut out: Vec<(usize, f64)> = (1..sub.len())
        .map(|l| (sub.nodes()[l], gx.row(l).iter().fold(0.0f64, |m, x| m.max(x.abs()))))
        .collect();
    out.sort_unstable_by_key(|&(u, _)| u);
    Ok(out)
}

/// Direct neighbour with the fewest neighbours; ties go to the lowest id.
pub fn choose_attacker_topology(g: &Graph, v: usize) -> Result<usize> {
    if v >= g.num_nodes() {
        return Err(Error::Index(format!("victim {v} of {}", g.num_nodes())));
    }
    g.neighbors(v)
        .iter()
        .copied()
        .min_by_key(|&u| (g.degree(u), u))
        .ok_or_else(|| no_attacker(v, "victim has no neighbours"))
}
