use std::collections::HashSet;

use super::{AttackOutcome, Budget, FeatureChange, FrozenModel, Goal};
use crate::error::{Error, Result};
use crate::graph::{FeatureKind, Graph, Subgraph};
use crate::tensor::{argmax, CsrMatrix, DenseMatrix, Tape};

/// Clamps to `[-eps_inf, eps_inf]`, optionally keeps `base + eta >= 0`, then
/// zeroes all but the `floor(eps0 * D)` largest magnitudes (ties keep the
/// lower index).
pub fn project_continuous(eta: &[f64], budget: &Budget, base: Option<&[f64]>) -> Vec<f64> {
    let e = budget.eps_inf.unwrap_or(f64::INFINITY);
    let mut out: Vec<f64> = eta.iter().map(|v| v.clamp(-e, e)).collect();
    if budget.clamp_nonneg {
        if let Some(x) = base {
            for (o, &xv) in out.iter_mut().zip(x) {
                *o = o.max(-xv);
            }
        }
    }
    let k = budget.max_changes(eta.len());
    let nonzero = out.iter().filter(|v| **v != 0.0).count();
    if nonzero > k {
        let mut order: Vec<usize> = (0..out.len()).collect();
        order.sort_by(|&a, &b| out[b].abs().total_cmp(&out[a].abs()).then(a.cmp(&b)));
        for &j in &order[k..] {
            out[j] = 0.0;
        }
    }
    out
}

/// Feature attack on the victim's receptive subgraph (victim is local 0).
struct Problem<'a> {
    model: &'a FrozenModel,
    graph: &'a Graph,
    sub: Subgraph,
    base: Vec<DenseMatrix>,
    attackers: Vec<usize>,
    rows: Vec<Vec<f64>>,
    /// Global id of an injected node, which has no row in `graph`.
    injected: Option<usize>,
}

impl<'a> Problem<'a> {
    fn new(model: &'a FrozenModel, g: &'a Graph, v: usize, attackers: &[usize]) -> Result<Self> {
        if attackers.is_empty() {
            return Err(Error::NoAttacker {
                victim: v,
                reason: "empty attacker list".into(),
            });
        }
        if attackers.iter().collect::<HashSet<_>>().len() != attackers.len() {
            return Err(Error::Config(format!("duplicate attackers {attackers:?}")));
        }
        let sub = Subgraph::receptive(g, v, model.layers())?;
        let locals = attackers
            .iter()
            .map(|&a| {
                sub.local_of(a).ok_or_else(|| Error::NoAttacker {
                    victim: v,
                    reason: format!("attacker {a} is farther than {} hops", model.layers()),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let base = model.projections().iter().map(|p| sub.restrict(p)).collect();
        let rows = attackers.iter().map(|&a| g.features().row(a).to_vec()).collect();
        Ok(Self {
            model,
            graph: g,
            sub,
            base,
            attackers: locals,
            rows,
            injected: None,
        })
    }

    fn with_injection(model: &'a FrozenModel, g: &'a Graph, v: usize) -> Result<Self> {
        let sub = Subgraph::receptive(g, v, model.layers())?;
        let new_id = g.num_nodes();
        let sub = sub.with_injected(0, new_id)?;
        let base = model
            .projections()
            .iter()
            .map(|p| {
                let mut data = sub.restrict_existing(p);
                data.extend(std::iter::repeat(0.0).take(p.cols()));
                DenseMatrix::from_vec(sub.len(), p.cols(), data)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            model,
            graph: g,
            attackers: vec![sub.len() - 1],
            rows: vec![vec![0.0; g.num_features()]],
            sub,
            base,
            injected: Some(new_id),
        })
    }

    fn global_attackers(&self) -> Vec<usize> {
        self.attackers.iter().map(|&l| self.sub.nodes()[l]).collect()
    }

    /// Victim logits for perturbation `eta` (one row per attacker) and, when
    /// requested, the gradient of the victim's loss for `class` w.r.t. `eta`.
    fn evaluate(&self, eta: &DenseMatrix, class: usize, want_grad: bool) -> Result<(Vec<f64>, Option<DenseMatrix>)> {
        let params = self.model.params();
        let mut tape = Tape::new();
        let bound = params.bind(&mut tape, false);
        let eta_v = if want_grad {
            tape.leaf(eta.clone())
        } else {
            tape.constant(eta.clone())
        };
        let mut proj = Vec::with_capacity(self.base.len());
        for (b, w) in self.base.iter().zip(params.projection_weights()) {
            let bv = tape.constant(b.clone());
            let wv = tape.constant(w.clone());
            let d = tape.matmul(eta_v, wv)?;
            proj.push(tape.scatter_add_rows(bv, &self.attackers, d)?);
        }
        let adj = self.sub.adjacency();
        let ones = tape.constant(DenseMatrix::filled(adj.num_edges(), 1, 1.0));
        let out = params.forward(&mut tape, &bound, &proj, adj, ones, None)?;
        let logits = tape.value(out).row(0).to_vec();
        if !want_grad {
            return Ok((logits, None));
        }
        let loss = tape.cross_entropy(out, &[0], &[class])?;
        let g = tape.backward(loss)?.wrt(eta_v)?;
        Ok((logits, Some(g)))
    }

    /// Victim logits recomputed from the perturbed feature rows themselves.
    fn final_logits(&self, eta: &DenseMatrix) -> Result<Vec<f64>> {
        let d = self.graph.num_features();
        let n = self.sub.len();
        let mut x = DenseMatrix::zeros(n, d);
        for (l, &u) in self.sub.nodes().iter().enumerate() {
            if Some(u) != self.injected {
                x.row_mut(l).copy_from_slice(self.graph.features().row(u));
            }
        }
        for (i, &l) in self.attackers.iter().enumerate() {
            for (o, e) in x.row_mut(l).iter_mut().zip(eta.row(i)) {
                *o += e;
            }
        }
        let adj = self.sub.adjacency();
        let logits = self
            .model
            .params()
            .logits_with(&CsrMatrix::from_dense(&x), adj, &vec![1.0; adj.num_edges()])?;
        Ok(logits.row(0).to_vec())
    }

    fn run(&self, kind: FeatureKind, goal: Goal, budget: &Budget, reference: usize) -> Result<(DenseMatrix, usize)> {
        let d = self.graph.num_features();
        let k = budget.max_changes(d);
        let class = goal.loss_class(reference);
        let dir = goal.direction();
        let a = self.attackers.len();
        let mut eta = DenseMatrix::zeros(a, d);
        let mut iters = 0;
        match kind {
            FeatureKind::Continuous => {
                let gamma = budget.step_size();
                loop {
                    let more = k > 0 && iters < budget.iters;
                    let (logits, grad) = self.evaluate(&eta, class, more)?;
                    if goal.reached(reference, argmax(&logits)) || !more {
                        break;
                    }
                    let grad = grad.expect("gradient requested");
                    for i in 0..a {
                        let gr = grad.row(i);
                        let m = gr.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                        if m == 0.0 {
                            continue;
                        }
                        let stepped: Vec<f64> = eta
                            .row(i)
                            .iter()
                            .zip(gr)
                            .map(|(e, g)| e + dir * gamma * g / m)
                            .collect();
                        let p = project_continuous(&stepped, budget, Some(&self.rows[i]));
                        eta.row_mut(i).copy_from_slice(&p);
                    }
                    iters += 1;
                }
            }
            FeatureKind::Binary => {
                let mut counts = vec![0usize; a];
                loop {
                    let more = counts.iter().any(|&c| c < k);
                    let (logits, grad) = self.evaluate(&eta, class, more)?;
                    if goal.reached(reference, argmax(&logits)) || !more {
                        break;
                    }
                    let grad = grad.expect("gradient requested");
                    let mut best: Option<(f64, usize, usize)> = None;
                    for i in (0..a).filter(|&i| counts[i] < k) {
                        let (gr, x, e) = (grad.row(i), &self.rows[i], eta.row(i));
                        for j in 0..d {
                            if e[j] != 0.0 {
                                continue;
                            }
                            let score = dir * gr[j] * (1.0 - 2.0 * x[j]);
                            if best.is_none_or(|(s, _, _)| score > s) {
                                best = Some((score, i, j));
                            }
                        }
                    }
                    let Some((_, i, j)) = best else { break };
                    eta.set(i, j, 1.0 - 2.0 * self.rows[i][j]);
                    counts[i] += 1;
                    iters += 1;
                }
            }
        }
        Ok((eta, iters))
    }

    fn outcome(&self, victim: usize, variant: &str, goal: Goal, reference: usize, eta: &DenseMatrix, iters: usize) -> Result<AttackOutcome> {
        let pred_after = argmax(&self.final_logits(eta)?);
        let features: Vec<FeatureChange> = self
            .global_attackers()
            .into_iter()
            .enumerate()
            .map(|(i, attacker)| FeatureChange {
                attacker,
                entries: eta
                    .row(i)
                    .iter()
                    .enumerate()
                    .filter(|(_, &e)| e != 0.0)
                    .map(|(j, &e)| (j, self.rows[i][j], e))
                    .collect(),
            })
            .collect();
        Ok(AttackOutcome {
            victim,
            attackers: self.global_attackers(),
            variant: variant.to_string(),
            success: goal.reached(reference, pred_after),
            pred_before: reference,
            pred_after,
            target: goal.target(),
            iters,
            l0_used: features.iter().map(FeatureChange::l0).max().unwrap_or(0),
            linf_used: features.iter().map(FeatureChange::linf).fold(0.0, f64::max),
            flipped_edges: Vec::new(),
            features,
        })
    }
}

/// Iterative gradient attack on the feature rows of `attackers`, all within
/// the model's receptive field of `v`.
///
/// Continuous features: up to `budget.iters` steps of
/// `eta += gamma * g / max|g|` (descending for targeted goals), each followed by
/// [`project_continuous`]. Binary features: greedily flip the coordinate with
/// the largest first-order gain `g * (1 - 2x)` until every attacker has used
/// `floor(eps0 * D)` flips. Both stop as soon as the goal is reached.
pub fn single_node_attack(
    model: &FrozenModel,
    g: &Graph,
    v: usize,
    attackers: &[usize],
    goal: Goal,
    budget: &Budget,
) -> Result<AttackOutcome> {
    budget.validate(g.feature_kind())?;
    if v >= g.num_nodes() {
        return Err(Error::Index(format!("victim {v} of {}", g.num_nodes())));
    }
    let reference = model.prediction(v);
    goal.validate(reference, g.num_classes())?;
    let p = Problem::new(model, g, v, attackers)?;
    let (eta, iters) = p.run(g.feature_kind(), goal, budget, reference)?;
    p.outcome(v, "single-node", goal, reference, &eta, iters)
}

/// Baseline that replaces the attacker's features with zeros.
pub fn zero_features_attack(model: &FrozenModel, g: &Graph, v: usize, attacker: usize) -> Result<AttackOutcome> {
    if v >= g.num_nodes() {
        return Err(Error::Index(format!("victim {v} of {}", g.num_nodes())));
    }
    let p = Problem::new(model, g, v, &[attacker])?;
    let row: Vec<f64> = p.rows[0].iter().map(|x| -x).collect();
    let eta = DenseMatrix::from_vec(1, row.len(), row)?;
    p.outcome(v, "zero-features", Goal::NonTargeted, model.prediction(v), &eta, 0)
}

/// Adds a zero-feature node joined only to `v` and attacks through its
/// features under `budget`.
pub fn injection_attack(model: &FrozenModel, g: &Graph, v: usize, goal: Goal, budget: &Budget) -> Result<AttackOutcome> {
    budget.validate(g.feature_kind())?;
    if v >= g.num_nodes() {
        return Err(Error::Index(format!("victim {v} of {}", g.num_nodes())));
    }
    let reference = model.prediction(v);
    goal.validate(reference, g.num_classes())?;
    let p = Problem::with_injection(model, g, v)?;
    let (eta, iters) = p.run(g.feature_kind(), goal, budget, reference)?;
    p.outcome(v, "injection", goal, reference, &eta, iters)
}
