//! Evasion attacks against a frozen model: feature perturbation of one or
//! more attacker nodes, single/multi edge flips, and the zero-feature and
//! node-injection baselines.

mod edge;
mod feature;
mod select;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{FeatureKind, Graph};
use crate::models::{predict_rows, ModelParams};
use crate::tensor::DenseMatrix;

pub use edge::{candidate_edges, CandidateEdge, global_candidate_edges, multi_edge_attack, single_edge_attack, EdgeCandidates};
pub use feature::{injection_attack, project_continuous, single_node_attack, zero_features_attack};
pub use select::{
    choose_attacker_gradchoice, choose_attacker_random, choose_attacker_topology, choose_attackers_random,
    gradient_norms, RandomVariant,
};

/// Perturbation limits. `eps_inf` applies to continuous features only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Budget {
    pub eps0: f64,
    pub eps_inf: Option<f64>,
    pub iters: usize,
    /// Continuous step size; defaults to `2.5 * eps_inf / iters`.
    pub gamma: Option<f64>,
    /// Keep perturbed continuous features non-negative.
    #[serde(default)]
    pub clamp_nonneg: bool,
}

impl Budget {
    pub fn discrete(eps0: f64) -> Self {
        Self {
            eps0,
            eps_inf: None,
            iters: 20,
            gamma: None,
            clamp_nonneg: false,
        }
    }

    pub fn continuous(eps0: f64, eps_inf: f64) -> Self {
        Self {
            eps_inf: Some(eps_inf),
            ..Self::discrete(eps0)
        }
    }

    pub fn validate(&self, kind: FeatureKind) -> Result<()> {
        if !(0.0..=1.0).contains(&self.eps0) {
            return Err(Error::Budget(format!("eps0 {} outside [0, 1]", self.eps0)));
        }
        if kind == FeatureKind::Continuous {
            match self.eps_inf {
                Some(e) if e > 0.0 && e.is_finite() => {}
                _ => return Err(Error::Budget("continuous features need eps_inf > 0".into())),
            }
        }
        if let Some(g) = self.gamma {
            if !(g > 0.0 && g.is_finite()) {
                return Err(Error::Budget(format!("step size {g} must be positive")));
            }
        }
        Ok(())
    }

    /// Largest number of coordinates one attacker row may change: `floor(eps0 * D)`.
    pub fn max_changes(&self, d: usize) -> usize {
        // guard against products like 0.07 * 100 = 7.000000000000001 or 6.999999999999999
        (self.eps0 * d as f64 + 1e-9).floor() as usize
    }

    pub fn step_size(&self) -> f64 {
        self.gamma
            .unwrap_or_else(|| 2.5 * self.eps_inf.unwrap_or(1.0) / self.iters.max(1) as f64)
    }
}

/// Attack objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Goal {
    /// Change the model's prediction to anything else.
    NonTargeted,
    /// Force the prediction to this class.
    Targeted(usize),
}

impl Goal {
    fn validate(self, reference: usize, classes: usize) -> Result<()> {
        if let Goal::Targeted(c) = self {
            if c >= classes {
                return Err(Error::Goal(format!("target class {c} with {classes} classes")));
            }
            if c == reference {
                return Err(Error::Goal(format!(
                    "target class {c} equals the current prediction"
                )));
            }
        }
        Ok(())
    }

    /// Class whose loss drives the gradient.
    fn loss_class(self, reference: usize) -> usize {
        match self {
            Goal::NonTargeted => reference,
            Goal::Targeted(c) => c,
        }
    }

    /// +1 to ascend the loss (non-targeted), -1 to descend it (targeted).
    fn direction(self) -> f64 {
        match self {
            Goal::NonTargeted => 1.0,
            Goal::Targeted(_) => -1.0,
        }
    }

    fn reached(self, reference: usize, pred: usize) -> bool {
        match self {
            Goal::NonTargeted => pred != reference,
            Goal::Targeted(c) => pred == c,
        }
    }

    pub fn target(self) -> Option<usize> {
        match self {
            Goal::NonTargeted => None,
            Goal::Targeted(c) => Some(c),
        }
    }
}

/// Sparse change to one attacker's feature row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureChange {
    pub attacker: usize,
    /// `(column, original value, delta)` for every changed coordinate.
    pub entries: Vec<(usize, f64, f64)>,
}

impl FeatureChange {
    pub fn l0(&self) -> usize {
        self.entries.len()
    }

    pub fn linf(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, e| m.max(e.2.abs()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeFlip {
    pub u: usize,
    pub v: usize,
    /// True when the edge was absent and is now present.
    pub inserted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackOutcome {
    pub victim: usize,
    pub attackers: Vec<usize>,
    pub variant: String,
    pub success: bool,
    pub pred_before: usize,
    pub pred_after: usize,
    pub target: Option<usize>,
    pub iters: usize,
    /// Largest number of changed coordinates in any attacker row.
    pub l0_used: usize,
    pub linf_used: f64,
    pub flipped_edges: Vec<EdgeFlip>,
    pub features: Vec<FeatureChange>,
}

impl AttackOutcome {
    /// Checks the feature-budget invariants for this outcome.
    pub fn check_budget(&self, budget: &Budget, kind: FeatureKind, d: usize) -> Result<(), String> {
        let k = budget.max_changes(d);
        for f in &self.features {
            if f.l0() > k {
                return Err(format!("attacker {} changed {} > {k} features", f.attacker, f.l0()));
            }
            match kind {
                FeatureKind::Continuous => {
                    let e = budget.eps_inf.unwrap_or(0.0);
                    if f.linf() > e {
                        return Err(format!("attacker {} has |eta| {} > {e}", f.attacker, f.linf()));
                    }
                }
                FeatureKind::Binary => {
                    if let Some(bad) = f.entries.iter().find(|(_, x, dlt)| {
                        let y = x + dlt;
                        y != 0.0 && y != 1.0
                    }) {
                        return Err(format!("attacker {} column {} leaves {{0,1}}", f.attacker, bad.0));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Trained parameters plus cached full-graph input projections and clean
/// predictions for one graph.
#[derive(Debug, Clone)]
pub struct FrozenModel {
    params: ModelParams,
    projections: Vec<DenseMatrix>,
    logits: DenseMatrix,
    predictions: Vec<usize>,
}

impl FrozenModel {
    pub fn new(params: ModelParams, g: &Graph) -> Result<Self> {
        if params.spec().in_dim != g.num_features() || params.spec().out_dim != g.num_classes() {
            return Err(Error::shape(
                "frozen_model",
                format!(
                    "model {}->{} on graph with D={} Y={}",
                    params.spec().in_dim,
                    params.spec().out_dim,
                    g.num_features(),
                    g.num_classes()
                ),
            ));
        }
        let projections = params.project(g.sparse_features())?;
        let ones = vec![1.0; g.edges().len()];
        let logits = params.logits_from_projections(projections.clone(), g.adjacency(), &ones)?;
        let predictions = predict_rows(&logits);
        Ok(Self {
            params,
            projections,
            logits,
            predictions,
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn layers(&self) -> usize {
        self.params.layers()
    }

    pub fn projections(&self) -> &[DenseMatrix] {
        &self.projections
    }

    pub fn logits(&self) -> &DenseMatrix {
        &self.logits
    }

    pub fn predictions(&self) -> &[usize] {
        &self.predictions
    }

    pub fn prediction(&self, v: usize) -> usize {
        self.predictions[v]
    }
}
