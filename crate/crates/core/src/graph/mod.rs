//! Graph data model, neighbourhood queries, normalization, node injection,
//! receptive-field subgraphs, and the JSON graph-bundle format.

mod bundle;
mod neighborhood;
mod subgraph;

use std::collections::HashSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{CsrMatrix, DenseMatrix, SparseWeightedAdj};

pub use bundle::{load_bundle, parse_bundle, save_bundle, to_bundle_json};
pub use neighborhood::{Distance, NeighborhoodIndex};
pub use subgraph::Subgraph;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Binary,
    Continuous,
}

/// Immutable attributed graph with labels and disjoint train/val/test masks.
///
/// Edges are undirected and stored once per pair as `(min, max)`; self-loops
/// are never stored (models add them during aggregation).
#[derive(Debug, Clone)]
pub struct Graph {
    name: String,
    features: DenseMatrix,
    sparse_features: Arc<CsrMatrix>,
    num_classes: usize,
    feature_kind: FeatureKind,
    edges: Vec<(usize, usize)>,
    labels: Vec<Option<usize>>,
    train: Vec<usize>,
    val: Vec<usize>,
    test: Vec<usize>,
    index: NeighborhoodIndex,
    adj: Arc<SparseWeightedAdj>,
}

impl PartialEq for Graph {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
            && self.features == other.features
            && self.num_classes == other.num_classes
            && self.feature_kind == other.feature_kind
            && self.edges == other.edges
            && self.labels == other.labels
            && self.train == other.train
            && self.val == other.val
            && self.test == other.test
    }
}

/// Everything needed to build a [`Graph`]; validated by [`Graph::new`].
#[derive(Debug, Clone)]
pub struct GraphParts {
    pub name: String,
    pub features: DenseMatrix,
    pub num_classes: usize,
    pub feature_kind: FeatureKind,
    pub edges: Vec<(usize, usize)>,
    pub labels: Vec<Option<usize>>,
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl Graph {
    pub fn new(parts: GraphParts) -> Result<Self> {
        let GraphParts {
            name,
            features,
            num_classes,
            feature_kind,
            mut edges,
            labels,
            train,
            val,
            test,
        } = parts;
        let n = features.rows();
        if labels.len() != n {
            return Err(Error::validation(
                "label-count",
                format!("{} labels for {n} nodes", labels.len()),
            ));
        }
        if !features.is_finite() {
            return Err(Error::validation("finite-features", "non-finite feature value"));
        }
        if feature_kind == FeatureKind::Binary {
            if let Some(pos) = features.data().iter().position(|&x| x != 0.0 && x != 1.0) {
                let d = features.cols().max(1);
                return Err(Error::validation(
                    "binary-features",
                    format!("node {} column {} has value {}", pos / d, pos % d, features.data()[pos]),
                ));
            }
        }
        let mut seen = HashSet::with_capacity(edges.len());
        for e in edges.iter_mut() {
            let (u, v) = *e;
            if u >= n || v >= n {
                return Err(Error::validation(
                    "edge-endpoint-range",
                    format!("edge ({u}, {v}) with {n} nodes"),
                ));
            }
            if u == v {
                return Err(Error::validation("no-self-loop", format!("edge ({u}, {v})")));
            }
            *e = (u.min(v), u.max(v));
            if !seen.insert(*e) {
                return Err(Error::validation(
                    "no-duplicate-edge",
                    format!("edge ({u}, {v}) appears more than once"),
                ));
            }
        }
        for (v, l) in labels.iter().enumerate() {
            if let Some(c) = l {
                if *c >= num_classes {
                    return Err(Error::validation(
                        "label-range",
                        format!("node {v} has label {c} with {num_classes} classes"),
                    ));
                }
            }
        }
        let mut owner = vec![None; n];
        for (mask_name, mask) in [("train", &train), ("val", &val), ("test", &test)] {
            for &v in mask.iter() {
                if v >= n {
                    return Err(Error::validation(
                        "mask-range",
                        format!("{mask_name} mask node {v} with {n} nodes"),
                    ));
                }
                if let Some(prev) = owner[v].replace(mask_name) {
                    return Err(Error::validation(
                        "mask-overlap",
                        format!("node {v} is in both {prev} and {mask_name} masks"),
                    ));
                }
                if labels[v].is_none() {
                    return Err(Error::validation(
                        "mask-label",
                        format!("{mask_name} mask node {v} has no label"),
                    ));
                }
            }
        }
        let index = NeighborhoodIndex::new(n, &edges);
        let adj = Arc::new(SparseWeightedAdj::new(n, edges.clone())?.with_self_loops());
        Ok(Self {
            name,
            sparse_features: Arc::new(CsrMatrix::from_dense(&features)),
            features,
            num_classes,
            feature_kind,
            edges,
            labels,
            train,
            val,
            test,
            index,
            adj,
        })
    }

    pub fn into_parts(self) -> GraphParts {
        GraphParts {
            name: self.name,
            features: self.features,
            num_classes: self.num_classes,
            feature_kind: self.feature_kind,
            edges: self.edges,
            labels: self.labels,
            train: self.train,
            val: self.val,
            test: self.test,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn num_nodes(&self) -> usize {
        self.features.rows()
    }

    pub fn num_features(&self) -> usize {
        self.features.cols()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn feature_kind(&self) -> FeatureKind {
        self.feature_kind
    }

    pub fn features(&self) -> &DenseMatrix {
        &self.features
    }

    /// Same values as [`Graph::features`] in CSR form.
    pub fn sparse_features(&self) -> &Arc<CsrMatrix> {
        &self.sparse_features
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn labels(&self) -> &[Option<usize>] {
        &self.labels
    }

    pub fn label(&self, v: usize) -> Option<usize> {
        self.labels[v]
    }

    pub fn train_mask(&self) -> &[usize] {
        &self.train
    }

    pub fn val_mask(&self) -> &[usize] {
        &self.val
    }

    pub fn test_mask(&self) -> &[usize] {
        &self.test
    }

    pub fn index(&self) -> &NeighborhoodIndex {
        &self.index
    }

    /// Full-graph aggregation structure (edges plus implicit self-loops).
    pub fn adjacency(&self) -> &Arc<SparseWeightedAdj> {
        &self.adj
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        self.index.neighbors(v)
    }

    pub fn degree(&self, v: usize) -> usize {
        self.index.degree(v)
    }

    /// Nodes `u != v` with shortest-path distance at most `k`, ascending.
    pub fn k_hop_neighborhood(&self, v: usize, k: usize) -> Result<Vec<usize>> {
        self.index.k_hop(v, k)
    }

    pub fn distance(&self, u: usize, v: usize) -> Result<Distance> {
        self.index.distance(u, v)
    }

    /// Copy of the graph with one extra unlabeled node joined to `neighbor`.
    pub fn inject_node(&self, neighbor: usize, features: &[f64]) -> Result<Graph> {
        let n = self.num_nodes();
        if neighbor >= n {
            return Err(Error::Index(format!("neighbor {neighbor} of {n}")));
        }
        if features.len() != self.num_features() {
            return Err(Error::shape(
                "inject_node",
                format!("{} features, graph has {}", features.len(), self.num_features()),
            ));
        }
        let mut data = Vec::with_capacity((n + 1) * self.num_features());
        data.extend_from_slice(self.features.data());
        data.extend_from_slice(features);
        let mut parts = self.clone().into_parts();
        parts.features = DenseMatrix::from_vec(n + 1, self.num_features(), data)?;
        parts.edges.push((neighbor, n));
        parts.labels.push(None);
        Graph::new(parts)
    }
}

/// Symmetric GCN coefficient `1 / sqrt(d_u d_v)` per edge, where `d` is the
/// weighted degree plus one for the self-loop.
pub fn gcn_norm(graph: &Graph, weights: &[f64]) -> Result<Vec<f64>> {
    if weights.len() != graph.edges().len() {
        return Err(Error::shape(
            "gcn_norm",
            format!("{} weights for {} edges", weights.len(), graph.edges().len()),
        ));
    }
    let deg = graph.adjacency().augmented_degrees(weights);
    Ok(graph
        .edges()
        .iter()
        .map(|&(u, v)| 1.0 / (deg[u] * deg[v]).sqrt())
        .collect())
}

#[cfg(test)]
pub(crate) mod test_graphs {
    use super::*;

    /// Path graph 0-1-...-(n-1) with one-hot features and alternating labels.
    pub fn path(n: usize) -> Graph {
        let mut x = DenseMatrix::zeros(n, n);
        for i in 0..n {
            x.set(i, i, 1.0);
        }
        Graph::new(GraphParts {
            name: "path".into(),
            features: x,
            num_classes: 2,
            feature_kind: FeatureKind::Binary,
            edges: (1..n).map(|i| (i - 1, i)).collect(),
            labels: (0..n).map(|i| Some(i % 2)).collect(),
            train: vec![0],
            val: vec![1],
            test: (2..n).collect(),
        })
        .unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::test_graphs::path;
    use super::*;

    #[test]
    fn path_norm() {
        let g = path(3);
        let c = gcn_norm(&g, &[1.0, 1.0]).unwrap();
        assert!((c[0] - 1.0 / 6f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn injection_adds_one_edge() {
        let g = path(3);
        let h = g.inject_node(1, &[0.0; 3]).unwrap();
        assert_eq!(h.num_nodes(), 4);
        assert_eq!(h.edges().len(), g.edges().len() + 1);
        assert_eq!(h.degree(1), g.degree(1) + 1);
        assert_eq!(h.degree(3), 1);
        assert_eq!(h.label(3), None);
        assert_eq!(g.num_nodes(), 3);
    }

    #[test]
    fn overlapping_masks_rejected() {
        let mut parts = path(3).into_parts();
        parts.test = vec![0];
        match Graph::new(parts) {
            Err(Error::Validation { rule, .. }) => assert_eq!(rule, "mask-overlap"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn non_binary_values_rejected() {
        let mut parts = path(3).into_parts();
        parts.features.set(0, 1, 0.5);
        assert!(matches!(
            Graph::new(parts),
            Err(Error::Validation { rule: "binary-features", .. })
        ));
    }
}
