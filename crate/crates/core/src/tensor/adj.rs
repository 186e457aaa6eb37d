use crate::error::{Error, Result};

/// Undirected sparse adjacency whose edge weights live on a tape as an
/// `E x 1` column, so gradients can flow to every edge.
///
/// Each pair is stored once and aggregated in both directions. Optional
/// self-loops carry a fixed weight of 1 and are appended after the edges in
/// any per-entry coefficient vector (see [`SparseWeightedAdj::num_entries`]).
#[derive(Debug, Clone, PartialEq)]
pub struct SparseWeightedAdj {
    n: usize,
    edges: Vec<(usize, usize)>,
    self_loops: bool,
    degree_offset: Vec<f64>,
}

impl SparseWeightedAdj {
    pub fn new(n: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        let mut seen = std::collections::HashSet::with_capacity(edges.len());
        for &(u, v) in &edges {
            if u >= n || v >= n {
                return Err(Error::Index(format!("edge ({u}, {v}) with {n} nodes")));
            }
            if u == v {
                return Err(Error::validation(
                    "no-explicit-self-loop",
                    format!("edge ({u}, {v})"),
                ));
            }
            if !seen.insert((u.min(v), u.max(v))) {
                return Err(Error::validation(
                    "no-duplicate-edge",
                    format!("edge ({u}, {v}) appears twice"),
                ));
            }
        }
        Ok(Self {
            n,
            edges,
            self_loops: false,
            degree_offset: vec![0.0; n],
        })
    }

    /// Adds an implicit weight-1 self-loop on every node.
    pub fn with_self_loops(mut self) -> Self {
        self.self_loops = true;
        self
    }

    /// Extra weighted degree per node contributed by edges that are not part
    /// of this adjacency (used when aggregating on an extracted subgraph).
    pub fn with_degree_offset(mut self, offset: Vec<f64>) -> Result<Self> {
        if offset.len() != self.n {
            return Err(Error::shape(
                "degree_offset",
                format!("{} offsets for {} nodes", offset.len(), self.n),
            ));
        }
        self.degree_offset = offset;
        Ok(self)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    #[inline]
    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    #[inline]
    pub fn has_self_loops(&self) -> bool {
        self.self_loops
    }

    #[inline]
    pub fn degree_offset(&self) -> &[f64] {
        &self.degree_offset
    }

    /// Number of aggregation entries: edges, then one self-loop per node.
    pub fn num_entries(&self) -> usize {
        self.edges.len() + if self.self_loops { self.n } else { 0 }
    }

    /// Self-loop-augmented weighted degree `1 + offset + sum of incident weights`.
    pub fn augmented_degrees(&self, weights: &[f64]) -> Vec<f64> {
        let mut deg: Vec<f64> = self
            .degree_offset
            .iter()
            .map(|o| o + if self.self_loops { 1.0 } else { 0.0 })
            .collect();
        for (&(u, v), &w) in self.edges.iter().zip(weights) {
            deg[u] += w;
            deg[v] += w;
        }
        deg
    }
}
