use std::collections::HashMap;
use std::sync::Arc;

use super::Graph;
use crate::error::{Error, Result};
use crate::tensor::{DenseMatrix, SparseWeightedAdj};

/// Induced subgraph of every node within `radius` hops of a center node.
///
/// Each local node carries a degree offset equal to the number of its
/// full-graph edges that fall outside the subgraph, so symmetric GCN
/// normalization matches the full graph. With `radius >= L` the center's
/// output from an `L`-layer model is identical to the full-graph output.
#[derive(Debug, Clone)]
pub struct Subgraph {
    nodes: Vec<usize>,
    hops: Vec<usize>,
    local: HashMap<usize, usize>,
    adj: Arc<SparseWeightedAdj>,
}

impl Subgraph {
    pub fn receptive(g: &Graph, center: usize, radius: usize) -> Result<Self> {
        let order = g.index().bfs_within(center, radius)?;
        let nodes: Vec<usize> = order.iter().map(|&(u, _)| u).collect();
        let hops = order.iter().map(|&(_, d)| d).collect();
        let local: HashMap<usize, usize> = nodes.iter().enumerate().map(|(i, &u)| (u, i)).collect();
        let mut edges = Vec::new();
        let mut offset = vec![0.0; nodes.len()];
        for (i, &u) in nodes.iter().enumerate() {
            for &w in g.neighbors(u) {
                match local.get(&w) {
                    Some(&j) if j > i => edges.push((i, j)),
                    Some(_) => {}
                    None => offset[i] += 1.0,
                }
            }
        }
        let adj = SparseWeightedAdj::new(nodes.len(), edges)?
            .with_self_loops()
            .with_degree_offset(offset)?;
        Ok(Self {
            nodes,
            hops,
            local,
            adj: Arc::new(adj),
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Global ids by local index; the center is local 0.
    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    /// Hop distance from the center, by local index.
    pub fn hops(&self) -> &[usize] {
        &self.hops
    }

    pub fn local_of(&self, global: usize) -> Option<usize> {
        self.local.get(&global).copied()
    }

    pub fn require_local(&self, global: usize) -> Result<usize> {
        self.local_of(global)
            .ok_or_else(|| Error::Index(format!("node {global} is outside the subgraph")))
    }

    pub fn adjacency(&self) -> &Arc<SparseWeightedAdj> {
        &self.adj
    }

    /// Rows of a full-graph matrix restricted to the subgraph, in local order.
    pub fn restrict(&self, full: &DenseMatrix) -> DenseMatrix {
        full.select_rows(&self.nodes)
    }

    /// Row-major rows of `full` for the subgraph nodes that exist in it
    /// (ids below `full.rows()`), in local order.
    pub fn restrict_existing(&self, full: &DenseMatrix) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.nodes.len() * full.cols());
        for &u in self.nodes.iter().filter(|&&u| u < full.rows()) {
            out.extend_from_slice(full.row(u));
        }
        out
    }

    /// Adds a node joined only to local node `neighbor`; its global id is
    /// `global_id` and its local index is the previous length.
    pub fn with_injected(&self, neighbor: usize, global_id: usize) -> Result<Self> {
        let n = self.len();
        if neighbor >= n {
            return Err(Error::Index(format!("local node {neighbor} of {n}")));
        }
        let mut edges = self.adj.edges().to_vec();
        edges.push((neighbor, n));
        let mut offset = self.adj.degree_offset().to_vec();
        offset.push(0.0);
        let adj = SparseWeightedAdj::new(n + 1, edges)?
            .with_self_loops()
            .with_degree_offset(offset)?;
        let mut out = self.clone();
        out.nodes.push(global_id);
        out.hops.push(self.hops[neighbor] + 1);
        out.local.insert(global_id, n);
        out.adj = Arc::new(adj);
        Ok(out)
    }
}
