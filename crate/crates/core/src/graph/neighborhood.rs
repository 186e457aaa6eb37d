use std::collections::VecDeque;

use crate::error::{Error, Result};

/// Hop count between two nodes, or an explicit marker for different components.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Distance {
    Hops(usize),
    Unreachable,
}

impl Distance {
    pub fn hops(self) -> Option<usize> {
        match self {
            Distance::Hops(d) => Some(d),
            Distance::Unreachable => None,
        }
    }
}

/// CSR adjacency lists; neighbours of each node are sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NeighborhoodIndex {
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
}

impl NeighborhoodIndex {
    /// Builds the symmetric index from an undirected edge list (each pair once).
    pub fn new(n: usize, edges: &[(usize, usize)]) -> Self {
        let mut degree = vec![0usize; n];
        for &(u, v) in edges {
            degree[u] += 1;
            degree[v] += 1;
        }
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        for d in &degree {
            offsets.push(offsets.last().unwrap() + d);
        }
        let mut fill = offsets[..n].to_vec();
        let mut neighbors = vec![0; offsets[n]];
        for &(u, v) in edges {
            neighbors[fill[u]] = v;
            fill[u] += 1;
            neighbors[fill[v]] = u;
            fill[v] += 1;
        }
        for v in 0..n {
            neighbors[offsets[v]..offsets[v + 1]].sort_unstable();
        }
        Self { offsets, neighbors }
    }

    pub fn num_nodes(&self) -> usize {
        self.offsets.len() - 1
    }

    #[inline]
    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.neighbors[self.offsets[v]..self.offsets[v + 1]]
    }

    #[inline]
    pub fn degree(&self, v: usize) -> usize {
        self.offsets[v + 1] - self.offsets[v]
    }

    fn check(&self, v: usize) -> Result<()> {
        if v >= self.num_nodes() {
            return Err(Error::Index(format!("node {v} of {}", self.num_nodes())));
        }
        Ok(())
    }

    /// BFS from `v` up to depth `k`, returning `(node, distance)` pairs in
    /// visiting order, `v` first.
    pub fn bfs_within(&self, v: usize, k: usize) -> Result<Vec<(usize, usize)>> {
        self.check(v)?;
        let mut dist = std::collections::HashMap::new();
        dist.insert(v, 0usize);
        let mut order = vec![(v, 0)];
        let mut queue = VecDeque::from([v]);
        while let Some(x) = queue.pop_front() {
            let d = dist[&x];
            if d == k {
                continue;
            }
            for &y in self.neighbors(x) {
                if !dist.contains_key(&y) {
                    dist.insert(y, d + 1);
                    order.push((y, d + 1));
                    queue.push_back(y);
                }
            }
        }
        Ok(order)
    }

    /// All nodes `u != v` within `k` hops, sorted ascending.
    pub fn k_hop(&self, v: usize, k: usize) -> Result<Vec<usize>> {
        let mut out: Vec<usize> = self
            .bfs_within(v, k)?
            .into_iter()
            .skip(1)
            .map(|(u, _)| u)
            .collect();
        out.sort_unstable();
        Ok(out)
    }

    pub fn distance(&self, u: usize, v: usize) -> Result<Distance> {
        self.check(u)?;
        self.check(v)?;
        if u == v {
            return Ok(Distance::Hops(0));
        }
        let mut seen = vec![false; self.num_nodes()];
        seen[u] = true;
        let mut frontier = vec![u];
        let mut d = 0;
        while !frontier.is_empty() {
            d += 1;
            let mut next = Vec::new();
            for x in frontier {
                for &y in self.neighbors(x) {
                    if y == v {
                        return Ok(Distance::Hops(d));
                    }
                    if !seen[y] {
                        seen[y] = true;
                        next.push(y);
                    }
                }
            }
            frontier = next;
        }
        Ok(Distance::Unreachable)
    }
}
