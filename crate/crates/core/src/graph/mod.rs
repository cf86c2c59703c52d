//! Undirected simple graphs and the dataset-level operations built on them.

mod batch;
mod dataset;
mod split;
mod synthetic;

pub use batch::{batch_graphs, BatchedGraph};
pub use dataset::{load_dataset, GraphDataset, MACHINE_LEARNING, WEB_DEVELOPMENT};
pub use split::{split_dataset, DatasetSplit, SplitRatios};
pub use synthetic::{generate_synthetic, gnp, planted_partition, SyntheticKind};

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Immutable undirected simple graph.
///
/// Adjacency lists are sorted and the canonical edge list holds each edge
/// once as `(u, v)` with `u < v`, in lexicographic order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    node_count: usize,
    adjacency: Vec<Vec<usize>>,
    edges: Vec<(usize, usize)>,
}

impl Graph {
    /// Builds a graph from an unordered edge list.
    ///
    /// Duplicate edges and both orientations of the same edge collapse into
    /// one. Self-loops and out-of-range endpoints are rejected.
    pub fn from_edges(node_count: usize, pairs: &[(usize, usize)]) -> Result<Self> {
        let mut canonical = BTreeSet::new();
        for &(u, v) in pairs {
            if u >= node_count || v >= node_count {
                return Err(Error::EndpointOutOfRange { u, v, node_count });
            }
            if u == v {
                return Err(Error::SelfLoop(u));
            }
            canonical.insert((u.min(v), u.max(v)));
        }
        let edges: Vec<_> = canonical.into_iter().collect();
        let mut adjacency = vec![Vec::new(); node_count];
        for &(u, v) in &edges {
            adjacency[u].push(v);
            adjacency[v].push(u);
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        Ok(Graph {
            node_count,
            adjacency,
            edges,
        })
    }

    pub fn empty(node_count: usize) -> Self {
        Graph {
            node_count,
            adjacency: vec![Vec::new(); node_count],
            edges: Vec::new(),
        }
    }

    pub fn complete(n: usize) -> Self {
        let pairs: Vec<_> = (0..n)
            .flat_map(|u| (u + 1..n).map(move |v| (u, v)))
            .collect();
        Self::from_edges(n, &pairs).expect("complete graph edges are valid")
    }

    pub fn path(n: usize) -> Self {
        let pairs: Vec<_> = (1..n).map(|v| (v - 1, v)).collect();
        Self::from_edges(n, &pairs).expect("path edges are valid")
    }

    /// Cycle on `n >= 3` nodes.
    pub fn cycle(n: usize) -> Self {
        assert!(n >= 3, "a simple cycle needs at least 3 nodes");
        let pairs: Vec<_> = (0..n).map(|v| (v, (v + 1) % n)).collect();
        Self::from_edges(n, &pairs).expect("cycle edges are valid")
    }

    /// Star with node 0 at the centre.
    pub fn star(leaves: usize) -> Self {
        let pairs: Vec<_> = (1..=leaves).map(|v| (0, v)).collect();
        Self::from_edges(leaves + 1, &pairs).expect("star edges are valid")
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, u: usize) -> &[usize] {
        &self.adjacency[u]
    }

    pub fn degree(&self, u: usize) -> usize {
        self.adjacency[u].len()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        u < self.node_count && self.adjacency[u].binary_search(&v).is_ok()
    }

    /// Returns the graph with node `i` renamed to `permutation[i]`.
    pub fn relabel(&self, permutation: &[usize]) -> Result<Self> {
        if permutation.len() != self.node_count {
            return Err(Error::ShapeMismatch(format!(
                "permutation has {} entries for {} nodes",
                permutation.len(),
                self.node_count
            )));
        }
        let mut seen = vec![false; self.node_count];
        for &p in permutation {
            if p >= self.node_count || std::mem::replace(&mut seen[p], true) {
                return Err(Error::InvalidParameter(
                    "relabeling is not a permutation".into(),
                ));
            }
        }
        let pairs: Vec<_> = self
            .edges
            .iter()
            .map(|&(u, v)| (permutation[u], permutation[v]))
            .collect();
        Self::from_edges(self.node_count, &pairs)
    }

    /// The subgraph that keeps every node but only the listed edges.
    pub fn with_edges(&self, pairs: &[(usize, usize)]) -> Result<Self> {
        Self::from_edges(self.node_count, pairs)
    }

    pub fn stats(&self) -> GraphStats {
        graph_stats(self)
    }
}

/// Size and connectivity summary of one graph.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraphStats {
    pub node_count: usize,
    pub edge_count: usize,
    pub average_degree: f64,
    pub density: f64,
}

pub fn graph_stats(g: &Graph) -> GraphStats {
    let n = g.node_count();
    let m = g.edge_count();
    let average_degree = if n == 0 {
        0.0
    } else {
        2.0 * m as f64 / n as f64
    };
    let density = if n < 2 {
        0.0
    } else {
        2.0 * m as f64 / (n as f64 * (n as f64 - 1.0))
    };
    GraphStats {
        node_count: n,
        edge_count: m,
        average_degree,
        density,
    }
}
