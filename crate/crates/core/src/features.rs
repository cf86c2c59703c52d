//! Per-node structural features.
//!
//! Column order is fixed: degree, clustering coefficient, betweenness,
//! closeness, PageRank. All are computed on unweighted undirected graphs.

use std::collections::VecDeque;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::graph::Graph;
use crate::nn::Matrix;
use crate::{Error, Result};

pub const FEATURE_COUNT: usize = 5;
pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "degree",
    "clustering",
    "betweenness",
    "closeness",
    "pagerank",
];

pub fn degree(g: &Graph) -> Vec<f64> {
    (0..g.node_count()).map(|u| g.degree(u) as f64).collect()
}

/// Local clustering `2 T(u) / (deg(u) (deg(u) - 1))`, zero below degree 2.
pub fn clustering_coefficient(g: &Graph) -> Vec<f64> {
    (0..g.node_count())
        .map(|u| {
            let nbrs = g.neighbors(u);
            let d = nbrs.len();
            if d < 2 {
                return 0.0;
            }
            let mut links = 0usize;
            for (i, &a) in nbrs.iter().enumerate() {
                // Count each neighbour pair once via the sorted lists.
                links += sorted_intersection_count(&nbrs[i + 1..], g.neighbors(a));
            }
            2.0 * links as f64 / (d * (d - 1)) as f64
        })
        .collect()
}

fn sorted_intersection_count(a: &[usize], b: &[usize]) -> usize {
    let (mut i, mut j, mut count) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                count += 1;
                i += 1;
                j += 1;
            }
        }
    }
    count
}

/// Brandes betweenness, normalised by `(n - 1)(n - 2) / 2`.
pub fn betweenness_centrality(g: &Graph) -> Vec<f64> {
    let n = g.node_count();
    let mut centrality = vec![0.0; n];
    if n < 3 {
        return centrality;
    }
    let mut stack = Vec::with_capacity(n);
    let mut predecessors: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut sigma = vec![0.0f64; n];
    let mut dist = vec![usize::MAX; n];
    let mut delta = vec![0.0f64; n];
    let mut queue = VecDeque::with_capacity(n);

    for s in 0..n {
        predecessors.iter_mut().for_each(Vec::clear);
        sigma.fill(0.0);
        dist.fill(usize::MAX);
        delta.fill(0.0);
        sigma[s] = 1.0;
        dist[s] = 0;
        queue.push_back(s);
        while let Some(v) = queue.pop_front() {
            stack.push(v);
            for &w in g.neighbors(v) {
                if dist[w] == usize::MAX {
                    dist[w] = dist[v] + 1;
                    queue.push_back(w);
                }
                if dist[w] == dist[v] + 1 {
                    sigma[w] += sigma[v];
                    predecessors[w].push(v);
                }
            }
        }
        while let Some(w) = stack.pop() {
            for &v in &predecessors[w] {
                delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w]);
            }
            if w != s {
                centrality[w] += delta[w];
            }
        }
    }
    // Each unordered pair was accumulated from both endpoints.
    let scale = 1.0 / ((n - 1) * (n - 2)) as f64;
    for c in &mut centrality {
        *c *= scale;
    }
    centrality
}

/// Closeness with component scaling: `((r-1)/(n-1)) * ((r-1) / Σ d(u, v))`
/// where `r` is the size of `u`'s component. Isolated nodes score 0.
pub fn closeness_centrality(g: &Graph) -> Vec<f64> {
    let n = g.node_count();
    let mut out = vec![0.0; n];
    if n < 2 {
        return out;
    }
    let mut dist = vec![usize::MAX; n];
    let mut queue = VecDeque::with_capacity(n);
    for (s, slot) in out.iter_mut().enumerate() {
        dist.fill(usize::MAX);
        dist[s] = 0;
        queue.push_back(s);
        let (mut reached, mut total) = (0usize, 0usize);
        while let Some(v) = queue.pop_front() {
            reached += 1;
            total += dist[v];
            for &w in g.neighbors(v) {
                if dist[w] == usize::MAX {
                    dist[w] = dist[v] + 1;
                    queue.push_back(w);
                }
            }
        }
        if total > 0 {
            let r1 = (reached - 1) as f64;
            *slot = (r1 / (n - 1) as f64) * (r1 / total as f64);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PageRankConfig {
    pub damping: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for PageRankConfig {
    fn default() -> Self {
        PageRankConfig {
            damping: 0.85,
            tolerance: 1e-8,
            max_iterations: 200,
        }
    }
}

/// Power iteration on `pr = (1-d)/n + d Σ_{v ∈ N(u)} pr[v]/deg(v)`, with the
/// mass of degree-0 nodes spread uniformly. Stops when the L1 change drops
/// below the tolerance.
pub fn pagerank(g: &Graph, cfg: &PageRankConfig) -> Result<Vec<f64>> {
    let n = g.node_count();
    if n == 0 {
        return Err(Error::Empty("pagerank on a graph without nodes"));
    }
    if !(0.0..=1.0).contains(&cfg.damping) {
        return Err(Error::InvalidParameter(format!(
            "damping {} outside [0, 1]",
            cfg.damping
        )));
    }
    let inv_n = 1.0 / n as f64;
    let mut rank = vec![inv_n; n];
    let mut next = vec![0.0; n];
    let mut residual = f64::INFINITY;
    for _ in 0..cfg.max_iterations {
        let dangling: f64 = (0..n).filter(|&u| g.degree(u) == 0).map(|u| rank[u]).sum();
        let base = (1.0 - cfg.damping) * inv_n + cfg.damping * dangling * inv_n;
        for (u, slot) in next.iter_mut().enumerate() {
            let inflow: f64 = g
                .neighbors(u)
                .iter()
                .map(|&v| rank[v] / g.degree(v) as f64)
                .sum();
            *slot = base + cfg.damping * inflow;
        }
        residual = rank.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut rank, &mut next);
        if residual < cfg.tolerance {
            return Ok(rank);
        }
    }
    Err(Error::NoConvergence {
        iterations: cfg.max_iterations,
        residual,
    })
}

/// Raw `(node_count, 5)` feature matrix of one graph.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeFeatures {
    matrix: Matrix,
}

impl NodeFeatures {
    pub fn from_matrix(matrix: Matrix) -> Result<Self> {
        if matrix.cols() != FEATURE_COUNT {
            return Err(Error::ShapeMismatch(format!(
                "feature matrix needs {FEATURE_COUNT} columns, has {}",
                matrix.cols()
            )));
        }
        Ok(NodeFeatures { matrix })
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> Matrix {
        self.matrix
    }

    pub fn node_count(&self) -> usize {
        self.matrix.rows()
    }
}

pub fn assemble_features(g: &Graph, pagerank_cfg: &PageRankConfig) -> Result<NodeFeatures> {
    let n = g.node_count();
    let columns = [
        degree(g),
        clustering_coefficient(g),
        betweenness_centrality(g),
        closeness_centrality(g),
        if n == 0 {
            Vec::new()
        } else {
            pagerank(g, pagerank_cfg)?
        },
    ];
    let mut matrix = Matrix::zeros(n, FEATURE_COUNT);
    for (c, column) in columns.iter().enumerate() {
        for (r, &v) in column.iter().enumerate() {
            matrix.set(r, c, v);
        }
    }
    Ok(NodeFeatures { matrix })
}

/// Features of every graph in a dataset, computed in parallel.
pub fn dataset_features(
    graphs: &[Graph],
    pagerank_cfg: &PageRankConfig,
) -> Result<Vec<NodeFeatures>> {
    use rayon::prelude::*;
    graphs
        .par_iter()
        .map(|g| assemble_features(g, pagerank_cfg))
        .collect()
}

/// Per-column z-score fitted on training nodes.
///
/// Columns whose standard deviation is below `1e-12` are only centred.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureScaler {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

const MIN_STD: f64 = 1e-12;

impl FeatureScaler {
    /// Fits on every node row of the given (training) graphs, pooled.
    pub fn fit<'a>(train: impl IntoIterator<Item = &'a NodeFeatures>) -> Result<Self> {
        let mut count = 0usize;
        let mut mean = vec![0.0; FEATURE_COUNT];
        let mut m2 = [0.0; FEATURE_COUNT];
        // Welford keeps the pooled variance stable over ~10^6 rows.
        for f in train {
            for row in f.matrix.iter_rows() {
                count += 1;
                for c in 0..FEATURE_COUNT {
                    let d = row[c] - mean[c];
                    mean[c] += d / count as f64;
                    m2[c] += d * (row[c] - mean[c]);
                }
            }
        }
        if count == 0 {
            return Err(Error::Empty("feature scaler training rows"));
        }
        let std = m2.iter().map(|s| (s / count as f64).sqrt()).collect();
        Ok(FeatureScaler { mean, std })
    }

    pub fn identity() -> Self {
        FeatureScaler {
            mean: vec![0.0; FEATURE_COUNT],
            std: vec![1.0; FEATURE_COUNT],
        }
    }

    pub fn transform(&self, f: &NodeFeatures) -> NodeFeatures {
        let mut matrix = f.matrix.clone();
        for r in 0..matrix.rows() {
            for (c, v) in matrix.row_mut(r).iter_mut().enumerate() {
                *v -= self.mean[c];
                if self.std[c] >= MIN_STD {
                    *v /= self.std[c];
                }
            }
        }
        NodeFeatures { matrix }
    }
}

/// Writes `graph_id,node,degree,...,pagerank` rows.
pub fn write_features_csv<'a, W: Write>(
    out: W,
    graphs: impl IntoIterator<Item = (u64, &'a NodeFeatures)>,
) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::parse("<features csv>", e);
    let mut header = vec!["graph_id", "node"];
    header.extend(FEATURE_NAMES);
    writer.write_record(&header).map_err(csv_err)?;
    for (id, f) in graphs {
        for (node, row) in f.matrix.iter_rows().enumerate() {
            let mut record = vec![id.to_string(), node.to_string()];
            record.extend(row.iter().map(|v| v.to_string()));
            writer.write_record(&record).map_err(csv_err)?;
        }
    }
    writer.flush().map_err(|e| Error::io("<features csv>", e))
}
