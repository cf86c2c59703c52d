use crate::graph::Graph;
use crate::{Error, Result};

use super::Matrix;

/// Symmetric-normalised adjacency with self-loops, `D̃^{-1/2} (A + I) D̃^{-1/2}`,
/// stored row-compressed.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedAdjacency {
    node_count: usize,
    row_offsets: Vec<usize>,
    columns: Vec<usize>,
    weights: Vec<f64>,
}

pub fn normalize_adjacency(g: &Graph) -> NormalizedAdjacency {
    let n = g.node_count();
    let inv_sqrt: Vec<f64> = (0..n)
        .map(|u| 1.0 / ((g.degree(u) + 1) as f64).sqrt())
        .collect();
    let mut row_offsets = Vec::with_capacity(n + 1);
    let mut columns = Vec::with_capacity(2 * g.edge_count() + n);
    let mut weights = Vec::with_capacity(2 * g.edge_count() + n);
    row_offsets.push(0);
    for u in 0..n {
        let neighbors = g.neighbors(u);
        let split = neighbors.partition_point(|&v| v < u);
        let row = neighbors[..split]
            .iter()
            .copied()
            .chain(std::iter::once(u))
            .chain(neighbors[split..].iter().copied());
        for v in row {
            columns.push(v);
            weights.push(inv_sqrt[u] * inv_sqrt[v]);
        }
        row_offsets.push(columns.len());
    }
    NormalizedAdjacency {
        node_count: n,
        row_offsets,
        columns,
        weights,
    }
}

impl NormalizedAdjacency {
    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn nnz(&self) -> usize {
        self.columns.len()
    }

    /// `(row, col, weight)` entries in row-major order.
    pub fn triples(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.node_count).flat_map(move |r| {
            (self.row_offsets[r]..self.row_offsets[r + 1])
                .map(move |i| (r, self.columns[i], self.weights[i]))
        })
    }

    /// Block-diagonal union, equal to normalising the disjoint union graph.
    pub fn block_diagonal<'a>(blocks: impl IntoIterator<Item = &'a NormalizedAdjacency>) -> Self {
        let mut out = NormalizedAdjacency {
            node_count: 0,
            row_offsets: vec![0],
            columns: Vec::new(),
            weights: Vec::new(),
        };
        for b in blocks {
            let base = out.node_count;
            let nnz_base = out.columns.len();
            out.columns.extend(b.columns.iter().map(|c| c + base));
            out.weights.extend_from_slice(&b.weights);
            out.row_offsets
                .extend(b.row_offsets[1..].iter().map(|o| o + nnz_base));
            out.node_count += b.node_count;
        }
        out
    }

    pub fn to_dense(&self) -> Matrix {
        let mut m = Matrix::zeros(self.node_count, self.node_count);
        for (r, c, w) in self.triples() {
            m.set(r, c, w);
        }
        m
    }

    /// `Â · x`. Â is symmetric, so this is also `Âᵀ · x`.
    pub fn multiply(&self, x: &Matrix) -> Result<Matrix> {
        if x.rows() != self.node_count {
            return Err(Error::ShapeMismatch(format!(
                "adjacency over {} nodes applied to {} rows",
                self.node_count,
                x.rows()
            )));
        }
        let mut out = Matrix::zeros(x.rows(), x.cols());
        for r in 0..self.node_count {
            for i in self.row_offsets[r]..self.row_offsets[r + 1] {
                let (c, w) = (self.columns[i], self.weights[i]);
                let src = x.row(c);
                for (o, s) in out.row_mut(r).iter_mut().zip(src) {
                    *o += w * s;
                }
            }
        }
        Ok(out)
    }
}
