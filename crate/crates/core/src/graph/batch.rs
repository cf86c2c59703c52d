use super::Graph;
use crate::{Error, Result};

/// Disjoint union of several graphs with a block-diagonal adjacency.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchedGraph {
    pub graph: Graph,
    /// Source graph index of every node of the union.
    pub membership: Vec<usize>,
    /// `offsets[i]` is the first union node of graph `i`; the last entry is
    /// the total node count.
    pub offsets: Vec<usize>,
}

impl BatchedGraph {
    pub fn graph_count(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn node_range(&self, member: usize) -> std::ops::Range<usize> {
        self.offsets[member]..self.offsets[member + 1]
    }

    /// Recovers member graph `i` with its original node ids.
    pub fn member(&self, member: usize) -> Graph {
        let range = self.node_range(member);
        let pairs: Vec<_> = self
            .graph
            .edges()
            .iter()
            .filter(|&&(u, _)| range.contains(&u))
            .map(|&(u, v)| (u - range.start, v - range.start))
            .collect();
        Graph::from_edges(range.len(), &pairs).expect("member edges stay within their block")
    }
}

pub fn batch_graphs<'a, I>(graphs: I) -> Result<BatchedGraph>
where
    I: IntoIterator<Item = &'a Graph>,
{
    let mut offsets = vec![0];
    let mut membership = Vec::new();
    let mut pairs = Vec::new();
    for (i, g) in graphs.into_iter().enumerate() {
        let base = *offsets.last().unwrap();
        pairs.extend(g.edges().iter().map(|&(u, v)| (u + base, v + base)));
        membership.extend(std::iter::repeat_n(i, g.node_count()));
        offsets.push(base + g.node_count());
    }
    if offsets.len() == 1 {
        return Err(Error::Empty("batch"));
    }
    let graph = Graph::from_edges(*offsets.last().unwrap(), &pairs)?;
    Ok(BatchedGraph {
        graph,
        membership,
        offsets,
    })
}
