use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Graph, GraphDataset};
use crate::rng;
use crate::{Error, Result};

/// Random dataset families used as desk-scale fixtures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SyntheticKind {
    /// Erdős–Rényi graphs with a shared edge probability; labels alternate.
    UniformRandom {
        graphs: usize,
        min_nodes: usize,
        max_nodes: usize,
        p: f64,
    },
    /// Class 0 graphs use edge probability `p0`, class 1 graphs `p1`.
    /// Labels alternate 0, 1, 0, ... so the classes stay balanced.
    TwoDensityClasses {
        graphs: usize,
        min_nodes: usize,
        max_nodes: usize,
        p0: f64,
        p1: f64,
    },
    /// Stochastic block model graphs, all labelled 0.
    PlantedPartition {
        graphs: usize,
        blocks: usize,
        block_size: usize,
        p_in: f64,
        p_out: f64,
    },
}

fn check_probability(name: &str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "{name} = {p} is not a probability"
        )))
    }
}

fn check_nodes(min: usize, max: usize) -> Result<()> {
    if min < 2 || max < min {
        return Err(Error::InvalidParameter(format!(
            "node range [{min}, {max}] must satisfy 2 <= min <= max"
        )));
    }
    Ok(())
}

pub fn gnp<R: Rng>(n: usize, p: f64, rng: &mut R) -> Graph {
    let mut pairs = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.random::<f64>() < p {
                pairs.push((u, v));
            }
        }
    }
    Graph::from_edges(n, &pairs).expect("generated pairs are in range")
}

/// Returns the graph and the block index of every node. Nodes are laid
/// out block by block: node `i` belongs to block `i / block_size`.
pub fn planted_partition<R: Rng>(
    blocks: usize,
    block_size: usize,
    p_in: f64,
    p_out: f64,
    rng: &mut R,
) -> (Graph, Vec<usize>) {
    let n = blocks * block_size;
    let block: Vec<usize> = (0..n).map(|v| v / block_size.max(1)).collect();
    let mut pairs = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            let p = if block[u] == block[v] { p_in } else { p_out };
            if rng.random::<f64>() < p {
                pairs.push((u, v));
            }
        }
    }
    let g = Graph::from_edges(n, &pairs).expect("generated pairs are in range");
    (g, block)
}

pub fn generate_synthetic(kind: &SyntheticKind, seed: u64) -> Result<GraphDataset> {
    let mut rng = rng::from_seed(seed);
    let (graphs, labels): (Vec<Graph>, Vec<u8>) = match *kind {
        SyntheticKind::UniformRandom {
            graphs,
            min_nodes,
            max_nodes,
            p,
        } => {
            check_probability("p", p)?;
            check_nodes(min_nodes, max_nodes)?;
            (0..graphs)
                .map(|i| {
                    let n = rng.random_range(min_nodes..=max_nodes);
                    (gnp(n, p, &mut rng), (i % 2) as u8)
                })
                .unzip()
        }
        SyntheticKind::TwoDensityClasses {
            graphs,
            min_nodes,
            max_nodes,
            p0,
            p1,
        } => {
            check_probability("p0", p0)?;
            check_probability("p1", p1)?;
            check_nodes(min_nodes, max_nodes)?;
            (0..graphs)
                .map(|i| {
                    let label = (i % 2) as u8;
                    let n = rng.random_range(min_nodes..=max_nodes);
                    let p = if label == 0 { p0 } else { p1 };
                    (gnp(n, p, &mut rng), label)
                })
                .unzip()
        }
        SyntheticKind::PlantedPartition {
            graphs,
            blocks,
            block_size,
            p_in,
            p_out,
        } => {
            check_probability("p_in", p_in)?;
            check_probability("p_out", p_out)?;
            if blocks == 0 || blocks * block_size < 2 {
                return Err(Error::InvalidParameter(
                    "planted partition needs at least two nodes".into(),
                ));
            }
            (0..graphs)
                .map(|_| {
                    (
                        planted_partition(blocks, block_size, p_in, p_out, &mut rng).0,
                        0u8,
                    )
                })
                .unzip()
        }
    };
    let ids = (0..graphs.len() as u64).collect();
    GraphDataset::new(graphs, labels, ids)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extreme_probabilities() {
        let mut rng = rng::from_seed(1);
        assert_eq!(gnp(4, 1.0, &mut rng), Graph::complete(4));
        assert_eq!(gnp(6, 0.0, &mut rng).edge_count(), 0);
    }

    #[test]
    fn invalid_probability() {
        let kind = SyntheticKind::UniformRandom {
            graphs: 3,
            min_nodes: 4,
            max_nodes: 4,
            p: 1.5,
        };
        assert!(matches!(
            generate_synthetic(&kind, 0),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn deterministic_for_seed() {
        let kind = SyntheticKind::TwoDensityClasses {
            graphs: 10,
            min_nodes: 5,
            max_nodes: 9,
            p0: 0.1,
            p1: 0.5,
        };
        assert_eq!(
            generate_synthetic(&kind, 3).unwrap(),
            generate_synthetic(&kind, 3).unwrap()
        );
    }

    #[test]
    fn two_density_classes_differ_in_density() {
        let kind = SyntheticKind::TwoDensityClasses {
            graphs: 200,
            min_nodes: 55,
            max_nodes: 65,
            p0: 0.05,
            p1: 0.3,
        };
        let ds = generate_synthetic(&kind, 11).unwrap();
        let mean = |class: u8| {
            let ds_iter = ds.graphs().iter().zip(ds.labels());
            let vals: Vec<f64> = ds_iter
                .filter(|(_, &l)| l == class)
                .map(|(g, _)| g.stats().density)
                .collect();
            assert_eq!(vals.len(), 100);
            vals.iter().sum::<f64>() / vals.len() as f64
        };
        let (d0, d1) = (mean(0), mean(1));
        assert!(d1 > d0, "{d1} <= {d0}");
        assert!((d0 - 0.05).abs() < 0.01 && (d1 - 0.3).abs() < 0.02);
    }

    #[test]
    fn planted_partition_blocks() {
        let mut rng = rng::from_seed(5);
        let (g, block) = planted_partition(2, 10, 1.0, 0.0, &mut rng);
        assert_eq!(g.edge_count(), 2 * 45);
        assert!(g.edges().iter().all(|&(u, v)| block[u] == block[v]));
    }
}
