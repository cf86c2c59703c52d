use crate::features::{
    assemble_features, dataset_features, FeatureScaler, NodeFeatures, PageRankConfig,
};
use crate::graph::{DatasetSplit, Graph, GraphDataset};
use crate::nn::{normalize_adjacency, Matrix, NormalizedAdjacency};
use crate::{Error, Result};

/// Scaled features and normalised adjacency of every graph, ready to batch.
#[derive(Debug, Clone)]
pub struct ModelInput {
    adjacency: Vec<NormalizedAdjacency>,
    features: Vec<Matrix>,
    labels: Vec<u8>,
}

impl ModelInput {
    pub fn new(
        graphs: &[Graph],
        features: &[NodeFeatures],
        scaler: &FeatureScaler,
        labels: &[u8],
    ) -> Result<Self> {
        if graphs.len() != features.len() || graphs.len() != labels.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} graphs, {} feature matrices, {} labels",
                graphs.len(),
                features.len(),
                labels.len()
            )));
        }
        for (i, (g, f)) in graphs.iter().zip(features).enumerate() {
            if g.node_count() != f.node_count() {
                return Err(Error::ShapeMismatch(format!(
                    "graph {i} has {} nodes but {} feature rows",
                    g.node_count(),
                    f.node_count()
                )));
            }
        }
        Ok(ModelInput {
            adjacency: graphs.iter().map(normalize_adjacency).collect(),
            features: features
                .iter()
                .map(|f| scaler.transform(f).into_matrix())
                .collect(),
            labels: labels.to_vec(),
        })
    }

    /// Raw (unscaled) features; convenient for small fixtures.
    pub fn unscaled(graphs: &[Graph], labels: &[u8]) -> Result<Self> {
        let cfg = PageRankConfig::default();
        let features = graphs
            .iter()
            .map(|g| assemble_features(g, &cfg))
            .collect::<Result<Vec<_>>>()?;
        Self::new(graphs, &features, &FeatureScaler::identity(), labels)
    }

    /// Computes features for the whole dataset and scales them with
    /// statistics from the training split only.
    pub fn prepare(
        ds: &GraphDataset,
        split: &DatasetSplit,
        pagerank_cfg: &PageRankConfig,
    ) -> Result<(Self, FeatureScaler)> {
        let raw = dataset_features(ds.graphs(), pagerank_cfg)?;
        let scaler = FeatureScaler::fit(split.train.iter().map(|&i| &raw[i]))?;
        let input = Self::new(ds.graphs(), &raw, &scaler, ds.labels())?;
        Ok((input, scaler))
    }

    /// Like [`ModelInput::prepare`] with a previously fitted scaler.
    pub fn with_scaler(
        ds: &GraphDataset,
        scaler: &FeatureScaler,
        pagerank_cfg: &PageRankConfig,
    ) -> Result<Self> {
        let raw = dataset_features(ds.graphs(), pagerank_cfg)?;
        Self::new(ds.graphs(), &raw, scaler, ds.labels())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn features(&self, index: usize) -> &Matrix {
        &self.features[index]
    }

    /// Block-diagonal batch of the listed graphs, in the given order.
    pub fn batch(&self, indices: &[usize]) -> GraphBatch {
        let adjacency =
            NormalizedAdjacency::block_diagonal(indices.iter().map(|&i| &self.adjacency[i]));
        let parts: Vec<Matrix> = indices.iter().map(|&i| self.features[i].clone()).collect();
        let features = Matrix::vstack(&parts).expect("all feature matrices share a width");
        let mut offsets = Vec::with_capacity(indices.len() + 1);
        let mut membership = Vec::with_capacity(features.rows());
        offsets.push(0);
        for (slot, &i) in indices.iter().enumerate() {
            let n = self.features[i].rows();
            membership.extend(std::iter::repeat_n(slot, n));
            offsets.push(offsets[slot] + n);
        }
        GraphBatch {
            adjacency,
            features,
            membership,
            offsets,
            targets: indices.iter().map(|&i| f64::from(self.labels[i])).collect(),
        }
    }
}

/// A minibatch of graphs as one block-diagonal graph.
#[derive(Debug, Clone)]
pub struct GraphBatch {
    pub adjacency: NormalizedAdjacency,
    pub features: Matrix,
    pub membership: Vec<usize>,
    pub offsets: Vec<usize>,
    pub targets: Vec<f64>,
}

impl GraphBatch {
    pub fn graph_count(&self) -> usize {
        self.offsets.len() - 1
    }
}
