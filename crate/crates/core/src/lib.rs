//! Structural classification of developer networks and link recommendation
//! from learned node embeddings.
//!
//! The crate is organised bottom-up:
//!
//! - [`graph`]: immutable undirected graphs, dataset ingestion, synthetic
//!   generators, splitting and block-diagonal batching.
//! - [`features`]: the five per-node structural features and their scaling.
//! - [`nn`]: dense matrices, graph convolution, auxiliary layers, losses and
//!   the Adam optimizer, all with hand-derived backward passes.
//! - [`classify`]: the four graph classifier architectures and their training.
//! - [`forest`]: a random forest over graph embeddings.
//! - [`linkpred`]: a mean-aggregation neighbourhood encoder trained with a
//!   margin loss, and top-k connection recommendation.
//! - [`eval`]: confusion matrices, ROC/AUC, correlations and PCA.

pub mod classify;
pub mod error;
pub mod eval;
pub mod features;
pub mod forest;
pub mod graph;
pub mod linkpred;
pub mod nn;
pub mod rng;

pub use error::{Error, Result};
pub use graph::{Graph, GraphDataset, GraphStats};
pub use nn::Matrix;
