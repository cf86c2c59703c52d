//! Run configurations. Each subcommand resolves a config from an optional
//! JSON file plus flags and records the result as `resolved_config.json`.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use stargaze::classify::ClassifierConfig;
use stargaze::forest::ForestConfig;
use stargaze::graph::{SplitRatios, SyntheticKind};
use stargaze::linkpred::{LinkPredConfig, RecommendConfig};

use crate::output::Failure;

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StatsConfig {
    pub edges: Option<PathBuf>,
    pub labels: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub edges: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    /// Shuffled with `classifier.seed`.
    pub split: SplitRatios,
    pub classifier: ClassifierConfig,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HybridConfig {
    pub checkpoint: Option<PathBuf>,
    /// Dataset overrides; by default the paths stored in the checkpoint.
    pub edges: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub forest: ForestConfig,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RecommendRunConfig {
    pub edges: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub graph_id: Option<u64>,
    pub linkpred: LinkPredConfig,
    pub recommend: RecommendConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerateConfig {
    pub dataset: SyntheticKind,
    pub seed: u64,
}

impl Default for GenerateConfig {
    fn default() -> Self {
        GenerateConfig {
            dataset: two_density_classes(200),
            seed: 0,
        }
    }
}

pub fn two_density_classes(graphs: usize) -> SyntheticKind {
    SyntheticKind::TwoDensityClasses {
        graphs,
        min_nodes: 30,
        max_nodes: 80,
        p0: 0.05,
        p1: 0.3,
    }
}

pub fn planted_partition(graphs: usize) -> SyntheticKind {
    SyntheticKind::PlantedPartition {
        graphs,
        blocks: 2,
        block_size: 50,
        p_in: 0.3,
        p_out: 0.02,
    }
}

pub fn uniform_random(graphs: usize) -> SyntheticKind {
    SyntheticKind::UniformRandom {
        graphs,
        min_nodes: 10,
        max_nodes: 40,
        p: 0.1,
    }
}

/// Training provenance stored in checkpoint metadata.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainMetadata {
    pub edges: PathBuf,
    pub labels: PathBuf,
    pub split: SplitRatios,
    pub split_seed: u64,
}

pub fn load<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T, Failure> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::usage(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| Failure::usage(format!("invalid config {}: {e}", path.display())))
}

pub fn require<'a, T>(value: &'a Option<T>, name: &str) -> Result<&'a T, Failure> {
    value
        .as_ref()
        .ok_or_else(|| Failure::usage(format!("--{name} is required (flag or config file)")))
}
