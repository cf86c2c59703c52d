//! Random forest of Gini decision trees.
//!
//! Each tree is fit on a bootstrap sample of the training rows drawn from its
//! own random stream, so fitting runs in parallel and still reproduces
//! bit-for-bit under a fixed seed.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::nn::Matrix;
use crate::rng::{self, streams, SeededRng};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestConfig {
    pub n_trees: usize,
    /// `None` grows until leaves are pure or too small to split.
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    /// Candidate features per split; `None` means `ceil(sqrt(d))`.
    pub features_per_split: Option<usize>,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_trees: 100,
            max_depth: None,
            min_samples_leaf: 1,
            features_per_split: None,
            seed: 0,
        }
    }
}

impl ForestConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::InvalidParameter("n_trees must be at least 1".into()));
        }
        if self.min_samples_leaf == 0 {
            return Err(Error::InvalidParameter(
                "min_samples_leaf must be at least 1".into(),
            ));
        }
        if self.features_per_split == Some(0) {
            return Err(Error::InvalidParameter(
                "features_per_split must be at least 1".into(),
            ));
        }
        Ok(())
    }

    fn candidates(&self, dimension: usize) -> usize {
        self.features_per_split
            .unwrap_or_else(|| (dimension as f64).sqrt().ceil() as usize)
            .clamp(1, dimension.max(1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum TreeNode {
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        probability: f64,
    },
}

/// Binary tree stored as a node array; the root is node 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    nodes: Vec<TreeNode>,
}

impl DecisionTree {
    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[TreeNode], i: usize) -> usize {
            match nodes[i] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => {
                    1 + walk(nodes, left).max(walk(nodes, right))
                }
            }
        }
        walk(&self.nodes, 0)
    }

    /// Class-1 probability of the leaf reached by `row`.
    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                TreeNode::Leaf { probability } => return probability,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if row[feature] <= threshold {
                        left
                    } else {
                        right
                    };
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    dimension: usize,
    trees: Vec<DecisionTree>,
}

struct Frame {
    node: usize,
    samples: Vec<usize>,
    depth: usize,
}

struct Best {
    score: f64,
    feature: usize,
    threshold: f64,
}

impl Best {
    fn beaten_by(&self, score: f64, feature: usize, threshold: f64) -> bool {
        (score, feature, threshold)
            .partial_cmp(&(self.score, self.feature, self.threshold))
            .is_some_and(|o| o.is_lt())
    }
}

/// Weighted Gini impurity (times two, unnormalised) of a split with
/// `positives` class-1 rows among `count`.
fn gini_mass(positives: usize, count: usize) -> f64 {
    if count == 0 {
        return 0.0;
    }
    let (p, n) = (positives as f64, count as f64);
    p * (n - p) / n
}

fn best_split_on(
    x: &Matrix,
    y: &[u8],
    samples: &[usize],
    feature: usize,
    min_leaf: usize,
    best: &mut Option<Best>,
) -> bool {
    let mut order: Vec<(f64, u8)> = samples.iter().map(|&s| (x.get(s, feature), y[s])).collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0));
    if order[0].0 == order[order.len() - 1].0 {
        return false;
    }
    let total_pos = order.iter().filter(|o| o.1 == 1).count();
    let n = order.len();
    let mut left_pos = 0;
    for i in 0..n - 1 {
        left_pos += order[i].1 as usize;
        let (lo, hi) = (order[i].0, order[i + 1].0);
        if lo == hi {
            continue;
        }
        let left = i + 1;
        if left < min_leaf || n - left < min_leaf {
            continue;
        }
        let score = gini_mass(left_pos, left) + gini_mass(total_pos - left_pos, n - left);
        let mut threshold = lo + (hi - lo) / 2.0;
        if threshold >= hi {
            threshold = lo;
        }
        if best
            .as_ref()
            .is_none_or(|b| b.beaten_by(score, feature, threshold))
        {
            *best = Some(Best {
                score,
                feature,
                threshold,
            });
        }
    }
    true
}

fn fit_tree(x: &Matrix, y: &[u8], cfg: &ForestConfig, rng: &mut SeededRng) -> DecisionTree {
    let n = x.rows();
    let d = x.cols();
    let mtry = cfg.candidates(d);
    let bootstrap: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
    let mut nodes = vec![TreeNode::Leaf { probability: 0.0 }];
    let mut stack = vec![Frame {
        node: 0,
        samples: bootstrap,
        depth: 0,
    }];
    let mut features: Vec<usize> = (0..d).collect();

    while let Some(Frame {
        node,
        samples,
        depth,
    }) = stack.pop()
    {
        let positives = samples.iter().filter(|&&s| y[s] == 1).count();
        let probability = positives as f64 / samples.len() as f64;
        let splittable = positives != 0
            && positives != samples.len()
            && samples.len() >= 2 * cfg.min_samples_leaf
            && cfg.max_depth.is_none_or(|m| depth < m);
        nodes[node] = TreeNode::Leaf { probability };
        if !splittable {
            continue;
        }

        // Visit features in random order until `mtry` non-constant ones have
        // been examined.
        features.shuffle(rng);
        let mut best = None;
        let mut examined = 0;
        for &f in &features {
            if best_split_on(x, y, &samples, f, cfg.min_samples_leaf, &mut best) {
                examined += 1;
                if examined == mtry {
                    break;
                }
            }
        }
        let Some(Best {
            feature, threshold, ..
        }) = best
        else {
            continue;
        };
        let (left_samples, right_samples): (Vec<usize>, Vec<usize>) = samples
            .iter()
            .partition(|&&s| x.get(s, feature) <= threshold);
        let left = nodes.len();
        let right = left + 1;
        nodes.push(TreeNode::Leaf { probability: 0.0 });
        nodes.push(TreeNode::Leaf { probability: 0.0 });
        nodes[node] = TreeNode::Split {
            feature,
            threshold,
            left,
            right,
        };
        stack.push(Frame {
            node: right,
            samples: right_samples,
            depth: depth + 1,
        });
        stack.push(Frame {
            node: left,
            samples: left_samples,
            depth: depth + 1,
        });
    }
    DecisionTree { nodes }
}

/// Fits `cfg.n_trees` trees in parallel, tree `i` drawing from stream
/// `(cfg.seed, i)`.
pub fn fit_forest(x: &Matrix, y: &[u8], cfg: &ForestConfig) -> Result<RandomForest> {
    cfg.validate()?;
    if x.rows() == 0 {
        return Err(Error::Empty("forest training set"));
    }
    if x.rows() != y.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} rows but {} labels",
            x.rows(),
            y.len()
        )));
    }
    if x.cols() == 0 {
        return Err(Error::ShapeMismatch(
            "training matrix has no columns".into(),
        ));
    }
    if let Some(bad) = y.iter().find(|&&l| l > 1) {
        return Err(Error::InvalidParameter(format!(
            "label {bad} is not binary"
        )));
    }
    x.ensure_finite("forest training matrix")?;
    let trees = (0..cfg.n_trees)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng::substream(cfg.seed, streams::TREE_BASE + i as u64);
            fit_tree(x, y, cfg, &mut rng)
        })
        .collect();
    Ok(RandomForest {
        dimension: x.cols(),
        trees,
    })
}

impl RandomForest {
    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn trees(&self) -> &[DecisionTree] {
        &self.trees
    }

    fn check(&self, x: &Matrix) -> Result<()> {
        if x.cols() != self.dimension {
            return Err(Error::ShapeMismatch(format!(
                "forest was fit on {} features, got {}",
                self.dimension,
                x.cols()
            )));
        }
        Ok(())
    }

    /// Per-tree probabilities, one vector per tree.
    pub fn tree_probabilities(&self, x: &Matrix) -> Result<Vec<Vec<f64>>> {
        self.check(x)?;
        Ok(self
            .trees
            .iter()
            .map(|t| x.iter_rows().map(|r| t.predict(r)).collect())
            .collect())
    }

    /// Mean of the per-tree leaf probabilities for every row.
    pub fn predict_proba(&self, x: &Matrix) -> Result<Vec<f64>> {
        self.check(x)?;
        let n = self.trees.len() as f64;
        Ok(x.iter_rows()
            .map(|r| self.trees.iter().map(|t| t.predict(r)).sum::<f64>() / n)
            .collect())
    }

    /// Class labels at threshold 0.5.
    pub fn predict(&self, x: &Matrix) -> Result<Vec<u8>> {
        Ok(self
            .predict_proba(x)?
            .into_iter()
            .map(|p| u8::from(p >= 0.5))
            .collect())
    }
}
