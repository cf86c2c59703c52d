//! Graph classifiers built from graph convolutions.
//!
//! | id | body                      | head                                                      |
//! |----|---------------------------|-----------------------------------------------------------|
//! | 1  | 2 GCN layers              | mean readout → FC → FC → sigmoid                          |
//! | 2  | 3 GCN layers              | sort pooling → conv1d → conv1d → FC → dropout → FC → sigmoid |
//! | 3  | 2 GCN layers              | as 2                                                      |
//! | 4  | 3 GCN layers              | as 1                                                      |
//!
//! Hidden layers use ReLU. In the sort-pooling architectures the last GCN
//! layer is linear so the sort key is continuous.

mod checkpoint;
mod input;
mod train;

pub use checkpoint::ClassifierCheckpoint;
pub use input::{GraphBatch, ModelInput};
pub use train::{evaluate, train_classifier, EpochRecord, TrainReport};

use std::hash::Hasher;

use serde::{Deserialize, Serialize};

use crate::features::FEATURE_COUNT;
use crate::nn::{
    mean_readout, mean_readout_backward, relu, relu_backward, sigmoid, Activation, Conv1d, Dropout,
    GcnLayer, Linear, Matrix, Parameter, SortPooling,
};
use crate::rng::{self, streams, SeededRng};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Architecture {
    /// Two GCN layers, two fully connected layers.
    GcnDense2,
    /// Three GCN layers, sort pooling, two 1-D convolutions.
    GcnSortConv3,
    /// Two GCN layers, sort pooling, two 1-D convolutions.
    GcnSortConv2,
    /// Three GCN layers, two fully connected layers.
    GcnDense3,
}

impl Architecture {
    pub fn from_id(id: u8) -> Result<Self> {
        match id {
            1 => Ok(Architecture::GcnDense2),
            2 => Ok(Architecture::GcnSortConv3),
            3 => Ok(Architecture::GcnSortConv2),
            4 => Ok(Architecture::GcnDense3),
            other => Err(Error::UnknownArchitecture(other)),
        }
    }

    pub fn id(self) -> u8 {
        match self {
            Architecture::GcnDense2 => 1,
            Architecture::GcnSortConv3 => 2,
            Architecture::GcnSortConv2 => 3,
            Architecture::GcnDense3 => 4,
        }
    }

    pub fn gcn_depth(self) -> usize {
        match self {
            Architecture::GcnDense2 | Architecture::GcnSortConv2 => 2,
            Architecture::GcnDense3 | Architecture::GcnSortConv3 => 3,
        }
    }

    pub fn uses_sort_pooling(self) -> bool {
        matches!(
            self,
            Architecture::GcnSortConv2 | Architecture::GcnSortConv3
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierConfig {
    pub architecture: u8,
    pub hidden_dim: usize,
    pub sort_k: usize,
    /// Output channels of the first and second convolution.
    pub conv_channels: [usize; 2],
    pub conv_kernel: usize,
    pub dropout: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            architecture: 4,
            hidden_dim: 64,
            sort_k: 30,
            conv_channels: [16, 32],
            conv_kernel: 5,
            dropout: 0.5,
            learning_rate: 0.01,
            epochs: 50,
            batch_size: 32,
            seed: 0,
        }
    }
}

impl ClassifierConfig {
    pub fn validate(&self) -> Result<Architecture> {
        let arch = Architecture::from_id(self.architecture)?;
        let fail = |msg: String| Err(Error::InvalidParameter(msg));
        if self.hidden_dim == 0 {
            return fail("hidden_dim must be positive".into());
        }
        if self.epochs == 0 {
            return fail("epochs must be at least 1".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return fail(format!(
                "learning_rate {} must be positive",
                self.learning_rate
            ));
        }
        if self.batch_size == 0 {
            return fail("batch_size must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return fail(format!("dropout {} must lie in [0, 1)", self.dropout));
        }
        if arch.uses_sort_pooling() {
            if self.sort_k == 0 {
                return fail("sort_k must be at least 1".into());
            }
            if self.conv_kernel == 0 || self.conv_kernel > self.sort_k {
                return fail(format!(
                    "conv_kernel {} must lie in 1..={}",
                    self.conv_kernel, self.sort_k
                ));
            }
            if self.conv_channels.contains(&0) {
                return fail("conv_channels must be positive".into());
            }
        }
        Ok(arch)
    }
}

#[allow(clippy::large_enum_variant)]
enum Head {
    Dense {
        hidden: Linear,
        output: Linear,
        membership: Vec<usize>,
    },
    Sort {
        pool: SortPooling,
        conv1: Conv1d,
        conv2: Conv1d,
        hidden: Linear,
        dropout: Dropout,
        output: Linear,
        /// Pre-activations of both convolutions, per graph.
        conv_pre: Option<(Vec<Matrix>, Vec<Matrix>)>,
    },
}

/// One of the four graph classifiers with cached forward state.
pub struct GcnClassifier {
    architecture: Architecture,
    config: ClassifierConfig,
    gcn: Vec<GcnLayer>,
    head: Head,
    dropout_rng: SeededRng,
    probabilities: Option<Matrix>,
}

impl GcnClassifier {
    pub fn new(config: &ClassifierConfig) -> Result<Self> {
        let architecture = config.validate()?;
        let h = config.hidden_dim;
        let mut init = rng::substream(config.seed, streams::INIT);
        let depth = architecture.gcn_depth();
        let gcn = (0..depth)
            .map(|i| {
                let in_dim = if i == 0 { FEATURE_COUNT } else { h };
                let act = if i + 1 == depth && architecture.uses_sort_pooling() {
                    Activation::Linear
                } else {
                    Activation::Relu
                };
                GcnLayer::new(in_dim, h, act, &mut init)
            })
            .collect();
        let head = if architecture.uses_sort_pooling() {
            let [c1, c2] = config.conv_channels;
            let k = config.sort_k;
            // The first convolution sweeps one node row per step.
            let conv1 = Conv1d::new(1, c1, h, h, &mut init)?;
            let conv2 = Conv1d::new(c1, c2, config.conv_kernel, 1, &mut init)?;
            let flat = (k - config.conv_kernel + 1) * c2;
            Head::Sort {
                pool: SortPooling::new(k)?,
                conv1,
                conv2,
                hidden: Linear::new(flat, h, Activation::Relu, &mut init),
                dropout: Dropout::new(config.dropout)?,
                output: Linear::new(h, 1, Activation::Linear, &mut init),
                conv_pre: None,
            }
        } else {
            Head::Dense {
                hidden: Linear::new(h, h, Activation::Relu, &mut init),
                output: Linear::new(h, 1, Activation::Linear, &mut init),
                membership: Vec::new(),
            }
        };
        Ok(GcnClassifier {
            architecture,
            config: config.clone(),
            gcn,
            head,
            dropout_rng: rng::substream(config.seed, streams::DROPOUT),
            probabilities: None,
        })
    }

    pub fn architecture(&self) -> Architecture {
        self.architecture
    }

    pub fn config(&self) -> &ClassifierConfig {
        &self.config
    }

    fn gcn_stack(&mut self, batch: &GraphBatch) -> Result<Matrix> {
        if batch.features.cols() != FEATURE_COUNT {
            return Err(Error::ShapeMismatch(format!(
                "classifier expects {FEATURE_COUNT} input features, got {}",
                batch.features.cols()
            )));
        }
        let mut h = batch.features.clone();
        for layer in &mut self.gcn {
            h = layer.forward(&batch.adjacency, &h)?;
        }
        Ok(h)
    }

    /// Per-graph probability of class 1, shape `(graphs, 1)`.
    ///
    /// `train` enables dropout; evaluation mode is deterministic.
    pub fn forward(&mut self, batch: &GraphBatch, train: bool) -> Result<Matrix> {
        let nodes = self.gcn_stack(batch)?;
        let graphs = batch.graph_count();
        let logits = match &mut self.head {
            Head::Dense {
                hidden,
                output,
                membership,
            } => {
                membership.clone_from(&batch.membership);
                let pooled = mean_readout(&nodes, &batch.membership, graphs)?;
                output.forward(&hidden.forward(&pooled)?)?
            }
            Head::Sort {
                pool,
                conv1,
                conv2,
                hidden,
                dropout,
                output,
                conv_pre,
            } => {
                let pooled = pool.forward(&nodes, &batch.offsets)?;
                let seqs: Vec<Matrix> = pooled
                    .into_iter()
                    .map(|m| {
                        let len = m.len();
                        m.reshape(len, 1)
                    })
                    .collect::<Result<_>>()?;
                let pre1 = conv1.forward(&seqs)?;
                let act1: Vec<Matrix> = pre1.iter().map(relu).collect();
                let pre2 = conv2.forward(&act1)?;
                let flat: Vec<Matrix> = pre2
                    .iter()
                    .map(|m| {
                        let len = m.len();
                        relu(m).reshape(1, len)
                    })
                    .collect::<Result<_>>()?;
                *conv_pre = Some((pre1, pre2));
                let flat = Matrix::vstack(&flat)?;
                let hid = hidden.forward(&flat)?;
                let dropped = dropout.forward(&hid, train, &mut self.dropout_rng);
                output.forward(&dropped)?
            }
        };
        logits.ensure_finite("classifier output")?;
        let probs = sigmoid(&logits);
        self.probabilities = Some(probs.clone());
        Ok(probs)
    }

    /// Backpropagates `∂loss/∂p` (one entry per graph) into every parameter.
    pub fn backward(&mut self, batch: &GraphBatch, grad_probs: &[f64]) -> Result<()> {
        let probs = self
            .probabilities
            .as_ref()
            .ok_or(Error::BackwardBeforeForward)?;
        if grad_probs.len() != probs.rows() {
            return Err(Error::ShapeMismatch(format!(
                "{} gradients for {} outputs",
                grad_probs.len(),
                probs.rows()
            )));
        }
        let d_logits = Matrix::from_vec(
            probs.rows(),
            1,
            grad_probs
                .iter()
                .zip(probs.as_slice())
                .map(|(g, p)| g * p * (1.0 - p))
                .collect(),
        )?;
        let mut d_nodes = match &mut self.head {
            Head::Dense {
                hidden,
                output,
                membership,
            } => {
                let d_pooled = hidden.backward(&output.backward(&d_logits)?)?;
                mean_readout_backward(&d_pooled, membership)
            }
            Head::Sort {
                pool,
                conv1,
                conv2,
                hidden,
                dropout,
                output,
                conv_pre,
            } => {
                let (pre1, pre2) = conv_pre.as_ref().ok_or(Error::BackwardBeforeForward)?;
                let d_hid = dropout.backward(&output.backward(&d_logits)?);
                let d_flat = hidden.backward(&d_hid)?;
                let d_act2: Vec<Matrix> = pre2
                    .iter()
                    .enumerate()
                    .map(|(g, pre)| {
                        let row = Matrix::from_vec(pre.rows(), pre.cols(), d_flat.row(g).to_vec())?;
                        Ok(relu_backward(&row, pre))
                    })
                    .collect::<Result<_>>()?;
                let d_act1 = conv2.backward(&d_act2)?;
                let d_pre1: Vec<Matrix> = d_act1
                    .iter()
                    .zip(pre1)
                    .map(|(d, pre)| relu_backward(d, pre))
                    .collect();
                let d_seqs = conv1.backward(&d_pre1)?;
                let k = pool.k();
                let width = self.config.hidden_dim;
                let d_pooled: Vec<Matrix> = d_seqs
                    .into_iter()
                    .map(|m| m.reshape(k, width))
                    .collect::<Result<_>>()?;
                pool.backward(&d_pooled)?
            }
        };
        for layer in self.gcn.iter_mut().rev() {
            d_nodes = layer.backward(&batch.adjacency, &d_nodes)?;
        }
        Ok(())
    }

    /// Mean-pooled output of the last GCN layer, shape `(graphs, hidden_dim)`.
    pub fn embed(&mut self, batch: &GraphBatch) -> Result<Matrix> {
        let nodes = self.gcn_stack(batch)?;
        mean_readout(&nodes, &batch.membership, batch.graph_count())
    }

    pub fn named_parameters(&self) -> Vec<(String, &Parameter)> {
        let mut out = Vec::new();
        for (i, l) in self.gcn.iter().enumerate() {
            out.push((format!("gcn{i}.weight"), &l.weight));
            out.push((format!("gcn{i}.bias"), &l.bias));
        }
        match &self.head {
            Head::Dense { hidden, output, .. } => {
                out.push(("fc_hidden.weight".into(), &hidden.weight));
                out.push(("fc_hidden.bias".into(), &hidden.bias));
                out.push(("fc_output.weight".into(), &output.weight));
                out.push(("fc_output.bias".into(), &output.bias));
            }
            Head::Sort {
                conv1,
                conv2,
                hidden,
                output,
                ..
            } => {
                out.push(("conv1.weight".into(), &conv1.weight));
                out.push(("conv1.bias".into(), &conv1.bias));
                out.push(("conv2.weight".into(), &conv2.weight));
                out.push(("conv2.bias".into(), &conv2.bias));
                out.push(("fc_hidden.weight".into(), &hidden.weight));
                out.push(("fc_hidden.bias".into(), &hidden.bias));
                out.push(("fc_output.weight".into(), &output.weight));
                out.push(("fc_output.bias".into(), &output.bias));
            }
        }
        out
    }

    pub fn named_parameters_mut(&mut self) -> Vec<(String, &mut Parameter)> {
        let mut out = Vec::new();
        for (i, l) in self.gcn.iter_mut().enumerate() {
            out.push((format!("gcn{i}.weight"), &mut l.weight));
            out.push((format!("gcn{i}.bias"), &mut l.bias));
        }
        match &mut self.head {
            Head::Dense { hidden, output, .. } => {
                out.push(("fc_hidden.weight".into(), &mut hidden.weight));
                out.push(("fc_hidden.bias".into(), &mut hidden.bias));
                out.push(("fc_output.weight".into(), &mut output.weight));
                out.push(("fc_output.bias".into(), &mut output.bias));
            }
            Head::Sort {
                conv1,
                conv2,
                hidden,
                output,
                ..
            } => {
                out.push(("conv1.weight".into(), &mut conv1.weight));
                out.push(("conv1.bias".into(), &mut conv1.bias));
                out.push(("conv2.weight".into(), &mut conv2.weight));
                out.push(("conv2.bias".into(), &mut conv2.bias));
                out.push(("fc_hidden.weight".into(), &mut hidden.weight));
                out.push(("fc_hidden.bias".into(), &mut hidden.bias));
                out.push(("fc_output.weight".into(), &mut output.weight));
                out.push(("fc_output.bias".into(), &mut output.bias));
            }
        }
        out
    }

    pub fn parameters_mut(&mut self) -> impl Iterator<Item = &mut Parameter> {
        self.named_parameters_mut().into_iter().map(|(_, p)| p)
    }

    pub fn parameter_count(&self) -> usize {
        self.named_parameters().iter().map(|(_, p)| p.len()).sum()
    }

    pub fn zero_grad(&mut self) {
        for p in self.parameters_mut() {
            p.zero_grad();
        }
    }

    /// Hash of the piecewise-linear region visited by the last forward pass
    /// (ReLU masks and sort-pooling selections). Finite differences are only
    /// meaningful between evaluations with equal signatures.
    pub fn region_signature(&self) -> u64 {
        let mut h = std::collections::hash_map::DefaultHasher::new();
        for l in &self.gcn {
            l.signature(&mut h);
        }
        match &self.head {
            Head::Dense { hidden, .. } => hidden.signature(&mut h),
            Head::Sort {
                pool,
                hidden,
                conv_pre,
                ..
            } => {
                pool.signature(&mut h);
                if let Some((a, b)) = conv_pre {
                    for m in a.iter().chain(b) {
                        for &v in m.as_slice() {
                            h.write_u8((v > 0.0) as u8);
                        }
                    }
                }
                hidden.signature(&mut h);
            }
        }
        h.finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Graph;

    #[test]
    fn unknown_architecture() {
        let cfg = ClassifierConfig {
            architecture: 5,
            ..Default::default()
        };
        assert!(matches!(
            GcnClassifier::new(&cfg),
            Err(Error::UnknownArchitecture(5))
        ));
    }

    #[test]
    fn dense_parameter_count() {
        for h in [8, 64] {
            let cfg = ClassifierConfig {
                hidden_dim: h,
                ..Default::default()
            };
            let model = GcnClassifier::new(&cfg).unwrap();
            let weights = 5 * h + h * h + h * h + h * h + h;
            let biases = 4 * h + 1;
            assert_eq!(model.parameter_count(), weights + biases);
        }
    }

    #[test]
    fn outputs_are_probabilities() {
        let graphs = [Graph::path(4), Graph::complete(5), Graph::star(3)];
        let input = ModelInput::unscaled(&graphs, &[0, 1, 0]).unwrap();
        let batch = input.batch(&[0, 1, 2]);
        for arch in 1..=4 {
            let cfg = ClassifierConfig {
                architecture: arch,
                hidden_dim: 8,
                sort_k: 6,
                conv_kernel: 3,
                ..Default::default()
            };
            let mut model = GcnClassifier::new(&cfg).unwrap();
            let p = model.forward(&batch, false).unwrap();
            assert_eq!(p.shape(), (3, 1));
            assert!(p.as_slice().iter().all(|&v| v > 0.0 && v < 1.0));
        }
    }

    #[test]
    fn invalid_configs() {
        let bad = [
            ClassifierConfig {
                epochs: 0,
                ..Default::default()
            },
            ClassifierConfig {
                learning_rate: 0.0,
                ..Default::default()
            },
            ClassifierConfig {
                architecture: 2,
                sort_k: 3,
                conv_kernel: 5,
                ..Default::default()
            },
            ClassifierConfig {
                dropout: 1.0,
                ..Default::default()
            },
        ];
        for cfg in bad {
            assert!(cfg.validate().is_err(), "{cfg:?}");
        }
    }
}
