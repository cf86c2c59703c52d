use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Matrix, NormalizedAdjacency, Parameter};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Linear,
}

impl Activation {
    pub(crate) fn apply(self, x: Matrix) -> Matrix {
        match self {
            Activation::Relu => relu(&x),
            Activation::Linear => x,
        }
    }

    pub(crate) fn backward(self, grad: &Matrix, pre: &Matrix) -> Matrix {
        match self {
            Activation::Relu => relu_backward(grad, pre),
            Activation::Linear => grad.clone(),
        }
    }
}

pub fn relu(x: &Matrix) -> Matrix {
    x.map(|v| v.max(0.0))
}

/// Gradient of ReLU given the upstream gradient and the pre-activation.
pub fn relu_backward(grad: &Matrix, pre: &Matrix) -> Matrix {
    let mut out = grad.clone();
    for (g, &p) in out.as_mut_slice().iter_mut().zip(pre.as_slice()) {
        if p <= 0.0 {
            *g = 0.0;
        }
    }
    out
}

pub fn sigmoid(x: &Matrix) -> Matrix {
    x.map(|v| {
        if v >= 0.0 {
            1.0 / (1.0 + (-v).exp())
        } else {
            let e = v.exp();
            e / (1.0 + e)
        }
    })
}

/// Gradient of the logistic function given its output.
pub fn sigmoid_backward(grad: &Matrix, out: &Matrix) -> Matrix {
    let mut g = grad.clone();
    for (gi, &s) in g.as_mut_slice().iter_mut().zip(out.as_slice()) {
        *gi *= s * (1.0 - s);
    }
    g
}

pub(crate) fn relu_signature(pre: &Matrix, hasher: &mut impl std::hash::Hasher) {
    for &v in pre.as_slice() {
        hasher.write_u8((v > 0.0) as u8);
    }
}

/// `σ(Â · H · W)` without bias or caching.
pub fn gcn_layer_forward(
    h: &Matrix,
    weight: &Parameter,
    adjacency: &NormalizedAdjacency,
    activation: Activation,
) -> Result<Matrix> {
    check_gcn_shapes(h, &weight.value, adjacency)?;
    let propagated = adjacency.multiply(&h.matmul(&weight.value)?)?;
    Ok(activation.apply(propagated))
}

fn check_gcn_shapes(h: &Matrix, w: &Matrix, adjacency: &NormalizedAdjacency) -> Result<()> {
    if h.rows() != adjacency.node_count() {
        return Err(Error::ShapeMismatch(format!(
            "GCN input has {} rows for {} nodes",
            h.rows(),
            adjacency.node_count()
        )));
    }
    if h.cols() != w.rows() {
        return Err(Error::ShapeMismatch(format!(
            "GCN input width {} does not match weight rows {}",
            h.cols(),
            w.rows()
        )));
    }
    Ok(())
}

struct GcnCache {
    input: Matrix,
    pre: Matrix,
}

/// Graph convolution `σ(Â H W + b)`.
pub struct GcnLayer {
    pub weight: Parameter,
    pub bias: Parameter,
    pub activation: Activation,
    cache: Option<GcnCache>,
}

impl GcnLayer {
    pub fn new<R: Rng>(in_dim: usize, out_dim: usize, activation: Activation, rng: &mut R) -> Self {
        GcnLayer {
            weight: Parameter::glorot(in_dim, out_dim, in_dim, out_dim, rng),
            bias: Parameter::zeros(1, out_dim),
            activation,
            cache: None,
        }
    }

    pub fn forward(&mut self, adjacency: &NormalizedAdjacency, h: &Matrix) -> Result<Matrix> {
        check_gcn_shapes(h, &self.weight.value, adjacency)?;
        h.ensure_finite("GCN layer input")?;
        let mut pre = adjacency.multiply(&h.matmul(&self.weight.value)?)?;
        pre.add_row_vector(self.bias.value.as_slice());
        let out = self.activation.apply(pre.clone());
        self.cache = Some(GcnCache {
            input: h.clone(),
            pre,
        });
        Ok(out)
    }

    /// Accumulates weight and bias gradients; returns the input gradient.
    pub fn backward(
        &mut self,
        adjacency: &NormalizedAdjacency,
        grad_out: &Matrix,
    ) -> Result<Matrix> {
        let cache = self.cache.as_ref().ok_or(Error::BackwardBeforeForward)?;
        let d_pre = self.activation.backward(grad_out, &cache.pre);
        self.bias
            .accumulate(&Matrix::from_vec(1, d_pre.cols(), d_pre.column_sums())?);
        // pre = Â (H W): the gradient reaching H W is Âᵀ d_pre = Â d_pre.
        let d_hw = adjacency.multiply(&d_pre)?;
        self.weight.accumulate(&cache.input.t_matmul(&d_hw)?);
        d_hw.matmul_t(&self.weight.value)
    }

    pub fn signature(&self, hasher: &mut impl std::hash::Hasher) {
        if let (Some(c), Activation::Relu) = (&self.cache, self.activation) {
            relu_signature(&c.pre, hasher);
        }
    }
}

struct LinearCache {
    input: Matrix,
    pre: Matrix,
}

/// Fully connected layer `σ(X W + b)` over row vectors.
pub struct Linear {
    pub weight: Parameter,
    pub bias: Parameter,
    pub activation: Activation,
    cache: Option<LinearCache>,
}

impl Linear {
    pub fn new<R: Rng>(in_dim: usize, out_dim: usize, activation: Activation, rng: &mut R) -> Self {
        Linear {
            weight: Parameter::glorot(in_dim, out_dim, in_dim, out_dim, rng),
            bias: Parameter::zeros(1, out_dim),
            activation,
            cache: None,
        }
    }

    pub fn forward(&mut self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.weight.value.rows() {
            return Err(Error::ShapeMismatch(format!(
                "linear layer expects width {}, got {}",
                self.weight.value.rows(),
                x.cols()
            )));
        }
        let mut pre = x.matmul(&self.weight.value)?;
        pre.add_row_vector(self.bias.value.as_slice());
        let out = self.activation.apply(pre.clone());
        self.cache = Some(LinearCache {
            input: x.clone(),
            pre,
        });
        Ok(out)
    }

    pub fn backward(&mut self, grad_out: &Matrix) -> Result<Matrix> {
        let cache = self.cache.as_ref().ok_or(Error::BackwardBeforeForward)?;
        let d_pre = self.activation.backward(grad_out, &cache.pre);
        self.bias
            .accumulate(&Matrix::from_vec(1, d_pre.cols(), d_pre.column_sums())?);
        self.weight.accumulate(&cache.input.t_matmul(&d_pre)?);
        d_pre.matmul_t(&self.weight.value)
    }

    pub fn signature(&self, hasher: &mut impl std::hash::Hasher) {
        if let (Some(c), Activation::Relu) = (&self.cache, self.activation) {
            relu_signature(&c.pre, hasher);
        }
    }
}

/// Inverted dropout: survivors are scaled by `1 / (1 - p)` in training mode,
/// evaluation mode is the identity.
pub struct Dropout {
    p: f64,
    mask: Option<Vec<f64>>,
}

impl Dropout {
    pub fn new(p: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::InvalidParameter(format!(
                "dropout rate {p} must lie in [0, 1)"
            )));
        }
        Ok(Dropout { p, mask: None })
    }

    pub fn rate(&self) -> f64 {
        self.p
    }

    pub fn forward<R: Rng>(&mut self, x: &Matrix, train: bool, rng: &mut R) -> Matrix {
        if !train || self.p == 0.0 {
            self.mask = None;
            return x.clone();
        }
        let keep = 1.0 / (1.0 - self.p);
        let mask: Vec<f64> = (0..x.len())
            .map(|_| {
                if rng.random::<f64>() < self.p {
                    0.0
                } else {
                    keep
                }
            })
            .collect();
        self.forward_with_mask(x, mask)
    }

    /// Applies an explicit multiplicative mask (entries `0` or `1 / (1 - p)`).
    pub fn forward_with_mask(&mut self, x: &Matrix, mask: Vec<f64>) -> Matrix {
        assert_eq!(mask.len(), x.len(), "dropout mask length");
        let mut out = x.clone();
        for (o, m) in out.as_mut_slice().iter_mut().zip(&mask) {
            *o *= m;
        }
        self.mask = Some(mask);
        out
    }

    pub fn backward(&self, grad_out: &Matrix) -> Matrix {
        match &self.mask {
            None => grad_out.clone(),
            Some(mask) => {
                let mut g = grad_out.clone();
                for (gi, m) in g.as_mut_slice().iter_mut().zip(mask) {
                    *gi *= m;
                }
                g
            }
        }
    }
}

/// One-dimensional convolution over a `(length, channels)` sequence.
///
/// The weight is laid out as `(kernel * in_channels, out_channels)`, row
/// `j * in_channels + c` holding tap `j` of input channel `c`.
pub struct Conv1d {
    pub weight: Parameter,
    pub bias: Parameter,
    in_channels: usize,
    kernel: usize,
    stride: usize,
    /// Unfolded input windows and input lengths, one per sample.
    cache: Option<Vec<(Matrix, usize)>>,
}

impl Conv1d {
    pub fn new<R: Rng>(
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if kernel == 0 || stride == 0 || in_channels == 0 || out_channels == 0 {
            return Err(Error::InvalidParameter(
                "conv1d kernel, stride and channel counts must be positive".into(),
            ));
        }
        Ok(Conv1d {
            weight: Parameter::glorot(
                kernel * in_channels,
                out_channels,
                in_channels * kernel,
                out_channels * kernel,
                rng,
            ),
            bias: Parameter::zeros(1, out_channels),
            in_channels,
            kernel,
            stride,
            cache: None,
        })
    }

    pub fn out_channels(&self) -> usize {
        self.weight.value.cols()
    }

    pub fn output_length(&self, input_length: usize) -> Result<usize> {
        if input_length < self.kernel {
            return Err(Error::ShapeMismatch(format!(
                "conv1d kernel {} longer than input {input_length}",
                self.kernel
            )));
        }
        Ok((input_length - self.kernel) / self.stride + 1)
    }

    fn unfold(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.in_channels {
            return Err(Error::ShapeMismatch(format!(
                "conv1d expects {} channels, got {}",
                self.in_channels,
                x.cols()
            )));
        }
        let out_len = self.output_length(x.rows())?;
        let width = self.kernel * self.in_channels;
        let mut cols = Matrix::zeros(out_len, width);
        for t in 0..out_len {
            let start = t * self.stride;
            let window =
                &x.as_slice()[start * self.in_channels..(start + self.kernel) * self.in_channels];
            cols.row_mut(t).copy_from_slice(window);
        }
        Ok(cols)
    }

    pub fn forward(&mut self, inputs: &[Matrix]) -> Result<Vec<Matrix>> {
        let mut cache = Vec::with_capacity(inputs.len());
        let mut outputs = Vec::with_capacity(inputs.len());
        for x in inputs {
            let cols = self.unfold(x)?;
            let mut out = cols.matmul(&self.weight.value)?;
            out.add_row_vector(self.bias.value.as_slice());
            outputs.push(out);
            cache.push((cols, x.rows()));
        }
        self.cache = Some(cache);
        Ok(outputs)
    }

    pub fn backward(&mut self, grads: &[Matrix]) -> Result<Vec<Matrix>> {
        let cache = self.cache.as_ref().ok_or(Error::BackwardBeforeForward)?;
        if cache.len() != grads.len() {
            return Err(Error::ShapeMismatch(format!(
                "conv1d backward got {} gradients for {} samples",
                grads.len(),
                cache.len()
            )));
        }
        let mut d_weight = Matrix::zeros(self.weight.value.rows(), self.weight.value.cols());
        let mut d_bias = vec![0.0; self.out_channels()];
        let mut d_inputs = Vec::with_capacity(grads.len());
        for ((cols, len), g) in cache.iter().zip(grads) {
            d_weight.add_assign(&cols.t_matmul(g)?);
            for (b, s) in d_bias.iter_mut().zip(g.column_sums()) {
                *b += s;
            }
            let d_cols = g.matmul_t(&self.weight.value)?;
            let mut d_x = Matrix::zeros(*len, self.in_channels);
            for t in 0..d_cols.rows() {
                let start = t * self.stride * self.in_channels;
                let target = &mut d_x.as_mut_slice()[start..start + self.kernel * self.in_channels];
                for (d, s) in target.iter_mut().zip(d_cols.row(t)) {
                    *d += s;
                }
            }
            d_inputs.push(d_x);
        }
        self.weight.accumulate(&d_weight);
        let n = d_bias.len();
        self.bias.accumulate(&Matrix::from_vec(1, n, d_bias)?);
        Ok(d_inputs)
    }
}

/// Sorts each graph's node rows by the last column (descending, ties by
/// node order) and keeps the first `k`, zero-padding short graphs.
pub struct SortPooling {
    k: usize,
    /// Per graph: selected source rows (global indices).
    cache: Option<(Vec<Vec<usize>>, usize, usize)>,
}

impl SortPooling {
    pub fn new(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidParameter(
                "sort pooling k must be at least 1".into(),
            ));
        }
        Ok(SortPooling { k, cache: None })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// `offsets` delimits each graph's rows in `h` (length `graphs + 1`).
    pub fn forward(&mut self, h: &Matrix, offsets: &[usize]) -> Result<Vec<Matrix>> {
        if offsets.last() != Some(&h.rows()) {
            return Err(Error::ShapeMismatch(format!(
                "offsets cover {:?} rows, features have {}",
                offsets.last(),
                h.rows()
            )));
        }
        if h.cols() == 0 {
            return Err(Error::ShapeMismatch(
                "sort pooling needs at least one column".into(),
            ));
        }
        h.ensure_finite("sort pooling input")?;
        let key = h.cols() - 1;
        let mut selected = Vec::with_capacity(offsets.len().saturating_sub(1));
        let mut outputs = Vec::with_capacity(selected.capacity());
        for w in offsets.windows(2) {
            let mut order: Vec<usize> = (w[0]..w[1]).collect();
            // Stable sort keeps node order among equal keys.
            order.sort_by(|&a, &b| {
                h.get(b, key)
                    .partial_cmp(&h.get(a, key))
                    .unwrap_or(std::cmp::Ordering::Equal)
            });
            order.truncate(self.k);
            let mut out = Matrix::zeros(self.k, h.cols());
            for (slot, &src) in order.iter().enumerate() {
                out.row_mut(slot).copy_from_slice(h.row(src));
            }
            outputs.push(out);
            selected.push(order);
        }
        self.cache = Some((selected, h.rows(), h.cols()));
        Ok(outputs)
    }

    pub fn backward(&self, grads: &[Matrix]) -> Result<Matrix> {
        let (selected, rows, cols) = self.cache.as_ref().ok_or(Error::BackwardBeforeForward)?;
        let mut d_h = Matrix::zeros(*rows, *cols);
        for (order, g) in selected.iter().zip(grads) {
            for (slot, &src) in order.iter().enumerate() {
                d_h.row_mut(src).copy_from_slice(g.row(slot));
            }
        }
        Ok(d_h)
    }

    pub fn signature(&self, hasher: &mut impl std::hash::Hasher) {
        if let Some((selected, _, _)) = &self.cache {
            for order in selected {
                for &i in order {
                    hasher.write_usize(i);
                }
            }
        }
    }
}

/// Averages node rows per graph. Graphs with no nodes read out as zeros.
pub fn mean_readout(h: &Matrix, membership: &[usize], graph_count: usize) -> Result<Matrix> {
    if membership.len() != h.rows() {
        return Err(Error::ShapeMismatch(format!(
            "{} membership entries for {} rows",
            membership.len(),
            h.rows()
        )));
    }
    let mut out = Matrix::zeros(graph_count, h.cols());
    let mut counts = vec![0usize; graph_count];
    for (r, &g) in membership.iter().enumerate() {
        if g >= graph_count {
            return Err(Error::ShapeMismatch(format!(
                "node assigned to graph {g} of {graph_count}"
            )));
        }
        counts[g] += 1;
        for (o, v) in out.row_mut(g).iter_mut().zip(h.row(r)) {
            *o += v;
        }
    }
    for (g, &c) in counts.iter().enumerate() {
        if c > 0 {
            let inv = 1.0 / c as f64;
            for o in out.row_mut(g) {
                *o *= inv;
            }
        }
    }
    Ok(out)
}

pub fn mean_readout_backward(grad: &Matrix, membership: &[usize]) -> Matrix {
    let mut counts = vec![0usize; grad.rows()];
    for &g in membership {
        counts[g] += 1;
    }
    let mut d_h = Matrix::zeros(membership.len(), grad.cols());
    for (r, &g) in membership.iter().enumerate() {
        let inv = 1.0 / counts[g] as f64;
        for (d, v) in d_h.row_mut(r).iter_mut().zip(grad.row(g)) {
            *d = v * inv;
        }
    }
    d_h
}
