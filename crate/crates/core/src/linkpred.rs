//! Link prediction on a single graph: a two-layer mean-aggregation encoder
//! trained with a margin loss on dot-product edge scores, and top-k
//! recommendation of new edges.
//!
//! Each layer computes `h'_v = σ(concat(h_v, mean_{u ∈ N(v)} h_u) · W + b)`.
//! Nodes without neighbours aggregate a zero vector.

use std::collections::HashSet;
use std::io::Write;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::eval::roc_auc;
use crate::features::{assemble_features, FeatureScaler, PageRankConfig, FEATURE_COUNT};
use crate::graph::Graph;
use crate::nn::{margin_loss, relu_signature, Activation, Adam, Matrix, Parameter};
use crate::rng::{self, streams, SeededRng};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinkPredConfig {
    pub hidden_dim: usize,
    pub output_dim: usize,
    /// L2-normalise the final embeddings.
    pub normalize: bool,
    pub epochs: usize,
    pub learning_rate: f64,
    pub margin: f64,
    /// Fraction of edges withheld from training and used for the AUC.
    pub holdout: f64,
    pub seed: u64,
}

impl Default for LinkPredConfig {
    fn default() -> Self {
        LinkPredConfig {
            hidden_dim: 100,
            output_dim: 100,
            normalize: true,
            epochs: 100,
            learning_rate: 0.01,
            margin: 1.0,
            holdout: 0.10,
            seed: 0,
        }
    }
}

impl LinkPredConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_dim == 0 || self.output_dim == 0 {
            return Err(Error::InvalidParameter(
                "encoder widths must be positive".into(),
            ));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "learning rate {} must be positive",
                self.learning_rate
            )));
        }
        if !(self.margin >= 0.0 && self.margin.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "margin {} must be non-negative",
                self.margin
            )));
        }
        if !(self.holdout > 0.0 && self.holdout < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "holdout fraction {} must lie in (0, 1)",
                self.holdout
            )));
        }
        Ok(())
    }
}

/// Row `v` is the mean of `x` over the neighbours of `v`.
fn neighbor_mean(g: &Graph, x: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(x.rows(), x.cols());
    for v in 0..g.node_count() {
        let nbrs = g.neighbors(v);
        if nbrs.is_empty() {
            continue;
        }
        let row = out.row_mut(v);
        for &u in nbrs {
            for (o, a) in row.iter_mut().zip(x.row(u)) {
                *o += a;
            }
        }
        let inv = 1.0 / nbrs.len() as f64;
        row.iter_mut().for_each(|o| *o *= inv);
    }
    out
}

struct SageCache {
    concat: Matrix,
    pre: Matrix,
}

pub struct SageLayer {
    pub weight: Parameter,
    pub bias: Parameter,
    pub activation: Activation,
    cache: Option<SageCache>,
}

impl SageLayer {
    pub fn new<R: Rng>(in_dim: usize, out_dim: usize, activation: Activation, rng: &mut R) -> Self {
        SageLayer {
            weight: Parameter::glorot(2 * in_dim, out_dim, 2 * in_dim, out_dim, rng),
            bias: Parameter::zeros(1, out_dim),
            activation,
            cache: None,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weight.value.rows() / 2
    }

    pub fn forward(&mut self, g: &Graph, h: &Matrix) -> Result<Matrix> {
        if h.rows() != g.node_count() || h.cols() != self.in_dim() {
            return Err(Error::ShapeMismatch(format!(
                "encoder layer expects {}x{}, got {}x{}",
                g.node_count(),
                self.in_dim(),
                h.rows(),
                h.cols()
            )));
        }
        let concat = h.hstack(&neighbor_mean(g, h))?;
        let mut pre = concat.matmul(&self.weight.value)?;
        pre.add_row_vector(self.bias.value.as_slice());
        let out = self.activation.apply(pre.clone());
        self.cache = Some(SageCache { concat, pre });
        Ok(out)
    }

    pub fn backward(&mut self, g: &Graph, grad_out: &Matrix) -> Result<Matrix> {
        let cache = self.cache.as_ref().ok_or(Error::BackwardBeforeForward)?;
        let d_pre = self.activation.backward(grad_out, &cache.pre);
        self.bias
            .accumulate(&Matrix::from_vec(1, d_pre.cols(), d_pre.column_sums())?);
        self.weight.accumulate(&cache.concat.t_matmul(&d_pre)?);
        let d_concat = d_pre.matmul_t(&self.weight.value)?;
        let (mut d_h, d_mean) = d_concat.hsplit(self.in_dim());
        for v in 0..g.node_count() {
            let nbrs = g.neighbors(v);
            if nbrs.is_empty() {
                continue;
            }
            let inv = 1.0 / nbrs.len() as f64;
            for &u in nbrs {
                for (o, a) in d_h.row_mut(u).iter_mut().zip(d_mean.row(v)) {
                    *o += a * inv;
                }
            }
        }
        Ok(d_h)
    }
}

/// Two-layer encoder: ReLU hidden layer, linear output layer.
pub struct SageModel {
    layers: [SageLayer; 2],
    normalize: bool,
    /// Unnormalised output and its row norms, kept for the backward pass.
    norm_cache: Option<(Matrix, Vec<f64>)>,
}

impl SageModel {
    pub fn new(cfg: &LinkPredConfig) -> Result<Self> {
        cfg.validate()?;
        let mut rng = rng::substream(cfg.seed, streams::INIT);
        Ok(SageModel {
            layers: [
                SageLayer::new(FEATURE_COUNT, cfg.hidden_dim, Activation::Relu, &mut rng),
                SageLayer::new(cfg.hidden_dim, cfg.output_dim, Activation::Linear, &mut rng),
            ],
            normalize: cfg.normalize,
            norm_cache: None,
        })
    }

    pub fn output_dim(&self) -> usize {
        self.layers[1].weight.value.cols()
    }

    /// Node embeddings, `n × output_dim`.
    pub fn forward(&mut self, g: &Graph, features: &Matrix) -> Result<Matrix> {
        if g.node_count() == 0 {
            return Err(Error::Empty("graph"));
        }
        features.ensure_finite("encoder input")?;
        let hidden = self.layers[0].forward(g, features)?;
        let out = self.layers[1].forward(g, &hidden)?;
        let out = if self.normalize {
            let mut y = out.clone();
            let mut norms = Vec::with_capacity(y.rows());
            for r in 0..y.rows() {
                let row = y.row_mut(r);
                let norm = row.iter().map(|a| a * a).sum::<f64>().sqrt();
                if norm > 0.0 {
                    row.iter_mut().for_each(|a| *a /= norm);
                }
                norms.push(norm);
            }
            self.norm_cache = Some((y.clone(), norms));
            y
        } else {
            out
        };
        out.ensure_finite("embeddings")?;
        Ok(out)
    }

    pub fn backward(&mut self, g: &Graph, grad: &Matrix) -> Result<()> {
        let grad = if self.normalize {
            let (y, norms) = self
                .norm_cache
                .as_ref()
                .ok_or(Error::BackwardBeforeForward)?;
            let mut d = grad.clone();
            for (r, &norm) in norms.iter().enumerate() {
                let yr = y.row(r);
                let dot: f64 = yr.iter().zip(grad.row(r)).map(|(a, b)| a * b).sum();
                for (o, &a) in d.row_mut(r).iter_mut().zip(yr) {
                    *o = if norm > 0.0 {
                        (*o - a * dot) / norm
                    } else {
                        0.0
                    };
                }
            }
            d
        } else {
            grad.clone()
        };
        let d_hidden = self.layers[1].backward(g, &grad)?;
        self.layers[0].backward(g, &d_hidden)?;
        Ok(())
    }

    pub fn named_parameters(&self) -> Vec<(String, &Parameter)> {
        let mut out = Vec::new();
        for (i, l) in self.layers.iter().enumerate() {
            out.push((format!("sage{i}.weight"), &l.weight));
            out.push((format!("sage{i}.bias"), &l.bias));
        }
        out
    }

    pub fn named_parameters_mut(&mut self) -> Vec<(String, &mut Parameter)> {
        let mut out = Vec::new();
        for (i, l) in self.layers.iter_mut().enumerate() {
            out.push((format!("sage{i}.weight"), &mut l.weight));
            out.push((format!("sage{i}.bias"), &mut l.bias));
        }
        out
    }

    pub fn parameters_mut(&mut self) -> impl Iterator<Item = &mut Parameter> {
        self.layers
            .iter_mut()
            .flat_map(|l| [&mut l.weight, &mut l.bias])
    }

    pub fn zero_grad(&mut self) {
        self.parameters_mut().for_each(Parameter::zero_grad);
    }

    /// Hash of the ReLU activation pattern from the last forward pass.
    pub fn region_signature(&self) -> u64 {
        use std::hash::Hasher;
        let mut h = std::collections::hash_map::DefaultHasher::new();
        if let Some(c) = &self.layers[0].cache {
            relu_signature(&c.pre, &mut h);
        }
        h.finish()
    }
}

fn check_nodes(emb: &Matrix, u: usize, v: usize) -> Result<()> {
    if u >= emb.rows() || v >= emb.rows() {
        return Err(Error::EndpointOutOfRange {
            u,
            v,
            node_count: emb.rows(),
        });
    }
    Ok(())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn cosine_rows(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (dot(a, a).sqrt(), dot(b, b).sqrt());
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        (dot(a, b) / (na * nb)).clamp(-1.0, 1.0)
    }
}

/// Dot product of two embedding rows.
pub fn edge_score(emb: &Matrix, u: usize, v: usize) -> Result<f64> {
    check_nodes(emb, u, v)?;
    Ok(dot(emb.row(u), emb.row(v)))
}

/// Cosine similarity of two embedding rows; 0 when either row is zero.
pub fn cosine_sim(emb: &Matrix, u: usize, v: usize) -> Result<f64> {
    check_nodes(emb, u, v)?;
    Ok(cosine_rows(emb.row(u), emb.row(v)))
}

pub fn common_neighbors(g: &Graph, u: usize, v: usize) -> usize {
    let (a, b) = (g.neighbors(u), g.neighbors(v));
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

fn non_edge_count(g: &Graph) -> usize {
    let n = g.node_count();
    n * n.saturating_sub(1) / 2 - g.edge_count()
}

/// `count` distinct non-edges `(u, v)` with `u < v`, drawn uniformly.
pub fn sample_negative_edges_with(
    g: &Graph,
    count: usize,
    rng: &mut SeededRng,
) -> Result<Vec<(usize, usize)>> {
    let available = non_edge_count(g);
    if available == 0 {
        return Err(Error::NoNonEdges);
    }
    if count > available {
        return Err(Error::InvalidParameter(format!(
            "{count} negative edges requested but only {available} non-edges exist"
        )));
    }
    let n = g.node_count();
    if 2 * count > available {
        // Rejection would stall; sample the enumerated non-edges instead.
        let all: Vec<(usize, usize)> = (0..n)
            .flat_map(|u| (u + 1..n).map(move |v| (u, v)))
            .filter(|&(u, v)| !g.has_edge(u, v))
            .collect();
        let mut picked: Vec<(usize, usize)> = index::sample(rng, all.len(), count)
            .into_iter()
            .map(|i| all[i])
            .collect();
        picked.sort_unstable();
        return Ok(picked);
    }
    let mut seen = HashSet::with_capacity(count);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let u = rng.random_range(0..n);
        let v = rng.random_range(0..n);
        if u == v {
            continue;
        }
        let pair = (u.min(v), u.max(v));
        if !g.has_edge(pair.0, pair.1) && seen.insert(pair) {
            out.push(pair);
        }
    }
    Ok(out)
}

pub fn sample_negative_edges(g: &Graph, count: usize, seed: u64) -> Result<Vec<(usize, usize)>> {
    sample_negative_edges_with(g, count, &mut rng::substream(seed, streams::NEGATIVES))
}

/// Withheld positives and the negatives they are scored against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeHoldout {
    pub seed: u64,
    pub fraction: f64,
    pub held_out: Vec<(usize, usize)>,
    pub eval_negatives: Vec<(usize, usize)>,
}

impl EdgeHoldout {
    /// The graph with the held-out edges removed.
    pub fn training_graph(&self, g: &Graph) -> Result<Graph> {
        let removed: HashSet<(usize, usize)> = self.held_out.iter().copied().collect();
        let kept: Vec<(usize, usize)> = g
            .edges()
            .iter()
            .copied()
            .filter(|e| !removed.contains(e))
            .collect();
        Graph::from_edges(g.node_count(), &kept)
    }
}

/// Removes `round(fraction · m)` edges (at least one, leaving at least one)
/// and pairs them with as many non-edges of the full graph.
pub fn holdout_edges(g: &Graph, fraction: f64, seed: u64) -> Result<EdgeHoldout> {
    let m = g.edge_count();
    if m < 2 {
        return Err(Error::InvalidParameter(format!(
            "a graph with {m} edges is too small to hold out an edge"
        )));
    }
    let count = ((fraction * m as f64).round() as usize).clamp(1, m - 1);
    let mut rng = rng::substream(seed, streams::HOLDOUT);
    let mut picked: Vec<usize> = index::sample(&mut rng, m, count).into_vec();
    picked.sort_unstable();
    let held_out = picked.into_iter().map(|i| g.edges()[i]).collect();
    let eval_negatives =
        sample_negative_edges_with(g, count, &mut rng::substream(seed, streams::EVAL_NEGATIVES))?;
    Ok(EdgeHoldout {
        seed,
        fraction,
        held_out,
        eval_negatives,
    })
}

/// Scaled structural features, computed on the given graph.
fn scaled_features(g: &Graph, scaler: Option<&FeatureScaler>) -> Result<(Matrix, FeatureScaler)> {
    let raw = assemble_features(g, &PageRankConfig::default())?;
    let scaler = match scaler {
        Some(s) => s.clone(),
        None => FeatureScaler::fit(std::iter::once(&raw))?,
    };
    let x = scaler.transform(&raw).into_matrix();
    Ok((x, scaler))
}

/// Trained encoder plus the feature scaling fitted on its training graph.
pub struct LinkPredictor {
    pub model: SageModel,
    pub scaler: FeatureScaler,
}

impl LinkPredictor {
    /// Embeddings for any graph, featurised with the training scaler.
    pub fn embed(&mut self, g: &Graph) -> Result<Matrix> {
        let (x, _) = scaled_features(g, Some(&self.scaler))?;
        self.model.forward(g, &x)
    }
}

pub struct LinkPredOutcome {
    pub predictor: LinkPredictor,
    pub holdout: EdgeHoldout,
    pub training_graph: Graph,
    /// Held-out positives against eval negatives, dot-product scores.
    pub auc: f64,
    /// Same pairs scored by common-neighbour count on the training graph.
    pub common_neighbor_auc: f64,
    /// Margin loss per epoch.
    pub losses: Vec<f64>,
}

fn pair_scores(emb: &Matrix, pairs: &[(usize, usize)]) -> Vec<f64> {
    pairs
        .iter()
        .map(|&(u, v)| dot(emb.row(u), emb.row(v)))
        .collect()
}

fn scored_auc(pos: &[f64], neg: &[f64]) -> Result<f64> {
    let scores: Vec<f64> = pos.iter().chain(neg).copied().collect();
    let labels: Vec<u8> = std::iter::repeat_n(1, pos.len())
        .chain(std::iter::repeat_n(0, neg.len()))
        .collect();
    Ok(roc_auc(&scores, &labels)?.auc)
}

/// Accumulates `∂L/∂emb` from gradients on the pair scores.
fn scatter_pair_grads(emb: &Matrix, pairs: &[(usize, usize)], grads: &[f64], out: &mut Matrix) {
    for (&(u, v), &g) in pairs.iter().zip(grads) {
        if g == 0.0 {
            continue;
        }
        for k in 0..emb.cols() {
            let (eu, ev) = (emb.get(u, k), emb.get(v, k));
            out.set(u, k, out.get(u, k) + g * ev);
            out.set(v, k, out.get(v, k) + g * eu);
        }
    }
}

/// Trains an encoder on `g` minus a held-out edge set.
///
/// Every epoch pairs each training edge with a freshly sampled non-edge of
/// the training graph, takes one full-graph Adam step on the margin loss, and
/// never aggregates over held-out edges.
pub fn train_linkpred(g: &Graph, cfg: &LinkPredConfig) -> Result<LinkPredOutcome> {
    cfg.validate()?;
    let holdout = holdout_edges(g, cfg.holdout, cfg.seed)?;
    let train = holdout.training_graph(g)?;
    let (x, scaler) = scaled_features(&train, None)?;
    let mut model = SageModel::new(cfg)?;
    let optimizer = Adam::new(cfg.learning_rate);
    let mut neg_rng = rng::substream(cfg.seed, streams::NEGATIVES);
    let positives = train.edges().to_vec();
    let mut losses = Vec::with_capacity(cfg.epochs);

    model.zero_grad();
    for _ in 0..cfg.epochs {
        let negatives = sample_negative_edges_with(&train, positives.len(), &mut neg_rng)?;
        let emb = model.forward(&train, &x)?;
        let loss = margin_loss(
            &pair_scores(&emb, &positives),
            &pair_scores(&emb, &negatives),
            cfg.margin,
        )?;
        let mut grad = Matrix::zeros(emb.rows(), emb.cols());
        scatter_pair_grads(&emb, &positives, &loss.grad_pos, &mut grad);
        scatter_pair_grads(&emb, &negatives, &loss.grad_neg, &mut grad);
        model.backward(&train, &grad)?;
        optimizer.step(model.parameters_mut());
        if !loss.loss.is_finite() {
            return Err(Error::NonFinite("margin loss"));
        }
        losses.push(loss.loss);
    }

    let emb = model.forward(&train, &x)?;
    let auc = scored_auc(
        &pair_scores(&emb, &holdout.held_out),
        &pair_scores(&emb, &holdout.eval_negatives),
    )?;
    let cn = |pairs: &[(usize, usize)]| -> Vec<f64> {
        pairs
            .iter()
            .map(|&(u, v)| common_neighbors(&train, u, v) as f64)
            .collect()
    };
    let common_neighbor_auc = scored_auc(&cn(&holdout.held_out), &cn(&holdout.eval_negatives))?;
    Ok(LinkPredOutcome {
        predictor: LinkPredictor { model, scaler },
        holdout,
        training_graph: train,
        auc,
        common_neighbor_auc,
        losses,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub node: usize,
    pub dot_score: f64,
    pub cosine: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub source: usize,
    /// Best first: dot score descending, ties by node id.
    pub candidates: Vec<Candidate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RecommendConfig {
    pub fraction: f64,
    pub k: usize,
    pub seed: u64,
}

impl Default for RecommendConfig {
    fn default() -> Self {
        RecommendConfig {
            fraction: 0.10,
            k: 5,
            seed: 0,
        }
    }
}

/// Top-k non-neighbours for `ceil(fraction · n)` uniformly chosen nodes,
/// returned in ascending source order.
pub fn recommend(g: &Graph, emb: &Matrix, cfg: &RecommendConfig) -> Result<Vec<Recommendation>> {
    let n = g.node_count();
    if emb.rows() != n {
        return Err(Error::ShapeMismatch(format!(
            "{} embeddings for {n} nodes",
            emb.rows()
        )));
    }
    if !(cfg.fraction > 0.0 && cfg.fraction <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "fraction {} must lie in (0, 1]",
            cfg.fraction
        )));
    }
    if cfg.k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    let chosen = ((cfg.fraction * n as f64).ceil() as usize).min(n);
    let mut sources =
        index::sample(&mut rng::substream(cfg.seed, streams::RECOMMEND), n, chosen).into_vec();
    sources.sort_unstable();
    Ok(sources
        .into_iter()
        .map(|u| {
            let mut candidates: Vec<Candidate> = (0..n)
                .filter(|&v| v != u && !g.has_edge(u, v))
                .map(|v| Candidate {
                    node: v,
                    dot_score: dot(emb.row(u), emb.row(v)),
                    cosine: cosine_rows(emb.row(u), emb.row(v)),
                })
                .collect();
            candidates.sort_by(|a, b| {
                b.dot_score
                    .total_cmp(&a.dot_score)
                    .then(a.node.cmp(&b.node))
            });
            candidates.truncate(cfg.k);
            Recommendation {
                source: u,
                candidates,
            }
        })
        .collect())
}

pub fn write_recommendations_csv<W: Write>(
    out: W,
    graph_id: u64,
    recs: &[Recommendation],
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let err = |e: csv::Error| Error::parse("<recommendations>", e);
    w.write_record([
        "graph_id",
        "source",
        "rank",
        "candidate",
        "dot_score",
        "cosine",
    ])
    .map_err(err)?;
    for r in recs {
        for (rank, c) in r.candidates.iter().enumerate() {
            w.write_record([
                graph_id.to_string(),
                r.source.to_string(),
                (rank + 1).to_string(),
                c.node.to_string(),
                c.dot_score.to_string(),
                c.cosine.to_string(),
            ])
            .map_err(err)?;
        }
    }
    w.flush().map_err(|e| Error::io("<recommendations>", e))
}
