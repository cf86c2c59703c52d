//! Central finite differences against every hand-written backward pass.
//!
//! Coordinates whose ±h perturbation crosses a ReLU kink, reorders sort
//! pooling or flips a hinge are skipped: the function is not differentiable
//! there and a central difference is meaningless.

#![allow(dead_code)]

use std::hash::{DefaultHasher, Hasher};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stargaze::classify::{ClassifierConfig, GcnClassifier, ModelInput};
use stargaze::graph::gnp;
use stargaze::linkpred::{LinkPredConfig, SageModel};
use stargaze::nn::{
    bce_loss, margin_loss, normalize_adjacency, Activation, Conv1d, Dropout, GcnLayer, Linear,
    NormalizedAdjacency, SortPooling,
};
use stargaze::{Graph, Matrix};

pub const STEP: f64 = 1e-5;
pub const MAX_RELATIVE_ERROR: f64 = 1e-4;
/// Denominator floor so gradients that are zero up to rounding compare by
/// absolute error.
pub const FLOOR: f64 = 1e-6;
pub const INSTANCES: u64 = 20;

#[derive(Default, Debug)]
pub struct Report {
    pub max_relative: f64,
    pub checked: usize,
    pub skipped: usize,
}

impl Report {
    pub fn merge(&mut self, other: Report) {
        self.max_relative = self.max_relative.max(other.max_relative);
        self.checked += other.checked;
        self.skipped += other.skipped;
    }

    pub fn passed(&self) -> bool {
        self.checked > 0
            && self.max_relative < MAX_RELATIVE_ERROR
            && self.skipped * 20 <= self.checked + self.skipped
    }

    pub fn assert_ok(&self, name: &str) {
        eprintln!(
            "{name}: max relative error {:.2e}, {} checked, {} skipped",
            self.max_relative, self.checked, self.skipped
        );
        assert!(self.checked > 0, "{name}: nothing checked");
        assert!(
            self.max_relative < MAX_RELATIVE_ERROR,
            "{name}: max relative error {:.3e} over {} coordinates",
            self.max_relative,
            self.checked
        );
        assert!(
            self.skipped * 20 <= self.checked + self.skipped,
            "{name}: {} of {} coordinates sat on kinks",
            self.skipped,
            self.checked + self.skipped
        );
    }
}

pub type Slot<M> = fn(&mut M, usize) -> &mut Matrix;

/// Compares `analytic[s]` with central differences of `eval` over (a sample
/// of) each slot's entries.
pub fn fd_check<M>(
    m: &mut M,
    slot: Slot<M>,
    analytic: &[Matrix],
    eval: impl Fn(&mut M) -> (f64, u64),
    per_slot: usize,
    rng: &mut ChaCha8Rng,
) -> Report {
    let (_, base_sig) = eval(m);
    let mut report = Report::default();
    for (s, grad) in analytic.iter().enumerate() {
        let len = slot(m, s).len();
        assert_eq!(len, grad.len(), "slot {s} shape");
        let coords: Vec<usize> = if len <= per_slot {
            (0..len).collect()
        } else {
            (0..per_slot).map(|_| rng.random_range(0..len)).collect()
        };
        for i in coords {
            let orig = slot(m, s).as_slice()[i];
            slot(m, s).as_mut_slice()[i] = orig + STEP;
            let (plus, sig_plus) = eval(m);
            slot(m, s).as_mut_slice()[i] = orig - STEP;
            let (minus, sig_minus) = eval(m);
            slot(m, s).as_mut_slice()[i] = orig;
            if sig_plus != base_sig || sig_minus != base_sig {
                report.skipped += 1;
                continue;
            }
            let numeric = (plus - minus) / (2.0 * STEP);
            let a = grad.as_slice()[i];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(FLOOR);
            report.max_relative = report.max_relative.max(rel);
            report.checked += 1;
        }
    }
    report
}

pub fn random_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
    Matrix::from_vec(
        rows,
        cols,
        (0..rows * cols)
            .map(|_| rng.random_range(-1.0..1.0))
            .collect(),
    )
    .unwrap()
}

pub fn weighted_sum(out: &Matrix, r: &Matrix) -> f64 {
    out.as_slice()
        .iter()
        .zip(r.as_slice())
        .map(|(a, b)| a * b)
        .sum()
}

fn random_graph(rng: &mut ChaCha8Rng, min: usize, max: usize) -> Graph {
    let n = rng.random_range(min..=max);
    let p = rng.random_range(0.2..0.7);
    gnp(n, p, rng)
}

struct GcnFixture {
    layer: GcnLayer,
    adj: NormalizedAdjacency,
    h: Matrix,
    r: Matrix,
}

pub fn gcn_layer() -> Report {
    let mut total = Report::default();
    for seed in 0..INSTANCES {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_graph(&mut rng, 3, 10);
        let (inp, out) = (rng.random_range(1..6), rng.random_range(1..6));
        let act = if seed % 2 == 0 {
            Activation::Relu
        } else {
            Activation::Linear
        };
        let mut f = GcnFixture {
            layer: GcnLayer::new(inp, out, act, &mut rng),
            adj: normalize_adjacency(&g),
            h: random_matrix(g.node_count(), inp, &mut rng),
            r: random_matrix(g.node_count(), out, &mut rng),
        };
        f.layer.bias.value = random_matrix(1, out, &mut rng);
        let eval = |f: &mut GcnFixture| {
            let y = f.layer.forward(&f.adj, &f.h).unwrap();
            let mut hs = DefaultHasher::new();
            f.layer.signature(&mut hs);
            (weighted_sum(&y, &f.r), hs.finish())
        };
        f.layer.weight.zero_grad();
        f.layer.bias.zero_grad();
        f.layer.forward(&f.adj, &f.h).unwrap();
        let dh = f.layer.backward(&f.adj, &f.r).unwrap();
        let analytic = [f.layer.weight.grad.clone(), f.layer.bias.grad.clone(), dh];
        let slot: Slot<GcnFixture> = |f, s| match s {
            0 => &mut f.layer.weight.value,
            1 => &mut f.layer.bias.value,
            _ => &mut f.h,
        };
        total.merge(fd_check(&mut f, slot, &analytic, eval, 40, &mut rng));
    }
    total
}

pub struct LinearFixture {
    pub layer: Linear,
    pub x: Matrix,
    pub r: Matrix,
}

pub fn linear_layer() -> Report {
    let mut total = Report::default();
    for seed in 0..INSTANCES {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let (rows, inp, out) = (
            rng.random_range(1..6),
            rng.random_range(1..8),
            rng.random_range(1..8),
        );
        let act = if seed % 2 == 0 {
            Activation::Relu
        } else {
            Activation::Linear
        };
        let mut f = LinearFixture {
            layer: Linear::new(inp, out, act, &mut rng),
            x: random_matrix(rows, inp, &mut rng),
            r: random_matrix(rows, out, &mut rng),
        };
        f.layer.bias.value = random_matrix(1, out, &mut rng);
        let eval = |f: &mut LinearFixture| {
            let y = f.layer.forward(&f.x).unwrap();
            let mut hs = DefaultHasher::new();
            f.layer.signature(&mut hs);
            (weighted_sum(&y, &f.r), hs.finish())
        };
        f.layer.forward(&f.x).unwrap();
        let dx = f.layer.backward(&f.r).unwrap();
        let analytic = [f.layer.weight.grad.clone(), f.layer.bias.grad.clone(), dx];
        let slot: Slot<LinearFixture> = |f, s| match s {
            0 => &mut f.layer.weight.value,
            1 => &mut f.layer.bias.value,
            _ => &mut f.x,
        };
        total.merge(fd_check(&mut f, slot, &analytic, eval, 40, &mut rng));
    }
    total
}

struct ConvFixture {
    conv: Conv1d,
    xs: Vec<Matrix>,
    rs: Vec<Matrix>,
}

pub fn conv1d_layer() -> Report {
    let mut total = Report::default();
    for seed in 0..INSTANCES {
        let mut rng = ChaCha8Rng::seed_from_u64(200 + seed);
        let (cin, cout) = (rng.random_range(1..4), rng.random_range(1..4));
        let kernel = rng.random_range(1..4);
        let stride = rng.random_range(1..3);
        let mut conv = Conv1d::new(cin, cout, kernel, stride, &mut rng).unwrap();
        conv.bias.value = random_matrix(1, cout, &mut rng);
        let count = rng.random_range(1..4);
        let mut xs = Vec::new();
        let mut rs = Vec::new();
        for _ in 0..count {
            let len = rng.random_range(kernel..kernel + 6);
            let out_len = conv.output_length(len).unwrap();
            xs.push(random_matrix(len, cin, &mut rng));
            rs.push(random_matrix(out_len, cout, &mut rng));
        }
        let mut f = ConvFixture { conv, xs, rs };
        let eval = |f: &mut ConvFixture| {
            let ys = f.conv.forward(&f.xs).unwrap();
            (
                ys.iter().zip(&f.rs).map(|(y, r)| weighted_sum(y, r)).sum(),
                0,
            )
        };
        f.conv.forward(&f.xs).unwrap();
        let dxs = f.conv.backward(&f.rs).unwrap();
        let mut analytic = vec![f.conv.weight.grad.clone(), f.conv.bias.grad.clone()];
        analytic.extend(dxs);
        let slot: Slot<ConvFixture> = |f, s| match s {
            0 => &mut f.conv.weight.value,
            1 => &mut f.conv.bias.value,
            i => &mut f.xs[i - 2],
        };
        total.merge(fd_check(&mut f, slot, &analytic, eval, 40, &mut rng));
    }
    total
}

struct SortFixture {
    gcn: GcnLayer,
    pool: SortPooling,
    fc: Linear,
    adj: NormalizedAdjacency,
    offsets: Vec<usize>,
    h: Matrix,
    r: Matrix,
}

impl SortFixture {
    fn run(&mut self) -> Matrix {
        let z = self.gcn.forward(&self.adj, &self.h).unwrap();
        let pooled = self.pool.forward(&z, &self.offsets).unwrap();
        let flat: Vec<Matrix> = pooled
            .into_iter()
            .map(|p| {
                let n = p.len();
                p.reshape(1, n).unwrap()
            })
            .collect();
        self.fc.forward(&Matrix::vstack(&flat).unwrap()).unwrap()
    }
}

pub fn sort_pooling_path() -> Report {
    let mut total = Report::default();
    for seed in 0..INSTANCES {
        let mut rng = ChaCha8Rng::seed_from_u64(300 + seed);
        let graphs: Vec<Graph> = (0..rng.random_range(1..4))
            .map(|_| random_graph(&mut rng, 2, 9))
            .collect();
        let adj = NormalizedAdjacency::block_diagonal(
            graphs
                .iter()
                .map(normalize_adjacency)
                .collect::<Vec<_>>()
                .iter(),
        );
        let mut offsets = vec![0];
        for g in &graphs {
            offsets.push(offsets.last().unwrap() + g.node_count());
        }
        let n = *offsets.last().unwrap();
        let (inp, d) = (rng.random_range(1..5), rng.random_range(1..5));
        let k = rng.random_range(1..8);
        let out = rng.random_range(1..4);
        let mut f = SortFixture {
            gcn: GcnLayer::new(inp, d, Activation::Linear, &mut rng),
            pool: SortPooling::new(k).unwrap(),
            fc: Linear::new(k * d, out, Activation::Relu, &mut rng),
            adj,
            offsets,
            h: random_matrix(n, inp, &mut rng),
            r: random_matrix(graphs.len(), out, &mut rng),
        };
        let eval = |f: &mut SortFixture| {
            let y = f.run();
            let mut hs = DefaultHasher::new();
            f.pool.signature(&mut hs);
            f.fc.signature(&mut hs);
            (weighted_sum(&y, &f.r), hs.finish())
        };
        f.run();
        let d_flat = f.fc.backward(&f.r).unwrap();
        let grads: Vec<Matrix> = (0..d_flat.rows())
            .map(|i| Matrix::from_vec(k, d, d_flat.row(i).to_vec()).unwrap())
            .collect();
        let dz = f.pool.backward(&grads).unwrap();
        let dh = f.gcn.backward(&f.adj, &dz).unwrap();
        let analytic = [
            f.gcn.weight.grad.clone(),
            f.gcn.bias.grad.clone(),
            f.fc.weight.grad.clone(),
            dh,
        ];
        let slot: Slot<SortFixture> = |f, s| match s {
            0 => &mut f.gcn.weight.value,
            1 => &mut f.gcn.bias.value,
            2 => &mut f.fc.weight.value,
            _ => &mut f.h,
        };
        total.merge(fd_check(&mut f, slot, &analytic, eval, 40, &mut rng));
    }
    total
}

struct DropoutFixture {
    drop: Dropout,
    mask: Option<Vec<f64>>,
    x: Matrix,
    r: Matrix,
}

pub fn dropout_off_and_fixed_mask() -> Report {
    let mut total = Report::default();
    for seed in 0..INSTANCES {
        let mut rng = ChaCha8Rng::seed_from_u64(400 + seed);
        let (rows, cols) = (rng.random_range(1..6), rng.random_range(1..6));
        let p = 0.5;
        let mask = (seed % 2 == 1).then(|| {
            (0..rows * cols)
                .map(|_| if rng.random::<f64>() < p { 0.0 } else { 2.0 })
                .collect()
        });
        let mut f = DropoutFixture {
            drop: Dropout::new(p).unwrap(),
            mask,
            x: random_matrix(rows, cols, &mut rng),
            r: random_matrix(rows, cols, &mut rng),
        };
        let eval = |f: &mut DropoutFixture| {
            let y = match &f.mask {
                Some(m) => f.drop.forward_with_mask(&f.x, m.clone()),
                None => f
                    .drop
                    .forward(&f.x, false, &mut ChaCha8Rng::seed_from_u64(0)),
            };
            (weighted_sum(&y, &f.r), 0)
        };
        eval(&mut f);
        let analytic = [f.drop.backward(&f.r)];
        let slot: Slot<DropoutFixture> = |f, _| &mut f.x;
        total.merge(fd_check(&mut f, slot, &analytic, eval, 40, &mut rng));
    }
    total
}

struct VecFixture {
    a: Matrix,
    b: Matrix,
    targets: Vec<f64>,
}

pub fn bce() -> Report {
    let mut total = Report::default();
    for seed in 0..INSTANCES {
        let mut rng = ChaCha8Rng::seed_from_u64(500 + seed);
        let n = rng.random_range(1..20);
        let p =
            Matrix::from_vec(1, n, (0..n).map(|_| rng.random_range(0.02..0.98)).collect()).unwrap();
        let targets = (0..n)
            .map(|_| f64::from(rng.random_range(0..2u8)))
            .collect();
        let mut f = VecFixture {
            a: p,
            b: Matrix::zeros(0, 0),
            targets,
        };
        let eval = |f: &mut VecFixture| (bce_loss(f.a.as_slice(), &f.targets).unwrap().loss, 0);
        let grad = bce_loss(f.a.as_slice(), &f.targets).unwrap().grad;
        let analytic = [Matrix::from_vec(1, n, grad).unwrap()];
        let slot: Slot<VecFixture> = |f, _| &mut f.a;
        total.merge(fd_check(&mut f, slot, &analytic, eval, 40, &mut rng));
    }
    total
}

pub fn margin() -> Report {
    let mut total = Report::default();
    for seed in 0..INSTANCES {
        let mut rng = ChaCha8Rng::seed_from_u64(600 + seed);
        let n = rng.random_range(1..20);
        let mut f = VecFixture {
            a: random_matrix(1, n, &mut rng),
            b: random_matrix(1, n, &mut rng),
            targets: Vec::new(),
        };
        let eval = |f: &mut VecFixture| {
            let out = margin_loss(f.a.as_slice(), f.b.as_slice(), 1.0).unwrap();
            let mut hs = DefaultHasher::new();
            for g in &out.grad_pos {
                hs.write_u8((*g != 0.0) as u8);
            }
            (out.loss, hs.finish())
        };
        let out = margin_loss(f.a.as_slice(), f.b.as_slice(), 1.0).unwrap();
        let analytic = [
            Matrix::from_vec(1, n, out.grad_pos).unwrap(),
            Matrix::from_vec(1, n, out.grad_neg).unwrap(),
        ];
        let slot: Slot<VecFixture> = |f, s| if s == 0 { &mut f.a } else { &mut f.b };
        total.merge(fd_check(&mut f, slot, &analytic, eval, 40, &mut rng));
    }
    total
}

struct ClassifierFixture {
    model: GcnClassifier,
    batch: stargaze::classify::GraphBatch,
}

fn classifier_loss(f: &mut ClassifierFixture) -> (f64, u64) {
    let p = f.model.forward(&f.batch, false).unwrap();
    (
        bce_loss(p.as_slice(), &f.batch.targets).unwrap().loss,
        f.model.region_signature(),
    )
}

pub fn classifier(arch: u8) -> Report {
    let mut total = Report::default();
    for seed in 0..INSTANCES {
        let mut rng = ChaCha8Rng::seed_from_u64(700 + seed + 1000 * arch as u64);
        let graphs: Vec<Graph> = (0..3).map(|_| random_graph(&mut rng, 3, 9)).collect();
        let labels = vec![0, 1, rng.random_range(0..2)];
        let input = ModelInput::unscaled(&graphs, &labels).unwrap();
        let cfg = ClassifierConfig {
            architecture: arch,
            hidden_dim: 6,
            sort_k: 5,
            conv_channels: [3, 4],
            conv_kernel: 2,
            seed,
            ..Default::default()
        };
        let mut f = ClassifierFixture {
            model: GcnClassifier::new(&cfg).unwrap(),
            batch: input.batch(&[0, 1, 2]),
        };
        // Non-zero biases so every parameter has a generic gradient.
        for (_, p) in f.model.named_parameters_mut() {
            if p.value.rows() == 1 {
                p.value = random_matrix(1, p.value.cols(), &mut rng).map(|v| v * 0.1);
            }
        }
        f.model.zero_grad();
        let p = f.model.forward(&f.batch, false).unwrap();
        let bce = bce_loss(p.as_slice(), &f.batch.targets).unwrap();
        f.model.backward(&f.batch, &bce.grad).unwrap();
        let analytic: Vec<Matrix> = f
            .model
            .named_parameters()
            .iter()
            .map(|(_, p)| p.grad.clone())
            .collect();
        let slot: Slot<ClassifierFixture> =
            |f, s| &mut f.model.named_parameters_mut().swap_remove(s).1.value;
        total.merge(fd_check(
            &mut f,
            slot,
            &analytic,
            classifier_loss,
            15,
            &mut rng,
        ));
    }
    total
}

struct SageFixture {
    model: SageModel,
    g: Graph,
    x: Matrix,
    r: Matrix,
}

pub fn sage_encoder() -> Report {
    let mut total = Report::default();
    for seed in 0..INSTANCES {
        let mut rng = ChaCha8Rng::seed_from_u64(900 + seed);
        let g = random_graph(&mut rng, 3, 10);
        let cfg = LinkPredConfig {
            hidden_dim: 7,
            output_dim: 4,
            normalize: seed % 2 == 0,
            seed,
            ..Default::default()
        };
        let mut f = SageFixture {
            model: SageModel::new(&cfg).unwrap(),
            x: random_matrix(g.node_count(), 5, &mut rng),
            r: random_matrix(g.node_count(), 4, &mut rng),
            g,
        };
        let eval = |f: &mut SageFixture| {
            let y = f.model.forward(&f.g, &f.x).unwrap();
            (weighted_sum(&y, &f.r), f.model.region_signature())
        };
        f.model.zero_grad();
        f.model.forward(&f.g, &f.x).unwrap();
        f.model.backward(&f.g, &f.r).unwrap();
        let analytic: Vec<Matrix> = f
            .model
            .named_parameters()
            .iter()
            .map(|(_, p)| p.grad.clone())
            .collect();
        let slot: Slot<SageFixture> =
            |f, s| &mut f.model.named_parameters_mut().swap_remove(s).1.value;
        total.merge(fd_check(&mut f, slot, &analytic, eval, 30, &mut rng));
    }
    total
}
