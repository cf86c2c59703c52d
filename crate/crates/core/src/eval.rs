//! Classification metrics, ROC analysis, correlations and PCA.

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::graph::{GraphDataset, GraphStats, MACHINE_LEARNING, WEB_DEVELOPMENT};
use crate::nn::Matrix;
use crate::rng::{self, streams};
use crate::{Error, Result};

/// Counts with class 1 (machine learning) as the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

/// A ratio that falls back to 0 when its denominator is 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ratio {
    pub value: f64,
    pub defined: bool,
}

impl Ratio {
    fn of(num: u64, den: u64) -> Self {
        if den == 0 {
            Ratio {
                value: 0.0,
                defined: false,
            }
        } else {
            Ratio {
                value: num as f64 / den as f64,
                defined: true,
            }
        }
    }
}

pub fn confusion(pred: &[u8], y: &[u8]) -> Result<ConfusionMatrix> {
    if pred.len() != y.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} predictions but {} labels",
            pred.len(),
            y.len()
        )));
    }
    let mut cm = ConfusionMatrix::default();
    for (&p, &t) in pred.iter().zip(y) {
        match (p != 0, t != 0) {
            (true, true) => cm.tp += 1,
            (true, false) => cm.fp += 1,
            (false, false) => cm.tn += 1,
            (false, true) => cm.fn_ += 1,
        }
    }
    Ok(cm)
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn accuracy(&self) -> Ratio {
        Ratio::of(self.tp + self.tn, self.total())
    }

    pub fn precision(&self) -> Ratio {
        Ratio::of(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> Ratio {
        Ratio::of(self.tp, self.tp + self.fn_)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    /// Scores `>= threshold` are called positive.
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

/// ROC curve by sweeping every distinct score from high to low.
///
/// The trapezoid area is accumulated in integers as `2 * area * P * N`, which
/// is exactly `2 * wins + ties` over all positive/negative pairs. The AUC is
/// therefore bit-identical to the Mann–Whitney statistic with ties as ½.
pub fn roc_auc(scores: &[f64], y: &[u8]) -> Result<RocCurve> {
    if scores.len() != y.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} scores but {} labels",
            scores.len(),
            y.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::NonFinite("roc scores"));
    }
    let positives = y.iter().filter(|&&l| l != 0).count() as u64;
    let negatives = y.len() as u64 - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut points = vec![RocPoint {
        threshold: f64::INFINITY,
        fpr: 0.0,
        tpr: 0.0,
    }];
    let (mut tp, mut fp) = (0u64, 0u64);
    let mut doubled_area: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let threshold = scores[order[i]];
        let (tp0, fp0) = (tp, fp);
        while i < order.len() && scores[order[i]] == threshold {
            if y[order[i]] != 0 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        doubled_area += u128::from(fp - fp0) * u128::from(tp + tp0);
        points.push(RocPoint {
            threshold,
            fpr: fp as f64 / negatives as f64,
            tpr: tp as f64 / positives as f64,
        });
    }
    let auc = doubled_area as f64 / (2 * u128::from(positives) * u128::from(negatives)) as f64;
    Ok(RocCurve { points, auc })
}

impl RocCurve {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let err = |e: csv::Error| Error::parse("<roc>", e);
        w.write_record(["threshold", "fpr", "tpr"]).map_err(err)?;
        for p in &self.points {
            w.write_record([
                p.threshold.to_string(),
                p.fpr.to_string(),
                p.tpr.to_string(),
            ])
            .map_err(err)?;
        }
        w.flush().map_err(|e| Error::io("<roc>", e))
    }
}

/// Sample Pearson correlation coefficient.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} vs {} values",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::InvalidParameter(
            "correlation needs at least two points".into(),
        ));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(Error::ZeroVariance("x"));
    }
    if syy == 0.0 {
        return Err(Error::ZeroVariance("y"));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

pub const PCA_TOLERANCE: f64 = 1e-10;
pub const PCA_MAX_ITERATIONS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Pca {
    pub mean: Vec<f64>,
    /// One unit-length component per row.
    pub components: Matrix,
    pub explained_variance: Vec<f64>,
    pub explained_variance_ratio: Vec<f64>,
    /// False if any component hit the iteration cap before the tolerance.
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PcaProjection {
    pub pca: Pca,
    pub projected: Matrix,
}

fn covariance(x: &Matrix, mean: &[f64]) -> Matrix {
    let (n, d) = x.shape();
    let mut centered = x.clone();
    for r in 0..n {
        for (v, m) in centered.row_mut(r).iter_mut().zip(mean) {
            *v -= m;
        }
    }
    let mut cov = centered.t_matmul(&centered).expect("shapes agree");
    cov.scale(1.0 / (n as f64 - 1.0));
    debug_assert_eq!(cov.shape(), (d, d));
    cov
}

fn normalize(v: &mut [f64]) -> f64 {
    let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|a| *a /= norm);
    }
    norm
}

fn orthogonalize(v: &mut [f64], basis: &[Vec<f64>]) {
    for b in basis {
        let dot: f64 = v.iter().zip(b).map(|(a, c)| a * c).sum();
        v.iter_mut().zip(b).for_each(|(a, c)| *a -= dot * c);
    }
}

fn apply(cov: &Matrix, v: &[f64]) -> Vec<f64> {
    cov.iter_rows()
        .map(|r| r.iter().zip(v).map(|(a, b)| a * b).sum())
        .collect()
}

fn orient(v: &mut [f64]) {
    let mut best = 0;
    for (i, a) in v.iter().enumerate() {
        if a.abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.iter_mut().for_each(|a| *a = -*a);
    }
}

/// Top `dims` principal components by power iteration with deflation.
pub fn pca_fit(x: &Matrix, dims: usize) -> Result<Pca> {
    let (n, d) = x.shape();
    if dims == 0 {
        return Err(Error::InvalidParameter(
            "at least one component is required".into(),
        ));
    }
    if dims > d {
        return Err(Error::InvalidParameter(format!(
            "{dims} components requested from {d} features"
        )));
    }
    if n < dims.max(2) {
        return Err(Error::InvalidParameter(format!(
            "{n} rows cannot support {dims} components"
        )));
    }
    x.ensure_finite("pca input")?;
    let mean: Vec<f64> = x.column_sums().into_iter().map(|s| s / n as f64).collect();
    let mut cov = covariance(x, &mean);
    let trace: f64 = (0..d).map(|i| cov.get(i, i)).sum();
    let mut rng = rng::substream(0, streams::PCA);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(dims);
    let mut variances = Vec::with_capacity(dims);
    let mut converged = true;

    for _ in 0..dims {
        let mut v: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        orthogonalize(&mut v, &basis);
        normalize(&mut v);
        let mut done = false;
        for _ in 0..PCA_MAX_ITERATIONS {
            let mut next = apply(&cov, &v);
            orthogonalize(&mut next, &basis);
            if normalize(&mut next) <= f64::MIN_POSITIVE {
                // Remaining variance is zero; any orthogonal direction works.
                done = true;
                break;
            }
            orient(&mut next);
            let delta = next
                .iter()
                .zip(&v)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            v = next;
            if delta < PCA_TOLERANCE {
                done = true;
                break;
            }
        }
        converged &= done;
        orient(&mut v);
        let cv = apply(&cov, &v);
        let lambda: f64 = cv.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>().max(0.0);
        for r in 0..d {
            for c in 0..d {
                let val = cov.get(r, c) - lambda * v[r] * v[c];
                cov.set(r, c, val);
            }
        }
        basis.push(v);
        variances.push(lambda);
    }

    let ratio = variances
        .iter()
        .map(|l| if trace > 0.0 { l / trace } else { 0.0 })
        .collect();
    Ok(Pca {
        mean,
        components: Matrix::from_rows(&basis)?,
        explained_variance: variances,
        explained_variance_ratio: ratio,
        converged,
    })
}

impl Pca {
    pub fn transform(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.mean.len() {
            return Err(Error::ShapeMismatch(format!(
                "pca was fit on {} features, got {}",
                self.mean.len(),
                x.cols()
            )));
        }
        let mut centered = x.clone();
        for r in 0..x.rows() {
            for (v, m) in centered.row_mut(r).iter_mut().zip(&self.mean) {
                *v -= m;
            }
        }
        centered.matmul_t(&self.components)
    }
}

pub fn pca_project(x: &Matrix, dims: usize) -> Result<PcaProjection> {
    let pca = pca_fit(x, dims)?;
    let projected = pca.transform(x)?;
    Ok(PcaProjection { pca, projected })
}

pub const STAT_NAMES: [&str; 4] = ["nodes", "edges", "average_degree", "density"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassSummary {
    pub label: u8,
    pub name: &'static str,
    pub count: usize,
    /// Means in [`STAT_NAMES`] order; `None` for an empty class.
    pub mean_nodes: Option<f64>,
    pub mean_edges: Option<f64>,
    pub mean_average_degree: Option<f64>,
    pub mean_density: Option<f64>,
    pub min_nodes: Option<usize>,
    pub max_nodes: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EdaReport {
    pub ids: Vec<u64>,
    pub labels: Vec<u8>,
    pub stats: Vec<GraphStats>,
    /// Pearson matrix over [`STAT_NAMES`]; NaN where a variance is zero.
    pub correlations: [[f64; 4]; 4],
    pub classes: Vec<ClassSummary>,
}

fn stat_columns(stats: &[&GraphStats]) -> [Vec<f64>; 4] {
    [
        stats.iter().map(|s| s.node_count as f64).collect(),
        stats.iter().map(|s| s.edge_count as f64).collect(),
        stats.iter().map(|s| s.average_degree).collect(),
        stats.iter().map(|s| s.density).collect(),
    ]
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

pub fn eda_report(ds: &GraphDataset) -> EdaReport {
    let stats: Vec<GraphStats> = ds.graphs().iter().map(|g| g.stats()).collect();
    let refs: Vec<&GraphStats> = stats.iter().collect();
    let columns = stat_columns(&refs);
    let mut correlations = [[f64::NAN; 4]; 4];
    for (i, row) in correlations.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            *cell = if i == j {
                1.0
            } else {
                pearson(&columns[i], &columns[j]).unwrap_or(f64::NAN)
            };
        }
    }
    let classes = [
        (WEB_DEVELOPMENT, "web_development"),
        (MACHINE_LEARNING, "machine_learning"),
    ]
    .into_iter()
    .map(|(label, name)| {
        let members: Vec<&GraphStats> = stats
            .iter()
            .zip(ds.labels())
            .filter(|(_, &l)| l == label)
            .map(|(s, _)| s)
            .collect();
        let [nodes, edges, degree, density] = stat_columns(&members);
        ClassSummary {
            label,
            name,
            count: members.len(),
            mean_nodes: mean(&nodes),
            mean_edges: mean(&edges),
            mean_average_degree: mean(&degree),
            mean_density: mean(&density),
            min_nodes: members.iter().map(|s| s.node_count).min(),
            max_nodes: members.iter().map(|s| s.node_count).max(),
        }
    })
    .collect();
    EdaReport {
        ids: ds.ids().to_vec(),
        labels: ds.labels().to_vec(),
        stats,
        correlations,
        classes,
    }
}

impl EdaReport {
    pub fn write_stats_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let err = |e: csv::Error| Error::parse("<graph stats>", e);
        w.write_record([
            "id",
            "target",
            "nodes",
            "edges",
            "average_degree",
            "density",
        ])
        .map_err(err)?;
        for ((id, label), s) in self.ids.iter().zip(&self.labels).zip(&self.stats) {
            w.write_record([
                id.to_string(),
                label.to_string(),
                s.node_count.to_string(),
                s.edge_count.to_string(),
                s.average_degree.to_string(),
                s.density.to_string(),
            ])
            .map_err(err)?;
        }
        w.flush().map_err(|e| Error::io("<graph stats>", e))
    }

    pub fn write_correlations_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let err = |e: csv::Error| Error::parse("<correlations>", e);
        let mut header = vec!["variable"];
        header.extend(STAT_NAMES);
        w.write_record(&header).map_err(err)?;
        for (name, row) in STAT_NAMES.iter().zip(&self.correlations) {
            let mut record = vec![name.to_string()];
            record.extend(row.iter().map(f64::to_string));
            w.write_record(&record).map_err(err)?;
        }
        w.flush().map_err(|e| Error::io("<correlations>", e))
    }

    pub fn correlation(&self, a: &str, b: &str) -> Option<f64> {
        let i = STAT_NAMES.iter().position(|n| *n == a)?;
        let j = STAT_NAMES.iter().position(|n| *n == b)?;
        Some(self.correlations[i][j])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Graph;

    #[test]
    fn confusion_formulas() {
        let cm = ConfusionMatrix {
            tp: 3,
            fp: 1,
            fn_: 1,
            tn: 5,
        };
        assert_eq!(cm.precision().value, 0.75);
        assert_eq!(cm.recall().value, 0.75);
        assert_eq!(cm.accuracy().value, 0.8);
        let y = [1, 0, 1, 1, 0];
        let cm = confusion(&y, &y).unwrap();
        assert_eq!((cm.fp, cm.fn_, cm.accuracy().value), (0, 0, 1.0));
        let flipped: Vec<u8> = y.iter().map(|l| 1 - l).collect();
        assert_eq!(confusion(&flipped, &y).unwrap().accuracy().value, 0.0);
        assert!(confusion(&[1], &[1, 0]).is_err());
    }

    #[test]
    fn undefined_ratios_are_flagged() {
        let cm = confusion(&[0, 0], &[0, 0]).unwrap();
        assert_eq!(
            cm.precision(),
            Ratio {
                value: 0.0,
                defined: false
            }
        );
        assert_eq!(
            cm.recall(),
            Ratio {
                value: 0.0,
                defined: false
            }
        );
        assert!(cm.accuracy().defined);
    }

    #[test]
    fn confusion_json_uses_fn_key() {
        let cm = ConfusionMatrix {
            tp: 1,
            fp: 2,
            tn: 3,
            fn_: 4,
        };
        let text = serde_json::to_string(&cm).unwrap();
        assert_eq!(text, r#"{"tp":1,"fp":2,"tn":3,"fn":4}"#);
    }

    #[test]
    fn auc_examples() {
        assert_eq!(
            roc_auc(&[0.1, 0.4, 0.35, 0.8], &[0, 0, 1, 1]).unwrap().auc,
            0.75
        );
        assert_eq!(
            roc_auc(&[0.1, 0.2, 0.8, 0.9], &[0, 0, 1, 1]).unwrap().auc,
            1.0
        );
        assert_eq!(roc_auc(&[0.5; 6], &[0, 1, 0, 1, 1, 0]).unwrap().auc, 0.5);
        assert!(matches!(
            roc_auc(&[0.1, 0.2], &[1, 1]),
            Err(Error::SingleClass)
        ));
        assert!(roc_auc(&[f64::NAN, 0.2], &[0, 1]).is_err());
    }

    #[test]
    fn roc_endpoints() {
        let roc = roc_auc(&[0.3, 0.1, 0.9, 0.3, 0.5], &[1, 0, 1, 0, 0]).unwrap();
        let first = roc.points[0];
        let last = *roc.points.last().unwrap();
        assert_eq!((first.fpr, first.tpr), (0.0, 0.0));
        assert_eq!((last.fpr, last.tpr), (1.0, 1.0));
        for w in roc.points.windows(2) {
            assert!(w[1].fpr >= w[0].fpr && w[1].tpr >= w[0].tpr);
        }
    }

    #[test]
    fn pearson_examples() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        assert!((pearson(&x, &y).unwrap() - 1.0).abs() < 1e-15);
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((pearson(&x, &neg).unwrap() + 1.0).abs() < 1e-15);
        assert!((pearson(&[1.0, 2.0, 3.0], &[1.0, 3.0, 2.0]).unwrap() - 0.5).abs() < 1e-15);
        assert!(matches!(
            pearson(&[1.0, 1.0], &[1.0, 2.0]),
            Err(Error::ZeroVariance(_))
        ));
    }

    #[test]
    fn pca_on_a_line() {
        let rows: Vec<Vec<f64>> = (0..10)
            .map(|i| vec![i as f64, 2.0 * i as f64 - 3.0])
            .collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let p = pca_project(&x, 2).unwrap();
        assert!((p.pca.explained_variance_ratio[0] - 1.0).abs() < 1e-12);
        assert!(p.pca.explained_variance_ratio[1].abs() < 1e-12);
        let c = p.pca.components.row(0);
        assert!(c[1] > 0.0 && (c[1] / c[0] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn pca_mean_maps_to_origin() {
        let rows: Vec<Vec<f64>> = (0..12)
            .map(|i| {
                let t = i as f64;
                vec![t.sin(), t.cos() * 2.0, t * 0.1]
            })
            .collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let p = pca_fit(&x, 2).unwrap();
        let m = Matrix::from_rows(std::slice::from_ref(&p.mean)).unwrap();
        let z = p.transform(&m).unwrap();
        assert!(z.as_slice().iter().all(|v| v.abs() < 1e-12));
        assert!(p.converged);
    }

    #[test]
    fn pca_errors() {
        let x = Matrix::zeros(5, 2);
        assert!(pca_fit(&x, 3).is_err());
        assert!(pca_fit(&Matrix::zeros(1, 2), 1).is_err());
        assert!(pca_fit(&x, 0).is_err());
    }

    #[test]
    fn eda_matrix_is_symmetric_with_unit_diagonal() {
        let graphs = vec![
            Graph::path(3),
            Graph::complete(5),
            Graph::star(6),
            Graph::cycle(4),
        ];
        let ds = GraphDataset::new(graphs, vec![0, 1, 0, 1], vec![1, 2, 3, 4]).unwrap();
        let r = eda_report(&ds);
        for i in 0..4 {
            assert_eq!(r.correlations[i][i], 1.0);
            for j in 0..4 {
                assert_eq!(
                    r.correlations[i][j].to_bits(),
                    r.correlations[j][i].to_bits()
                );
            }
        }
        assert_eq!(r.classes[1].mean_nodes, Some(4.5));
        assert_eq!(r.classes[0].count, 2);
    }

    #[test]
    fn eda_single_class() {
        let ds = GraphDataset::new(vec![Graph::path(3), Graph::path(4)], vec![1, 1], vec![0, 1])
            .unwrap();
        let r = eda_report(&ds);
        assert_eq!(r.classes[0].count, 0);
        assert_eq!(r.classes[0].mean_nodes, None);
    }
}
