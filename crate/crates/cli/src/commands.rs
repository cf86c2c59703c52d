use std::io::Write;
use std::path::Path;

use serde::Serialize;
use serde_json::json;
use stargaze::classify::{
    evaluate, train_classifier, ClassifierCheckpoint, GcnClassifier, ModelInput,
};
use stargaze::eval::{confusion, eda_report, pca_project, roc_auc, ClassSummary, RocCurve};
use stargaze::features::PageRankConfig;
use stargaze::forest::fit_forest;
use stargaze::graph::{generate_synthetic, load_dataset, split_dataset, GraphDataset};
use stargaze::linkpred::{recommend, train_linkpred, write_recommendations_csv};
use stargaze::Matrix;

use crate::config::{self, require};
use crate::output::{Failure, OutDir};
use crate::{Command, Common, DatasetArgs, Preset};

const RESOLVED: &str = "resolved_config.json";

pub fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Stats { data, common } => stats(data, common),
        Command::Train {
            data,
            arch,
            lr,
            epochs,
            batch_size,
            hidden_dim,
            seed,
            common,
        } => {
            let mut cfg: config::TrainConfig = config::load(common.config.as_deref())?;
            override_dataset(&mut cfg.edges, &mut cfg.labels, data);
            let c = &mut cfg.classifier;
            set(&mut c.architecture, arch);
            set(&mut c.learning_rate, lr);
            set(&mut c.epochs, epochs);
            set(&mut c.batch_size, batch_size);
            set(&mut c.hidden_dim, hidden_dim);
            set(&mut c.seed, seed);
            train(cfg, common)
        }
        Command::HybridEval {
            checkpoint,
            data,
            trees,
            seed,
            save_forest,
            common,
        } => {
            let mut cfg: config::HybridConfig = config::load(common.config.as_deref())?;
            if checkpoint.is_some() {
                cfg.checkpoint = checkpoint;
            }
            override_dataset(&mut cfg.edges, &mut cfg.labels, data);
            set(&mut cfg.forest.n_trees, trees);
            set(&mut cfg.forest.seed, seed);
            hybrid_eval(cfg, save_forest, common)
        }
        Command::Recommend {
            data,
            graph_id,
            fraction,
            k,
            epochs,
            lr,
            seed,
            common,
        } => {
            let mut cfg: config::RecommendRunConfig = config::load(common.config.as_deref())?;
            override_dataset(&mut cfg.edges, &mut cfg.labels, data);
            if graph_id.is_some() {
                cfg.graph_id = graph_id;
            }
            set(&mut cfg.recommend.fraction, fraction);
            set(&mut cfg.recommend.k, k);
            set(&mut cfg.linkpred.epochs, epochs);
            set(&mut cfg.linkpred.learning_rate, lr);
            if let Some(s) = seed {
                cfg.linkpred.seed = s;
                cfg.recommend.seed = s;
            }
            recommend_cmd(cfg, common)
        }
        Command::Generate {
            kind,
            graphs,
            seed,
            common,
        } => {
            let mut cfg: config::GenerateConfig = config::load(common.config.as_deref())?;
            if kind.is_some() || graphs.is_some() {
                let preset = match kind {
                    Some(p) => p,
                    None => preset_of(&cfg.dataset),
                };
                let n = graphs.unwrap_or(match preset {
                    Preset::TwoDensityClasses => 200,
                    Preset::PlantedPartition => 1,
                    Preset::UniformRandom => 100,
                });
                cfg.dataset = match preset {
                    Preset::TwoDensityClasses => config::two_density_classes(n),
                    Preset::PlantedPartition => config::planted_partition(n),
                    Preset::UniformRandom => config::uniform_random(n),
                };
            }
            set(&mut cfg.seed, seed);
            generate(cfg, common)
        }
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn override_dataset(
    edges: &mut Option<std::path::PathBuf>,
    labels: &mut Option<std::path::PathBuf>,
    data: DatasetArgs,
) {
    if data.edges.is_some() {
        *edges = data.edges;
    }
    if data.labels.is_some() {
        *labels = data.labels;
    }
}

fn preset_of(kind: &stargaze::graph::SyntheticKind) -> Preset {
    use stargaze::graph::SyntheticKind as K;
    match kind {
        K::TwoDensityClasses { .. } => Preset::TwoDensityClasses,
        K::PlantedPartition { .. } => Preset::PlantedPartition,
        K::UniformRandom { .. } => Preset::UniformRandom,
    }
}

fn load(edges: &Path, labels: &Path) -> Result<GraphDataset, Failure> {
    let ds = load_dataset(edges, labels)?;
    eprintln!("loaded {} graphs from {}", ds.len(), edges.display());
    Ok(ds)
}

#[derive(Serialize)]
struct ClassReport<'a> {
    graph_count: usize,
    min_nodes: Option<usize>,
    max_nodes: Option<usize>,
    classes: &'a [ClassSummary],
}

fn stats(data: DatasetArgs, common: Common) -> Result<(), Failure> {
    let mut cfg: config::StatsConfig = config::load(common.config.as_deref())?;
    override_dataset(&mut cfg.edges, &mut cfg.labels, data);
    let edges = require(&cfg.edges, "edges")?;
    let labels = require(&cfg.labels, "labels")?;
    let out = OutDir::prepare(&common.out, common.force)?;
    let ds = load(edges, labels)?;
    let report = eda_report(&ds);
    out.write_with("graph_stats.csv", |w| report.write_stats_csv(w))?;
    out.write_with("correlations.csv", |w| report.write_correlations_csv(w))?;
    out.write_json(
        "class_summary.json",
        &ClassReport {
            graph_count: ds.len(),
            min_nodes: report.stats.iter().map(|s| s.node_count).min(),
            max_nodes: report.stats.iter().map(|s| s.node_count).max(),
            classes: &report.classes,
        },
    )?;
    out.write_json(RESOLVED, &cfg)?;
    println!(
        "{} graphs summarised into {}",
        ds.len(),
        common.out.display()
    );
    Ok(())
}

fn train(cfg: config::TrainConfig, common: Common) -> Result<(), Failure> {
    cfg.classifier.validate()?;
    let edges = require(&cfg.edges, "edges")?;
    let labels = require(&cfg.labels, "labels")?;
    let out = OutDir::prepare(&common.out, common.force)?;
    let ds = load(edges, labels)?;
    let seed = cfg.classifier.seed;
    let split = split_dataset(ds.len(), cfg.split, seed)?;
    let (input, scaler) = ModelInput::prepare(&ds, &split, &PageRankConfig::default())?;
    let mut model = GcnClassifier::new(&cfg.classifier)?;
    let report = train_classifier(&mut model, &input, &split)?;
    let test = if split.test.is_empty() {
        None
    } else {
        Some(evaluate(&mut model, &input, &split.test)?)
    };

    let metadata = config::TrainMetadata {
        edges: edges.clone(),
        labels: labels.clone(),
        split: cfg.split,
        split_seed: seed,
    };
    let metadata = serde_json::to_value(metadata).map_err(|e| Failure::Runtime(e.into()))?;
    let checkpoint = ClassifierCheckpoint::capture(&model, &scaler, metadata);
    checkpoint
        .save(&out.path("checkpoint.json"))
        .map_err(|e| Failure::Runtime(e.into()))?;
    out.write_with("train_report.csv", |w| report.write_csv(w))?;
    out.write_json(
        "train_summary.json",
        &json!({
            "best_epoch": report.best_epoch,
            "parameter_count": model.parameter_count(),
            "test_loss": test.map(|t| t.0),
            "test_accuracy": test.map(|t| t.1),
        }),
    )?;
    out.write_json(RESOLVED, &cfg)?;
    let last = report.epochs.last();
    println!(
        "trained architecture {} for {} epochs (best epoch {}, final train loss {:.4}, val loss {:.4})",
        cfg.classifier.architecture,
        report.epochs.len(),
        report.best_epoch,
        last.map_or(f64::NAN, |e| e.train_loss),
        last.map_or(f64::NAN, |e| e.val_loss),
    );
    if let Some((loss, acc)) = test {
        println!("test loss {loss:.4}, test accuracy {acc:.4}");
    }
    Ok(())
}

fn select_labels(ds: &GraphDataset, indices: &[usize]) -> Vec<u8> {
    indices.iter().map(|&i| ds.labels()[i]).collect()
}

fn hybrid_eval(
    cfg: config::HybridConfig,
    save_forest: bool,
    common: Common,
) -> Result<(), Failure> {
    cfg.forest.validate()?;
    let path = require(&cfg.checkpoint, "checkpoint")?;
    let checkpoint = ClassifierCheckpoint::load(path).map_err(|e| match e {
        stargaze::Error::Parse { .. } => Failure::usage(format!("{e}")),
        other => other.into(),
    })?;
    if checkpoint.architecture != 4 {
        return Err(Failure::usage(format!(
            "{} holds architecture {}; embeddings come from architecture 4",
            path.display(),
            checkpoint.architecture
        )));
    }
    let meta: Option<config::TrainMetadata> =
        serde_json::from_value(checkpoint.metadata.clone()).ok();
    let edges = cfg
        .edges
        .clone()
        .or_else(|| meta.as_ref().map(|m| m.edges.clone()));
    let labels = cfg
        .labels
        .clone()
        .or_else(|| meta.as_ref().map(|m| m.labels.clone()));
    let edges = require(&edges, "edges")?;
    let labels = require(&labels, "labels")?;
    let (ratios, split_seed) = meta
        .as_ref()
        .map_or((Default::default(), checkpoint.config.seed), |m| {
            (m.split, m.split_seed)
        });
    let out = OutDir::prepare(&common.out, common.force)?;

    let ds = load(edges, labels)?;
    let split = split_dataset(ds.len(), ratios, split_seed)?;
    if split.test.is_empty() {
        return Err(Failure::runtime("the test split is empty"));
    }
    let input = ModelInput::with_scaler(&ds, &checkpoint.scaler, &PageRankConfig::default())?;
    let mut model = checkpoint.restore()?;
    let train_emb = model.extract_embeddings(&input, &split.train)?;
    let test_emb = model.extract_embeddings(&input, &split.test)?;
    let train_y = select_labels(&ds, &split.train);
    let test_y = select_labels(&ds, &split.test);

    let forest = fit_forest(&train_emb, &train_y, &cfg.forest)?;
    let proba = forest.predict_proba(&test_emb)?;
    let pred: Vec<u8> = proba.iter().map(|&p| u8::from(p >= 0.5)).collect();
    let cm = confusion(&pred, &test_y)?;
    let roc = match roc_auc(&proba, &test_y) {
        Ok(r) => Some(r),
        Err(stargaze::Error::SingleClass) => None,
        Err(e) => return Err(e.into()),
    };
    out.write_json("confusion.json", &cm)?;
    out.write_json(
        "metrics.json",
        &json!({
            "accuracy": cm.accuracy().value,
            "precision_ml": cm.precision().value,
            "recall_ml": cm.recall().value,
            "auc": roc.as_ref().map(|r| r.auc),
        }),
    )?;
    let empty = RocCurve {
        points: Vec::new(),
        auc: f64::NAN,
    };
    out.write_with("roc.csv", |w| roc.as_ref().unwrap_or(&empty).write_csv(w))?;
    let projection = pca_project(&test_emb, 2)?;
    out.write_with("pca2d.csv", |w| {
        write_pca(w, &projection.projected, &test_y)
    })?;
    if save_forest {
        out.write_json("forest.json", &forest)?;
    }
    out.write_json(RESOLVED, &cfg)?;
    println!(
        "hybrid test accuracy {:.4}, precision {:.4}, recall {:.4}, auc {}",
        cm.accuracy().value,
        cm.precision().value,
        cm.recall().value,
        roc.map_or("undefined".to_string(), |r| format!("{:.4}", r.auc)),
    );
    Ok(())
}

fn write_pca<W: Write>(out: W, projected: &Matrix, labels: &[u8]) -> stargaze::Result<()> {
    let mut w = out;
    let io = |e| stargaze::Error::Io {
        path: "<pca>".into(),
        source: e,
    };
    writeln!(w, "pc1,pc2,label").map_err(io)?;
    for (row, label) in projected.iter_rows().zip(labels) {
        writeln!(w, "{},{},{}", row[0], row[1], label).map_err(io)?;
    }
    Ok(())
}

fn recommend_cmd(cfg: config::RecommendRunConfig, common: Common) -> Result<(), Failure> {
    cfg.linkpred.validate()?;
    if cfg.recommend.k == 0 {
        return Err(Failure::usage("k must be at least 1"));
    }
    if !(cfg.recommend.fraction > 0.0 && cfg.recommend.fraction <= 1.0) {
        return Err(Failure::usage(format!(
            "fraction {} must lie in (0, 1]",
            cfg.recommend.fraction
        )));
    }
    let edges = require(&cfg.edges, "edges")?;
    let labels = require(&cfg.labels, "labels")?;
    let graph_id = *require(&cfg.graph_id, "graph-id")?;
    let out = OutDir::prepare(&common.out, common.force)?;
    let ds = load(edges, labels)?;
    let position = ds.position_of(graph_id).ok_or_else(|| {
        Failure::usage(format!("graph id {graph_id} is not in {}", edges.display()))
    })?;
    let g = &ds.graphs()[position];
    if g.edge_count() < 2 {
        return Err(Failure::usage(format!(
            "graph {graph_id} has {} edges; at least 2 are needed",
            g.edge_count()
        )));
    }
    let mut outcome = train_linkpred(g, &cfg.linkpred)?;
    let emb = outcome.predictor.embed(g)?;
    let recs = recommend(g, &emb, &cfg.recommend)?;
    out.write_with("recommendations.csv", |w| {
        write_recommendations_csv(w, graph_id, &recs)
    })?;
    out.write_json(
        "auc.json",
        &json!({
            "graph_id": graph_id,
            "auc": outcome.auc,
            "common_neighbor_auc": outcome.common_neighbor_auc,
            "held_out_edges": outcome.holdout.held_out.len(),
            "final_loss": outcome.losses.last(),
        }),
    )?;
    out.write_json("holdout.json", &outcome.holdout)?;
    out.write_json(RESOLVED, &cfg)?;
    println!(
        "graph {graph_id}: held-out auc {:.4} (common neighbours {:.4}), {} sources recommended",
        outcome.auc,
        outcome.common_neighbor_auc,
        recs.len()
    );
    Ok(())
}

fn generate(cfg: config::GenerateConfig, common: Common) -> Result<(), Failure> {
    let out = OutDir::prepare(&common.out, common.force)?;
    let ds = generate_synthetic(&cfg.dataset, cfg.seed)?;
    ds.write_distribution(&out.path("git_edges.json"), &out.path("git_target.csv"))
        .map_err(|e| Failure::Runtime(e.into()))?;
    out.write_json(RESOLVED, &cfg)?;
    println!("wrote {} graphs to {}", ds.len(), common.out.display());
    Ok(())
}
