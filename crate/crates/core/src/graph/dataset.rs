use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Graph;
use crate::{Error, Result};

pub const WEB_DEVELOPMENT: u8 = 0;
pub const MACHINE_LEARNING: u8 = 1;

/// Labelled collection of graphs, ordered by ascending dataset id.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphDataset {
    graphs: Vec<Graph>,
    labels: Vec<u8>,
    ids: Vec<u64>,
}

impl GraphDataset {
    pub fn new(graphs: Vec<Graph>, labels: Vec<u8>, ids: Vec<u64>) -> Result<Self> {
        if graphs.len() != labels.len() || graphs.len() != ids.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} graphs, {} labels, {} ids",
                graphs.len(),
                labels.len(),
                ids.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l > 1) {
            return Err(Error::InvalidParameter(format!(
                "label {bad} is not binary"
            )));
        }
        Ok(GraphDataset {
            graphs,
            labels,
            ids,
        })
    }

    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    pub fn graphs(&self) -> &[Graph] {
        &self.graphs
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn ids(&self) -> &[u64] {
        &self.ids
    }

    pub fn position_of(&self, id: u64) -> Option<usize> {
        self.ids.iter().position(|&x| x == id)
    }

    pub fn subset(&self, indices: &[usize]) -> GraphDataset {
        GraphDataset {
            graphs: indices.iter().map(|&i| self.graphs[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            ids: indices.iter().map(|&i| self.ids[i]).collect(),
        }
    }

    /// Writes the edge-JSON and label-CSV pair that [`load_dataset`] reads.
    ///
    /// Nodes beyond the largest edge endpoint cannot be represented in that
    /// layout and are dropped on reload.
    pub fn write_distribution(&self, edges_path: &Path, labels_path: &Path) -> Result<()> {
        let mut edges = BTreeMap::new();
        for (g, &id) in self.graphs.iter().zip(&self.ids) {
            let list: Vec<[usize; 2]> = g.edges().iter().map(|&(u, v)| [u, v]).collect();
            edges.insert(id, list);
        }
        let file = File::create(edges_path).map_err(|e| Error::io(edges_path, e))?;
        let mut out = BufWriter::new(file);
        // Keys are written in numeric order, matching the public layout.
        write!(out, "{{").map_err(|e| Error::io(edges_path, e))?;
        for (i, (id, list)) in edges.iter().enumerate() {
            let body = serde_json::to_string(list).map_err(|e| Error::parse(edges_path, e))?;
            let sep = if i == 0 { "" } else { ", " };
            write!(out, "{sep}\"{id}\": {body}").map_err(|e| Error::io(edges_path, e))?;
        }
        writeln!(out, "}}").map_err(|e| Error::io(edges_path, e))?;
        out.flush().map_err(|e| Error::io(edges_path, e))?;

        let mut writer =
            csv::Writer::from_path(labels_path).map_err(|e| csv_error(labels_path, e))?;
        writer
            .write_record(["id", "target"])
            .map_err(|e| csv_error(labels_path, e))?;
        for (&id, &label) in self.ids.iter().zip(&self.labels) {
            writer
                .write_record([id.to_string(), label.to_string()])
                .map_err(|e| csv_error(labels_path, e))?;
        }
        writer.flush().map_err(|e| Error::io(labels_path, e))?;
        Ok(())
    }

    /// Writes one JSON object per line: `{"id":..,"n":..,"edges":[[u,v],..],"label":..}`.
    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        for i in 0..self.len() {
            let record = DumpRecord {
                id: self.ids[i],
                n: self.graphs[i].node_count(),
                edges: self.graphs[i]
                    .edges()
                    .iter()
                    .map(|&(u, v)| [u, v])
                    .collect(),
                label: self.labels[i],
            };
            let line = serde_json::to_string(&record).map_err(|e| Error::parse(path, e))?;
            writeln!(out, "{line}").map_err(|e| Error::io(path, e))?;
        }
        out.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_jsonl(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut records = Vec::new();
        for (lineno, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let record: DumpRecord = serde_json::from_str(&line)
                .map_err(|e| Error::parse(path, format!("line {}: {e}", lineno + 1)))?;
            records.push(record);
        }
        records.sort_by_key(|r| r.id);
        let mut graphs = Vec::with_capacity(records.len());
        let mut labels = Vec::with_capacity(records.len());
        let mut ids = Vec::with_capacity(records.len());
        for r in records {
            let pairs: Vec<_> = r.edges.iter().map(|e| (e[0], e[1])).collect();
            let g = Graph::from_edges(r.n, &pairs)
                .map_err(|e| Error::parse(path, format!("graph {}: {e}", r.id)))?;
            graphs.push(g);
            labels.push(r.label);
            ids.push(r.id);
        }
        GraphDataset::new(graphs, labels, ids)
    }
}

#[derive(Serialize, Deserialize)]
struct DumpRecord {
    id: u64,
    n: usize,
    edges: Vec<[usize; 2]>,
    label: u8,
}

#[derive(Deserialize)]
struct LabelRow {
    id: u64,
    target: u8,
}

fn csv_error(path: &Path, err: csv::Error) -> Error {
    Error::parse(path, err)
}

/// Loads the public edge-JSON plus label-CSV distribution.
///
/// Each graph's node count is its largest endpoint plus one; ids that never
/// appear in an edge become degree-0 nodes.
pub fn load_dataset(edges_path: &Path, labels_path: &Path) -> Result<GraphDataset> {
    let raw = std::fs::read_to_string(edges_path).map_err(|e| Error::io(edges_path, e))?;
    let edge_map: HashMap<String, Vec<[u64; 2]>> =
        serde_json::from_str(&raw).map_err(|e| Error::parse(edges_path, e))?;

    let mut edge_lists = BTreeMap::new();
    for (key, list) in edge_map {
        let id: u64 = key
            .trim()
            .parse()
            .map_err(|_| Error::parse(edges_path, format!("graph id {key:?} is not an integer")))?;
        if edge_lists.insert(id, list).is_some() {
            return Err(Error::parse(
                edges_path,
                format!("graph id {id} appears twice"),
            ));
        }
    }

    let file = File::open(labels_path).map_err(|e| Error::io(labels_path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(file);
    let headers = reader
        .headers()
        .map_err(|e| csv_error(labels_path, e))?
        .clone();
    if headers.len() != 2 || &headers[0] != "id" || &headers[1] != "target" {
        return Err(Error::parse(
            labels_path,
            format!(
                "expected header `id,target`, found `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            ),
        ));
    }
    let mut label_map = BTreeMap::new();
    for row in reader.deserialize::<LabelRow>() {
        let row = row.map_err(|e| csv_error(labels_path, e))?;
        if row.target > 1 {
            return Err(Error::parse(
                labels_path,
                format!(
                    "graph {} has target {} (expected 0 or 1)",
                    row.id, row.target
                ),
            ));
        }
        if label_map.insert(row.id, row.target).is_some() {
            return Err(Error::parse(
                labels_path,
                format!("graph id {} appears twice", row.id),
            ));
        }
    }

    if let Some(&id) = edge_lists.keys().find(|id| !label_map.contains_key(id)) {
        return Err(Error::UnmatchedId {
            id,
            present_in: "edge",
            missing_from: "label",
        });
    }
    if let Some(&id) = label_map.keys().find(|id| !edge_lists.contains_key(id)) {
        return Err(Error::UnmatchedId {
            id,
            present_in: "label",
            missing_from: "edge",
        });
    }

    let mut graphs = Vec::with_capacity(edge_lists.len());
    let mut labels = Vec::with_capacity(edge_lists.len());
    let mut ids = Vec::with_capacity(edge_lists.len());
    for (id, list) in edge_lists {
        if list.is_empty() {
            return Err(Error::EmptyEdgeList(id));
        }
        let max = list
            .iter()
            .flat_map(|e| e.iter())
            .copied()
            .max()
            .unwrap_or(0);
        let node_count = usize::try_from(max + 1).map_err(|_| {
            Error::parse(edges_path, format!("graph {id}: node id {max} too large"))
        })?;
        let pairs: Vec<_> = list
            .iter()
            .map(|e| (e[0] as usize, e[1] as usize))
            .collect();
        let g = Graph::from_edges(node_count, &pairs)
            .map_err(|e| Error::parse(edges_path, format!("graph {id}: {e}")))?;
        graphs.push(g);
        labels.push(label_map[&id]);
        ids.push(id);
    }
    GraphDataset::new(graphs, labels, ids)
}
