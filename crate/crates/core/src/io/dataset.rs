//! JSON dataset files:
//! `{"name", "classes", "graphs": [{"n", "edges": [[u, v]], "x"?, "edge_attr"?, "y"}]}`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::tensor::Tensor;

/// Labelled graphs.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub graphs: Vec<Graph>,
    pub labels: Vec<usize>,
    pub feature_dim: usize,
    pub class_count: usize,
}

impl Dataset {
    /// Checks label range, label count and a common feature width. Each
    /// graph's own label is set from `labels`.
    pub fn new(name: impl Into<String>, graphs: Vec<Graph>, labels: Vec<usize>, class_count: usize) -> Result<Dataset> {
        let name = name.into();
        if graphs.len() != labels.len() {
            return Err(Error::Dataset(format!(
                "{} graphs but {} labels",
                graphs.len(),
                labels.len()
            )));
        }
        if let Some((i, &y)) = labels.iter().enumerate().find(|(_, &y)| y >= class_count) {
            return Err(Error::Dataset(format!("graph {i}: label {y} not below class count {class_count}")));
        }
        let feature_dim = graphs.first().map_or(1, |g| g.node_features().cols());
        if let Some(i) = graphs.iter().position(|g| g.node_features().cols() != feature_dim) {
            return Err(Error::Dataset(format!("graph {i}: node feature width differs from graph 0")));
        }
        let graphs = graphs
            .into_iter()
            .zip(&labels)
            .map(|(g, &y)| g.with_label(Some(y)))
            .collect();
        Ok(Dataset {
            name,
            graphs,
            labels,
            feature_dim,
            class_count,
        })
    }

    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    /// Width of raw edge features (0 when no graph has any).
    pub fn edge_feature_dim(&self) -> usize {
        self.graphs
            .iter()
            .find_map(|g| g.edge_features().map(Tensor::cols))
            .unwrap_or(0)
    }
}

#[derive(Serialize, Deserialize)]
struct GraphRecord {
    n: usize,
    edges: Vec<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    x: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    edge_attr: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    y: Option<usize>,
}

#[derive(Serialize, Deserialize)]
struct DatasetFile {
    name: String,
    classes: usize,
    graphs: Vec<GraphRecord>,
}

fn rows(t: &Tensor) -> Vec<Vec<f64>> {
    (0..t.rows()).map(|r| t.row(r).to_vec()).collect()
}

fn to_tensor(rows: &[Vec<f64>], what: &str, i: usize) -> Result<Tensor> {
    if rows.is_empty() {
        return Ok(Tensor::zeros(0, 0));
    }
    Tensor::from_rows(rows).map_err(|_| Error::Dataset(format!("graph {i}: ragged {what} rows")))
}

pub fn dataset_from_json(text: &str) -> Result<Dataset> {
    let file: DatasetFile =
        serde_json::from_str(text).map_err(|e| Error::Dataset(format!("schema violation: {e}")))?;
    let mut graphs = Vec::with_capacity(file.graphs.len());
    let mut labels = Vec::with_capacity(file.graphs.len());
    for (i, r) in file.graphs.into_iter().enumerate() {
        let y = r
            .y
            .ok_or_else(|| Error::Dataset(format!("graph {i}: missing field `y`")))?;
        let pairs: Vec<(usize, usize)> = r.edges.iter().map(|e| (e[0], e[1])).collect();
        let x = r.x.as_deref().map(|x| to_tensor(x, "x", i)).transpose()?;
        let ef = r
            .edge_attr
            .as_deref()
            .map(|e| to_tensor(e, "edge_attr", i))
            .transpose()?;
        let g = Graph::from_edge_list(r.n, &pairs, x, ef).map_err(|e| Error::Dataset(format!("graph {i}: {e}")))?;
        graphs.push(g);
        labels.push(y);
    }
    Dataset::new(file.name, graphs, labels, file.classes)
}

pub fn dataset_to_json(ds: &Dataset) -> Result<String> {
    let graphs = ds
        .graphs
        .iter()
        .zip(&ds.labels)
        .map(|(g, &y)| GraphRecord {
            n: g.node_count(),
            edges: g.edges().iter().map(|&(u, v)| [u, v]).collect(),
            x: Some(rows(g.node_features())),
            edge_attr: g.edge_features().map(rows),
            y: Some(y),
        })
        .collect();
    let file = DatasetFile {
        name: ds.name.clone(),
        classes: ds.class_count,
        graphs,
    };
    Ok(serde_json::to_string(&file)?)
}

pub fn load_dataset_json(path: &Path) -> Result<Dataset> {
    dataset_from_json(&std::fs::read_to_string(path)?)
}

pub fn save_dataset_json(ds: &Dataset, path: &Path) -> Result<()> {
    std::fs::write(path, dataset_to_json(ds)?)?;
    Ok(())
}
