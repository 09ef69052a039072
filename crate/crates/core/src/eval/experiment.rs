//! JSON-specified pretrain → embed → probe runs with named ablation variants.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::io::{csl_dataset, load_dataset_json, parse_graph6_lines, permuted_copies, Dataset};
use crate::model::{save_checkpoint, ModelConfig};
use crate::train::{pretrain, write_loss_trace, TrainConfig};

use super::probe::linear_probe;
use super::report::embed_dataset;

pub const METRICS_HEADER: &str = "run_id,dataset,variant,seed,fold,accuracy,mean,std";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSource {
    Csl {
        #[serde(default = "default_csl_nodes")]
        nodes: usize,
        #[serde(default = "default_copies")]
        copies: usize,
    },
    Json {
        path: PathBuf,
    },
    /// Every graph in the file is its own class.
    Graph6 {
        path: PathBuf,
        #[serde(default = "default_copies")]
        copies: usize,
    },
}

fn default_csl_nodes() -> usize {
    41
}

fn default_copies() -> usize {
    10
}

/// A named variant. `model` and `train` are partial JSON objects merged over
/// the base configs after the preset of the same name (if any).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Variant {
    pub name: String,
    #[serde(default)]
    pub model: Value,
    #[serde(default)]
    pub train: Value,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub name: String,
    pub dataset: DatasetSource,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default = "default_variants")]
    pub variants: Vec<Variant>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_folds")]
    pub folds: usize,
    /// Seeds the dataset relabelling, kept apart from the run seeds.
    #[serde(default)]
    pub data_seed: u64,
}

fn default_variants() -> Vec<Variant> {
    vec![Variant {
        name: "full".into(),
        ..Variant::default()
    }]
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn default_folds() -> usize {
    10
}

/// Built-in ablations, keyed by variant name: `(model overrides, train overrides)`.
pub fn variant_preset(name: &str) -> Option<(Value, Value)> {
    use serde_json::json;
    let empty = || json!({});
    Some(match name {
        "full" => (empty(), empty()),
        "pos_only" => (json!({"use_structural": false}), empty()),
        "struct_only" => (json!({"use_positional": false}), empty()),
        "cw_only" => (
            json!({"use_positional": false, "use_high_order": false, "use_edge_centrality": false}),
            empty(),
        ),
        "no_closed_walks" => (json!({"use_closed_walks": false}), empty()),
        "no_high_order" => (json!({"use_high_order": false}), empty()),
        "no_centrality" => (json!({"use_edge_centrality": false}), empty()),
        "nt_xent_only" => (empty(), json!({"alpha": 0.0})),
        _ => return None,
    })
}

/// Recursive object merge. Keys absent from `base` are rejected so a typo in
/// an override cannot be silently ignored.
fn merge(base: &mut Value, patch: &Value, path: &str) -> Result<()> {
    match patch {
        Value::Null => Ok(()),
        Value::Object(fields) => {
            let Value::Object(target) = base else {
                return Err(Error::InvalidArgument(format!("invalid spec: {path} is not an object")));
            };
            for (k, v) in fields {
                let Some(slot) = target.get_mut(k) else {
                    return Err(Error::InvalidArgument(format!("invalid spec: unknown field `{path}.{k}`")));
                };
                if v.is_object() && slot.is_object() {
                    merge(slot, v, &format!("{path}.{k}"))?;
                } else {
                    *slot = v.clone();
                }
            }
            Ok(())
        }
        _ => Err(Error::InvalidArgument(format!("invalid spec: {path} overrides must be an object"))),
    }
}

fn apply<T: Serialize + for<'de> Deserialize<'de>>(base: &T, patches: &[&Value], what: &str) -> Result<T> {
    let mut v = serde_json::to_value(base)?;
    for p in patches {
        merge(&mut v, p, what)?;
    }
    serde_json::from_value(v).map_err(|e| Error::InvalidArgument(format!("invalid spec: {what}: {e}")))
}

impl ExperimentSpec {
    pub fn from_json(text: &str) -> Result<ExperimentSpec> {
        let spec: ExperimentSpec =
            serde_json::from_str(text).map_err(|e| Error::InvalidArgument(format!("invalid spec: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<ExperimentSpec> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(format!("invalid spec: {m}")));
        if self.seeds.is_empty() {
            return bad("no seeds".into());
        }
        if self.folds < 2 {
            return bad(format!("folds must be at least 2, got {}", self.folds));
        }
        if self.variants.is_empty() {
            return bad("no variants".into());
        }
        for (i, v) in self.variants.iter().enumerate() {
            if v.name.is_empty() || v.name.contains(',') {
                return bad(format!("variant {i} needs a name without commas"));
            }
            if self.variants[..i].iter().any(|o| o.name == v.name) {
                return bad(format!("duplicate variant `{}`", v.name));
            }
            self.resolve(v)?;
        }
        Ok(())
    }

    /// Model and training configuration of a variant.
    pub fn resolve(&self, variant: &Variant) -> Result<(ModelConfig, TrainConfig)> {
        let (pm, pt) = variant_preset(&variant.name).unwrap_or((Value::Null, Value::Null));
        let model: ModelConfig = apply(&self.model, &[&pm, &variant.model], "model")?;
        let train: TrainConfig = apply(&self.train, &[&pt, &variant.train], "train")?;
        model.validate()?;
        train.validate()?;
        Ok((model, train))
    }

    pub fn load_dataset(&self, base_dir: &Path) -> Result<Dataset> {
        let resolve = |p: &Path| if p.is_absolute() { p.to_path_buf() } else { base_dir.join(p) };
        match &self.dataset {
            DatasetSource::Csl { nodes, copies } => csl_dataset(*nodes, *copies, self.data_seed),
            DatasetSource::Json { path } => load_dataset_json(&resolve(path)),
            DatasetSource::Graph6 { path, copies } => {
                let path = resolve(path);
                let graphs = parse_graph6_lines(&std::fs::read_to_string(&path)?)?;
                let name = path.file_stem().map_or("graph6".into(), |s| s.to_string_lossy().into_owned());
                permuted_copies(name, &graphs, *copies, self.data_seed)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub run_id: String,
    pub dataset: String,
    pub variant: String,
    pub seed: u64,
    pub fold: usize,
    pub accuracy: f64,
    pub mean: f64,
    pub std: f64,
}

#[derive(Clone, Debug)]
pub struct ExperimentOutcome {
    pub rows: Vec<MetricRow>,
    pub metrics_path: PathBuf,
    pub checkpoints: Vec<PathBuf>,
}

pub fn metrics_csv(rows: &[MetricRow]) -> String {
    let mut s = String::from(METRICS_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            r.run_id, r.dataset, r.variant, r.seed, r.fold, r.accuracy, r.mean, r.std
        );
    }
    s
}

/// For every variant and seed: pretrain, embed in eval mode, probe. Writes
/// `metrics.csv`, plus a checkpoint and loss trace per run, into `out_dir`.
/// Relative dataset paths resolve against `base_dir`.
pub fn run_experiment(spec: &ExperimentSpec, base_dir: &Path, out_dir: &Path) -> Result<ExperimentOutcome> {
    spec.validate()?;
    let data = spec.load_dataset(base_dir)?;
    std::fs::create_dir_all(out_dir)?;
    let mut rows = Vec::new();
    let mut checkpoints = Vec::new();
    for variant in &spec.variants {
        let (mut model, train) = spec.resolve(variant)?;
        model.node_feature_dim = data.feature_dim;
        model.edge_feature_dim = data.edge_feature_dim();
        for &seed in &spec.seeds {
            let run_id = format!("{}-{}-s{seed}", spec.name, variant.name);
            let trained = pretrain(&data.graphs, &train, &model, seed)?;
            let z = embed_dataset(&data.graphs, &trained.params)?;
            let probe = linear_probe(&z, &data.labels, spec.folds, seed)?;
            for (fold, &accuracy) in probe.fold_accuracies.iter().enumerate() {
                rows.push(MetricRow {
                    run_id: run_id.clone(),
                    dataset: data.name.clone(),
                    variant: variant.name.clone(),
                    seed,
                    fold,
                    accuracy,
                    mean: probe.mean,
                    std: probe.std,
                });
            }
            let ckpt = out_dir.join(format!("{run_id}.ckpt"));
            save_checkpoint(&trained.params, &ckpt)?;
            checkpoints.push(ckpt);
            let trace = std::fs::File::create(out_dir.join(format!("{run_id}.loss.csv")))?;
            write_loss_trace(&trained.trace, std::io::BufWriter::new(trace))?;
        }
    }
    let metrics_path = out_dir.join("metrics.csv");
    std::fs::write(&metrics_path, metrics_csv(&rows))?;
    Ok(ExperimentOutcome {
        rows,
        metrics_path,
        checkpoints,
    })
}
