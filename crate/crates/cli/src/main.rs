use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use serde_json::json;

use genhop_core::centrality::raw_edge_centrality;
use genhop_core::eval::{distinguish_report, embed_dataset, linear_probe, run_experiment, ExperimentSpec};
use genhop_core::graph::closed_walk_profile;
use genhop_core::io::{
    builtin_fixture, csl_dataset, enumerate_csl_classes, generate_csl, load_dataset_json, parse_graph6,
    parse_graph6_lines, permuted_copies, save_dataset_json, write_graph6,
};
use genhop_core::iso::enumerate_graphs_up_to;
use genhop_core::model::{load_checkpoint, save_checkpoint, ModelConfig};
use genhop_core::spectral::laplacian_pe;
use genhop_core::train::{pretrain, write_loss_trace, TrainConfig};
use genhop_core::wl::{profile_relation_search, wl_refine_joint, WlOptions};
use genhop_core::{Graph, Tensor};

// Writes to stdout, surfacing a closed pipe as an error instead of a panic.
macro_rules! out {
    ($($t:tt)*) => {{
        use std::io::Write as _;
        write!(std::io::stdout().lock(), $($t)*)?
    }};
}
macro_rules! outln {
    ($($t:tt)*) => {{
        use std::io::Write as _;
        writeln!(std::io::stdout().lock(), $($t)*)?
    }};
}

#[derive(Parser)]
#[command(name = "genhop", version, about = "k-hop structural graph encoder: features, invariants, training and probing")]
struct Cli {
    /// Root seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads for featurization and view generation (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// JSON file with optional `model` and `train` sections.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

/// Graph arguments accept `g6:<string>`, `fixture:<name>:<0|1>`,
/// `csl:<m>:<R>`, or a path to a file whose first line is graph6.
#[derive(Subcommand)]
enum Command {
    /// Write the CSL dataset (relabelled copies of each class) as JSON.
    GenCsl {
        #[arg(long, default_value_t = 41)]
        nodes: usize,
        #[arg(long, default_value_t = 10)]
        copies: usize,
        #[arg(long)]
        out: PathBuf,
        /// Also write one graph6 line per class representative.
        #[arg(long)]
        graph6: Option<PathBuf>,
    },
    /// Parse a graph6 file and summarize it; optionally convert to a JSON dataset.
    ParseG6 {
        file: PathBuf,
        /// Write a dataset with one class per graph and this many relabelled copies.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        copies: usize,
    },
    /// Print closed walks, edge centralities and Laplacian PE of one graph as JSON.
    Featurize {
        graph: String,
        #[arg(long)]
        hops: Option<usize>,
        #[arg(long)]
        pe_dim: Option<usize>,
    },
    /// Run joint 1-WL refinement on two graphs.
    WlTest { a: String, b: String },
    /// Tabulate which invariants separate two graphs.
    Distinguish {
        a: Option<String>,
        b: Option<String>,
        /// Use a built-in fixture pair instead of two graph arguments.
        #[arg(long)]
        fixture: Option<String>,
        #[arg(long)]
        json: bool,
    },
    /// Self-supervised pre-training on a JSON dataset.
    Pretrain {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        loss_trace: Option<PathBuf>,
    },
    /// Eval-mode embeddings as CSV (`label,z0,z1,...`).
    Embed {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Stratified k-fold linear probe on an embedding CSV.
    Probe {
        embeddings: PathBuf,
        #[arg(long, default_value_t = 10)]
        folds: usize,
    },
    /// Run a JSON experiment spec; writes metrics.csv and checkpoints.
    Run {
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare cycle and closed-walk profiles over all small connected graphs.
    ProfileSearch {
        #[arg(long, default_value_t = 6)]
        max_nodes: usize,
        #[arg(long, default_value_t = 6)]
        max_len: usize,
        #[arg(long, default_value_t = 20)]
        witnesses: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Default, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FileConfig {
    model: ModelConfig,
    train: TrainConfig,
}

fn load_config(path: Option<&Path>) -> Result<FileConfig> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
}

fn read_graph(arg: &str) -> Result<Graph> {
    let parts: Vec<&str> = arg.splitn(3, ':').collect();
    Ok(match parts.as_slice() {
        ["g6", s] => parse_graph6(s)?,
        ["fixture", name, side] => {
            let (a, b) = builtin_fixture(name)?;
            match *side {
                "0" => a,
                "1" => b,
                _ => bail!("fixture side must be 0 or 1, got {side}"),
            }
        }
        ["csl", m, r] => generate_csl(m.parse()?, r.parse()?)?,
        _ => {
            let text = fs::read_to_string(arg).with_context(|| format!("reading graph file {arg}"))?;
            let line = text.lines().find(|l| !l.trim().is_empty()).context("empty graph file")?;
            parse_graph6(line)?
        }
    })
}

fn write_embeddings(path: &Path, z: &Tensor, labels: &[usize]) -> Result<()> {
    let mut s = String::from("label");
    for j in 0..z.cols() {
        let _ = write!(s, ",z{j}");
    }
    s.push('\n');
    for (i, y) in labels.iter().enumerate() {
        let _ = write!(s, "{y}");
        for v in z.row(i) {
            let _ = write!(s, ",{v}");
        }
        s.push('\n');
    }
    fs::write(path, s)?;
    Ok(())
}

fn read_embeddings(path: &Path) -> Result<(Tensor, Vec<usize>)> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let y = fields.next().unwrap_or("").trim().parse().with_context(|| format!("line {}: label", i + 1))?;
        let row = fields
            .map(|f| f.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .with_context(|| format!("line {}: embedding value", i + 1))?;
        labels.push(y);
        rows.push(row);
    }
    Ok((Tensor::from_rows(&rows)?, labels))
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let cfg = load_config(cli.config.as_deref())?;
    let seed = cli.seed;
    match cli.command {
        Command::GenCsl {
            nodes,
            copies,
            out,
            graph6,
        } => {
            let reps = enumerate_csl_classes(nodes, nodes.saturating_sub(1) / 2)?;
            let ds = csl_dataset(nodes, copies, seed)?;
            save_dataset_json(&ds, &out)?;
            if let Some(path) = graph6 {
                let lines: Vec<String> = reps
                    .iter()
                    .map(|&r| generate_csl(nodes, r).map(|g| write_graph6(&g)))
                    .collect::<Result<_, _>>()?;
                fs::write(path, lines.join("\n") + "\n")?;
            }
            outln!("{} classes (skips {:?}), {} graphs -> {}", reps.len(), reps, ds.len(), out.display());
        }
        Command::ParseG6 { file, out, copies } => {
            let graphs = parse_graph6_lines(&fs::read_to_string(&file)?)?;
            outln!("index,nodes,edges,connected");
            for (i, g) in graphs.iter().enumerate() {
                outln!("{i},{},{},{}", g.node_count(), g.edge_count(), g.is_connected());
            }
            if let Some(out) = out {
                let name = file.file_stem().map_or("graph6".into(), |s| s.to_string_lossy().into_owned());
                save_dataset_json(&permuted_copies(name, &graphs, copies, seed)?, &out)?;
            }
        }
        Command::Featurize { graph, hops, pe_dim } => {
            let g = read_graph(&graph)?;
            let hops = hops.unwrap_or(cfg.model.hops);
            let p = pe_dim.unwrap_or(cfg.model.pe_dim);
            let walks = closed_walk_profile(&g, hops)?;
            let closed: Vec<&[u128]> = (0..g.node_count()).map(|v| walks.node(v)).collect();
            let pe = laplacian_pe(&g, p)?;
            let pe_rows: Vec<&[f64]> = (0..g.node_count()).map(|v| pe.pe.row(v)).collect();
            let out = json!({
                "nodes": g.node_count(),
                "edges": g.edges(),
                "closed_walks": {"k_from": 2, "k_to": hops, "counts": closed},
                "edge_centrality": raw_edge_centrality(&g),
                "pe": {"eigenvalues": pe.eigenvalues, "used_dims": pe.used_dims, "rows": pe_rows},
            });
            outln!("{}", serde_json::to_string_pretty(&out)?);
        }
        Command::WlTest { a, b } => {
            let (g1, g2) = (read_graph(&a)?, read_graph(&b)?);
            let c = wl_refine_joint(&[&g1, &g2], WlOptions::default());
            let same = c[0].histogram == c[1].histogram;
            outln!("verdict: {}", if same { "indistinguishable" } else { "distinguished" });
            for (name, col) in ["a", "b"].iter().zip(&c) {
                outln!("{name}: {} colors, stable after {} rounds", col.class_count(), col.rounds_to_stable);
            }
        }
        Command::Distinguish { a, b, fixture, json } => {
            let (g1, g2) = match (fixture, a, b) {
                (Some(name), None, None) => builtin_fixture(&name)?,
                (None, Some(a), Some(b)) => (read_graph(&a)?, read_graph(&b)?),
                _ => bail!("give either --fixture NAME or two graph arguments"),
            };
            let report = distinguish_report(&g1, &g2, &cfg.model, seed)?;
            if json {
                outln!("{}", serde_json::to_string_pretty(&report)?);
            } else {
                out!("{}", report.to_text());
            }
        }
        Command::Pretrain {
            data,
            out,
            epochs,
            loss_trace,
        } => {
            let ds = load_dataset_json(&data)?;
            let mut model = cfg.model;
            model.node_feature_dim = ds.feature_dim;
            model.edge_feature_dim = ds.edge_feature_dim();
            let mut train = cfg.train;
            if let Some(e) = epochs {
                train.epochs = e;
            }
            let result = pretrain(&ds.graphs, &train, &model, seed)?;
            save_checkpoint(&result.params, &out)?;
            if let Some(path) = loss_trace {
                write_loss_trace(&result.trace, fs::File::create(path)?)?;
            }
            if let Some(last) = result.trace.last() {
                outln!("epoch {} mean loss {:.6}", last.epoch, last.mean_loss);
            }
        }
        Command::Embed { data, checkpoint, out } => {
            let ds = load_dataset_json(&data)?;
            let params = load_checkpoint(&checkpoint)?;
            let z = embed_dataset(&ds.graphs, &params)?;
            write_embeddings(&out, &z, &ds.labels)?;
            outln!("{} x {} -> {}", z.rows(), z.cols(), out.display());
        }
        Command::Probe { embeddings, folds } => {
            let (z, labels) = read_embeddings(&embeddings)?;
            let r = linear_probe(&z, &labels, folds, seed)?;
            outln!("{}", serde_json::to_string_pretty(&r)?);
        }
        Command::Run { spec, out } => {
            let parsed = ExperimentSpec::load(&spec)?;
            let base = spec.parent().unwrap_or(Path::new("."));
            let outcome = run_experiment(&parsed, base, &out)?;
            out!("{}", fs::read_to_string(&outcome.metrics_path)?);
        }
        Command::ProfileSearch {
            max_nodes,
            max_len,
            witnesses,
            out,
        } => {
            let corpus = enumerate_graphs_up_to(max_nodes, true);
            let report = profile_relation_search(&corpus, max_len, witnesses)?;
            let csv = report.to_csv();
            match out {
                Some(path) => fs::write(path, &csv)?,
                None => out!("{csv}"),
            }
            eprintln!("{} graphs, {} nodes compared", corpus.len(), report.node_total);
        }
    }
    Ok(())
}


fn broken_pipe(e: &anyhow::Error) -> bool {
    e.chain()
        .filter_map(|c| c.downcast_ref::<std::io::Error>())
        .any(|io| io.kind() == std::io::ErrorKind::BrokenPipe)
}

fn main() {
    if let Err(e) = run(Cli::parse()) {
        if broken_pipe(&e) {
            return;
        }
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
