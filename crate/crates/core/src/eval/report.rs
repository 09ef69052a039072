use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::centrality::raw_edge_centrality;
use crate::error::Result;
use crate::graph::{closed_walk_profile, Graph};
use crate::model::{forward_embed, init_params, ModelConfig, ModelParams, Mode};
use crate::spectral::laplacian_spectrum;
use crate::tensor::Tensor;
use crate::wl::{cycle_profile, wl_distinguish, MAX_CYCLE_LENGTH};

/// Real-valued invariants are compared with this absolute tolerance.
pub const INVARIANT_TOLERANCE: f64 = 1e-8;
/// Embedding distances above this count as separating.
pub const EMBEDDING_TOLERANCE: f64 = 1e-6;

/// Eval-mode graph embeddings, one row per graph in input order.
pub fn embed_dataset(graphs: &[Graph], params: &ModelParams) -> Result<Tensor> {
    let dim = params.config.embedding_dim();
    let rows: Vec<Vec<f64>> = graphs
        .par_iter()
        .map(|g| forward_embed(g, params, Mode::Eval, 0).map(|o| o.z))
        .collect::<Result<_>>()?;
    let data = rows.into_iter().flatten().collect();
    Tensor::new(graphs.len(), dim, data)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub invariant: String,
    pub separates: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistinguishReport {
    pub verdicts: Vec<Verdict>,
    pub embedding_distance: f64,
    /// Name of the first invariant in table order that separates the pair.
    pub first_separating: Option<String>,
}

impl DistinguishReport {
    pub fn verdict(&self, invariant: &str) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.invariant == invariant)
    }

    pub fn separates(&self, invariant: &str) -> bool {
        self.verdict(invariant).is_some_and(|v| v.separates)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for v in &self.verdicts {
            let verdict = if v.separates { "different" } else { "same" };
            let _ = writeln!(s, "{:<20} {:<10} {}", v.invariant, verdict, v.detail);
        }
        let _ = writeln!(
            s,
            "first separating: {}",
            self.first_separating.as_deref().unwrap_or("none")
        );
        s
    }
}

fn sorted_f64(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

fn close(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= INVARIANT_TOLERANCE)
}

fn verdict(invariant: &str, separates: bool, detail: String) -> Verdict {
    Verdict {
        invariant: invariant.to_string(),
        separates,
        detail,
    }
}

/// Tabulates which invariants tell `g1` and `g2` apart: 1-WL, closed-walk
/// profiles up to `config.hops`, simple-cycle profiles, the edge centrality
/// multiset, the Laplacian spectrum, and an untrained embedding.
pub fn distinguish_report(g1: &Graph, g2: &Graph, config: &ModelConfig, seed: u64) -> Result<DistinguishReport> {
    let mut verdicts = Vec::new();

    let wl = wl_distinguish(g1, g2, 64);
    verdicts.push(verdict("1-wl", wl, String::new()));

    let hops = config.hops.max(2);
    let (w1, w2) = (closed_walk_profile(g1, hops)?, closed_walk_profile(g2, hops)?);
    let (r1, r2) = (w1.sorted_rows(), w2.sorted_rows());
    let first_k = (2..=hops).find(|&k| {
        let mut a: Vec<u128> = (0..w1.node_count()).map(|v| w1.count(v, k)).collect();
        let mut b: Vec<u128> = (0..w2.node_count()).map(|v| w2.count(v, k)).collect();
        a.sort_unstable();
        b.sort_unstable();
        a != b
    });
    verdicts.push(verdict(
        "closed-walks",
        r1 != r2,
        match first_k {
            Some(k) => format!("k <= {hops}; first differing k = {k}"),
            None => format!("k <= {hops}"),
        },
    ));

    let len = hops.clamp(3, MAX_CYCLE_LENGTH);
    let (c1, c2) = (cycle_profile(g1, len)?, cycle_profile(g2, len)?);
    let rows = |c: &crate::wl::CycleProfile, m: usize| {
        let mut r: Vec<Vec<u64>> = (0..m).map(|v| c.node(v).to_vec()).collect();
        r.sort();
        r
    };
    let cycles = rows(&c1, g1.node_count()) != rows(&c2, g2.node_count());
    verdicts.push(verdict("cycles", cycles, format!("length <= {len}")));

    let table = |g: &Graph| {
        let t = raw_edge_centrality(g);
        let mut rows: Vec<[f64; 3]> = (0..t.len()).map(|i| [t.eb[i], t.ec[i], t.ecc[i]]).collect();
        rows.sort_by(|a, b| a.iter().zip(b).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal));
        rows.into_iter().flatten().collect::<Vec<f64>>()
    };
    let centrality = !close(&table(g1), &table(g2));
    verdicts.push(verdict("edge-centrality", centrality, "EB, EC, ECC multiset".into()));

    let (s1, s2) = (sorted_f64(laplacian_spectrum(g1)), sorted_f64(laplacian_spectrum(g2)));
    verdicts.push(verdict("pe-spectrum", !close(&s1, &s2), "Laplacian eigenvalues".into()));

    let mut cfg = config.clone();
    cfg.node_feature_dim = g1.node_features().cols();
    let params = init_params(&cfg, seed)?;
    let e1 = forward_embed(g1, &params, Mode::Eval, 0)?.z;
    let e2 = forward_embed(g2, &params, Mode::Eval, 0)?.z;
    let embedding_distance = e1.iter().zip(&e2).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    verdicts.push(verdict(
        "model-embedding",
        embedding_distance > EMBEDDING_TOLERANCE,
        format!("untrained, distance {embedding_distance:.3e}"),
    ));

    let first_separating = verdicts.iter().find(|v| v.separates).map(|v| v.invariant.clone());
    Ok(DistinguishReport {
        verdicts,
        embedding_distance,
        first_separating,
    })
}
