use std::sync::Arc;

use crate::autodiff::SparseConst;
use crate::centrality::edge_feature_table;
use crate::error::{Error, Result};
use crate::graph::{walk_features, Graph, SparseRows};
use crate::spectral::{laplacian_pe, random_sign_flip, PositionalEncoding};
use crate::tensor::Tensor;

use super::config::ModelConfig;

/// Everything the encoder needs from one graph, computed once.
#[derive(Clone, Debug)]
pub struct GraphTables {
    pub node_count: usize,
    pub edges: Vec<(usize, usize)>,
    pub x: Tensor,
    pub edge_raw: Option<Tensor>,
    /// Standardized (EB, EC, ECC) per edge.
    pub centrality: Tensor,
    pub pe: PositionalEncoding,
    /// Per node `Σ_k c(A^k_vv)` with `c` = log1p or identity.
    pub closed_walk: Vec<f64>,
    /// `Σ_k Ã^k` (absent when the k-hop term is off).
    pub high_order: Option<SparseRows>,
}

impl GraphTables {
    pub fn prepare(g: &Graph, cfg: &ModelConfig) -> Result<GraphTables> {
        let m = g.node_count();
        if g.node_features().cols() != cfg.node_feature_dim {
            return Err(Error::Shape {
                op: "prepare",
                detail: format!(
                    "graph has {} node feature columns, model expects {}",
                    g.node_features().cols(),
                    cfg.node_feature_dim
                ),
            });
        }
        let edge_raw = if cfg.uses_raw_edges() {
            match g.edge_features() {
                Some(ef) if ef.cols() != cfg.edge_feature_dim => {
                    return Err(Error::Shape {
                        op: "prepare",
                        detail: format!(
                            "graph has {} edge feature columns, model expects {}",
                            ef.cols(),
                            cfg.edge_feature_dim
                        ),
                    })
                }
                Some(ef) => Some(ef.clone()),
                None => Some(Tensor::zeros(g.edge_count(), cfg.edge_feature_dim)),
            }
        } else {
            None
        };
        let centrality = if cfg.use_edge_centrality {
            edge_feature_table(g).to_tensor()
        } else {
            Tensor::zeros(g.edge_count(), 3)
        };
        let pe = if cfg.use_positional {
            laplacian_pe(g, cfg.pe_dim)?
        } else {
            PositionalEncoding {
                pe: Tensor::zeros(m, cfg.pe_dim),
                p: cfg.pe_dim,
                used_dims: 0,
                eigenvalues: Vec::new(),
            }
        };
        let mut closed_walk = vec![0.0; m];
        let mut high_order = None;
        if cfg.needs_walks() {
            let (walks, khop) = walk_features(g, cfg.hops, cfg.hop_normalization)?;
            if cfg.use_closed_walks {
                for (v, cw) in closed_walk.iter_mut().enumerate() {
                    *cw = walks
                        .node(v)
                        .iter()
                        .map(|&c| {
                            let c = c as f64;
                            if cfg.raw_closed_walks {
                                c
                            } else {
                                c.ln_1p()
                            }
                        })
                        .sum();
                }
            }
            if cfg.use_high_order {
                let parts: Vec<&SparseRows> = khop.hops().iter().collect();
                high_order = SparseRows::sum(&parts);
            }
        }
        Ok(GraphTables {
            node_count: m,
            edges: g.edges().to_vec(),
            x: g.node_features().clone(),
            edge_raw,
            centrality,
            pe,
            closed_walk,
            high_order,
        })
    }
}

/// Several graphs stacked as one block-diagonal graph.
#[derive(Clone, Debug)]
pub struct Batch {
    pub graph_count: usize,
    pub node_count: usize,
    pub edge_count: usize,
    /// Graph index of every node.
    pub segments: Arc<Vec<usize>>,
    pub node_offsets: Vec<usize>,
    pub x: Tensor,
    pub edge_raw: Option<Tensor>,
    pub centrality: Tensor,
    pub pe: Tensor,
    /// `A + diag(closed walks) + Σ_k Ã^k`, per the enabled terms.
    pub structural_op: Arc<SparseConst>,
    /// `A` alone.
    pub local_op: Arc<SparseConst>,
    /// Node-by-edge incidence.
    pub incidence: Arc<SparseConst>,
}

impl Batch {
    /// Stacks prepared graphs. `pe_flip_seeds[i]`, when given, randomly flips
    /// the eigenvector signs of graph `i`.
    pub fn new(tables: &[&GraphTables], pe_flip_seeds: Option<&[u64]>) -> Result<Batch> {
        if let Some(seeds) = pe_flip_seeds {
            if seeds.len() != tables.len() {
                return Err(Error::RowMismatch {
                    what: "sign-flip seeds",
                    got: seeds.len(),
                    expected: tables.len(),
                });
            }
        }
        let node_count: usize = tables.iter().map(|t| t.node_count).sum();
        let edge_count: usize = tables.iter().map(|t| t.edges.len()).sum();
        let mut segments = Vec::with_capacity(node_count);
        let mut node_offsets = Vec::with_capacity(tables.len());
        let mut structural = Vec::with_capacity(node_count);
        let mut local = Vec::with_capacity(node_count);
        let mut incidence: Vec<Vec<(usize, f64)>> = Vec::with_capacity(node_count);
        let mut x = Vec::new();
        let mut edge_raw = Vec::new();
        let mut centrality = Vec::with_capacity(edge_count * 3);
        let mut pe = Vec::new();
        let (mut off, mut eoff) = (0, 0);
        let fx = tables.first().map_or(0, |t| t.x.cols());
        let fe = tables.first().and_then(|t| t.edge_raw.as_ref()).map(|t| t.cols());
        let p = tables.first().map_or(0, |t| t.pe.p);
        for (gi, t) in tables.iter().enumerate() {
            if t.x.cols() != fx || t.pe.p != p || t.edge_raw.as_ref().map(|e| e.cols()) != fe {
                return Err(Error::Shape {
                    op: "batch",
                    detail: format!("graph {gi} has different feature widths"),
                });
            }
            let m = t.node_count;
            node_offsets.push(off);
            segments.extend(std::iter::repeat(gi).take(m));
            let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); m];
            let mut inc: Vec<Vec<(usize, f64)>> = vec![Vec::new(); m];
            for (id, &(u, v)) in t.edges.iter().enumerate() {
                adj[u].push((v + off, 1.0));
                adj[v].push((u + off, 1.0));
                inc[u].push((id + eoff, 1.0));
                inc[v].push((id + eoff, 1.0));
            }
            for (v, row) in adj.into_iter().enumerate() {
                let mut row = row;
                row.sort_by_key(|e| e.0);
                let mut srow = row.clone();
                if t.closed_walk[v] != 0.0 {
                    srow.push((v + off, t.closed_walk[v]));
                }
                if let Some(h) = &t.high_order {
                    let (c, w) = h.row(v);
                    srow.extend(c.iter().map(|&c| c + off).zip(w.iter().copied()));
                }
                structural.push(merge_row(srow));
                local.push(row);
            }
            incidence.extend(inc);
            x.extend_from_slice(t.x.data());
            if let Some(e) = &t.edge_raw {
                edge_raw.extend_from_slice(e.data());
            }
            centrality.extend_from_slice(t.centrality.data());
            let enc = match pe_flip_seeds {
                Some(seeds) => random_sign_flip(&t.pe, seeds[gi]),
                None => t.pe.clone(),
            };
            pe.extend_from_slice(enc.pe.data());
            off += m;
            eoff += t.edges.len();
        }
        Ok(Batch {
            graph_count: tables.len(),
            node_count,
            edge_count,
            segments: Arc::new(segments),
            node_offsets,
            x: Tensor::new(node_count, fx, x)?,
            edge_raw: fe.map(|fe| Tensor::new(edge_count, fe, edge_raw)).transpose()?,
            centrality: Tensor::new(edge_count, 3, centrality)?,
            pe: Tensor::new(node_count, p, pe)?,
            structural_op: SparseConst::new(SparseRows::from_rows(node_count, node_count, structural)),
            local_op: SparseConst::new(SparseRows::from_rows(node_count, node_count, local)),
            incidence: SparseConst::new(SparseRows::from_rows(node_count, edge_count, incidence)),
        })
    }
}

fn merge_row(mut row: Vec<(usize, f64)>) -> Vec<(usize, f64)> {
    row.sort_by_key(|e| e.0);
    let mut out: Vec<(usize, f64)> = Vec::with_capacity(row.len());
    for (c, v) in row {
        match out.last_mut() {
            Some(last) if last.0 == c => last.1 += v,
            _ => out.push((c, v)),
        }
    }
    out
}
