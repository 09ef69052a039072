use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::autodiff::{SparseConst, Tape, Var};
use crate::error::Result;
use crate::graph::Graph;
use crate::tensor::Tensor;

use super::params::{Branch, BranchLayer, Linear, Mlp, ModelParams};
use super::tables::{Batch, GraphTables};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Batch statistics in batch norm; random eigenvector signs.
    Train,
    /// Running statistics; canonical eigenvector signs.
    Eval,
}

/// Binds the model's parameters to tape leaves. `trainable` controls whether
/// they receive gradients.
pub fn bind_params(tape: &mut Tape, params: &ModelParams, trainable: bool) -> Vec<Var> {
    params
        .store
        .tensors()
        .iter()
        .map(|t| {
            if trainable {
                tape.param(t.clone())
            } else {
                tape.constant(t.clone())
            }
        })
        .collect()
}

/// Output variables of a batched forward pass.
#[derive(Clone, Debug)]
pub struct ForwardVars {
    /// One graph embedding per row.
    pub z: Var,
    /// Projected node embeddings, structural ⊕ positional.
    pub nodes: Var,
    /// Last-layer node embeddings of each branch, before the heads.
    pub node_struct: Option<Var>,
    pub node_pos: Option<Var>,
    /// Training-mode batch-norm sites as (running-stat index, output).
    pub bn_sites: Vec<(usize, Var)>,
}

/// Builds the forward computation for one model over a batch.
pub struct Encoder<'a> {
    params: &'a ModelParams,
    vars: &'a [Var],
    mode: Mode,
    bn_sites: Vec<(usize, Var)>,
}

impl<'a> Encoder<'a> {
    pub fn new(params: &'a ModelParams, vars: &'a [Var], mode: Mode) -> Encoder<'a> {
        Encoder {
            params,
            vars,
            mode,
            bn_sites: Vec::new(),
        }
    }

    pub fn linear(&self, tape: &mut Tape, lin: &Linear, x: Var) -> Result<Var> {
        let y = tape.matmul(x, self.vars[lin.w.0])?;
        tape.add_row(y, self.vars[lin.b.0])
    }

    pub fn mlp(&mut self, tape: &mut Tape, mlp: &Mlp, x: Var) -> Result<Var> {
        let mut h = x;
        for (i, lin) in mlp.linears.iter().enumerate() {
            h = self.linear(tape, lin, h)?;
            if i + 1 == mlp.linears.len() {
                break;
            }
            if let Some(bn) = &mlp.norms[i] {
                let (g, b) = (self.vars[bn.gamma.0], self.vars[bn.beta.0]);
                let eps = self.params.config.batch_norm_eps;
                h = match self.mode {
                    Mode::Train => {
                        let y = tape.batch_norm(h, g, b, eps, None)?;
                        self.bn_sites.push((bn.stats, y));
                        y
                    }
                    Mode::Eval => {
                        let r = &self.params.running[bn.stats];
                        let stats = Arc::new((r.mean.clone(), r.var.clone()));
                        tape.batch_norm(h, g, b, eps, Some(stats))?
                    }
                };
            }
            h = tape.relu(h)?;
        }
        Ok(h)
    }

    /// `MLP[(1+ε)h + op·h + B(E_b + E_c)]` where `op` carries the neighbor
    /// (and, for the structural branch, closed-walk and k-hop) coefficients
    /// and `B` is the node-edge incidence.
    fn layer(
        &mut self,
        tape: &mut Tape,
        batch: &Batch,
        layer: &BranchLayer,
        op: &Arc<SparseConst>,
        h: Var,
    ) -> Result<Var> {
        let eps_h = tape.scale_by(h, self.vars[layer.eps.0])?;
        let own = tape.add(h, eps_h)?;
        let agg = tape.sparse_matmul(op.clone(), h)?;
        let mut pre = tape.add(own, agg)?;
        let mut edge_msg = None;
        if let (Some(mlp), Some(raw)) = (&layer.edge_raw, &batch.edge_raw) {
            let e = tape.constant(raw.clone());
            edge_msg = Some(self.mlp(tape, mlp, e)?);
        }
        if let Some(mlp) = &layer.edge_centrality {
            let e = tape.constant(batch.centrality.clone());
            let ec = self.mlp(tape, mlp, e)?;
            edge_msg = Some(match edge_msg {
                Some(eb) => tape.add(eb, ec)?,
                None => ec,
            });
        }
        if let Some(e) = edge_msg {
            let msg = tape.sparse_matmul(batch.incidence.clone(), e)?;
            pre = tape.add(pre, msg)?;
        }
        self.mlp(tape, &layer.mlp, pre)
    }

    /// One structural layer: local pattern, closed-walk and k-hop terms.
    pub fn genhop_layer(&mut self, tape: &mut Tape, batch: &Batch, index: usize, h: Var) -> Result<Var> {
        let params = self.params;
        let branch = params.layout.structural.as_ref().expect("structural branch enabled");
        self.layer(tape, batch, &branch.layers[index], &batch.structural_op, h)
    }

    /// One positional layer: local pattern term only.
    pub fn pos_layer(&mut self, tape: &mut Tape, batch: &Batch, index: usize, h: Var) -> Result<Var> {
        let params = self.params;
        let branch = params.layout.positional.as_ref().expect("positional branch enabled");
        self.layer(tape, batch, &branch.layers[index], &batch.local_op, h)
    }

    fn branch(
        &mut self,
        tape: &mut Tape,
        batch: &Batch,
        branch: &Branch,
        op: &Arc<SparseConst>,
        input: Var,
    ) -> Result<(Var, Var, Var)> {
        let mut h = match &branch.input {
            Some(lin) => self.linear(tape, lin, input)?,
            None => input,
        };
        let mut per_layer = Vec::with_capacity(branch.layers.len());
        for layer in &branch.layers {
            h = self.layer(tape, batch, layer, op, h)?;
            per_layer.push(h);
        }
        let cat = tape.concat_cols(&per_layer)?;
        let pooled = tape.segment_sum(cat, batch.segments.clone(), batch.graph_count)?;
        let z = self.mlp(tape, &branch.readout, pooled)?;
        let nodes = self.mlp(tape, &branch.node_head, h)?;
        Ok((z, nodes, h))
    }

    pub fn forward(mut self, tape: &mut Tape, batch: &Batch) -> Result<ForwardVars> {
        let params = self.params;
        let mut zs = Vec::new();
        let mut nodes = Vec::new();
        let (mut node_struct, mut node_pos) = (None, None);
        if let Some(b) = &params.layout.structural {
            let x = tape.constant(batch.x.clone());
            let (z, n, h) = self.branch(tape, batch, b, &batch.structural_op, x)?;
            zs.push(z);
            nodes.push(n);
            node_struct = Some(h);
        }
        if let Some(b) = &params.layout.positional {
            let pe = tape.constant(batch.pe.clone());
            let (z, n, h) = self.branch(tape, batch, b, &batch.local_op, pe)?;
            zs.push(z);
            nodes.push(n);
            node_pos = Some(h);
        }
        let z = if zs.len() == 1 { zs[0] } else { tape.concat_cols(&zs)? };
        let nodes = if nodes.len() == 1 {
            nodes[0]
        } else {
            tape.concat_cols(&nodes)?
        };
        Ok(ForwardVars {
            z,
            nodes,
            node_struct,
            node_pos,
            bn_sites: self.bn_sites,
        })
    }
}

/// Embeddings of a single graph.
#[derive(Clone, Debug, PartialEq)]
pub struct GraphEmbeddingOutput {
    /// Last structural layer, `m×d` (zero-width when the branch is off).
    pub node_struct: Tensor,
    pub node_pos: Tensor,
    /// Projected node embeddings of both branches, concatenated.
    pub node_concat: Tensor,
    /// Graph embedding, structural ⊕ positional.
    pub z: Vec<f64>,
}

/// Embeds one graph. In train mode `seed` drives the eigenvector sign flips.
pub fn forward_embed(g: &Graph, params: &ModelParams, mode: Mode, seed: u64) -> Result<GraphEmbeddingOutput> {
    let tables = GraphTables::prepare(g, &params.config)?;
    forward_tables(&tables, params, mode, seed)
}

pub fn forward_tables(
    tables: &GraphTables,
    params: &ModelParams,
    mode: Mode,
    seed: u64,
) -> Result<GraphEmbeddingOutput> {
    let seeds = [seed];
    let flips = (mode == Mode::Train).then_some(&seeds[..]);
    let batch = Batch::new(&[tables], flips)?;
    let mut tape = Tape::new();
    let vars = bind_params(&mut tape, params, false);
    let out = Encoder::new(params, &vars, mode).forward(&mut tape, &batch)?;
    let m = tables.node_count;
    let take = |v: Option<Var>| v.map_or_else(|| Tensor::zeros(m, 0), |v| tape.value(v).clone());
    Ok(GraphEmbeddingOutput {
        node_struct: take(out.node_struct),
        node_pos: take(out.node_pos),
        node_concat: tape.value(out.nodes).clone(),
        z: tape.value(out.z).data().to_vec(),
    })
}
