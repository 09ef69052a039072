use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::tensor::Tensor;

use super::config::ModelConfig;

/// Momentum of the running batch-norm statistics:
/// `running = MOMENTUM * running + (1 - MOMENTUM) * batch`.
pub const BATCH_NORM_MOMENTUM: f64 = 0.9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ParamId(pub usize);

/// Named parameter tensors in registration order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore {
    names: Vec<String>,
    tensors: Vec<Tensor>,
}

impl ParamStore {
    fn add(&mut self, name: String, t: Tensor) -> ParamId {
        self.names.push(name);
        self.tensors.push(t);
        ParamId(self.tensors.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.tensors[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.tensors[id.0]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.names.iter().position(|n| n == name).map(ParamId)
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn scalar_count(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Linear {
    pub w: ParamId,
    pub b: ParamId,
    pub fan_in: usize,
    pub fan_out: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BatchNormSpec {
    pub gamma: ParamId,
    pub beta: ParamId,
    /// Index into [`ModelParams::running`].
    pub stats: usize,
}

/// Linear layers with ReLU between them, optionally batch-normalized before
/// each ReLU.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    pub linears: Vec<Linear>,
    pub norms: Vec<Option<BatchNormSpec>>,
}

impl Mlp {
    pub fn out_dim(&self) -> usize {
        self.linears.last().map_or(0, |l| l.fan_out)
    }
}

/// Running mean and variance of one batch-norm site.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunningStats {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

impl RunningStats {
    fn new(d: usize) -> Self {
        RunningStats {
            mean: vec![0.0; d],
            var: vec![1.0; d],
        }
    }

    pub fn update(&mut self, batch_mean: &[f64], batch_var: &[f64]) {
        let m = BATCH_NORM_MOMENTUM;
        for (r, b) in self.mean.iter_mut().zip(batch_mean) {
            *r = m * *r + (1.0 - m) * b;
        }
        for (r, b) in self.var.iter_mut().zip(batch_var) {
            *r = m * *r + (1.0 - m) * b;
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BranchLayer {
    pub eps: ParamId,
    pub mlp: Mlp,
    /// Raw edge features to the layer's input width.
    pub edge_raw: Option<Mlp>,
    /// Centrality triple to the layer's input width.
    pub edge_centrality: Option<Mlp>,
    pub in_dim: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Branch {
    /// Input map (positional branch only: PE to hidden width).
    pub input: Option<Linear>,
    pub layers: Vec<BranchLayer>,
    /// Graph readout head over the pooled concatenation of all layers.
    pub readout: Mlp,
    /// Node projection head.
    pub node_head: Mlp,
}

/// Where every parameter of the model lives in the store.
#[derive(Clone, Debug, PartialEq)]
pub struct Layout {
    pub structural: Option<Branch>,
    pub positional: Option<Branch>,
}

/// Model parameters plus batch-norm running statistics.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub config: ModelConfig,
    pub store: ParamStore,
    pub running: Vec<RunningStats>,
    pub layout: Layout,
}

impl ModelParams {
    pub fn all_finite(&self) -> bool {
        self.store.tensors().iter().all(Tensor::all_finite)
    }
}

struct Builder {
    store: ParamStore,
    running: Vec<RunningStats>,
    rng: ChaCha8Rng,
}

impl Builder {
    fn linear(&mut self, name: &str, fan_in: usize, fan_out: usize) -> Linear {
        let bound = 1.0 / (fan_in as f64).sqrt();
        let mut uniform = |n: usize| -> Vec<f64> {
            (0..n).map(|_| self.rng.gen_range(-bound..bound)).collect()
        };
        let w = Tensor::new(fan_in, fan_out, uniform(fan_in * fan_out)).expect("sized");
        let b = Tensor::new(1, fan_out, uniform(fan_out)).expect("sized");
        Linear {
            w: self.store.add(format!("{name}.w"), w),
            b: self.store.add(format!("{name}.b"), b),
            fan_in,
            fan_out,
        }
    }

    fn batch_norm(&mut self, name: &str, d: usize) -> BatchNormSpec {
        self.running.push(RunningStats::new(d));
        BatchNormSpec {
            gamma: self.store.add(format!("{name}.gamma"), Tensor::ones(1, d)),
            beta: self.store.add(format!("{name}.beta"), Tensor::zeros(1, d)),
            stats: self.running.len() - 1,
        }
    }

    /// `depth` linear layers: in → hidden → … → out.
    fn mlp(&mut self, name: &str, dims: (usize, usize, usize), depth: usize, bn: bool) -> Mlp {
        let (input, hidden, out) = dims;
        let mut linears = Vec::with_capacity(depth);
        let mut norms = Vec::with_capacity(depth);
        for i in 0..depth {
            let fi = if i == 0 { input } else { hidden };
            let fo = if i + 1 == depth { out } else { hidden };
            linears.push(self.linear(&format!("{name}.lin{i}"), fi, fo));
            if i + 1 < depth {
                norms.push(bn.then(|| self.batch_norm(&format!("{name}.bn{i}"), fo)));
            }
        }
        Mlp { linears, norms }
    }

    fn branch(&mut self, name: &str, cfg: &ModelConfig, in_dim: usize, input: Option<Linear>) -> Branch {
        let d = cfg.hidden_dim;
        let mut layers = Vec::with_capacity(cfg.layers);
        let mut width = in_dim;
        for l in 0..cfg.layers {
            let p = format!("{name}.layer{l}");
            let eps = self.store.add(format!("{p}.eps"), Tensor::zeros(1, 1));
            let mlp = self.mlp(&format!("{p}.mlp"), (width, d, d), cfg.mlp_depth, true);
            let edge_raw = cfg
                .uses_raw_edges()
                .then(|| self.mlp(&format!("{p}.edge_raw"), (cfg.edge_feature_dim, d, width), 2, false));
            let edge_centrality = cfg
                .use_edge_centrality
                .then(|| self.mlp(&format!("{p}.edge_centrality"), (3, d, width), 2, false));
            layers.push(BranchLayer {
                eps,
                mlp,
                edge_raw,
                edge_centrality,
                in_dim: width,
            });
            width = d;
        }
        let readout = self.mlp(&format!("{name}.readout"), (d * cfg.layers, d, d), cfg.mlp_depth, true);
        let node_head = self.mlp(&format!("{name}.node_head"), (d, d, d), cfg.mlp_depth, true);
        Branch {
            input,
            layers,
            readout,
            node_head,
        }
    }
}

/// Uniform `±1/sqrt(fan_in)` weights and biases, unit/zero batch-norm
/// affine terms, zero `ε`. Deterministic per seed.
pub fn init_params(config: &ModelConfig, seed: u64) -> Result<ModelParams> {
    config.validate()?;
    let mut b = Builder {
        store: ParamStore::default(),
        running: Vec::new(),
        rng: ChaCha8Rng::seed_from_u64(seed),
    };
    let structural = config
        .use_structural
        .then(|| b.branch("struct", config, config.node_feature_dim, None));
    let positional = config.use_positional.then(|| {
        let input = b.linear("pos.input", config.pe_dim, config.hidden_dim);
        b.branch("pos", config, config.hidden_dim, Some(input))
    });
    Ok(ModelParams {
        config: config.clone(),
        store: b.store,
        running: b.running,
        layout: Layout {
            structural,
            positional,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_shaped() {
        let cfg = ModelConfig {
            edge_feature_dim: 2,
            ..ModelConfig::default()
        };
        let a = init_params(&cfg, 5).unwrap();
        let b = init_params(&cfg, 5).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.store, init_params(&cfg, 6).unwrap().store);

        let s = a.layout.structural.as_ref().unwrap();
        assert_eq!(s.layers.len(), cfg.layers);
        assert_eq!(a.store.get(s.layers[0].eps).data(), &[0.0]);
        assert_eq!(a.store.get(s.layers[0].mlp.linears[0].w).shape(), [1, 32]);
        assert_eq!(s.readout.linears[0].fan_in, 32 * cfg.layers);
        assert!(s.layers[0].edge_raw.is_some());
        let p = a.layout.positional.as_ref().unwrap();
        assert_eq!(a.store.get(p.input.as_ref().unwrap().w).shape(), [6, 32]);
        assert_eq!(cfg.embedding_dim(), 64);
        for (t, n) in a.store.tensors().iter().zip(a.store.names()) {
            if n.ends_with(".w") {
                let bound = 1.0 / (t.rows() as f64).sqrt();
                assert!(t.data().iter().all(|x| x.abs() <= bound), "{n}");
            }
        }
    }

    #[test]
    fn invalid_configs() {
        let bad = ModelConfig {
            hops: 1,
            ..ModelConfig::default()
        };
        assert!(init_params(&bad, 0).is_err());
        let ok = ModelConfig {
            hops: 1,
            use_closed_walks: false,
            use_high_order: false,
            ..ModelConfig::default()
        };
        assert!(init_params(&ok, 0).is_ok());
    }
}
