use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::graph::Graph;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AugmentStrategy {
    Identity,
    /// Induced subgraph on the nodes of a random walk.
    Rws,
    NodeDrop,
    EdgeDrop,
    FeatDropout,
    FeatMask,
    EdgeAttrMask,
}

impl AugmentStrategy {
    pub fn is_structural(self) -> bool {
        matches!(self, AugmentStrategy::Rws | AugmentStrategy::NodeDrop | AugmentStrategy::EdgeDrop)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AugmentSpec {
    pub strategy: AugmentStrategy,
    pub ratio: f64,
    /// Random-walk length; `None` means half the node count.
    #[serde(default)]
    pub walk_length: Option<usize>,
}

impl AugmentSpec {
    pub fn new(strategy: AugmentStrategy, ratio: f64) -> Self {
        AugmentSpec {
            strategy,
            ratio,
            walk_length: None,
        }
    }

    pub fn identity() -> Self {
        AugmentSpec::new(AugmentStrategy::Identity, 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.ratio) {
            return invalid(format!("augmentation ratio {} outside [0, 1]", self.ratio));
        }
        if self.walk_length == Some(0) {
            return invalid("walk_length must be at least 1");
        }
        Ok(())
    }
}

/// An augmented graph and, for each of its nodes, the node id it had in
/// the original graph (ascending).
#[derive(Clone, Debug, PartialEq)]
pub struct Augmented {
    pub graph: Graph,
    pub kept: Vec<usize>,
}

/// `⌈ratio · n⌉`, robust to the rounding of `ratio · n` itself.
fn ceil_count(ratio: f64, n: usize) -> usize {
    ((ratio * n as f64) - 1e-9).ceil().max(0.0) as usize
}

/// Applies one augmentation. Pure in `(g, spec, seed)`; never returns an
/// empty node set for a nonempty graph.
pub fn augment(g: &Graph, spec: &AugmentSpec, seed: u64) -> Result<Augmented> {
    spec.validate()?;
    let m = g.node_count();
    let all: Vec<usize> = (0..m).collect();
    let unchanged = || Augmented {
        graph: g.clone(),
        kept: all.clone(),
    };
    if spec.ratio == 0.0 || spec.strategy == AugmentStrategy::Identity {
        return Ok(unchanged());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let out = match spec.strategy {
        AugmentStrategy::Identity => unreachable!(),
        AugmentStrategy::NodeDrop => {
            if m == 0 {
                return Ok(unchanged());
            }
            let drop = ceil_count(spec.ratio, m).min(m - 1);
            let mut order = all.clone();
            order.shuffle(&mut rng);
            let mut keep = order[drop..].to_vec();
            keep.sort_unstable();
            Augmented {
                graph: g.induced_subgraph(&keep)?,
                kept: keep,
            }
        }
        AugmentStrategy::EdgeDrop => {
            let e = g.edge_count();
            let drop = ceil_count(spec.ratio, e).min(e);
            let mut order: Vec<usize> = (0..e).collect();
            order.shuffle(&mut rng);
            let mut keep = order[drop..].to_vec();
            keep.sort_unstable();
            Augmented {
                graph: g.edge_subgraph(&keep)?,
                kept: all,
            }
        }
        AugmentStrategy::Rws => {
            if m == 0 {
                return Ok(unchanged());
            }
            let length = spec.walk_length.unwrap_or((m / 2).max(1));
            let mut visited = vec![false; m];
            let mut v = rng.gen_range(0..m);
            visited[v] = true;
            for _ in 0..length {
                let nb = g.neighbors(v);
                if nb.is_empty() {
                    break;
                }
                v = nb[rng.gen_range(0..nb.len())];
                visited[v] = true;
            }
            let keep: Vec<usize> = (0..m).filter(|&v| visited[v]).collect();
            Augmented {
                graph: g.induced_subgraph(&keep)?,
                kept: keep,
            }
        }
        AugmentStrategy::FeatDropout => {
            let mut x = g.node_features().clone();
            for v in x.data_mut() {
                if rng.gen_bool(spec.ratio) {
                    *v = 0.0;
                }
            }
            Augmented {
                graph: g.clone().with_node_features(x)?,
                kept: all,
            }
        }
        AugmentStrategy::FeatMask => {
            let mut x = g.node_features().clone();
            for c in 0..x.cols() {
                if rng.gen_bool(spec.ratio) {
                    for r in 0..x.rows() {
                        x.set(r, c, 0.0);
                    }
                }
            }
            Augmented {
                graph: g.clone().with_node_features(x)?,
                kept: all,
            }
        }
        AugmentStrategy::EdgeAttrMask => {
            let Some(ef) = g.edge_features() else {
                return Ok(unchanged());
            };
            let mut ef = ef.clone();
            for r in 0..ef.rows() {
                if rng.gen_bool(spec.ratio) {
                    ef.row_mut(r).fill(0.0);
                }
            }
            Augmented {
                graph: g.clone().with_edge_features(Some(ef))?,
                kept: all,
            }
        }
    };
    Ok(out)
}
