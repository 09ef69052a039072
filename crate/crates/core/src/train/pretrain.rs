use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autodiff::Tape;
use crate::error::{invalid, Error, Result};
use crate::graph::Graph;
use crate::model::{bind_params, init_params, Batch, Encoder, GraphTables, Mode, ModelConfig, ModelParams};

use super::augment::{augment, AugmentSpec, AugmentStrategy, Augmented};
use super::loss::{total_loss, VicregWeights};
use super::optim::Adam;
use super::derive_seed;

/// Which augmentation family each of the two views draws from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViewPairing {
    /// View 1 feature-augmented, view 2 structure-augmented.
    #[default]
    Mixed,
    BothStructural,
    BothFeature,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub tau: f64,
    pub alpha: f64,
    pub vicreg: VicregWeights,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub feature_view: AugmentSpec,
    pub structural_view: AugmentSpec,
    pub pairing: ViewPairing,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            tau: 0.1,
            alpha: 0.005,
            vicreg: VicregWeights::default(),
            learning_rate: 1e-3,
            weight_decay: 0.0,
            batch_size: 32,
            epochs: 100,
            feature_view: AugmentSpec::new(AugmentStrategy::FeatMask, 0.2),
            structural_view: AugmentSpec::new(AugmentStrategy::NodeDrop, 0.2),
            pairing: ViewPairing::Mixed,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let v = &self.vicreg;
        if !(self.tau > 0.0) || !(v.gamma > 0.0) || !(v.eps_std > 0.0) {
            return invalid("tau, gamma and eps_std must be positive");
        }
        if [self.alpha, v.lambda_inv, v.lambda_var, v.lambda_cov, self.weight_decay]
            .iter()
            .any(|x| !(*x >= 0.0))
        {
            return invalid("alpha, the lambdas and weight_decay must be non-negative");
        }
        if !(self.learning_rate > 0.0) || self.batch_size == 0 {
            return invalid("learning_rate and batch_size must be positive");
        }
        self.feature_view.validate()?;
        self.structural_view.validate()
    }

    fn view_specs(&self) -> (&AugmentSpec, &AugmentSpec) {
        match self.pairing {
            ViewPairing::Mixed => (&self.feature_view, &self.structural_view),
            ViewPairing::BothStructural => (&self.structural_view, &self.structural_view),
            ViewPairing::BothFeature => (&self.feature_view, &self.feature_view),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub mean_loss: f64,
    pub graph_loss: f64,
    pub node_loss: f64,
}

#[derive(Clone, Debug)]
pub struct TrainResult {
    pub params: ModelParams,
    pub trace: Vec<EpochStats>,
}

pub fn write_loss_trace<W: Write>(trace: &[EpochStats], mut out: W) -> Result<()> {
    writeln!(out, "epoch,mean_loss,graph_loss,node_loss")?;
    for s in trace {
        writeln!(out, "{},{},{},{}", s.epoch, s.mean_loss, s.graph_loss, s.node_loss)?;
    }
    Ok(())
}

struct View {
    aug: Augmented,
    tables: GraphTables,
}

fn make_view(g: &Graph, spec: &AugmentSpec, seed: u64, cfg: &ModelConfig) -> Result<View> {
    let aug = augment(g, spec, seed)?;
    let tables = GraphTables::prepare(&aug.graph, cfg)?;
    Ok(View { aug, tables })
}

/// Positions, in each view, of the original nodes both views kept.
fn common_nodes(a: &[usize], b: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let (mut i, mut j) = (0, 0);
    let (mut ia, mut ib) = (Vec::new(), Vec::new());
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                ia.push(i);
                ib.push(j);
                i += 1;
                j += 1;
            }
        }
    }
    (ia, ib)
}

/// Self-supervised pre-training. Every random choice is derived from `seed`
/// per (epoch, graph, view), so results do not depend on the thread count.
pub fn pretrain(
    dataset: &[Graph],
    train: &TrainConfig,
    model: &ModelConfig,
    seed: u64,
) -> Result<TrainResult> {
    let params = init_params(model, derive_seed(seed, &[0x1417]))?;
    pretrain_from(dataset, train, params, seed)
}

/// Continues training from given parameters.
pub fn pretrain_from(
    dataset: &[Graph],
    train: &TrainConfig,
    mut params: ModelParams,
    seed: u64,
) -> Result<TrainResult> {
    if dataset.is_empty() {
        return invalid("cannot pre-train on an empty dataset");
    }
    train.validate()?;
    let model = params.config.clone();
    let (spec1, spec2) = train.view_specs();
    let mut opt = Adam::new(params.store.tensors(), train.learning_rate, train.weight_decay);
    let mut trace = Vec::with_capacity(train.epochs);
    let mut order: Vec<usize> = (0..dataset.len()).collect();

    for epoch in 0..train.epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[1, epoch as u64]));
        order.shuffle(&mut rng);
        let (mut sum, mut sum_g, mut sum_n, mut batches) = (0.0, 0.0, 0.0, 0usize);
        for (bi, chunk) in order.chunks(train.batch_size).enumerate() {
            let views: Vec<(View, View, u64, u64)> = chunk
                .par_iter()
                .map(|&gi| {
                    let s = |v: u64| derive_seed(seed, &[2, epoch as u64, gi as u64, v]);
                    let v1 = make_view(&dataset[gi], spec1, s(1), &model)?;
                    let v2 = make_view(&dataset[gi], spec2, s(2), &model)?;
                    Ok((v1, v2, s(3), s(4)))
                })
                .collect::<Result<_>>()?;
            let t1: Vec<&GraphTables> = views.iter().map(|v| &v.0.tables).collect();
            let t2: Vec<&GraphTables> = views.iter().map(|v| &v.1.tables).collect();
            let f1: Vec<u64> = views.iter().map(|v| v.2).collect();
            let f2: Vec<u64> = views.iter().map(|v| v.3).collect();
            let b1 = Batch::new(&t1, Some(&f1))?;
            let b2 = Batch::new(&t2, Some(&f2))?;

            let mut tape = Tape::new();
            let vars = bind_params(&mut tape, &params, true);
            let out1 = Encoder::new(&params, &vars, Mode::Train).forward(&mut tape, &b1)?;
            let out2 = Encoder::new(&params, &vars, Mode::Train).forward(&mut tape, &b2)?;

            let mut pairs = Vec::new();
            if train.alpha != 0.0 {
                for (k, (v1, v2, ..)) in views.iter().enumerate() {
                    let (ia, ib) = common_nodes(&v1.aug.kept, &v2.aug.kept);
                    if ia.is_empty() {
                        continue;
                    }
                    let off1 = b1.node_offsets[k];
                    let off2 = b2.node_offsets[k];
                    let ra: Vec<usize> = ia.iter().map(|i| i + off1).collect();
                    let rb: Vec<usize> = ib.iter().map(|i| i + off2).collect();
                    let h1 = tape.select_rows(out1.nodes, ra.into())?;
                    let h2 = tape.select_rows(out2.nodes, rb.into())?;
                    pairs.push((h1, h2));
                }
            }
            let loss = total_loss(&mut tape, out1.z, out2.z, &pairs, train.tau, train.alpha, &train.vicreg)?;
            let value = tape.value(loss.total).item();
            if !value.is_finite() {
                return Err(Error::Divergence {
                    epoch,
                    batch: bi,
                    loss: value,
                });
            }
            let grads = tape.backward(loss.total)?;
            let g: Vec<_> = vars.iter().map(|&v| grads.get(v)).collect();
            opt.step(params.store.tensors_mut(), &g);
            for (stats, var) in out1.bn_sites.iter().chain(&out2.bn_sites) {
                if let Some((mean, var)) = tape.batch_norm_stats(*var) {
                    params.running[*stats].update(mean, var);
                }
            }
            sum += value;
            sum_g += tape.value(loss.graph).item();
            sum_n += loss.node.map_or(0.0, |n| tape.value(n).item());
            batches += 1;
        }
        let b = batches as f64;
        trace.push(EpochStats {
            epoch,
            mean_loss: sum / b,
            graph_loss: sum_g / b,
            node_loss: sum_n / b,
        });
    }
    if !params.all_finite() {
        return Err(Error::Divergence {
            epoch: train.epochs,
            batch: 0,
            loss: f64::NAN,
        });
    }
    Ok(TrainResult { params, trace })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn intersection_positions() {
        assert_eq!(common_nodes(&[0, 2, 3, 7], &[1, 2, 7]), (vec![1, 3], vec![1, 2]));
        assert_eq!(common_nodes(&[], &[1]), (vec![], vec![]));
    }

    #[test]
    fn empty_dataset_rejected() {
        assert!(pretrain(&[], &TrainConfig::default(), &ModelConfig::default(), 0).is_err());
    }
}
