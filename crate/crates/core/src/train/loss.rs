use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Var};
use crate::error::{invalid, Error, Result};
use crate::tensor::Tensor;

/// NT-Xent over the `2n` stacked views: cosine similarities scaled by `1/τ`,
/// each anchor's positive is its sibling view, all other rows except itself
/// are negatives. Mean over all `2n` anchors.
pub fn nt_xent(tape: &mut Tape, zi: Var, zj: Var, tau: f64) -> Result<Var> {
    if !(tau > 0.0) {
        return invalid(format!("temperature must be positive, got {tau}"));
    }
    let (si, sj) = (tape.shape(zi), tape.shape(zj));
    if si != sj || si[0] == 0 {
        return Err(Error::Shape {
            op: "nt_xent",
            detail: format!("{si:?} vs {sj:?}"),
        });
    }
    let n = si[0];
    let z = tape.concat_rows(&[zi, zj])?;
    let sim = tape.cosine_similarity_matrix(z)?;
    let logits = tape.scale(sim, 1.0 / tau)?;
    let logp = tape.row_log_softmax(logits, true)?;
    let positives: Vec<(usize, usize)> = (0..2 * n).map(|a| (a, (a + n) % (2 * n))).collect();
    let picked = tape.gather(logp, Arc::new(positives))?;
    let total = tape.sum(picked)?;
    tape.scale(total, -1.0 / (2 * n) as f64)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VicregForm {
    /// Variance and covariance terms as absolute differences between views.
    #[default]
    CrossView,
    /// Standard form: each view's hinge and off-diagonal covariance penalized
    /// separately.
    PerView,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VicregWeights {
    pub lambda_inv: f64,
    pub lambda_var: f64,
    pub lambda_cov: f64,
    /// Target standard deviation.
    pub gamma: f64,
    pub eps_std: f64,
    pub form: VicregForm,
}

impl Default for VicregWeights {
    fn default() -> Self {
        VicregWeights {
            lambda_inv: 1.0,
            lambda_var: 24.0,
            lambda_cov: 24.0,
            gamma: 1.0,
            eps_std: 1e-4,
            form: VicregForm::CrossView,
        }
    }
}

/// The three VICReg terms before weighting.
#[derive(Clone, Copy, Debug)]
pub struct VicregTerms {
    pub invariance: Var,
    pub variance: Var,
    pub covariance: Var,
    pub total: Var,
}

fn hinge(tape: &mut Tape, h: Var, w: &VicregWeights) -> Result<Var> {
    let var = tape.var_cols(h)?;
    let var = tape.add_scalar(var, w.eps_std)?;
    let std = tape.sqrt(var)?;
    let neg = tape.scale(std, -1.0)?;
    let gap = tape.add_scalar(neg, w.gamma)?;
    tape.relu(gap)
}

/// Squared empirical covariance with the diagonal zeroed.
fn off_diagonal_cov_sq(tape: &mut Tape, h: Var) -> Result<Var> {
    let [m, d] = tape.shape(h);
    let mean = tape.mean_cols(h)?;
    let neg = tape.scale(mean, -1.0)?;
    let centered = tape.add_row(h, neg)?;
    let ct = tape.transpose(centered)?;
    let gram = tape.matmul(ct, centered)?;
    let cov = tape.scale(gram, 1.0 / (m as f64 - 1.0))?;
    let sq = tape.square(cov)?;
    let mut mask = Tensor::ones(d, d);
    for i in 0..d {
        mask.set(i, i, 0.0);
    }
    let mask = tape.constant(mask);
    tape.mul(sq, mask)
}

/// VICReg between two aligned `m×d` node embedding matrices.
pub fn vicreg(tape: &mut Tape, hi: Var, hj: Var, w: &VicregWeights) -> Result<VicregTerms> {
    let (si, sj) = (tape.shape(hi), tape.shape(hj));
    if si != sj || si[0] == 0 {
        return Err(Error::Shape {
            op: "vicreg",
            detail: format!("{si:?} vs {sj:?}"),
        });
    }
    let [m, d] = si;
    let diff = tape.sub(hi, hj)?;
    let sq = tape.square(diff)?;
    let inv = tape.sum(sq)?;
    let invariance = tape.scale(inv, 1.0 / m as f64)?;

    let a = hinge(tape, hi, w)?;
    let b = hinge(tape, hj, w)?;
    let variance = match w.form {
        VicregForm::CrossView => {
            let d_ab = tape.sub(a, b)?;
            let abs = tape.abs(d_ab)?;
            let s = tape.sum(abs)?;
            tape.scale(s, 1.0 / d as f64)?
        }
        VicregForm::PerView => {
            let both = tape.add(a, b)?;
            let s = tape.sum(both)?;
            tape.scale(s, 1.0 / d as f64)?
        }
    };

    let covariance = if m < 2 {
        tape.constant(Tensor::scalar(0.0))
    } else {
        let ci = off_diagonal_cov_sq(tape, hi)?;
        let cj = off_diagonal_cov_sq(tape, hj)?;
        let combined = match w.form {
            VicregForm::CrossView => {
                let dc = tape.sub(ci, cj)?;
                tape.abs(dc)?
            }
            VicregForm::PerView => tape.add(ci, cj)?,
        };
        let s = tape.sum(combined)?;
        tape.scale(s, 1.0 / d as f64)?
    };

    let t1 = tape.scale(invariance, w.lambda_inv)?;
    let t2 = tape.scale(variance, w.lambda_var)?;
    let t3 = tape.scale(covariance, w.lambda_cov)?;
    let t12 = tape.add(t1, t2)?;
    let total = tape.add(t12, t3)?;
    Ok(VicregTerms {
        invariance,
        variance,
        covariance,
        total,
    })
}

/// Components of the combined objective.
#[derive(Clone, Copy, Debug)]
pub struct TotalLoss {
    pub graph: Var,
    /// Mean VICReg over the node pairs (absent when there are none).
    pub node: Option<Var>,
    pub total: Var,
}

/// `NT-Xent(z_i, z_j) + α · mean_g VICReg(H_i^g, H_j^g)`. With `α = 0` the
/// node term is not added at all, so the total is the NT-Xent value exactly.
pub fn total_loss(
    tape: &mut Tape,
    zi: Var,
    zj: Var,
    node_pairs: &[(Var, Var)],
    tau: f64,
    alpha: f64,
    weights: &VicregWeights,
) -> Result<TotalLoss> {
    let graph = nt_xent(tape, zi, zj, tau)?;
    if alpha == 0.0 || node_pairs.is_empty() {
        return Ok(TotalLoss {
            graph,
            node: None,
            total: graph,
        });
    }
    let mut acc: Option<Var> = None;
    for &(hi, hj) in node_pairs {
        let t = vicreg(tape, hi, hj, weights)?.total;
        acc = Some(match acc {
            Some(a) => tape.add(a, t)?,
            None => t,
        });
    }
    let node = tape.scale(acc.expect("nonempty"), 1.0 / node_pairs.len() as f64)?;
    let weighted = tape.scale(node, alpha)?;
    let total = tape.add(graph, weighted)?;
    Ok(TotalLoss {
        graph,
        node: Some(node),
        total,
    })
}
