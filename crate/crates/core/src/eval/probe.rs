//! Frozen-embedding linear probe: stratified k-fold, multinomial logistic
//! regression fitted by full-batch gradient descent.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::tensor::Tensor;
use crate::train::derive_seed;

pub const PROBE_L2: f64 = 1e-3;
pub const PROBE_TOLERANCE: f64 = 1e-6;
pub const PROBE_MAX_ITERATIONS: usize = 2000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub fold_accuracies: Vec<f64>,
    pub mean: f64,
    /// Population standard deviation over folds.
    pub std: f64,
    /// `confusion[true][predicted]`, pooled over all test folds.
    pub confusion: Vec<Vec<usize>>,
    /// Fold of each sample.
    pub assignment: Vec<usize>,
}

/// Stratified fold assignment. Each class's members are shuffled and dealt
/// round-robin, continuing where the previous class stopped so fold sizes
/// stay balanced.
pub fn stratified_folds(labels: &[usize], folds: usize, seed: u64) -> Result<Vec<usize>> {
    if folds < 2 {
        return invalid(format!("need at least 2 folds, got {folds}"));
    }
    let classes = labels.iter().max().map_or(0, |&c| c + 1);
    let mut assignment = vec![0; labels.len()];
    let mut next = 0;
    for c in 0..classes {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        if members.is_empty() {
            continue;
        }
        if members.len() < folds {
            return Err(Error::InvalidArgument(format!(
                "degenerate stratification: class {c} has {} members for {folds} folds",
                members.len()
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[c as u64]));
        members.shuffle(&mut rng);
        for i in members {
            assignment[i] = next % folds;
            next += 1;
        }
    }
    Ok(assignment)
}

/// Fitted classifier on standardized inputs.
struct Logistic {
    mean: Vec<f64>,
    scale: Vec<f64>,
    w: Vec<f64>, // d×c row-major
    b: Vec<f64>,
    classes: usize,
}

fn standardize(x: &Tensor, rows: &[usize]) -> (Vec<f64>, Vec<f64>) {
    let d = x.cols();
    let n = rows.len() as f64;
    let mut mean = vec![0.0; d];
    for &r in rows {
        for (m, v) in mean.iter_mut().zip(x.row(r)) {
            *m += v / n;
        }
    }
    let mut var = vec![0.0; d];
    for &r in rows {
        for j in 0..d {
            var[j] += (x.get(r, j) - mean[j]).powi(2) / n;
        }
    }
    let scale = var
        .into_iter()
        .map(|v| if v > 1e-12 { 1.0 / v.sqrt() } else { 1.0 })
        .collect();
    (mean, scale)
}

/// Largest eigenvalue of the symmetric `a` (k×k) by power iteration.
fn top_eigenvalue(a: &[f64], k: usize) -> f64 {
    let mut v = vec![1.0 / (k as f64).sqrt(); k];
    let mut lambda = 0.0;
    for _ in 0..200 {
        let mut w = vec![0.0; k];
        for i in 0..k {
            w[i] = (0..k).map(|j| a[i * k + j] * v[j]).sum();
        }
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        let next = norm;
        v = w.into_iter().map(|x| x / norm).collect();
        if (next - lambda).abs() <= 1e-9 * next {
            return next;
        }
        lambda = next;
    }
    lambda
}

impl Logistic {
    fn fit(x: &Tensor, y: &[usize], rows: &[usize], classes: usize) -> Logistic {
        let (mean, scale) = standardize(x, rows);
        let d = x.cols();
        let n = rows.len();
        let xs: Vec<f64> = rows
            .iter()
            .flat_map(|&r| (0..d).map(move |j| (r, j)))
            .map(|(r, j)| (x.get(r, j) - mean[j]) * scale[j])
            .collect();

        // Lipschitz bound: softmax curvature ≤ 1/2 times the top eigenvalue of
        // the bias-augmented Gram matrix over n, plus the ridge
        let k = d + 1;
        let mut gram = vec![0.0; k * k];
        for i in 0..n {
            let row = &xs[i * d..(i + 1) * d];
            for a in 0..k {
                let xa = if a < d { row[a] } else { 1.0 };
                for b in 0..k {
                    let xb = if b < d { row[b] } else { 1.0 };
                    gram[a * k + b] += xa * xb / n as f64;
                }
            }
        }
        let lipschitz = 1.05 * 0.5 * top_eigenvalue(&gram, k) + PROBE_L2;
        let step = 1.0 / lipschitz;

        let mut w = vec![0.0; d * classes];
        let mut b = vec![0.0; classes];
        let mut gw = vec![0.0; d * classes];
        let mut gb = vec![0.0; classes];
        let mut p = vec![0.0; classes];
        for _ in 0..PROBE_MAX_ITERATIONS {
            gw.iter_mut().for_each(|g| *g = 0.0);
            gb.iter_mut().for_each(|g| *g = 0.0);
            for i in 0..n {
                let row = &xs[i * d..(i + 1) * d];
                for c in 0..classes {
                    p[c] = b[c] + (0..d).map(|j| row[j] * w[j * classes + c]).sum::<f64>();
                }
                let max = p.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let z: f64 = p.iter_mut().map(|v| {
                    *v = (*v - max).exp();
                    *v
                }).sum();
                for c in 0..classes {
                    let g = (p[c] / z - if y[rows[i]] == c { 1.0 } else { 0.0 }) / n as f64;
                    gb[c] += g;
                    for j in 0..d {
                        gw[j * classes + c] += row[j] * g;
                    }
                }
            }
            for (g, wv) in gw.iter_mut().zip(&w) {
                *g += PROBE_L2 * wv;
            }
            let max_grad = gw.iter().chain(&gb).fold(0.0f64, |m, g| m.max(g.abs()));
            if max_grad < PROBE_TOLERANCE {
                break;
            }
            for (wv, g) in w.iter_mut().zip(&gw) {
                *wv -= step * g;
            }
            for (bv, g) in b.iter_mut().zip(&gb) {
                *bv -= step * g;
            }
        }
        Logistic {
            mean,
            scale,
            w,
            b,
            classes,
        }
    }

    fn predict(&self, row: &[f64]) -> usize {
        let d = row.len();
        let mut best = (f64::NEG_INFINITY, 0);
        for c in 0..self.classes {
            let s = self.b[c]
                + (0..d)
                    .map(|j| (row[j] - self.mean[j]) * self.scale[j] * self.w[j * self.classes + c])
                    .sum::<f64>();
            if s > best.0 {
                best = (s, c);
            }
        }
        best.1
    }
}

/// Stratified `folds`-fold evaluation of a linear classifier on frozen
/// embeddings. Standardization statistics come from the training folds only.
pub fn linear_probe(embeddings: &Tensor, labels: &[usize], folds: usize, seed: u64) -> Result<ProbeResult> {
    if embeddings.rows() != labels.len() {
        return Err(Error::RowMismatch {
            what: "embedding matrix",
            got: embeddings.rows(),
            expected: labels.len(),
        });
    }
    if !embeddings.all_finite() {
        return invalid("embeddings contain non-finite values");
    }
    let assignment = stratified_folds(labels, folds, seed)?;
    let classes = labels.iter().max().map_or(0, |&c| c + 1);
    let mut confusion = vec![vec![0; classes]; classes];
    let mut fold_accuracies = Vec::with_capacity(folds);
    for f in 0..folds {
        let (test, train): (Vec<usize>, Vec<usize>) = (0..labels.len()).partition(|&i| assignment[i] == f);
        assert!(train.iter().all(|&i| assignment[i] != f), "test rows leaked into training");
        let model = Logistic::fit(embeddings, labels, &train, classes);
        let mut correct = 0;
        for &i in &test {
            let pred = model.predict(embeddings.row(i));
            confusion[labels[i]][pred] += 1;
            correct += usize::from(pred == labels[i]);
        }
        fold_accuracies.push(correct as f64 / test.len() as f64);
    }
    let mean = fold_accuracies.iter().sum::<f64>() / folds as f64;
    let std = (fold_accuracies.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / folds as f64).sqrt();
    Ok(ProbeResult {
        fold_accuracies,
        mean,
        std,
        confusion,
        assignment,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn blobs(seed: u64) -> (Tensor, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for i in 0..60 {
            let c = i % 2;
            let centre = if c == 0 { -3.0 } else { 3.0 };
            rows.push(vec![centre + rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]);
            y.push(c);
        }
        (Tensor::from_rows(&rows).unwrap(), y)
    }

    #[test]
    fn separable_blobs() {
        let (x, y) = blobs(3);
        let r = linear_probe(&x, &y, 10, 0).unwrap();
        assert_eq!(r.fold_accuracies.len(), 10);
        assert_eq!(r.mean, 1.0);
        assert_eq!(r.std, 0.0);
        let mean = r.fold_accuracies.iter().sum::<f64>() / 10.0;
        assert!((mean - r.mean).abs() < 1e-12);
        assert_eq!(r.confusion.iter().flatten().sum::<usize>(), 60);
    }

    #[test]
    fn random_labels_near_chance() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let rows: Vec<Vec<f64>> = (0..500).map(|_| (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let y: Vec<usize> = (0..500).map(|i| i % 10).collect();
        let r = linear_probe(&Tensor::from_rows(&rows).unwrap(), &y, 10, 5).unwrap();
        assert!((r.mean - 0.10).abs() <= 0.05, "mean {}", r.mean);
    }

    #[test]
    fn folds_are_stratified_and_disjoint() {
        let y: Vec<usize> = (0..40).map(|i| i % 4).collect();
        let a = stratified_folds(&y, 5, 9).unwrap();
        for f in 0..5 {
            for c in 0..4 {
                let n = (0..40).filter(|&i| a[i] == f && y[i] == c).count();
                assert_eq!(n, 2);
            }
        }
        assert_eq!(a, stratified_folds(&y, 5, 9).unwrap());
    }

    #[test]
    fn degenerate_stratification() {
        let y = vec![0, 0, 0, 1, 1];
        let x = Tensor::zeros(5, 2);
        assert!(linear_probe(&x, &y, 3, 0).is_err());
        assert!(linear_probe(&x, &y, 1, 0).is_err());
        assert!(linear_probe(&x, &y[..4], 2, 0).is_err());
    }
}
