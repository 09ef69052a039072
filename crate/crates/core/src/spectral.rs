//! Laplacian eigenvector positional encodings.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::graph::Graph;
use crate::tensor::Tensor;

/// Eigenvalues below this are treated as the kernel of `L` (one per component).
pub const TRIVIAL_EIGENVALUE: f64 = 1e-8;

/// Magnitudes within this of the column maximum count as tied in sign
/// canonicalization.
const SIGN_TIE_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PositionalEncoding {
    /// `m×p`; columns past `used_dims` are zero.
    pub pe: Tensor,
    pub p: usize,
    pub used_dims: usize,
    /// Eigenvalues belonging to the used columns, ascending.
    pub eigenvalues: Vec<f64>,
}

/// `L = D - A` as a dense matrix.
pub fn laplacian_matrix(g: &Graph) -> Tensor {
    let m = g.node_count();
    let mut l = Tensor::zeros(m, m);
    for v in 0..m {
        l.set(v, v, g.degree(v) as f64);
    }
    for &(u, v) in g.edges() {
        l.set(u, v, -1.0);
        l.set(v, u, -1.0);
    }
    l
}

/// Full ascending eigendecomposition of the Laplacian: `(values, vectors)`
/// with eigenvectors as columns of an `m×m` tensor.
pub fn laplacian_eigen(g: &Graph) -> (Vec<f64>, Tensor) {
    let m = g.node_count();
    if m == 0 {
        return (Vec::new(), Tensor::zeros(0, 0));
    }
    let l = laplacian_matrix(g);
    let mat = DMatrix::from_row_slice(m, m, l.data());
    let eig = SymmetricEigen::new(mat);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[a]
            .partial_cmp(&eig.eigenvalues[b])
            .expect("finite eigenvalues")
            .then(a.cmp(&b))
    });
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = Tensor::zeros(m, m);
    for (col, &i) in order.iter().enumerate() {
        for r in 0..m {
            vectors.set(r, col, eig.eigenvectors[(r, i)]);
        }
    }
    (values, vectors)
}

/// Sorted Laplacian spectrum.
pub fn laplacian_spectrum(g: &Graph) -> Vec<f64> {
    laplacian_eigen(g).0
}

/// The `p` smallest non-trivial Laplacian eigenvectors, unit-normalized and
/// sign-canonicalized so each column's largest-magnitude entry is positive
/// (the lowest node index decides among tied magnitudes). Zero-padded when
/// fewer than `p` exist.
pub fn laplacian_pe(g: &Graph, p: usize) -> Result<PositionalEncoding> {
    if p < 1 {
        return invalid("positional encoding dimension must be at least 1");
    }
    let m = g.node_count();
    let (values, vectors) = laplacian_eigen(g);
    let mut pe = Tensor::zeros(m, p);
    let mut eigenvalues = Vec::new();
    let mut col = 0;
    for (i, &lambda) in values.iter().enumerate() {
        if col == p {
            break;
        }
        if lambda < TRIVIAL_EIGENVALUE {
            continue;
        }
        let mut v: Vec<f64> = (0..m).map(|r| vectors.get(r, i)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        for x in &mut v {
            *x /= norm;
        }
        canonicalize_sign(&mut v);
        for (r, x) in v.into_iter().enumerate() {
            pe.set(r, col, x);
        }
        eigenvalues.push(lambda);
        col += 1;
    }
    Ok(PositionalEncoding {
        pe,
        p,
        used_dims: col,
        eigenvalues,
    })
}

fn canonicalize_sign(v: &mut [f64]) {
    let max = v.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
    if max == 0.0 {
        return;
    }
    let pivot = v
        .iter()
        .position(|x| x.abs() >= max - SIGN_TIE_TOLERANCE)
        .expect("maximum is attained");
    if v[pivot] < 0.0 {
        for x in v.iter_mut() {
            *x = -*x;
        }
    }
}

/// Independently negates each used column with probability 1/2.
pub fn random_sign_flip(pe: &PositionalEncoding, seed: u64) -> PositionalEncoding {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = pe.clone();
    for c in 0..pe.used_dims {
        if rng.gen_bool(0.5) {
            for r in 0..pe.pe.rows() {
                let x = out.pe.get(r, c);
                out.pe.set(r, c, -x);
            }
        }
    }
    out
}
