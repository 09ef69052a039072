//! Synthetic benchmark graphs and hand-built fixture pairs.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};
use crate::graph::Graph;
use crate::train::derive_seed;

use super::dataset::Dataset;
use super::graph6::parse_graph6_lines;

/// Circular skip-link graph: the cycle `C_m` plus chords `{i, i + R mod m}`.
pub fn generate_csl(m: usize, skip: usize) -> Result<Graph> {
    if m < 5 {
        return invalid(format!("CSL needs at least 5 nodes, got {m}"));
    }
    if skip < 2 || 2 * skip >= m {
        return invalid(format!("skip {skip} must satisfy 2 <= R < m/2 for m = {m}"));
    }
    let mut pairs = Vec::with_capacity(2 * m);
    for i in 0..m {
        pairs.push((i, (i + 1) % m));
        pairs.push((i, (i + skip) % m));
    }
    Graph::from_edge_list(m, &pairs, None, None)
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn mod_inverse(a: usize, m: usize) -> Option<usize> {
    (1..m).find(|&x| a * x % m == 1)
}

/// Smallest skip in `R`'s class under `R ~ ±R, ±R⁻¹ (mod m)`.
fn class_key(r: usize, m: usize) -> usize {
    let mut cands = vec![r, m - r];
    if let Some(inv) = mod_inverse(r, m) {
        cands.push(inv);
        cands.push(m - inv);
    }
    cands.into_iter().filter(|&c| c >= 2 && 2 * c < m).min().unwrap_or(r)
}

/// Checks that `i ↦ a·i mod m` maps `csl(m, r)` onto `csl(m, s)` edge for edge.
fn multiplier_is_isomorphism(m: usize, r: usize, s: usize, a: usize) -> Result<bool> {
    let g = generate_csl(m, r)?;
    let h = generate_csl(m, s)?;
    Ok(g.edges().iter().all(|&(u, v)| h.has_edge(a * u % m, a * v % m)))
}

/// Representative skips of the CSL isomorphism classes among
/// `R = 2..=max_skip`, ascending. Membership of every skip in its class is
/// confirmed with an explicit multiplier isomorphism. Intended for prime `m`.
pub fn enumerate_csl_classes(m: usize, max_skip: usize) -> Result<Vec<usize>> {
    let mut reps = Vec::new();
    for r in 2..=max_skip {
        if 2 * r >= m {
            break;
        }
        let rep = class_key(r, m);
        if rep != r {
            // rep ≡ ±r or ±r⁻¹; in the latter case multiplying by rep sends
            // the cycle to the rep-chords and the r-chords to the cycle
            let ok = if gcd(r, m) == 1 {
                let inv = mod_inverse(r, m).expect("coprime");
                [1, m - 1, inv, m - inv, rep * inv % m, rep]
                    .iter()
                    .any(|&a| multiplier_is_isomorphism(m, r, rep, a).unwrap_or(false))
            } else {
                multiplier_is_isomorphism(m, r, rep, 1)? || multiplier_is_isomorphism(m, r, rep, m - 1)?
            };
            if !ok {
                return Err(Error::InvalidArgument(format!(
                    "no multiplier isomorphism between skips {r} and {rep} mod {m}"
                )));
            }
        }
        if !reps.contains(&rep) {
            reps.push(rep);
        }
    }
    reps.sort_unstable();
    Ok(reps)
}

/// `copies` randomly relabelled copies of each CSL class on `m` nodes,
/// labelled by class index.
pub fn csl_dataset(m: usize, copies: usize, seed: u64) -> Result<Dataset> {
    let reps = enumerate_csl_classes(m, (m - 1) / 2)?;
    let graphs = reps.iter().map(|&r| generate_csl(m, r)).collect::<Result<Vec<_>>>()?;
    permuted_copies(format!("csl{m}"), &graphs, copies, seed)
}

/// One class per input graph, each repeated `copies` times under independent
/// random relabellings.
pub fn permuted_copies(name: impl Into<String>, graphs: &[Graph], copies: usize, seed: u64) -> Result<Dataset> {
    let mut out = Vec::with_capacity(graphs.len() * copies);
    let mut labels = Vec::with_capacity(graphs.len() * copies);
    for (class, g) in graphs.iter().enumerate() {
        for c in 0..copies {
            let mut perm: Vec<usize> = (0..g.node_count()).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[class as u64, c as u64]));
            perm.shuffle(&mut rng);
            out.push(g.permute(&perm)?);
            labels.push(class);
        }
    }
    Dataset::new(name, out, labels, graphs.len())
}

pub const FIXTURE_NAMES: [&str; 4] = [
    "decalin_bicyclopentyl",
    "fig3_pair",
    "fig4_pair",
    "triangles_vs_hexagon",
];

fn edges(m: usize, pairs: &[(usize, usize)]) -> Graph {
    Graph::from_edge_list(m, pairs, None, None).expect("fixture edge list is valid")
}

/// Hand-built pairs of non-isomorphic graphs that 1-WL cannot separate.
///
/// * `decalin_bicyclopentyl`: two hexagons sharing an edge vs two pentagons
///   joined by an edge (10 nodes, 11 edges each).
/// * `fig3_pair`: `K_{3,3}` vs the triangular prism (both 3-regular on 6 nodes).
/// * `fig4_pair`: a middle node joined to two triangles vs a middle node
///   joined to opposite corners of a hexagon (7 nodes each; node 0 is the
///   middle node).
/// * `triangles_vs_hexagon`: `2×C3` vs `C6`.
pub fn builtin_fixture(name: &str) -> Result<(Graph, Graph)> {
    Ok(match name {
        "decalin_bicyclopentyl" => (
            edges(
                10,
                &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 0), (4, 6), (6, 7), (7, 8), (8, 9), (9, 5)],
            ),
            edges(
                10,
                &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 0), (5, 6), (6, 7), (7, 8), (8, 9), (9, 5), (0, 5)],
            ),
        ),
        "fig3_pair" => (
            edges(6, &[(0, 3), (0, 4), (0, 5), (1, 3), (1, 4), (1, 5), (2, 3), (2, 4), (2, 5)]),
            edges(6, &[(0, 1), (1, 2), (2, 0), (3, 4), (4, 5), (5, 3), (0, 3), (1, 4), (2, 5)]),
        ),
        "fig4_pair" => (
            edges(7, &[(0, 1), (0, 4), (1, 2), (2, 3), (3, 1), (4, 5), (5, 6), (6, 4)]),
            edges(7, &[(0, 1), (0, 4), (1, 2), (2, 3), (3, 4), (4, 5), (5, 6), (6, 1)]),
        ),
        "triangles_vs_hexagon" => (
            Graph::disjoint_union(&[&Graph::complete(3), &Graph::complete(3)])?,
            Graph::cycle(6),
        ),
        other => {
            return invalid(format!(
                "unknown fixture {other:?}; expected one of {}",
                FIXTURE_NAMES.join(", ")
            ))
        }
    })
}

/// Whether `g` is strongly regular with parameters `(n, k, λ, μ)`.
pub fn is_strongly_regular(g: &Graph, n: usize, k: usize, lambda: usize, mu: usize) -> bool {
    if g.node_count() != n || (0..n).any(|v| g.degree(v) != k) {
        return false;
    }
    for u in 0..n {
        for v in u + 1..n {
            let common = g.neighbors(u).iter().filter(|w| g.has_edge(**w, v)).count();
            let want = if g.has_edge(u, v) { lambda } else { mu };
            if common != want {
                return false;
            }
        }
    }
    true
}

/// Reads the 15 strongly regular `(25, 12, 5, 6)` graphs from graph6 text,
/// checking the count and the parameters of each.
pub fn parse_sr25(text: &str) -> Result<Vec<Graph>> {
    let graphs = parse_graph6_lines(text)?;
    if graphs.len() != 15 {
        return Err(Error::Dataset(format!("expected 15 SR(25,12,5,6) graphs, found {}", graphs.len())));
    }
    if let Some(i) = graphs.iter().position(|g| !is_strongly_regular(g, 25, 12, 5, 6)) {
        return Err(Error::Dataset(format!("graph {i} is not strongly regular with parameters (25,12,5,6)")));
    }
    Ok(graphs)
}

pub fn load_sr25(path: &std::path::Path) -> Result<Vec<Graph>> {
    parse_sr25(&std::fs::read_to_string(path)?)
}
