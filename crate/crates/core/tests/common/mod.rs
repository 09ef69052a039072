//! Brute-force oracles and the gradient-check suite shared by the
//! integration test targets.
#![allow(dead_code)]

use std::collections::VecDeque;
use std::sync::Arc;

use genhop_core::autodiff::{finite_difference_check, SparseConst, Tape, Var};
use genhop_core::graph::SparseRows;
use genhop_core::model::{bind_params, init_params, Batch, Encoder, GraphTables, Mode, ModelConfig};
use genhop_core::train::{derive_seed, nt_xent, total_loss, vicreg, VicregForm, VicregWeights};
use genhop_core::{Graph, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_graph(rng: &mut impl Rng, m: usize, p: f64) -> Graph {
    let mut pairs = Vec::new();
    for u in 0..m {
        for v in u + 1..m {
            if rng.gen_bool(p) {
                pairs.push((u, v));
            }
        }
    }
    Graph::from_edge_list(m, &pairs, None, None).unwrap()
}

pub fn random_perm(rng: &mut impl Rng, m: usize) -> Vec<usize> {
    use rand::seq::SliceRandom;
    let mut p: Vec<usize> = (0..m).collect();
    p.shuffle(rng);
    p
}

/// `walks[k][u][v]` = number of length-`k` walks from `u` to `v`, by
/// enumerating every walk.
pub fn enumerate_walks(g: &Graph, max_k: usize) -> Vec<Vec<Vec<u128>>> {
    let m = g.node_count();
    let mut walks = vec![vec![vec![0u128; m]; m]; max_k + 1];
    fn dfs(g: &Graph, start: usize, at: usize, depth: usize, max_k: usize, walks: &mut [Vec<Vec<u128>>]) {
        walks[depth][start][at] += 1;
        if depth == max_k {
            return;
        }
        for &w in g.neighbors(at) {
            dfs(g, start, w, depth + 1, max_k, walks);
        }
    }
    for s in 0..m {
        dfs(g, s, s, 0, max_k, &mut walks);
    }
    walks
}

fn for_each_permutation(items: &mut Vec<usize>, k: usize, f: &mut impl FnMut(&[usize])) {
    if k == items.len() {
        f(items);
        return;
    }
    for i in k..items.len() {
        items.swap(k, i);
        for_each_permutation(items, k + 1, f);
        items.swap(k, i);
    }
}

/// `cycles[v][len]` = simple cycles of length `len` through `v`, by checking
/// every vertex subset for Hamiltonian cycles of its induced subgraph.
pub fn enumerate_cycles(g: &Graph, max_len: usize) -> Vec<Vec<u64>> {
    let m = g.node_count();
    let mut out = vec![vec![0u64; max_len + 1]; m];
    for mask in 1u32..(1 << m) {
        let set: Vec<usize> = (0..m).filter(|&v| mask >> v & 1 == 1).collect();
        let len = set.len();
        if len < 3 || len > max_len {
            continue;
        }
        // fix the smallest vertex first; each cycle then appears twice
        let mut rest = set[1..].to_vec();
        let mut twice = 0u64;
        for_each_permutation(&mut rest, 0, &mut |p| {
            let mut prev = set[0];
            for &v in p {
                if !g.has_edge(prev, v) {
                    return;
                }
                prev = v;
            }
            if g.has_edge(prev, set[0]) {
                twice += 1;
            }
        });
        for &v in &set {
            out[v][len] += twice / 2;
        }
    }
    out
}

/// Edge betweenness by listing every shortest path of every node pair.
pub fn enumerate_betweenness(g: &Graph) -> Vec<f64> {
    let m = g.node_count();
    let mut eb = vec![0.0; g.edge_count()];
    for s in 0..m {
        let mut dist = vec![usize::MAX; m];
        dist[s] = 0;
        let mut q = VecDeque::from([s]);
        while let Some(u) = q.pop_front() {
            for &w in g.neighbors(u) {
                if dist[w] == usize::MAX {
                    dist[w] = dist[u] + 1;
                    q.push_back(w);
                }
            }
        }
        for t in s + 1..m {
            if dist[t] == usize::MAX {
                continue;
            }
            let mut paths: Vec<Vec<usize>> = Vec::new();
            let mut stack = vec![vec![t]];
            while let Some(p) = stack.pop() {
                let last = *p.last().unwrap();
                if last == s {
                    paths.push(p);
                    continue;
                }
                for &w in g.neighbors(last) {
                    if dist[w] != usize::MAX && dist[w] + 1 == dist[last] {
                        let mut q = p.clone();
                        q.push(w);
                        stack.push(q);
                    }
                }
            }
            let share = 1.0 / paths.len() as f64;
            for p in &paths {
                for win in p.windows(2) {
                    eb[g.edge_id(win[0], win[1]).unwrap()] += share;
                }
            }
        }
    }
    eb
}

pub fn random_tensor(rng: &mut impl Rng, r: usize, c: usize, lo: f64, hi: f64) -> Tensor {
    Tensor::new(r, c, (0..r * c).map(|_| rng.gen_range(lo..hi)).collect()).unwrap()
}

#[derive(Clone, Debug)]
pub struct GradCase {
    pub name: &'static str,
    pub instances: usize,
    pub max_rel_error: f64,
    pub checked: usize,
    pub excluded: usize,
}

/// Reduces a matrix output to a scalar with fixed random weights so every
/// entry's gradient is exercised.
fn weigh(tape: &mut Tape, rng: &mut ChaCha8Rng, y: Var) -> Var {
    let [r, c] = tape.shape(y);
    let w = tape.constant(random_tensor(rng, r, c, -1.0, 1.0));
    let p = tape.mul(y, w).unwrap();
    tape.sum(p).unwrap()
}

type Builder = fn(&mut Tape, &mut ChaCha8Rng) -> (Vec<Var>, Var);

fn random_sparse(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Arc<SparseConst> {
    let mut rows = Vec::with_capacity(r);
    for _ in 0..r {
        let mut row = Vec::new();
        for j in 0..c {
            if rng.gen_bool(0.4) {
                row.push((j, rng.gen_range(-1.0..1.0)));
            }
        }
        rows.push(row);
    }
    SparseConst::new(SparseRows::from_rows(r, c, rows))
}

fn p(tape: &mut Tape, rng: &mut ChaCha8Rng, r: usize, c: usize) -> Var {
    tape.param(random_tensor(rng, r, c, -1.0, 1.0))
}

fn dims(rng: &mut ChaCha8Rng) -> (usize, usize) {
    (rng.gen_range(2..6), rng.gen_range(1..5))
}

fn primitives() -> Vec<(&'static str, Builder)> {
    vec![
        ("matmul", |t, r| {
            let (m, k) = dims(r);
            let n = r.gen_range(1..4);
            let (a, b) = (p(t, r, m, k), p(t, r, k, n));
            let y = t.matmul(a, b).unwrap();
            (vec![a, b], weigh(t, r, y))
        }),
        ("sparse_matmul", |t, r| {
            let (m, k) = dims(r);
            let s = random_sparse(r, m, k + 1);
            let x = p(t, r, k + 1, 3);
            let y = t.sparse_matmul(s, x).unwrap();
            (vec![x], weigh(t, r, y))
        }),
        ("add", |t, r| {
            let (m, k) = dims(r);
            let (a, b) = (p(t, r, m, k), p(t, r, m, k));
            let y = t.add(a, b).unwrap();
            (vec![a, b], weigh(t, r, y))
        }),
        ("add_row", |t, r| {
            let (m, k) = dims(r);
            let (a, b) = (p(t, r, m, k), p(t, r, 1, k));
            let y = t.add_row(a, b).unwrap();
            (vec![a, b], weigh(t, r, y))
        }),
        ("sub", |t, r| {
            let (m, k) = dims(r);
            let (a, b) = (p(t, r, m, k), p(t, r, m, k));
            let y = t.sub(a, b).unwrap();
            (vec![a, b], weigh(t, r, y))
        }),
        ("mul", |t, r| {
            let (m, k) = dims(r);
            let (a, b) = (p(t, r, m, k), p(t, r, m, k));
            let y = t.mul(a, b).unwrap();
            (vec![a, b], weigh(t, r, y))
        }),
        ("scale", |t, r| {
            let (m, k) = dims(r);
            let a = p(t, r, m, k);
            let c = r.gen_range(-2.0..2.0);
            let y = t.scale(a, c).unwrap();
            (vec![a], weigh(t, r, y))
        }),
        ("add_scalar", |t, r| {
            let (m, k) = dims(r);
            let a = p(t, r, m, k);
            let c = r.gen_range(-2.0..2.0);
            let y = t.add_scalar(a, c).unwrap();
            (vec![a], weigh(t, r, y))
        }),
        ("scale_by", |t, r| {
            let (m, k) = dims(r);
            let (a, s) = (p(t, r, m, k), p(t, r, 1, 1));
            let y = t.scale_by(a, s).unwrap();
            (vec![a, s], weigh(t, r, y))
        }),
        ("relu", |t, r| {
            let (m, k) = dims(r);
            let a = p(t, r, m, k);
            let y = t.relu(a).unwrap();
            (vec![a], weigh(t, r, y))
        }),
        ("square", |t, r| {
            let (m, k) = dims(r);
            let a = p(t, r, m, k);
            let y = t.square(a).unwrap();
            (vec![a], weigh(t, r, y))
        }),
        ("abs", |t, r| {
            let (m, k) = dims(r);
            let a = p(t, r, m, k);
            let y = t.abs(a).unwrap();
            (vec![a], weigh(t, r, y))
        }),
        ("sqrt", |t, r| {
            let (m, k) = dims(r);
            let a = t.param(random_tensor(r, m, k, 0.2, 2.0));
            let y = t.sqrt(a).unwrap();
            (vec![a], weigh(t, r, y))
        }),
        ("row_log_softmax", |t, r| {
            let (m, k) = dims(r);
            let a = p(t, r, m, k + 1);
            let y = t.row_log_softmax(a, false).unwrap();
            (vec![a], weigh(t, r, y))
        }),
        ("row_log_softmax_masked", |t, r| {
            let m = r.gen_range(2..6);
            let a = p(t, r, m, m);
            let y = t.row_log_softmax(a, true).unwrap();
            // masked diagonal holds -inf; weigh only the off-diagonal entries
            let mut w = random_tensor(r, m, m, -1.0, 1.0);
            for i in 0..m {
                w.set(i, i, 0.0);
            }
            let at: Vec<(usize, usize)> = (0..m).flat_map(|i| (0..m).filter(move |&j| j != i).map(move |j| (i, j))).collect();
            let g = t.gather(y, Arc::new(at.clone())).unwrap();
            let wv = t.constant(Tensor::new(1, at.len(), at.iter().map(|&(i, j)| w.get(i, j)).collect()).unwrap());
            let prod = t.mul(g, wv).unwrap();
            let s = t.sum(prod).unwrap();
            (vec![a], s)
        }),
        ("segment_sum", |t, r| {
            let (m, k) = dims(r);
            let a = p(t, r, m, k);
            let segs: Vec<usize> = (0..m).map(|i| i * 3 / m).collect();
            let y = t.segment_sum(a, Arc::new(segs), 3).unwrap();
            (vec![a], weigh(t, r, y))
        }),
        ("gather", |t, r| {
            let (m, k) = dims(r);
            let a = p(t, r, m, k);
            let at: Vec<(usize, usize)> = (0..4).map(|_| (r.gen_range(0..m), r.gen_range(0..k))).collect();
            let y = t.gather(a, Arc::new(at)).unwrap();
            (vec![a], weigh(t, r, y))
        }),
        ("select_rows", |t, r| {
            let (m, k) = dims(r);
            let a = p(t, r, m, k);
            let rows: Vec<usize> = (0..5).map(|_| r.gen_range(0..m)).collect();
            let y = t.select_rows(a, Arc::new(rows)).unwrap();
            (vec![a], weigh(t, r, y))
        }),
        ("sum", |t, r| {
            let (m, k) = dims(r);
            let a = p(t, r, m, k);
            let s = t.sum(a).unwrap();
            let y = t.square(s).unwrap();
            (vec![a], y)
        }),
        ("mean_cols", |t, r| {
            let (m, k) = dims(r);
            let a = p(t, r, m, k);
            let y = t.mean_cols(a).unwrap();
            (vec![a], weigh(t, r, y))
        }),
        ("var_cols", |t, r| {
            let (m, k) = dims(r);
            let a = p(t, r, m, k);
            let y = t.var_cols(a).unwrap();
            (vec![a], weigh(t, r, y))
        }),
        ("normalize_rows", |t, r| {
            let (m, k) = dims(r);
            let a = p(t, r, m, k + 1);
            let y = t.normalize_rows(a).unwrap();
            (vec![a], weigh(t, r, y))
        }),
        ("batch_norm_train", |t, r| {
            let m = r.gen_range(3..7);
            let k = r.gen_range(1..4);
            let (a, g, b) = (p(t, r, m, k), p(t, r, 1, k), p(t, r, 1, k));
            let y = t.batch_norm(a, g, b, 1e-5, None).unwrap();
            (vec![a, g, b], weigh(t, r, y))
        }),
        ("batch_norm_eval", |t, r| {
            let (m, k) = dims(r);
            let (a, g, b) = (p(t, r, m, k), p(t, r, 1, k), p(t, r, 1, k));
            let stats = Arc::new((
                (0..k).map(|_| r.gen_range(-1.0..1.0)).collect(),
                (0..k).map(|_| r.gen_range(0.5..2.0)).collect(),
            ));
            let y = t.batch_norm(a, g, b, 1e-5, Some(stats)).unwrap();
            (vec![a, g, b], weigh(t, r, y))
        }),
        ("concat_cols", |t, r| {
            let (m, k) = dims(r);
            let (a, b) = (p(t, r, m, k), p(t, r, m, 2));
            let y = t.concat_cols(&[a, b]).unwrap();
            (vec![a, b], weigh(t, r, y))
        }),
        ("concat_rows", |t, r| {
            let (m, k) = dims(r);
            let (a, b) = (p(t, r, m, k), p(t, r, 2, k));
            let y = t.concat_rows(&[a, b]).unwrap();
            (vec![a, b], weigh(t, r, y))
        }),
        ("transpose", |t, r| {
            let (m, k) = dims(r);
            let a = p(t, r, m, k);
            let y = t.transpose(a).unwrap();
            (vec![a], weigh(t, r, y))
        }),
        ("cosine_similarity_matrix", |t, r| {
            let (m, k) = dims(r);
            let a = p(t, r, m, k + 1);
            let y = t.cosine_similarity_matrix(a).unwrap();
            (vec![a], weigh(t, r, y))
        }),
    ]
}

fn composites() -> Vec<(&'static str, Builder)> {
    vec![
        ("genhop_layer", |t, r| {
            let m = r.gen_range(4..7);
            let mut g = random_graph(r, m, 0.5);
            while g.edge_count() == 0 {
                g = random_graph(r, m, 0.5);
            }
            let cfg = ModelConfig {
                layers: 1,
                hops: 3,
                hidden_dim: 3,
                pe_dim: 2,
                use_positional: false,
                ..ModelConfig::default()
            };
            let params = init_params(&cfg, r.gen()).unwrap();
            let tables = GraphTables::prepare(&g, &cfg).unwrap();
            let batch = Batch::new(&[&tables], None).unwrap();
            let vars = bind_params(t, &params, true);
            let in_dim = params.layout.structural.as_ref().unwrap().layers[0].in_dim;
            let h = p(t, r, m, in_dim);
            // ε away from zero so its gradient is exercised too
            let eps = params.store.find("struct.layer0.eps").unwrap();
            t.set_value(vars[eps.0], Tensor::scalar(r.gen_range(-0.5..0.5))).unwrap();
            let mut enc = Encoder::new(&params, &vars, Mode::Train);
            let y = enc.genhop_layer(t, &batch, 0, h).unwrap();
            let mut inputs = vars.clone();
            inputs.push(h);
            (inputs, weigh(t, r, y))
        }),
        ("nt_xent", |t, r| {
            let n = r.gen_range(1..5);
            let d = r.gen_range(2..5);
            let (a, b) = (p(t, r, n, d), p(t, r, n, d));
            let tau = r.gen_range(0.1..1.0);
            let l = nt_xent(t, a, b, tau).unwrap();
            (vec![a, b], l)
        }),
        ("vicreg_cross_view", |t, r| {
            let m = r.gen_range(2..6);
            let d = r.gen_range(2..4);
            let (a, b) = (p(t, r, m, d), p(t, r, m, d));
            let v = vicreg(t, a, b, &VicregWeights::default()).unwrap();
            (vec![a, b], v.total)
        }),
        ("vicreg_per_view", |t, r| {
            let m = r.gen_range(2..6);
            let d = r.gen_range(2..4);
            let (a, b) = (p(t, r, m, d), p(t, r, m, d));
            let w = VicregWeights {
                form: VicregForm::PerView,
                ..VicregWeights::default()
            };
            let v = vicreg(t, a, b, &w).unwrap();
            (vec![a, b], v.total)
        }),
        ("total_loss", |t, r| {
            let n = r.gen_range(2..4);
            let (zi, zj) = (p(t, r, n, 3), p(t, r, n, 3));
            let mut inputs = vec![zi, zj];
            let mut pairs = Vec::new();
            for _ in 0..n {
                let m = r.gen_range(2..5);
                let (hi, hj) = (p(t, r, m, 2), p(t, r, m, 2));
                inputs.extend([hi, hj]);
                pairs.push((hi, hj));
            }
            let l = total_loss(t, zi, zj, &pairs, 0.5, 0.3, &VicregWeights::default()).unwrap();
            (inputs, l.total)
        }),
    ]
}

pub const GRAD_STEP: f64 = 1e-4;
pub const GRAD_TOLERANCE: f64 = 1e-4;

/// Runs every primitive and composite through the finite-difference check.
pub fn gradient_suite(instances: usize, seed: u64) -> Vec<GradCase> {
    let mut out = Vec::new();
    for (name, build) in primitives().into_iter().chain(composites()) {
        let mut case = GradCase {
            name,
            instances,
            max_rel_error: 0.0,
            checked: 0,
            excluded: 0,
        };
        for i in 0..instances {
            let tag = name.bytes().fold(0u64, |h, b| h.wrapping_mul(131).wrapping_add(b as u64));
            let mut r = rng(derive_seed(seed, &[tag, i as u64]));
            let mut tape = Tape::new();
            let (inputs, output) = build(&mut tape, &mut r);
            let rep = finite_difference_check(&mut tape, &inputs, output, GRAD_STEP)
                .unwrap_or_else(|e| panic!("{name} instance {i}: {e}"));
            case.max_rel_error = case.max_rel_error.max(rep.max_rel_error);
            case.checked += rep.checked;
            case.excluded += rep.excluded;
        }
        out.push(case);
    }
    out
}
