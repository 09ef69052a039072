//! Exact isomorphism testing by backtracking, and exhaustive enumeration of
//! small graphs up to isomorphism. Intended for desk-scale oracles.

use std::collections::HashMap;

use crate::graph::Graph;
use crate::wl::{wl_refine_joint, WlOptions};

struct Dense {
    n: usize,
    adj: Vec<bool>,
}

impl Dense {
    fn new(g: &Graph) -> Dense {
        let n = g.node_count();
        let mut adj = vec![false; n * n];
        for &(u, v) in g.edges() {
            adj[u * n + v] = true;
            adj[v * n + u] = true;
        }
        Dense { n, adj }
    }

    fn has(&self, u: usize, v: usize) -> bool {
        self.adj[u * self.n + v]
    }
}

/// Structure-only isomorphism test (features are ignored).
pub fn are_isomorphic(g1: &Graph, g2: &Graph) -> bool {
    find_isomorphism(g1, g2).is_some()
}

/// Returns `f` with `g1` edge `(u, v)` ⇔ `g2` edge `(f[u], f[v])`.
pub fn find_isomorphism(g1: &Graph, g2: &Graph) -> Option<Vec<usize>> {
    let n = g1.node_count();
    if n != g2.node_count() || g1.edge_count() != g2.edge_count() {
        return None;
    }
    let mut d1 = g1.degrees();
    let mut d2 = g2.degrees();
    d1.sort_unstable();
    d2.sort_unstable();
    if d1 != d2 {
        return None;
    }
    let colors = wl_refine_joint(&[g1, g2], WlOptions::default());
    if colors[0].histogram != colors[1].histogram {
        return None;
    }
    let (c1, c2) = (&colors[0].colors, &colors[1].colors);

    // Visit g1 in BFS order, starting each component from its rarest color,
    // so most vertices have an already-mapped neighbor.
    let mut order = Vec::with_capacity(n);
    let mut parent = vec![usize::MAX; n];
    let mut seen = vec![false; n];
    let freq = &colors[0].histogram;
    let mut starts: Vec<usize> = (0..n).collect();
    starts.sort_by_key(|&v| (freq[&c1[v]], v));
    for s in starts {
        if seen[s] {
            continue;
        }
        seen[s] = true;
        let mut head = order.len();
        order.push(s);
        while head < order.len() {
            let v = order[head];
            head += 1;
            for &w in g1.neighbors(v) {
                if !seen[w] {
                    seen[w] = true;
                    parent[w] = v;
                    order.push(w);
                }
            }
        }
    }

    let a = Dense::new(g1);
    let b = Dense::new(g2);
    let mut map = vec![usize::MAX; n];
    let mut used = vec![false; n];
    let ctx = Search {
        a: &a,
        b: &b,
        g2,
        c1,
        c2,
        order: &order,
        parent: &parent,
    };
    if ctx.assign(0, &mut map, &mut used) {
        Some(map)
    } else {
        None
    }
}

struct Search<'a> {
    a: &'a Dense,
    b: &'a Dense,
    g2: &'a Graph,
    c1: &'a [usize],
    c2: &'a [usize],
    order: &'a [usize],
    parent: &'a [usize],
}

impl Search<'_> {
    fn assign(&self, depth: usize, map: &mut [usize], used: &mut [bool]) -> bool {
        if depth == self.order.len() {
            return true;
        }
        let x = self.order[depth];
        let candidates: Vec<usize> = match self.parent[x] {
            usize::MAX => (0..self.b.n).collect(),
            p => self.g2.neighbors(map[p]).to_vec(),
        };
        for y in candidates {
            if used[y] || self.c1[x] != self.c2[y] {
                continue;
            }
            let consistent = self.order[..depth]
                .iter()
                .all(|&z| self.a.has(x, z) == self.b.has(y, map[z]));
            if !consistent {
                continue;
            }
            map[x] = y;
            used[y] = true;
            if self.assign(depth + 1, map, used) {
                return true;
            }
            used[y] = false;
            map[x] = usize::MAX;
        }
        false
    }
}

/// Isomorphism-invariant bucket key: per node (degree, sorted neighbor
/// degrees, triangles), sorted.
fn invariant_key(g: &Graph) -> Vec<(usize, Vec<usize>, usize)> {
    let mut key: Vec<_> = (0..g.node_count())
        .map(|v| {
            let nb = g.neighbors(v);
            let mut nd: Vec<usize> = nb.iter().map(|&u| g.degree(u)).collect();
            nd.sort_unstable();
            let mut tri = 0;
            for (i, &a) in nb.iter().enumerate() {
                for &b in &nb[i + 1..] {
                    if g.has_edge(a, b) {
                        tri += 1;
                    }
                }
            }
            (g.degree(v), nd, tri)
        })
        .collect();
    key.sort();
    key
}

/// Collects graphs up to isomorphism.
#[derive(Default)]
pub struct IsoClasses {
    reps: Vec<Graph>,
    buckets: HashMap<Vec<(usize, Vec<usize>, usize)>, Vec<usize>>,
}

impl IsoClasses {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `g` unless an isomorphic graph is already present; returns the
    /// class index.
    pub fn insert(&mut self, g: Graph) -> usize {
        let key = invariant_key(&g);
        let bucket = self.buckets.entry(key).or_default();
        for &i in bucket.iter() {
            if are_isomorphic(&self.reps[i], &g) {
                return i;
            }
        }
        bucket.push(self.reps.len());
        self.reps.push(g);
        self.reps.len() - 1
    }

    pub fn len(&self) -> usize {
        self.reps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reps.is_empty()
    }

    pub fn into_graphs(self) -> Vec<Graph> {
        self.reps
    }
}

/// All graphs on exactly `n` nodes up to isomorphism (connected ones only
/// when `connected_only`). Built by adding a vertex to every graph on `n - 1`
/// nodes in every possible way; feasible up to `n = 8`.
pub fn enumerate_graphs(n: usize, connected_only: bool) -> Vec<Graph> {
    if n == 0 {
        return vec![Graph::empty(0)];
    }
    let mut level = vec![Graph::empty(1)];
    for size in 2..=n {
        let mut classes = IsoClasses::new();
        let prev = size - 1;
        for g in &level {
            // connected graphs always have a non-cut vertex, so extending
            // connected graphs by a non-isolated vertex reaches them all
            let first = usize::from(connected_only);
            for mask in first..(1usize << prev) {
                let mut pairs: Vec<(usize, usize)> = g.edges().to_vec();
                pairs.extend((0..prev).filter(|i| mask >> i & 1 == 1).map(|i| (i, prev)));
                let h = Graph::from_edge_list(size, &pairs, None, None)
                    .expect("valid augmentation");
                classes.insert(h);
            }
        }
        level = classes.into_graphs();
    }
    level
}

/// All graphs with `1..=max_n` nodes up to isomorphism.
pub fn enumerate_graphs_up_to(max_n: usize, connected_only: bool) -> Vec<Graph> {
    (1..=max_n)
        .flat_map(|n| enumerate_graphs(n, connected_only))
        .collect()
}
