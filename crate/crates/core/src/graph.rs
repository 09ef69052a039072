//! Undirected simple graphs with a canonical edge index, plus exact walk
//! counting through adjacency powers.
//!
//! Edges are stored once as `(min, max)` pairs sorted lexicographically; the
//! position in that list is the edge id. Walk counts are exact `u128`
//! integers with overflow checking.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Graph {
    node_count: usize,
    edges: Vec<(usize, usize)>,
    adjacency: Vec<Vec<usize>>,
    node_features: Tensor,
    edge_features: Option<Tensor>,
    label: Option<usize>,
}

impl Graph {
    /// Builds a graph from an edge list. Reversed and repeated pairs collapse
    /// to one edge; when several copies of an edge carry raw features, the
    /// first occurrence wins. Missing node features default to an all-ones
    /// `m×1` column.
    pub fn from_edge_list(
        node_count: usize,
        pairs: &[(usize, usize)],
        node_features: Option<Tensor>,
        edge_features: Option<Tensor>,
    ) -> Result<Graph> {
        for &(u, v) in pairs {
            if u >= node_count || v >= node_count {
                return Err(Error::EndpointOutOfRange { u, v, node_count });
            }
            if u == v {
                return Err(Error::SelfLoop(u));
            }
        }
        if let Some(x) = &node_features {
            if x.rows() != node_count {
                return Err(Error::RowMismatch {
                    what: "node feature matrix",
                    got: x.rows(),
                    expected: node_count,
                });
            }
        }
        if let Some(ef) = &edge_features {
            if ef.rows() != pairs.len() {
                return Err(Error::RowMismatch {
                    what: "edge feature matrix",
                    got: ef.rows(),
                    expected: pairs.len(),
                });
            }
        }

        // (canonical pair, first input position)
        let mut keyed: Vec<((usize, usize), usize)> = pairs
            .iter()
            .enumerate()
            .map(|(i, &(u, v))| ((u.min(v), u.max(v)), i))
            .collect();
        keyed.sort();
        keyed.dedup_by_key(|(pair, _)| *pair);

        let edges: Vec<(usize, usize)> = keyed.iter().map(|(p, _)| *p).collect();
        let edge_features = edge_features.map(|ef| {
            let idx: Vec<usize> = keyed.iter().map(|(_, i)| *i).collect();
            ef.select_rows(&idx)
        });
        let node_features = node_features.unwrap_or_else(|| Tensor::ones(node_count, 1));
        Ok(Graph::assemble(node_count, edges, node_features, edge_features))
    }

    fn assemble(
        node_count: usize,
        edges: Vec<(usize, usize)>,
        node_features: Tensor,
        edge_features: Option<Tensor>,
    ) -> Graph {
        let mut adjacency = vec![Vec::new(); node_count];
        for &(u, v) in &edges {
            adjacency[u].push(v);
            adjacency[v].push(u);
        }
        for nb in &mut adjacency {
            nb.sort_unstable();
        }
        Graph {
            node_count,
            edges,
            adjacency,
            node_features,
            edge_features,
            label: None,
        }
    }

    pub fn with_label(mut self, label: Option<usize>) -> Graph {
        self.label = label;
        self
    }

    /// Replaces the node feature matrix.
    pub fn with_node_features(mut self, x: Tensor) -> Result<Graph> {
        if x.rows() != self.node_count {
            return Err(Error::RowMismatch {
                what: "node feature matrix",
                got: x.rows(),
                expected: self.node_count,
            });
        }
        self.node_features = x;
        Ok(self)
    }

    /// Replaces (or removes) the raw edge feature matrix.
    pub fn with_edge_features(mut self, ef: Option<Tensor>) -> Result<Graph> {
        if let Some(t) = &ef {
            if t.rows() != self.edges.len() {
                return Err(Error::RowMismatch {
                    what: "edge feature matrix",
                    got: t.rows(),
                    expected: self.edges.len(),
                });
            }
        }
        self.edge_features = ef;
        Ok(self)
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Canonical `(min, max)` edges in id order.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.adjacency.iter().map(Vec::len).collect()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        u < self.node_count && self.adjacency[u].binary_search(&v).is_ok()
    }

    pub fn edge_id(&self, u: usize, v: usize) -> Option<usize> {
        self.edges.binary_search(&(u.min(v), u.max(v))).ok()
    }

    pub fn node_features(&self) -> &Tensor {
        &self.node_features
    }

    pub fn edge_features(&self) -> Option<&Tensor> {
        self.edge_features.as_ref()
    }

    pub fn label(&self) -> Option<usize> {
        self.label
    }

    /// Relabels nodes so that node `v` becomes `perm[v]`. Feature rows and raw
    /// edge features move with their nodes and edges.
    pub fn permute(&self, perm: &[usize]) -> Result<Graph> {
        let m = self.node_count;
        if perm.len() != m {
            return Err(Error::NotBijection(m));
        }
        let mut inverse = vec![usize::MAX; m];
        for (v, &p) in perm.iter().enumerate() {
            if p >= m || inverse[p] != usize::MAX {
                return Err(Error::NotBijection(m));
            }
            inverse[p] = v;
        }
        let mut keyed: Vec<((usize, usize), usize)> = self
            .edges
            .iter()
            .enumerate()
            .map(|(i, &(u, v))| {
                let (a, b) = (perm[u], perm[v]);
                ((a.min(b), a.max(b)), i)
            })
            .collect();
        keyed.sort();
        let edges = keyed.iter().map(|(p, _)| *p).collect();
        let old_ids: Vec<usize> = keyed.iter().map(|(_, i)| *i).collect();
        let edge_features = self.edge_features.as_ref().map(|ef| ef.select_rows(&old_ids));
        let node_features = self.node_features.select_rows(&inverse);
        Ok(Graph::assemble(m, edges, node_features, edge_features).with_label(self.label))
    }

    /// Subgraph induced by `keep` (in the given order; node `keep[i]` becomes
    /// node `i`). Features follow their nodes and surviving edges.
    pub fn induced_subgraph(&self, keep: &[usize]) -> Result<Graph> {
        let mut new_id = vec![usize::MAX; self.node_count];
        for (i, &v) in keep.iter().enumerate() {
            if v >= self.node_count || new_id[v] != usize::MAX {
                return invalid(format!("induced_subgraph: bad or repeated node {v}"));
            }
            new_id[v] = i;
        }
        let mut keyed = Vec::new();
        for (id, &(u, v)) in self.edges.iter().enumerate() {
            let (a, b) = (new_id[u], new_id[v]);
            if a != usize::MAX && b != usize::MAX {
                keyed.push(((a.min(b), a.max(b)), id));
            }
        }
        keyed.sort();
        let edges = keyed.iter().map(|(p, _)| *p).collect();
        let ids: Vec<usize> = keyed.iter().map(|(_, i)| *i).collect();
        let edge_features = self.edge_features.as_ref().map(|ef| ef.select_rows(&ids));
        let node_features = self.node_features.select_rows(keep);
        Ok(Graph::assemble(keep.len(), edges, node_features, edge_features).with_label(self.label))
    }

    /// Keeps all nodes and the edges whose ids are listed in `keep_edges`.
    pub fn edge_subgraph(&self, keep_edges: &[usize]) -> Result<Graph> {
        let mut ids: Vec<usize> = keep_edges.to_vec();
        ids.sort_unstable();
        ids.dedup();
        if ids.last().is_some_and(|&i| i >= self.edges.len()) {
            return invalid("edge_subgraph: edge id out of range");
        }
        let edges = ids.iter().map(|&i| self.edges[i]).collect();
        let edge_features = self.edge_features.as_ref().map(|ef| ef.select_rows(&ids));
        Ok(
            Graph::assemble(self.node_count, edges, self.node_features.clone(), edge_features)
                .with_label(self.label),
        )
    }

    /// Disjoint union; node ids of later graphs are offset by the sizes of
    /// earlier ones. Node features must share a column count.
    pub fn disjoint_union(parts: &[&Graph]) -> Result<Graph> {
        let m: usize = parts.iter().map(|g| g.node_count).sum();
        let cols = parts.first().map_or(1, |g| g.node_features.cols());
        let mut pairs = Vec::new();
        let mut rows = Vec::with_capacity(m);
        let mut offset = 0;
        for g in parts {
            if g.node_features.cols() != cols {
                return invalid("disjoint_union: node feature widths differ");
            }
            pairs.extend(g.edges.iter().map(|&(u, v)| (u + offset, v + offset)));
            rows.extend((0..g.node_count).map(|v| g.node_features.row(v).to_vec()));
            offset += g.node_count;
        }
        let x = if m == 0 {
            Tensor::zeros(0, cols)
        } else {
            Tensor::from_rows(&rows)?
        };
        Graph::from_edge_list(m, &pairs, Some(x), None)
    }

    pub fn empty(m: usize) -> Graph {
        Graph::assemble(m, Vec::new(), Tensor::ones(m, 1), None)
    }

    pub fn path(m: usize) -> Graph {
        let pairs: Vec<_> = (1..m).map(|i| (i - 1, i)).collect();
        Graph::from_edge_list(m, &pairs, None, None).expect("valid path")
    }

    pub fn cycle(m: usize) -> Graph {
        assert!(m >= 3, "a cycle needs at least three nodes");
        let pairs: Vec<_> = (0..m).map(|i| (i, (i + 1) % m)).collect();
        Graph::from_edge_list(m, &pairs, None, None).expect("valid cycle")
    }

    pub fn complete(m: usize) -> Graph {
        let mut pairs = Vec::new();
        for u in 0..m {
            for v in u + 1..m {
                pairs.push((u, v));
            }
        }
        Graph::from_edge_list(m, &pairs, None, None).expect("valid complete graph")
    }

    /// `K_{1,leaves}` with the center at node 0.
    pub fn star(leaves: usize) -> Graph {
        let pairs: Vec<_> = (1..=leaves).map(|i| (0, i)).collect();
        Graph::from_edge_list(leaves + 1, &pairs, None, None).expect("valid star")
    }

    pub fn is_connected(&self) -> bool {
        if self.node_count == 0 {
            return true;
        }
        let mut seen = vec![false; self.node_count];
        let mut stack = vec![0];
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = stack.pop() {
            for &w in &self.adjacency[v] {
                if !seen[w] {
                    seen[w] = true;
                    count += 1;
                    stack.push(w);
                }
            }
        }
        count == self.node_count
    }
}

/// Dense square matrix of exact walk counts.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WalkMatrix {
    n: usize,
    data: Vec<u128>,
}

impl WalkMatrix {
    pub fn size(&self) -> usize {
        self.n
    }

    pub fn get(&self, r: usize, c: usize) -> u128 {
        self.data[r * self.n + c]
    }

    pub fn row(&self, r: usize) -> &[u128] {
        &self.data[r * self.n..(r + 1) * self.n]
    }

    fn identity(n: usize) -> WalkMatrix {
        let mut data = vec![0; n * n];
        for i in 0..n {
            data[i * n + i] = 1;
        }
        WalkMatrix { n, data }
    }

    /// `A · self`, using the sparse neighbor lists of `g`.
    fn left_multiply_adjacency(&self, g: &Graph, power: usize) -> Result<WalkMatrix> {
        let n = self.n;
        let mut data = vec![0u128; n * n];
        for v in 0..n {
            let out = &mut data[v * n..(v + 1) * n];
            for &u in g.neighbors(v) {
                for (o, &x) in out.iter_mut().zip(self.row(u)) {
                    *o = o.checked_add(x).ok_or(Error::Overflow { power })?;
                }
            }
        }
        Ok(WalkMatrix { n, data })
    }
}

/// `A^k` with exact integer entries, `k ≥ 1`.
pub fn adjacency_power(g: &Graph, k: usize) -> Result<WalkMatrix> {
    if k < 1 {
        return invalid("adjacency_power requires k >= 1");
    }
    let mut acc = WalkMatrix::identity(g.node_count());
    for p in 1..=k {
        acc = acc.left_multiply_adjacency(g, p)?;
    }
    Ok(acc)
}

/// Closed-walk counts `A^k_{vv}` for `k = 2..=max_hop`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WalkProfile {
    max_hop: usize,
    values: Vec<Vec<u128>>,
}

impl WalkProfile {
    pub fn max_hop(&self) -> usize {
        self.max_hop
    }

    /// Row for node `v`: entry `k - 2` holds `A^k_{vv}`.
    pub fn node(&self, v: usize) -> &[u128] {
        &self.values[v]
    }

    pub fn count(&self, v: usize, k: usize) -> u128 {
        self.values[v][k - 2]
    }

    pub fn node_count(&self) -> usize {
        self.values.len()
    }

    /// Rows sorted lexicographically, an isomorphism-invariant summary.
    pub fn sorted_rows(&self) -> Vec<Vec<u128>> {
        let mut rows = self.values.clone();
        rows.sort();
        rows
    }
}

/// How the denominator of the normalized k-hop coefficient is formed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HopNormalization {
    /// Sum of `A^k_{vu}` over the k-hop set `{u ≠ v : A^k_{vu} > 0}`; rows sum to one.
    #[default]
    KHop,
    /// Sum of `A^k_{vu}` over the 1-hop neighbors of `v` only.
    OneHop,
}

/// Compressed sparse rows.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SparseRows {
    pub n_rows: usize,
    pub n_cols: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
}

impl SparseRows {
    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.row_ptr[r], self.row_ptr[r + 1]);
        (&self.cols[a..b], &self.vals[a..b])
    }

    pub fn row_sum(&self, r: usize) -> f64 {
        self.row(r).1.iter().sum()
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn transpose(&self) -> SparseRows {
        let mut buckets: Vec<Vec<(usize, f64)>> = vec![Vec::new(); self.n_cols];
        for r in 0..self.n_rows {
            let (c, v) = self.row(r);
            for (&c, &v) in c.iter().zip(v) {
                buckets[c].push((r, v));
            }
        }
        SparseRows::from_rows(self.n_cols, self.n_rows, buckets)
    }

    pub fn from_rows(n_rows: usize, n_cols: usize, rows: Vec<Vec<(usize, f64)>>) -> SparseRows {
        let mut row_ptr = Vec::with_capacity(n_rows + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for r in rows {
            for (c, v) in r {
                cols.push(c);
                vals.push(v);
            }
            row_ptr.push(cols.len());
        }
        SparseRows {
            n_rows,
            n_cols,
            row_ptr,
            cols,
            vals,
        }
    }

    /// Entrywise sum of equally shaped sparse matrices (rows merged by column).
    pub fn sum(parts: &[&SparseRows]) -> Option<SparseRows> {
        let first = parts.first()?;
        let (n_rows, n_cols) = (first.n_rows, first.n_cols);
        let mut rows = Vec::with_capacity(n_rows);
        for r in 0..n_rows {
            let mut acc: Vec<(usize, f64)> = Vec::new();
            for p in parts {
                let (c, v) = p.row(r);
                acc.extend(c.iter().copied().zip(v.iter().copied()));
            }
            acc.sort_by_key(|e| e.0);
            let mut merged: Vec<(usize, f64)> = Vec::with_capacity(acc.len());
            for (c, v) in acc {
                match merged.last_mut() {
                    Some(last) if last.0 == c => last.1 += v,
                    _ => merged.push((c, v)),
                }
            }
            rows.push(merged);
        }
        Some(SparseRows::from_rows(n_rows, n_cols, rows))
    }
}

/// Row-normalized k-hop coefficients `Ã^k` for `k = 2..=max_hop`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KHopWeights {
    max_hop: usize,
    hops: Vec<SparseRows>,
}

impl KHopWeights {
    pub fn max_hop(&self) -> usize {
        self.max_hop
    }

    pub fn hop(&self, k: usize) -> &SparseRows {
        &self.hops[k - 2]
    }

    pub fn hops(&self) -> &[SparseRows] {
        &self.hops
    }

    /// Members of `N^k(v)`, excluding `v`.
    pub fn neighborhood(&self, v: usize, k: usize) -> &[usize] {
        self.hop(k).row(v).0
    }

    pub fn weight(&self, v: usize, u: usize, k: usize) -> f64 {
        let (c, w) = self.hop(k).row(v);
        c.binary_search(&u).map_or(0.0, |i| w[i])
    }
}

/// Closed-walk profile and normalized k-hop weights from one pass over the
/// powers `A^2..A^K`.
pub fn walk_features(
    g: &Graph,
    max_hop: usize,
    norm: HopNormalization,
) -> Result<(WalkProfile, KHopWeights)> {
    if max_hop < 2 {
        return invalid("maximum hop must be at least 2");
    }
    let m = g.node_count();
    let mut power = adjacency_power(g, 1)?;
    let mut values = vec![Vec::with_capacity(max_hop - 1); m];
    let mut hops = Vec::with_capacity(max_hop - 1);
    for k in 2..=max_hop {
        power = power.left_multiply_adjacency(g, k)?;
        let mut rows = Vec::with_capacity(m);
        for v in 0..m {
            values[v].push(power.get(v, v));
            let row = power.row(v);
            let denom: u128 = match norm {
                HopNormalization::KHop => row
                    .iter()
                    .enumerate()
                    .filter(|&(u, _)| u != v)
                    .map(|(_, &c)| c)
                    .sum(),
                HopNormalization::OneHop => g.neighbors(v).iter().map(|&u| row[u]).sum(),
            };
            let mut entries = Vec::new();
            if denom > 0 {
                let d = denom as f64;
                for (u, &c) in row.iter().enumerate() {
                    if u != v && c > 0 {
                        entries.push((u, c as f64 / d));
                    }
                }
            }
            rows.push(entries);
        }
        hops.push(SparseRows::from_rows(m, m, rows));
    }
    Ok((
        WalkProfile { max_hop, values },
        KHopWeights { max_hop, hops },
    ))
}

pub fn closed_walk_profile(g: &Graph, max_hop: usize) -> Result<WalkProfile> {
    walk_features(g, max_hop, HopNormalization::KHop).map(|(p, _)| p)
}

pub fn normalized_khop_weights(
    g: &Graph,
    max_hop: usize,
    norm: HopNormalization,
) -> Result<KHopWeights> {
    walk_features(g, max_hop, norm).map(|(_, w)| w)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k3() -> Graph {
        Graph::from_edge_list(3, &[(0, 1), (1, 2), (2, 0)], None, None).unwrap()
    }

    /// Counts walks of length `k` from `s` to `t` by exhaustive DFS.
    fn brute_walks(g: &Graph, s: usize, t: usize, k: usize) -> u128 {
        if k == 0 {
            return u128::from(s == t);
        }
        g.neighbors(s).iter().map(|&u| brute_walks(g, u, t, k - 1)).sum()
    }

    #[test]
    fn construction_and_errors() {
        let g = k3();
        assert_eq!(g.edge_count(), 3);
        assert_eq!(g.edges(), &[(0, 1), (0, 2), (1, 2)]);
        let single = Graph::from_edge_list(2, &[(0, 1), (1, 0)], None, None).unwrap();
        assert_eq!(single.edge_count(), 1);
        assert!(matches!(
            Graph::from_edge_list(3, &[(0, 0)], None, None),
            Err(Error::SelfLoop(0))
        ));
        assert!(matches!(
            Graph::from_edge_list(3, &[(0, 3)], None, None),
            Err(Error::EndpointOutOfRange { .. })
        ));
        assert!(matches!(
            Graph::from_edge_list(3, &[(0, 1)], Some(Tensor::ones(2, 1)), None),
            Err(Error::RowMismatch { .. })
        ));
        assert_eq!(g.node_features(), &Tensor::ones(3, 1));
    }

    #[test]
    fn edge_features_follow_dedup() {
        let ef = Tensor::from_rows(&[vec![5.0], vec![7.0], vec![9.0]]).unwrap();
        let g = Graph::from_edge_list(3, &[(2, 1), (0, 1), (1, 2)], None, Some(ef)).unwrap();
        assert_eq!(g.edges(), &[(0, 1), (1, 2)]);
        assert_eq!(g.edge_features().unwrap().data(), &[7.0, 5.0]);
    }

    #[test]
    fn powers_small_cases() {
        let p2 = Graph::path(2);
        let a2 = adjacency_power(&p2, 2).unwrap();
        assert_eq!((a2.get(0, 0), a2.get(0, 1), a2.get(1, 1)), (1, 0, 1));

        let a = adjacency_power(&k3(), 2).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(a.get(i, j), if i == j { 2 } else { 1 });
            }
        }

        let c6 = adjacency_power(&Graph::cycle(6), 3).unwrap();
        assert!((0..6).all(|v| c6.get(v, v) == 0));
        assert!(adjacency_power(&k3(), 0).is_err());
    }

    #[test]
    fn powers_match_dfs() {
        let g = Graph::from_edge_list(5, &[(0, 1), (1, 2), (2, 0), (2, 3), (3, 4)], None, None)
            .unwrap();
        for k in 1..=5 {
            let a = adjacency_power(&g, k).unwrap();
            for s in 0..5 {
                for t in 0..5 {
                    assert_eq!(a.get(s, t), brute_walks(&g, s, t, k));
                }
            }
        }
    }

    #[test]
    fn closed_walk_examples() {
        let p = closed_walk_profile(&k3(), 3).unwrap();
        assert_eq!(p.node(0), &[2, 2]);
        let c6 = closed_walk_profile(&Graph::cycle(6), 4).unwrap();
        assert_eq!(c6.node(3), &[2, 0, 6]);
        let iso = closed_walk_profile(&Graph::empty(1), 5).unwrap();
        assert_eq!(iso.node(0), &[0, 0, 0, 0]);
        assert!(closed_walk_profile(&k3(), 1).is_err());
    }

    #[test]
    fn khop_weights_examples() {
        let w = normalized_khop_weights(&k3(), 2, HopNormalization::KHop).unwrap();
        for v in 0..3 {
            assert_eq!(w.neighborhood(v, 2).len(), 2);
            for &u in w.neighborhood(v, 2) {
                assert!((w.weight(v, u, 2) - 0.5).abs() < 1e-15);
            }
        }

        let iso = normalized_khop_weights(&Graph::empty(2), 3, HopNormalization::KHop).unwrap();
        assert_eq!(iso.hop(2).nnz(), 0);

        // Star K1,3: A^2 has leaf-leaf entries 1 and no centre-leaf entries.
        let star = Graph::star(3);
        let w = normalized_khop_weights(&star, 2, HopNormalization::KHop).unwrap();
        assert!(w.neighborhood(0, 2).is_empty());
        for leaf in 1..=3 {
            assert_eq!(w.neighborhood(leaf, 2).len(), 2);
            assert!((w.hop(2).row_sum(leaf) - 1.0).abs() < 1e-12);
        }
        let dense = adjacency_power(&star, 2).unwrap();
        for v in 0..4 {
            let denom: u128 = (0..4).filter(|&u| u != v).map(|u| dense.get(v, u)).sum();
            for u in 0..4 {
                let expect = if u == v || denom == 0 {
                    0.0
                } else {
                    dense.get(v, u) as f64 / denom as f64
                };
                assert!((w.weight(v, u, 2) - expect).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn one_hop_normalization_switch() {
        // On P3 at k=2 the endpoints reach each other but not their 1-hop
        // neighbor, so the one-hop denominator is zero.
        let w = normalized_khop_weights(&Graph::path(3), 2, HopNormalization::OneHop).unwrap();
        assert_eq!(w.hop(2).row(0).0.len(), 0);
        let k = normalized_khop_weights(&Graph::path(3), 2, HopNormalization::KHop).unwrap();
        assert_eq!(k.weight(0, 2, 2), 1.0);
        // On K3 (k=2) the two readings agree.
        let a = normalized_khop_weights(&k3(), 2, HopNormalization::OneHop).unwrap();
        assert_eq!(a.hop(2).vals, vec![0.5; 6]);
    }

    #[test]
    fn permutation_cases() {
        let g = k3();
        assert_eq!(g.permute(&[0, 1, 2]).unwrap(), g);
        assert_eq!(g.permute(&[2, 0, 1]).unwrap().edges(), g.edges());
        let p3 = Graph::path(3);
        let swapped = p3.permute(&[2, 1, 0]).unwrap();
        assert_eq!(swapped.degrees(), p3.degrees());
        assert!(matches!(g.permute(&[0, 0, 1]), Err(Error::NotBijection(3))));
        assert!(g.permute(&[0, 1]).is_err());
    }

    #[test]
    fn permute_moves_features() {
        let x = Tensor::from_rows(&[vec![1.0], vec![2.0], vec![3.0]]).unwrap();
        let ef = Tensor::from_rows(&[vec![10.0], vec![20.0]]).unwrap();
        let g = Graph::from_edge_list(3, &[(0, 1), (1, 2)], Some(x), Some(ef)).unwrap();
        let h = g.permute(&[2, 0, 1]).unwrap();
        // old node 0 is now node 2
        assert_eq!(h.node_features().get(2, 0), 1.0);
        // old edge (0,1) -> (2,0) = (0,2)
        let id = h.edge_id(0, 2).unwrap();
        assert_eq!(h.edge_features().unwrap().get(id, 0), 10.0);
    }

    #[test]
    fn subgraphs() {
        let g = Graph::cycle(5);
        let h = g.induced_subgraph(&[4, 0, 1]).unwrap();
        assert_eq!(h.edges(), &[(0, 1), (1, 2)]);
        let e = g.edge_subgraph(&[]).unwrap();
        assert_eq!((e.node_count(), e.edge_count()), (5, 0));
        let u = Graph::disjoint_union(&[&k3(), &k3()]).unwrap();
        assert_eq!((u.node_count(), u.edge_count()), (6, 6));
        assert!(!u.is_connected());
    }
}
