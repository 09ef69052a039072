//! Edge centralities: betweenness (Brandes), closeness, clustering coefficient.
//!
//! All three are aligned with the graph's canonical edge index and computed on
//! the unweighted graph.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::graph::Graph;
use crate::tensor::Tensor;

/// Variance below which a channel is left unstandardized.
pub const STANDARDIZE_MIN_VARIANCE: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeCentralityTable {
    pub eb: Vec<f64>,
    pub ec: Vec<f64>,
    pub ecc: Vec<f64>,
}

impl EdgeCentralityTable {
    pub fn len(&self) -> usize {
        self.eb.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eb.is_empty()
    }

    /// `e×3` matrix with columns (EB, EC, ECC).
    pub fn to_tensor(&self) -> Tensor {
        let mut data = Vec::with_capacity(self.len() * 3);
        for i in 0..self.len() {
            data.extend_from_slice(&[self.eb[i], self.ec[i], self.ecc[i]]);
        }
        Tensor::new(self.len(), 3, data).expect("three columns per edge")
    }
}

/// Shortest-path edge betweenness summed over unordered node pairs.
/// Unreachable pairs contribute nothing.
pub fn edge_betweenness(g: &Graph) -> Vec<f64> {
    let m = g.node_count();
    let mut eb = vec![0.0; g.edge_count()];
    let mut dist = vec![usize::MAX; m];
    let mut sigma = vec![0.0f64; m];
    let mut delta = vec![0.0f64; m];
    let mut order = Vec::with_capacity(m);
    let mut queue = VecDeque::with_capacity(m);

    for s in 0..m {
        dist.fill(usize::MAX);
        sigma.fill(0.0);
        delta.fill(0.0);
        order.clear();
        dist[s] = 0;
        sigma[s] = 1.0;
        queue.push_back(s);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            for &w in g.neighbors(v) {
                if dist[w] == usize::MAX {
                    dist[w] = dist[v] + 1;
                    queue.push_back(w);
                }
                if dist[w] == dist[v] + 1 {
                    sigma[w] += sigma[v];
                }
            }
        }
        for &w in order.iter().rev() {
            for &v in g.neighbors(w) {
                // predecessors of w on shortest paths from s
                if dist[v] != usize::MAX && dist[v] + 1 == dist[w] {
                    let c = sigma[v] / sigma[w] * (1.0 + delta[w]);
                    let id = g.edge_id(v, w).expect("neighbors share an edge");
                    eb[id] += c;
                    delta[v] += c;
                }
            }
        }
    }
    // every unordered pair was counted from both ends
    for x in &mut eb {
        *x /= 2.0;
    }
    eb
}

/// BFS distances from `s`; `usize::MAX` marks unreachable nodes.
pub fn bfs_distances(g: &Graph, s: usize) -> Vec<usize> {
    let mut dist = vec![usize::MAX; g.node_count()];
    let mut queue = VecDeque::new();
    dist[s] = 0;
    queue.push_back(s);
    while let Some(v) = queue.pop_front() {
        for &w in g.neighbors(v) {
            if dist[w] == usize::MAX {
                dist[w] = dist[v] + 1;
                queue.push_back(w);
            }
        }
    }
    dist
}

/// Node closeness over the reachable set: `(reachable - 1) / Σ d`, zero for
/// isolated nodes.
pub fn node_closeness(g: &Graph) -> Vec<f64> {
    (0..g.node_count())
        .map(|v| {
            let dist = bfs_distances(g, v);
            let (count, total) = dist
                .iter()
                .filter(|&&d| d != usize::MAX && d > 0)
                .fold((0usize, 0usize), |(c, t), &d| (c + 1, t + d));
            if total == 0 {
                0.0
            } else {
                count as f64 / total as f64
            }
        })
        .collect()
}

/// Edge closeness: mean of the endpoints' node closeness.
pub fn edge_closeness(g: &Graph) -> Vec<f64> {
    let c = node_closeness(g);
    g.edges().iter().map(|&(u, v)| 0.5 * (c[u] + c[v])).collect()
}

/// Triangles through the edge over `min(deg u, deg v) - 1`, zero when that
/// denominator is not positive.
pub fn edge_clustering_coefficient(g: &Graph) -> Vec<f64> {
    g.edges()
        .iter()
        .map(|&(u, v)| {
            let denom = g.degree(u).min(g.degree(v)) as i64 - 1;
            if denom <= 0 {
                return 0.0;
            }
            let z = count_common(g.neighbors(u), g.neighbors(v));
            z as f64 / denom as f64
        })
        .collect()
}

fn count_common(a: &[usize], b: &[usize]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

/// Raw EB/EC/ECC for every edge.
pub fn raw_edge_centrality(g: &Graph) -> EdgeCentralityTable {
    EdgeCentralityTable {
        eb: edge_betweenness(g),
        ec: edge_closeness(g),
        ecc: edge_clustering_coefficient(g),
    }
}

/// Centrality table with each channel standardized per graph (zero mean, unit
/// variance) when its variance exceeds [`STANDARDIZE_MIN_VARIANCE`].
pub fn edge_feature_table(g: &Graph) -> EdgeCentralityTable {
    let mut t = raw_edge_centrality(g);
    standardize(&mut t.eb);
    standardize(&mut t.ec);
    standardize(&mut t.ecc);
    t
}

fn standardize(xs: &mut [f64]) {
    if xs.is_empty() {
        return;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    if var > STANDARDIZE_MIN_VARIANCE {
        let sd = var.sqrt();
        for x in xs {
            *x = (*x - mean) / sd;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64]) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12)
    }

    #[test]
    fn betweenness_examples() {
        assert!(close(&edge_betweenness(&Graph::path(3)), &[2.0, 2.0]));
        assert!(close(&edge_betweenness(&Graph::complete(3)), &[1.0; 3]));
        assert!(close(&edge_betweenness(&Graph::star(3)), &[3.0; 3]));
        // P4: end edges 3, middle edge 4
        assert!(close(&edge_betweenness(&Graph::path(4)), &[3.0, 4.0, 3.0]));
    }

    #[test]
    fn betweenness_disconnected() {
        let g = Graph::disjoint_union(&[&Graph::path(2), &Graph::path(3)]).unwrap();
        assert!(close(&edge_betweenness(&g), &[1.0, 2.0, 2.0]));
    }

    #[test]
    fn closeness_examples() {
        assert!(close(&edge_closeness(&Graph::complete(3)), &[1.0; 3]));
        let p3 = edge_closeness(&Graph::path(3));
        assert!((p3[0] - 5.0 / 6.0).abs() < 1e-12);
        assert!(close(&edge_closeness(&Graph::path(2)), &[1.0]));
        assert_eq!(node_closeness(&Graph::empty(2)), vec![0.0, 0.0]);
    }

    #[test]
    fn clustering_examples() {
        assert!(close(&edge_clustering_coefficient(&Graph::complete(3)), &[1.0; 3]));
        assert!(close(&edge_clustering_coefficient(&Graph::path(3)), &[0.0; 2]));
        assert!(close(&edge_clustering_coefficient(&Graph::complete(4)), &[1.0; 6]));
        assert!(edge_clustering_coefficient(&Graph::cycle(6)).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn table_standardization() {
        let t = edge_feature_table(&Graph::complete(3));
        assert!(close(&t.eb, &[1.0; 3]));
        assert!(close(&t.ec, &[1.0; 3]));
        assert!(close(&t.ecc, &[1.0; 3]));

        let p4 = edge_feature_table(&Graph::path(4));
        assert!(p4.eb[1] > p4.eb[0]);
        assert!((p4.eb.iter().sum::<f64>()).abs() < 1e-12);
        let var: f64 = p4.eb.iter().map(|x| x * x).sum::<f64>() / 3.0;
        assert!((var - 1.0).abs() < 1e-12);
        assert_eq!(p4.to_tensor().shape(), [3, 3]);
    }
}
