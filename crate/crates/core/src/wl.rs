//! 1-WL color refinement, simple-cycle profiles and the cycle / closed-walk
//! profile relation search.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::graph::{closed_walk_profile, Graph};

/// Largest cycle length accepted by [`cycle_profile`].
pub const MAX_CYCLE_LENGTH: usize = 8;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WlColoring {
    pub colors: Vec<usize>,
    pub rounds_to_stable: usize,
    pub histogram: BTreeMap<usize, usize>,
}

impl WlColoring {
    pub fn class_count(&self) -> usize {
        self.histogram.len()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WlOptions {
    pub max_rounds: usize,
    /// Seed the initial colors with (discretized) node features as well as degree.
    pub use_node_features: bool,
}

impl Default for WlOptions {
    fn default() -> Self {
        WlOptions {
            max_rounds: 64,
            use_node_features: false,
        }
    }
}

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
enum Signature {
    Initial(usize, Vec<i64>),
    Round(usize, Vec<usize>),
}

/// Assigns dense ids to signatures in sorted order, so the resulting colors do
/// not depend on node numbering.
fn recode(sigs: Vec<Vec<Signature>>) -> Vec<Vec<usize>> {
    let mut distinct: Vec<&Signature> = sigs.iter().flatten().collect();
    distinct.sort();
    distinct.dedup();
    let dict: HashMap<&Signature, usize> =
        distinct.into_iter().enumerate().map(|(i, s)| (s, i)).collect();
    sigs.iter()
        .map(|row| row.iter().map(|s| dict[s]).collect())
        .collect()
}

fn histogram(colors: &[usize]) -> BTreeMap<usize, usize> {
    let mut h = BTreeMap::new();
    for &c in colors {
        *h.entry(c).or_insert(0) += 1;
    }
    h
}

fn class_count(colors: &[Vec<usize>]) -> usize {
    let mut all: Vec<usize> = colors.iter().flatten().copied().collect();
    all.sort_unstable();
    all.dedup();
    all.len()
}

/// Refines several graphs in lock-step with one shared color dictionary, so
/// colors are comparable across them.
pub fn wl_refine_joint(graphs: &[&Graph], opts: WlOptions) -> Vec<WlColoring> {
    let initial = graphs
        .iter()
        .map(|g| {
            (0..g.node_count())
                .map(|v| {
                    let feats = if opts.use_node_features {
                        g.node_features()
                            .row(v)
                            .iter()
                            .map(|x| (x * 1e6).round() as i64)
                            .collect()
                    } else {
                        Vec::new()
                    };
                    Signature::Initial(g.degree(v), feats)
                })
                .collect()
        })
        .collect();
    let mut colors = recode(initial);
    let mut classes = class_count(&colors);
    let mut rounds = 0;
    while rounds < opts.max_rounds.max(1) {
        rounds += 1;
        let sigs = graphs
            .iter()
            .zip(&colors)
            .map(|(g, col)| {
                (0..g.node_count())
                    .map(|v| {
                        let mut nb: Vec<usize> = g.neighbors(v).iter().map(|&u| col[u]).collect();
                        nb.sort_unstable();
                        Signature::Round(col[v], nb)
                    })
                    .collect()
            })
            .collect();
        let next = recode(sigs);
        let next_classes = class_count(&next);
        colors = next;
        if next_classes == classes {
            break;
        }
        classes = next_classes;
    }
    colors
        .into_iter()
        .map(|c| WlColoring {
            histogram: histogram(&c),
            colors: c,
            rounds_to_stable: rounds,
        })
        .collect()
}

pub fn wl_refine(g: &Graph, max_rounds: usize) -> WlColoring {
    wl_refine_joint(
        &[g],
        WlOptions {
            max_rounds,
            use_node_features: false,
        },
    )
    .pop()
    .expect("one coloring per graph")
}

/// True when 1-WL tells the graphs apart (stable histograms differ).
pub fn wl_distinguish(g1: &Graph, g2: &Graph, max_rounds: usize) -> bool {
    wl_distinguish_with(g1, g2, WlOptions {
        max_rounds,
        use_node_features: false,
    })
}

pub fn wl_distinguish_with(g1: &Graph, g2: &Graph, opts: WlOptions) -> bool {
    if g1.node_count() != g2.node_count() {
        return true;
    }
    let c = wl_refine_joint(&[g1, g2], opts);
    c[0].histogram != c[1].histogram
}

/// Simple cycles of each length `k = 2..=K` through each node.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CycleProfile {
    max_len: usize,
    values: Vec<Vec<u64>>,
}

impl CycleProfile {
    pub fn max_len(&self) -> usize {
        self.max_len
    }

    /// Row for node `v`: entry `k - 2` counts simple `k`-cycles through `v`.
    pub fn node(&self, v: usize) -> &[u64] {
        &self.values[v]
    }

    pub fn count(&self, v: usize, k: usize) -> u64 {
        self.values[v][k - 2]
    }
}

/// Counts simple cycles through each node by DFS from each cycle's smallest
/// vertex. Exponential; limited to `K ≤ 8`.
pub fn cycle_profile(g: &Graph, max_len: usize) -> Result<CycleProfile> {
    if !(2..=MAX_CYCLE_LENGTH).contains(&max_len) {
        return invalid(format!(
            "cycle length bound must lie in 2..={MAX_CYCLE_LENGTH}, got {max_len}"
        ));
    }
    let m = g.node_count();
    // doubled counts: each cycle is found once per direction
    let mut twice = vec![vec![0u64; max_len - 1]; m];
    let mut on_path = vec![false; m];
    let mut path = Vec::with_capacity(max_len);
    for s in 0..m {
        path.clear();
        path.push(s);
        on_path[s] = true;
        extend(g, s, max_len, &mut path, &mut on_path, &mut twice);
        on_path[s] = false;
    }
    let values = twice
        .into_iter()
        .map(|row| row.into_iter().map(|x| x / 2).collect())
        .collect();
    Ok(CycleProfile { max_len, values })
}

fn extend(
    g: &Graph,
    s: usize,
    max_len: usize,
    path: &mut Vec<usize>,
    on_path: &mut [bool],
    twice: &mut [Vec<u64>],
) {
    let last = *path.last().expect("path starts at s");
    for &w in g.neighbors(last) {
        if w == s && path.len() >= 3 {
            let len = path.len();
            for &v in path.iter() {
                twice[v][len - 2] += 1;
            }
        } else if w > s && !on_path[w] && path.len() < max_len {
            on_path[w] = true;
            path.push(w);
            extend(g, s, max_len, path, on_path, twice);
            path.pop();
            on_path[w] = false;
        }
    }
}

/// A node in a corpus: `(graph index, node index)`.
pub type NodeRef = (usize, usize);

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationCounts {
    pub cycle_eq_walk_eq: u64,
    pub cycle_eq_walk_ne: u64,
    pub cycle_ne_walk_eq: u64,
    pub cycle_ne_walk_ne: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileRelationReport {
    pub max_len: usize,
    pub node_total: usize,
    pub counts: RelationCounts,
    /// Pairs with equal cycle profiles but different closed-walk profiles.
    pub equal_cycle_unequal_walk: Vec<(NodeRef, NodeRef)>,
    /// Pairs with equal closed-walk profiles but different cycle profiles.
    pub equal_walk_unequal_cycle: Vec<(NodeRef, NodeRef)>,
    /// True when a witness list was cut short at the cap.
    pub truncated: bool,
}

impl ProfileRelationReport {
    /// Relation table followed by one line per witness pair.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("cycle_equal,walk_equal,pairs\n");
        let c = &self.counts;
        let _ = writeln!(s, "true,true,{}", c.cycle_eq_walk_eq);
        let _ = writeln!(s, "true,false,{}", c.cycle_eq_walk_ne);
        let _ = writeln!(s, "false,true,{}", c.cycle_ne_walk_eq);
        let _ = writeln!(s, "false,false,{}", c.cycle_ne_walk_ne);
        s.push_str("\nkind,graph_a,node_a,graph_b,node_b\n");
        for ((ga, va), (gb, vb)) in &self.equal_cycle_unequal_walk {
            let _ = writeln!(s, "equal_cycle_unequal_walk,{ga},{va},{gb},{vb}");
        }
        for ((ga, va), (gb, vb)) in &self.equal_walk_unequal_cycle {
            let _ = writeln!(s, "equal_walk_unequal_cycle,{ga},{va},{gb},{vb}");
        }
        s
    }
}

fn pairs(n: u64) -> u64 {
    n * n.saturating_sub(1) / 2
}

/// Compares per-node cycle profiles and closed-walk profiles (both up to
/// length `K`) over every unordered pair of nodes in the corpus, within and
/// across graphs. Witness lists keep at most `max_witnesses` pairs each.
pub fn profile_relation_search(
    corpus: &[Graph],
    max_len: usize,
    max_witnesses: usize,
) -> Result<ProfileRelationReport> {
    let mut nodes: Vec<(NodeRef, Vec<u64>, Vec<u128>)> = Vec::new();
    for (gi, g) in corpus.iter().enumerate() {
        let cyc = cycle_profile(g, max_len)?;
        let walk = closed_walk_profile(g, max_len)?;
        for v in 0..g.node_count() {
            nodes.push(((gi, v), cyc.node(v).to_vec(), walk.node(v).to_vec()));
        }
    }
    let mut by_cycle: HashMap<&[u64], Vec<usize>> = HashMap::new();
    let mut by_walk: HashMap<&[u128], Vec<usize>> = HashMap::new();
    let mut by_both: HashMap<(&[u64], &[u128]), u64> = HashMap::new();
    for (i, (_, c, w)) in nodes.iter().enumerate() {
        by_cycle.entry(c).or_default().push(i);
        by_walk.entry(w).or_default().push(i);
        *by_both.entry((c, w)).or_default() += 1;
    }
    let total = pairs(nodes.len() as u64);
    let eq_c: u64 = by_cycle.values().map(|g| pairs(g.len() as u64)).sum();
    let eq_w: u64 = by_walk.values().map(|g| pairs(g.len() as u64)).sum();
    let eq_both: u64 = by_both.values().map(|&n| pairs(n)).sum();
    let counts = RelationCounts {
        cycle_eq_walk_eq: eq_both,
        cycle_eq_walk_ne: eq_c - eq_both,
        cycle_ne_walk_eq: eq_w - eq_both,
        cycle_ne_walk_ne: total + eq_both - eq_c - eq_w,
    };

    let mut truncated = false;
    let mut collect = |groups: Vec<&Vec<usize>>, differ: &dyn Fn(usize, usize) -> bool| {
        let mut out = Vec::new();
        for members in groups {
            for (a, &i) in members.iter().enumerate() {
                for &j in &members[a + 1..] {
                    if differ(i, j) {
                        if out.len() == max_witnesses {
                            truncated = true;
                            return out;
                        }
                        out.push((nodes[i].0, nodes[j].0));
                    }
                }
            }
        }
        out
    };
    let mut cyc_groups: Vec<&Vec<usize>> = by_cycle.values().collect();
    cyc_groups.sort();
    let mut walk_groups: Vec<&Vec<usize>> = by_walk.values().collect();
    walk_groups.sort();
    let equal_cycle_unequal_walk = collect(cyc_groups, &|i, j| nodes[i].2 != nodes[j].2);
    let equal_walk_unequal_cycle = collect(walk_groups, &|i, j| nodes[i].1 != nodes[j].1);

    Ok(ProfileRelationReport {
        max_len,
        node_total: nodes.len(),
        counts,
        equal_cycle_unequal_walk,
        equal_walk_unequal_cycle,
        truncated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn triangles() -> Graph {
        Graph::disjoint_union(&[&Graph::complete(3), &Graph::complete(3)]).unwrap()
    }

    #[test]
    fn refine_examples() {
        assert_eq!(wl_refine(&Graph::complete(3), 10).class_count(), 1);
        let p3 = wl_refine(&Graph::path(3), 10);
        assert_eq!(p3.class_count(), 2);
        assert_eq!(p3.colors[0], p3.colors[2]);
        let c6 = wl_refine(&Graph::cycle(6), 10);
        assert_eq!((c6.class_count(), c6.rounds_to_stable), (1, 1));
    }

    #[test]
    fn distinguish_examples() {
        assert!(wl_distinguish(&Graph::complete(3), &Graph::path(3), 10));
        assert!(!wl_distinguish(&triangles(), &Graph::cycle(6), 10));
        assert!(!wl_distinguish(&Graph::cycle(6), &Graph::cycle(6), 10));
        assert!(wl_distinguish(&Graph::cycle(6), &Graph::cycle(5), 10));
    }

    #[test]
    fn feature_seeded_colors() {
        let x = crate::tensor::Tensor::from_rows(&[vec![1.0], vec![2.0], vec![1.0]]).unwrap();
        let g = Graph::complete(3).with_node_features(x).unwrap();
        let h = Graph::complete(3);
        assert!(!wl_distinguish(&g, &h, 5));
        let opts = WlOptions {
            max_rounds: 5,
            use_node_features: true,
        };
        assert!(wl_distinguish_with(&g, &h, opts));
    }

    #[test]
    fn cycle_examples() {
        let k3 = cycle_profile(&Graph::complete(3), 3).unwrap();
        assert_eq!(k3.node(0), &[0, 1]);
        let c6 = cycle_profile(&Graph::cycle(6), 6).unwrap();
        assert!((0..6).all(|v| c6.node(v) == [0, 0, 0, 0, 1]));
        let tree = cycle_profile(&Graph::star(4), 5).unwrap();
        assert!((0..5).all(|v| tree.node(v).iter().all(|&x| x == 0)));
        // K4: each node is on 3 triangles and 3 four-cycles
        let k4 = cycle_profile(&Graph::complete(4), 4).unwrap();
        assert_eq!(k4.node(0), &[0, 3, 3]);
        assert!(cycle_profile(&Graph::complete(3), 9).is_err());
        assert!(cycle_profile(&Graph::complete(3), 1).is_err());
    }

    #[test]
    fn relation_examples() {
        let corpus = vec![Graph::path(2), Graph::path(3)];
        let r = profile_relation_search(&corpus, 3, 100).unwrap();
        // P2 endpoint vs P3 middle: no cycles in either, degrees 1 vs 2
        assert!(r.equal_cycle_unequal_walk.contains(&((0, 0), (1, 1))));
        let total: u64 = 5 * 4 / 2;
        let c = &r.counts;
        assert_eq!(
            c.cycle_eq_walk_eq + c.cycle_eq_walk_ne + c.cycle_ne_walk_eq + c.cycle_ne_walk_ne,
            total
        );

        let k3 = profile_relation_search(&[Graph::complete(3)], 3, 10).unwrap();
        assert_eq!(k3.counts.cycle_eq_walk_eq, 3);

        let r = profile_relation_search(&[triangles(), Graph::cycle(6)], 3, 1000).unwrap();
        let cross = r
            .equal_cycle_unequal_walk
            .iter()
            .chain(&r.equal_walk_unequal_cycle)
            .any(|(a, b)| a.0 != b.0);
        // triangle nodes have a 3-cycle and C6 nodes do not, so across the two
        // graphs both profiles differ
        assert!(!cross);
        assert!(r.counts.cycle_ne_walk_ne >= 36);
        assert!(r.to_csv().starts_with("cycle_equal,walk_equal,pairs\n"));
    }

    #[test]
    fn witness_cap() {
        let corpus: Vec<Graph> = (2..6).map(Graph::path).collect();
        let r = profile_relation_search(&corpus, 3, 2).unwrap();
        assert_eq!(r.equal_cycle_unequal_walk.len(), 2);
        assert!(r.truncated);
    }
}
