//! Deterministic two-phase Louvain modularity optimisation.
//!
//! Nodes are visited in ascending id, a node moves only when the best gain
//! beats staying put by more than `1e-12`, and equal gains go to the lowest
//! community id. Communities are renumbered by their lowest member before
//! aggregation, so the whole procedure is a pure function of the edge list.

use crate::graph::Graph;

const MIN_GAIN: f64 = 1e-12;

/// Weighted graph used for the aggregation levels. `self_loops[i]` holds
/// the total weight of edges internal to super-node `i`.
struct Level {
    neighbors: Vec<Vec<(usize, f64)>>,
    self_loops: Vec<f64>,
}

impl Level {
    fn from_graph(g: &Graph) -> Self {
        let mut neighbors = vec![Vec::new(); g.n];
        for &(u, v) in &g.edges {
            neighbors[u].push((v, 1.0));
            neighbors[v].push((u, 1.0));
        }
        Level {
            neighbors,
            self_loops: vec![0.0; g.n],
        }
    }

    fn len(&self) -> usize {
        self.neighbors.len()
    }

    fn degree(&self, i: usize) -> f64 {
        self.neighbors[i].iter().map(|&(_, w)| w).sum::<f64>() + 2.0 * self.self_loops[i]
    }
}

/// Final partition (community label per node, labels dense from 0 in
/// order of lowest member).
pub fn louvain_partition(g: &Graph) -> Vec<usize> {
    let mut membership: Vec<usize> = (0..g.n).collect();
    if g.edges.is_empty() {
        return membership;
    }
    let m = g.num_edges() as f64;
    let mut level = Level::from_graph(g);
    loop {
        let (community, moved) = local_moves(&level, m);
        if !moved {
            break;
        }
        let (dense, count) = relabel(&community);
        for c in membership.iter_mut() {
            *c = dense[*c];
        }
        if count == level.len() {
            break;
        }
        level = aggregate(&level, &dense, count);
    }
    relabel(&membership).0
}

/// Newman modularity of the Louvain partition; 0 for an edgeless graph.
pub fn louvain_modularity(g: &Graph) -> f64 {
    if g.edges.is_empty() {
        return 0.0;
    }
    modularity(g, &louvain_partition(g))
}

/// Newman modularity `Q = Σ_c [L_c/m − (d_c/2m)²]` of a partition.
pub fn modularity(g: &Graph, partition: &[usize]) -> f64 {
    if g.edges.is_empty() {
        return 0.0;
    }
    let m = g.num_edges() as f64;
    let k = partition.iter().max().map_or(0, |x| x + 1);
    let mut internal = vec![0.0; k];
    let mut degree_sum = vec![0.0; k];
    for &(u, v) in &g.edges {
        if partition[u] == partition[v] {
            internal[partition[u]] += 1.0;
        }
        degree_sum[partition[u]] += 1.0;
        degree_sum[partition[v]] += 1.0;
    }
    internal
        .iter()
        .zip(&degree_sum)
        .map(|(l, d)| l / m - (d / (2.0 * m)).powi(2))
        .sum()
}

fn local_moves(level: &Level, m: f64) -> (Vec<usize>, bool) {
    let n = level.len();
    let mut community: Vec<usize> = (0..n).collect();
    let degree: Vec<f64> = (0..n).map(|i| level.degree(i)).collect();
    let mut total: Vec<f64> = degree.clone();
    let mut weight_to = vec![0.0; n];
    let mut touched = Vec::new();
    let mut any_move = false;
    loop {
        let mut moved = false;
        for i in 0..n {
            let own = community[i];
            let ki = degree[i];
            for &(j, w) in &level.neighbors[i] {
                let c = community[j];
                if weight_to[c] == 0.0 {
                    touched.push(c);
                }
                weight_to[c] += w;
            }
            total[own] -= ki;
            let gain = |c: usize, w_in: f64| w_in / m - total[c] * ki / (2.0 * m * m);
            let stay = gain(own, weight_to[own]);
            let mut best: Option<(usize, f64)> = None;
            touched.sort_unstable();
            for &c in &touched {
                if c == own {
                    continue;
                }
                let g = gain(c, weight_to[c]);
                // ascending scan: near-equal gains keep the lower id
                if g > stay + MIN_GAIN && best.is_none_or(|(_, b)| g > b + MIN_GAIN) {
                    best = Some((c, g));
                }
            }
            let target = best.map_or(own, |(c, _)| c);
            total[target] += ki;
            if target != own {
                community[i] = target;
                moved = true;
                any_move = true;
            }
            for &c in &touched {
                weight_to[c] = 0.0;
            }
            touched.clear();
        }
        if !moved {
            break;
        }
    }
    (community, any_move)
}

/// Dense relabelling in order of first appearance; returns the new label
/// per entry and the label count.
fn relabel(labels: &[usize]) -> (Vec<usize>, usize) {
    let k = labels.iter().max().map_or(0, |x| x + 1);
    let mut map = vec![usize::MAX; k];
    let mut next = 0;
    for &l in labels {
        if map[l] == usize::MAX {
            map[l] = next;
            next += 1;
        }
    }
    (labels.iter().map(|&l| map[l]).collect(), next)
}

fn aggregate(level: &Level, community: &[usize], count: usize) -> Level {
    let mut self_loops = vec![0.0; count];
    let mut acc: Vec<std::collections::BTreeMap<usize, f64>> = vec![Default::default(); count];
    for i in 0..level.len() {
        let ci = community[i];
        self_loops[ci] += level.self_loops[i];
        for &(j, w) in &level.neighbors[i] {
            let cj = community[j];
            if ci == cj {
                // each internal edge is seen from both ends
                self_loops[ci] += w / 2.0;
            } else {
                *acc[ci].entry(cj).or_insert(0.0) += w;
            }
        }
    }
    Level {
        neighbors: acc.into_iter().map(|m| m.into_iter().collect()).collect(),
        self_loops,
    }
}
