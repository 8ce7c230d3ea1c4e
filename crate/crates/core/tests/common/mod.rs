//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, SymmetricEigen};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use xcdtl_core::graph::{Domain, Graph};
use xcdtl_core::louvain::louvain_partition;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// G(n, p) graph.
pub fn random_graph(n: usize, p: f64, r: &mut ChaCha8Rng) -> Graph {
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if r.random::<f64>() < p {
                edges.push((u, v));
            }
        }
    }
    Graph::new("rand", Domain::Social, n, edges).unwrap()
}

pub fn dense_adjacency(g: &Graph) -> Vec<Vec<bool>> {
    let mut a = vec![vec![false; g.n]; g.n];
    for &(u, v) in &g.edges {
        a[u][v] = true;
        a[v][u] = true;
    }
    a
}

fn eigenvalues(m: DMatrix<f64>) -> Vec<f64> {
    let mut e: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
    e.sort_by(f64::total_cmp);
    e
}

/// Newman modularity by the double sum over node pairs.
pub fn naive_modularity(g: &Graph, part: &[usize]) -> f64 {
    let m = g.edges.len() as f64;
    if m == 0.0 {
        return 0.0;
    }
    let a = dense_adjacency(g);
    let k: Vec<f64> = a.iter().map(|r| r.iter().filter(|&&x| x).count() as f64).collect();
    let mut q = 0.0;
    for i in 0..g.n {
        for j in 0..g.n {
            if part[i] == part[j] {
                q += a[i][j] as u8 as f64 - k[i] * k[j] / (2.0 * m);
            }
        }
    }
    q / (2.0 * m)
}

/// Descriptor values by direct enumeration; `None` marks non-computable.
pub fn naive_features(g: &Graph) -> [Option<f64>; 12] {
    let n = g.n;
    let mut out = [None; 12];
    out[0] = Some(n as f64);
    out[1] = Some(g.edges.len() as f64);
    if n < 2 {
        return out;
    }
    let a = dense_adjacency(g);
    let deg: Vec<usize> = a.iter().map(|r| r.iter().filter(|&&x| x).count()).collect();
    let m = g.edges.len();
    out[2] = Some(2.0 * m as f64 / (n * (n - 1)) as f64);

    let mut cl = 0.0;
    for v in 0..n {
        let nb: Vec<usize> = (0..n).filter(|&u| a[v][u]).collect();
        if nb.len() < 2 {
            continue;
        }
        let mut links = 0;
        for i in 0..nb.len() {
            for j in i + 1..nb.len() {
                links += a[nb[i]][nb[j]] as usize;
            }
        }
        cl += links as f64 / (nb.len() * (nb.len() - 1) / 2) as f64;
    }
    out[3] = Some(cl / n as f64);

    let mut triangles = 0;
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                if a[i][j] && a[j][k] && a[i][k] {
                    triangles += 1;
                }
            }
        }
    }
    let triples: usize = deg.iter().map(|&d| d * d.saturating_sub(1) / 2).sum();
    out[4] = Some(if triples == 0 { 0.0 } else { 3.0 * triangles as f64 / triples as f64 });

    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for &(u, v) in &g.edges {
        xs.extend([deg[u] as f64, deg[v] as f64]);
        ys.extend([deg[v] as f64, deg[u] as f64]);
    }
    if !xs.is_empty() {
        let mx = xs.iter().sum::<f64>() / xs.len() as f64;
        let my = ys.iter().sum::<f64>() / ys.len() as f64;
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
        let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
        if sxx > 1e-9 && syy > 1e-9 {
            out[5] = Some(sxy / (sxx * syy).sqrt());
        }
    }

    let inf = usize::MAX / 4;
    let mut d = vec![vec![inf; n]; n];
    for i in 0..n {
        d[i][i] = 0;
        for j in 0..n {
            if a[i][j] {
                d[i][j] = 1;
            }
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if d[i][k] + d[k][j] < d[i][j] {
                    d[i][j] = d[i][k] + d[k][j];
                }
            }
        }
    }
    let pairs = (n * (n - 1)) as f64;
    let mut eff = 0.0;
    let mut total = 0;
    let mut diam = 0;
    let mut connected = true;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            if d[i][j] >= inf {
                connected = false;
            } else {
                eff += 1.0 / d[i][j] as f64;
                total += d[i][j];
                diam = diam.max(d[i][j]);
            }
        }
    }
    out[6] = Some(eff / pairs);
    if connected {
        out[7] = Some(total as f64 / pairs);
        out[8] = Some(diam as f64);
    }

    let adj = DMatrix::from_fn(n, n, |i, j| a[i][j] as u8 as f64);
    out[9] = Some(eigenvalues(adj).last().copied().unwrap().max(0.0));
    let lap = DMatrix::from_fn(n, n, |i, j| if i == j { deg[i] as f64 } else { -(a[i][j] as u8 as f64) });
    let l2 = eigenvalues(lap)[1];
    out[10] = Some(if l2.abs() <= 1e-10 { 0.0 } else { l2 });
    out[11] = Some(naive_modularity(g, &louvain_partition(g)));
    out
}

/// Best modularity over every set partition (restricted growth strings).
pub fn exhaustive_modularity(g: &Graph) -> f64 {
    let n = g.n;
    let mut labels = vec![0usize; n];
    let mut best = f64::NEG_INFINITY;
    fn rec(i: usize, max: usize, labels: &mut Vec<usize>, g: &Graph, best: &mut f64) {
        if i == labels.len() {
            *best = best.max(naive_modularity(g, labels));
            return;
        }
        for c in 0..=max + 1 {
            labels[i] = c;
            rec(i + 1, max.max(c), labels, g, best);
        }
    }
    if n == 0 {
        return 0.0;
    }
    rec(1, 0, &mut labels, g, &mut best);
    best
}

/// Average ranks (1-based) by sorting.
pub fn ranks_by_sort(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Kruskal–Wallis H without tie correction shortcuts: ranks by sort and the
/// textbook formula divided by the tie factor.
pub fn naive_h(groups: &[Vec<f64>]) -> f64 {
    let all: Vec<f64> = groups.iter().flatten().copied().collect();
    let n = all.len() as f64;
    let r = ranks_by_sort(&all);
    let mut at = 0;
    let mut s = 0.0;
    for g in groups {
        let sum: f64 = r[at..at + g.len()].iter().sum();
        s += sum * sum / g.len() as f64;
        at += g.len();
    }
    let h = 12.0 / (n * (n + 1.0)) * s - 3.0 * (n + 1.0);
    let mut sorted = all.clone();
    sorted.sort_by(f64::total_cmp);
    let mut ties = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        ties += t * t * t - t;
        i = j + 1;
    }
    h / (1.0 - ties / (n * n * n - n))
}

/// Fraction of label permutations whose statistic is at least the observed
/// one; returns (p, standard error).
pub fn permutation_p(
    groups: &[Vec<f64>],
    resamples: usize,
    seed: u64,
    stat: impl Fn(&[Vec<f64>]) -> f64,
) -> (f64, f64) {
    let observed = stat(groups);
    let mut pool: Vec<f64> = groups.iter().flatten().copied().collect();
    let sizes: Vec<usize> = groups.iter().map(|g| g.len()).collect();
    let mut r = rng(seed);
    let mut hits = 0usize;
    let mut shuffled = vec![Vec::new(); sizes.len()];
    for _ in 0..resamples {
        pool.shuffle(&mut r);
        let mut at = 0;
        for (g, &s) in shuffled.iter_mut().zip(&sizes) {
            g.clear();
            g.extend_from_slice(&pool[at..at + s]);
            at += s;
        }
        if stat(&shuffled) >= observed - 1e-12 {
            hits += 1;
        }
    }
    let p = hits as f64 / resamples as f64;
    (p, (p * (1.0 - p) / resamples as f64).sqrt())
}

/// Sign-flip p-value of |mean(d)|/se for paired differences.
pub fn sign_flip_p(d: &[f64], resamples: usize, seed: u64) -> (f64, f64) {
    let t = |d: &[f64]| {
        let n = d.len() as f64;
        let m = d.iter().sum::<f64>() / n;
        let sd = (d.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        (m / (sd / n.sqrt())).abs()
    };
    let observed = t(d);
    let mut r = rng(seed);
    let mut hits = 0usize;
    let mut flipped = d.to_vec();
    for _ in 0..resamples {
        for (f, &x) in flipped.iter_mut().zip(d) {
            *f = if r.random::<bool>() { x } else { -x };
        }
        if t(&flipped) >= observed - 1e-12 {
            hits += 1;
        }
    }
    let p = hits as f64 / resamples as f64;
    (p, (p * (1.0 - p) / resamples as f64).sqrt())
}

/// Rows drawn i.i.d. uniform in [-0.5, 0.5).
pub fn uniform_rows(n: usize, p: usize, seed: u64) -> xcdtl_core::linalg::Matrix {
    let mut r = rng(seed);
    xcdtl_core::linalg::Matrix::from_vec(n, p, (0..n * p).map(|_| r.random::<f64>() - 0.5).collect())
}
