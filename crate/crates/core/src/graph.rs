//! Simple undirected graphs, edge-list ingestion and the four synthetic
//! domain generators.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt;
use std::io::{BufRead, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::index;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Domain {
    Social,
    Molecular,
    Proteins,
    Linguistic,
}

impl Domain {
    pub const ALL: [Domain; 4] = [
        Domain::Social,
        Domain::Molecular,
        Domain::Proteins,
        Domain::Linguistic,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Domain::Social => "Social",
            Domain::Molecular => "Molecular",
            Domain::Proteins => "Proteins",
            Domain::Linguistic => "Linguistic",
        }
    }

    /// Default node-count range of the synthetic generator.
    pub fn default_size_range(self) -> (usize, usize) {
        match self {
            Domain::Molecular => (10, 23),
            _ => (10, 30),
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Domain {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "social" | "soc" => Ok(Domain::Social),
            "molecular" | "mol" => Ok(Domain::Molecular),
            "proteins" | "prot" => Ok(Domain::Proteins),
            "linguistic" | "ling" => Ok(Domain::Linguistic),
            _ => Err(Error::invalid(format!("unknown domain `{s}`"))),
        }
    }
}

/// Undirected, unweighted simple graph on nodes `0..n`.
///
/// Edges are stored once as `(u, v)` with `u < v`, sorted lexicographically.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Graph {
    pub id: String,
    pub domain: Domain,
    pub n: usize,
    pub edges: Vec<(usize, usize)>,
}

impl Graph {
    /// Builds a graph, rejecting self-loops, duplicates and out-of-range
    /// endpoints. Edge orientation is canonicalised.
    pub fn new(
        id: impl Into<String>,
        domain: Domain,
        n: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("graph must have at least one node"));
        }
        let mut set = BTreeSet::new();
        for (u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::invalid(format!("edge ({u},{v}) out of range for n={n}")));
            }
            if u == v {
                return Err(Error::invalid(format!("self-loop at node {u}")));
            }
            if !set.insert((u.min(v), u.max(v))) {
                return Err(Error::invalid(format!("duplicate edge ({u},{v})")));
            }
        }
        Ok(Graph {
            id: id.into(),
            domain,
            n,
            edges: set.into_iter().collect(),
        })
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        adjacency(self.n, &self.edges)
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.n];
        for &(u, v) in &self.edges {
            deg[u] += 1;
            deg[v] += 1;
        }
        deg
    }

    pub fn is_connected(&self) -> bool {
        components(&self.adjacency()).iter().max().copied().unwrap_or(0) == 0
    }
}

fn adjacency(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); n];
    for &(u, v) in edges {
        adj[u].push(v);
        adj[v].push(u);
    }
    for list in &mut adj {
        list.sort_unstable();
    }
    adj
}

/// Component label per node, labels assigned in order of lowest node id.
fn components(adj: &[Vec<usize>]) -> Vec<usize> {
    let mut label = vec![usize::MAX; adj.len()];
    let mut next = 0;
    for start in 0..adj.len() {
        if label[start] != usize::MAX {
            continue;
        }
        label[start] = next;
        let mut queue = VecDeque::from([start]);
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if label[v] == usize::MAX {
                    label[v] = next;
                    queue.push_back(v);
                }
            }
        }
        next += 1;
    }
    label
}

/// Parses a whitespace-separated edge list. Returns the graph and the number
/// of dropped duplicate or self-loop edges.
pub fn parse_edge_list(
    reader: impl BufRead,
    id: &str,
    domain: Domain,
) -> Result<(Graph, usize)> {
    let mut remap: HashMap<u64, usize> = HashMap::new();
    let mut edges = BTreeSet::new();
    let mut dropped = 0;
    let mut saw_edge = false;
    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.map_err(|e| Error::Parse {
            line: lineno,
            msg: e.to_string(),
        })?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut fields = trimmed.split_whitespace();
        let parse = |tok: Option<&str>| -> Result<u64> {
            let tok = tok.ok_or_else(|| Error::Parse {
                line: lineno,
                msg: format!("expected two node ids, got `{trimmed}`"),
            })?;
            tok.parse::<u64>().map_err(|_| Error::Parse {
                line: lineno,
                msg: format!("`{tok}` is not a non-negative integer"),
            })
        };
        let a = parse(fields.next())?;
        let b = parse(fields.next())?;
        if fields.next().is_some() {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("expected two node ids, got `{trimmed}`"),
            });
        }
        saw_edge = true;
        let mut dense = |x: u64| {
            let next = remap.len();
            *remap.entry(x).or_insert(next)
        };
        let (u, v) = (dense(a), dense(b));
        if u == v || !edges.insert((u.min(v), u.max(v))) {
            dropped += 1;
        }
    }
    if !saw_edge {
        return Err(Error::invalid("edge list is empty"));
    }
    if dropped > 0 {
        log::warn!("{id}: dropped {dropped} duplicate or self-loop edges");
    }
    let graph = Graph {
        id: id.to_string(),
        domain,
        n: remap.len(),
        edges: edges.into_iter().collect(),
    };
    Ok((graph, dropped))
}

/// Reads an edge-list file; the graph id is the file stem.
pub fn load_edge_list(path: &Path, domain: Domain) -> Result<(Graph, usize)> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_edge_list(std::io::BufReader::new(file), &id, domain)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DomainEnsemble {
    pub domain: Domain,
    pub graphs: Vec<Graph>,
    pub seed: u64,
}

#[derive(Serialize, Deserialize)]
struct GraphRecord {
    id: String,
    domain: String,
    n: usize,
    edges: Vec<[usize; 2]>,
}

impl DomainEnsemble {
    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    /// Writes one JSON object per line.
    pub fn write_jsonl(&self, mut out: impl Write) -> Result<()> {
        for g in &self.graphs {
            let rec = GraphRecord {
                id: g.id.clone(),
                domain: g.domain.name().to_string(),
                n: g.n,
                edges: g.edges.iter().map(|&(u, v)| [u, v]).collect(),
            };
            serde_json::to_writer(&mut out, &rec)?;
            out.write_all(b"\n").map_err(|e| Error::io("<jsonl>", e))?;
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.write_jsonl(&mut w)?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Reads a JSON-lines ensemble. All graphs must share one domain.
    pub fn read_jsonl(reader: impl BufRead) -> Result<Self> {
        let mut graphs = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::Parse {
                line: i + 1,
                msg: e.to_string(),
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: GraphRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
                line: i + 1,
                msg: e.to_string(),
            })?;
            let domain: Domain = rec.domain.parse()?;
            let g = Graph::new(rec.id, domain, rec.n, rec.edges.iter().map(|e| (e[0], e[1])))
                .map_err(|e| Error::Parse {
                    line: i + 1,
                    msg: e.to_string(),
                })?;
            graphs.push(g);
        }
        let domain = graphs
            .first()
            .map(|g| g.domain)
            .ok_or_else(|| Error::invalid("ensemble file holds no graphs"))?;
        if graphs.iter().any(|g| g.domain != domain) {
            return Err(Error::invalid("ensemble mixes domains"));
        }
        Ok(DomainEnsemble {
            domain,
            graphs,
            seed: 0,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_jsonl(std::io::BufReader::new(file))
    }
}

/// Generates `count` connected graphs for `domain`. Each graph draws from
/// its own stream so the output does not depend on thread count.
pub fn generate_ensemble(
    domain: Domain,
    count: usize,
    seed: u64,
    size_range: (usize, usize),
) -> Result<DomainEnsemble> {
    let (lo, hi) = size_range;
    if count == 0 {
        return Err(Error::invalid("count must be at least 1"));
    }
    if lo == 0 || lo > hi {
        return Err(Error::invalid(format!("invalid size range [{lo},{hi}]")));
    }
    let graphs = (0..count)
        .into_par_iter()
        .map(|i| {
            let graph_seed = rng::derive_str(seed, &format!("{domain}|{i}"));
            let mut r = rng::rng(graph_seed);
            let (n, edges) = connected_sample(&mut r, domain, lo, hi);
            Graph {
                id: format!("{}-{seed}-{i:04}", domain.name().to_ascii_lowercase()),
                domain,
                n,
                edges,
            }
        })
        .collect();
    Ok(DomainEnsemble {
        domain,
        graphs,
        seed,
    })
}

const MAX_ATTEMPTS: usize = 100;

fn connected_sample(
    r: &mut rng::Rng,
    domain: Domain,
    lo: usize,
    hi: usize,
) -> (usize, Vec<(usize, usize)>) {
    let mut last = None;
    for _ in 0..MAX_ATTEMPTS {
        let n = r.random_range(lo..=hi);
        let edges = match domain {
            Domain::Social => social(r, n),
            Domain::Molecular => molecular(r, n),
            Domain::Proteins => proteins(r, n),
            Domain::Linguistic => linguistic(r, n),
        };
        let adj = adjacency(n, &edges);
        if components(&adj).iter().all(|&c| c == 0) {
            return (n, sorted(edges));
        }
        last = Some((n, edges));
    }
    let (n, edges) = last.expect("at least one attempt");
    largest_component(n, &edges)
}

fn sorted(mut edges: Vec<(usize, usize)>) -> Vec<(usize, usize)> {
    for e in &mut edges {
        *e = (e.0.min(e.1), e.0.max(e.1));
    }
    edges.sort_unstable();
    edges.dedup();
    edges
}

fn largest_component(n: usize, edges: &[(usize, usize)]) -> (usize, Vec<(usize, usize)>) {
    let label = components(&adjacency(n, edges));
    let k = label.iter().max().map_or(0, |m| m + 1);
    let mut size = vec![0usize; k];
    for &l in &label {
        size[l] += 1;
    }
    // first component among those of maximal size
    let best = (0..k).max_by_key(|&c| (size[c], std::cmp::Reverse(c))).unwrap_or(0);
    let mut map = vec![usize::MAX; n];
    let mut next = 0;
    for v in 0..n {
        if label[v] == best {
            map[v] = next;
            next += 1;
        }
    }
    let kept = edges
        .iter()
        .filter(|&&(u, _)| label[u] == best)
        .map(|&(u, v)| (map[u], map[v]))
        .collect();
    (next, sorted(kept))
}

fn has_edge(adj: &[Vec<usize>], u: usize, v: usize) -> bool {
    adj[u].contains(&v)
}

/// Dense Erdős–Rényi core with triadic closure.
fn social(r: &mut rng::Rng, n: usize) -> Vec<(usize, usize)> {
    let p = r.random_range(0.45..0.85);
    let mut adj = vec![Vec::new(); n];
    for u in 0..n {
        for v in u + 1..n {
            if r.random::<f64>() < p {
                adj[u].push(v);
                adj[v].push(u);
            }
        }
    }
    for _ in 0..2 * n {
        let mut open = Vec::new();
        for c in 0..n {
            for (i, &a) in adj[c].iter().enumerate() {
                for &b in &adj[c][i + 1..] {
                    if !has_edge(&adj, a, b) {
                        open.push((a.min(b), a.max(b)));
                    }
                }
            }
        }
        if open.is_empty() {
            break;
        }
        let (a, b) = open[r.random_range(0..open.len())];
        if r.random::<f64>() < 0.8 && !has_edge(&adj, a, b) {
            adj[a].push(b);
            adj[b].push(a);
        }
    }
    edges_of(&adj)
}

fn edges_of(adj: &[Vec<usize>]) -> Vec<(usize, usize)> {
    let mut edges: Vec<_> = adj
        .iter()
        .enumerate()
        .flat_map(|(u, list)| list.iter().filter(move |&&v| u < v).map(move |&v| (u, v)))
        .collect();
    edges.sort_unstable();
    edges
}

/// Bounded-valence tree from a Prüfer sequence plus an occasional ring.
fn molecular(r: &mut rng::Rng, n: usize) -> Vec<(usize, usize)> {
    if n == 1 {
        return Vec::new();
    }
    if n == 2 {
        return vec![(0, 1)];
    }
    let mut edges = loop {
        let seq: Vec<usize> = (0..n - 2).map(|_| r.random_range(0..n)).collect();
        let mut degree = vec![1usize; n];
        for &s in &seq {
            degree[s] += 1;
        }
        if degree.iter().any(|&d| d > 4) {
            continue;
        }
        break prufer_decode(&seq, degree);
    };
    if r.random::<f64>() < 0.3 {
        let adj = adjacency(n, &edges);
        let mut far = Vec::new();
        for u in 0..n {
            let dist = bfs(&adj, u);
            for v in u + 1..n {
                if dist[v] >= 3 {
                    far.push((u, v));
                }
            }
        }
        if !far.is_empty() {
            edges.push(far[r.random_range(0..far.len())]);
        }
    }
    edges
}

fn prufer_decode(seq: &[usize], mut degree: Vec<usize>) -> Vec<(usize, usize)> {
    let n = degree.len();
    let mut edges = Vec::with_capacity(n - 1);
    for &s in seq {
        let leaf = (0..n).find(|&v| degree[v] == 1).expect("leaf exists");
        edges.push((leaf.min(s), leaf.max(s)));
        degree[leaf] -= 1;
        degree[s] -= 1;
    }
    let rest: Vec<usize> = (0..n).filter(|&v| degree[v] == 1).collect();
    edges.push((rest[0], rest[1]));
    edges
}

pub(crate) fn bfs(adj: &[Vec<usize>], src: usize) -> Vec<usize> {
    let mut dist = vec![usize::MAX; adj.len()];
    dist[src] = 0;
    let mut queue = VecDeque::from([src]);
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if dist[v] == usize::MAX {
                dist[v] = dist[u] + 1;
                queue.push_back(v);
            }
        }
    }
    dist
}

/// Planted partition with 2–4 near-equal blocks.
fn proteins(r: &mut rng::Rng, n: usize) -> Vec<(usize, usize)> {
    const P_IN: f64 = 0.5;
    const P_OUT: f64 = 0.05;
    let blocks = r.random_range(2..=4usize);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            let p = if u % blocks == v % blocks { P_IN } else { P_OUT };
            if r.random::<f64>() < p {
                edges.push((u, v));
            }
        }
    }
    edges
}

/// Holme–Kim growth: preferential attachment with triad formation.
fn linguistic(r: &mut rng::Rng, n: usize) -> Vec<(usize, usize)> {
    const M: usize = 2;
    const P_TRIAD: f64 = 0.75;
    let seed_nodes = (M + 1).min(n);
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    // endpoint multiset for degree-proportional sampling
    let mut stubs = Vec::new();
    for u in 0..seed_nodes {
        for v in u + 1..seed_nodes {
            adj[u].push(v);
            adj[v].push(u);
            stubs.extend([u, v]);
        }
    }
    for new in seed_nodes..n {
        let mut targets: Vec<usize> = Vec::with_capacity(M);
        let mut last_pa: Option<usize> = None;
        while targets.len() < M.min(new) {
            let candidate = match last_pa {
                Some(anchor) if r.random::<f64>() < P_TRIAD => {
                    let options: Vec<usize> = adj[anchor]
                        .iter()
                        .copied()
                        .filter(|w| !targets.contains(w))
                        .collect();
                    if options.is_empty() {
                        None
                    } else {
                        Some(options[r.random_range(0..options.len())])
                    }
                }
                _ => None,
            };
            let chosen = match candidate {
                Some(w) => w,
                None => {
                    let w = stubs[r.random_range(0..stubs.len())];
                    if targets.contains(&w) {
                        continue;
                    }
                    last_pa = Some(w);
                    w
                }
            };
            targets.push(chosen);
        }
        for &t in &targets {
            adj[new].push(t);
            adj[t].push(new);
            stubs.extend([new, t]);
        }
    }
    edges_of(&adj)
}

/// Uniform sample of `n` graphs without replacement, kept in pool order.
pub fn sample_subset(ensemble: &DomainEnsemble, n: usize, seed: u64) -> Result<DomainEnsemble> {
    let picked = sample_indices(ensemble.len(), n, seed)?;
    Ok(DomainEnsemble {
        domain: ensemble.domain,
        graphs: picked.into_iter().map(|i| ensemble.graphs[i].clone()).collect(),
        seed,
    })
}

/// Ascending indices of a uniform `n`-subset of `0..len`.
pub fn sample_indices(len: usize, n: usize, seed: u64) -> Result<Vec<usize>> {
    if n > len {
        return Err(Error::invalid(format!(
            "cannot sample {n} graphs from a pool of {len}"
        )));
    }
    let mut r = rng::rng(seed);
    let mut picked = index::sample(&mut r, len, n).into_vec();
    picked.sort_unstable();
    Ok(picked)
}
