//! The twelve-descriptor fingerprint, median imputation and z-scoring.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fmt::g12;
use crate::graph::{bfs, Domain, Graph};
use crate::linalg::{symmetric_eigenvalues, Matrix};
use crate::louvain::louvain_modularity;

pub const NUM_FEATURES: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Feature {
    NNodes,
    NEdges,
    Density,
    AvgClustering,
    Transitivity,
    Assortativity,
    Efficiency,
    AvgShortestPath,
    Diameter,
    SpectralRadius,
    Lambda2,
    Modularity,
}

impl Feature {
    pub const ALL: [Feature; NUM_FEATURES] = [
        Feature::NNodes,
        Feature::NEdges,
        Feature::Density,
        Feature::AvgClustering,
        Feature::Transitivity,
        Feature::Assortativity,
        Feature::Efficiency,
        Feature::AvgShortestPath,
        Feature::Diameter,
        Feature::SpectralRadius,
        Feature::Lambda2,
        Feature::Modularity,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Feature::NNodes => "n_nodes",
            Feature::NEdges => "n_edges",
            Feature::Density => "density",
            Feature::AvgClustering => "avg_clustering",
            Feature::Transitivity => "transitivity",
            Feature::Assortativity => "assortativity",
            Feature::Efficiency => "efficiency",
            Feature::AvgShortestPath => "avg_shortest_path",
            Feature::Diameter => "diameter",
            Feature::SpectralRadius => "spectral_radius",
            Feature::Lambda2 => "lambda_2",
            Feature::Modularity => "modularity",
        }
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Feature {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Feature::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown feature `{s}`")))
    }
}

/// Descriptor values in [`Feature::ALL`] order. `mask[j] == false` marks a
/// descriptor that is not defined for this graph; its value is NaN.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureVector {
    pub values: [f64; NUM_FEATURES],
    pub mask: [bool; NUM_FEATURES],
}

impl FeatureVector {
    pub fn get(&self, f: Feature) -> Option<f64> {
        self.mask[f.index()].then(|| self.values[f.index()])
    }

    fn empty() -> Self {
        FeatureVector {
            values: [f64::NAN; NUM_FEATURES],
            mask: [false; NUM_FEATURES],
        }
    }

    fn set(&mut self, f: Feature, v: f64) {
        self.values[f.index()] = v;
        self.mask[f.index()] = true;
    }
}

/// Eigenvalues closer than this to zero are treated as zero.
const ZERO_EIGEN: f64 = 1e-10;

pub fn compute_features(g: &Graph) -> Result<FeatureVector> {
    use Feature::*;
    if g.n == 0 {
        return Err(Error::invalid("graph has no nodes"));
    }
    let mut fv = FeatureVector::empty();
    let n = g.n;
    let m = g.num_edges();
    fv.set(NNodes, n as f64);
    fv.set(NEdges, m as f64);
    if n < 2 {
        return Ok(fv);
    }
    let nf = n as f64;
    let adj = g.adjacency();
    let deg = g.degrees();

    fv.set(Density, 2.0 * m as f64 / (nf * (nf - 1.0)));

    // triangles through each node
    let mut tri = vec![0usize; n];
    for &(u, v) in &g.edges {
        let common = intersect_count(&adj[u], &adj[v]);
        tri[u] += common;
        tri[v] += common;
    }
    // each triangle is counted twice per vertex (once per incident edge)
    let local: Vec<f64> = (0..n)
        .map(|v| {
            let d = deg[v];
            if d < 2 {
                0.0
            } else {
                (tri[v] / 2) as f64 / (d * (d - 1) / 2) as f64
            }
        })
        .collect();
    fv.set(AvgClustering, local.iter().sum::<f64>() / nf);
    let closed: usize = tri.iter().map(|t| t / 2).sum();
    let triples: usize = deg.iter().map(|&d| d * d.saturating_sub(1) / 2).sum();
    fv.set(
        Transitivity,
        if triples == 0 { 0.0 } else { closed as f64 / triples as f64 },
    );

    if let Some(r) = degree_assortativity(&g.edges, &deg) {
        fv.set(Assortativity, r);
    }

    let mut inv_sum = 0.0;
    let mut dist_sum = 0usize;
    let mut diameter = 0usize;
    let mut connected = true;
    for s in 0..n {
        for (t, &d) in bfs(&adj, s).iter().enumerate() {
            if t == s {
                continue;
            }
            if d == usize::MAX {
                connected = false;
            } else {
                inv_sum += 1.0 / d as f64;
                dist_sum += d;
                diameter = diameter.max(d);
            }
        }
    }
    let pairs = nf * (nf - 1.0);
    fv.set(Efficiency, inv_sum / pairs);
    if connected {
        fv.set(AvgShortestPath, dist_sum as f64 / pairs);
        fv.set(Diameter, diameter as f64);
    }

    let mut a = Matrix::zeros(n, n);
    let mut lap = Matrix::zeros(n, n);
    for &(u, v) in &g.edges {
        a[(u, v)] = 1.0;
        a[(v, u)] = 1.0;
        lap[(u, v)] = -1.0;
        lap[(v, u)] = -1.0;
    }
    for (v, &d) in deg.iter().enumerate() {
        lap[(v, v)] = d as f64;
    }
    let adj_eig = symmetric_eigenvalues(&a);
    fv.set(SpectralRadius, adj_eig[n - 1].max(0.0));
    let lambda2 = symmetric_eigenvalues(&lap)[1];
    fv.set(Lambda2, if lambda2.abs() <= ZERO_EIGEN { 0.0 } else { lambda2.max(0.0) });

    fv.set(Modularity, louvain_modularity(g));
    Ok(fv)
}

fn intersect_count(a: &[usize], b: &[usize]) -> usize {
    let (mut i, mut j, mut c) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                c += 1;
                i += 1;
                j += 1;
            }
        }
    }
    c
}

/// Pearson correlation of endpoint degrees over both orientations of every
/// edge. `None` when there are no edges or all endpoint degrees coincide.
fn degree_assortativity(edges: &[(usize, usize)], deg: &[usize]) -> Option<f64> {
    if edges.is_empty() {
        return None;
    }
    let count = 2.0 * edges.len() as f64;
    let mean = edges.iter().map(|&(u, v)| (deg[u] + deg[v]) as f64).sum::<f64>() / count;
    let (mut cov, mut var) = (0.0, 0.0);
    for &(u, v) in edges {
        let (x, y) = (deg[u] as f64 - mean, deg[v] as f64 - mean);
        cov += 2.0 * x * y;
        var += x * x + y * y;
    }
    if var <= 1e-12 * count {
        return None;
    }
    Some((cov / var).clamp(-1.0, 1.0))
}

/// Raw descriptor table for a set of graphs, one row per graph.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub ids: Vec<String>,
    pub domains: Vec<Domain>,
    pub rows: Vec<FeatureVector>,
}

impl FeatureMatrix {
    pub fn from_graphs(graphs: &[Graph]) -> Result<Self> {
        let rows = graphs
            .par_iter()
            .map(compute_features)
            .collect::<Result<Vec<_>>>()?;
        Ok(FeatureMatrix {
            ids: graphs.iter().map(|g| g.id.clone()).collect(),
            domains: graphs.iter().map(|g| g.domain).collect(),
            rows,
        })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Rows at the given positions, in that order.
    pub fn subset(&self, idx: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            ids: idx.iter().map(|&i| self.ids[i].clone()).collect(),
            domains: idx.iter().map(|&i| self.domains[i]).collect(),
            rows: idx.iter().map(|&i| self.rows[i]).collect(),
        }
    }

    pub fn concat(parts: &[&FeatureMatrix]) -> FeatureMatrix {
        let mut out = FeatureMatrix {
            ids: Vec::new(),
            domains: Vec::new(),
            rows: Vec::new(),
        };
        for p in parts {
            out.ids.extend(p.ids.iter().cloned());
            out.domains.extend(&p.domains);
            out.rows.extend(&p.rows);
        }
        out
    }

    /// Rows tagged with `domain`, in their original order.
    pub fn of_domain(&self, domain: Domain) -> FeatureMatrix {
        let idx: Vec<usize> = (0..self.len()).filter(|&i| self.domains[i] == domain).collect();
        self.subset(&idx)
    }

    /// Per-feature medians over computed entries (`None` if a column has
    /// no computed entry).
    pub fn medians(&self) -> [Option<f64>; NUM_FEATURES] {
        std::array::from_fn(|j| {
            let vals: Vec<f64> = self
                .rows
                .iter()
                .filter(|r| r.mask[j])
                .map(|r| r.values[j])
                .collect();
            median(&vals)
        })
    }

    /// Values with non-computable entries replaced by the column median
    /// (0 for all-missing columns).
    pub fn imputed(&self) -> Vec<[f64; NUM_FEATURES]> {
        let med = self.medians();
        self.rows
            .iter()
            .map(|r| std::array::from_fn(|j| if r.mask[j] { r.values[j] } else { med[j].unwrap_or(0.0) }))
            .collect()
    }

    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["graph_id".to_string(), "domain".to_string()];
        header.extend(Feature::ALL.iter().map(|f| f.name().to_string()));
        header.extend(Feature::ALL.iter().map(|f| format!("mask_{}", f.name())));
        w.write_record(&header)?;
        for ((id, d), r) in self.ids.iter().zip(&self.domains).zip(&self.rows) {
            let mut rec = vec![id.clone(), d.name().to_string()];
            rec.extend(r.values.iter().zip(&r.mask).map(|(&v, &ok)| if ok { g12(v) } else { "nan".into() }));
            rec.extend(r.mask.iter().map(|m| m.to_string()));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    pub fn read_csv(input: impl Read) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let headers = r.headers()?.clone();
        if headers.len() != 2 + 2 * NUM_FEATURES
            || Feature::ALL.iter().enumerate().any(|(j, f)| &headers[2 + j] != f.name())
        {
            return Err(Error::invalid("feature CSV header does not match the descriptor layout"));
        }
        let mut out = FeatureMatrix {
            ids: Vec::new(),
            domains: Vec::new(),
            rows: Vec::new(),
        };
        for (i, rec) in r.records().enumerate() {
            let rec = rec?;
            let line = i + 2;
            let bad = |msg: String| Error::Parse { line, msg };
            out.ids.push(rec[0].to_string());
            out.domains.push(rec[1].parse().map_err(|e: Error| bad(e.to_string()))?);
            let mut fv = FeatureVector::empty();
            for j in 0..NUM_FEATURES {
                let mask: bool = rec[2 + NUM_FEATURES + j]
                    .parse()
                    .map_err(|_| bad(format!("bad mask `{}`", &rec[2 + NUM_FEATURES + j])))?;
                if mask {
                    let v: f64 = rec[2 + j]
                        .parse()
                        .map_err(|_| bad(format!("bad value `{}`", &rec[2 + j])))?;
                    fv.values[j] = v;
                    fv.mask[j] = true;
                }
            }
            out.rows.push(fv);
        }
        Ok(out)
    }
}

/// Median by sorting (mean of the middle pair for even lengths).
pub fn median(vals: &[f64]) -> Option<f64> {
    if vals.is_empty() {
        return None;
    }
    let mut v = vals.to_vec();
    v.sort_by(f64::total_cmp);
    let k = v.len();
    Some(if k % 2 == 1 { v[k / 2] } else { 0.5 * (v[k / 2 - 1] + v[k / 2]) })
}

/// Neumaier-compensated sum in iteration order.
pub fn compensated_sum(xs: impl IntoIterator<Item = f64>) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for x in xs {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Population mean and standard deviation of a column.
pub fn mean_std(col: &[f64]) -> (f64, f64) {
    let n = col.len() as f64;
    let mean = compensated_sum(col.iter().copied()) / n;
    let var = compensated_sum(col.iter().map(|x| (x - mean) * (x - mean))) / n;
    (mean, var.sqrt())
}

/// Columns whose population std falls below this are treated as constant.
pub const CONSTANT_STD: f64 = 1e-12;

/// Fitted imputation and z-score parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub medians: [f64; NUM_FEATURES],
    pub mean: [f64; NUM_FEATURES],
    pub std: [f64; NUM_FEATURES],
    /// Column had no computed entry; imputed with 0.
    pub all_missing: [bool; NUM_FEATURES],
    /// Column had (near-)zero variance; standardised to all zeros.
    pub constant: [bool; NUM_FEATURES],
}

impl Standardization {
    /// Identity parameters (median 0, mean 0, std 1).
    pub fn identity() -> Self {
        Standardization {
            medians: [0.0; NUM_FEATURES],
            mean: [0.0; NUM_FEATURES],
            std: [1.0; NUM_FEATURES],
            all_missing: [false; NUM_FEATURES],
            constant: [false; NUM_FEATURES],
        }
    }

    /// Applies the stored imputation and z-score without refitting.
    pub fn apply(&self, v: &FeatureVector) -> [f64; NUM_FEATURES] {
        std::array::from_fn(|j| {
            if self.constant[j] {
                return 0.0;
            }
            let x = if v.mask[j] { v.values[j] } else { self.medians[j] };
            (x - self.mean[j]) / self.std[j]
        })
    }
}

#[derive(Debug, Clone)]
pub struct StandardizedMatrix {
    pub z: Vec<[f64; NUM_FEATURES]>,
    pub params: Standardization,
}

pub fn standardize(matrix: &FeatureMatrix) -> Result<StandardizedMatrix> {
    if matrix.len() < 2 {
        return Err(Error::invalid("standardization needs at least two rows"));
    }
    let med = matrix.medians();
    let imputed = matrix.imputed();
    let mut params = Standardization::identity();
    for j in 0..NUM_FEATURES {
        params.all_missing[j] = med[j].is_none();
        params.medians[j] = med[j].unwrap_or(0.0);
        let col: Vec<f64> = imputed.iter().map(|r| r[j]).collect();
        let (mu, sd) = mean_std(&col);
        params.mean[j] = mu;
        if sd < CONSTANT_STD {
            params.constant[j] = true;
        } else {
            params.std[j] = sd;
        }
    }
    let z = matrix.rows.iter().map(|r| params.apply(r)).collect();
    Ok(StandardizedMatrix { z, params })
}

/// Applies fitted parameters to one held-out vector.
pub fn apply_standardization(params: &Standardization, v: &FeatureVector) -> [f64; NUM_FEATURES] {
    params.apply(v)
}
