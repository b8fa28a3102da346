//! k-NN Gaussian-kernel affinity graphs and power iteration clustering.
//!
//! The graph stores, for every vertex, the kernel weights
//! `exp(-‖x_i - x_j‖² / σ²)` to its `k` nearest neighbours. Power iteration
//! repeatedly applies `s ← L1(α (G + Gᵀ) s + (1 - α) s)` from the uniform
//! vector; clusters are the weakly connected components of the directed
//! graph where each vertex points to the neighbour maximising
//! `e_ij (s_j - s_i)`. Vertices with no positive gain are roots.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffinityGraph {
    /// Row `i` lists `(j, e_ij)` for the nearest neighbours of `i`, nearest
    /// first. Weights that underflow to zero are not stored.
    pub rows: Vec<Vec<(usize, f64)>>,
    pub neighbor_count: usize,
    pub bandwidth: f64,
}

impl AffinityGraph {
    pub fn size(&self) -> usize {
        self.rows.len()
    }

    /// `e_ij`, zero when `j` is not a stored neighbour of `i`.
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.rows[i]
            .iter()
            .find(|&&(n, _)| n == j)
            .map_or(0.0, |&(_, w)| w)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    /// Disjoint, non-empty index sets covering `0..n`. Members are sorted and
    /// clusters are ordered by their smallest member.
    pub clusters: Vec<Vec<usize>>,
    pub iterations_used: usize,
}

impl ClusterAssignment {
    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterParams {
    pub k: usize,
    pub sigma: f64,
    pub alpha: f64,
    pub tol: f64,
    pub max_iters: usize,
    /// Scale every feature vector to unit L2 norm before building the graph,
    /// which keeps distances comparable to the kernel bandwidth.
    #[serde(default)]
    pub normalize: bool,
}

impl Default for ClusterParams {
    fn default() -> Self {
        Self {
            k: 10,
            sigma: 0.5,
            alpha: 0.001,
            tol: 1e-6,
            max_iters: 200,
            normalize: false,
        }
    }
}

fn l2_normalized(v: &[f64]) -> Vec<f64> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter().map(|x| x / norm).collect()
    } else {
        v.to_vec()
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Builds the sparse k-NN kernel graph. Effective `k` is `min(k, n - 1)`;
/// neighbour ties are broken by lower index.
pub fn build_affinity_graph<F: AsRef<[f64]>>(features: &[F], k: usize, sigma: f64) -> Result<AffinityGraph> {
    if features.is_empty() {
        return Err(Error::InvalidInput("no features to cluster".into()));
    }
    if k == 0 || !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidInput(format!("need k >= 1 and sigma > 0, got k={k}, sigma={sigma}")));
    }
    let dim = features[0].as_ref().len();
    for (i, f) in features.iter().enumerate() {
        let f = f.as_ref();
        if f.len() != dim {
            return Err(Error::Shape(format!("feature {i} has dim {}, expected {dim}", f.len())));
        }
        if f.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("feature {i} has a non-finite value")));
        }
    }
    let n = features.len();
    let k_eff = k.min(n - 1);
    let s2 = sigma * sigma;
    let rows = (0..n)
        .map(|i| {
            let xi = features[i].as_ref();
            let mut cand: Vec<(f64, usize)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| (sq_dist(xi, features[j].as_ref()), j))
                .collect();
            cand.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            cand.truncate(k_eff);
            cand.into_iter()
                .map(|(d2, j)| (j, (-d2 / s2).exp()))
                .filter(|&(_, w)| w > 0.0)
                .collect()
        })
        .collect();
    Ok(AffinityGraph {
        rows,
        neighbor_count: k_eff,
        bandwidth: sigma,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct PowerIteration {
    pub s: Vec<f64>,
    pub iterations: usize,
}

/// Iterates `s ← L1(α (G + Gᵀ) s + (1 - α) s)` from the uniform vector until
/// the L1 change drops below `tol` or `max_iters` updates have run.
pub fn power_iteration_vector(graph: &AffinityGraph, alpha: f64, tol: f64, max_iters: usize) -> PowerIteration {
    let n = graph.size();
    let mut s = vec![1.0 / n as f64; n];
    let mut iterations = 0;
    let mut y = vec![0.0; n];
    while iterations < max_iters {
        y.iter_mut().for_each(|v| *v = 0.0);
        for (i, row) in graph.rows.iter().enumerate() {
            for &(j, w) in row {
                y[i] += w * s[j];
                y[j] += w * s[i];
            }
        }
        for (yi, si) in y.iter_mut().zip(&s) {
            *yi = alpha * *yi + (1.0 - alpha) * si;
        }
        let norm: f64 = y.iter().map(|v| v.abs()).sum();
        let change: f64 = y.iter().zip(&s).map(|(a, b)| (a / norm - b).abs()).sum();
        for (si, yi) in s.iter_mut().zip(&y) {
            *si = yi / norm;
        }
        iterations += 1;
        if change < tol {
            break;
        }
    }
    PowerIteration { s, iterations }
}

struct DisjointSet {
    parent: Vec<usize>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        Self { parent: (0..n).collect() }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Out-edge of vertex `i` in the directed cluster graph, if any: the stored
/// neighbour with the largest positive `e_ij (s_j - s_i)`, lowest index on
/// ties.
pub fn cluster_edge(graph: &AffinityGraph, s: &[f64], i: usize) -> Option<usize> {
    let mut best: Option<(f64, usize)> = None;
    for &(j, w) in &graph.rows[i] {
        let gain = w * (s[j] - s[i]);
        if gain <= 0.0 {
            continue;
        }
        match best {
            Some((g, b)) if g > gain || (g == gain && b < j) => {}
            _ => best = Some((gain, j)),
        }
    }
    best.map(|(_, j)| j)
}

/// Weakly connected components of the argmax graph. Roots (local maxima)
/// that are k-NN neighbours with exactly equal `s` are merged, so a flat
/// plateau, including the fully degenerate all-equal case, forms one
/// cluster per connected region instead of singletons.
pub fn extract_clusters(graph: &AffinityGraph, s: &[f64]) -> Result<ClusterAssignment> {
    let n = graph.size();
    if s.len() != n {
        return Err(Error::Shape(format!("score vector has {} entries for {n} vertices", s.len())));
    }
    let mut dsu = DisjointSet::new(n);
    let edges: Vec<Option<usize>> = (0..n).map(|i| cluster_edge(graph, s, i)).collect();
    for (i, e) in edges.iter().enumerate() {
        if let Some(j) = *e {
            dsu.union(i, j);
        }
    }
    for i in (0..n).filter(|&i| edges[i].is_none()) {
        for &(j, _) in &graph.rows[i] {
            if edges[j].is_none() && s[j] == s[i] {
                dsu.union(i, j);
            }
        }
    }
    let mut by_root: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        let r = dsu.find(i);
        by_root[r].push(i);
    }
    let clusters = by_root.into_iter().filter(|c| !c.is_empty()).collect();
    Ok(ClusterAssignment {
        clusters,
        iterations_used: 0,
    })
}

/// Graph construction, power iteration and component extraction in one call.
pub fn cluster_with<F: AsRef<[f64]>>(features: &[F], params: &ClusterParams) -> Result<ClusterAssignment> {
    let graph = if params.normalize {
        let unit: Vec<Vec<f64>> = features.iter().map(|f| l2_normalized(f.as_ref())).collect();
        build_affinity_graph(&unit, params.k, params.sigma)?
    } else {
        build_affinity_graph(features, params.k, params.sigma)?
    };
    let pi = power_iteration_vector(&graph, params.alpha, params.tol, params.max_iters);
    let mut assignment = extract_clusters(&graph, &pi.s)?;
    assignment.iterations_used = pi.iterations;
    Ok(assignment)
}

/// [`cluster_with`] using `k = 10`, `σ = 0.5`, `α = 0.001`.
pub fn cluster_class<F: AsRef<[f64]>>(features: &[F]) -> Result<ClusterAssignment> {
    cluster_with(features, &ClusterParams::default())
}
