//! Cell graphs: feature-similarity kNN, within-sample spatial kNN, and the
//! symmetric normalized propagation operator `D^-1/2 (A + I) D^-1/2`.

use std::collections::BTreeMap;
use std::path::Path;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::dataset::{CellTable, ClassLabel};
use crate::{par, Error, Result};

/// Neighbourhood size fixed by the reference graph budget (202,500 edges over
/// 40,500 nodes).
pub const DEFAULT_K: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeKey {
    pub sample_id: String,
    pub cell_id: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub src: usize,
    pub dst: usize,
    pub weight: f64,
}

/// Directed weighted graph over cells. `nodes` maps node index to cell and may
/// be empty for anonymous graphs.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CellGraph {
    pub n_nodes: usize,
    pub edges: Vec<Edge>,
    pub nodes: Vec<NodeKey>,
}

impl CellGraph {
    pub fn new(n_nodes: usize, edges: Vec<Edge>) -> Result<Self> {
        for e in &edges {
            if e.src >= n_nodes || e.dst >= n_nodes {
                return Err(Error::invalid(format!("edge {}->{} outside {n_nodes} nodes", e.src, e.dst)));
            }
            if e.src == e.dst {
                return Err(Error::invalid(format!("self-loop at node {}", e.src)));
            }
            if !(e.weight > 0.0 && e.weight.is_finite()) {
                return Err(Error::invalid(format!("edge {}->{} has weight {}", e.src, e.dst, e.weight)));
            }
        }
        Ok(Self { n_nodes, edges, nodes: Vec::new() })
    }

    pub fn out_degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.n_nodes];
        for e in &self.edges {
            d[e.src] += 1;
        }
        d
    }

    /// Text form: `# nodes N` header, then one `src dst weight` per line.
    pub fn to_edge_list(&self) -> String {
        let mut s = format!("# nodes {}\n", self.n_nodes);
        for e in &self.edges {
            s.push_str(&format!("{} {} {}\n", e.src, e.dst, e.weight));
        }
        s
    }

    pub fn from_edge_list(text: &str, path: &Path) -> Result<Self> {
        let bad = |message: String| Error::Malformed { sample_id: None, path: path.to_path_buf(), message };
        let mut lines = text.lines();
        let header = lines.next().unwrap_or_default();
        let n_nodes = header
            .strip_prefix("# nodes ")
            .and_then(|n| n.trim().parse::<usize>().ok())
            .ok_or_else(|| bad(format!("expected '# nodes N' header, found {header:?}")))?;
        let mut edges = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parts: Vec<&str> = line.split_whitespace().collect();
            let parsed = (parts.len() == 3)
                .then(|| Some((parts[0].parse().ok()?, parts[1].parse().ok()?, parts[2].parse().ok()?)))
                .flatten();
            let (src, dst, weight) = parsed.ok_or_else(|| bad(format!("line {}: {line:?}", i + 2)))?;
            edges.push(Edge { src, dst, weight });
        }
        CellGraph::new(n_nodes, edges).map_err(|e| bad(e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    #[default]
    Euclidean,
    Cosine,
}

/// Indices of the `k` nearest candidates to every query, nearest first.
/// Equal distances keep the lower index first; NaN sorts last.
fn knn_lists<D>(k: usize, candidates: &[usize], dist: D) -> Vec<Vec<usize>>
where
    D: Fn(usize, usize) -> f64 + Sync + Send,
{
    knn_with_distances(k, candidates, dist).into_iter().map(|l| l.into_iter().map(|(_, j)| j).collect()).collect()
}

/// The `k` nearest candidates of every candidate as `(distance, index)`,
/// ascending; ties go to the lower index and NaN distances sort last.
pub(crate) fn knn_with_distances<D>(k: usize, candidates: &[usize], dist: D) -> Vec<Vec<(f64, usize)>>
where
    D: Fn(usize, usize) -> f64 + Sync + Send,
{
    par::map_slice(candidates, |&i| {
        let mut best: Vec<(f64, usize)> = Vec::with_capacity(k + 1);
        for &j in candidates {
            if j == i {
                continue;
            }
            let mut d = dist(i, j);
            if d.is_nan() {
                d = f64::INFINITY;
            }
            if best.len() == k && d >= best[k - 1].0 {
                continue;
            }
            let pos = best.partition_point(|&(bd, _)| bd <= d);
            best.insert(pos, (d, j));
            best.truncate(k);
        }
        best
    })
}

/// Directed kNN graph with unit weights; `min(k, n - 1)` out-edges per node.
pub fn knn_feature_graph(x: ArrayView2<f64>, k: usize, metric: Metric) -> Result<CellGraph> {
    let n = x.nrows();
    if n == 0 || x.ncols() == 0 {
        return Err(Error::invalid("feature matrix is empty"));
    }
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    let k = k.min(n - 1);
    let all: Vec<usize> = (0..n).collect();
    let lists = match metric {
        Metric::Euclidean => {
            knn_lists(k, &all, |i, j| x.row(i).iter().zip(x.row(j)).map(|(a, b)| (a - b) * (a - b)).sum())
        }
        Metric::Cosine => {
            let norms: Vec<f64> = x.rows().into_iter().map(|r| r.dot(&r).sqrt()).collect();
            knn_lists(k, &all, |i, j| {
                let denom = norms[i] * norms[j];
                if denom == 0.0 {
                    1.0
                } else {
                    1.0 - x.row(i).dot(&x.row(j)) / denom
                }
            })
        }
    };
    let edges = lists_to_edges(&all, lists);
    CellGraph::new(n, edges)
}

fn lists_to_edges(sources: &[usize], lists: Vec<Vec<usize>>) -> Vec<Edge> {
    sources
        .iter()
        .zip(lists)
        .flat_map(|(&src, l)| l.into_iter().map(move |dst| Edge { src, dst, weight: 1.0 }))
        .collect()
}

/// kNN on 2-D centroids restricted to each sample. Samples with fewer than two
/// cells contribute no edges and produce a warning.
pub fn spatial_knn_graph(centroids: &[(f64, f64)], sample_ids: &[&str], k: usize) -> Result<(CellGraph, Vec<String>)> {
    if centroids.len() != sample_ids.len() {
        return Err(Error::DimensionMismatch {
            context: "centroids vs sample ids".into(),
            expected: centroids.len(),
            found: sample_ids.len(),
        });
    }
    if centroids.is_empty() {
        return Err(Error::invalid("no cells"));
    }
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, s) in sample_ids.iter().enumerate() {
        groups.entry(s).or_default().push(i);
    }
    let mut warnings = Vec::new();
    let mut edges = Vec::new();
    for (sample, members) in groups {
        if members.len() < 2 {
            warnings.push(format!("sample {sample} has {} cell(s); no spatial edges", members.len()));
            continue;
        }
        let kk = k.min(members.len() - 1);
        let lists = knn_lists(kk, &members, |i, j| {
            let (a, b) = (centroids[i], centroids[j]);
            (a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)
        });
        edges.extend(lists_to_edges(&members, lists));
    }
    edges.sort_by_key(|e| (e.src, e.dst));
    Ok((CellGraph::new(centroids.len(), edges)?, warnings))
}

/// Symmetric normalized adjacency with self-loops, in CSR layout.
#[derive(Debug, Clone, PartialEq)]
pub struct NormAdj {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl NormAdj {
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|&(c, _)| c == j).map_or(0.0, |(_, v)| v)
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut m = Array2::zeros((self.n, self.n));
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                m[[i, j]] = v;
            }
        }
        m
    }

    /// `self * x` for a dense `n x f` matrix.
    pub fn matmul(&self, x: &Array2<f64>) -> Array2<f64> {
        assert_eq!(x.nrows(), self.n, "operator and matrix disagree on node count");
        let f = x.ncols();
        let rows = par::map_range(self.n, |i| {
            let mut out = vec![0.0; f];
            for (j, v) in self.row(i) {
                for (o, xv) in out.iter_mut().zip(x.row(j)) {
                    *o += v * xv;
                }
            }
            out
        });
        let flat: Vec<f64> = rows.into_iter().flatten().collect();
        Array2::from_shape_vec((self.n, f), flat).expect("shape")
    }
}

/// Symmetrizes the edge set (max weight per pair), adds unit self-loops, and
/// scales entry `(i, j)` by `1 / sqrt(d_i d_j)` with `d` the row sums.
pub fn normalize_adjacency(g: &CellGraph) -> NormAdj {
    let mut triplets: Vec<(usize, usize, f64)> = Vec::with_capacity(2 * g.edges.len() + g.n_nodes);
    for e in &g.edges {
        if e.src == e.dst {
            continue;
        }
        triplets.push((e.src, e.dst, e.weight));
        triplets.push((e.dst, e.src, e.weight));
    }
    for i in 0..g.n_nodes {
        triplets.push((i, i, 1.0));
    }
    triplets.sort_by_key(|t| (t.0, t.1));
    let mut merged: Vec<(usize, usize, f64)> = Vec::with_capacity(triplets.len());
    for t in triplets {
        match merged.last_mut() {
            Some(last) if (last.0, last.1) == (t.0, t.1) => last.2 = last.2.max(t.2),
            _ => merged.push(t),
        }
    }
    let mut degree = vec![0.0; g.n_nodes];
    for &(i, _, w) in &merged {
        degree[i] += w;
    }
    let mut row_ptr = vec![0usize; g.n_nodes + 1];
    for &(i, _, _) in &merged {
        row_ptr[i + 1] += 1;
    }
    for i in 0..g.n_nodes {
        row_ptr[i + 1] += row_ptr[i];
    }
    let col_idx = merged.iter().map(|t| t.1).collect();
    let values = merged.iter().map(|&(i, j, w)| w / (degree[i] * degree[j]).sqrt()).collect();
    NormAdj { n: g.n_nodes, row_ptr, col_idx, values }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphKind {
    /// Global kNN over node features.
    Feature(Metric),
    /// kNN over centroids within each sample.
    Spatial,
}

/// Pooled cells ready for transductive training, in `(sample_id, cell_id)`
/// order.
#[derive(Debug, Clone)]
pub struct TrainingGraph {
    pub graph: CellGraph,
    pub features: Array2<f64>,
    pub labels: Vec<ClassLabel>,
    pub warnings: Vec<String>,
}

pub fn assemble_training_graph(tables: &[CellTable], kind: GraphKind, k: usize) -> Result<TrainingGraph> {
    let pooled = CellTable::concat(tables)?;
    if pooled.is_empty() {
        return Err(Error::invalid("no cells to assemble"));
    }
    let features = pooled.matrix();
    let (mut graph, warnings) = match kind {
        GraphKind::Feature(metric) => (knn_feature_graph(features.view(), k, metric)?, Vec::new()),
        GraphKind::Spatial => spatial_knn_graph(&pooled.centroids(), &pooled.sample_ids(), k)?,
    };
    graph.nodes = pooled.rows.iter().map(|r| NodeKey { sample_id: r.sample_id.clone(), cell_id: r.cell_id }).collect();
    Ok(TrainingGraph { graph, labels: pooled.labels(), features, warnings })
}
