//! Dimensionality reduction: PCA, exact tSNE and UMAP.

mod pca;
mod tsne;
mod umap;

use std::collections::BTreeMap;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::{par, Error, Result};

pub use pca::{pca, Pca};
pub use tsne::{conditional_probabilities, joint_probabilities, tsne, TsneResult};
pub use umap::{find_ab_params, fuzzy_membership, symmetrize, umap, FuzzyGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    #[default]
    None,
    Pca,
    Tsne,
    Umap,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::None, Method::Pca, Method::Tsne, Method::Umap];

    pub fn name(self) -> &'static str {
        match self {
            Method::None => "none",
            Method::Pca => "pca",
            Method::Tsne => "tsne",
            Method::Umap => "umap",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name() == s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub data: Array2<f64>,
    pub method: Method,
    pub params: BTreeMap<String, f64>,
}

impl Embedding {
    pub fn dim(&self) -> usize {
        self.data.ncols()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReduceConfig {
    pub method: Method,
    pub dim: usize,
    pub perplexity: f64,
    pub tsne_iters: usize,
    pub n_neighbors: usize,
    pub min_dist: f64,
    pub umap_epochs: usize,
    pub seed: u64,
}

impl Default for ReduceConfig {
    fn default() -> Self {
        Self {
            method: Method::None,
            dim: 16,
            perplexity: 30.0,
            tsne_iters: 1000,
            n_neighbors: 15,
            min_dist: 0.1,
            umap_epochs: 200,
            seed: 0,
        }
    }
}

/// Applies the configured reduction. `Method::None` returns the input as is.
pub fn reduce(x: ArrayView2<f64>, cfg: &ReduceConfig) -> Result<Embedding> {
    match cfg.method {
        Method::None => {
            check_finite(x)?;
            Ok(Embedding { data: x.to_owned(), method: Method::None, params: BTreeMap::new() })
        }
        Method::Pca => Ok(pca(x, cfg.dim)?.embedding),
        Method::Tsne => Ok(tsne(x, cfg.dim, cfg.perplexity, cfg.tsne_iters, cfg.seed)?.embedding),
        Method::Umap => umap(x, cfg.dim, cfg.n_neighbors, cfg.min_dist, cfg.umap_epochs, cfg.seed),
    }
}

pub(crate) fn check_finite(x: ArrayView2<f64>) -> Result<()> {
    match x.indexed_iter().find(|(_, v)| !v.is_finite()) {
        Some(((r, c), v)) => Err(Error::invalid(format!("non-finite input value {v} at row {r}, column {c}"))),
        None => Ok(()),
    }
}

/// Dense matrix of squared Euclidean distances.
pub(crate) fn squared_distances(x: ArrayView2<f64>) -> Array2<f64> {
    let n = x.nrows();
    let rows = par::map_range(n, |i| {
        let xi = x.row(i);
        (0..n).map(|j| xi.iter().zip(x.row(j)).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()).collect::<Vec<f64>>()
    });
    Array2::from_shape_vec((n, n), rows.concat()).expect("square")
}

/// Fraction of each point's `k` nearest embedding neighbours that share its
/// label, averaged over points.
pub fn knn_purity(y: ArrayView2<f64>, labels: &[usize], k: usize) -> f64 {
    let n = y.nrows();
    assert_eq!(labels.len(), n);
    let idx: Vec<usize> = (0..n).collect();
    let lists = crate::graph::knn_with_distances(k, &idx, |i, j| {
        y.row(i).iter().zip(y.row(j)).map(|(a, b)| (a - b) * (a - b)).sum()
    });
    let mut hits = 0usize;
    let mut total = 0usize;
    for (i, l) in lists.iter().enumerate() {
        hits += l.iter().filter(|&&(_, j)| labels[j] == labels[i]).count();
        total += l.len();
    }
    hits as f64 / total.max(1) as f64
}
