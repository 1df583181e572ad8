use std::collections::BTreeMap;

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array1, Array2, ArrayView2};

use super::{check_finite, Embedding, Method};
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct Pca {
    pub embedding: Embedding,
    /// `d × p`, one unit-length component per row.
    pub components: Array2<f64>,
    pub mean: Array1<f64>,
    pub explained_variance_ratio: Vec<f64>,
}

impl Pca {
    /// Maps the embedding back to the input space.
    pub fn reconstruct(&self) -> Array2<f64> {
        self.embedding.data.dot(&self.components) + &self.mean
    }
}

/// Projection onto the top `d` eigenvectors of the sample covariance. Each
/// component's largest-magnitude entry is made positive so the result does not
/// depend on the eigensolver's sign choice.
pub fn pca(x: ArrayView2<f64>, d: usize) -> Result<Pca> {
    let (n, p) = x.dim();
    if n < 2 {
        return Err(Error::invalid("pca needs at least 2 rows"));
    }
    if d == 0 || d > n.min(p) {
        return Err(Error::invalid(format!("pca dimension {d} outside 1..={}", n.min(p))));
    }
    check_finite(x)?;
    let mean = x.mean_axis(ndarray::Axis(0)).expect("n >= 2");
    let centered = &x - &mean;
    let cov = centered.t().dot(&centered) / (n as f64 - 1.0);
    let eig = SymmetricEigen::new(DMatrix::from_fn(p, p, |i, j| cov[[i, j]]));

    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let total: f64 = eig.eigenvalues.iter().map(|v| v.max(0.0)).sum();

    let mut components = Array2::zeros((d, p));
    let mut ratio = Vec::with_capacity(d);
    for (r, &k) in order.iter().take(d).enumerate() {
        let v = eig.eigenvectors.column(k);
        let pivot = (0..p).max_by(|&a, &b| v[a].abs().total_cmp(&v[b].abs()).then(b.cmp(&a))).unwrap();
        let sign = if v[pivot] < 0.0 { -1.0 } else { 1.0 };
        for c in 0..p {
            components[[r, c]] = sign * v[c];
        }
        ratio.push(if total > 0.0 { eig.eigenvalues[k].max(0.0) / total } else { 0.0 });
    }
    let data = centered.dot(&components.t());
    let mut params = BTreeMap::new();
    params.insert("dim".to_string(), d as f64);
    Ok(Pca {
        embedding: Embedding { data, method: Method::Pca, params },
        components,
        mean,
        explained_variance_ratio: ratio,
    })
}
