use std::collections::BTreeMap;

use ndarray::{Array2, ArrayView2};
use rand::Rng;

use super::{check_finite, pca, Embedding, Method};
use crate::graph::knn_with_distances;
use crate::{rng, Error, Result};

const NEGATIVE_SAMPLE_RATE: f64 = 5.0;
const INITIAL_ALPHA: f64 = 1.0;
const INIT_EXTENT: f64 = 10.0;
const GRAD_CLIP: f64 = 4.0;
const SIGMA_TOL: f64 = 1e-5;
const MIN_SIGMA_SCALE: f64 = 1e-3;

/// Sparse fuzzy membership graph; `rows[i]` lists `(j, weight)` by ascending `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct FuzzyGraph {
    pub rows: Vec<Vec<(usize, f64)>>,
    pub rhos: Vec<f64>,
    pub sigmas: Vec<f64>,
}

impl FuzzyGraph {
    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.rows[i].iter().find(|&&(c, _)| c == j).map_or(0.0, |&(_, w)| w)
    }
}

/// Directed memberships `exp(-max(0, d_ij - rho_i) / sigma_i)` over each
/// point's `k` nearest neighbours (self excluded). `sigma_i` is found by
/// bisection so that the memberships of row `i` sum to `log2(k)`.
pub fn fuzzy_membership(x: ArrayView2<f64>, k: usize) -> Result<FuzzyGraph> {
    let n = x.nrows();
    if k == 0 || k >= n {
        return Err(Error::invalid(format!("n_neighbors {k} outside 1..{n}")));
    }
    check_finite(x)?;
    let idx: Vec<usize> = (0..n).collect();
    let knn = knn_with_distances(k, &idx, |i, j| {
        x.row(i).iter().zip(x.row(j)).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
    });
    let global_mean = knn.iter().flatten().map(|&(d, _)| d).sum::<f64>() / (n * k) as f64;
    let target = (k as f64).log2();

    let mut rows = Vec::with_capacity(n);
    let mut rhos = Vec::with_capacity(n);
    let mut sigmas = Vec::with_capacity(n);
    for list in &knn {
        let rho = list.iter().map(|&(d, _)| d).find(|&d| d > 0.0).unwrap_or(0.0);
        let psum = |sigma: f64| list.iter().map(|&(d, _)| (-(d - rho).max(0.0) / sigma).exp()).sum::<f64>();
        let (mut lo, mut hi, mut sigma) = (0.0, f64::INFINITY, 1.0);
        for _ in 0..64 {
            let s = psum(sigma);
            if (s - target).abs() < SIGMA_TOL {
                break;
            }
            if s > target {
                hi = sigma;
                sigma = 0.5 * (lo + hi);
            } else {
                lo = sigma;
                sigma = if hi.is_finite() { 0.5 * (lo + hi) } else { sigma * 2.0 };
            }
        }
        let local_mean = list.iter().map(|&(d, _)| d).sum::<f64>() / k as f64;
        let floor = MIN_SIGMA_SCALE * if rho > 0.0 { local_mean } else { global_mean };
        sigma = sigma.max(floor);
        let mut row: Vec<(usize, f64)> =
            list.iter().map(|&(d, j)| (j, (-(d - rho).max(0.0) / sigma).exp())).filter(|&(_, w)| w > 0.0).collect();
        row.sort_by_key(|&(j, _)| j);
        rows.push(row);
        rhos.push(rho);
        sigmas.push(sigma);
    }
    Ok(FuzzyGraph { rows, rhos, sigmas })
}

/// Fuzzy union `a + b - a·b` of the graph and its transpose.
pub fn symmetrize(g: &FuzzyGraph) -> FuzzyGraph {
    let n = g.n();
    let mut maps: Vec<BTreeMap<usize, (f64, f64)>> = vec![BTreeMap::new(); n];
    for (i, row) in g.rows.iter().enumerate() {
        for &(j, w) in row {
            maps[i].entry(j).or_insert((0.0, 0.0)).0 = w;
            maps[j].entry(i).or_insert((0.0, 0.0)).1 = w;
        }
    }
    let rows = maps.into_iter().map(|m| m.into_iter().map(|(j, (a, b))| (j, a + b - a * b)).collect()).collect();
    FuzzyGraph { rows, rhos: g.rhos.clone(), sigmas: g.sigmas.clone() }
}

/// Least-squares fit of `1 / (1 + a·x^(2b))` to the offset exponential
/// defined by `min_dist` and `spread`, by Levenberg-Marquardt.
pub fn find_ab_params(spread: f64, min_dist: f64) -> (f64, f64) {
    let xs: Vec<f64> = (0..300).map(|i| 3.0 * spread * i as f64 / 299.0).collect();
    let ys: Vec<f64> = xs.iter().map(|&x| if x < min_dist { 1.0 } else { (-(x - min_dist) / spread).exp() }).collect();
    let sse = |a: f64, b: f64| {
        xs.iter().zip(&ys).map(|(&x, &y)| (y - 1.0 / (1.0 + a * x.powf(2.0 * b))).powi(2)).sum::<f64>()
    };
    let (mut a, mut b) = (1.0, 1.0);
    let mut cost = sse(a, b);
    let mut lambda = 1e-3;
    for _ in 0..500 {
        let (mut jtj, mut jtr) = ([[0.0; 2]; 2], [0.0; 2]);
        for (&x, &y) in xs.iter().zip(&ys) {
            if x == 0.0 {
                continue;
            }
            let u = x.powf(2.0 * b);
            let den = (1.0 + a * u).powi(2);
            let j = [-u / den, -a * u * 2.0 * x.ln() / den];
            let r = y - 1.0 / (1.0 + a * u);
            for p in 0..2 {
                jtr[p] += j[p] * r;
                for q in 0..2 {
                    jtj[p][q] += j[p] * j[q];
                }
            }
        }
        let m = [[jtj[0][0] * (1.0 + lambda), jtj[0][1]], [jtj[1][0], jtj[1][1] * (1.0 + lambda)]];
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        if det == 0.0 {
            break;
        }
        let da = (m[1][1] * jtr[0] - m[0][1] * jtr[1]) / det;
        let db = (m[0][0] * jtr[1] - m[1][0] * jtr[0]) / det;
        let trial = sse(a + da, b + db);
        if trial < cost {
            a += da;
            b += db;
            let done = (cost - trial) < 1e-15 * cost.max(1e-300);
            cost = trial;
            lambda = (lambda / 10.0).max(1e-12);
            if done {
                break;
            }
        } else {
            lambda *= 10.0;
            if lambda > 1e12 {
                break;
            }
        }
    }
    (a, b)
}

/// UMAP embedding. The layout is initialized from PCA (scaled to a maximum
/// absolute coordinate of 10) and refined by negative-sampling SGD on the
/// fuzzy cross-entropy.
pub fn umap(
    x: ArrayView2<f64>,
    d: usize,
    n_neighbors: usize,
    min_dist: f64,
    n_epochs: usize,
    seed: u64,
) -> Result<Embedding> {
    let n = x.nrows();
    if n_neighbors < 2 || n_neighbors >= n {
        return Err(Error::invalid(format!("n_neighbors {n_neighbors} outside 2..{n}")));
    }
    if d == 0 {
        return Err(Error::invalid("umap dimension must be at least 1"));
    }
    if !(min_dist >= 0.0) {
        return Err(Error::invalid("min_dist must be non-negative"));
    }
    check_finite(x)?;
    if (1..n).all(|i| x.row(i) == x.row(0)) {
        return Err(Error::invalid("umap input rows are all identical"));
    }
    let graph = symmetrize(&fuzzy_membership(x, n_neighbors)?);
    let (a, b) = find_ab_params(1.0, min_dist);
    let mut g = rng::from_seed(seed);
    let mut y = initial_layout(x, d, &mut g)?;

    let max_w = graph.rows.iter().flatten().map(|&(_, w)| w).fold(0.0, f64::max);
    let mut edges = Vec::new();
    for (i, row) in graph.rows.iter().enumerate() {
        for &(j, w) in row {
            if n_epochs == 0 || w >= max_w / n_epochs as f64 {
                edges.push((i, j, max_w / w));
            }
        }
    }
    let mut next_sample: Vec<f64> = edges.iter().map(|e| e.2).collect();
    let mut next_negative: Vec<f64> = edges.iter().map(|e| e.2 / NEGATIVE_SAMPLE_RATE).collect();

    let clip = |v: f64| v.clamp(-GRAD_CLIP, GRAD_CLIP);
    let dist2 = |y: &[f64], i: usize, j: usize| (0..d).map(|c| (y[i * d + c] - y[j * d + c]).powi(2)).sum::<f64>();
    for epoch in 0..n_epochs {
        let alpha = INITIAL_ALPHA * (1.0 - epoch as f64 / n_epochs as f64);
        let t = epoch as f64 + 1.0;
        for (e, &(i, j, eps)) in edges.iter().enumerate() {
            if next_sample[e] > t {
                continue;
            }
            let d2 = dist2(&y, i, j);
            let coeff = if d2 > 0.0 { -2.0 * a * b * d2.powf(b - 1.0) / (a * d2.powf(b) + 1.0) } else { 0.0 };
            for c in 0..d {
                let step = clip(coeff * (y[i * d + c] - y[j * d + c])) * alpha;
                y[i * d + c] += step;
                y[j * d + c] -= step;
            }
            next_sample[e] += eps;

            let eps_neg = eps / NEGATIVE_SAMPLE_RATE;
            let n_neg = ((t - next_negative[e]) / eps_neg).floor().max(0.0) as usize;
            for _ in 0..n_neg {
                let k = g.random_range(0..n);
                let d2 = dist2(&y, i, k);
                let coeff = if d2 > 0.0 {
                    2.0 * b / ((0.001 + d2) * (a * d2.powf(b) + 1.0))
                } else if i == k {
                    continue;
                } else {
                    0.0
                };
                for c in 0..d {
                    let grad = if coeff > 0.0 { clip(coeff * (y[i * d + c] - y[k * d + c])) } else { GRAD_CLIP };
                    y[i * d + c] += grad * alpha;
                }
            }
            next_negative[e] += n_neg as f64 * eps_neg;
        }
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("umap optimization produced non-finite coordinates"));
    }

    let mut params = BTreeMap::new();
    params.insert("dim".to_string(), d as f64);
    params.insert("n_neighbors".to_string(), n_neighbors as f64);
    params.insert("min_dist".to_string(), min_dist);
    params.insert("n_epochs".to_string(), n_epochs as f64);
    params.insert("a".to_string(), a);
    params.insert("b".to_string(), b);
    Ok(Embedding { data: Array2::from_shape_vec((n, d), y).expect("shape"), method: Method::Umap, params })
}

/// PCA coordinates on the leading columns; columns beyond the data rank are
/// seeded uniform noise. Everything is scaled into `[-10, 10]`.
fn initial_layout(x: ArrayView2<f64>, d: usize, g: &mut rng::Rng) -> Result<Vec<f64>> {
    let (n, p) = x.dim();
    let k = d.min(p).min(n);
    let base = pca(x, k)?.embedding.data;
    let extent = base.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let scale = if extent > 0.0 { INIT_EXTENT / extent } else { 0.0 };
    let mut y = vec![0.0; n * d];
    for i in 0..n {
        for c in 0..d {
            y[i * d + c] = if c < k { base[[i, c]] * scale } else { g.random_range(-INIT_EXTENT..INIT_EXTENT) };
        }
    }
    Ok(y)
}
