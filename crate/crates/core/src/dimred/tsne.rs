use std::collections::BTreeMap;

use ndarray::{Array2, ArrayView2};
use rand_distr::{Distribution, StandardNormal};

use super::{check_finite, pca, squared_distances, Embedding, Method};
use crate::{par, rng, Error, Result};

const EXAGGERATION: f64 = 12.0;
const EXAGGERATION_ITERS: usize = 250;
const INIT_STD: f64 = 1e-4;
const MIN_GAIN: f64 = 0.01;
const PERPLEXITY_TOL: f64 = 1e-3;
const ENTROPY_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct TsneResult {
    pub embedding: Embedding,
    /// KL(P‖Q) at the start of every iteration, then at the final layout.
    pub kl_history: Vec<f64>,
    /// Realized perplexity of each conditional distribution.
    pub perplexities: Vec<f64>,
}

/// Row-conditional affinities `p_{j|i}` with each row's Gaussian bandwidth
/// chosen by bisection so that its perplexity matches `perplexity`.
/// Returns the matrix and the realized perplexity of every row.
pub fn conditional_probabilities(d2: &Array2<f64>, perplexity: f64) -> Result<(Array2<f64>, Vec<f64>)> {
    let n = d2.nrows();
    let target = perplexity.log2();
    let rows = par::map_range(n, |i| {
        let dmin = (0..n).filter(|&j| j != i).map(|j| d2[[i, j]]).fold(f64::INFINITY, f64::min);
        let row: Vec<f64> = (0..n).map(|j| if j == i { f64::INFINITY } else { d2[[i, j]] - dmin }).collect();
        // Entropy in bits from ln Z + β·E[d], avoiding a log per entry.
        let entropy = |beta: f64| {
            let (mut z, mut m) = (0.0, 0.0);
            for &d in row.iter().filter(|d| d.is_finite()) {
                let w = (-beta * d).exp();
                z += w;
                m += w * d;
            }
            (z.ln() + beta * m / z) / std::f64::consts::LN_2
        };
        let (mut beta, mut lo, mut hi) = (1.0, 0.0, f64::INFINITY);
        let mut h = entropy(beta);
        for _ in 0..200 {
            if (h - target).abs() < ENTROPY_TOL {
                break;
            }
            if h > target {
                lo = beta;
                beta = if hi.is_finite() { 0.5 * (lo + hi) } else { beta * 2.0 };
            } else {
                hi = beta;
                beta = 0.5 * (lo + hi);
            }
            h = entropy(beta);
        }
        let mut p: Vec<f64> = row.iter().map(|&d| (-beta * d).exp()).collect();
        let z: f64 = p.iter().sum();
        p.iter_mut().for_each(|v| *v /= z);
        let h: f64 = -p.iter().filter(|&&v| v > 0.0).map(|&v| v * v.log2()).sum::<f64>();
        (p, h.exp2())
    });
    let mut out = Array2::zeros((n, n));
    let mut perp = Vec::with_capacity(n);
    for (i, (p, realized)) in rows.into_iter().enumerate() {
        if (realized - perplexity).abs() > PERPLEXITY_TOL {
            return Err(Error::invalid(format!(
                "perplexity {perplexity} infeasible for point {i} (reached {realized:.6})"
            )));
        }
        out.row_mut(i).assign(&ndarray::Array1::from(p));
        perp.push(realized);
    }
    Ok((out, perp))
}

/// Symmetrized joint affinities `(P + Pᵀ) / 2n`.
pub fn joint_probabilities(cond: &Array2<f64>) -> Array2<f64> {
    let n = cond.nrows() as f64;
    Array2::from_shape_fn(cond.dim(), |(i, j)| (cond[[i, j]] + cond[[j, i]]) / (2.0 * n))
}

/// Exact tSNE by gradient descent with momentum and per-coordinate gains.
pub fn tsne(x: ArrayView2<f64>, d: usize, perplexity: f64, n_iters: usize, seed: u64) -> Result<TsneResult> {
    let n = x.nrows();
    if n < 4 {
        return Err(Error::invalid("tsne needs at least 4 points"));
    }
    if d == 0 {
        return Err(Error::invalid("tsne dimension must be at least 1"));
    }
    if !(perplexity >= 1.0 && perplexity < n as f64 / 3.0) {
        return Err(Error::invalid(format!("perplexity {perplexity} outside [1, n/3) for n = {n}")));
    }
    check_finite(x)?;
    let (cond, perplexities) = conditional_probabilities(&squared_distances(x), perplexity)?;
    let p = Affinities::new(joint_probabilities(&cond));

    let mut y = initial_layout(x, d, seed);
    let mut update = vec![0.0; n * d];
    let mut gains = vec![1.0f64; n * d];
    let learning_rate = (n as f64 / EXAGGERATION / 4.0).max(50.0);
    let mut kl_history = Vec::with_capacity(n_iters + 1);
    for it in 0..n_iters {
        let exaggeration = if it < EXAGGERATION_ITERS { EXAGGERATION } else { 1.0 };
        let momentum = if it < EXAGGERATION_ITERS { 0.5 } else { 0.8 };
        let (grad, kl) = gradient(&p, &y, d, exaggeration);
        kl_history.push(kl);
        for k in 0..n * d {
            gains[k] = if (grad[k] > 0.0) != (update[k] > 0.0) { gains[k] + 0.2 } else { gains[k] * 0.8 };
            gains[k] = gains[k].max(MIN_GAIN);
            update[k] = momentum * update[k] - learning_rate * gains[k] * grad[k];
            y[k] += update[k];
        }
        for c in 0..d {
            let mean = (0..n).map(|i| y[i * d + c]).sum::<f64>() / n as f64;
            for i in 0..n {
                y[i * d + c] -= mean;
            }
        }
    }
    kl_history.push(gradient(&p, &y, d, 1.0).1);

    let mut params = BTreeMap::new();
    params.insert("dim".to_string(), d as f64);
    params.insert("perplexity".to_string(), perplexity);
    params.insert("n_iters".to_string(), n_iters as f64);
    Ok(TsneResult {
        embedding: Embedding { data: Array2::from_shape_vec((n, d), y).expect("shape"), method: Method::Tsne, params },
        kl_history,
        perplexities,
    })
}

/// PCA layout rescaled so the first coordinate has standard deviation 1e-4.
/// Falls back to seeded Gaussian noise when PCA is unavailable or degenerate.
fn initial_layout(x: ArrayView2<f64>, d: usize, seed: u64) -> Vec<f64> {
    let n = x.nrows();
    if d <= x.ncols() {
        if let Ok(r) = pca(x, d) {
            let col = r.embedding.data.column(0);
            let mean = col.sum() / n as f64;
            let std = (col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64).sqrt();
            if std > 0.0 {
                return r.embedding.data.iter().map(|v| v * INIT_STD / std).collect();
            }
        }
    }
    let mut g = rng::from_seed(seed);
    (0..n * d)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut g);
            INIT_STD * z
        })
        .collect()
}

/// Joint affinities plus the sparse support used for the logged KL.
///
/// Entries below `KL_SUPPORT_MIN` are left out of the objective; their total
/// contribution is bounded by n²·1e-15·|ln q| and the gradient stays exact.
struct Affinities {
    p: Array2<f64>,
    support: Vec<Vec<(usize, f64)>>,
    support_mass: f64,
    neg_entropy: f64,
}

const KL_SUPPORT_MIN: f64 = 1e-15;

impl Affinities {
    fn new(p: Array2<f64>) -> Self {
        let support: Vec<Vec<(usize, f64)>> = p
            .rows()
            .into_iter()
            .enumerate()
            .map(|(i, row)| {
                row.iter().enumerate().filter(|&(j, &v)| j != i && v > KL_SUPPORT_MIN).map(|(j, &v)| (j, v)).collect()
            })
            .collect();
        let support_mass = support.iter().flatten().map(|e| e.1).sum();
        let neg_entropy = support.iter().flatten().map(|&(_, v)| v * v.ln()).sum();
        Affinities { p, support, support_mass, neg_entropy }
    }
}

/// Gradient of KL(exaggeration·P ‖ Q) and the KL divergence of the
/// unexaggerated P at `y`, both accumulated in row order.
fn gradient(aff: &Affinities, y: &[f64], d: usize, exaggeration: f64) -> (Vec<f64>, f64) {
    let p = &aff.p;
    let n = p.nrows();
    let kernels = par::map_range(n, |i| {
        let yi = &y[i * d..(i + 1) * d];
        let row: Vec<f64> = y
            .chunks_exact(d)
            .enumerate()
            .map(|(j, yj)| {
                if j == i {
                    return 0.0;
                }
                let d2: f64 = yi.iter().zip(yj).map(|(a, b)| (a - b) * (a - b)).sum();
                1.0 / (1.0 + d2)
            })
            .collect();
        let sum: f64 = row.iter().sum();
        (row, sum)
    });
    let z: f64 = kernels.iter().map(|r| r.1).sum();
    let pdata = p.as_slice().expect("standard layout");
    let rows = par::map_range(n, |i| {
        let yi = &y[i * d..(i + 1) * d];
        let prow = &pdata[i * n..(i + 1) * n];
        let mut g = vec![0.0; d];
        for ((yj, &num), &pij) in y.chunks_exact(d).zip(&kernels[i].0).zip(prow) {
            // the diagonal has num = 0 and contributes nothing
            let f = 4.0 * (exaggeration * pij - num / z) * num;
            for ((gc, a), b) in g.iter_mut().zip(yi).zip(yj) {
                *gc += f * (a - b);
            }
        }
        // Σ p·ln q over the support, with ln q = ln num - ln z
        let cross: f64 = aff.support[i].iter().map(|&(j, v)| v * kernels[i].0[j].max(f64::MIN_POSITIVE).ln()).sum();
        (g, cross)
    });
    let mut grad = Vec::with_capacity(n * d);
    let mut cross = 0.0;
    for (g, c) in rows {
        grad.extend(g);
        cross += c;
    }
    (grad, aff.neg_entropy - cross + aff.support_mass * z.ln())
}
