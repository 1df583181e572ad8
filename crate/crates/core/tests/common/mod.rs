//! Independent oracles shared by the integration and acceptance tests.
#![allow(dead_code)]

use cellgraph::grand::{grand_loss, mlp_forward, ConsistencyGrad, MlpParams};
use ndarray::Array2;

/// Dense `Â^k` power-sum propagation.
pub fn dense_propagate(a: &Array2<f64>, x: &Array2<f64>, k: usize) -> Array2<f64> {
    let n = a.nrows();
    let mut power = Array2::<f64>::eye(n);
    let mut sum = Array2::<f64>::zeros((n, n));
    for _ in 0..=k {
        sum += &power;
        power = power.dot(a);
    }
    (sum / (k as f64 + 1.0)).dot(x)
}

/// Largest relative discrepancy between the analytic gradient and central
/// differences of the full loss (consistency target differentiated).
/// Entries where both magnitudes are below `floor` are compared absolutely.
#[allow(clippy::too_many_arguments)]
pub fn gradient_check(
    params: &MlpParams,
    inputs: &[Array2<f64>],
    labels: &[usize],
    train: &[usize],
    lambda: f64,
    t: f64,
    eps: f64,
    floor: f64,
) -> f64 {
    let (_, grad) =
        cellgraph::grand::loss_and_gradient(params, inputs, labels, train, lambda, t, ConsistencyGrad::Full).unwrap();
    let loss = |p: &MlpParams| {
        let outs: Vec<Array2<f64>> = inputs.iter().map(|x| mlp_forward(p, x)).collect();
        grand_loss(&outs, labels, train, lambda, t).unwrap().total
    };
    let mut worst = 0.0f64;
    let analytic: Vec<f64> = grad.blocks().iter().flat_map(|b| b.iter().copied()).collect();
    let mut k = 0;
    for b in 0..4 {
        let len = params.blocks()[b].len();
        for e in 0..len {
            let mut plus = params.clone();
            plus.blocks_mut()[b][e] += eps;
            let mut minus = params.clone();
            minus.blocks_mut()[b][e] -= eps;
            let numeric = (loss(&plus) - loss(&minus)) / (2.0 * eps);
            let a = analytic[k];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(floor);
            worst = worst.max(rel);
            k += 1;
        }
    }
    worst
}

/// A random `size × size` cell: each pixel is in the cell with probability
/// `fill`, bins uniform in `0..levels`. At least one pixel is kept.
pub fn random_region(g: &mut impl rand::Rng, size: usize, levels: usize, fill: f64) -> Vec<Vec<Option<u16>>> {
    let mut rows: Vec<Vec<Option<u16>>> = (0..size)
        .map(|_| (0..size).map(|_| g.random_bool(fill).then(|| g.random_range(0..levels) as u16)).collect())
        .collect();
    if rows.iter().flatten().all(Option::is_none) {
        rows[0][0] = Some(0);
    }
    rows
}

fn cell_at(rows: &[Vec<Option<u16>>], r: isize, c: isize) -> Option<u16> {
    if r < 0 || c < 0 {
        return None;
    }
    rows.get(r as usize).and_then(|row| row.get(c as usize)).copied().flatten()
}

fn positions(rows: &[Vec<Option<u16>>]) -> Vec<(isize, isize, u16)> {
    let mut out = Vec::new();
    for (r, row) in rows.iter().enumerate() {
        for (c, v) in row.iter().enumerate() {
            if let Some(b) = v {
                out.push((r as isize, c as isize, *b));
            }
        }
    }
    out
}

/// Co-occurrence counts by testing every ordered pair of cell pixels against
/// every offset.
pub fn glcm_oracle(rows: &[Vec<Option<u16>>], levels: usize, offsets: &[(isize, isize)], symmetric: bool) -> Vec<u64> {
    let px = positions(rows);
    let mut counts = vec![0u64; levels * levels];
    for &(r1, c1, a) in &px {
        for &(r2, c2, b) in &px {
            for &(dr, dc) in offsets {
                if r2 - r1 == dr && c2 - c1 == dc {
                    counts[a as usize * levels + b as usize] += 1;
                    if symmetric {
                        counts[b as usize * levels + a as usize] += 1;
                    }
                }
            }
        }
    }
    counts
}

/// Runs as `(gray, length)` found by testing every (start, direction,
/// length) triple for a maximal constant segment inside the cell.
pub fn glrlm_oracle(rows: &[Vec<Option<u16>>], directions: &[(isize, isize)]) -> Vec<(u16, usize)> {
    let size = rows.len().max(rows.iter().map(Vec::len).max().unwrap_or(0));
    let mut runs = Vec::new();
    for &(dr, dc) in directions {
        for &(r, c, g) in &positions(rows) {
            for len in 1..=size {
                let inside = (0..len as isize).all(|k| cell_at(rows, r + k * dr, c + k * dc) == Some(g));
                let open_start = cell_at(rows, r - dr, c - dc) != Some(g);
                let open_end = cell_at(rows, r + len as isize * dr, c + len as isize * dc) != Some(g);
                if inside && open_start && open_end {
                    runs.push((g, len));
                }
            }
        }
    }
    runs
}

/// `[contrast, correlation, asm, idm, entropy]` from raw counts.
pub fn glcm_features_oracle(counts: &[u64], levels: usize) -> [f64; 5] {
    let total: u64 = counts.iter().sum();
    let p: Vec<f64> = counts.iter().map(|&c| c as f64 / total as f64).collect();
    let entries: Vec<(f64, f64, f64)> = (0..levels * levels)
        .filter(|&k| p[k] > 0.0)
        .map(|k| ((k / levels) as f64, (k % levels) as f64, p[k]))
        .collect();
    let contrast = entries.iter().map(|&(i, j, v)| v * (i - j) * (i - j)).sum();
    let asm = entries.iter().map(|&(_, _, v)| v * v).sum();
    let idm = entries.iter().map(|&(i, j, v)| v / (1.0 + (i - j) * (i - j))).sum();
    let entropy = -entries.iter().map(|&(_, _, v)| v * v.ln()).sum::<f64>() / std::f64::consts::LN_2;
    let mi: f64 = entries.iter().map(|&(i, _, v)| i * v).sum();
    let mj: f64 = entries.iter().map(|&(_, j, v)| j * v).sum();
    let vi: f64 = entries.iter().map(|&(i, _, v)| (i - mi) * (i - mi) * v).sum();
    let vj: f64 = entries.iter().map(|&(_, j, v)| (j - mj) * (j - mj) * v).sum();
    let cov: f64 = entries.iter().map(|&(i, j, v)| (i - mi) * (j - mj) * v).sum();
    let correlation = if vi.sqrt() < 1e-12 || vj.sqrt() < 1e-12 { 0.0 } else { cov / (vi * vj).sqrt() };
    [contrast, correlation, asm, idm, entropy]
}

/// `[sre, lre, gln, rln, rp]` from a run list.
pub fn glrlm_features_oracle(runs: &[(u16, usize)], n_pixels: usize) -> [f64; 5] {
    use std::collections::BTreeMap;
    let nr = runs.len() as f64;
    let sre = runs.iter().map(|&(_, l)| 1.0 / (l * l) as f64).sum::<f64>() / nr;
    let lre = runs.iter().map(|&(_, l)| (l * l) as f64).sum::<f64>() / nr;
    let mut by_gray: BTreeMap<u16, f64> = BTreeMap::new();
    let mut by_len: BTreeMap<usize, f64> = BTreeMap::new();
    for &(g, l) in runs {
        *by_gray.entry(g).or_default() += 1.0;
        *by_len.entry(l).or_default() += 1.0;
    }
    let gln = by_gray.values().map(|v| v * v).sum::<f64>() / nr;
    let rln = by_len.values().map(|v| v * v).sum::<f64>() / nr;
    [sre, lre, gln, rln, nr / n_pixels as f64]
}

/// `|a - b| <= tol · max(|a|, |b|, 1)`.
pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

/// `clusters` isotropic unit Gaussians in `dim` dimensions with centres
/// `separation` apart along distinct axes; rows are grouped by cluster.
pub fn gaussian_clusters(
    clusters: usize,
    per_cluster: usize,
    dim: usize,
    separation: f64,
    seed: u64,
) -> (Array2<f64>, Vec<usize>) {
    use rand_distr::{Distribution, StandardNormal};
    let mut g = cellgraph::rng::from_seed(seed);
    let n = clusters * per_cluster;
    let labels: Vec<usize> = (0..n).map(|i| i / per_cluster).collect();
    let x = Array2::from_shape_fn((n, dim), |(i, j)| {
        let z: f64 = StandardNormal.sample(&mut g);
        z + if j == labels[i] { separation } else { 0.0 }
    });
    (x, labels)
}

/// A grid small enough to run all 32 cells in seconds.
pub fn tiny_experiment(seed: u64) -> cellgraph::harness::ExperimentConfig {
    use cellgraph::baselines::{BoostConfig, ForestConfig};
    use cellgraph::dimred::ReduceConfig;
    use cellgraph::grand::GrandConfig;
    use cellgraph::synth::SynthConfig;
    cellgraph::harness::ExperimentConfig {
        synth: Some(SynthConfig {
            n_samples: 3,
            n_melanoma: 2,
            image_size: 96,
            n_channels: 4,
            cells_per_sample: 36,
            seed,
            ..Default::default()
        }),
        reduction: ReduceConfig {
            dim: 4,
            perplexity: 8.0,
            tsne_iters: 300,
            n_neighbors: 8,
            umap_epochs: 100,
            ..Default::default()
        },
        grand: GrandConfig { max_epochs: 40, patience: 20, ..Default::default() },
        forest: ForestConfig { n_trees: 15, ..Default::default() },
        boost: BoostConfig { n_rounds: 20, ..Default::default() },
        seed,
        ..Default::default()
    }
}
