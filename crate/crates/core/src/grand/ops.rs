use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::graph::NormAdj;
use crate::{rng, Error, Result};

/// Keep-mask for DropNode: node `i` survives with probability `1 - rate`.
pub fn drop_node_mask(n: usize, rate: f64, g: &mut rng::Rng) -> Vec<bool> {
    (0..n).map(|_| g.random::<f64>() >= rate).collect()
}

/// Zeroes dropped rows and rescales kept rows by `1 / (1 - rate)`.
pub fn apply_drop_node(x: &Array2<f64>, keep: &[bool], rate: f64) -> Array2<f64> {
    assert_eq!(keep.len(), x.nrows());
    let scale = 1.0 / (1.0 - rate);
    let mut out = x.clone();
    for (mut row, &k) in out.rows_mut().into_iter().zip(keep) {
        if k {
            row.mapv_inplace(|v| v * scale);
        } else {
            row.fill(0.0);
        }
    }
    out
}

pub fn drop_node(x: &Array2<f64>, rate: f64, g: &mut rng::Rng) -> Array2<f64> {
    if rate == 0.0 {
        return x.clone();
    }
    let keep = drop_node_mask(x.nrows(), rate, g);
    apply_drop_node(x, &keep, rate)
}

/// Mixed-order propagation `(1/(K+1)) Σ_{k=0..K} Â^k X`, accumulated one
/// sparse product at a time.
pub fn propagate(adj: &NormAdj, x: &Array2<f64>, k: usize) -> Array2<f64> {
    assert_eq!(adj.n, x.nrows(), "adjacency and feature rows disagree");
    let mut acc = x.clone();
    let mut cur = x.clone();
    for _ in 0..k {
        cur = adj.matmul(&cur);
        acc += &cur;
    }
    acc / (k as f64 + 1.0)
}

/// Parameters of the two-layer classifier: `softmax(relu(X·W1 + b1)·W2 + b2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
}

impl MlpParams {
    pub fn zeros(input: usize, hidden: usize, classes: usize) -> Self {
        Self {
            w1: Array2::zeros((input, hidden)),
            b1: Array1::zeros(hidden),
            w2: Array2::zeros((hidden, classes)),
            b2: Array1::zeros(classes),
        }
    }

    /// Glorot-uniform weights, zero biases.
    pub fn glorot(input: usize, hidden: usize, classes: usize, g: &mut rng::Rng) -> Self {
        let mut p = Self::zeros(input, hidden, classes);
        let a1 = (6.0 / (input + hidden) as f64).sqrt();
        p.w1.mapv_inplace(|_| g.random_range(-a1..a1));
        let a2 = (6.0 / (hidden + classes) as f64).sqrt();
        p.w2.mapv_inplace(|_| g.random_range(-a2..a2));
        p
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.w1.nrows(), self.w1.ncols(), self.w2.ncols())
    }

    /// Parameter blocks in serialization order.
    pub fn blocks(&self) -> [&[f64]; 4] {
        [
            self.w1.as_slice().expect("standard layout"),
            self.b1.as_slice().expect("standard layout"),
            self.w2.as_slice().expect("standard layout"),
            self.b2.as_slice().expect("standard layout"),
        ]
    }

    pub fn blocks_mut(&mut self) -> [&mut [f64]; 4] {
        [
            self.w1.as_slice_mut().expect("standard layout"),
            self.b1.as_slice_mut().expect("standard layout"),
            self.w2.as_slice_mut().expect("standard layout"),
            self.b2.as_slice_mut().expect("standard layout"),
        ]
    }

    pub fn n_params(&self) -> usize {
        self.blocks().iter().map(|b| b.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.blocks().iter().all(|b| b.iter().all(|v| v.is_finite()))
    }
}

pub fn softmax_rows(z: &mut Array2<f64>) {
    for mut row in z.rows_mut() {
        let m = row.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - m).exp());
        let s = row.sum();
        row.mapv_inplace(|v| v / s);
    }
}

pub fn mlp_forward(p: &MlpParams, x: &Array2<f64>) -> Array2<f64> {
    let h = (x.dot(&p.w1) + &p.b1).mapv(|v| v.max(0.0));
    let mut z = h.dot(&p.w2) + &p.b2;
    softmax_rows(&mut z);
    z
}

/// Temperature sharpening `p_j^(1/T) / Σ_k p_k^(1/T)`.
pub fn sharpen(p: &[f64], t: f64) -> Vec<f64> {
    let powered: Vec<f64> = p.iter().map(|v| v.powf(1.0 / t)).collect();
    let s: f64 = powered.iter().sum();
    powered.into_iter().map(|v| v / s).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossParts {
    pub total: f64,
    pub supervised: f64,
    pub consistency: f64,
}

/// Averaged cross-entropy on the training nodes plus `lambda` times the mean
/// squared distance between each augmentation's output and the sharpened
/// average output.
pub fn grand_loss(
    outputs: &[Array2<f64>],
    labels: &[usize],
    train: &[usize],
    lambda: f64,
    t: f64,
) -> Result<LossParts> {
    if outputs.is_empty() {
        return Err(Error::invalid("grand loss needs at least one augmentation"));
    }
    if train.is_empty() {
        return Err(Error::invalid("training mask is empty"));
    }
    let s = outputs.len() as f64;
    let n = outputs[0].nrows();
    let mut supervised = 0.0;
    for p in outputs {
        let ce: f64 = train.iter().map(|&i| -p[[i, labels[i]]].ln()).sum();
        supervised += ce / train.len() as f64;
    }
    supervised /= s;

    let mean = outputs.iter().fold(Array2::zeros(outputs[0].dim()), |a, p| a + p) / s;
    let mut consistency = 0.0;
    for (i, row) in mean.axis_iter(Axis(0)).enumerate() {
        let q = sharpen(row.as_slice().expect("contiguous"), t);
        for p in outputs {
            consistency += p.row(i).iter().zip(&q).map(|(a, b)| (b - a) * (b - a)).sum::<f64>() / s;
        }
    }
    consistency /= n as f64;
    Ok(LossParts { total: supervised + lambda * consistency, supervised, consistency })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{normalize_adjacency, CellGraph, Edge};
    use ndarray::array;

    #[test]
    fn drop_node_examples() {
        let x = array![[2.0], [4.0]];
        assert_eq!(apply_drop_node(&x, &[true, false], 0.5), array![[4.0], [0.0]]);
        let mut g = rng::from_seed(0);
        assert_eq!(drop_node(&x, 0.0, &mut g), x);
    }

    #[test]
    fn propagate_two_nodes() {
        let g = CellGraph::new(2, vec![Edge { src: 0, dst: 1, weight: 1.0 }]).unwrap();
        let adj = normalize_adjacency(&g);
        assert!((adj.get(0, 0) - 0.5).abs() < 1e-15 && (adj.get(0, 1) - 0.5).abs() < 1e-15);
        let x = array![[1.0], [0.0]];
        let out = propagate(&adj, &x, 1);
        assert!((out[[0, 0]] - 0.75).abs() < 1e-15 && (out[[1, 0]] - 0.25).abs() < 1e-15);
        assert_eq!(propagate(&adj, &x, 0), x);
    }

    #[test]
    fn softmax_of_zero_model_is_uniform() {
        let p = MlpParams::zeros(3, 4, 2);
        let out = mlp_forward(&p, &Array2::from_elem((5, 3), 1.7));
        assert!(out.iter().all(|&v| v == 0.5));
    }

    #[test]
    fn sharpen_examples() {
        let s = sharpen(&[0.8, 0.2], 0.5);
        assert!((s[0] - 0.64 / 0.68).abs() < 1e-12 && (s[1] - 0.04 / 0.68).abs() < 1e-12);
        assert_eq!(sharpen(&[0.25; 4], 0.3), vec![0.25; 4]);
        let p = [0.3, 0.5, 0.2];
        let q = sharpen(&p, 1.0);
        for (a, b) in p.iter().zip(&q) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn loss_examples() {
        let uniform = Array2::from_elem((3, 2), 0.5);
        let l = grand_loss(&[uniform.clone(), uniform], &[0, 1, 1], &[0, 1], 1.0, 0.5).unwrap();
        assert!((l.supervised - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(l.consistency, 0.0);

        // Two nodes, two augmentations. Node 0: outputs (0.6,0.4) and (0.8,0.2),
        // mean (0.7,0.3), sharpened (0.49,0.09)/0.58. Node 1: outputs
        // (0.5,0.5) twice, sharpened target (0.5,0.5).
        let a = array![[0.6, 0.4], [0.5, 0.5]];
        let b = array![[0.8, 0.2], [0.5, 0.5]];
        let l = grand_loss(&[a, b], &[0, 1], &[0], 2.0, 0.5).unwrap();
        let sup = -(0.6f64.ln() + 0.8f64.ln()) / 2.0;
        let q = (0.49 / 0.58, 0.09 / 0.58);
        let d = |x: f64, y: f64| (q.0 - x).powi(2) + (q.1 - y).powi(2);
        let cons = (d(0.6, 0.4) + d(0.8, 0.2)) / 2.0 / 2.0;
        assert!((l.supervised - sup).abs() < 1e-12);
        assert!((l.consistency - cons).abs() < 1e-12);
        assert!((l.total - (sup + 2.0 * cons)).abs() < 1e-10);
        assert!(grand_loss(&[Array2::from_elem((2, 2), 0.5)], &[0, 0], &[], 1.0, 0.5).is_err());
    }
}
