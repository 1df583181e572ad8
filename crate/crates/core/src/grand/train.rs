use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::ops::{
    apply_drop_node, drop_node_mask, grand_loss, mlp_forward, propagate, sharpen, softmax_rows, LossParts, MlpParams,
};
use super::{GrandConfig, GrandModel};
use crate::graph::NormAdj;
use crate::metrics::Confusion;
use crate::{par, rng, Error, Result};

/// How the consistency term treats its sharpened target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConsistencyGrad {
    /// The sharpened average is a constant target (stop-gradient).
    #[default]
    Detached,
    /// Gradients also flow through the sharpened average.
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: LossParts,
    pub val_loss: f64,
    pub val_f1: f64,
}

struct Cache {
    h: Array2<f64>,
    p: Array2<f64>,
}

fn forward_cached(params: &MlpParams, x: &Array2<f64>) -> Cache {
    let h = (x.dot(&params.w1) + &params.b1).mapv(|v| v.max(0.0));
    let mut p = h.dot(&params.w2) + &params.b2;
    softmax_rows(&mut p);
    Cache { h, p }
}

/// Loss and analytic gradient for already augmented inputs (one matrix per
/// augmentation).
pub fn loss_and_gradient(
    params: &MlpParams,
    inputs: &[Array2<f64>],
    labels: &[usize],
    train: &[usize],
    lambda: f64,
    temperature: f64,
    mode: ConsistencyGrad,
) -> Result<(LossParts, MlpParams)> {
    let caches = par::map_slice(inputs, |x| forward_cached(params, x));
    let outputs: Vec<Array2<f64>> = caches.iter().map(|c| c.p.clone()).collect();
    let loss = grand_loss(&outputs, labels, train, lambda, temperature)?;

    let s = inputs.len() as f64;
    let (n, c) = outputs[0].dim();
    let mean = outputs.iter().fold(Array2::zeros((n, c)), |a, p| a + p) / s;
    let mut target = Array2::zeros((n, c));
    for (i, row) in mean.axis_iter(Axis(0)).enumerate() {
        let q = sharpen(row.as_slice().expect("contiguous"), temperature);
        target.row_mut(i).assign(&Array1::from(q));
    }
    let scale = lambda * 2.0 / (n as f64 * s);

    // Gradient reaching the mean through the sharpened target, shared by all
    // augmentations.
    let through_target = match mode {
        ConsistencyGrad::Detached => None,
        ConsistencyGrad::Full => {
            let mut g_q = Array2::<f64>::zeros((n, c));
            for p in &outputs {
                g_q = g_q + (&target - p) * scale;
            }
            let mut g_mean = Array2::zeros((n, c));
            for i in 0..n {
                let dot: f64 = (0..c).map(|j| g_q[[i, j]] * target[[i, j]]).sum();
                for m in 0..c {
                    g_mean[[i, m]] = target[[i, m]] * (g_q[[i, m]] - dot) / (temperature * mean[[i, m]]);
                }
            }
            Some(g_mean / s)
        }
    };

    let grads = par::map_range(inputs.len(), |k| {
        let Cache { h, p } = &caches[k];
        let mut g_p = (p - &target) * scale;
        if let Some(extra) = &through_target {
            g_p += extra;
        }
        let mut dz2 = Array2::zeros((n, c));
        for i in 0..n {
            let dot: f64 = (0..c).map(|j| g_p[[i, j]] * p[[i, j]]).sum();
            for j in 0..c {
                dz2[[i, j]] = p[[i, j]] * (g_p[[i, j]] - dot);
            }
        }
        let ce_scale = 1.0 / (s * train.len() as f64);
        for &i in train {
            for j in 0..c {
                let onehot = if j == labels[i] { 1.0 } else { 0.0 };
                dz2[[i, j]] += (p[[i, j]] - onehot) * ce_scale;
            }
        }
        let w2 = h.t().dot(&dz2);
        let b2 = dz2.sum_axis(Axis(0));
        let mut dz1 = dz2.dot(&params.w2.t());
        dz1.zip_mut_with(h, |d, &hv| {
            if hv <= 0.0 {
                *d = 0.0;
            }
        });
        let w1 = inputs[k].t().dot(&dz1);
        let b1 = dz1.sum_axis(Axis(0));
        MlpParams { w1, b1, w2, b2 }
    });
    let (inp, hid, cls) = params.dims();
    let mut total = MlpParams::zeros(inp, hid, cls);
    for g in grads {
        total.w1 += &g.w1;
        total.b1 += &g.b1;
        total.w2 += &g.w2;
        total.b2 += &g.b2;
    }
    Ok((loss, total))
}

struct Adam {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: i32,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(p: &MlpParams) -> Self {
        let zeros: Vec<Vec<f64>> = p.blocks().iter().map(|b| vec![0.0; b.len()]).collect();
        Self { m: zeros.clone(), v: zeros, t: 0 }
    }

    fn step(&mut self, params: &mut MlpParams, grads: &MlpParams, lr: f64, weight_decay: f64) {
        self.t += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.t);
        let c2 = 1.0 - Self::BETA2.powi(self.t);
        for (b, (p, g)) in params.blocks_mut().into_iter().zip(grads.blocks()).enumerate() {
            for k in 0..p.len() {
                let gk = g[k] + weight_decay * p[k];
                self.m[b][k] = Self::BETA1 * self.m[b][k] + (1.0 - Self::BETA1) * gk;
                self.v[b][k] = Self::BETA2 * self.v[b][k] + (1.0 - Self::BETA2) * gk * gk;
                p[k] -= lr * (self.m[b][k] / c1) / ((self.v[b][k] / c2).sqrt() + Self::EPS);
            }
        }
    }
}

/// Random draws for one epoch: a DropNode mask and an input-dropout mask per
/// augmentation, taken in that order from the training stream.
fn draw_epoch(n: usize, p: usize, cfg: &GrandConfig, g: &mut rng::Rng) -> Vec<(Vec<bool>, Vec<bool>)> {
    (0..cfg.n_augmentations)
        .map(|_| {
            let nodes = if cfg.drop_rate > 0.0 { drop_node_mask(n, cfg.drop_rate, g) } else { vec![true; n] };
            let inputs = if cfg.input_dropout > 0.0 {
                (0..n * p).map(|_| g.random::<f64>() >= cfg.input_dropout).collect()
            } else {
                vec![true; n * p]
            };
            (nodes, inputs)
        })
        .collect()
}

pub(crate) fn argmax(row: ndarray::ArrayView1<f64>) -> usize {
    let mut best = 0;
    for (j, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = j;
        }
    }
    best
}

/// F1 of class 1 for binary problems, macro F1 otherwise.
fn selection_f1(truth: &[usize], pred: &[usize], classes: usize) -> f64 {
    if classes == 2 {
        return Confusion::from_predictions(truth, pred).f1();
    }
    let per_class = (0..classes).map(|c| {
        let t: Vec<usize> = truth.iter().map(|&v| usize::from(v == c)).collect();
        let p: Vec<usize> = pred.iter().map(|&v| usize::from(v == c)).collect();
        Confusion::from_predictions(&t, &p).f1()
    });
    per_class.sum::<f64>() / classes as f64
}

/// Semi-supervised training on the whole graph. `labels` must be valid for
/// every index in `train` and `val`; other entries are ignored. When `val` is
/// empty the training nodes drive model selection.
pub fn train_grand(
    adj: &NormAdj,
    x: &Array2<f64>,
    labels: &[usize],
    train: &[usize],
    val: &[usize],
    cfg: &GrandConfig,
) -> Result<GrandModel> {
    cfg.check()?;
    let (n, p) = x.dim();
    if adj.n != n || labels.len() != n {
        return Err(Error::DimensionMismatch {
            context: "grand training inputs".into(),
            expected: n,
            found: if adj.n != n { adj.n } else { labels.len() },
        });
    }
    if train.is_empty() {
        return Err(Error::invalid("grand needs at least one labeled training node"));
    }
    let mut seen = vec![false; n];
    for &i in train.iter().chain(val) {
        if i >= n || seen[i] {
            return Err(Error::invalid(format!(
                "training and validation masks overlap or exceed the graph at node {i}"
            )));
        }
        seen[i] = true;
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("grand input features contain non-finite values"));
    }
    let classes = train.iter().chain(val).map(|&i| labels[i] + 1).max().unwrap_or(0).max(2);
    let selection: &[usize] = if val.is_empty() { train } else { val };
    let selection_truth: Vec<usize> = selection.iter().map(|&i| labels[i]).collect();

    let mut g = rng::from_seed(cfg.seed);
    let mut params = MlpParams::glorot(p, cfg.hidden_dim, classes, &mut g);
    let mut adam = Adam::new(&params);
    let eval_x = propagate(adj, x, cfg.prop_order);
    let keep_scale = 1.0 / (1.0 - cfg.input_dropout);

    let mut history = Vec::new();
    let mut best = (params.clone(), 0usize, f64::NEG_INFINITY, f64::INFINITY);
    let mut stale = 0usize;
    for epoch in 0..cfg.max_epochs {
        let draws = draw_epoch(n, p, cfg, &mut g);
        let inputs = par::map_slice(&draws, |(nodes, feats)| {
            let dropped = if cfg.drop_rate > 0.0 { apply_drop_node(x, nodes, cfg.drop_rate) } else { x.clone() };
            let mut prop = propagate(adj, &dropped, cfg.prop_order);
            if cfg.input_dropout > 0.0 {
                for (v, &k) in prop.iter_mut().zip(feats) {
                    *v = if k { *v * keep_scale } else { 0.0 };
                }
            }
            prop
        });
        let (loss, grads) = loss_and_gradient(
            &params,
            &inputs,
            labels,
            train,
            cfg.consistency_weight,
            cfg.temperature,
            cfg.consistency_grad,
        )?;
        if !loss.total.is_finite() {
            return Err(Error::Divergence { epoch });
        }
        adam.step(&mut params, &grads, cfg.learning_rate, cfg.weight_decay);
        if !params.is_finite() {
            return Err(Error::Divergence { epoch });
        }

        let probs = mlp_forward(&params, &eval_x);
        let val_loss = selection.iter().map(|&i| -probs[[i, labels[i]]].max(f64::MIN_POSITIVE).ln()).sum::<f64>()
            / selection.len() as f64;
        let pred: Vec<usize> = selection.iter().map(|&i| argmax(probs.row(i))).collect();
        let val_f1 = selection_f1(&selection_truth, &pred, classes);
        history.push(EpochRecord { epoch, loss, val_loss, val_f1 });

        if val_f1 > best.2 || (val_f1 == best.2 && val_loss < best.3) {
            best = (params.clone(), epoch, val_f1, val_loss);
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                break;
            }
        }
    }
    Ok(GrandModel { params: best.0, best_epoch: best.1, history, config: cfg.clone() })
}
