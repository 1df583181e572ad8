use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use super::check_training_data;
use super::tree::{grow, Newton, Presorted, Tree, TreeParams};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoostConfig {
    pub n_rounds: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub min_leaf: usize,
    /// Kept for configuration symmetry; training draws no random numbers.
    pub seed: u64,
}

impl Default for BoostConfig {
    fn default() -> Self {
        Self { n_rounds: 200, max_depth: 3, learning_rate: 0.1, min_leaf: 2, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientBoosting {
    pub n_features: usize,
    pub config: BoostConfig,
    /// Log-odds of the training prior.
    pub base_score: f64,
    pub trees: Vec<Tree>,
    /// Mean training log-loss before the first round and after each round.
    pub loss_history: Vec<f64>,
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn log_loss(y: &[usize], score: &[f64]) -> f64 {
    // ln(1 + e^z) - y·z, written to stay finite for large |z|.
    let total: f64 = y.iter().zip(score).map(|(&t, &z)| z.max(0.0) + (-z.abs()).exp().ln_1p() - t as f64 * z).sum();
    total / y.len() as f64
}

impl GradientBoosting {
    pub fn decision(&self, row: &[f64]) -> f64 {
        self.base_score + self.trees.iter().map(|t| t.leaf_value(row)[0]).sum::<f64>()
    }

    pub fn predict_positive(&self, x: ArrayView2<f64>) -> Vec<f64> {
        x.rows().into_iter().map(|r| sigmoid(self.decision(&r.to_vec()))).collect()
    }
}

/// Additive log-odds model. Each round fits a depth-limited regression tree to
/// the negative logistic gradient and sets leaves to the shrunken Newton step.
pub fn train_gradient_boosting(x: ArrayView2<f64>, y: &[usize], cfg: &BoostConfig) -> Result<GradientBoosting> {
    check_training_data(x, y)?;
    if cfg.n_rounds == 0 || cfg.max_depth == 0 || cfg.min_leaf == 0 {
        return Err(Error::invalid("boosting counts must be positive"));
    }
    if !(cfg.learning_rate > 0.0 && cfg.learning_rate <= 1.0) {
        return Err(Error::invalid("boosting learning rate must lie in (0, 1]"));
    }
    let n = y.len();
    let prior = y.iter().sum::<usize>() as f64 / n as f64;
    let base_score = (prior / (1.0 - prior)).ln();
    let mut score = vec![base_score; n];
    let mut loss_history = vec![log_loss(y, &score)];
    let params = TreeParams { max_depth: cfg.max_depth, min_leaf: cfg.min_leaf as f64, max_features: None };
    let ones = vec![1.0; n];
    let sorted = Presorted::new(x);
    let mut trees = Vec::with_capacity(cfg.n_rounds);
    for _ in 0..cfg.n_rounds {
        let p: Vec<f64> = score.iter().map(|&z| sigmoid(z)).collect();
        let grad: Vec<f64> = p.iter().zip(y).map(|(&pi, &t)| pi - t as f64).collect();
        let hess: Vec<f64> = p.iter().map(|&pi| pi * (1.0 - pi)).collect();
        let target: Vec<f64> = grad.iter().map(|g| -g).collect();
        let crit = Newton { target: &target, grad: &grad, hess: &hess, learning_rate: cfg.learning_rate };
        let tree = grow(x, &sorted, &ones, &crit, params, None);
        for (i, row) in x.rows().into_iter().enumerate() {
            score[i] += tree.leaf_value(&row.to_vec())[0];
        }
        loss_history.push(log_loss(y, &score));
        trees.push(tree);
    }
    Ok(GradientBoosting { n_features: x.ncols(), config: cfg.clone(), base_score, trees, loss_history })
}
