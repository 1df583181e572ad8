use ndarray::ArrayView2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::check_training_data;
use super::tree::{grow, Gini, Presorted, Tree, TreeParams};
use crate::{par, rng, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Features tried per split; `None` means `ceil(sqrt(p))`.
    pub features_per_split: Option<usize>,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self { n_trees: 100, max_depth: 8, min_leaf: 2, features_per_split: None, bootstrap: true, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RandomForest {
    pub n_features: usize,
    pub config: ForestConfig,
    pub trees: Vec<Tree>,
}

impl RandomForest {
    /// Mean over trees of the leaf's tumor frequency.
    pub fn predict_positive(&self, x: ArrayView2<f64>) -> Vec<f64> {
        x.rows()
            .into_iter()
            .map(|row| {
                let row = row.to_vec();
                self.trees.iter().map(|t| t.leaf_value(&row)[1]).sum::<f64>() / self.trees.len() as f64
            })
            .collect()
    }
}

/// A single Gini CART on all rows and all features.
pub fn train_cart(x: ArrayView2<f64>, y: &[usize], max_depth: usize, min_leaf: usize) -> Result<Tree> {
    check_training_data(x, y)?;
    let params = TreeParams { max_depth, min_leaf: min_leaf as f64, max_features: None };
    Ok(grow(x, &Presorted::new(x), &vec![1.0; y.len()], &Gini { y, classes: 2 }, params, None))
}

/// Each tree sees a bootstrap sample (as per-row multiplicities) and a random
/// feature subset at every split, from its own stream derived from the seed.
pub fn train_random_forest(x: ArrayView2<f64>, y: &[usize], cfg: &ForestConfig) -> Result<RandomForest> {
    check_training_data(x, y)?;
    if cfg.n_trees == 0 || cfg.max_depth == 0 || cfg.min_leaf == 0 || cfg.features_per_split == Some(0) {
        return Err(Error::invalid("forest counts must be positive"));
    }
    let (n, p) = x.dim();
    let max_features = cfg.features_per_split.unwrap_or((p as f64).sqrt().ceil() as usize).min(p);
    let params =
        TreeParams { max_depth: cfg.max_depth, min_leaf: cfg.min_leaf as f64, max_features: Some(max_features) };
    let crit = Gini { y, classes: 2 };
    let sorted = Presorted::new(x);
    let trees = par::map_range(cfg.n_trees, |t| {
        let mut g = rng::stream(cfg.seed, t as u64);
        let mut weights = vec![if cfg.bootstrap { 0.0 } else { 1.0 }; n];
        if cfg.bootstrap {
            for _ in 0..n {
                weights[g.random_range(0..n)] += 1.0;
            }
        }
        grow(x, &sorted, &weights, &crit, params, Some(&mut g))
    });
    Ok(RandomForest { n_features: p, config: cfg.clone(), trees })
}
