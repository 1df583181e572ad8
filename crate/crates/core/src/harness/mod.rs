//! Evaluation harness: splits, standardization, metrics, hyperparameter
//! search and the feature × reduction × model experiment grid.

mod experiment;
mod search;
mod split;

use ndarray::{Array2, ArrayView2};

pub use crate::metrics::{compute_metrics, roc_auc, Confusion, Metrics};
pub use experiment::{
    run_experiment, table1_csv, write_experiment, CellDetails, CellReport, CellStatus, ExperimentConfig,
    ExperimentOutput, ExperimentReport, ModelKind, ReduceTarget, SearchSettings,
};
pub use search::{hyperparameter_search, Assignment, Param, SearchResult, SearchSpace, Trial};
pub use split::{case_split, stratified_split, SplitLevel, SplitMasks};

/// Column means and standard deviations over a subset of rows, ignoring NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    /// Population statistics over `rows`; constant or empty columns get
    /// standard deviation 1.
    pub fn fit(x: ArrayView2<f64>, rows: &[usize]) -> Self {
        let p = x.ncols();
        let mut mean = vec![0.0; p];
        let mut std = vec![1.0; p];
        for c in 0..p {
            let vals: Vec<f64> = rows.iter().map(|&r| x[[r, c]]).filter(|v| !v.is_nan()).collect();
            if vals.is_empty() {
                continue;
            }
            let m = vals.iter().sum::<f64>() / vals.len() as f64;
            let var = vals.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / vals.len() as f64;
            mean[c] = m;
            if var > 0.0 {
                std[c] = var.sqrt();
            }
        }
        Self { mean, std }
    }

    /// z-scores every row; missing (NaN) entries become 0, the train mean.
    pub fn transform(&self, x: ArrayView2<f64>) -> Array2<f64> {
        Array2::from_shape_fn(x.dim(), |(r, c)| {
            let v = x[[r, c]];
            if v.is_nan() {
                0.0
            } else {
                (v - self.mean[c]) / self.std[c]
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn statistics_come_from_train_rows_only() {
        let x = array![[1.0, 5.0], [3.0, 5.0], [100.0, f64::NAN], [-50.0, 2.0]];
        let s = Standardizer::fit(x.view(), &[0, 1]);
        assert_eq!(s.mean, vec![2.0, 5.0]);
        assert_eq!(s.std, vec![1.0, 1.0]);
        let z = s.transform(x.view());
        assert_eq!(z[[0, 0]], -1.0);
        assert_eq!(z[[2, 1]], 0.0);
        let permuted = array![[1.0, 5.0], [3.0, 5.0], [-50.0, 2.0], [100.0, f64::NAN]];
        assert_eq!(Standardizer::fit(permuted.view(), &[0, 1]), s);
    }
}
