//! Binary classification metrics with the tumor class as positive.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn from_predictions(y_true: &[usize], y_pred: &[usize]) -> Self {
        let mut c = Confusion::default();
        for (&t, &p) in y_true.iter().zip(y_pred) {
            match (t == 1, p == 1) {
                (true, true) => c.tp += 1,
                (false, true) => c.fp += 1,
                (false, false) => c.tn += 1,
                (true, false) => c.fn_ += 1,
            }
        }
        c
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn f1(&self) -> f64 {
        ratio(2 * self.tp, 2 * self.tp + self.fp + self.fn_)
    }

    pub fn accuracy(&self) -> f64 {
        ratio(self.tp + self.tn, self.total())
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// `None` when the reference labels contain a single class.
    pub roc_auc: Option<f64>,
    pub confusion: Confusion,
}

/// Metrics for positive-class probabilities thresholded at `threshold`
/// (predicted positive iff `p > threshold`).
pub fn compute_metrics(y_true: &[usize], prob: &[f64], threshold: f64) -> Metrics {
    assert_eq!(y_true.len(), prob.len(), "labels and scores must align");
    let pred: Vec<usize> = prob.iter().map(|&p| usize::from(p > threshold)).collect();
    let confusion = Confusion::from_predictions(y_true, &pred);
    Metrics {
        accuracy: confusion.accuracy(),
        precision: confusion.precision(),
        recall: confusion.recall(),
        f1: confusion.f1(),
        roc_auc: roc_auc(y_true, prob),
        confusion,
    }
}

/// Mann-Whitney estimate of the ROC area with tied scores given mid-ranks.
pub fn roc_auc(y_true: &[usize], scores: &[f64]) -> Option<f64> {
    let n_pos = y_true.iter().filter(|&&y| y == 1).count();
    let n_neg = y_true.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let mid = (i + j) as f64 / 2.0 + 1.0;
        rank_sum += order[i..=j].iter().filter(|&&k| y_true[k] == 1).count() as f64 * mid;
        i = j + 1;
    }
    let u = rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Some(u / (n_pos as f64 * n_neg as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::seq::SliceRandom;
    use rand::Rng;

    #[test]
    fn hand_counts() {
        let y = [1, 1, 1, 0, 0, 0, 0, 0, 0, 0];
        let p = [0.9, 0.8, 0.1, 0.7, 0.2, 0.2, 0.2, 0.2, 0.2, 0.2];
        let m = compute_metrics(&y, &p, 0.5);
        assert_eq!(m.confusion, Confusion { tp: 2, fp: 1, tn: 6, fn_: 1 });
        for v in [m.precision, m.recall, m.f1] {
            assert!((v - 2.0 / 3.0).abs() < 1e-15);
        }
        assert_eq!(m.accuracy, 0.8);
    }

    #[test]
    fn zero_division_is_zero() {
        let m = compute_metrics(&[0, 0, 1], &[0.1, 0.2, 0.3], 0.5);
        assert_eq!((m.precision, m.recall, m.f1), (0.0, 0.0, 0.0));
    }

    #[test]
    fn auc_edge_cases() {
        assert_eq!(roc_auc(&[0, 0, 1, 1], &[0.1, 0.2, 0.3, 0.4]), Some(1.0));
        assert_eq!(roc_auc(&[0, 1], &[0.5, 0.5]), Some(0.5));
        assert_eq!(roc_auc(&[1, 1], &[0.5, 0.1]), None);
        let m = compute_metrics(&[1, 1], &[0.9, 0.1], 0.5);
        assert!(m.roc_auc.is_none());
    }

    #[test]
    fn auc_chance_and_monotone_invariance() {
        let mut g = crate::rng::from_seed(9);
        let scores: Vec<f64> = (0..1000).map(|_| g.random::<f64>()).collect();
        let mut y: Vec<usize> = (0..1000).map(|i| i % 2).collect();
        y.shuffle(&mut g);
        let a = roc_auc(&y, &scores).unwrap();
        assert!((0.45..=0.55).contains(&a), "{a}");
        let warped: Vec<f64> = scores.iter().map(|s| (3.0 * s).exp() - 7.0).collect();
        assert_eq!(roc_auc(&y, &warped).unwrap(), a);
    }
}
