use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::{rng, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitLevel {
    /// Labeled cells are split individually, stratified by class.
    #[default]
    Cell,
    /// Whole samples are split, stratified by diagnosis.
    Case,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitMasks {
    pub train: Vec<bool>,
    pub val: Vec<bool>,
    pub test: Vec<bool>,
}

impl SplitMasks {
    fn empty(n: usize) -> Self {
        Self { train: vec![false; n], val: vec![false; n], test: vec![false; n] }
    }

    fn indices(mask: &[bool]) -> Vec<usize> {
        mask.iter().enumerate().filter(|(_, &m)| m).map(|(i, _)| i).collect()
    }

    pub fn train_indices(&self) -> Vec<usize> {
        Self::indices(&self.train)
    }

    pub fn val_indices(&self) -> Vec<usize> {
        Self::indices(&self.val)
    }

    pub fn test_indices(&self) -> Vec<usize> {
        Self::indices(&self.test)
    }

    pub fn sizes(&self) -> (usize, usize, usize) {
        let c = |m: &[bool]| m.iter().filter(|&&v| v).count();
        (c(&self.train), c(&self.val), c(&self.test))
    }

    /// Name of the subset containing node `i`, or `"none"`.
    pub fn subset(&self, i: usize) -> &'static str {
        if self.train[i] {
            "train"
        } else if self.val[i] {
            "val"
        } else if self.test[i] {
            "test"
        } else {
            "none"
        }
    }
}

fn check_ratios(ratios: [f64; 3]) -> Result<()> {
    if ratios.iter().any(|r| !(*r >= 0.0)) || (ratios.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::invalid("split ratios must be non-negative and sum to 1"));
    }
    Ok(())
}

/// `floor(r·n)` with a small guard so that e.g. 0.7·10 counts as 7.
fn floor_count(r: f64, n: usize) -> usize {
    (r * n as f64 + 1e-9).floor() as usize
}

/// Shuffles each group with its own stream and deals train/val/test by the
/// floor rule; the remainder goes to test.
fn deal(groups: &[Vec<usize>], ratios: [f64; 3], seed: u64) -> Vec<(Vec<usize>, Vec<usize>, Vec<usize>)> {
    groups
        .iter()
        .enumerate()
        .map(|(c, members)| {
            let mut members = members.clone();
            members.shuffle(&mut rng::stream(seed, c as u64));
            let n_train = floor_count(ratios[0], members.len());
            let n_val = floor_count(ratios[1], members.len());
            let test = members.split_off(n_train + n_val);
            let val = members.split_off(n_train);
            (members, val, test)
        })
        .collect()
}

/// Per-class split of labeled nodes. `labels[i]` is `None` for unlabeled
/// nodes, which stay out of every mask.
pub fn stratified_split(labels: &[Option<usize>], ratios: [f64; 3], seed: u64) -> Result<SplitMasks> {
    check_ratios(ratios)?;
    let n_classes = labels.iter().flatten().max().map_or(0, |m| m + 1);
    if n_classes == 0 {
        return Err(Error::invalid("no labeled nodes to split"));
    }
    let mut groups = vec![Vec::new(); n_classes];
    for (i, l) in labels.iter().enumerate() {
        if let Some(c) = l {
            groups[*c].push(i);
        }
    }
    let mut masks = SplitMasks::empty(labels.len());
    for (tr, va, te) in deal(&groups, ratios, seed) {
        tr.into_iter().for_each(|i| masks.train[i] = true);
        va.into_iter().for_each(|i| masks.val[i] = true);
        te.into_iter().for_each(|i| masks.test[i] = true);
    }
    Ok(masks)
}

/// Splits whole cases. `case_of[i]` indexes `case_class`; every labeled node
/// follows its case.
pub fn case_split(
    labels: &[Option<usize>],
    case_of: &[usize],
    case_class: &[usize],
    ratios: [f64; 3],
    seed: u64,
) -> Result<SplitMasks> {
    check_ratios(ratios)?;
    if labels.iter().all(|l| l.is_none()) {
        return Err(Error::invalid("no labeled nodes to split"));
    }
    let n_groups = case_class.iter().max().map_or(0, |m| m + 1);
    let mut groups = vec![Vec::new(); n_groups];
    for (case, &c) in case_class.iter().enumerate() {
        groups[c].push(case);
    }
    let mut subset = vec![0u8; case_class.len()];
    for (tr, va, te) in deal(&groups, ratios, seed) {
        tr.into_iter().for_each(|c| subset[c] = 1);
        va.into_iter().for_each(|c| subset[c] = 2);
        te.into_iter().for_each(|c| subset[c] = 3);
    }
    let mut masks = SplitMasks::empty(labels.len());
    for (i, l) in labels.iter().enumerate() {
        if l.is_some() {
            match subset[case_of[i]] {
                1 => masks.train[i] = true,
                2 => masks.val[i] = true,
                _ => masks.test[i] = true,
            }
        }
    }
    Ok(masks)
}

#[cfg(test)]
mod tests {
    use super::*;

    const R: [f64; 3] = [0.7, 0.1, 0.2];

    #[test]
    fn floor_rule_sizes() {
        let one = vec![Some(0); 40];
        assert_eq!(stratified_split(&one, R, 0).unwrap().sizes(), (28, 4, 8));
        let two: Vec<Option<usize>> = (0..20).map(|i| Some(i % 2)).collect();
        let m = stratified_split(&two, R, 0).unwrap();
        assert_eq!(m.sizes(), (14, 2, 4));
        for c in 0..2 {
            let count = |mask: &[bool]| (0..20).filter(|&i| mask[i] && two[i] == Some(c)).count();
            assert_eq!((count(&m.train), count(&m.val), count(&m.test)), (7, 1, 2));
        }
    }

    #[test]
    fn unlabeled_nodes_stay_out_and_seed_fixes_masks() {
        let labels: Vec<Option<usize>> = (0..30).map(|i| if i % 3 == 0 { None } else { Some(i % 2) }).collect();
        let a = stratified_split(&labels, R, 4).unwrap();
        assert_eq!(a, stratified_split(&labels, R, 4).unwrap());
        for i in 0..30 {
            let hits = [a.train[i], a.val[i], a.test[i]].iter().filter(|&&b| b).count();
            assert_eq!(hits, usize::from(labels[i].is_some()));
        }
        assert!(stratified_split(&[None, None], R, 0).is_err());
        assert!(stratified_split(&labels, [0.5, 0.5, 0.5], 0).is_err());
    }

    #[test]
    fn cases_move_together() {
        let case_of: Vec<usize> = (0..60).map(|i| i / 10).collect();
        let labels: Vec<Option<usize>> = (0..60).map(|i| Some(usize::from(i < 40 && i % 2 == 0))).collect();
        let m = case_split(&labels, &case_of, &[1, 1, 1, 1, 0, 0], R, 3).unwrap();
        for case in 0..6 {
            let names: Vec<&str> = (case * 10..case * 10 + 10).map(|i| m.subset(i)).collect();
            assert!(names.iter().all(|n| *n == names[0]));
        }
    }
}
