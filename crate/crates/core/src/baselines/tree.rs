//! Binary decision trees shared by the forest and the boosting model.

use ndarray::ArrayView2;
use rand::Rng;

use crate::{par, rng};

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    /// Rows with `x[feature] <= threshold` go left.
    Split { feature: usize, threshold: f64, left: usize, right: usize },
    /// Class frequencies for classification trees, a single score for
    /// regression trees.
    Leaf { value: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf_value(&self, row: &[f64]) -> &[f64] {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Split { feature, threshold, left, right } => {
                    at = if row[*feature] <= *threshold { *left } else { *right };
                }
                Node::Leaf { value } => return value,
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, at: usize) -> usize {
            match &t.nodes[at] {
                Node::Split { left, right, .. } => 1 + go(t, *left).max(go(t, *right)),
                Node::Leaf { .. } => 0,
            }
        }
        go(self, 0)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct TreeParams {
    pub max_depth: usize,
    /// Minimum total sample weight on each side of a split.
    pub min_leaf: f64,
    /// Candidate features drawn per split; `None` uses every feature.
    pub max_features: Option<usize>,
}

/// Node statistics: what to store in a leaf and how good a partition is.
pub(crate) trait Criterion {
    type Acc: Clone;
    fn empty(&self) -> Self::Acc;
    fn add(&self, acc: &mut Self::Acc, i: usize, w: f64);
    fn weight(&self, acc: &Self::Acc) -> f64;
    /// Score to maximize for a partition; children must beat the parent.
    fn score(&self, acc: &Self::Acc) -> f64;
    /// Upper bound on any split gain at this node; the gain floor is relative to it.
    fn gain_scale(&self, acc: &Self::Acc) -> f64;
    fn is_pure(&self, acc: &Self::Acc) -> bool;
    fn leaf(&self, acc: &Self::Acc) -> Vec<f64>;
    fn sub(&self, total: &Self::Acc, part: &Self::Acc) -> Self::Acc;
}

/// Weighted Gini impurity over class labels. Score is `-w·gini`.
pub(crate) struct Gini<'a> {
    pub y: &'a [usize],
    pub classes: usize,
}

impl Criterion for Gini<'_> {
    type Acc = Vec<f64>;

    fn empty(&self) -> Vec<f64> {
        vec![0.0; self.classes]
    }

    fn add(&self, acc: &mut Vec<f64>, i: usize, w: f64) {
        acc[self.y[i]] += w;
    }

    fn weight(&self, acc: &Vec<f64>) -> f64 {
        acc.iter().sum()
    }

    fn score(&self, acc: &Vec<f64>) -> f64 {
        let w = self.weight(acc);
        if w == 0.0 {
            return 0.0;
        }
        let sq: f64 = acc.iter().map(|c| (c / w) * (c / w)).sum();
        -w * (1.0 - sq)
    }

    fn gain_scale(&self, acc: &Vec<f64>) -> f64 {
        self.weight(acc)
    }

    fn is_pure(&self, acc: &Vec<f64>) -> bool {
        acc.iter().filter(|&&c| c > 0.0).count() <= 1
    }

    fn leaf(&self, acc: &Vec<f64>) -> Vec<f64> {
        let w = self.weight(acc);
        acc.iter().map(|c| c / w).collect()
    }

    fn sub(&self, total: &Vec<f64>, part: &Vec<f64>) -> Vec<f64> {
        total.iter().zip(part).map(|(a, b)| a - b).collect()
    }
}

/// Squared-error fit to `target`, with Newton leaf values `-Σg / Σh · lr`.
/// Score is `S²/n` (variance reduction).
pub(crate) struct Newton<'a> {
    pub target: &'a [f64],
    pub grad: &'a [f64],
    pub hess: &'a [f64],
    pub learning_rate: f64,
}

impl Criterion for Newton<'_> {
    /// (count, Σ target, Σ g, Σ h, Σ target²)
    type Acc = [f64; 5];

    fn empty(&self) -> [f64; 5] {
        [0.0; 5]
    }

    fn add(&self, acc: &mut [f64; 5], i: usize, w: f64) {
        let t = self.target[i];
        acc[0] += w;
        acc[1] += w * t;
        acc[2] += w * self.grad[i];
        acc[3] += w * self.hess[i];
        acc[4] += w * t * t;
    }

    fn weight(&self, acc: &[f64; 5]) -> f64 {
        acc[0]
    }

    fn score(&self, acc: &[f64; 5]) -> f64 {
        if acc[0] == 0.0 {
            0.0
        } else {
            acc[1] * acc[1] / acc[0]
        }
    }

    fn gain_scale(&self, acc: &[f64; 5]) -> f64 {
        acc[4]
    }

    fn is_pure(&self, _acc: &[f64; 5]) -> bool {
        false
    }

    fn leaf(&self, acc: &[f64; 5]) -> Vec<f64> {
        vec![-acc[2] / acc[3].max(f64::MIN_POSITIVE) * self.learning_rate]
    }

    fn sub(&self, total: &[f64; 5], part: &[f64; 5]) -> [f64; 5] {
        std::array::from_fn(|k| total[k] - part[k])
    }
}

/// Splits must gain more than this fraction of the node's gain scale.
const MIN_GAIN: f64 = 1e-12;

/// Every column's row order by (value, row index), shared across trees
/// grown on the same matrix.
pub(crate) struct Presorted {
    columns: Vec<Vec<(f64, usize)>>,
}

impl Presorted {
    pub(crate) fn new(x: ArrayView2<f64>) -> Self {
        let columns = par::map_range(x.ncols(), |f| {
            let mut col: Vec<(f64, usize)> = x.column(f).iter().copied().zip(0..).collect();
            col.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            col
        });
        Presorted { columns }
    }
}

/// Greedy top-down induction. Rows with zero weight are ignored. Among equal
/// gains the lowest feature index, then the lowest threshold, wins.
pub(crate) fn grow<C: Criterion>(
    x: ArrayView2<f64>,
    sorted: &Presorted,
    weights: &[f64],
    crit: &C,
    params: TreeParams,
    mut g: Option<&mut rng::Rng>,
) -> Tree {
    let rows: Vec<usize> = (0..x.nrows()).filter(|&i| weights[i] > 0.0).collect();
    let mut owner = vec![usize::MAX; x.nrows()];
    let mut nodes = Vec::new();
    let mut stack = vec![(rows, 0usize, usize::MAX, false)];
    // Depth-first, left child first, so node numbering is reproducible.
    while let Some((rows, depth, parent, is_right)) = stack.pop() {
        let mut acc = crit.empty();
        for &i in &rows {
            crit.add(&mut acc, i, weights[i]);
        }
        let id = nodes.len();
        if parent != usize::MAX {
            if let Node::Split { left, right, .. } = &mut nodes[parent] {
                if is_right {
                    *right = id;
                } else {
                    *left = id;
                }
            }
        }
        let split = if depth >= params.max_depth || crit.is_pure(&acc) || crit.weight(&acc) < 2.0 * params.min_leaf {
            None
        } else {
            for &i in &rows {
                owner[i] = id;
            }
            let node = NodeRows { rows: &rows, id, owner: &owner };
            best_split(x, sorted, weights, crit, node, &acc, params, g.as_deref_mut())
        };
        match split {
            None => nodes.push(Node::Leaf { value: crit.leaf(&acc) }),
            Some((feature, threshold)) => {
                nodes.push(Node::Split { feature, threshold, left: usize::MAX, right: usize::MAX });
                let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| x[[i, feature]] <= threshold);
                stack.push((r, depth + 1, id, true));
                stack.push((l, depth + 1, id, false));
            }
        }
    }
    Tree { nodes }
}

struct NodeRows<'a> {
    rows: &'a [usize],
    id: usize,
    owner: &'a [usize],
}

fn candidate_features(p: usize, max_features: Option<usize>, g: Option<&mut rng::Rng>) -> Vec<usize> {
    let mut all: Vec<usize> = (0..p).collect();
    match (max_features, g) {
        (Some(m), Some(g)) if m < p => {
            for k in 0..m {
                let j = g.random_range(k..p);
                all.swap(k, j);
            }
            all.truncate(m);
            all.sort_unstable();
            all
        }
        _ => all,
    }
}

#[allow(clippy::too_many_arguments)]
fn best_split<C: Criterion>(
    x: ArrayView2<f64>,
    sorted: &Presorted,
    weights: &[f64],
    crit: &C,
    node: NodeRows,
    total: &C::Acc,
    params: TreeParams,
    g: Option<&mut rng::Rng>,
) -> Option<(usize, f64)> {
    let parent = crit.score(total);
    let min_gain = MIN_GAIN * crit.gain_scale(total);
    let mut best: Option<(f64, usize, f64)> = None;
    // Small nodes sort their own rows; large ones filter the presorted column.
    let small = node.rows.len() * 16 < x.nrows();
    let mut order: Vec<(f64, usize)> = Vec::with_capacity(node.rows.len());
    for f in candidate_features(x.ncols(), params.max_features, g) {
        order.clear();
        if small {
            order.extend(node.rows.iter().map(|&i| (x[[i, f]], i)));
            order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        } else {
            order.extend(sorted.columns[f].iter().filter(|e| node.owner[e.1] == node.id));
        }
        let mut left = crit.empty();
        for k in 0..order.len() - 1 {
            let (v, i) = order[k];
            crit.add(&mut left, i, weights[i]);
            let next = order[k + 1].0;
            if v == next {
                continue;
            }
            let right = crit.sub(total, &left);
            if crit.weight(&left) < params.min_leaf || crit.weight(&right) < params.min_leaf {
                continue;
            }
            let gain = crit.score(&left) + crit.score(&right) - parent;
            if gain > min_gain && best.is_none_or(|(b, _, _)| gain > b) {
                best = Some((gain, f, v + (next - v) / 2.0));
            }
        }
    }
    best.map(|(_, f, t)| (f, t))
}
