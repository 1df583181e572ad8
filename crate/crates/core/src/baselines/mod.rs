//! Graph-free tabular baselines: a random forest and Newton gradient boosting.

mod boost;
mod forest;
mod tree;

use std::path::Path;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::io_util::{read_bytes, write_atomic};
use crate::{Error, Result};

pub use boost::{train_gradient_boosting, BoostConfig, GradientBoosting};
pub use forest::{train_cart, train_random_forest, ForestConfig, RandomForest};
pub use tree::{Node, Tree, TreeParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    RandomForest,
    GradientBoosting,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TabularModel {
    Forest(RandomForest),
    Boosting(GradientBoosting),
}

impl TabularModel {
    pub fn n_features(&self) -> usize {
        match self {
            TabularModel::Forest(m) => m.n_features,
            TabularModel::Boosting(m) => m.n_features,
        }
    }

    /// Versioned binary layout: magic `CGTB1`, a kind byte (1 forest,
    /// 2 boosting), u32 feature count, a u32-length-prefixed JSON config,
    /// model scalars, then the trees.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer(MAGIC.to_vec());
        match self {
            TabularModel::Forest(m) => {
                w.u8(1);
                w.u32(m.n_features);
                w.json(&m.config);
                w.trees(&m.trees);
            }
            TabularModel::Boosting(m) => {
                w.u8(2);
                w.u32(m.n_features);
                w.json(&m.config);
                w.f64(m.base_score);
                w.u32(m.loss_history.len());
                for &v in &m.loss_history {
                    w.f64(v);
                }
                w.trees(&m.trees);
            }
        }
        w.0
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let mut r = Reader { buf: bytes, path };
        if r.take(MAGIC.len())? != MAGIC {
            return Err(r.bad("missing CGTB1 header"));
        }
        let kind = r.u8()?;
        let n_features = r.u32()?;
        let model = match kind {
            1 => {
                let config: ForestConfig = r.json()?;
                let trees = r.trees(n_features)?;
                TabularModel::Forest(RandomForest { n_features, config, trees })
            }
            2 => {
                let config: BoostConfig = r.json()?;
                let base_score = r.f64()?;
                let len = r.u32()?;
                let loss_history = (0..len).map(|_| r.f64()).collect::<Result<_>>()?;
                let trees = r.trees(n_features)?;
                TabularModel::Boosting(GradientBoosting { n_features, config, base_score, trees, loss_history })
            }
            k => return Err(r.bad(&format!("unknown model kind {k}"))),
        };
        if !r.buf.is_empty() {
            return Err(r.bad("trailing bytes after model"));
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&read_bytes(path)?, path)
    }
}

/// Two-column probabilities (healthy, tumor) for every row of `x`.
pub fn predict_tabular(model: &TabularModel, x: ArrayView2<f64>) -> Result<Array2<f64>> {
    if x.ncols() != model.n_features() {
        return Err(Error::DimensionMismatch {
            context: "tabular model feature columns".into(),
            expected: model.n_features(),
            found: x.ncols(),
        });
    }
    let pos: Vec<f64> = match model {
        TabularModel::Forest(m) => m.predict_positive(x),
        TabularModel::Boosting(m) => m.predict_positive(x),
    };
    Ok(Array2::from_shape_fn((pos.len(), 2), |(i, c)| if c == 1 { pos[i] } else { 1.0 - pos[i] }))
}

pub(crate) fn check_training_data(x: ArrayView2<f64>, y: &[usize]) -> Result<()> {
    if x.nrows() != y.len() {
        return Err(Error::DimensionMismatch {
            context: "training rows vs labels".into(),
            expected: x.nrows(),
            found: y.len(),
        });
    }
    if x.nrows() < 2 {
        return Err(Error::invalid("baselines need at least 2 training rows"));
    }
    if y.iter().any(|&v| v > 1) {
        return Err(Error::invalid("baselines expect binary labels 0/1"));
    }
    if y.iter().all(|&v| v == y[0]) {
        return Err(Error::invalid("training labels contain a single class"));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("training features contain non-finite values"));
    }
    Ok(())
}

const MAGIC: &[u8] = b"CGTB1";

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: usize) {
        self.0.extend((v as u32).to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend(v.to_le_bytes());
    }
    fn json<T: Serialize>(&mut self, v: &T) {
        let bytes = serde_json::to_vec(v).expect("config serializes");
        self.u32(bytes.len());
        self.0.extend(bytes);
    }
    fn trees(&mut self, trees: &[Tree]) {
        self.u32(trees.len());
        for t in trees {
            self.u32(t.nodes.len());
            for n in &t.nodes {
                match n {
                    Node::Split { feature, threshold, left, right } => {
                        self.u8(1);
                        self.u32(*feature);
                        self.f64(*threshold);
                        self.u32(*left);
                        self.u32(*right);
                    }
                    Node::Leaf { value } => {
                        self.u8(0);
                        self.u32(value.len());
                        for &v in value {
                            self.f64(v);
                        }
                    }
                }
            }
        }
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    path: &'a Path,
}

impl Reader<'_> {
    fn bad(&self, m: &str) -> Error {
        Error::Malformed { sample_id: None, path: self.path.to_path_buf(), message: m.to_string() }
    }
    fn take(&mut self, k: usize) -> Result<&[u8]> {
        if self.buf.len() < k {
            return Err(self.bad("truncated model file"));
        }
        let (a, b) = self.buf.split_at(k);
        self.buf = b;
        Ok(a)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn json<T: for<'de> Deserialize<'de>>(&mut self) -> Result<T> {
        let len = self.u32()?;
        let bytes = self.take(len)?;
        serde_json::from_slice(bytes).map_err(|e| self.bad(&format!("config: {e}")))
    }
    fn trees(&mut self, n_features: usize) -> Result<Vec<Tree>> {
        let count = self.u32()?;
        let mut trees = Vec::with_capacity(count.min(1 << 16));
        for _ in 0..count {
            let len = self.u32()?;
            let mut nodes = Vec::with_capacity(len.min(1 << 20));
            for _ in 0..len {
                let node = match self.u8()? {
                    1 => {
                        let feature = self.u32()?;
                        let threshold = self.f64()?;
                        let (left, right) = (self.u32()?, self.u32()?);
                        if feature >= n_features || left >= len || right >= len {
                            return Err(self.bad("split node out of range"));
                        }
                        Node::Split { feature, threshold, left, right }
                    }
                    0 => {
                        let k = self.u32()?;
                        Node::Leaf { value: (0..k).map(|_| self.f64()).collect::<Result<_>>()? }
                    }
                    t => return Err(self.bad(&format!("unknown node tag {t}"))),
                };
                nodes.push(node);
            }
            if nodes.is_empty() {
                return Err(self.bad("empty tree"));
            }
            trees.push(Tree { nodes });
        }
        Ok(trees)
    }
}
