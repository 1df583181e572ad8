//! Graph random neural network: DropNode augmentation, mixed-order
//! propagation, a two-layer MLP and sharpened consistency regularization,
//! trained with hand-written gradients and Adam.

mod ops;
mod train;

use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::graph::NormAdj;
use crate::io_util::{fmt_f64, read_bytes, write_atomic};
use crate::{Error, Result};

pub use ops::{
    apply_drop_node, drop_node, drop_node_mask, grand_loss, mlp_forward, propagate, sharpen, LossParts, MlpParams,
};
pub use train::{loss_and_gradient, train_grand, ConsistencyGrad, EpochRecord};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GrandConfig {
    pub drop_rate: f64,
    pub prop_order: usize,
    pub n_augmentations: usize,
    pub temperature: f64,
    pub consistency_weight: f64,
    pub hidden_dim: usize,
    pub input_dropout: f64,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub consistency_grad: ConsistencyGrad,
    pub seed: u64,
}

impl Default for GrandConfig {
    fn default() -> Self {
        Self {
            drop_rate: 0.5,
            prop_order: 8,
            n_augmentations: 4,
            temperature: 0.5,
            consistency_weight: 1.0,
            hidden_dim: 32,
            input_dropout: 0.5,
            learning_rate: 1e-2,
            weight_decay: 5e-4,
            max_epochs: 300,
            patience: 50,
            consistency_grad: ConsistencyGrad::Detached,
            seed: 0,
        }
    }
}

impl GrandConfig {
    pub fn check(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::invalid(format!("grand config: {m}")));
        if !(0.0..1.0).contains(&self.drop_rate) {
            return fail("drop_rate must lie in [0, 1)");
        }
        if !(0.0..1.0).contains(&self.input_dropout) {
            return fail("input_dropout must lie in [0, 1)");
        }
        if self.n_augmentations == 0 {
            return fail("n_augmentations must be at least 1");
        }
        if !(self.temperature > 0.0) {
            return fail("temperature must be positive");
        }
        if !(self.consistency_weight >= 0.0) || !(self.weight_decay >= 0.0) {
            return fail("consistency_weight and weight_decay must be non-negative");
        }
        if self.hidden_dim == 0 || self.max_epochs == 0 {
            return fail("hidden_dim and max_epochs must be at least 1");
        }
        if !(self.learning_rate > 0.0) {
            return fail("learning_rate must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrandModel {
    pub params: MlpParams,
    /// Epoch whose parameters were kept.
    pub best_epoch: usize,
    pub history: Vec<EpochRecord>,
    pub config: GrandConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub probabilities: Array2<f64>,
    pub labels: Vec<usize>,
}

const MAGIC: &[u8; 5] = b"GRND1";

impl GrandModel {
    pub fn n_classes(&self) -> usize {
        self.params.w2.ncols()
    }

    pub fn history_csv(&self) -> String {
        let mut out = String::from("epoch,total,supervised,consistency,val_loss,val_f1\n");
        for r in &self.history {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.epoch,
                fmt_f64(r.loss.total),
                fmt_f64(r.loss.supervised),
                fmt_f64(r.loss.consistency),
                fmt_f64(r.val_loss),
                fmt_f64(r.val_f1)
            ));
        }
        out
    }

    /// Checkpoint layout: magic `GRND1`, u32 input/hidden/class dims and
    /// propagation order, the parameter blocks as little-endian f64
    /// (W1 row-major, b1, W2, b2), then a u32-length-prefixed JSON config.
    pub fn to_bytes(&self) -> Vec<u8> {
        let (i, h, c) = self.params.dims();
        let mut out = MAGIC.to_vec();
        for d in [i, h, c, self.config.prop_order] {
            out.extend((d as u32).to_le_bytes());
        }
        for block in self.params.blocks() {
            for v in block {
                out.extend(v.to_le_bytes());
            }
        }
        let json = serde_json::to_vec(&self.config).expect("config serializes");
        out.extend((json.len() as u32).to_le_bytes());
        out.extend(json);
        out
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let bad = |m: &str| Error::Malformed { sample_id: None, path: path.to_path_buf(), message: m.to_string() };
        let mut cur = bytes.strip_prefix(MAGIC.as_slice()).ok_or_else(|| bad("missing GRND1 header"))?;
        let mut take = |k: usize| -> Result<&[u8]> {
            if cur.len() < k {
                return Err(bad("truncated checkpoint"));
            }
            let (a, b) = cur.split_at(k);
            cur = b;
            Ok(a)
        };
        let mut dims = [0usize; 4];
        for d in &mut dims {
            *d = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
        }
        let mut params = MlpParams::zeros(dims[0], dims[1], dims[2]);
        for block in params.blocks_mut() {
            for v in block.iter_mut() {
                *v = f64::from_le_bytes(take(8)?.try_into().unwrap());
            }
        }
        let len = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
        let config: GrandConfig = serde_json::from_slice(take(len)?).map_err(|e| bad(&format!("config: {e}")))?;
        if !cur.is_empty() {
            return Err(bad("trailing bytes after checkpoint"));
        }
        if config.prop_order != dims[3] {
            return Err(bad("propagation order disagrees with config"));
        }
        if !params.is_finite() {
            return Err(bad("non-finite parameters"));
        }
        Ok(Self { params, best_epoch: 0, history: Vec::new(), config })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&read_bytes(path)?, path)
    }
}

/// Inference without DropNode: one propagation pass, MLP, argmax with ties to
/// the lower class.
pub fn predict_grand(model: &GrandModel, adj: &NormAdj, x: &Array2<f64>) -> Result<Prediction> {
    let (inp, _, _) = model.params.dims();
    if x.ncols() != inp {
        return Err(Error::DimensionMismatch {
            context: "grand feature columns".into(),
            expected: inp,
            found: x.ncols(),
        });
    }
    if adj.n != x.nrows() {
        return Err(Error::DimensionMismatch {
            context: "graph nodes vs feature rows".into(),
            expected: adj.n,
            found: x.nrows(),
        });
    }
    let probabilities = mlp_forward(&model.params, &propagate(adj, x, model.config.prop_order));
    let labels = probabilities.rows().into_iter().map(train::argmax).collect();
    Ok(Prediction { probabilities, labels })
}

/// Positive-class column of a two-class prediction.
pub fn positive_scores(p: &Prediction) -> Array1<f64> {
    p.probabilities.column(p.probabilities.ncols() - 1).to_owned()
}
