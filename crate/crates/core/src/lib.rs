//! Cell-level classification pipeline for multiplex immunofluorescence tissue
//! images.
//!
//! The crate covers every stage from raw channel stacks to evaluated models:
//!
//! * [`dataset`]: on-disk formats (PGM channels, `CGMK` masks, label CSVs, JSON
//!   manifest) and validation.
//! * [`synth`]: deterministic synthetic tissue generator with ground truth.
//! * [`features`]: per-cell expression profiles and radiomic features
//!   (first-order, shape, GLCM, GLRLM).
//! * [`graph`]: feature-similarity and spatial kNN graphs plus the normalized
//!   propagation operator.
//! * [`dimred`]: PCA, exact t-SNE and UMAP.
//! * [`grand`]: graph random neural network (DropNode, mixed-order propagation,
//!   consistency regularization) with hand-written gradients.
//! * [`baselines`]: random forest and Newton gradient boosting.
//! * [`harness`]: splits, metrics, hyperparameter search and the experiment grid.

// Negated float comparisons reject NaN on purpose; index loops mirror the math.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod baselines;
pub mod dataset;
pub mod dimred;
mod error;
pub mod features;
pub mod grand;
pub mod graph;
pub mod harness;
pub mod io_util;
pub mod metrics;
mod par;
pub mod rng;
pub mod synth;

pub use error::{Error, Result};
