//! Radiomic descriptors per cell: first-order statistics, shape, GLCM and
//! GLRLM texture features.
//!
//! Texture matrices are computed per direction and their features averaged
//! over the directions that produced at least one pair (GLCM) or run (GLRLM).
//! A cell whose texture cannot be computed keeps its row: the affected columns
//! hold NaN and a [`FeatureWarning`] is recorded.

pub mod first_order;
pub mod glcm;
pub mod glrlm;
pub mod quantize;
pub mod shape;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use first_order::{first_order_features, first_order_from_values, FirstOrderFeatures};
pub use glcm::{glcm, glcm_counts, glcm_features, GlcmFeatures, GlcmMatrix, DEFAULT_OFFSETS};
pub use glrlm::{glrlm, glrlm_features, GlrlmFeatures, GlrlmMatrix};
pub use quantize::{quantize, quantize_values, QuantizedRegion};
pub use shape::{shape_features, ShapeFeatures};

use crate::dataset::{CellRecord, CellTable, ClassLabel, LabelMask, StainStack};
use crate::{par, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum TextureError {
    #[error("no in-cell pixel pairs for the requested offsets")]
    NoPairs,
    #[error("no runs")]
    NoRuns,
    #[error("offset (0, 0) is not allowed")]
    ZeroOffset,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadiomicsConfig {
    pub levels: usize,
    pub offsets: Vec<(isize, isize)>,
    pub symmetric: bool,
    /// Antigens to analyze; `None` selects every channel.
    pub channels: Option<Vec<String>>,
    pub shape: bool,
}

impl Default for RadiomicsConfig {
    fn default() -> Self {
        Self { levels: 16, offsets: DEFAULT_OFFSETS.to_vec(), symmetric: true, channels: None, shape: true }
    }
}

impl RadiomicsConfig {
    pub fn check(&self) -> Result<()> {
        if self.levels < 2 || self.levels > u16::MAX as usize {
            return Err(Error::invalid(format!("gray levels {} outside 2..=65535", self.levels)));
        }
        if self.offsets.is_empty() || self.offsets.contains(&(0, 0)) {
            return Err(Error::invalid("offsets must be non-empty and non-zero"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureWarning {
    pub sample_id: String,
    pub cell_id: u32,
    pub channel: Option<String>,
    pub message: String,
}

/// Number of per-channel columns.
pub const PER_CHANNEL: usize = FirstOrderFeatures::NAMES.len() + GlcmFeatures::NAMES.len() + GlrlmFeatures::NAMES.len();

/// Column names in canonical order: shape block, then per channel
/// first-order, GLCM, GLRLM.
pub fn column_names(antigens: &[&str], shape: bool) -> Vec<String> {
    let mut names = Vec::new();
    if shape {
        names.extend(ShapeFeatures::NAMES.iter().map(|n| format!("shape__{n}")));
    }
    for a in antigens {
        for n in FirstOrderFeatures::NAMES.iter().chain(GlcmFeatures::NAMES.iter()).chain(GlrlmFeatures::NAMES.iter()) {
            names.push(format!("{a}__{n}"));
        }
    }
    names
}

/// Mean of per-direction feature vectors over the directions that succeed.
fn averaged<F, E>(directions: &[(isize, isize)], width: usize, f: F) -> Option<Vec<f64>>
where
    F: Fn((isize, isize)) -> Result<Vec<f64>, E>,
{
    let mut acc = vec![0.0; width];
    let mut n = 0usize;
    for &d in directions {
        if let Ok(v) = f(d) {
            for (a, x) in acc.iter_mut().zip(v) {
                *a += x;
            }
            n += 1;
        }
    }
    (n > 0).then(|| acc.into_iter().map(|a| a / n as f64).collect())
}

pub fn radiomic_feature_table(
    stack: &StainStack,
    mask: &LabelMask,
    cfg: &RadiomicsConfig,
) -> Result<(CellTable, Vec<FeatureWarning>)> {
    cfg.check()?;
    for ch in &stack.channels {
        if (ch.image.width, ch.image.height) != (mask.width, mask.height) {
            return Err(Error::invalid(format!(
                "sample {}: channel {} does not match mask dimensions",
                stack.sample_id, ch.antigen
            )));
        }
    }
    let mut selected: Vec<usize> = match &cfg.channels {
        None => (0..stack.channels.len()).collect(),
        Some(names) => names
            .iter()
            .map(|n| {
                stack
                    .channels
                    .iter()
                    .position(|c| &c.antigen == n)
                    .ok_or_else(|| Error::invalid(format!("sample {}: unknown channel {n}", stack.sample_id)))
            })
            .collect::<Result<_>>()?,
    };
    // Manifest order regardless of the order the selection was written in.
    selected.sort_unstable();
    selected.dedup();

    let cells: Vec<(u32, Vec<usize>)> = mask.cell_pixels().into_iter().collect();
    if cells.is_empty() {
        return Err(Error::invalid(format!("sample {}: mask contains no cells", stack.sample_id)));
    }
    let antigens: Vec<&str> = selected.iter().map(|&k| stack.channels[k].antigen.as_str()).collect();
    let names = column_names(&antigens, cfg.shape);

    let rows = par::map_slice(&cells, |(cell_id, pixels)| {
        let mut warnings = Vec::new();
        let mut features = Vec::with_capacity(names.len());
        let shape = shape::shape_from_pixels(mask, *cell_id, pixels, stack.pixel_spacing_um);
        if cfg.shape {
            features.extend(shape.to_vec());
        }
        for &k in &selected {
            let ch = &stack.channels[k];
            features.extend(first_order_features(&ch.image, pixels).to_vec());
            let q = quantize(&ch.image, pixels, cfg.levels);
            let glcm_part = averaged(&cfg.offsets, GlcmFeatures::NAMES.len(), |o| {
                glcm(&q, &[o], cfg.symmetric).map(|m| glcm_features(&m).to_vec())
            });
            let glrlm_part = averaged(&cfg.offsets, GlrlmFeatures::NAMES.len(), |o| {
                glrlm_features(&glrlm(&q, &[o]), pixels.len()).map(|f| f.to_vec())
            });
            for (part, n, what) in
                [(glcm_part, GlcmFeatures::NAMES.len(), "GLCM"), (glrlm_part, GlrlmFeatures::NAMES.len(), "GLRLM")]
            {
                match part {
                    Some(v) => features.extend(v),
                    None => {
                        features.extend(std::iter::repeat_n(f64::NAN, n));
                        warnings.push(FeatureWarning {
                            sample_id: stack.sample_id.clone(),
                            cell_id: *cell_id,
                            channel: Some(ch.antigen.clone()),
                            message: format!("{what} undefined for {} pixel cell; columns set to NaN", pixels.len()),
                        });
                    }
                }
            }
        }
        let row = CellRecord {
            cell_id: *cell_id,
            sample_id: stack.sample_id.clone(),
            centroid: shape.centroid,
            label: ClassLabel::Unlabeled,
            features,
        };
        (row, warnings)
    });

    let mut table = CellTable::new(names);
    let mut warnings = Vec::new();
    for (row, w) in rows {
        table.push(row)?;
        warnings.extend(w);
    }
    Ok((table, warnings))
}
