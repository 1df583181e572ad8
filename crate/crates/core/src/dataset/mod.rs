//! Dataset contract: channel stacks, label masks, per-cell labels and the JSON
//! manifest tying them together.

mod formats;
mod manifest;
mod table;
mod validate;

use serde::{Deserialize, Serialize};

pub use formats::{decode_mask, decode_pgm, encode_mask, encode_pgm, parse_labels_csv, write_labels_csv};
pub use manifest::{load_dataset, save_dataset, ChannelEntry, DatasetManifest, SampleEntry};
pub use table::{CellRecord, CellTable};
pub use validate::{validate_dataset, CheckId, ValidationReport, Violation};

use crate::{Error, Result};

/// One antigen channel, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChannelImage {
    pub width: usize,
    pub height: usize,
    pub values: Vec<u16>,
}

impl ChannelImage {
    pub fn new(width: usize, height: usize, values: Vec<u16>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("image dimensions must be at least 1x1"));
        }
        if values.len() != width * height {
            return Err(Error::DimensionMismatch {
                context: "channel buffer".into(),
                expected: width * height,
                found: values.len(),
            });
        }
        Ok(Self { width, height, values })
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> u16 {
        self.values[row * self.width + col]
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Channel {
    pub antigen: String,
    pub image: ChannelImage,
}

/// All channels of one sample. Channel order is manifest order.
#[derive(Debug, Clone, PartialEq)]
pub struct StainStack {
    pub sample_id: String,
    pub channels: Vec<Channel>,
    pub pixel_spacing_um: f64,
}

impl StainStack {
    pub fn dims(&self) -> Option<(usize, usize)> {
        self.channels.first().map(|c| (c.image.width, c.image.height))
    }

    pub fn antigens(&self) -> impl Iterator<Item = &str> {
        self.channels.iter().map(|c| c.antigen.as_str())
    }
}

/// Instance mask: 0 is background, any other value is a cell id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMask {
    pub width: usize,
    pub height: usize,
    pub labels: Vec<u32>,
}

impl LabelMask {
    pub fn new(width: usize, height: usize, labels: Vec<u32>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("mask dimensions must be at least 1x1"));
        }
        if labels.len() != width * height {
            return Err(Error::DimensionMismatch {
                context: "mask buffer".into(),
                expected: width * height,
                found: labels.len(),
            });
        }
        Ok(Self { width, height, labels })
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> u32 {
        self.labels[row * self.width + col]
    }

    /// Sorted distinct cell ids present in the mask.
    pub fn cell_ids(&self) -> Vec<u32> {
        let mut ids: Vec<u32> = self.labels.iter().copied().filter(|&l| l != 0).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    /// Row-major pixel indices of every cell, keyed by ascending cell id.
    pub fn cell_pixels(&self) -> std::collections::BTreeMap<u32, Vec<usize>> {
        let mut map: std::collections::BTreeMap<u32, Vec<usize>> = Default::default();
        for (idx, &l) in self.labels.iter().enumerate() {
            if l != 0 {
                map.entry(l).or_default().push(idx);
            }
        }
        map
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ClassLabel {
    Healthy,
    Tumor,
    Unlabeled,
}

impl ClassLabel {
    pub fn as_i8(self) -> i8 {
        match self {
            ClassLabel::Healthy => 0,
            ClassLabel::Tumor => 1,
            ClassLabel::Unlabeled => -1,
        }
    }

    pub fn from_i8(v: i8) -> Option<Self> {
        match v {
            0 => Some(ClassLabel::Healthy),
            1 => Some(ClassLabel::Tumor),
            -1 => Some(ClassLabel::Unlabeled),
            _ => None,
        }
    }

    /// Class index for labeled cells.
    pub fn class_index(self) -> Option<usize> {
        match self {
            ClassLabel::Healthy => Some(0),
            ClassLabel::Tumor => Some(1),
            ClassLabel::Unlabeled => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Diagnosis {
    Melanoma,
    Healthy,
}

/// Per-cell labels read from `labels.csv`, in file order.
pub type CellLabels = Vec<(u32, ClassLabel)>;

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub stack: StainStack,
    pub mask: LabelMask,
    pub labels: CellLabels,
    pub diagnosis: Diagnosis,
}

impl Sample {
    pub fn sample_id(&self) -> &str {
        &self.stack.sample_id
    }

    pub fn label_of(&self, cell_id: u32) -> ClassLabel {
        self.labels.iter().find(|(id, _)| *id == cell_id).map(|(_, l)| *l).unwrap_or(ClassLabel::Unlabeled)
    }
}

/// An immutable, validated collection of samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub samples: Vec<Sample>,
    pub pixel_spacing_um: f64,
}

impl Dataset {
    pub fn diagnosis_counts(&self) -> (usize, usize) {
        let melanoma = self.samples.iter().filter(|s| s.diagnosis == Diagnosis::Melanoma).count();
        (melanoma, self.samples.len() - melanoma)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accepts_full_resolution_tile() {
        let img = ChannelImage::new(2018, 2018, vec![0; 2018 * 2018]).unwrap();
        assert_eq!(img.get(2017, 2017), 0);
    }

    #[test]
    fn rejects_bad_buffers() {
        assert!(ChannelImage::new(0, 3, vec![]).is_err());
        assert!(ChannelImage::new(2, 2, vec![1, 2, 3]).is_err());
        assert!(LabelMask::new(2, 2, vec![0; 5]).is_err());
    }

    #[test]
    fn label_codes() {
        for v in [-1i8, 0, 1] {
            assert_eq!(ClassLabel::from_i8(v).unwrap().as_i8(), v);
        }
        assert!(ClassLabel::from_i8(2).is_none());
    }

    #[test]
    fn cell_pixels_are_row_major() {
        let m = LabelMask::new(3, 2, vec![0, 2, 2, 1, 0, 2]).unwrap();
        let px = m.cell_pixels();
        assert_eq!(px[&1], vec![3]);
        assert_eq!(px[&2], vec![1, 2, 5]);
        assert_eq!(m.cell_ids(), vec![1, 2]);
    }
}
