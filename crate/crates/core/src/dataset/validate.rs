use std::collections::{BTreeSet, HashSet};
use std::fmt;

use super::Dataset;

/// Invariant checks in reporting order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum CheckId {
    NoSamples,
    PixelSpacing,
    DuplicateSample,
    NoChannels,
    DuplicateAntigen,
    ChannelBuffer,
    ChannelDimension,
    MaskBuffer,
    MaskDimension,
    DuplicateLabel,
    OrphanLabel,
    MissingLabel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub sample_id: Option<String>,
    pub check: CheckId,
    pub location: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.sample_id {
            Some(s) => write!(f, "[{s}] {:?} at {}: {}", self.check, self.location, self.message),
            None => write!(f, "{:?} at {}: {}", self.check, self.location, self.message),
        }
    }
}

pub type ValidationReport = Vec<Violation>;

/// Lists every invariant violation, dataset-level checks first, then per sample
/// in dataset order, each group ordered by check id.
pub fn validate_dataset(ds: &Dataset) -> ValidationReport {
    let mut report = Vec::new();
    let global = |check, location: &str, message: String| Violation {
        sample_id: None,
        check,
        location: location.to_string(),
        message,
    };
    if ds.samples.is_empty() {
        report.push(global(CheckId::NoSamples, "manifest", "dataset has no samples".into()));
    }
    if !(ds.pixel_spacing_um > 0.0 && ds.pixel_spacing_um.is_finite()) {
        report.push(global(
            CheckId::PixelSpacing,
            "manifest",
            format!("pixel spacing {} is not positive", ds.pixel_spacing_um),
        ));
    }
    let mut seen = HashSet::new();
    for s in &ds.samples {
        if !seen.insert(s.sample_id()) {
            report.push(global(
                CheckId::DuplicateSample,
                "manifest",
                format!("sample id {} appears more than once", s.sample_id()),
            ));
        }
    }

    for s in &ds.samples {
        let mut local = Vec::new();
        let mut push = |check, location: String, message: String| {
            local.push(Violation { sample_id: Some(s.sample_id().to_string()), check, location, message })
        };
        let stack = &s.stack;
        if !(stack.pixel_spacing_um > 0.0 && stack.pixel_spacing_um.is_finite()) {
            push(CheckId::PixelSpacing, "stack".into(), format!("pixel spacing {}", stack.pixel_spacing_um));
        }
        if stack.channels.is_empty() {
            push(CheckId::NoChannels, "stack".into(), "no channels".into());
        }
        let mut names = HashSet::new();
        for ch in &stack.channels {
            if !names.insert(ch.antigen.as_str()) {
                push(CheckId::DuplicateAntigen, format!("channel {}", ch.antigen), "antigen name repeated".into());
            }
        }
        for ch in &stack.channels {
            let img = &ch.image;
            if img.width == 0 || img.height == 0 || img.values.len() != img.width * img.height {
                push(
                    CheckId::ChannelBuffer,
                    format!("channel {}", ch.antigen),
                    format!("{} values for {}x{}", img.values.len(), img.width, img.height),
                );
            }
        }
        let dims = stack.dims();
        if let Some((w, h)) = dims {
            for ch in &stack.channels[1..] {
                if (ch.image.width, ch.image.height) != (w, h) {
                    push(
                        CheckId::ChannelDimension,
                        format!("channel {}", ch.antigen),
                        format!("{}x{} differs from {w}x{h}", ch.image.width, ch.image.height),
                    );
                }
            }
        }
        let mask = &s.mask;
        let mask_ok = mask.width > 0 && mask.height > 0 && mask.labels.len() == mask.width * mask.height;
        if !mask_ok {
            push(
                CheckId::MaskBuffer,
                "mask".into(),
                format!("{} labels for {}x{}", mask.labels.len(), mask.width, mask.height),
            );
        }
        if let Some((w, h)) = dims {
            if (mask.width, mask.height) != (w, h) {
                push(
                    CheckId::MaskDimension,
                    "mask".into(),
                    format!("mask {}x{} vs channels {w}x{h}", mask.width, mask.height),
                );
            }
        }
        let mask_ids: BTreeSet<u32> = if mask_ok { mask.cell_ids().into_iter().collect() } else { BTreeSet::new() };
        let mut label_ids = BTreeSet::new();
        for (id, _) in &s.labels {
            if !label_ids.insert(*id) {
                push(CheckId::DuplicateLabel, format!("labels cell {id}"), "cell listed twice".into());
            }
        }
        if mask_ok {
            for id in label_ids.difference(&mask_ids) {
                push(CheckId::OrphanLabel, format!("labels cell {id}"), "cell id has no pixels in mask".into());
            }
            for id in mask_ids.difference(&label_ids) {
                push(CheckId::MissingLabel, format!("mask cell {id}"), "cell has no row in labels".into());
            }
        }
        local.sort_by_key(|v| v.check);
        report.extend(local);
    }
    report
}
