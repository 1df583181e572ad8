//! Per-cell feature families: pooled channel intensities ("expression
//! profiles") and radiomic descriptors.

pub mod expression;
pub mod radiomics;

use serde::{Deserialize, Serialize};

use crate::dataset::{CellTable, Sample};
use crate::Result;

pub use expression::{expression_profile, Aggregator};
pub use radiomics::{radiomic_feature_table, FeatureWarning, RadiomicsConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Expression,
    Radiomics,
}

impl FeatureKind {
    pub const ALL: [FeatureKind; 2] = [FeatureKind::Expression, FeatureKind::Radiomics];

    pub fn name(self) -> &'static str {
        match self {
            FeatureKind::Expression => "expression",
            FeatureKind::Radiomics => "radiomics",
        }
    }
}

/// Copies class labels from the sample's label list onto matching rows.
pub fn attach_labels(table: &mut CellTable, sample: &Sample) {
    let labels: std::collections::HashMap<u32, _> = sample.labels.iter().copied().collect();
    for row in table.rows.iter_mut().filter(|r| r.sample_id == sample.sample_id()) {
        if let Some(l) = labels.get(&row.cell_id) {
            row.label = *l;
        }
    }
}

/// Extracts one feature family for a sample, with labels attached.
pub fn extract_sample(
    sample: &Sample,
    kind: FeatureKind,
    aggregator: Aggregator,
    radiomics: &RadiomicsConfig,
) -> Result<(CellTable, Vec<FeatureWarning>)> {
    let (mut table, warnings) = match kind {
        FeatureKind::Expression => (expression_profile(&sample.stack, &sample.mask, aggregator)?, Vec::new()),
        FeatureKind::Radiomics => radiomic_feature_table(&sample.stack, &sample.mask, radiomics)?,
    };
    attach_labels(&mut table, sample);
    Ok((table, warnings))
}
