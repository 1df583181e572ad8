use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::formats::{decode_mask, decode_pgm, encode_mask, encode_pgm, parse_labels_csv, write_labels_csv};
use super::{validate_dataset, Channel, Dataset, Diagnosis, Sample, StainStack};
use crate::io_util::{read_bytes, write_atomic};
use crate::{par, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub pixel_spacing_um: f64,
    pub samples: Vec<SampleEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleEntry {
    pub sample_id: String,
    pub channels: Vec<ChannelEntry>,
    pub mask: PathBuf,
    pub labels: PathBuf,
    pub diagnosis: Diagnosis,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelEntry {
    pub antigen: String,
    pub path: PathBuf,
}

/// Resolves a manifest argument that may name the file or its directory.
fn manifest_file(path: &Path) -> PathBuf {
    if path.is_dir() {
        path.join("manifest.json")
    } else {
        path.to_path_buf()
    }
}

/// Loads and validates a dataset. Relative paths in the manifest are resolved
/// against the manifest's directory.
pub fn load_dataset(manifest_path: &Path) -> Result<Dataset> {
    let manifest_path = manifest_file(manifest_path);
    let text = std::fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    let manifest: DatasetManifest =
        serde_json::from_str(&text).map_err(|source| Error::Json { path: manifest_path.clone(), source })?;
    if manifest.samples.is_empty() {
        return Err(Error::Malformed {
            sample_id: None,
            path: manifest_path,
            message: "manifest lists no samples".into(),
        });
    }
    let root = manifest_path.parent().unwrap_or(Path::new(".")).to_path_buf();
    let samples = par::map_slice(&manifest.samples, |entry| {
        load_sample(&root, entry, manifest.pixel_spacing_um).map_err(|e| e.in_sample(&entry.sample_id))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let dataset = Dataset { samples, pixel_spacing_um: manifest.pixel_spacing_um };
    let report = validate_dataset(&dataset);
    if !report.is_empty() {
        return Err(Error::InvalidDataset(report));
    }
    Ok(dataset)
}

fn load_sample(root: &Path, entry: &SampleEntry, spacing: f64) -> Result<Sample> {
    let mut channels = Vec::with_capacity(entry.channels.len());
    let mut dims: Option<(usize, usize)> = None;
    for ch in &entry.channels {
        let path = root.join(&ch.path);
        let image = decode_pgm(&read_bytes(&path)?, &path)?;
        match dims {
            None => dims = Some((image.width, image.height)),
            Some((w, h)) if (w, h) != (image.width, image.height) => {
                return Err(Error::Malformed {
                    sample_id: None,
                    path,
                    message: format!(
                        "dimension mismatch: channel is {}x{}, first channel is {w}x{h}",
                        image.width, image.height
                    ),
                })
            }
            _ => {}
        }
        channels.push(Channel { antigen: ch.antigen.clone(), image });
    }
    let mask_path = root.join(&entry.mask);
    let mask = decode_mask(&read_bytes(&mask_path)?, &mask_path)?;
    if let Some((w, h)) = dims {
        if (w, h) != (mask.width, mask.height) {
            return Err(Error::Malformed {
                sample_id: None,
                path: mask_path,
                message: format!("dimension mismatch: mask is {}x{}, channels are {w}x{h}", mask.width, mask.height),
            });
        }
    }
    let labels_path = root.join(&entry.labels);
    let text = std::fs::read_to_string(&labels_path).map_err(|e| Error::io(&labels_path, e))?;
    let labels = parse_labels_csv(&text, &labels_path)?;
    Ok(Sample {
        stack: StainStack { sample_id: entry.sample_id.clone(), channels, pixel_spacing_um: spacing },
        mask,
        labels,
        diagnosis: entry.diagnosis,
    })
}

/// File-system safe rendering of an identifier.
fn file_stem(name: &str) -> String {
    name.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect()
}

/// Writes `dataset` under `dir` (one subdirectory per sample) and returns the
/// manifest path.
pub fn save_dataset(dataset: &Dataset, dir: &Path) -> Result<PathBuf> {
    let mut entries = Vec::with_capacity(dataset.samples.len());
    for sample in &dataset.samples {
        let sid = sample.sample_id();
        let sub = PathBuf::from(file_stem(sid));
        let mut channels = Vec::new();
        for (k, ch) in sample.stack.channels.iter().enumerate() {
            let rel = sub.join(format!("c{k:03}_{}.pgm", file_stem(&ch.antigen)));
            write_atomic(&dir.join(&rel), &encode_pgm(&ch.image))?;
            channels.push(ChannelEntry { antigen: ch.antigen.clone(), path: rel });
        }
        let mask = sub.join("mask.cgmk");
        write_atomic(&dir.join(&mask), &encode_mask(&sample.mask)?)?;
        let labels = sub.join("labels.csv");
        write_atomic(&dir.join(&labels), write_labels_csv(&sample.labels).as_bytes())?;
        entries.push(SampleEntry { sample_id: sid.to_string(), channels, mask, labels, diagnosis: sample.diagnosis });
    }
    let manifest = DatasetManifest { pixel_spacing_um: dataset.pixel_spacing_um, samples: entries };
    let path = dir.join("manifest.json");
    let mut json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    json.push('\n');
    write_atomic(&path, json.as_bytes())?;
    Ok(path)
}
