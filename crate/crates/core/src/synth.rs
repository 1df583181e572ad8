//! Deterministic synthetic tissue generator.
//!
//! Cells are non-overlapping ellipses placed on a jittered grid. Melanoma
//! samples carry a spatially contiguous tumor region; healthy samples have no
//! tumor cells. Tumor cells differ from healthy ones in two ways:
//!
//! * elevated mean intensity on the marker channels (expression signal);
//! * larger and rougher intra-cell noise on every channel (texture signal).
//!
//! Each sample draws from its own xoshiro256** stream derived from the seed,
//! so serial and parallel generation agree bit for bit.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::{
    save_dataset, CellRecord, CellTable, Channel, ChannelImage, ClassLabel, Dataset, Diagnosis, LabelMask, Sample,
    StainStack,
};
use crate::io_util::write_atomic;
use crate::{par, rng, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_samples: usize,
    pub n_melanoma: usize,
    /// Side length of the square images, in pixels.
    pub image_size: usize,
    pub n_channels: usize,
    pub cells_per_sample: usize,
    /// Fraction of cells that are tumor in a melanoma sample.
    pub tumor_fraction: f64,
    /// Fraction of channels carrying the tumor intensity shift.
    pub marker_channel_fraction: f64,
    /// Tumor mean shift on marker channels, in units of the between-cell sd.
    pub intensity_separation: f64,
    /// Relative increase of tumor texture amplitude and roughness.
    pub texture_contrast_separation: f64,
    /// Fraction of cells written as unlabeled (-1) in `labels.csv`.
    pub unlabeled_fraction: f64,
    pub pixel_spacing_um: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_samples: 6,
            n_melanoma: 4,
            image_size: 320,
            n_channels: 12,
            cells_per_sample: 300,
            tumor_fraction: 0.5,
            marker_channel_fraction: 0.25,
            intensity_separation: 3.0,
            texture_contrast_separation: 1.0,
            unlabeled_fraction: 0.0,
            pixel_spacing_um: 0.45,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn check(&self) -> Result<()> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if self.n_samples == 0 {
            return Err(Error::invalid("n_samples must be at least 1"));
        }
        if self.n_melanoma > self.n_samples {
            return Err(Error::invalid("n_melanoma exceeds n_samples"));
        }
        if self.image_size < 32 || self.image_size > u16::MAX as usize {
            return Err(Error::invalid("image_size must be within 32..=65535"));
        }
        if self.n_channels < 2 {
            return Err(Error::invalid("n_channels must be at least 2"));
        }
        if self.cells_per_sample == 0 {
            return Err(Error::invalid("cells_per_sample must be at least 1"));
        }
        if !unit(self.tumor_fraction) || !unit(self.marker_channel_fraction) || !unit(self.unlabeled_fraction) {
            return Err(Error::invalid("fractions must lie in [0, 1]"));
        }
        if !(self.intensity_separation >= 0.0 && self.texture_contrast_separation >= 0.0) {
            return Err(Error::invalid("separations must be non-negative"));
        }
        if !(self.pixel_spacing_um > 0.0) {
            return Err(Error::invalid("pixel spacing must be positive"));
        }
        Ok(())
    }

    pub fn n_marker_channels(&self) -> usize {
        ((self.marker_channel_fraction * self.n_channels as f64).round() as usize).min(self.n_channels)
    }
}

#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub dataset: Dataset,
    /// True labels and centroids of every cell; no feature columns.
    pub ground_truth: CellTable,
}

const ANTIGENS: [&str; 12] =
    ["MelanA", "S100", "HMB45", "CD3", "CD4", "CD8", "CD20", "CD68", "Ki67", "HLA-DR", "Vimentin", "Keratin"];

pub fn antigen_name(k: usize) -> String {
    ANTIGENS.get(k).map_or_else(|| format!("Ag{:02}", k + 1), |s| s.to_string())
}

const MAX_RETRIES: usize = 20;
const MIN_CELL_PIXELS: usize = 5;
const CELL_SD: f64 = 800.0;
const PIXEL_SD: f64 = 400.0;
const BASE_ROUGHNESS: f64 = 0.15;
const BACKGROUND: f64 = 1500.0;
const BACKGROUND_SD: f64 = 150.0;

pub fn generate_synthetic_dataset(cfg: &SynthConfig) -> Result<SynthOutput> {
    cfg.check()?;
    let width = if cfg.n_samples > 99 { 3 } else { 2 };
    let samples = par::map_range(cfg.n_samples, |i| {
        let id = format!("S{:0width$}", i + 1);
        let diagnosis = if i < cfg.n_melanoma { Diagnosis::Melanoma } else { Diagnosis::Healthy };
        generate_sample(cfg, id, diagnosis, &mut rng::stream(cfg.seed, i as u64))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let mut ground_truth = CellTable::new(Vec::new());
    let mut out = Vec::with_capacity(samples.len());
    for (sample, truth) in samples {
        ground_truth.rows.extend(truth);
        out.push(sample);
    }
    ground_truth.sort_canonical();
    Ok(SynthOutput { dataset: Dataset { samples: out, pixel_spacing_um: cfg.pixel_spacing_um }, ground_truth })
}

/// Writes the dataset, `ground_truth.csv` and `synth_config.json` under `dir`.
pub fn write_synthetic(out: &SynthOutput, cfg: &SynthConfig, dir: &Path) -> Result<()> {
    save_dataset(&out.dataset, dir)?;
    write_atomic(&dir.join("ground_truth.csv"), out.ground_truth.to_csv().as_bytes())?;
    let mut json = serde_json::to_string_pretty(cfg).expect("config serializes");
    json.push('\n');
    write_atomic(&dir.join("synth_config.json"), json.as_bytes())
}

struct PlacedCell {
    id: u32,
    pixels: Vec<usize>,
    centroid: (f64, f64),
}

fn generate_sample(
    cfg: &SynthConfig,
    sample_id: String,
    diagnosis: Diagnosis,
    g: &mut rng::Rng,
) -> Result<(Sample, Vec<CellRecord>)> {
    let size = cfg.image_size;
    let cells = place_cells(cfg, &sample_id, g)?;
    let mut mask = vec![0u32; size * size];
    for c in &cells {
        for &p in &c.pixels {
            mask[p] = c.id;
        }
    }

    // Tumor cells: the cells closest to a random focus, so the region is
    // spatially contiguous.
    let mut tumor = vec![false; cells.len()];
    if diagnosis == Diagnosis::Melanoma {
        let focus = (g.random::<f64>() * size as f64, g.random::<f64>() * size as f64);
        let mut order: Vec<(f64, usize)> = cells
            .iter()
            .enumerate()
            .map(|(i, c)| ((c.centroid.0 - focus.0).powi(2) + (c.centroid.1 - focus.1).powi(2), i))
            .collect();
        order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let n_tumor = (cfg.tumor_fraction * cells.len() as f64).round() as usize;
        for &(_, i) in order.iter().take(n_tumor) {
            tumor[i] = true;
        }
    }
    let true_labels: Vec<ClassLabel> =
        tumor.iter().map(|&t| if t { ClassLabel::Tumor } else { ClassLabel::Healthy }).collect();
    let written_labels: Vec<(u32, ClassLabel)> = cells
        .iter()
        .zip(&true_labels)
        .map(|(c, &l)| {
            let hide = g.random::<f64>() < cfg.unlabeled_fraction;
            (c.id, if hide { ClassLabel::Unlabeled } else { l })
        })
        .collect();

    let n_markers = cfg.n_marker_channels();
    let tumor_roughness = (BASE_ROUGHNESS + 0.6 * cfg.texture_contrast_separation).min(1.0);
    let tumor_sd = PIXEL_SD * (1.0 + cfg.texture_contrast_separation);
    let mut channels = Vec::with_capacity(cfg.n_channels);
    for k in 0..cfg.n_channels {
        let base: f64 = g.random_range(6000.0..14000.0);
        let cell_means: Vec<f64> = cells
            .iter()
            .zip(&tumor)
            .map(|(_, &t)| {
                let z: f64 = StandardNormal.sample(g);
                let shift = if t && k < n_markers { cfg.intensity_separation * CELL_SD } else { 0.0 };
                base + CELL_SD * z + shift
            })
            .collect();
        let white = normal_field(size, g);
        let smooth = smooth_field(size, g);
        let mut values: Vec<f64> = (0..size * size).map(|p| BACKGROUND + BACKGROUND_SD * white[p]).collect();
        for ((c, &t), &mu) in cells.iter().zip(&tumor).zip(&cell_means) {
            let (alpha, sd) = if t { (tumor_roughness, tumor_sd) } else { (BASE_ROUGHNESS, PIXEL_SD) };
            let beta = (1.0 - alpha * alpha).sqrt();
            for &p in &c.pixels {
                values[p] = mu + sd * (alpha * white[p] + beta * smooth[p]);
            }
        }
        let pixels = values.iter().map(|v| v.round().clamp(0.0, 65535.0) as u16).collect();
        channels.push(Channel { antigen: antigen_name(k), image: ChannelImage::new(size, size, pixels)? });
    }

    let truth = cells
        .iter()
        .zip(&true_labels)
        .map(|(c, &label)| CellRecord {
            cell_id: c.id,
            sample_id: sample_id.clone(),
            centroid: c.centroid,
            label,
            features: Vec::new(),
        })
        .collect();
    let sample = Sample {
        stack: StainStack { sample_id, channels, pixel_spacing_um: cfg.pixel_spacing_um },
        mask: LabelMask::new(size, size, mask)?,
        labels: written_labels,
        diagnosis,
    };
    Ok((sample, truth))
}

fn place_cells(cfg: &SynthConfig, sample_id: &str, g: &mut rng::Rng) -> Result<Vec<PlacedCell>> {
    let size = cfg.image_size;
    let target = cfg.cells_per_sample;
    let grid = (target as f64).sqrt().ceil() as usize;
    let spacing = size as f64 / grid as f64;
    let mut slots: Vec<usize> = (0..grid * grid).collect();
    slots.shuffle(g);
    slots.truncate(target);
    slots.sort_unstable();

    let mut occupied = vec![false; size * size];
    let mut cells = Vec::with_capacity(target);
    for slot in slots {
        let (gr, gc) = (slot / grid, slot % grid);
        for _ in 0..MAX_RETRIES {
            let cx = (gc as f64 + 0.5) * spacing + g.random_range(-0.12..0.12) * spacing;
            let cy = (gr as f64 + 0.5) * spacing + g.random_range(-0.12..0.12) * spacing;
            let a = g.random_range(0.22..0.36) * spacing;
            let b = g.random_range(0.22..0.36) * spacing;
            let theta = g.random_range(0.0..std::f64::consts::PI);
            if let Some(pixels) = rasterize_ellipse(size, (cx, cy), a, b, theta, &occupied) {
                for &p in &pixels {
                    occupied[p] = true;
                }
                let n = pixels.len() as f64;
                let centroid = (
                    pixels.iter().map(|&p| (p % size) as f64).sum::<f64>() / n,
                    pixels.iter().map(|&p| (p / size) as f64).sum::<f64>() / n,
                );
                cells.push(PlacedCell { id: cells.len() as u32 + 1, pixels, centroid });
                break;
            }
        }
    }
    let needed = (0.85 * target as f64).ceil() as usize;
    if cells.len() < needed {
        return Err(Error::Placement { sample_id: sample_id.to_string(), achieved: cells.len(), target });
    }
    Ok(cells)
}

/// Pixels whose centers fall inside the rotated ellipse, or `None` if it leaves
/// the image, touches an occupied pixel, or is too small.
fn rasterize_ellipse(size: usize, c: (f64, f64), a: f64, b: f64, theta: f64, occupied: &[bool]) -> Option<Vec<usize>> {
    let r = a.max(b).ceil() as isize + 1;
    let (cos, sin) = (theta.cos(), theta.sin());
    let (x0, y0) = (c.0.floor() as isize, c.1.floor() as isize);
    let mut out = Vec::new();
    for y in y0 - r..=y0 + r {
        for x in x0 - r..=x0 + r {
            let (dx, dy) = (x as f64 + 0.5 - c.0, y as f64 + 0.5 - c.1);
            let u = dx * cos + dy * sin;
            let v = -dx * sin + dy * cos;
            if (u / a).powi(2) + (v / b).powi(2) > 1.0 {
                continue;
            }
            if x < 0 || y < 0 || x as usize >= size || y as usize >= size {
                return None;
            }
            let p = y as usize * size + x as usize;
            if occupied[p] {
                return None;
            }
            out.push(p);
        }
    }
    (out.len() >= MIN_CELL_PIXELS).then_some(out)
}

fn normal_field(size: usize, g: &mut rng::Rng) -> Vec<f64> {
    (0..size * size).map(|_| StandardNormal.sample(g)).collect()
}

/// Unit-variance spatially correlated noise: a 5x5 box blur of white noise.
fn smooth_field(size: usize, g: &mut rng::Rng) -> Vec<f64> {
    const HALF: isize = 2;
    let white = normal_field(size, g);
    let clamp = |i: isize| i.clamp(0, size as isize - 1) as usize;
    let mut rows = vec![0.0; size * size];
    for y in 0..size {
        for x in 0..size {
            rows[y * size + x] = (-HALF..=HALF).map(|d| white[y * size + clamp(x as isize + d)]).sum();
        }
    }
    let mut out = vec![0.0; size * size];
    for y in 0..size {
        for x in 0..size {
            out[y * size + x] = (-HALF..=HALF).map(|d| rows[clamp(y as isize + d) * size + x]).sum::<f64>() / 5.0;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::validate_dataset;

    fn small() -> SynthConfig {
        SynthConfig {
            n_samples: 3,
            n_melanoma: 2,
            image_size: 96,
            cells_per_sample: 40,
            n_channels: 4,
            ..Default::default()
        }
    }

    #[test]
    fn config_checks() {
        assert!(SynthConfig { n_melanoma: 7, ..small() }.check().is_err());
        assert!(SynthConfig { image_size: 31, ..small() }.check().is_err());
        assert!(SynthConfig { n_channels: 1, ..small() }.check().is_err());
        assert!(small().check().is_ok());
    }

    #[test]
    fn generated_dataset_is_valid_and_labeled() {
        let out = generate_synthetic_dataset(&small()).unwrap();
        assert!(validate_dataset(&out.dataset).is_empty());
        assert_eq!(out.dataset.diagnosis_counts(), (2, 1));
        for s in &out.dataset.samples {
            assert_eq!(s.mask.cell_ids().len(), 40);
            let tumors = s.labels.iter().filter(|(_, l)| *l == ClassLabel::Tumor).count();
            match s.diagnosis {
                Diagnosis::Healthy => assert_eq!(tumors, 0),
                Diagnosis::Melanoma => assert_eq!(tumors, 20),
            }
        }
        assert_eq!(out.ground_truth.len(), 120);
    }

    #[test]
    fn zero_tumor_fraction() {
        let out = generate_synthetic_dataset(&SynthConfig { tumor_fraction: 0.0, ..small() }).unwrap();
        assert!(out.ground_truth.rows.iter().all(|r| r.label == ClassLabel::Healthy));
    }

    #[test]
    fn overcrowded_image_reports_density() {
        let err =
            generate_synthetic_dataset(&SynthConfig { image_size: 32, cells_per_sample: 400, ..small() }).unwrap_err();
        assert!(matches!(err, Error::Placement { target: 400, .. }), "{err}");
    }

    #[test]
    fn deterministic() {
        let a = generate_synthetic_dataset(&small()).unwrap();
        let b = generate_synthetic_dataset(&small()).unwrap();
        assert_eq!(a.dataset, b.dataset);
        let c = generate_synthetic_dataset(&SynthConfig { seed: 1, ..small() }).unwrap();
        assert_ne!(a.dataset, c.dataset);
    }

    #[test]
    fn unlabeled_fraction_hides_labels() {
        let out = generate_synthetic_dataset(&SynthConfig { unlabeled_fraction: 0.5, ..small() }).unwrap();
        let hidden =
            out.dataset.samples.iter().flat_map(|s| &s.labels).filter(|(_, l)| *l == ClassLabel::Unlabeled).count();
        assert!(hidden > 30 && hidden < 90, "{hidden}");
        assert!(out.ground_truth.rows.iter().all(|r| r.label != ClassLabel::Unlabeled));
    }
}
