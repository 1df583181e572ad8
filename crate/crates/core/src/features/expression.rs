//! Mean (or median) intensity of every antigen channel over each cell.

use serde::{Deserialize, Serialize};

use crate::dataset::{CellRecord, CellTable, ClassLabel, LabelMask, StainStack};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregator {
    #[default]
    Mean,
    Median,
}

fn check_dims(stack: &StainStack, mask: &LabelMask) -> Result<()> {
    for ch in &stack.channels {
        if (ch.image.width, ch.image.height) != (mask.width, mask.height) {
            return Err(Error::invalid(format!(
                "sample {}: channel {} is {}x{} but mask is {}x{}",
                stack.sample_id, ch.antigen, ch.image.width, ch.image.height, mask.width, mask.height
            )));
        }
    }
    Ok(())
}

/// One row per cell (ascending cell id), one column per channel in stack
/// order. Pixels are visited in row-major order so sums are reproducible.
pub fn expression_profile(stack: &StainStack, mask: &LabelMask, aggregator: Aggregator) -> Result<CellTable> {
    check_dims(stack, mask)?;
    let cells = mask.cell_pixels();
    if cells.is_empty() {
        return Err(Error::invalid(format!("sample {}: mask contains no cells", stack.sample_id)));
    }
    let names = stack.antigens().map(str::to_string).collect();
    let mut table = CellTable::new(names);
    let w = mask.width;
    for (&cell_id, pixels) in &cells {
        let n = pixels.len() as f64;
        let (mut sx, mut sy) = (0.0, 0.0);
        for &p in pixels {
            sx += (p % w) as f64;
            sy += (p / w) as f64;
        }
        let features = stack
            .channels
            .iter()
            .map(|ch| match aggregator {
                Aggregator::Mean => {
                    let mut s = 0.0;
                    for &p in pixels {
                        s += ch.image.values[p] as f64;
                    }
                    s / n
                }
                Aggregator::Median => {
                    let mut v: Vec<u16> = pixels.iter().map(|&p| ch.image.values[p]).collect();
                    v.sort_unstable();
                    let m = v.len() / 2;
                    if v.len() % 2 == 1 {
                        v[m] as f64
                    } else {
                        (v[m - 1] as f64 + v[m] as f64) / 2.0
                    }
                }
            })
            .collect();
        table.push(CellRecord {
            cell_id,
            sample_id: stack.sample_id.clone(),
            centroid: (sx / n, sy / n),
            label: ClassLabel::Unlabeled,
            features,
        })?;
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Channel, ChannelImage};
    use crate::rng;
    use rand::Rng;

    fn stack(w: usize, h: usize, chans: Vec<(&str, Vec<u16>)>) -> StainStack {
        StainStack {
            sample_id: "s".into(),
            channels: chans
                .into_iter()
                .map(|(a, v)| Channel { antigen: a.into(), image: ChannelImage::new(w, h, v).unwrap() })
                .collect(),
            pixel_spacing_um: 0.45,
        }
    }

    #[test]
    fn two_pixel_mean() {
        let s = stack(3, 1, vec![("A", vec![10, 20, 99])]);
        let m = LabelMask::new(3, 1, vec![4, 4, 0]).unwrap();
        let t = expression_profile(&s, &m, Aggregator::Mean).unwrap();
        assert_eq!(t.rows[0].features, vec![15.0]);
        assert_eq!(t.rows[0].centroid, (0.5, 0.0));
        let t = expression_profile(&s, &m, Aggregator::Median).unwrap();
        assert_eq!(t.rows[0].features, vec![15.0]);
    }

    #[test]
    fn constant_channel() {
        let s = stack(4, 4, vec![("A", vec![7; 16])]);
        let m = LabelMask::new(4, 4, (0..16).map(|i| (i % 3) as u32).collect()).unwrap();
        let t = expression_profile(&s, &m, Aggregator::Mean).unwrap();
        assert!(t.rows.iter().all(|r| r.features == vec![7.0]));
    }

    #[test]
    fn empty_mask_is_an_error() {
        let s = stack(2, 2, vec![("A", vec![1; 4])]);
        let m = LabelMask::new(2, 2, vec![0; 4]).unwrap();
        assert!(expression_profile(&s, &m, Aggregator::Mean).is_err());
        let m = LabelMask::new(1, 4, vec![1; 4]).unwrap();
        assert!(expression_profile(&s, &m, Aggregator::Mean).is_err());
    }

    /// Independent accumulation: visit every pixel once and bin by label.
    fn oracle(s: &StainStack, m: &LabelMask) -> Vec<(u32, Vec<f64>)> {
        let ids = m.cell_ids();
        let mut out = Vec::new();
        for id in ids {
            let mut sums = vec![0.0; s.channels.len()];
            let mut n = 0.0;
            for r in 0..m.height {
                for c in 0..m.width {
                    if m.get(r, c) == id {
                        n += 1.0;
                        for (k, ch) in s.channels.iter().enumerate() {
                            sums[k] += ch.image.get(r, c) as f64;
                        }
                    }
                }
            }
            out.push((id, sums.into_iter().map(|v| v / n).collect()));
        }
        out
    }

    #[test]
    fn random_stack_matches_pixel_oracle() {
        let mut g = rng::from_seed(11);
        let chans: Vec<(&str, Vec<u16>)> =
            ["A", "B", "C"].into_iter().map(|a| (a, (0..64).map(|_| g.random::<u16>()).collect())).collect();
        let s = stack(8, 8, chans);
        let m = LabelMask::new(8, 8, (0..64).map(|_| g.random_range(0..4u32)).collect()).unwrap();
        let t = expression_profile(&s, &m, Aggregator::Mean).unwrap();
        let expected = oracle(&s, &m);
        assert_eq!(t.rows.len(), 3);
        for (row, (id, f)) in t.rows.iter().zip(expected) {
            assert_eq!(row.cell_id, id);
            assert_eq!(row.features, f);
        }
    }

    #[test]
    fn feature_bounded_by_cell_range_and_permutes_with_channels() {
        let mut g = rng::from_seed(5);
        let a: Vec<u16> = (0..36).map(|_| g.random()).collect();
        let b: Vec<u16> = (0..36).map(|_| g.random()).collect();
        let m = LabelMask::new(6, 6, (0..36).map(|_| g.random_range(0..5u32)).collect()).unwrap();
        let t1 =
            expression_profile(&stack(6, 6, vec![("A", a.clone()), ("B", b.clone())]), &m, Aggregator::Mean).unwrap();
        let t2 =
            expression_profile(&stack(6, 6, vec![("B", b.clone()), ("A", a.clone())]), &m, Aggregator::Mean).unwrap();
        let px = m.cell_pixels();
        for (r1, r2) in t1.rows.iter().zip(&t2.rows) {
            assert_eq!(r1.features[0], r2.features[1]);
            assert_eq!(r1.features[1], r2.features[0]);
            let vals: Vec<u16> = px[&r1.cell_id].iter().map(|&p| a[p]).collect();
            let (lo, hi) = (*vals.iter().min().unwrap() as f64, *vals.iter().max().unwrap() as f64);
            assert!(lo <= r1.features[0] && r1.features[0] <= hi);
        }
        assert_eq!(t1.feature_names, vec!["A", "B"]);
        assert_eq!(t2.feature_names, vec!["B", "A"]);
    }
}
