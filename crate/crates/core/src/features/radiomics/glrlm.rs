//! Gray-level run-length matrix over a single cell.

use serde::Serialize;

use super::quantize::QuantizedRegion;
use super::TextureError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GlrlmMatrix {
    pub levels: usize,
    /// Longest representable run (the larger bounding-box side).
    pub max_run: usize,
    /// Row-major `levels x max_run`; entry `(g, l - 1)` counts runs of gray
    /// `g` with length `l`.
    pub r: Vec<u64>,
    pub directions: Vec<(isize, isize)>,
    pub n_runs: u64,
}

impl GlrlmMatrix {
    #[inline]
    pub fn at(&self, gray: usize, len: usize) -> u64 {
        self.r[gray * self.max_run + len - 1]
    }
}

/// Counts maximal runs of equal bins along each direction. A run stops at the
/// first pixel outside the cell.
pub fn glrlm(q: &QuantizedRegion, directions: &[(isize, isize)]) -> GlrlmMatrix {
    let levels = q.levels();
    let max_run = q.height().max(q.width());
    let mut r = vec![0u64; levels * max_run];
    let mut n_runs = 0;
    for &(dr, dc) in directions {
        for (row, col, g) in q.pixels() {
            if q.bin(row - dr, col - dc) == Some(g) {
                continue;
            }
            let mut len = 1isize;
            while q.bin(row + len * dr, col + len * dc) == Some(g) {
                len += 1;
            }
            r[g as usize * max_run + len as usize - 1] += 1;
            n_runs += 1;
        }
    }
    GlrlmMatrix { levels, max_run, r, directions: directions.to_vec(), n_runs }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GlrlmFeatures {
    pub short_run_emphasis: f64,
    pub long_run_emphasis: f64,
    pub gray_level_nonuniformity: f64,
    pub run_length_nonuniformity: f64,
    pub run_percentage: f64,
}

impl GlrlmFeatures {
    pub const NAMES: [&'static str; 5] = ["glrlm_sre", "glrlm_lre", "glrlm_gln", "glrlm_rln", "glrlm_rp"];

    pub fn to_vec(&self) -> Vec<f64> {
        vec![
            self.short_run_emphasis,
            self.long_run_emphasis,
            self.gray_level_nonuniformity,
            self.run_length_nonuniformity,
            self.run_percentage,
        ]
    }
}

pub fn glrlm_features(m: &GlrlmMatrix, n_pixels: usize) -> Result<GlrlmFeatures, TextureError> {
    if m.n_runs == 0 {
        return Err(TextureError::NoRuns);
    }
    let nr = m.n_runs as f64;
    let (mut sre, mut lre) = (0.0, 0.0);
    let mut per_len = vec![0.0; m.max_run];
    let mut gln = 0.0;
    for g in 0..m.levels {
        let mut per_gray = 0.0;
        for len in 1..=m.max_run {
            let c = m.at(g, len) as f64;
            if c == 0.0 {
                continue;
            }
            let l2 = (len * len) as f64;
            sre += c / l2;
            lre += c * l2;
            per_gray += c;
            per_len[len - 1] += c;
        }
        gln += per_gray * per_gray;
    }
    let rln: f64 = per_len.iter().map(|v| v * v).sum();
    Ok(GlrlmFeatures {
        short_run_emphasis: sre / nr,
        long_run_emphasis: lre / nr,
        gray_level_nonuniformity: gln / nr,
        run_length_nonuniformity: rln / nr,
        run_percentage: nr / n_pixels as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::super::glcm::DEFAULT_OFFSETS;
    use super::*;

    fn region(levels: usize, rows: &[&[i32]]) -> QuantizedRegion {
        let rows: Vec<Vec<Option<u16>>> =
            rows.iter().map(|r| r.iter().map(|&v| (v >= 0).then_some(v as u16)).collect()).collect();
        QuantizedRegion::from_rows(levels, &rows).unwrap()
    }

    #[test]
    fn single_row() {
        let q = region(2, &[&[0, 0, 1]]);
        let m = glrlm(&q, &[(0, 1)]);
        assert_eq!(m.n_runs, 2);
        assert_eq!(m.at(0, 2), 1);
        assert_eq!(m.at(1, 1), 1);
        let f = glrlm_features(&m, 3).unwrap();
        assert_eq!(f.short_run_emphasis, 0.625);
        assert_eq!(f.long_run_emphasis, 2.5);
    }

    #[test]
    fn constant_row_is_one_run() {
        let q = region(3, &[&[1; 7]]);
        let m = glrlm(&q, &[(0, 1)]);
        assert_eq!(m.n_runs, 1);
        assert_eq!(m.at(1, 7), 1);
    }

    #[test]
    fn unit_runs() {
        let q = region(2, &[&[0, 1, 0, 1]]);
        let f = glrlm_features(&glrlm(&q, &[(0, 1)]), 4).unwrap();
        assert_eq!((f.short_run_emphasis, f.run_percentage), (1.0, 1.0));
    }

    #[test]
    fn runs_break_at_cell_boundary() {
        let q = region(2, &[&[0, -1, 0]]);
        let m = glrlm(&q, &[(0, 1)]);
        assert_eq!(m.at(0, 1), 2);
        assert_eq!(m.n_runs, 2);
    }

    #[test]
    fn zero_runs_is_error() {
        let m = GlrlmMatrix { levels: 2, max_run: 1, r: vec![0, 0], directions: vec![], n_runs: 0 };
        assert_eq!(glrlm_features(&m, 1), Err(TextureError::NoRuns));
    }

    #[test]
    fn total_counts_match_runs() {
        let q = region(3, &[&[0, 1, 1, 2], &[1, 1, -1, 2], &[0, 0, 0, 2]]);
        let m = glrlm(&q, &DEFAULT_OFFSETS);
        assert_eq!(m.r.iter().sum::<u64>(), m.n_runs);
        // every pixel is covered exactly once per direction
        let covered: u64 =
            (0..m.levels).flat_map(|g| (1..=m.max_run).map(move |l| (g, l))).map(|(g, l)| m.at(g, l) * l as u64).sum();
        assert_eq!(covered, 4 * q.n_pixels() as u64);
    }
}
