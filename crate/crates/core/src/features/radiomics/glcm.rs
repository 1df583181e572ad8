//! Gray-level co-occurrence matrix over a single cell.

use serde::Serialize;

use super::quantize::QuantizedRegion;
use super::TextureError;

/// Four directions at distance 1: 0, 90, 45 and 135 degrees as `(dr, dc)`.
pub const DEFAULT_OFFSETS: [(isize, isize); 4] = [(0, 1), (1, 0), (1, 1), (1, -1)];

#[derive(Debug, Clone, PartialEq)]
pub struct GlcmMatrix {
    pub levels: usize,
    /// Row-major `levels x levels`, sums to 1.
    pub p: Vec<f64>,
    pub offsets: Vec<(isize, isize)>,
    pub symmetric: bool,
    /// Number of ordered pairs counted, including transposed ones.
    pub n_pairs: u64,
}

impl GlcmMatrix {
    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.p[i * self.levels + j]
    }
}

/// Raw co-occurrence counts accumulated over all offsets. Both pixels of a pair
/// must belong to the cell.
pub fn glcm_counts(q: &QuantizedRegion, offsets: &[(isize, isize)], symmetric: bool) -> Vec<u64> {
    let l = q.levels();
    let mut counts = vec![0u64; l * l];
    for (r, c, a) in q.pixels() {
        for &(dr, dc) in offsets {
            if let Some(b) = q.bin(r + dr, c + dc) {
                counts[a as usize * l + b as usize] += 1;
                if symmetric {
                    counts[b as usize * l + a as usize] += 1;
                }
            }
        }
    }
    counts
}

pub fn glcm(q: &QuantizedRegion, offsets: &[(isize, isize)], symmetric: bool) -> Result<GlcmMatrix, TextureError> {
    if offsets.contains(&(0, 0)) {
        return Err(TextureError::ZeroOffset);
    }
    let counts = glcm_counts(q, offsets, symmetric);
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(TextureError::NoPairs);
    }
    let t = total as f64;
    Ok(GlcmMatrix {
        levels: q.levels(),
        p: counts.iter().map(|&c| c as f64 / t).collect(),
        offsets: offsets.to_vec(),
        symmetric,
        n_pairs: total,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GlcmFeatures {
    pub contrast: f64,
    pub correlation: f64,
    pub angular_second_moment: f64,
    pub inverse_difference_moment: f64,
    pub entropy: f64,
}

impl GlcmFeatures {
    pub const NAMES: [&'static str; 5] = ["glcm_contrast", "glcm_correlation", "glcm_asm", "glcm_idm", "glcm_entropy"];

    pub fn to_vec(&self) -> Vec<f64> {
        vec![self.contrast, self.correlation, self.angular_second_moment, self.inverse_difference_moment, self.entropy]
    }
}

/// Marginal standard deviations below this are treated as zero.
pub(crate) const STD_FLOOR: f64 = 1e-12;

pub fn glcm_features(m: &GlcmMatrix) -> GlcmFeatures {
    let l = m.levels;
    let (mut mu_i, mut mu_j) = (0.0, 0.0);
    for i in 0..l {
        for j in 0..l {
            let p = m.at(i, j);
            mu_i += i as f64 * p;
            mu_j += j as f64 * p;
        }
    }
    let (mut var_i, mut var_j, mut cov) = (0.0, 0.0, 0.0);
    let (mut contrast, mut asm, mut idm, mut entropy) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..l {
        for j in 0..l {
            let p = m.at(i, j);
            if p == 0.0 {
                continue;
            }
            let (di, dj) = (i as f64 - mu_i, j as f64 - mu_j);
            var_i += di * di * p;
            var_j += dj * dj * p;
            cov += di * dj * p;
            let d2 = (i as f64 - j as f64).powi(2);
            contrast += p * d2;
            asm += p * p;
            idm += p / (1.0 + d2);
            entropy -= p * p.log2();
        }
    }
    let (sd_i, sd_j) = (var_i.sqrt(), var_j.sqrt());
    let correlation = if sd_i < STD_FLOOR || sd_j < STD_FLOOR { 0.0 } else { cov / (sd_i * sd_j) };
    GlcmFeatures { contrast, correlation, angular_second_moment: asm, inverse_difference_moment: idm, entropy }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::Rng;

    pub(crate) fn region(levels: usize, rows: &[&[i32]]) -> QuantizedRegion {
        let rows: Vec<Vec<Option<u16>>> =
            rows.iter().map(|r| r.iter().map(|&v| (v >= 0).then_some(v as u16)).collect()).collect();
        QuantizedRegion::from_rows(levels, &rows).unwrap()
    }

    #[test]
    fn two_by_two_horizontal() {
        let q = region(2, &[&[0, 0], &[0, 1]]);
        let m = glcm(&q, &[(0, 1)], true).unwrap();
        assert_eq!(m.p, vec![0.5, 0.25, 0.25, 0.0]);
        let f = glcm_features(&m);
        assert_eq!(f.contrast, 0.5);
    }

    #[test]
    fn constant_region_single_entry() {
        let q = region(4, &[&[2, 2, 2], &[2, 2, -1]]);
        let m = glcm(&q, &DEFAULT_OFFSETS, true).unwrap();
        assert_eq!(m.at(2, 2), 1.0);
        assert_eq!(m.p.iter().filter(|&&p| p > 0.0).count(), 1);
        let f = glcm_features(&m);
        assert_eq!((f.contrast, f.angular_second_moment, f.entropy, f.correlation), (0.0, 1.0, 0.0, 0.0));
    }

    #[test]
    fn pair_must_stay_inside_cell() {
        let q = region(2, &[&[0, -1], &[-1, 1]]);
        assert_eq!(glcm(&q, &[(0, 1), (1, 0)], true), Err(TextureError::NoPairs));
        // the 135 degree neighbour of (0,1)... exists only for (1,1)->(0,0) via (1,1) offset
        assert!(glcm(&q, &[(1, 1)], false).is_ok());
        assert_eq!(glcm(&q, &[(0, 0)], true), Err(TextureError::ZeroOffset));
    }

    #[test]
    fn random_matrix_features_match_direct_sums() {
        let mut g = rng::from_seed(21);
        for _ in 0..50 {
            let l = g.random_range(2..9);
            let mut raw: Vec<f64> =
                (0..l * l).map(|_| if g.random_bool(0.3) { 0.0 } else { g.random::<f64>() }).collect();
            raw[0] += 1e-3;
            let s: f64 = raw.iter().sum();
            let m = GlcmMatrix {
                levels: l,
                p: raw.iter().map(|v| v / s).collect(),
                offsets: vec![],
                symmetric: false,
                n_pairs: 0,
            };
            let f = glcm_features(&m);
            // direct double loops, one feature at a time
            let idx = |i: usize, j: usize| m.p[i * l + j];
            let mut contrast = 0.0;
            let mut asm = 0.0;
            let mut idm = 0.0;
            let mut ent = 0.0;
            let mut pi = vec![0.0; l];
            let mut pj = vec![0.0; l];
            for i in 0..l {
                for j in 0..l {
                    let p = idx(i, j);
                    contrast += p * ((i as f64 - j as f64).powi(2));
                    asm += p.powi(2);
                    idm += p / (1.0 + (i as f64 - j as f64).powi(2));
                    if p > 0.0 {
                        ent += -p * p.ln() / std::f64::consts::LN_2;
                    }
                    pi[i] += p;
                    pj[j] += p;
                }
            }
            let mi: f64 = (0..l).map(|i| i as f64 * pi[i]).sum();
            let mj: f64 = (0..l).map(|j| j as f64 * pj[j]).sum();
            let si = (0..l).map(|i| (i as f64 - mi).powi(2) * pi[i]).sum::<f64>().sqrt();
            let sj = (0..l).map(|j| (j as f64 - mj).powi(2) * pj[j]).sum::<f64>().sqrt();
            let mut corr = 0.0;
            for i in 0..l {
                for j in 0..l {
                    corr += (i as f64 - mi) * (j as f64 - mj) * idx(i, j);
                }
            }
            let corr = if si < STD_FLOOR || sj < STD_FLOOR { 0.0 } else { corr / (si * sj) };
            let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0);
            assert!(close(f.contrast, contrast));
            assert!(close(f.angular_second_moment, asm));
            assert!(close(f.inverse_difference_moment, idm));
            assert!(close(f.entropy, ent));
            assert!(close(f.correlation, corr), "{} {}", f.correlation, corr);
        }
    }
}
