use serde::Serialize;

use super::quantize::quantize_values;
use crate::dataset::ChannelImage;

/// Histogram resolution for the first-order entropy.
pub const ENTROPY_BINS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FirstOrderFeatures {
    pub mean: f64,
    /// Population variance.
    pub variance: f64,
    pub skewness: f64,
    /// Non-excess kurtosis (m4 / m2^2).
    pub kurtosis: f64,
    /// Sum of squared intensities.
    pub energy: f64,
    /// Bits, over a 16-bin equal-width histogram.
    pub entropy: f64,
    pub min: f64,
    pub max: f64,
}

impl FirstOrderFeatures {
    pub const NAMES: [&'static str; 8] =
        ["mean", "variance", "skewness", "kurtosis", "energy", "entropy", "min", "max"];

    pub fn to_vec(&self) -> Vec<f64> {
        vec![self.mean, self.variance, self.skewness, self.kurtosis, self.energy, self.entropy, self.min, self.max]
    }
}

pub fn first_order_features(image: &ChannelImage, pixels: &[usize]) -> FirstOrderFeatures {
    let values: Vec<f64> = pixels.iter().map(|&p| image.values[p] as f64).collect();
    first_order_from_values(&values)
}

/// Single-pass computation with the streaming central-moment recurrences.
pub fn first_order_from_values(values: &[f64]) -> FirstOrderFeatures {
    assert!(!values.is_empty(), "cell must have pixels");
    let (mut n, mut mean, mut m2, mut m3, mut m4) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let (mut energy, mut lo, mut hi) = (0.0, f64::INFINITY, f64::NEG_INFINITY);
    for &x in values {
        let n1 = n;
        n += 1.0;
        let delta = x - mean;
        let delta_n = delta / n;
        let delta_n2 = delta_n * delta_n;
        let term1 = delta * delta_n * n1;
        mean += delta_n;
        m4 += term1 * delta_n2 * (n * n - 3.0 * n + 3.0) + 6.0 * delta_n2 * m2 - 4.0 * delta_n * m3;
        m3 += term1 * delta_n * (n - 2.0) - 3.0 * delta_n * m2;
        m2 += term1;
        energy += x * x;
        lo = lo.min(x);
        hi = hi.max(x);
    }
    let variance = m2 / n;
    let (skewness, kurtosis) =
        if variance > 0.0 { ((m3 / n) / variance.powf(1.5), (m4 / n) / (variance * variance)) } else { (0.0, 0.0) };
    FirstOrderFeatures {
        mean,
        variance,
        skewness,
        kurtosis,
        energy,
        entropy: histogram_entropy(values),
        min: lo,
        max: hi,
    }
}

fn histogram_entropy(values: &[f64]) -> f64 {
    let mut hist = [0usize; ENTROPY_BINS];
    for b in quantize_values(values, ENTROPY_BINS) {
        hist[b as usize] += 1;
    }
    let n = values.len() as f64;
    hist.iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::Rng;

    /// Textbook two-pass moments.
    fn two_pass(v: &[f64]) -> (f64, f64, f64, f64) {
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let m = |k: i32| v.iter().map(|x| (x - mean).powi(k)).sum::<f64>() / n;
        let var = m(2);
        (mean, var, m(3) / var.powf(1.5), m(4) / (var * var))
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
    }

    #[test]
    fn constant_region() {
        let f = first_order_from_values(&[7.0; 9]);
        assert_eq!((f.mean, f.variance, f.entropy, f.skewness, f.kurtosis), (7.0, 0.0, 0.0, 0.0, 0.0));
        assert_eq!((f.min, f.max, f.energy), (7.0, 7.0, 441.0));
    }

    #[test]
    fn two_values() {
        let f = first_order_from_values(&[1.0, 3.0]);
        assert_eq!((f.mean, f.variance), (2.0, 1.0));
        assert_eq!(f.entropy, 1.0);
    }

    #[test]
    fn random_cell_matches_two_pass_oracle() {
        let mut g = rng::from_seed(3);
        for _ in 0..20 {
            let v: Vec<f64> = (0..100).map(|_| g.random_range(0..65535u16) as f64).collect();
            let f = first_order_from_values(&v);
            let (mean, var, skew, kurt) = two_pass(&v);
            assert!(rel(f.mean, mean) < 1e-12);
            assert!(rel(f.variance, var) < 1e-12);
            assert!(rel(f.skewness, skew) < 1e-12, "{} {}", f.skewness, skew);
            assert!(rel(f.kurtosis, kurt) < 1e-12);
        }
    }
}
