use crate::dataset::ChannelImage;
use crate::{Error, Result};

/// A cell's pixels quantized to `levels` gray levels, stored over the cell's
/// bounding box. Pixels outside the cell are `None`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuantizedRegion {
    levels: usize,
    height: usize,
    width: usize,
    grid: Vec<Option<u16>>,
}

impl QuantizedRegion {
    /// Builds a region from explicit rows of bins (`None` = outside the cell).
    pub fn from_rows(levels: usize, rows: &[Vec<Option<u16>>]) -> Result<Self> {
        if levels < 2 {
            return Err(Error::invalid("at least two gray levels required"));
        }
        let height = rows.len();
        let width = rows.first().map_or(0, Vec::len);
        if height == 0 || width == 0 || rows.iter().any(|r| r.len() != width) {
            return Err(Error::invalid("region rows must be non-empty and rectangular"));
        }
        let grid: Vec<Option<u16>> = rows.iter().flatten().copied().collect();
        if grid.iter().all(Option::is_none) {
            return Err(Error::invalid("region has no pixels"));
        }
        if grid.iter().flatten().any(|&b| b as usize >= levels) {
            return Err(Error::invalid("bin index out of range"));
        }
        Ok(Self { levels, height, width, grid })
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Bin at local coordinates, `None` outside the cell or the box.
    #[inline]
    pub fn bin(&self, row: isize, col: isize) -> Option<u16> {
        if row < 0 || col < 0 || row as usize >= self.height || col as usize >= self.width {
            return None;
        }
        self.grid[row as usize * self.width + col as usize]
    }

    pub fn n_pixels(&self) -> usize {
        self.grid.iter().filter(|b| b.is_some()).count()
    }

    /// `(row, col, bin)` of every cell pixel in row-major order.
    pub fn pixels(&self) -> impl Iterator<Item = (isize, isize, u16)> + '_ {
        self.grid
            .iter()
            .enumerate()
            .filter_map(move |(i, b)| b.map(|b| ((i / self.width) as isize, (i % self.width) as isize, b)))
    }
}

/// Equal-width binning over `[min, max]` of `values`:
/// `bin = min(floor((v - min) * L / (max - min)), L - 1)`; a constant input
/// maps to bin 0.
pub fn quantize_values(values: &[f64], levels: usize) -> Vec<u16> {
    let (lo, hi) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let range = hi - lo;
    if !(range > 0.0) {
        return vec![0; values.len()];
    }
    let top = (levels - 1) as f64;
    values.iter().map(|&v| ((v - lo) * levels as f64 / range).floor().min(top) as u16).collect()
}

/// Quantizes the cell given by row-major pixel indices into `image`.
pub fn quantize(image: &ChannelImage, pixels: &[usize], levels: usize) -> QuantizedRegion {
    assert!(!pixels.is_empty(), "cell must have pixels");
    assert!(levels >= 2, "at least two gray levels required");
    let w = image.width;
    let (mut r0, mut r1, mut c0, mut c1) = (usize::MAX, 0, usize::MAX, 0);
    for &p in pixels {
        let (r, c) = (p / w, p % w);
        r0 = r0.min(r);
        r1 = r1.max(r);
        c0 = c0.min(c);
        c1 = c1.max(c);
    }
    let values: Vec<f64> = pixels.iter().map(|&p| image.values[p] as f64).collect();
    let bins = quantize_values(&values, levels);
    let (height, width) = (r1 - r0 + 1, c1 - c0 + 1);
    let mut grid = vec![None; height * width];
    for (&p, &b) in pixels.iter().zip(&bins) {
        grid[(p / w - r0) * width + (p % w - c0)] = Some(b);
    }
    QuantizedRegion { levels, height, width, grid }
}
