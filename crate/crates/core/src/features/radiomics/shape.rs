use serde::Serialize;

use crate::dataset::LabelMask;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShapeFeatures {
    pub area_um2: f64,
    pub perimeter_um: f64,
    pub major_axis_um: f64,
    pub minor_axis_um: f64,
    /// minor / major, 1 for degenerate cells.
    pub elongation: f64,
    /// 4 pi area / perimeter^2.
    pub compactness: f64,
    pub eccentricity: f64,
    /// Pixel coordinates `(x, y)`.
    pub centroid: (f64, f64),
}

impl ShapeFeatures {
    /// Table columns; the centroid is carried by the row itself.
    pub const NAMES: [&'static str; 7] =
        ["area_um2", "perimeter_um", "major_axis_um", "minor_axis_um", "elongation", "compactness", "eccentricity"];

    pub fn to_vec(&self) -> Vec<f64> {
        vec![
            self.area_um2,
            self.perimeter_um,
            self.major_axis_um,
            self.minor_axis_um,
            self.elongation,
            self.compactness,
            self.eccentricity,
        ]
    }
}

/// Shape descriptors of `cell_id`; `None` if the cell has no pixels.
pub fn shape_features(mask: &LabelMask, cell_id: u32, pixel_spacing_um: f64) -> Option<ShapeFeatures> {
    let pixels: Vec<usize> = (0..mask.labels.len()).filter(|&i| mask.labels[i] == cell_id).collect();
    (!pixels.is_empty()).then(|| shape_from_pixels(mask, cell_id, &pixels, pixel_spacing_um))
}

pub(crate) fn shape_from_pixels(mask: &LabelMask, cell_id: u32, pixels: &[usize], spacing: f64) -> ShapeFeatures {
    let w = mask.width as isize;
    let h = mask.height as isize;
    let n = pixels.len() as f64;
    let (mut sx, mut sy) = (0.0, 0.0);
    let mut edges = 0usize;
    for &p in pixels {
        let (r, c) = ((p / mask.width) as isize, (p % mask.width) as isize);
        sx += c as f64;
        sy += r as f64;
        for (dr, dc) in [(-1, 0), (1, 0), (0, -1), (0, 1)] {
            let (rr, cc) = (r + dr, c + dc);
            if rr < 0 || cc < 0 || rr >= h || cc >= w || mask.labels[(rr * w + cc) as usize] != cell_id {
                edges += 1;
            }
        }
    }
    let (cx, cy) = (sx / n, sy / n);
    let (mut mxx, mut myy, mut mxy) = (0.0, 0.0, 0.0);
    for &p in pixels {
        let dx = (p % mask.width) as f64 - cx;
        let dy = (p / mask.width) as f64 - cy;
        mxx += dx * dx;
        myy += dy * dy;
        mxy += dx * dy;
    }
    let (mxx, myy, mxy) = (mxx / n, myy / n, mxy / n);
    let half_trace = (mxx + myy) / 2.0;
    let disc = (((mxx - myy) / 2.0).powi(2) + mxy * mxy).sqrt();
    let l1 = (half_trace + disc).max(0.0);
    let l2 = (half_trace - disc).max(0.0);
    let major = 4.0 * l1.sqrt() * spacing;
    let minor = 4.0 * l2.sqrt() * spacing;
    let area = n * spacing * spacing;
    let perimeter = edges as f64 * spacing;
    ShapeFeatures {
        area_um2: area,
        perimeter_um: perimeter,
        major_axis_um: major,
        minor_axis_um: minor,
        elongation: if major > 0.0 { minor / major } else { 1.0 },
        compactness: 4.0 * std::f64::consts::PI * area / (perimeter * perimeter),
        eccentricity: if l1 > 0.0 { (1.0 - l2 / l1).max(0.0).sqrt() } else { 0.0 },
        centroid: (cx, cy),
    }
}
