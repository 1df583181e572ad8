//! Bit-exact file formats.
//!
//! * Channels: binary PGM (`P5`). Samples wider than one byte are big-endian.
//! * Masks: `CGMK` magic, u16 LE width, u16 LE height, then u32 LE labels.
//! * Labels: CSV `cell_id,class_label` with class labels in {0, 1, -1}.

use std::path::Path;

use super::{CellLabels, ChannelImage, ClassLabel, LabelMask};
use crate::{Error, Result};

const MASK_MAGIC: &[u8; 4] = b"CGMK";

fn malformed(path: &Path, message: impl Into<String>) -> Error {
    Error::Malformed { sample_id: None, path: path.to_path_buf(), message: message.into() }
}

pub fn encode_pgm(img: &ChannelImage) -> Vec<u8> {
    let header = format!("P5\n{} {}\n65535\n", img.width, img.height);
    let mut out = Vec::with_capacity(header.len() + img.values.len() * 2);
    out.extend_from_slice(header.as_bytes());
    for v in &img.values {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out
}

pub fn decode_pgm(bytes: &[u8], path: &Path) -> Result<ChannelImage> {
    let mut pos = 0usize;
    let next_token = |pos: &mut usize| -> Option<String> {
        loop {
            while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
                *pos += 1;
            }
            if *pos < bytes.len() && bytes[*pos] == b'#' {
                while *pos < bytes.len() && bytes[*pos] != b'\n' {
                    *pos += 1;
                }
                continue;
            }
            break;
        }
        let start = *pos;
        while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        (start < *pos).then(|| String::from_utf8_lossy(&bytes[start..*pos]).into_owned())
    };

    let magic = next_token(&mut pos).ok_or_else(|| malformed(path, "empty file"))?;
    if magic != "P5" {
        return Err(malformed(path, format!("expected PGM magic P5, found {magic:?}")));
    }
    let mut field = |name: &str| -> Result<usize> {
        let tok = next_token(&mut pos).ok_or_else(|| malformed(path, format!("missing {name}")))?;
        tok.parse::<usize>().map_err(|_| malformed(path, format!("invalid {name} {tok:?}")))
    };
    let width = field("width")?;
    let height = field("height")?;
    let maxval = field("maxval")?;
    if width == 0 || height == 0 {
        return Err(malformed(path, "zero image dimension"));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(malformed(path, format!("maxval {maxval} outside 1..=65535")));
    }
    // Exactly one whitespace byte separates the header from the raster.
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(malformed(path, "missing raster"));
    }
    pos += 1;
    let n = width * height;
    let raster = &bytes[pos..];
    let values = if maxval > 255 {
        if raster.len() != 2 * n {
            return Err(malformed(path, format!("raster has {} bytes, expected {}", raster.len(), 2 * n)));
        }
        raster.chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]])).collect()
    } else {
        if raster.len() != n {
            return Err(malformed(path, format!("raster has {} bytes, expected {}", raster.len(), n)));
        }
        raster.iter().map(|&b| b as u16).collect()
    };
    ChannelImage::new(width, height, values)
}

pub fn encode_mask(mask: &LabelMask) -> Result<Vec<u8>> {
    let w = u16::try_from(mask.width).map_err(|_| Error::invalid("mask width exceeds u16"))?;
    let h = u16::try_from(mask.height).map_err(|_| Error::invalid("mask height exceeds u16"))?;
    let mut out = Vec::with_capacity(8 + 4 * mask.labels.len());
    out.extend_from_slice(MASK_MAGIC);
    out.extend_from_slice(&w.to_le_bytes());
    out.extend_from_slice(&h.to_le_bytes());
    for l in &mask.labels {
        out.extend_from_slice(&l.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_mask(bytes: &[u8], path: &Path) -> Result<LabelMask> {
    if bytes.len() < 8 || &bytes[..4] != MASK_MAGIC {
        return Err(malformed(path, "missing CGMK header"));
    }
    let width = u16::from_le_bytes([bytes[4], bytes[5]]) as usize;
    let height = u16::from_le_bytes([bytes[6], bytes[7]]) as usize;
    if width == 0 || height == 0 {
        return Err(malformed(path, "zero mask dimension"));
    }
    let body = &bytes[8..];
    if body.len() != 4 * width * height {
        return Err(malformed(path, format!("mask body has {} bytes, expected {}", body.len(), 4 * width * height)));
    }
    let labels = body.chunks_exact(4).map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
    LabelMask::new(width, height, labels)
}

pub fn parse_labels_csv(text: &str, path: &Path) -> Result<CellLabels> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| malformed(path, "empty labels file"))?;
    if header.trim() != "cell_id,class_label" {
        return Err(malformed(path, format!("expected header cell_id,class_label, found {header:?}")));
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad = || malformed(path, format!("line {}: {line:?}", i + 2));
        let (id, label) = line.split_once(',').ok_or_else(bad)?;
        let id: u32 = id.trim().parse().map_err(|_| bad())?;
        let label: i8 = label.trim().parse().map_err(|_| bad())?;
        let label = ClassLabel::from_i8(label).ok_or_else(bad)?;
        out.push((id, label));
    }
    Ok(out)
}

pub fn write_labels_csv(labels: &CellLabels) -> String {
    let mut s = String::from("cell_id,class_label\n");
    for (id, l) in labels {
        s.push_str(&format!("{id},{}\n", l.as_i8()));
    }
    s
}
