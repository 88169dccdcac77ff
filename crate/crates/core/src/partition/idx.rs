//! Reader for the big-endian IDX format used by MNIST.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::partition::Dataset;
use crate::tensor::Tensor2;

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;

fn be_u32(bytes: &[u8], at: usize) -> Option<u32> {
    bytes.get(at..at + 4).map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
}

fn malformed(path: &Path, reason: impl Into<String>) -> Error {
    Error::Idx { path: path.to_path_buf(), reason: reason.into() }
}

/// Parses an image file; returns `(count, rows·cols, pixels)` with pixels in `[0, 1]`.
pub fn parse_images(bytes: &[u8], path: &Path) -> Result<(usize, usize, Vec<f64>)> {
    let magic = be_u32(bytes, 0).ok_or_else(|| malformed(path, "truncated header"))?;
    if magic != IMAGE_MAGIC {
        return Err(malformed(path, format!("image magic {magic:#010x}, expected {IMAGE_MAGIC:#010x}")));
    }
    let (Some(n), Some(rows), Some(cols)) = (be_u32(bytes, 4), be_u32(bytes, 8), be_u32(bytes, 12)) else {
        return Err(malformed(path, "truncated header"));
    };
    let (n, dim) = (n as usize, rows as usize * cols as usize);
    let body = &bytes[16..];
    if body.len() != n * dim {
        return Err(malformed(path, format!("expected {} pixel bytes, found {}", n * dim, body.len())));
    }
    Ok((n, dim, body.iter().map(|&b| f64::from(b) / 255.0).collect()))
}

pub fn parse_labels(bytes: &[u8], path: &Path) -> Result<Vec<usize>> {
    let magic = be_u32(bytes, 0).ok_or_else(|| malformed(path, "truncated header"))?;
    if magic != LABEL_MAGIC {
        return Err(malformed(path, format!("label magic {magic:#010x}, expected {LABEL_MAGIC:#010x}")));
    }
    let n = be_u32(bytes, 4).ok_or_else(|| malformed(path, "truncated header"))? as usize;
    let body = &bytes[8..];
    if body.len() != n {
        return Err(malformed(path, format!("expected {n} labels, found {}", body.len())));
    }
    Ok(body.iter().map(|&b| b as usize).collect())
}

/// Loads an image/label file pair, optionally keeping only the first `limit` samples.
pub fn load(images: &Path, labels: &Path, limit: Option<usize>) -> Result<Dataset> {
    let (n, dim, mut pixels) = parse_images(&fs::read(images)?, images)?;
    let mut ys = parse_labels(&fs::read(labels)?, labels)?;
    if ys.len() != n {
        return Err(malformed(labels, format!("{} labels for {n} images", ys.len())));
    }
    let keep = limit.map_or(n, |l| l.min(n));
    pixels.truncate(keep * dim);
    ys.truncate(keep);
    let classes = ys.iter().copied().max().map_or(0, |m| m + 1).max(10);
    Dataset::new(Tensor2::from_vec(keep, dim, pixels)?, ys, classes)
}
