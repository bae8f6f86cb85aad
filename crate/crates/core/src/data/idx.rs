//! IDX containers as used by MNIST: big-endian `u32` magic, big-endian
//! `u32` extents, then unsigned bytes.

use crate::error::{CclError, Result};

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

fn be_u32(bytes: &[u8], at: usize, what: &str) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes(b.try_into().unwrap()))
        .ok_or_else(|| CclError::format(what, "truncated header"))
}

/// Returns `(count, rows, cols, pixels)`.
pub fn parse_images(bytes: &[u8]) -> Result<(usize, usize, usize, &[u8])> {
    let what = "IDX image file";
    let magic = be_u32(bytes, 0, what)?;
    if magic != IMAGES_MAGIC {
        return Err(CclError::format(what, format!("bad magic {magic:#010x}")));
    }
    let n = be_u32(bytes, 4, what)? as usize;
    let rows = be_u32(bytes, 8, what)? as usize;
    let cols = be_u32(bytes, 12, what)? as usize;
    let body = &bytes[16..];
    let need = n * rows * cols;
    if n == 0 || rows == 0 || cols == 0 {
        return Err(CclError::format(what, "empty image set"));
    }
    if body.len() < need {
        return Err(CclError::format(
            what,
            format!("truncated: {need} pixel bytes declared, {} present", body.len()),
        ));
    }
    Ok((n, rows, cols, &body[..need]))
}

pub fn parse_labels(bytes: &[u8]) -> Result<&[u8]> {
    let what = "IDX label file";
    let magic = be_u32(bytes, 0, what)?;
    if magic != LABELS_MAGIC {
        return Err(CclError::format(what, format!("bad magic {magic:#010x}")));
    }
    let n = be_u32(bytes, 4, what)? as usize;
    let body = &bytes[8..];
    if body.len() < n {
        return Err(CclError::format(
            what,
            format!("truncated: {n} labels declared, {} present", body.len()),
        ));
    }
    Ok(&body[..n])
}

pub fn encode_images(n: usize, rows: usize, cols: usize, pixels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + pixels.len());
    for v in [IMAGES_MAGIC, n as u32, rows as u32, cols as u32] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out.extend_from_slice(pixels);
    out
}

pub fn encode_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}
