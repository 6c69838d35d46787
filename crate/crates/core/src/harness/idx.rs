//! IDX (MNIST) file decoding.
//!
//! Big-endian header: magic `0x00000803` followed by `[n, rows, cols]` for
//! images, magic `0x00000801` followed by `[n]` for labels, then one
//! unsigned byte per pixel or label. The payload length must match the
//! header exactly.

use std::path::Path;

use thiserror::Error;

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

#[derive(Debug, Error)]
pub enum IdxError {
    #[error("corrupt IDX header: {0}")]
    Header(String),
    #[error("corrupt IDX length: header implies {expected} payload bytes, found {found}")]
    Length { expected: u64, found: u64 },
    #[error("label {label} at index {index} is not a digit")]
    BadLabel { index: usize, label: u8 },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    /// `count * rows * cols` bytes, image-major.
    pub pixels: Vec<u8>,
}

impl IdxImages {
    pub fn image(&self, i: usize) -> &[u8] {
        let sz = self.rows * self.cols;
        &self.pixels[i * sz..(i + 1) * sz]
    }
}

fn read_u32(bytes: &[u8], at: usize) -> Result<u32, IdxError> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| IdxError::Header(format!("file ends inside the header ({} bytes)", bytes.len())))
}

fn check_magic(bytes: &[u8], want: u32) -> Result<(), IdxError> {
    let magic = read_u32(bytes, 0)?;
    if magic != want {
        return Err(IdxError::Header(format!("magic {magic:#010x}, expected {want:#010x}")));
    }
    Ok(())
}

fn check_payload(bytes: &[u8], header: usize, expected: u64) -> Result<(), IdxError> {
    let found = (bytes.len() - header) as u64;
    if found != expected {
        return Err(IdxError::Length { expected, found });
    }
    Ok(())
}

pub fn parse_idx_images(bytes: &[u8]) -> Result<IdxImages, IdxError> {
    check_magic(bytes, IMAGES_MAGIC)?;
    let count = read_u32(bytes, 4)?;
    let rows = read_u32(bytes, 8)?;
    let cols = read_u32(bytes, 12)?;
    let expected = u64::from(count)
        .checked_mul(u64::from(rows))
        .and_then(|v| v.checked_mul(u64::from(cols)))
        .ok_or_else(|| IdxError::Header(format!("dimensions {count}x{rows}x{cols} overflow")))?;
    check_payload(bytes, 16, expected)?;
    Ok(IdxImages {
        count: count as usize,
        rows: rows as usize,
        cols: cols as usize,
        pixels: bytes[16..].to_vec(),
    })
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>, IdxError> {
    check_magic(bytes, LABELS_MAGIC)?;
    let count = read_u32(bytes, 4)?;
    check_payload(bytes, 8, u64::from(count))?;
    Ok(bytes[8..].to_vec())
}

fn read_file(path: &Path) -> Result<Vec<u8>, IdxError> {
    std::fs::read(path).map_err(|source| IdxError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn read_idx_images(path: &Path) -> Result<IdxImages, IdxError> {
    parse_idx_images(&read_file(path)?)
}

pub fn read_idx_labels(path: &Path) -> Result<Vec<u8>, IdxError> {
    parse_idx_labels(&read_file(path)?)
}

/// Encodes images back to IDX bytes; used to build fixtures.
pub fn encode_idx_images(images: &IdxImages) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + images.pixels.len());
    out.extend_from_slice(&IMAGES_MAGIC.to_be_bytes());
    for v in [images.count, images.rows, images.cols] {
        out.extend_from_slice(&(v as u32).to_be_bytes());
    }
    out.extend_from_slice(&images.pixels);
    out
}

pub fn encode_idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> IdxImages {
        IdxImages {
            count: 2,
            rows: 2,
            cols: 3,
            pixels: (0..12).collect(),
        }
    }

    #[test]
    fn decodes_encoded_images() {
        let img = tiny();
        let parsed = parse_idx_images(&encode_idx_images(&img)).unwrap();
        assert_eq!(parsed, img);
        assert_eq!(parsed.image(1), &[6, 7, 8, 9, 10, 11]);
        assert_eq!(parse_idx_labels(&encode_idx_labels(&[3, 1, 4])).unwrap(), [3, 1, 4]);
    }

    #[test]
    fn truncated_image_file_is_rejected() {
        let mut bytes = encode_idx_images(&tiny());
        bytes.pop();
        let err = parse_idx_images(&bytes).unwrap_err();
        assert!(matches!(err, IdxError::Length { expected: 12, found: 11 }));
        assert!(err.to_string().contains("corrupt IDX length"));
        assert!(matches!(parse_idx_images(&bytes[..10]), Err(IdxError::Header(_))));
    }

    #[test]
    fn wrong_magic_and_trailing_bytes() {
        let labels = encode_idx_labels(&[1, 2]);
        assert!(matches!(parse_idx_images(&labels), Err(IdxError::Header(_))));
        let mut extra = labels.clone();
        extra.push(0);
        assert!(matches!(parse_idx_labels(&extra), Err(IdxError::Length { .. })));
        assert!(matches!(parse_idx_labels(&[]), Err(IdxError::Header(_))));
    }

    #[test]
    fn huge_header_counts_do_not_allocate() {
        let mut bytes = IMAGES_MAGIC.to_be_bytes().to_vec();
        for _ in 0..3 {
            bytes.extend_from_slice(&u32::MAX.to_be_bytes());
        }
        assert!(matches!(parse_idx_images(&bytes), Err(IdxError::Header(_))));
        let mut bytes = IMAGES_MAGIC.to_be_bytes().to_vec();
        for v in [u32::MAX, 28, 28] {
            bytes.extend_from_slice(&v.to_be_bytes());
        }
        assert!(matches!(parse_idx_images(&bytes), Err(IdxError::Length { .. })));
    }
}
