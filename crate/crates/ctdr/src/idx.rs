//! IDX image and label files (big-endian, unsigned-byte payload).

use std::fs;
use std::path::Path;

use ctdr_core::data::Dataset;
use ctdr_core::Matrix;

pub const IMAGE_MAGIC: u32 = 2051;
pub const LABEL_MAGIC: u32 = 2049;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum IdxError {
    #[error("bad magic number {found}, expected {expected}")]
    BadMagic { expected: u32, found: u32 },
    #[error("count mismatch: {images} images but {labels} labels")]
    CountMismatch { images: usize, labels: usize },
    #[error("truncated file")]
    Truncated,
    #[error("label {label} out of range for {num_classes} classes")]
    LabelOutOfRange { label: u8, num_classes: usize },
}

/// Decoded image file: `count` images of `rows × cols` bytes.
#[derive(Debug, Clone, PartialEq)]
pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

fn read_u32(bytes: &[u8], at: usize) -> Result<u32, IdxError> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or(IdxError::Truncated)
}

fn check_magic(bytes: &[u8], expected: u32) -> Result<(), IdxError> {
    let found = read_u32(bytes, 0)?;
    if found != expected {
        return Err(IdxError::BadMagic { expected, found });
    }
    Ok(())
}

pub fn parse_images(bytes: &[u8]) -> Result<IdxImages, IdxError> {
    check_magic(bytes, IMAGE_MAGIC)?;
    let count = read_u32(bytes, 4)? as usize;
    let rows = read_u32(bytes, 8)? as usize;
    let cols = read_u32(bytes, 12)? as usize;
    let len = count
        .checked_mul(rows)
        .and_then(|n| n.checked_mul(cols))
        .ok_or(IdxError::Truncated)?;
    let pixels = bytes.get(16..16 + len).ok_or(IdxError::Truncated)?.to_vec();
    Ok(IdxImages {
        count,
        rows,
        cols,
        pixels,
    })
}

pub fn parse_labels(bytes: &[u8]) -> Result<Vec<u8>, IdxError> {
    check_magic(bytes, LABEL_MAGIC)?;
    let count = read_u32(bytes, 4)? as usize;
    Ok(bytes.get(8..8 + count).ok_or(IdxError::Truncated)?.to_vec())
}

/// Pairs decoded images with labels; features are `pixel / 255`, row-major.
pub fn to_dataset(
    name: &str,
    images: &IdxImages,
    labels: &[u8],
    num_classes: usize,
) -> Result<Dataset, IdxError> {
    if images.count != labels.len() {
        return Err(IdxError::CountMismatch {
            images: images.count,
            labels: labels.len(),
        });
    }
    if let Some(&label) = labels.iter().find(|&&l| l as usize >= num_classes) {
        return Err(IdxError::LabelOutOfRange { label, num_classes });
    }
    let width = images.rows * images.cols;
    let data = images.pixels.iter().map(|&p| f64::from(p) / 255.0).collect();
    let features = Matrix::from_vec(images.count, width, data).expect("length checked on parse");
    let labels = labels.iter().map(|&l| l as usize).collect();
    Ok(Dataset::new(name, features, Some(labels), num_classes).expect("labels checked above"))
}

/// Reads an image file and its label file into one labeled dataset.
pub fn load_idx(
    images_path: &Path,
    labels_path: &Path,
    num_classes: usize,
) -> crate::CliResult<(Dataset, (usize, usize))> {
    let read = |p: &Path| fs::read(p).map_err(|e| crate::CliError::io(p, e));
    let images = parse_images(&read(images_path)?).map_err(|e| crate::CliError::format(images_path, e))?;
    let labels = parse_labels(&read(labels_path)?).map_err(|e| crate::CliError::format(labels_path, e))?;
    let name = images_path
        .file_name()
        .map_or_else(String::new, |n| n.to_string_lossy().into_owned());
    let ds = to_dataset(&name, &images, &labels, num_classes).map_err(|e| crate::CliError::format(images_path, e))?;
    Ok((ds, (images.rows, images.cols)))
}

/// Serializes images in the IDX layout; used to build fixtures.
pub fn encode_images(images: &IdxImages) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + images.pixels.len());
    for v in [IMAGE_MAGIC, images.count as u32, images.rows as u32, images.cols as u32] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out.extend_from_slice(&images.pixels);
    out
}

pub fn encode_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}
