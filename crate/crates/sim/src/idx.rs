//! MNIST in the big-endian IDX container.

use std::path::Path;

use crossbar_core::dataset::Dataset;
use crossbar_core::Matrix;

use crate::error::{Result, SimError};

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

/// Standard file names inside an MNIST directory.
pub const TRAIN_IMAGES: &str = "train-images-idx3-ubyte";
pub const TRAIN_LABELS: &str = "train-labels-idx1-ubyte";
pub const TEST_IMAGES: &str = "t10k-images-idx3-ubyte";
pub const TEST_LABELS: &str = "t10k-labels-idx1-ubyte";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    fn files(self) -> (&'static str, &'static str) {
        match self {
            Split::Train => (TRAIN_IMAGES, TRAIN_LABELS),
            Split::Test => (TEST_IMAGES, TEST_LABELS),
        }
    }
}

fn be_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_be_bytes(bytes[at..at + 4].try_into().expect("4 bytes"))
}

fn header(path: &Path, bytes: &[u8], magic: u32, words: usize) -> Result<Vec<usize>> {
    let need = 4 * (words + 1);
    if bytes.len() < need {
        return Err(SimError::Truncated { path: path.into(), expected: need, actual: bytes.len() });
    }
    let found = be_u32(bytes, 0);
    if found != magic {
        return Err(SimError::BadMagic { path: path.into(), expected: magic, found });
    }
    Ok((0..words).map(|i| be_u32(bytes, 4 * (i + 1)) as usize).collect())
}

/// Pixels as `count x (rows * cols)`, scaled by 1/255.
pub fn parse_images(path: &Path, bytes: &[u8]) -> Result<Matrix> {
    let dims = header(path, bytes, IMAGES_MAGIC, 3)?;
    let (count, pixels) = (dims[0], dims[1] * dims[2]);
    let expected = 16 + count * pixels;
    if bytes.len() < expected {
        return Err(SimError::Truncated { path: path.into(), expected, actual: bytes.len() });
    }
    let data = bytes[16..expected].iter().map(|&b| f64::from(b) / 255.0).collect();
    Ok(Matrix::from_vec(count, pixels, data)?)
}

pub fn parse_labels(path: &Path, bytes: &[u8]) -> Result<Vec<usize>> {
    let count = header(path, bytes, LABELS_MAGIC, 1)?[0];
    let expected = 8 + count;
    if bytes.len() < expected {
        return Err(SimError::Truncated { path: path.into(), expected, actual: bytes.len() });
    }
    bytes[8..expected]
        .iter()
        .enumerate()
        .map(|(index, &label)| {
            if label <= 9 {
                Ok(usize::from(label))
            } else {
                Err(SimError::InvalidLabel { path: path.into(), index, label })
            }
        })
        .collect()
}

pub fn load_mnist_idx(images_path: &Path, labels_path: &Path) -> Result<Dataset> {
    let image_bytes = std::fs::read(images_path).map_err(SimError::io(images_path))?;
    let label_bytes = std::fs::read(labels_path).map_err(SimError::io(labels_path))?;
    let images = parse_images(images_path, &image_bytes)?;
    let labels = parse_labels(labels_path, &label_bytes)?;
    if images.rows() != labels.len() {
        return Err(SimError::CountMismatch { images: images.rows(), labels: labels.len() });
    }
    Ok(Dataset::new(images, labels)?)
}

/// Loads one split from a directory holding the four standard files.
pub fn load_mnist_split(dir: &Path, split: Split) -> Result<Dataset> {
    let (images, labels) = split.files();
    load_mnist_idx(&dir.join(images), &dir.join(labels))
}

/// Whether `dir` holds all four standard files.
pub fn mnist_available(dir: &Path) -> bool {
    [TRAIN_IMAGES, TRAIN_LABELS, TEST_IMAGES, TEST_LABELS].iter().all(|f| dir.join(f).is_file())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn image_file(count: u32, pixels: &[u8]) -> Vec<u8> {
        let mut b = Vec::new();
        for w in [IMAGES_MAGIC, count, 1, 2] {
            b.extend_from_slice(&w.to_be_bytes());
        }
        b.extend_from_slice(pixels);
        b
    }

    #[test]
    fn parses_and_scales() {
        let p = Path::new("mem");
        let m = parse_images(p, &image_file(2, &[0, 255, 51, 102])).unwrap();
        assert_eq!(m.shape(), (2, 2));
        assert_eq!(m.as_slice(), &[0.0, 1.0, 0.2, 0.4]);
        let mut l = LABELS_MAGIC.to_be_bytes().to_vec();
        l.extend_from_slice(&2u32.to_be_bytes());
        l.extend_from_slice(&[7, 0]);
        assert_eq!(parse_labels(p, &l).unwrap(), vec![7, 0]);
        l[9] = 12;
        assert!(matches!(parse_labels(p, &l), Err(SimError::InvalidLabel { index: 1, label: 12, .. })));
    }

    #[test]
    fn rejects_bad_magic_and_truncation() {
        let p = Path::new("mem");
        let mut f = image_file(2, &[0, 1, 2, 3]);
        assert!(matches!(parse_images(p, &f[..f.len() - 1]), Err(SimError::Truncated { expected: 20, actual: 19, .. })));
        assert!(matches!(parse_images(p, &f[..6]), Err(SimError::Truncated { .. })));
        f[3] = 0x01;
        assert!(matches!(parse_images(p, &f), Err(SimError::BadMagic { found: 0x801, .. })));
    }
}
