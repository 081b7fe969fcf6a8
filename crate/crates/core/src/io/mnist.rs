//! MNIST in the IDX format, optionally gzip-compressed.

use std::fs;
use std::io::Read;
use std::path::Path;

use flate2::read::GzDecoder;

use crate::error::{Error, Result};
use crate::nn::{ImageSet, Tensor};

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

/// Grayscale images normalized to `[0, 1]` with their digit labels.
#[derive(Clone, Debug, PartialEq)]
pub struct MnistDataset {
    rows: usize,
    cols: usize,
    pixels: Vec<f32>,
    labels: Vec<u8>,
}

impl MnistDataset {
    pub fn new(rows: usize, cols: usize, pixels: Vec<f32>, labels: Vec<u8>) -> Result<Self> {
        if pixels.len() != rows * cols * labels.len() {
            return Err(Error::Data(format!(
                "{} pixels do not form {} images of {rows}x{cols}",
                pixels.len(),
                labels.len()
            )));
        }
        if let Some(i) = labels.iter().position(|&l| l > 9) {
            return Err(Error::Data(format!(
                "label {i} is {} (expected 0-9)",
                labels[i]
            )));
        }
        Ok(Self {
            rows,
            cols,
            pixels,
            labels,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    /// Normalized pixels of image `index`, row-major.
    pub fn pixels(&self, index: usize) -> &[f32] {
        let size = self.rows * self.cols;
        &self.pixels[index * size..][..size]
    }
}

impl ImageSet for MnistDataset {
    fn len(&self) -> usize {
        self.labels.len()
    }

    /// Image as a `[1, rows, cols]` tensor.
    fn image(&self, index: usize) -> Tensor {
        let data = self.pixels(index).iter().map(|&p| f64::from(p)).collect();
        Tensor::new(vec![1, self.rows, self.cols], data).expect("image size")
    }

    fn label(&self, index: usize) -> usize {
        usize::from(self.labels[index])
    }
}

/// Loads an IDX image file and its label file. Pixels are `byte / 255` in
/// single precision.
pub fn load_mnist(
    images_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
) -> Result<MnistDataset> {
    let images_path = images_path.as_ref();
    let labels_path = labels_path.as_ref();
    let (count, rows, cols, bytes) = parse_images(&read_maybe_gz(images_path)?)
        .map_err(|e| Error::Data(format!("{}: {e}", images_path.display())))?;
    let labels = parse_labels(&read_maybe_gz(labels_path)?)
        .map_err(|e| Error::Data(format!("{}: {e}", labels_path.display())))?;
    if labels.len() != count {
        return Err(Error::Data(format!(
            "{} images but {} labels",
            count,
            labels.len()
        )));
    }
    let pixels = bytes.iter().map(|&b| f32::from(b) / 255.0).collect();
    MnistDataset::new(rows, cols, pixels, labels)
}

fn read_maybe_gz(path: &Path) -> Result<Vec<u8>> {
    let raw = fs::read(path).map_err(|e| Error::io(path, e))?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice())
            .read_to_end(&mut out)
            .map_err(|e| Error::io(path, e))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

fn be_u32(bytes: &[u8], at: usize) -> std::result::Result<u32, String> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| format!("truncated header ({} bytes)", bytes.len()))
}

/// `(count, rows, cols, pixel bytes)` of an IDX3 image file.
pub fn parse_images(bytes: &[u8]) -> std::result::Result<(usize, usize, usize, Vec<u8>), String> {
    let magic = be_u32(bytes, 0)?;
    if magic != IMAGES_MAGIC {
        return Err(format!(
            "bad magic {magic:#010x} (expected {IMAGES_MAGIC:#010x})"
        ));
    }
    let count = be_u32(bytes, 4)? as usize;
    let rows = be_u32(bytes, 8)? as usize;
    let cols = be_u32(bytes, 12)? as usize;
    let body = &bytes[16..];
    let expected = count * rows * cols;
    if body.len() != expected {
        return Err(format!(
            "expected {expected} pixel bytes for {count} images of {rows}x{cols}, found {}",
            body.len()
        ));
    }
    Ok((count, rows, cols, body.to_vec()))
}

pub fn parse_labels(bytes: &[u8]) -> std::result::Result<Vec<u8>, String> {
    let magic = be_u32(bytes, 0)?;
    if magic != LABELS_MAGIC {
        return Err(format!(
            "bad magic {magic:#010x} (expected {LABELS_MAGIC:#010x})"
        ));
    }
    let count = be_u32(bytes, 4)? as usize;
    let body = &bytes[8..];
    if body.len() != count {
        return Err(format!("expected {count} labels, found {}", body.len()));
    }
    if let Some(i) = body.iter().position(|&l| l > 9) {
        return Err(format!("label {i} is {} (expected 0-9)", body[i]));
    }
    Ok(body.to_vec())
}

/// IDX3 encoding of `count` images of `rows x cols` bytes.
pub fn encode_images(rows: u32, cols: u32, pixels: &[u8]) -> Vec<u8> {
    let count = (pixels.len() / (rows * cols) as usize) as u32;
    let mut out = Vec::with_capacity(16 + pixels.len());
    for word in [IMAGES_MAGIC, count, rows, cols] {
        out.extend_from_slice(&word.to_be_bytes());
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
