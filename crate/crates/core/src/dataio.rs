//! IDX image ingestion, binarization, 28x28 -> 7x7 downscaling, and seeded
//! subset selection.

use std::fs::File;
use std::io::{BufReader, Read};
use std::path::Path;

use flate2::read::GzDecoder;
use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

#[derive(Debug, Error)]
pub enum DataError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("{path}: bad IDX magic {actual:#010x}, expected {expected:#010x}")]
    BadMagic {
        path: String,
        expected: u32,
        actual: u32,
    },
    #[error("{path}: truncated file, expected {expected} data bytes but found {actual}")]
    Truncated {
        path: String,
        expected: usize,
        actual: usize,
    },
    #[error("label count {labels} does not match image count {images}")]
    LabelCountMismatch { images: usize, labels: usize },
    #[error("expected {expected}x{expected} images, got {width}x{height}")]
    WrongDimensions {
        expected: usize,
        width: usize,
        height: usize,
    },
    #[error("subset of {requested} rows requested from {available}")]
    SubsetTooLarge { requested: usize, available: usize },
}

/// Raw grayscale images straight from an IDX file.
#[derive(Debug, Clone)]
pub struct RawImages {
    /// One image per row, bytes 0-255.
    pub images: Array2<u8>,
    pub width: usize,
    pub height: usize,
    pub labels: Option<Vec<u8>>,
}

impl RawImages {
    pub fn count(&self) -> usize {
        self.images.nrows()
    }
}

/// Whether a dataset still has its source resolution or was downscaled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Raw,
    Downscaled,
}

/// Binary image matrix: entries are exactly 0 or 1.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub images: Array2<u8>,
    pub width: usize,
    pub height: usize,
    pub provenance: Provenance,
}

impl Dataset {
    pub fn count(&self) -> usize {
        self.images.nrows()
    }

    pub fn dim(&self) -> usize {
        self.images.ncols()
    }

    /// The image matrix as `f64` entries in {0.0, 1.0}.
    pub fn to_f64(&self) -> Array2<f64> {
        self.images.mapv(f64::from)
    }
}

/// Read a file fully, decompressing transparently when it starts with the
/// gzip magic bytes.
fn read_maybe_gz(path: &Path) -> Result<Vec<u8>, DataError> {
    let mut reader = BufReader::new(File::open(path)?);
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes)?;
    if bytes.len() >= 2 && bytes[0] == 0x1f && bytes[1] == 0x8b {
        let mut decoded = Vec::new();
        GzDecoder::new(&bytes[..]).read_to_end(&mut decoded)?;
        return Ok(decoded);
    }
    Ok(bytes)
}

fn read_be_u32(bytes: &[u8], offset: usize, path: &Path) -> Result<u32, DataError> {
    let end = offset + 4;
    if bytes.len() < end {
        return Err(DataError::Truncated {
            path: path.display().to_string(),
            expected: end,
            actual: bytes.len(),
        });
    }
    Ok(u32::from_be_bytes([
        bytes[offset],
        bytes[offset + 1],
        bytes[offset + 2],
        bytes[offset + 3],
    ]))
}

/// Load an IDX image file (big-endian headers, magic `0x00000803`) and
/// optionally its label file (`0x00000801`).
pub fn load_idx(
    images_path: &Path,
    labels_path: Option<&Path>,
) -> Result<RawImages, DataError> {
    let bytes = read_maybe_gz(images_path)?;
    let magic = read_be_u32(&bytes, 0, images_path)?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(DataError::BadMagic {
            path: images_path.display().to_string(),
            expected: IDX_IMAGES_MAGIC,
            actual: magic,
        });
    }
    let count = read_be_u32(&bytes, 4, images_path)? as usize;
    let height = read_be_u32(&bytes, 8, images_path)? as usize;
    let width = read_be_u32(&bytes, 12, images_path)? as usize;
    let expected = count * height * width;
    let data = &bytes[16.min(bytes.len())..];
    if data.len() != expected {
        return Err(DataError::Truncated {
            path: images_path.display().to_string(),
            expected,
            actual: data.len(),
        });
    }
    let images = Array2::from_shape_vec((count, width * height), data.to_vec())
        .expect("dimensions checked");

    let labels = match labels_path {
        None => None,
        Some(path) => {
            let bytes = read_maybe_gz(path)?;
            let magic = read_be_u32(&bytes, 0, path)?;
            if magic != IDX_LABELS_MAGIC {
                return Err(DataError::BadMagic {
                    path: path.display().to_string(),
                    expected: IDX_LABELS_MAGIC,
                    actual: magic,
                });
            }
            let label_count = read_be_u32(&bytes, 4, path)? as usize;
            let data = &bytes[8.min(bytes.len())..];
            if data.len() != label_count {
                return Err(DataError::Truncated {
                    path: path.display().to_string(),
                    expected: label_count,
                    actual: data.len(),
                });
            }
            if label_count != count {
                return Err(DataError::LabelCountMismatch {
                    images: count,
                    labels: label_count,
                });
            }
            Some(data.to_vec())
        }
    };

    Ok(RawImages {
        images,
        width,
        height,
        labels,
    })
}

/// Threshold normalized intensities: pixel = 1 when `byte / 255 > threshold`.
pub fn binarize(raw: &RawImages, threshold: f64) -> Dataset {
    let images = raw
        .images
        .mapv(|byte| u8::from(f64::from(byte) / 255.0 > threshold));
    Dataset {
        images,
        width: raw.width,
        height: raw.height,
        provenance: Provenance::Raw,
    }
}

/// Downscale 28x28 binary images to 7x7: each output pixel is the mean of
/// its 4x4 source block thresholded at 0.5, ties rounding to 1 (that is,
/// at least 8 of the 16 source pixels set).
pub fn downscale_7x7(dataset: &Dataset) -> Result<Dataset, DataError> {
    if dataset.width != 28 || dataset.height != 28 {
        return Err(DataError::WrongDimensions {
            expected: 28,
            width: dataset.width,
            height: dataset.height,
        });
    }
    let m = dataset.count();
    let mut images = Array2::zeros((m, 49));
    for (source, mut target) in dataset.images.rows().into_iter().zip(images.rows_mut()) {
        for by in 0..7 {
            for bx in 0..7 {
                let mut set = 0u32;
                for dy in 0..4 {
                    for dx in 0..4 {
                        let y = by * 4 + dy;
                        let x = bx * 4 + dx;
                        set += u32::from(source[y * 28 + x]);
                    }
                }
                target[by * 7 + bx] = u8::from(set >= 8);
            }
        }
    }
    Ok(Dataset {
        images,
        width: 7,
        height: 7,
        provenance: Provenance::Downscaled,
    })
}

/// Seeded sample of `count` distinct rows, keeping their original order.
pub fn subset(dataset: &Dataset, count: usize, rng_seed: u64) -> Result<Dataset, DataError> {
    let available = dataset.count();
    if count > available {
        return Err(DataError::SubsetTooLarge {
            requested: count,
            available,
        });
    }
    let indices = subset_indices(available, count, rng_seed);
    let mut images = Array2::zeros((count, dataset.dim()));
    for (slot, &r) in indices.iter().enumerate() {
        images.row_mut(slot).assign(&dataset.images.row(r));
    }
    Ok(Dataset {
        images,
        width: dataset.width,
        height: dataset.height,
        provenance: dataset.provenance,
    })
}

/// The row indices [`subset`] would select, sorted ascending.
pub fn subset_indices(available: usize, count: usize, rng_seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut indices = rand::seq::index::sample(&mut rng, available, count).into_vec();
    indices.sort_unstable();
    indices
}
