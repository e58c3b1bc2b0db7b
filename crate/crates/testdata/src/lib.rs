//! Synthetic handwritten-digit corpus in the MNIST IDX layout, used by
//! tests and benchmarks when the real database is not on disk.
//!
//! Images are 28x28 grayscale digits rendered from a 5x7 glyph font,
//! scaled up, randomly offset and thickened, with intensity jitter and a
//! little background speckle. The corpus mirrors MNIST's published shape:
//! 60,000 training and 10,000 test images with matching label files.
//! Content is deterministic, so every test binary sees identical bytes.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const TRAIN_IMAGES: &str = "train-images-idx3-ubyte";
pub const TRAIN_LABELS: &str = "train-labels-idx1-ubyte";
pub const TEST_IMAGES: &str = "t10k-images-idx3-ubyte";
pub const TEST_LABELS: &str = "t10k-labels-idx1-ubyte";

const SIDE: usize = 28;
const CORPUS_SEED: u64 = 0x5ea_d161;

/// 5x7 bitmap font for the ten digits, one string row per scanline.
const GLYPHS: [[&str; 7]; 10] = [
    [
        "01110", "10001", "10011", "10101", "11001", "10001", "01110",
    ],
    [
        "00100", "01100", "00100", "00100", "00100", "00100", "01110",
    ],
    [
        "01110", "10001", "00001", "00110", "01000", "10000", "11111",
    ],
    [
        "01110", "10001", "00001", "00110", "00001", "10001", "01110",
    ],
    [
        "00010", "00110", "01010", "10010", "11111", "00010", "00010",
    ],
    [
        "11111", "10000", "11110", "00001", "00001", "10001", "01110",
    ],
    [
        "00110", "01000", "10000", "11110", "10001", "10001", "01110",
    ],
    [
        "11111", "00001", "00010", "00100", "01000", "01000", "01000",
    ],
    [
        "01110", "10001", "10001", "01110", "10001", "10001", "01110",
    ],
    [
        "01110", "10001", "10001", "01111", "00001", "00010", "01100",
    ],
];

/// Render one digit into a 28x28 grayscale image.
fn render_digit(digit: usize, rng: &mut ChaCha8Rng) -> [u8; SIDE * SIDE] {
    let mut mask = [false; SIDE * SIDE];
    let scale = 3;
    let glyph_w = 5 * scale;
    let glyph_h = 7 * scale;
    let max_dx = SIDE - glyph_w - 2;
    let max_dy = SIDE - glyph_h - 2;
    let dx = 1 + rng.gen_range(0..=max_dx);
    let dy = 1 + rng.gen_range(0..=max_dy);
    for (gy, row) in GLYPHS[digit].iter().enumerate() {
        for (gx, cell) in row.bytes().enumerate() {
            if cell == b'1' {
                for sy in 0..scale {
                    for sx in 0..scale {
                        let y = dy + gy * scale + sy;
                        let x = dx + gx * scale + sx;
                        mask[y * SIDE + x] = true;
                    }
                }
            }
        }
    }

    // Thicken strokes with up to one 4-neighbourhood dilation pass.
    if rng.gen::<f64>() < 0.6 {
        let source = mask;
        for y in 1..SIDE - 1 {
            for x in 1..SIDE - 1 {
                if source[y * SIDE + x] {
                    mask[(y - 1) * SIDE + x] = true;
                    mask[(y + 1) * SIDE + x] = true;
                    mask[y * SIDE + x - 1] = true;
                    mask[y * SIDE + x + 1] = true;
                }
            }
        }
    }

    let mut image = [0u8; SIDE * SIDE];
    for (pixel, &on) in image.iter_mut().zip(mask.iter()) {
        if on {
            *pixel = rng.gen_range(170..=255);
        } else if rng.gen::<f64>() < 0.02 {
            *pixel = rng.gen_range(1..=90);
        }
    }
    image
}

fn write_images(path: &Path, count: usize, rng: &mut ChaCha8Rng) -> std::io::Result<Vec<u8>> {
    let mut labels = Vec::with_capacity(count);
    let mut out = Vec::with_capacity(16 + count * SIDE * SIDE);
    out.extend_from_slice(&0x0000_0803u32.to_be_bytes());
    out.extend_from_slice(&(count as u32).to_be_bytes());
    out.extend_from_slice(&(SIDE as u32).to_be_bytes());
    out.extend_from_slice(&(SIDE as u32).to_be_bytes());
    for _ in 0..count {
        let digit = rng.gen_range(0..10usize);
        labels.push(digit as u8);
        out.extend_from_slice(&render_digit(digit, rng));
    }
    fs::File::create(path)?.write_all(&out)?;
    Ok(labels)
}

fn write_labels(path: &Path, labels: &[u8]) -> std::io::Result<()> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&0x0000_0801u32.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    fs::File::create(path)?.write_all(&out)
}

fn generate_corpus(dir: &Path) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    let mut rng = ChaCha8Rng::seed_from_u64(CORPUS_SEED);
    let labels = write_images(&dir.join(TRAIN_IMAGES), 60_000, &mut rng)?;
    write_labels(&dir.join(TRAIN_LABELS), &labels)?;
    let labels = write_images(&dir.join(TEST_IMAGES), 10_000, &mut rng)?;
    write_labels(&dir.join(TEST_LABELS), &labels)?;
    Ok(())
}

fn corpus_complete(dir: &Path) -> bool {
    [TRAIN_IMAGES, TRAIN_LABELS, TEST_IMAGES, TEST_LABELS]
        .iter()
        .all(|name| dir.join(name).is_file())
}

/// Directory containing a usable dataset, in IDX layout.
///
/// Prefers `LEA_MVD_DATA_DIR` when it holds the expected files (so tests
/// run against real MNIST when available); otherwise generates the
/// synthetic corpus once into a shared cache under the system temp
/// directory and reuses it.
pub fn ensure_dataset() -> PathBuf {
    if let Ok(dir) = std::env::var("LEA_MVD_DATA_DIR") {
        let dir = PathBuf::from(dir);
        if corpus_complete(&dir) {
            return dir;
        }
    }
    let cache = std::env::temp_dir().join("lea-mvd-synth-digits-v1");
    if corpus_complete(&cache) {
        return cache;
    }
    // Build in a unique staging directory, then publish atomically so
    // concurrent test binaries cannot observe a half-written corpus.
    let staging = std::env::temp_dir().join(format!(
        "lea-mvd-synth-digits-staging-{}",
        std::process::id()
    ));
    generate_corpus(&staging).expect("failed to generate synthetic corpus");
    match fs::rename(&staging, &cache) {
        Ok(()) => {}
        Err(_) if corpus_complete(&cache) => {
            let _ = fs::remove_dir_all(&staging);
        }
        Err(e) => panic!("failed to publish synthetic corpus: {e}"),
    }
    cache
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corpus_is_generated_once_and_complete() {
        let dir = ensure_dataset();
        assert!(corpus_complete(&dir));
        let bytes = fs::read(dir.join(TRAIN_IMAGES)).unwrap();
        assert_eq!(bytes.len(), 16 + 60_000 * 28 * 28);
        assert_eq!(&bytes[..4], &0x0000_0803u32.to_be_bytes());
    }

    #[test]
    fn digits_have_reasonable_ink() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for digit in 0..10 {
            let image = render_digit(digit, &mut rng);
            let ink = image.iter().filter(|&&p| p > 128).count();
            assert!(
                (50..500).contains(&ink),
                "digit {digit} has {ink} bright pixels"
            );
        }
    }
}
