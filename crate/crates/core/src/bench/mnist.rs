use std::fs;
use std::path::Path;

use crate::boost::Dataset;
use crate::error::{Error, Result};

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;

fn be_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_be_bytes(bytes[at..at + 4].try_into().unwrap())
}

fn idx_err(path: &Path, msg: impl Into<String>) -> Error {
    Error::Idx {
        path: path.to_path_buf(),
        msg: msg.into(),
    }
}

/// Reads an IDX image file: returns `(count, rows, cols, pixels)`.
pub fn read_idx_images(path: impl AsRef<Path>) -> Result<(usize, usize, usize, Vec<u8>)> {
    let path = path.as_ref();
    let bytes = fs::read(path)?;
    if bytes.len() < 16 {
        return Err(idx_err(path, "truncated header"));
    }
    let magic = be_u32(&bytes, 0);
    if magic != IMAGES_MAGIC {
        return Err(idx_err(path, format!("bad magic {magic:#010x} for an image file")));
    }
    let (n, r, c) = (
        be_u32(&bytes, 4) as usize,
        be_u32(&bytes, 8) as usize,
        be_u32(&bytes, 12) as usize,
    );
    let want = n * r * c;
    if bytes.len() - 16 < want {
        return Err(idx_err(path, format!("expected {want} pixel bytes, found {}", bytes.len() - 16)));
    }
    Ok((n, r, c, bytes[16..16 + want].to_vec()))
}

pub fn read_idx_labels(path: impl AsRef<Path>) -> Result<Vec<u8>> {
    let path = path.as_ref();
    let bytes = fs::read(path)?;
    if bytes.len() < 8 {
        return Err(idx_err(path, "truncated header"));
    }
    let magic = be_u32(&bytes, 0);
    if magic != LABELS_MAGIC {
        return Err(idx_err(path, format!("bad magic {magic:#010x} for a label file")));
    }
    let n = be_u32(&bytes, 4) as usize;
    if bytes.len() - 8 < n {
        return Err(idx_err(path, format!("expected {n} labels, found {}", bytes.len() - 8)));
    }
    Ok(bytes[8..8 + n].to_vec())
}

/// The binary task `digit_pos` (+1) against `digit_neg` (-1), with pixels
/// scaled to `[0, 1]`.
pub fn load_mnist_subtask(
    images: impl AsRef<Path>,
    labels: impl AsRef<Path>,
    digit_pos: u8,
    digit_neg: u8,
) -> Result<Dataset> {
    if digit_pos == digit_neg {
        return Err(Error::Config(format!("both classes are digit {digit_pos}")));
    }
    let (n, r, c, pixels) = read_idx_images(&images)?;
    let ys = read_idx_labels(&labels)?;
    if ys.len() != n {
        return Err(idx_err(
            labels.as_ref(),
            format!("{} labels for {n} images", ys.len()),
        ));
    }
    let d = r * c;
    let mut data = Dataset::new(d);
    let mut row = vec![0.0; d];
    for (i, &y) in ys.iter().enumerate() {
        let label = if y == digit_pos {
            1
        } else if y == digit_neg {
            -1
        } else {
            continue;
        };
        for (v, &p) in row.iter_mut().zip(&pixels[i * d..(i + 1) * d]) {
            *v = p as f64 / 255.0;
        }
        data.push(&row, label)?;
    }
    Ok(data)
}

/// Standard MNIST file names inside a directory: `(train, test)` pairs of
/// `(images, labels)` paths.
pub fn mnist_paths(dir: impl AsRef<Path>) -> [(std::path::PathBuf, std::path::PathBuf); 2] {
    let d = dir.as_ref();
    [
        (
            d.join("train-images-idx3-ubyte"),
            d.join("train-labels-idx1-ubyte"),
        ),
        (
            d.join("t10k-images-idx3-ubyte"),
            d.join("t10k-labels-idx1-ubyte"),
        ),
    ]
}
