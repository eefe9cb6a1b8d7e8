use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tensor::{write_ctt, Tensor};

/// Folder names of the generated dataset, already in code-point order.
pub const SYNTH_CLASSES: [&str; 4] = [
    "adenocarcinoma",
    "large.cell.carcinoma",
    "normal",
    "squamous.cell.carcinoma",
];

const NOISE_MAX: f32 = 80.0;
const BLOB_PEAK: f32 = 175.0;

/// Writes `per_class` single-channel `size × size` CTT1 images per class.
///
/// Class `k` is a Gaussian blob centred in quadrant `k` (row-major: top-left,
/// top-right, bottom-left, bottom-right) over uniform noise, so the classes
/// are separable by where the bright mass sits. Every file draws its noise
/// from its own seeded stream, making output a pure function of the inputs.
pub fn synth_dataset(out_dir: impl AsRef<Path>, per_class: usize, seed: u64, size: usize) -> Result<Vec<PathBuf>> {
    if per_class == 0 {
        return Err(Error::config("per-class count must be at least 1"));
    }
    if size < 8 {
        return Err(Error::config(format!("image size {size} is too small")));
    }
    let out_dir = out_dir.as_ref();
    let sigma = size as f32 / 8.0;
    let mut written = Vec::with_capacity(per_class * SYNTH_CLASSES.len());
    for (k, class) in SYNTH_CLASSES.iter().enumerate() {
        let dir = out_dir.join(class);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let cy = if k < 2 { size / 4 } else { 3 * size / 4 } as f32;
        let cx = if k % 2 == 0 { size / 4 } else { 3 * size / 4 } as f32;
        for i in 0..per_class {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream((k * per_class + i) as u64);
            let mut data = Vec::with_capacity(size * size);
            for y in 0..size {
                for x in 0..size {
                    let d2 = (y as f32 - cy).powi(2) + (x as f32 - cx).powi(2);
                    let blob = BLOB_PEAK * (-d2 / (2.0 * sigma * sigma)).exp();
                    let noise = rng.random_range(0.0..NOISE_MAX);
                    data.push((blob + noise).min(255.0));
                }
            }
            let path = dir.join(format!("img_{i:04}.ctt"));
            write_ctt(&path, &Tensor::new(&[size, size, 1], data)?)?;
            written.push(path);
        }
    }
    Ok(written)
}
