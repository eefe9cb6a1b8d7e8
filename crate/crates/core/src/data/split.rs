use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

const SPLIT_STREAM: u64 = 0x5711;

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit<E> {
    pub train: Vec<E>,
    pub val: Vec<E>,
    pub seed: u64,
}

/// Shuffles `items` with `seed`, then sends the first `floor(ratio·N)` to
/// training and the rest to validation.
pub fn split_dataset<E: Clone>(items: &[E], ratio: f64, seed: u64) -> Result<DatasetSplit<E>> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::config(format!("split ratio must be in (0, 1), got {ratio}")));
    }
    if items.len() < 2 {
        return Err(Error::config(format!(
            "need at least 2 entries to split, got {}",
            items.len()
        )));
    }
    let mut order: Vec<usize> = (0..items.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(SPLIT_STREAM);
    order.shuffle(&mut rng);
    let n_train = (ratio * items.len() as f64).floor() as usize;
    let pick = |idx: &[usize]| idx.iter().map(|&i| items[i].clone()).collect();
    Ok(DatasetSplit {
        train: pick(&order[..n_train]),
        val: pick(&order[n_train..]),
        seed,
    })
}
