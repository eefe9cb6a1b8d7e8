use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Shuffled index batches over `0..len` for one epoch. The order depends only
/// on `(seed, epoch)`; a final short batch is kept.
pub fn make_batches(len: usize, batch_size: usize, seed: u64, epoch: usize) -> Result<Vec<Vec<usize>>> {
    if batch_size == 0 {
        return Err(Error::config("batch size must be at least 1"));
    }
    let mut order: Vec<usize> = (0..len).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch as u64);
    order.shuffle(&mut rng);
    Ok(order.chunks(batch_size).map(<[usize]>::to_vec).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sizes_and_determinism() {
        let b = make_batches(123, 32, 42, 1).unwrap();
        assert_eq!(b.iter().map(Vec::len).collect::<Vec<_>>(), [32, 32, 32, 27]);
        assert_eq!(make_batches(123, 1, 42, 1).unwrap().len(), 123);
        assert_eq!(b, make_batches(123, 32, 42, 1).unwrap());
        assert_ne!(b, make_batches(123, 32, 42, 2).unwrap());
        let mut all: Vec<usize> = b.concat();
        all.sort_unstable();
        assert_eq!(all, (0..123).collect::<Vec<_>>());
        assert!(make_batches(10, 0, 0, 0).is_err());
    }
}
