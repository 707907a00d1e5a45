use rand::seq::SliceRandom;

use crate::rng::{substream, Stream};

/// Index batches for one epoch: a permutation of `0..n` that depends only on
/// `(seed, epoch)`, cut into chunks of `batch_size`. The last chunk may be
/// short. With `shuffle` off the natural order is used.
pub fn batch_iter(n: usize, batch_size: usize, seed: u64, epoch: u64, shuffle: bool) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    if shuffle {
        order.shuffle(&mut substream(seed, Stream::Shuffle, epoch));
    }
    order.chunks(batch_size.max(1)).map(<[usize]>::to_vec).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partitions_all_indices() {
        let batches = batch_iter(23, 5, 1, 0, true);
        assert_eq!(batches.len(), 5);
        assert_eq!(batches[4].len(), 3);
        let mut all: Vec<usize> = batches.concat();
        all.sort_unstable();
        assert_eq!(all, (0..23).collect::<Vec<_>>());
    }

    #[test]
    fn one_chunk_and_determinism() {
        let one = batch_iter(7, 100, 3, 2, true);
        assert_eq!(one.len(), 1);
        assert_eq!(one, batch_iter(7, 100, 3, 2, true));
        assert_ne!(batch_iter(50, 50, 3, 2, true), batch_iter(50, 50, 3, 3, true));
        assert_eq!(batch_iter(4, 2, 3, 2, false), vec![vec![0, 1], vec![2, 3]]);
    }
}
