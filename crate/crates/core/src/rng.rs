//! Named, counter-based random substreams derived from one master seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Components drawing randomness from the master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Init,
    Shuffle,
    Kmeans,
    Splits,
    Synth,
}

impl Stream {
    fn id(self) -> u64 {
        match self {
            Stream::Init => 1,
            Stream::Shuffle => 2,
            Stream::Kmeans => 3,
            Stream::Splits => 4,
            Stream::Synth => 5,
        }
    }
}

/// ChaCha stream for `(seed, stream, index)`. The index separates e.g. the
/// two training phases or individual evaluation trials; every combination is
/// an independent keystream.
pub fn substream(seed: u64, stream: Stream, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((stream.id() << 48) ^ index);
    rng
}
