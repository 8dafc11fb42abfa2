//! Seeded, splittable random streams. Every trial, chain, and particle owns
//! its own stream so experiments parallelize deterministically.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Identifies one reproducible draw sequence. Identical (seed, stream_id)
/// pairs reproduce identical sequences; distinct stream ids are independent.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        RngStream { seed, stream_id }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Instantiates the generator positioned at the start of the stream.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }

    /// Derives a child stream. Children with distinct tags are independent of
    /// each other and of the parent.
    pub fn child(&self, tag: u64) -> RngStream {
        let mixed = splitmix64(self.seed ^ splitmix64(self.stream_id ^ splitmix64(tag)));
        RngStream {
            seed: mixed,
            stream_id: splitmix64(mixed ^ tag),
        }
    }

    /// A stable 64-bit tag identifying this stream, for result records.
    pub fn trial_tag(&self) -> u64 {
        if self.stream_id == 0 {
            self.seed
        } else {
            splitmix64(self.seed ^ splitmix64(self.stream_id))
        }
    }
}
