use rand::SeedableRng;
use serde::{Deserialize, Serialize};

/// Generator handed out by [`RandomStream::rng`]. ChaCha is itself
/// counter-based, so a stream is fully determined by its 256-bit key.
pub type StreamRng = rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(GOLDEN);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// A position in the experiment tree: master seed plus a path of indices
/// (experiment, grid cell, trial, step, ...).
///
/// Streams are values. Deriving a child never mutates the parent, so work can
/// be scheduled on any number of threads and still draw the same numbers.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RandomStream {
    master_seed: u64,
    path: Vec<u64>,
}

impl RandomStream {
    pub fn new(master_seed: u64) -> Self {
        Self {
            master_seed,
            path: Vec::new(),
        }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn path(&self) -> &[u64] {
        &self.path
    }

    pub fn child(&self, index: u64) -> Self {
        let mut path = Vec::with_capacity(self.path.len() + 1);
        path.extend_from_slice(&self.path);
        path.push(index);
        Self {
            master_seed: self.master_seed,
            path,
        }
    }

    /// 256-bit key for this node; depth is mixed in so `[a]` and `[a, 0]`
    /// never collide.
    fn key(&self) -> [u8; 32] {
        let mut state = splitmix64(self.master_seed);
        for (depth, &index) in self.path.iter().enumerate() {
            let salted = index ^ splitmix64((depth as u64 + 1).wrapping_mul(GOLDEN));
            state = splitmix64(state ^ splitmix64(salted));
        }
        state = splitmix64(state ^ self.path.len() as u64);
        let mut key = [0u8; 32];
        for (lane, chunk) in key.chunks_exact_mut(8).enumerate() {
            let word = splitmix64(state.wrapping_add((lane as u64 + 1).wrapping_mul(GOLDEN)));
            chunk.copy_from_slice(&word.to_le_bytes());
        }
        key
    }

    /// Fresh generator positioned at the start of this stream.
    pub fn rng(&self) -> StreamRng {
        StreamRng::from_seed(self.key())
    }
}
