//! Counter-keyed random substreams.
//!
//! Every random draw in a sweep comes from a ChaCha stream whose seed is a
//! pure function of `(master seed, realization, purpose, user, antenna)`.
//! Draws therefore never depend on evaluation order or worker count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a substream is used for. Distinct purposes never share a stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Purpose {
    SmallScale = 1,
    Placement = 2,
    Restart = 3,
    Validation = 4,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub seed: u64,
    pub realization: u64,
    pub purpose: Purpose,
    pub user: u64,
    pub antenna: u64,
}

impl StreamKey {
    pub fn new(seed: u64, realization: u64, purpose: Purpose) -> Self {
        Self {
            seed,
            realization,
            purpose,
            user: 0,
            antenna: 0,
        }
    }

    pub fn with_element(self, user: usize, antenna: usize) -> Self {
        Self {
            user: user as u64,
            antenna: antenna as u64,
            ..self
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut state = self.seed ^ 0x5851_f42d_4c95_7f2d;
        let mut out = [0u8; 32];
        let words = [
            self.realization,
            self.purpose as u64,
            self.user,
            self.antenna,
        ];
        for (chunk, word) in out.chunks_exact_mut(8).zip(words) {
            state = splitmix64(state ^ word);
            chunk.copy_from_slice(&state.to_le_bytes());
        }
        ChaCha8Rng::from_seed(out)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
