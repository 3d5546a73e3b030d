//! Deterministic, splittable random streams.
//!
//! Every sample stream is a ChaCha8 keystream. The 256-bit key is expanded
//! from `(seed, domain)` with SplitMix64 and the 64-bit ChaCha stream id is
//! the chunk (or threshold) index, so any chunk can be regenerated on its own
//! and results do not depend on how chunks are scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Identity of the generator, recorded in artifact metadata.
pub const GENERATOR_ID: &str =
    "chacha8/rand_chacha-0.9; key=splitmix64(seed ^ domain*0x9e3779b97f4a7c15); stream=chunk index";

/// Number of samples drawn from one stream before switching to the next.
pub const CHUNK_LEN: usize = 1 << 16;

/// Separates independent uses of the same user seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Domain {
    Phase = 1,
    Signal = 2,
    Sweep = 3,
    Extract = 4,
    Bits = 5,
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Generator for stream `stream` of `(seed, domain)`.
pub fn stream_rng(seed: u64, domain: Domain, stream: u64) -> ChaCha8Rng {
    let mut state = seed ^ (domain as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    let mut key = [0u8; 32];
    for word in key.chunks_exact_mut(8) {
        word.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(stream);
    rng
}
