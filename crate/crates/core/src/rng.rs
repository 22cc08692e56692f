//! Counter-based random streams.
//!
//! Every stream is a ChaCha8 keystream whose 256-bit key is derived from
//! `(master seed, trial index, substream id)`. A trial's draws therefore do
//! not depend on which worker runs it or in which order trials execute.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Substream families used inside one trial.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Substream {
    /// UE position and channel draw for one user.
    Channel(u32),
    /// Randomized range finder for one user.
    Selector(u32),
    /// Random codeword choice by a user (or by the BS on its behalf).
    Codeword(u32),
    /// Keeper choice, reassignment and deferral draws.
    Mac,
    /// Energy-detection noise.
    Reservation,
}

impl Substream {
    fn id(self) -> u64 {
        match self {
            Substream::Channel(u) => (1 << 32) | u as u64,
            Substream::Selector(u) => (2 << 32) | u as u64,
            Substream::Codeword(u) => (3 << 32) | u as u64,
            Substream::Mac => 4 << 32,
            Substream::Reservation => 5 << 32,
        }
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic stream keyed by `(seed, trial, substream)`.
pub fn stream(seed: u64, trial: u64, substream: Substream) -> ChaCha8Rng {
    let mut state = seed;
    let a = splitmix64(&mut state);
    state ^= trial.wrapping_mul(0xD6E8_FEB8_6659_FD93);
    let b = splitmix64(&mut state);
    state ^= substream.id().wrapping_mul(0xA076_1D64_78BD_642F);
    let c = splitmix64(&mut state);
    let d = splitmix64(&mut state);

    let mut key = [0u8; 32];
    for (chunk, word) in key.chunks_exact_mut(8).zip([a, b, c, d]) {
        chunk.copy_from_slice(&word.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}
