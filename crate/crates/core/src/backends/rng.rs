//! Per-turn random streams.
//!
//! Each stream is a ChaCha8 generator seeded from `(seed, dialogue_id,
//! turn_index, salt)` through FNV-1a and SplitMix64, so noise for a turn is
//! the same on every platform and independent of iteration order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::statecore::TurnRef;

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        hash ^= u64::from(*b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

pub fn turn_seed(seed: u64, turn: &TurnRef, salt: u64) -> u64 {
    let mut h = splitmix64(seed);
    h = splitmix64(h ^ fnv1a64(turn.dialogue_id.as_bytes()));
    h = splitmix64(h ^ u64::from(turn.turn_index));
    splitmix64(h ^ salt)
}

pub fn turn_rng(seed: u64, turn: &TurnRef, salt: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(turn_seed(seed, turn, salt))
}
