//! Counter-based seeding.
//!
//! Every random quantity is drawn from a short-lived generator whose seed is
//! a pure function of `(master seed, replica, stream tag)` or of a fragment's
//! path identifier. Results therefore do not depend on thread count or on the
//! order in which work is scheduled.
//!
//! The mixer is the SplitMix64 finalizer:
//!
//! ```text
//! z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//! z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//! z =  z ^ (z >> 31)
//! ```
//!
//! and words are absorbed one at a time as `state = fmix(state + GOLDEN + word)`
//! with `GOLDEN = 0x9E3779B97F4A7C15`.

use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

pub type StreamRng = Xoshiro256PlusPlus;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// Stream tags separate independent uses of the same `(seed, replica)`.
pub mod tag {
    pub const FRAGMENTS: u64 = 0x4652_4147; // "FRAG"
    pub const TAGGED: u64 = 0x5441_4747; // "TAGG"
    pub const OVERSHOOT: u64 = 0x4F56_4552; // "OVER"
    pub const MEASURE: u64 = 0x4D45_4153; // "MEAS"
}

#[inline]
pub fn fmix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[inline]
fn absorb(state: u64, word: u64) -> u64 {
    fmix64(state.wrapping_add(GOLDEN).wrapping_add(word))
}

/// `mix64(master_seed, replica_id, stream_tag)`.
pub fn mix64(master_seed: u64, replica: u64, stream_tag: u64) -> u64 {
    absorb(absorb(absorb(0, master_seed), replica), stream_tag)
}

/// Identifier of child `index` of the fragment with identifier `parent`.
#[inline]
pub fn child_id(parent: u64, index: usize) -> u64 {
    absorb(absorb(parent, 0xC0FF_EE00), index as u64 + 1)
}

pub fn stream(seed: u64) -> StreamRng {
    Xoshiro256PlusPlus::seed_from_u64(seed)
}

/// Generator for replica `replica` of stream `stream_tag`.
pub fn replica_stream(master_seed: u64, replica: u64, stream_tag: u64) -> StreamRng {
    stream(mix64(master_seed, replica, stream_tag))
}
