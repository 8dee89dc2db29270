//! Seed derivation.
//!
//! Every consumer of randomness gets its own ChaCha stream keyed by the
//! master seed and a fixed stream tag, so adding a consumer never shifts
//! the draws of another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

pub const STREAM_DRIFT: u64 = 0x1000;
pub const STREAM_LIDAR: u64 = 0x2000;
pub const STREAM_LINK: u64 = 0x3000;

pub fn stream(seed: u64, tag: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(tag);
    rng
}

/// Stream for one robot-indexed consumer (drift, lidar).
pub fn robot_stream(seed: u64, tag: u64, robot: u32) -> SimRng {
    stream(seed, tag + u64::from(robot))
}

/// Stream for a directed link, keyed on its endpoints rather than its
/// position in the link list.
pub fn link_stream(seed: u64, from: u32, to: u32) -> SimRng {
    stream(seed, (STREAM_LINK << 32) | (u64::from(from) << 16) | u64::from(to))
}
