//! Seeded random streams.
//!
//! Every consumer of randomness receives a [`ChaCha8Rng`] derived from a
//! master seed and a stream id. ChaCha is counter based, so substreams are
//! independent and cheap to derive; work split into fixed chunks draws from
//! `stream(seed, chunk_index)` and the output does not depend on how many
//! workers processed the chunks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Random stream type used throughout the crate.
pub type Stream = ChaCha8Rng;

/// Stream ids at or above this offset are reserved for pipeline stages so
/// they never collide with per-chunk sampling streams.
pub const STAGE_STREAM_BASE: u64 = 1 << 62;

/// Stage of the random projection to a lower dimension.
pub const PROJECTION_STAGE: u64 = 2;
/// Stage of the direction selection (probes and `θ₃`).
pub const DIRECTION_STAGE: u64 = 3;

/// Stream id for a named pipeline stage.
pub fn stage_stream_id(stage: u64) -> u64 {
    STAGE_STREAM_BASE + stage
}

/// Deterministic substream `stream_id` of the master `seed`.
pub fn stream(seed: u64, stream_id: u64) -> Stream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id);
    rng
}
