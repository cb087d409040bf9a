//! Seeded random streams. Every random draw in the pipeline comes from one
//! root seed split into named ChaCha streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type PipelineRng = ChaCha8Rng;

pub const STREAM_AUGMENT: u64 = 1;
pub const STREAM_PARTITION: u64 = 2;
pub const STREAM_SEARCH: u64 = 3;
pub const STREAM_SCREEN: u64 = 4;
pub const STREAM_FOREST: u64 = 5;
pub const STREAM_BOOTSTRAP: u64 = 6;
pub const STREAM_NOISE: u64 = 7;

pub fn stream(seed: u64, stream: u64) -> PipelineRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// SplitMix64 finaliser, used to derive per-trial seeds.
pub fn mix(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
