//! Seeded random streams.
//!
//! Every experiment owns one root seed. Independent work items (trials,
//! repetitions, tiles) each get their own ChaCha stream keyed by a path of
//! indices, so results do not depend on scheduling or worker count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Root stream for a seed.
pub fn root(seed: u64) -> Stream {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Stream for the work item identified by `path` under `seed`.
pub fn stream(seed: u64, path: &[u64]) -> Stream {
    let id = path.iter().fold(0x5EED_u64, |h, &p| splitmix(h ^ splitmix(p)));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}
