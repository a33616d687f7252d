//! Seeded counter-based random streams.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// Independent stream `stream` of the generator keyed by `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Deterministic mixing of a base seed with a list of integer labels.
pub fn mix_seed(base: u64, labels: &[u64]) -> u64 {
    let mut h = splitmix(base);
    for &l in labels {
        h = splitmix(h ^ splitmix(l.wrapping_add(0x632b_e59b_d9b4_e019)));
    }
    h
}

fn splitmix(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
