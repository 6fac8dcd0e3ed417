//! Deterministic random substreams.
//!
//! Every replication `r` of a run with seed `s` draws from ChaCha8 keyed by
//! `s` on stream `r`, so a replication's numbers do not depend on which
//! thread runs it or on how many replications precede it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

/// Independent stream for replication `index` under `seed`.
pub fn substream(seed: u64, index: u64) -> Stream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Derives a seed for a named stage of a run, so that unrelated stages
/// (e.g. a reference sampler and the main ensemble) never share streams.
pub fn stage_seed(seed: u64, stage: &str) -> u64 {
    // FNV-1a over the label, mixed with the seed through splitmix64.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in stage.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    splitmix64(seed ^ h)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Uniform draw on `(0, 1]`.
#[inline]
pub fn open_unit<R: rand::Rng + ?Sized>(rng: &mut R) -> f64 {
    1.0 - rng.random::<f64>()
}
