//! Reproducible random streams.
//!
//! Replicate `i` of a run seeded with `root` always draws from ChaCha stream
//! `i` of the generator keyed by `root`, so results do not depend on how
//! replicates are scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

pub fn root_rng(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn replicate_rng(seed: u64, replicate: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate);
    rng
}

/// SplitMix64 finalizer; used to key per-subset noise.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Runs `replicates` independent jobs in fixed-size blocks and merges the
/// per-block partials in block order.
///
/// Each block owns one RNG stream, so the merged result is identical for any
/// thread count.
pub fn run_blocks<P, F, M>(
    seed: u64,
    replicates: usize,
    block: usize,
    job: F,
    merge: M,
) -> Option<P>
where
    P: Send,
    F: Fn(&mut SimRng, usize) -> P + Sync,
    M: Fn(P, P) -> P,
{
    use rayon::prelude::*;
    let block = block.max(1);
    let n_blocks = replicates.div_ceil(block);
    let partials: Vec<P> = (0..n_blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = replicate_rng(seed, b as u64);
            let len = block.min(replicates - b * block);
            job(&mut rng, len)
        })
        .collect();
    partials.into_iter().reduce(merge)
}
