//! Deterministic seed derivation for trials and sub-streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Random generator used for every stochastic step.
pub type TrialRng = ChaCha8Rng;

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Hashes a sequence of integers into a seed.
pub fn derive_seed(parts: &[u64]) -> u64 {
    parts.iter().fold(0x243f_6a88_85a3_08d3, |acc, &p| mix(acc ^ mix(p)))
}

/// Seed of a single Monte-Carlo trial.
pub fn trial_seed(master: u64, sweep: usize, group: usize, trial: usize) -> u64 {
    derive_seed(&[master, sweep as u64, group as u64, trial as u64])
}

/// Independent generator for sub-stream `stream` of `seed`.
pub fn stream(seed: u64, stream: u64) -> TrialRng {
    TrialRng::seed_from_u64(derive_seed(&[seed, stream]))
}
