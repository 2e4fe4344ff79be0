//! Seed derivation and per-sensor random streams.
//!
//! A trial is identified by one `u64` seed. Sensor `i` draws from ChaCha8
//! stream `i + 1` under that key and stream `0` is left for trial
//! bookkeeping, so a sensor's draws never depend on `K` or on the other
//! sensors.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from a root seed and a path of labels.
pub fn derive_seed(root: u64, path: &[u64]) -> u64 {
    path.iter().fold(splitmix64(root), |acc, &label| splitmix64(acc ^ splitmix64(label)))
}

/// Seed of trial `index` under `root`.
pub fn trial_seed(root: u64, index: u64) -> u64 {
    derive_seed(root, &[index])
}

pub fn sensor_stream(trial_seed: u64, sensor: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(trial_seed);
    rng.set_stream(sensor as u64 + 1);
    rng
}

pub fn bookkeeping_stream(trial_seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(trial_seed);
    rng.set_stream(0);
    rng
}
