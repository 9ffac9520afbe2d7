//! Seeded randomness with named sub-streams.
//!
//! Every run derives all of its randomness from a single `u64` seed. Each
//! logical consumer (initialization, snapshots, inner loops, the output
//! draw) gets its own named stream, so changing how often one consumer
//! draws does not shift the values seen by the others.

use ndarray::Array1;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// The RNG used throughout the library. ChaCha gives identical streams on
/// every platform, which keeps traces byte-reproducible.
pub type Stream = ChaCha8Rng;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives the sub-stream `label` of the master `seed`.
pub fn substream(seed: u64, label: &str) -> Stream {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    let mut state = seed ^ h;
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    Stream::from_seed(key)
}

/// One standard Gaussian vector.
pub fn gaussian_vector(rng: &mut Stream, dim: usize) -> Array1<f64> {
    Array1::from_iter((0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)))
}

/// A batch of standard Gaussian direction vectors.
pub fn gaussian_directions(rng: &mut Stream, count: usize, dim: usize) -> Vec<Array1<f64>> {
    (0..count).map(|_| gaussian_vector(rng, dim)).collect()
}

/// Uniform index in `0..n`.
pub fn uniform_index(rng: &mut Stream, n: usize) -> usize {
    rng.random_range(0..n)
}
