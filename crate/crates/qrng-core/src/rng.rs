//! Deterministic randomness plumbing.
//!
//! A single 32-byte master seed fans out into independent, *addressable*
//! substreams: one per purpose (input bits, measurement noise, drift, …) and
//! per block index. Every consumer owns its stream, so simulations are
//! bit-reproducible regardless of chunking or thread scheduling, and blocks
//! can be re-simulated in isolation.
//!
//! Gaussian variates use the Box–Muller transform in a *stateless* form: each
//! call consumes exactly two 64-bit words and returns one normal (the cosine
//! branch only, the sine companion is discarded). That fixed consumption rate
//! is what makes per-pulse randomness independent of buffering decisions.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;

/// Master seed for an entire run.
pub type MasterSeed = [u8; 32];

/// What a substream is used for. The discriminant is baked into the stream
/// address, so two purposes never share randomness even at equal block index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum StreamPurpose {
    /// Protocol inputs `x`.
    InputBits = 1,
    /// Quadrature measurement noise (shot + electronic).
    Measurement = 2,
    /// Slow interferometer drift.
    Drift = 3,
    /// Power-meter reading noise.
    EnergyMeter = 4,
    /// Toeplitz extractor seed material.
    ExtractorSeed = 5,
    /// Random restarts of the attack-search oracle.
    AttackSearch = 6,
}

/// Derives the substream for (`purpose`, `index`) from the master seed.
///
/// Streams with different purposes or indices are distinct ChaCha12 streams
/// of the same keyed cipher; their outputs are computationally independent.
/// `index` must fit in 56 bits (plenty for block counts).
pub fn substream(seed: &MasterSeed, purpose: StreamPurpose, index: u64) -> ChaCha12Rng {
    debug_assert!(index < (1 << 56));
    let mut rng = ChaCha12Rng::from_seed(*seed);
    rng.set_stream(((purpose as u64) << 56) | (index & ((1 << 56) - 1)));
    rng
}

/// Expands a 64-bit convenience seed into a full master seed using the
/// SplitMix64 sequence (a fixed, documented expansion — not secret material).
pub fn master_seed_from_u64(seed: u64) -> MasterSeed {
    let mut state = seed;
    let mut out = [0u8; 32];
    for chunk in out.chunks_exact_mut(8) {
        state = state.wrapping_add(0x9E3779B97F4A7C15);
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
        z ^= z >> 31;
        chunk.copy_from_slice(&z.to_le_bytes());
    }
    out
}

/// Uniform variate in `[0, 1)` with 53-bit resolution (one word consumed).
pub fn uniform_unit<R: RngCore>(rng: &mut R) -> f64 {
    ((rng.next_u64() >> 11) as f64) * (1.0 / 9007199254740992.0)
}

/// Uniform variate in `(0, 1]` (one word consumed); never zero, so its
/// logarithm is always finite.
fn uniform_open_closed<R: RngCore>(rng: &mut R) -> f64 {
    (((rng.next_u64() >> 11) + 1) as f64) * (1.0 / 9007199254740992.0)
}

/// One standard normal variate; consumes exactly two 64-bit words.
pub fn standard_normal<R: RngCore>(rng: &mut R) -> f64 {
    let u1 = uniform_open_closed(rng);
    let u2 = uniform_unit(rng);
    libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(2.0 * core::f64::consts::PI * u2)
}

/// Bernoulli draw with success probability `p` (one word consumed).
pub fn bernoulli<R: RngCore>(rng: &mut R, p: f64) -> bool {
    uniform_unit(rng) < p
}
