//! Core engine for a software twin of a modulator-free, self-testing quantum
//! random number generator.
//!
//! The device under simulation is a prepare-and-measure optical experiment:
//! a partially characterized source emits, per clock cycle, either a vacuum
//! state (`x = 0`) or a weak coherent pulse (`x = 1`), and an *untrusted*
//! balanced homodyne detector thresholds its quadrature signal into a binary
//! outcome `b`. Randomness in `b` is certified *semi-device-independently*:
//! the only trust placed in the hardware is an upper bound `ω` on the mean
//! photon number of the prepared states. From the observed conditional
//! statistics `p(b|x)` and `ω`, the engine derives a lower bound on the
//! adversary-conditioned Shannon entropy of `b`, converts it to a finite-size
//! smooth min-entropy, and sizes a seeded Toeplitz extractor that turns raw
//! detector bits into certified random output.
//!
//! Module map:
//!
//! * [`math`] — scalar numerics: binary entropy, Gaussian CDF/tails, root
//!   finding, 1-D/2-D minimization, adaptive quadrature.
//! * [`rng`] — deterministic, addressable randomness substreams.
//! * [`bits`] — packed bit vectors (LSB-first) shared by acquisition and
//!   extraction.
//! * [`photonics`] — source and homodyne simulation: pulse amplitudes,
//!   Gaussian quadrature sampling, analytic click probabilities, slow drift.
//! * [`acquisition`] — input generation, thresholding, conditional-statistics
//!   tallies, timed blocks.
//! * [`control`] — threshold tuning (bisection on the balance condition) and
//!   hill-climbing phase feedback.
//! * [`certify`] — the mathematical core: entropy certification under the
//!   energy bound, an explicit-attack validation oracle on a truncated Fock
//!   space, finite-size conversion, and net entropy accounting.
//! * [`energy`] — the trusted-side photon-number bound from power readings
//!   and continuous bound monitoring with block invalidation.
//! * [`extract`] — leftover-hash output sizing and seeded Toeplitz hashing
//!   over GF(2) with a word-packed carryless-multiply fast path.
//! * [`pipeline`] — the end-to-end orchestration used by the command-line
//!   driver.
//!
//! The crate is `no_std` (with `alloc`): everything here is pure computation
//! over explicit inputs and seeded randomness, so hosts from CLI tools to
//! embedded harnesses can drive it. All operations are deterministic given
//! their seeds; nothing reads clocks or global state.

#![no_std]
#![deny(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod acquisition;
pub mod bits;
pub mod certify;
pub mod control;
pub mod energy;
pub mod extract;
pub mod math;
pub mod photonics;
pub mod pipeline;
pub mod rng;
