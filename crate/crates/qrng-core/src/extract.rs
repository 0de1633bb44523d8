//! Seeded Toeplitz extraction over GF(2).
//!
//! The raw detector bits carry certified smooth min-entropy but are not
//! uniform; a strong extractor compresses them to nearly-uniform output.
//! The extractor family here is Toeplitz hashing: `out = T·x` over GF(2),
//! where the `m×n` matrix `T` is defined by an `n+m−1`-bit seed under the
//! convention
//!
//! ```text
//! T[i][j] = seed[i − j + n − 1],
//! ```
//!
//! so seed indices `0..n−1` hold the first row reversed and `n..n+m−2` the
//! rest of the first column. This convention is normative: the word-packed
//! fast path must agree bit-exactly with [`dense_reference_extract`].
//!
//! Output sizing follows the leftover-hash lemma:
//! `m = ⌊H_min − 2·log₂(1/ε_ext)⌋`, clamped at zero.
//!
//! The fast path exploits the identity `out[i] = (s ⊛ x)[i + n − 1]`, where
//! `⊛` is the carryless (polynomial GF(2)) product: only the `m` middle
//! bits of the convolution are needed, so only the word-diagonals that land
//! there are computed, each via 4-bit windowed carryless multiplication.

use crate::bits::PackedBits;
use crate::math::LN_2;
use alloc::vec;

/// Everything that defines one extraction: dimensions, seed, and the
/// failure parameter the output length was sized with.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtractorSpec {
    /// Raw input length n in bits.
    pub input_length: usize,
    /// Output length m in bits, `1 ≤ m ≤ n`.
    pub output_length: usize,
    /// Toeplitz seed, exactly `n + m − 1` bits.
    pub seed: PackedBits,
    /// Extractor failure parameter ε_ext ∈ (0, 1).
    pub epsilon_ext: f64,
}

/// Extracted output bits with their provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtractedBlock {
    /// The m output bits.
    pub bits: PackedBits,
    /// Which acquisition block the input came from.
    pub block_id: u64,
    /// Digest of the extractor parameters (dimensions, seed, ε_ext) for the
    /// report sidecar.
    pub spec_digest: u64,
}

/// A rejected extraction request.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtractError {
    /// output_length must satisfy `1 ≤ m ≤ n`.
    BadDimensions { n: usize, m: usize },
    /// The seed must be exactly `n + m − 1` bits.
    SeedLength { expected: usize, got: usize },
    /// ε_ext must lie strictly inside (0, 1).
    EpsilonExt(f64),
    /// The input must be exactly `n` bits.
    InputLength { expected: usize, got: usize },
    /// h_min_total must be finite and ≥ 0.
    NegativeEntropy(f64),
}

impl core::fmt::Display for ExtractError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            ExtractError::BadDimensions { n, m } => {
                write!(f, "output length must satisfy 1 <= m <= n, got m = {m}, n = {n}")
            }
            ExtractError::SeedLength { expected, got } => {
                write!(f, "seed must be exactly n + m - 1 = {expected} bits, got {got}")
            }
            ExtractError::EpsilonExt(e) => {
                write!(f, "epsilon_ext must lie in (0, 1), got {e}")
            }
            ExtractError::InputLength { expected, got } => {
                write!(f, "input must be exactly {expected} bits, got {got}")
            }
            ExtractError::NegativeEntropy(h) => {
                write!(f, "min-entropy budget must be finite and >= 0, got {h}")
            }
        }
    }
}

impl core::error::Error for ExtractError {}

impl ExtractorSpec {
    /// Checks the field invariants.
    pub fn validate(&self) -> Result<(), ExtractError> {
        let (n, m) = (self.input_length, self.output_length);
        if m < 1 || m > n {
            return Err(ExtractError::BadDimensions { n, m });
        }
        let expected = n + m - 1;
        if self.seed.len() != expected {
            return Err(ExtractError::SeedLength {
                expected,
                got: self.seed.len(),
            });
        }
        if !(self.epsilon_ext > 0.0 && self.epsilon_ext < 1.0) {
            return Err(ExtractError::EpsilonExt(self.epsilon_ext));
        }
        Ok(())
    }

    /// FNV-1a digest over dimensions, seed bits, and ε_ext; identifies the
    /// spec in reports.
    pub fn digest(&self) -> u64 {
        let mut h = Fnv1a::new();
        h.update(&(self.input_length as u64).to_le_bytes());
        h.update(&(self.output_length as u64).to_le_bytes());
        h.update(&self.seed.to_bytes());
        h.update(&self.epsilon_ext.to_bits().to_le_bytes());
        h.finish()
    }
}

/// Leftover-hash output sizing: `m = ⌊h_min_total − 2·log₂(1/ε_ext)⌋`,
/// clamped at zero.
pub fn output_length(h_min_total: f64, epsilon_ext: f64) -> Result<usize, ExtractError> {
    if !(h_min_total.is_finite() && h_min_total >= 0.0) {
        return Err(ExtractError::NegativeEntropy(h_min_total));
    }
    if !(epsilon_ext > 0.0 && epsilon_ext < 1.0) {
        return Err(ExtractError::EpsilonExt(epsilon_ext));
    }
    let cost = -2.0 * libm::log(epsilon_ext) / LN_2;
    let m = libm::floor(h_min_total - cost);
    Ok(if m > 0.0 { m as usize } else { 0 })
}

/// Reference implementation: explicit bit-by-bit `T·x` over GF(2).
///
/// Normative but quadratic — intended for validating the fast path at
/// small sizes (n ≤ 256), not for production extraction.
pub fn dense_reference_extract(
    spec: &ExtractorSpec,
    input: &PackedBits,
    block_id: u64,
) -> Result<ExtractedBlock, ExtractError> {
    spec.validate()?;
    if input.len() != spec.input_length {
        return Err(ExtractError::InputLength {
            expected: spec.input_length,
            got: input.len(),
        });
    }
    let n = spec.input_length;
    let m = spec.output_length;
    let bits = PackedBits::from_fn(m, |i| {
        let mut acc = false;
        for j in 0..n {
            if spec.seed.get(i + n - 1 - j) && input.get(j) {
                acc = !acc;
            }
        }
        acc
    });
    Ok(ExtractedBlock {
        bits,
        block_id,
        spec_digest: spec.digest(),
    })
}

/// Word-packed Toeplitz extraction.
///
/// Computes only the needed window of the carryless product `s ⊛ x`
/// (product bits `n−1 .. n+m−2`), word-diagonal by word-diagonal, using
/// 4-bit windowed carryless multiplication per 64×64 word product.
/// Bit-exactly equal to [`dense_reference_extract`].
pub fn toeplitz_extract(
    spec: &ExtractorSpec,
    input: &PackedBits,
    block_id: u64,
) -> Result<ExtractedBlock, ExtractError> {
    spec.validate()?;
    if input.len() != spec.input_length {
        return Err(ExtractError::InputLength {
            expected: spec.input_length,
            got: input.len(),
        });
    }
    let n = spec.input_length;
    let m = spec.output_length;
    let s_words = spec.seed.words();
    let x_words = input.words();

    let lo_bit = n - 1;
    let hi_bit = n + m - 2;
    let lo_w = lo_bit / 64;
    let hi_w = hi_bit / 64;
    let mut acc = vec![0u64; hi_w - lo_w + 1];

    for (i, &sw) in s_words.iter().enumerate() {
        if sw == 0 || i > hi_w {
            continue;
        }
        let j_lo = if i + 1 >= lo_w { 0 } else { lo_w - 1 - i };
        let j_hi = (hi_w - i).min(x_words.len() - 1);
        if j_lo > j_hi {
            continue;
        }
        let tab = nibble_table(sw);
        for (j, &xw) in x_words.iter().enumerate().take(j_hi + 1).skip(j_lo) {
            if xw == 0 {
                continue;
            }
            let prod = clmul_with_table(&tab, xw);
            let k = i + j;
            if k >= lo_w && k <= hi_w {
                acc[k - lo_w] ^= prod as u64;
            }
            if k + 1 >= lo_w && k < hi_w {
                acc[k + 1 - lo_w] ^= (prod >> 64) as u64;
            }
        }
    }

    let bits = PackedBits::from_fn(m, |t| {
        let bit = lo_bit + t;
        (acc[bit / 64 - lo_w] >> (bit % 64)) & 1 == 1
    });
    Ok(ExtractedBlock {
        bits,
        block_id,
        spec_digest: spec.digest(),
    })
}

/// Carryless products of `w` with every 4-bit multiplier. `tab[v]` holds
/// the full (up to 67-bit) product in a u128.
fn nibble_table(w: u64) -> [u128; 16] {
    let mut tab = [0u128; 16];
    tab[1] = w as u128;
    for v in 2..16 {
        tab[v] = (tab[v >> 1] << 1) ^ tab[v & 1];
    }
    tab
}

/// 64×64 → 128-bit carryless product using a prebuilt nibble table for one
/// operand.
fn clmul_with_table(tab: &[u128; 16], x: u64) -> u128 {
    let mut res = 0u128;
    for t in 0..16 {
        let nib = ((x >> (4 * t)) & 0xf) as usize;
        res ^= tab[nib] << (4 * t);
    }
    res
}

/// Incremental FNV-1a (64-bit) over byte slices.
#[derive(Debug, Clone, Copy)]
pub struct Fnv1a(u64);

impl Fnv1a {
    /// Standard offset basis.
    pub fn new() -> Self {
        Fnv1a(0xcbf2_9ce4_8422_2325)
    }

    /// Absorbs bytes.
    pub fn update(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 ^= b as u64;
            self.0 = self.0.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }

    /// Current digest.
    pub fn finish(&self) -> u64 {
        self.0
    }
}

impl Default for Fnv1a {
    fn default() -> Self {
        Self::new()
    }
}
