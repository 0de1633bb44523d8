//! Packed bit vectors.
//!
//! One convention everywhere: bit `i` of a stream lives in 64-bit word
//! `i / 64` at position `i % 64` (LSB-first). Serialized to bytes, bit `i`
//! lives in byte `i / 8` at position `i % 8`, bytes in stream order — the
//! byte view and the word view describe the same bit order.

use alloc::vec;
use alloc::vec::Vec;

/// A growable, packed vector of bits (LSB-first in 64-bit words).
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PackedBits {
    words: Vec<u64>,
    len: usize,
}

impl PackedBits {
    /// Empty bit vector.
    pub fn new() -> Self {
        Self::default()
    }

    /// Empty bit vector with room for `bits` bits.
    pub fn with_capacity(bits: usize) -> Self {
        PackedBits {
            words: Vec::with_capacity(bits.div_ceil(64)),
            len: 0,
        }
    }

    /// All-zero bit vector of the given length.
    pub fn zeros(bits: usize) -> Self {
        PackedBits {
            words: vec![0u64; bits.div_ceil(64)],
            len: bits,
        }
    }

    /// Builds from a closure over bit indices (used heavily in tests).
    pub fn from_fn<F: FnMut(usize) -> bool>(bits: usize, mut f: F) -> Self {
        let mut out = Self::with_capacity(bits);
        for i in 0..bits {
            out.push(f(i));
        }
        out
    }

    /// Takes ownership of raw words; only the first `bits` bits are valid.
    /// Bits past `bits` in the last word must be zero (enforced here).
    pub fn from_words(mut words: Vec<u64>, bits: usize) -> Self {
        assert!(bits <= words.len() * 64, "bit length exceeds word storage");
        words.truncate(bits.div_ceil(64));
        if !bits.is_multiple_of(64) {
            if let Some(last) = words.last_mut() {
                *last &= (1u64 << (bits % 64)) - 1;
            }
        }
        PackedBits { words, len: bits }
    }

    /// Number of bits.
    pub fn len(&self) -> usize {
        self.len
    }

    /// True when no bits are stored.
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Appends one bit.
    pub fn push(&mut self, bit: bool) {
        let word = self.len / 64;
        if word == self.words.len() {
            self.words.push(0);
        }
        if bit {
            self.words[word] |= 1u64 << (self.len % 64);
        }
        self.len += 1;
    }

    /// Appends all bits of `other`, preserving order.
    pub fn extend_from(&mut self, other: &PackedBits) {
        if self.len.is_multiple_of(64) {
            // word-aligned: bulk copy
            self.words.extend_from_slice(&other.words);
            self.words.truncate((self.len + other.len).div_ceil(64));
            self.len += other.len;
        } else {
            for i in 0..other.len {
                self.push(other.get(i));
            }
        }
    }

    /// Bit at index `i`.
    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit index {i} out of range {}", self.len);
        (self.words[i / 64] >> (i % 64)) & 1 == 1
    }

    /// Word view (bits past `len` in the final word are zero).
    pub fn words(&self) -> &[u64] {
        &self.words
    }

    /// Number of set bits.
    pub fn count_ones(&self) -> u64 {
        self.words.iter().map(|w| w.count_ones() as u64).sum()
    }

    /// Bitwise XOR with another vector of identical length.
    #[must_use]
    pub fn xor(&self, other: &PackedBits) -> PackedBits {
        assert_eq!(self.len, other.len, "xor of unequal-length bit vectors");
        PackedBits {
            words: self
                .words
                .iter()
                .zip(&other.words)
                .map(|(a, b)| a ^ b)
                .collect(),
            len: self.len,
        }
    }

    /// Copies the sub-range `[start, start + len)` into a fresh vector.
    pub fn slice(&self, start: usize, len: usize) -> PackedBits {
        assert!(start + len <= self.len, "slice out of range");
        let mut out = PackedBits::zeros(len);
        let shift = start % 64;
        let first = start / 64;
        for (k, w) in out.words.iter_mut().enumerate() {
            let lo = self.words.get(first + k).copied().unwrap_or(0) >> shift;
            let hi = if shift == 0 {
                0
            } else {
                self.words.get(first + k + 1).copied().unwrap_or(0) << (64 - shift)
            };
            *w = lo | hi;
        }
        if !len.is_multiple_of(64) {
            let last = out.words.len() - 1;
            out.words[last] &= (1u64 << (len % 64)) - 1;
        }
        out
    }

    /// Serializes to bytes: bit `i` → byte `i/8`, position `i%8`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let nbytes = self.len.div_ceil(8);
        let mut out = Vec::with_capacity(nbytes);
        for j in 0..nbytes {
            let word = self.words[j / 8];
            out.push(((word >> (8 * (j % 8))) & 0xFF) as u8);
        }
        out
    }

    /// Parses the byte serialization back into bits.
    pub fn from_bytes(bytes: &[u8], bits: usize) -> Self {
        assert!(bits <= bytes.len() * 8, "bit length exceeds byte storage");
        let mut words = vec![0u64; bits.div_ceil(64)];
        for (j, &b) in bytes.iter().enumerate().take(bits.div_ceil(8)) {
            words[j / 8] |= (b as u64) << (8 * (j % 8));
        }
        Self::from_words(words, bits)
    }
}
