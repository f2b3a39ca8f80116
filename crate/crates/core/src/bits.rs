//! Fixed-length bit strings backed by 64-bit words.

use crate::error::{Error, Result};

/// A bit string of fixed length. Bit `i` lives in word `i / 64` at position `i % 64`,
/// so the little-endian byte serialization is least-significant-bit-first per byte.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BitCode {
    len: usize,
    words: Vec<u64>,
}

impl BitCode {
    pub fn zeros(len: usize) -> Self {
        Self {
            len,
            words: vec![0; len.div_ceil(64)],
        }
    }

    pub fn from_bools(bits: &[bool]) -> Self {
        let mut code = Self::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            if b {
                code.set(i, true);
            }
        }
        code
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit index out of range");
        (self.words[i / 64] >> (i % 64)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, value: bool) {
        assert!(i < self.len, "bit index out of range");
        let mask = 1u64 << (i % 64);
        if value {
            self.words[i / 64] |= mask;
        } else {
            self.words[i / 64] &= !mask;
        }
    }

    pub fn count_ones(&self) -> u32 {
        self.words.iter().map(|w| w.count_ones()).sum()
    }

    /// Hamming distance; panics on length mismatch (use [`BitCode::checked_hamming`]
    /// for untrusted inputs).
    #[inline]
    pub fn hamming(&self, other: &BitCode) -> u32 {
        debug_assert_eq!(self.len, other.len);
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a ^ b).count_ones())
            .sum()
    }

    pub fn checked_hamming(&self, other: &BitCode) -> Result<u32> {
        if self.len != other.len {
            return Err(Error::DimensionMismatch {
                expected: self.len,
                got: other.len,
            });
        }
        Ok(self.hamming(other))
    }

    /// Packed bytes, least-significant bit first within each byte.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out: Vec<u8> = self.words.iter().flat_map(|w| w.to_le_bytes()).collect();
        out.truncate(self.len.div_ceil(8));
        out
    }

    pub fn from_bytes(len: usize, bytes: &[u8]) -> Result<Self> {
        if bytes.len() != len.div_ceil(8) {
            return Err(Error::DimensionMismatch {
                expected: len.div_ceil(8),
                got: bytes.len(),
            });
        }
        let mut code = Self::zeros(len);
        for (w, chunk) in code.words.iter_mut().zip(bytes.chunks(8)) {
            let mut buf = [0u8; 8];
            buf[..chunk.len()].copy_from_slice(chunk);
            *w = u64::from_le_bytes(buf);
        }
        if len % 64 != 0 {
            let last = code.words.len() - 1;
            let extra = code.words[last] & !((1u64 << (len % 64)) - 1);
            if extra != 0 {
                return Err(Error::Malformed(
                    "bits set past the end of a bit string".into(),
                ));
            }
        }
        Ok(code)
    }
}
