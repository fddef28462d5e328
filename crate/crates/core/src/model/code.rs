use std::fmt;

use crate::error::{NashError, Result};
use crate::nn::Rng;

pub const MAX_BITS: usize = 128;
const WORDS: usize = MAX_BITS / 64;

/// Packed binary code of up to 128 bits.
///
/// Bit `i` lives in word `i / 64` at position `i % 64`; in text form bit 0
/// is written first (most significant).
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct HashCode {
    len: u8,
    words: [u64; WORDS],
}

impl HashCode {
    pub fn zeros(len: usize) -> Result<Self> {
        if len == 0 || len > MAX_BITS {
            return Err(NashError::Config(format!(
                "code length must be in 1..={MAX_BITS}, got {len}"
            )));
        }
        Ok(HashCode {
            len: len as u8,
            words: [0; WORDS],
        })
    }

    pub fn from_bits(bits: &[bool]) -> Result<Self> {
        let mut code = HashCode::zeros(bits.len())?;
        for (i, &b) in bits.iter().enumerate() {
            code.set(i, b);
        }
        Ok(code)
    }

    /// Rebuilds a code from its packed words; bits past `len` are cleared.
    pub fn from_words(len: usize, words: &[u64]) -> Result<Self> {
        let mut code = HashCode::zeros(len)?;
        let n = len.div_ceil(64);
        if words.len() != n {
            return Err(NashError::shape("packed code words", n, words.len()));
        }
        code.words[..n].copy_from_slice(words);
        if !len.is_multiple_of(64) {
            code.words[n - 1] &= (1u64 << (len % 64)) - 1;
        }
        Ok(code)
    }

    pub fn from_bitstring(s: &str) -> Result<Self> {
        let bits = s
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(NashError::Config(format!(
                    "invalid bit character `{other}`"
                ))),
            })
            .collect::<Result<Vec<_>>>()?;
        HashCode::from_bits(&bits)
    }

    pub fn len(&self) -> usize {
        self.len as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, i: usize) -> bool {
        debug_assert!(i < self.len());
        (self.words[i / 64] >> (i % 64)) & 1 == 1
    }

    pub fn set(&mut self, i: usize, bit: bool) {
        assert!(
            i < self.len(),
            "bit {i} out of range for {}-bit code",
            self.len
        );
        let mask = 1u64 << (i % 64);
        if bit {
            self.words[i / 64] |= mask;
        } else {
            self.words[i / 64] &= !mask;
        }
    }

    /// Packed words actually used by this code length.
    pub fn words(&self) -> &[u64] {
        &self.words[..self.len().div_ceil(64)]
    }

    pub fn count_ones(&self) -> u32 {
        self.words.iter().map(|w| w.count_ones()).sum()
    }

    pub fn hamming(&self, other: &HashCode) -> u32 {
        debug_assert_eq!(self.len, other.len);
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a ^ b).count_ones())
            .sum()
    }

    pub fn to_bits(&self) -> Vec<bool> {
        (0..self.len()).map(|i| self.get(i)).collect()
    }

    /// Bits as 0.0 / 1.0.
    pub fn to_f64(&self) -> Vec<f64> {
        (0..self.len())
            .map(|i| if self.get(i) { 1.0 } else { 0.0 })
            .collect()
    }
}

impl fmt::Display for HashCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.len() {
            f.write_str(if self.get(i) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for HashCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "HashCode({self})")
    }
}

/// `z_i = 1` iff `h_i > 0.5`; an exact 0.5 maps to 0.
pub fn binarize_deterministic(h: &[f64]) -> Result<HashCode> {
    let mut code = HashCode::zeros(h.len())?;
    for (i, &p) in h.iter().enumerate() {
        code.set(i, p > 0.5);
    }
    Ok(code)
}

/// `z_i = 1` iff `h_i > mu_i` with fresh `mu_i ~ U(0, 1)`. Returns the
/// thresholds alongside the code.
pub fn binarize_stochastic(h: &[f64], rng: &mut Rng) -> Result<(HashCode, Vec<f64>)> {
    let mut code = HashCode::zeros(h.len())?;
    let mut mu = vec![0.0; h.len()];
    rng.fill_uniform(&mut mu);
    for (i, (&p, &m)) in h.iter().zip(&mu).enumerate() {
        code.set(i, p > m);
    }
    Ok((code, mu))
}
