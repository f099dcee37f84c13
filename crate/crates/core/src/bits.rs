//! Packed binary strings, run-length decomposition, and partitions.
//!
//! [`Bits`] is the payload type shared by every other module: source strings,
//! traces, and reconstructions are all `Bits`. Storage is one bit per position
//! in little-endian `u64` words, so random access is O(1) and the alignment
//! kernels can work word-at-a-time.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

const WORD_BITS: usize = 64;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BitsError {
    #[error("run length must be at least 1 (run index {0})")]
    ZeroRunLength(usize),
    #[error("invalid character {0:?}; expected '0' or '1'")]
    BadChar(char),
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("empty input")]
    EmptyInput,
    #[error("invalid partition: {0}")]
    BadPartition(&'static str),
    #[error("brute-force budget exceeded: need |u| <= {max_len} and parts <= {max_parts}")]
    BudgetExceeded { max_len: usize, max_parts: usize },
}

/// A binary string stored bit-packed, least significant bit first within each word.
///
/// Invariant: `words.len() == ceil(len / 64)` and all bits at positions `>= len`
/// in the last word are zero, so `==` and `Hash` on the raw words are canonical.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct Bits {
    words: Vec<u64>,
    len: usize,
}

impl Bits {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(bits: usize) -> Self {
        Bits {
            words: Vec::with_capacity(bits.div_ceil(WORD_BITS)),
            len: 0,
        }
    }

    /// A run of `len` copies of `value`.
    pub fn repeat(value: bool, len: usize) -> Self {
        let mut out = Self::with_capacity(len);
        out.extend_run(value, len);
        out
    }

    pub fn zeros(len: usize) -> Self {
        Self::repeat(false, len)
    }

    pub fn ones(len: usize) -> Self {
        Self::repeat(true, len)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit index {i} out of range for length {}", self.len);
        (self.words[i / WORD_BITS] >> (i % WORD_BITS)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, value: bool) {
        assert!(i < self.len, "bit index {i} out of range for length {}", self.len);
        let mask = 1u64 << (i % WORD_BITS);
        if value {
            self.words[i / WORD_BITS] |= mask;
        } else {
            self.words[i / WORD_BITS] &= !mask;
        }
    }

    #[inline]
    pub fn flip(&mut self, i: usize) {
        assert!(i < self.len, "bit index {i} out of range for length {}", self.len);
        self.words[i / WORD_BITS] ^= 1u64 << (i % WORD_BITS);
    }

    #[inline]
    pub fn push(&mut self, value: bool) {
        let offset = self.len % WORD_BITS;
        if offset == 0 {
            self.words.push(0);
        }
        if value {
            *self.words.last_mut().unwrap() |= 1u64 << offset;
        }
        self.len += 1;
    }

    /// Appends `len` copies of `value`, filling whole words where possible.
    pub fn extend_run(&mut self, value: bool, len: usize) {
        let new_len = self.len + len;
        self.words.resize(new_len.div_ceil(WORD_BITS), 0);
        if value {
            let (start, end) = (self.len, new_len);
            let mut i = start;
            while i < end {
                let w = i / WORD_BITS;
                let lo = i % WORD_BITS;
                let hi = WORD_BITS.min(lo + (end - i));
                let mask = if hi - lo == WORD_BITS {
                    u64::MAX
                } else {
                    ((1u64 << (hi - lo)) - 1) << lo
                };
                self.words[w] |= mask;
                i += hi - lo;
            }
        }
        self.len = new_len;
    }

    pub fn extend_from(&mut self, other: &Bits) {
        for b in other.iter() {
            self.push(b);
        }
    }

    /// Copy of the half-open range `range`.
    pub fn slice(&self, range: Range<usize>) -> Bits {
        assert!(range.start <= range.end && range.end <= self.len);
        let mut out = Bits::with_capacity(range.len());
        for i in range {
            out.push(self.get(i));
        }
        out
    }

    /// Number of positions equal to `value`.
    pub fn count(&self, value: bool) -> usize {
        let ones: usize = self.words.iter().map(|w| w.count_ones() as usize).sum();
        if value {
            ones
        } else {
            self.len - ones
        }
    }

    pub fn iter(&self) -> BitIter<'_> {
        BitIter { bits: self, pos: 0 }
    }

    pub(crate) fn words(&self) -> &[u64] {
        &self.words
    }

    /// Run-length decomposition; inverse of [`from_runs`].
    pub fn runs(&self) -> RunSeq {
        runs(self)
    }
}

impl FromIterator<bool> for Bits {
    fn from_iter<I: IntoIterator<Item = bool>>(iter: I) -> Self {
        let mut out = Bits::new();
        for b in iter {
            out.push(b);
        }
        out
    }
}

pub struct BitIter<'a> {
    bits: &'a Bits,
    pos: usize,
}

impl Iterator for BitIter<'_> {
    type Item = bool;

    #[inline]
    fn next(&mut self) -> Option<bool> {
        if self.pos >= self.bits.len {
            return None;
        }
        let b = (self.bits.words[self.pos / WORD_BITS] >> (self.pos % WORD_BITS)) & 1 == 1;
        self.pos += 1;
        Some(b)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let rem = self.bits.len - self.pos;
        (rem, Some(rem))
    }
}

impl ExactSizeIterator for BitIter<'_> {}

impl fmt::Display for Bits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.iter() {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for Bits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.len <= 80 {
            write!(f, "Bits({self})")
        } else {
            let head: String = self.iter().take(32).map(|b| if b { '1' } else { '0' }).collect();
            write!(f, "Bits(len={}, {head}...)", self.len)
        }
    }
}

impl FromStr for Bits {
    type Err = BitsError;

    /// Text codec: one ASCII `0`/`1` per bit.
    fn from_str(s: &str) -> Result<Self, BitsError> {
        let mut out = Bits::with_capacity(s.len());
        for c in s.chars() {
            match c {
                '0' => out.push(false),
                '1' => out.push(true),
                other => return Err(BitsError::BadChar(other)),
            }
        }
        Ok(out)
    }
}

impl Serialize for Bits {
    fn serialize<S: Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        ser.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Bits {
    fn deserialize<D: Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        let s = String::deserialize(de)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Run-length view of a [`Bits`]: the first run's value plus the lengths of the
/// alternating runs. Lengths are all >= 1 and sum to the originating length.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunSeq {
    pub first_value: bool,
    pub lengths: Vec<usize>,
}

impl RunSeq {
    pub fn empty() -> Self {
        RunSeq { first_value: false, lengths: Vec::new() }
    }

    /// Value of run `i` (runs alternate starting from `first_value`).
    pub fn value_at(&self, i: usize) -> bool {
        self.first_value ^ (i % 2 == 1)
    }

    pub fn total_len(&self) -> usize {
        self.lengths.iter().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.lengths.is_empty()
    }
}

/// Decomposes `x` into maximal runs. The empty string yields an empty `RunSeq`.
pub fn runs(x: &Bits) -> RunSeq {
    let mut it = x.iter();
    let first = match it.next() {
        Some(b) => b,
        None => return RunSeq::empty(),
    };
    let mut lengths = Vec::new();
    let mut cur_val = first;
    let mut cur_len = 1usize;
    for b in it {
        if b == cur_val {
            cur_len += 1;
        } else {
            lengths.push(cur_len);
            cur_val = b;
            cur_len = 1;
        }
    }
    lengths.push(cur_len);
    RunSeq { first_value: first, lengths }
}

/// Rebuilds the string a [`RunSeq`] describes. Rejects zero-length runs.
pub fn from_runs(r: &RunSeq) -> Result<Bits, BitsError> {
    let mut out = Bits::with_capacity(r.total_len());
    for (i, &len) in r.lengths.iter().enumerate() {
        if len == 0 {
            return Err(BitsError::ZeroRunLength(i));
        }
        out.extend_run(r.value_at(i), len);
    }
    Ok(out)
}

/// A split of a string of length `len()` into `parts()` contiguous, possibly
/// empty substrings, described by its weakly increasing cut indices
/// `0 = c_0 <= c_1 <= ... <= c_b = len`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Partition {
    boundaries: Vec<usize>,
}

impl Partition {
    pub fn new(boundaries: Vec<usize>) -> Result<Self, BitsError> {
        if boundaries.is_empty() {
            return Err(BitsError::BadPartition("no boundaries"));
        }
        if boundaries[0] != 0 {
            return Err(BitsError::BadPartition("first boundary must be 0"));
        }
        if boundaries.windows(2).any(|w| w[0] > w[1]) {
            return Err(BitsError::BadPartition("boundaries must be weakly increasing"));
        }
        Ok(Partition { boundaries })
    }

    /// The trivial single-part partition of a string of length `len`.
    pub fn single(len: usize) -> Self {
        Partition { boundaries: vec![0, len] }
    }

    /// Number of parts `b`.
    pub fn parts(&self) -> usize {
        self.boundaries.len() - 1
    }

    /// Total length spanned (the last boundary).
    pub fn len(&self) -> usize {
        *self.boundaries.last().unwrap()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Half-open range of part `i`.
    pub fn part(&self, i: usize) -> Range<usize> {
        self.boundaries[i]..self.boundaries[i + 1]
    }

    pub fn boundaries(&self) -> &[usize] {
        &self.boundaries
    }
}
