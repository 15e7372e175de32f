//! Binary strings and the combinatorics the distinguisher builds on.
//!
//! Positions are 1-indexed throughout the public API: `x.get(1)` is the
//! first bit and `x.slice(a, b)` is the inclusive range `x_a ..= x_b`.

use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::seed;

/// A finite 0/1 sequence.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BitString {
    bits: Vec<u8>,
}

impl BitString {
    pub fn new(bits: Vec<u8>) -> Result<Self> {
        if let Some(b) = bits.iter().find(|&&b| b > 1) {
            return Err(Error::Parse(format!("bit value {b} is not 0 or 1")));
        }
        Ok(Self { bits })
    }

    pub(crate) fn from_raw(bits: Vec<u8>) -> Self {
        debug_assert!(bits.iter().all(|&b| b <= 1));
        Self { bits }
    }

    pub fn zeros(n: usize) -> Self {
        Self { bits: vec![0; n] }
    }

    /// Uniformly random string of length `n`.
    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        Self {
            bits: (0..n).map(|_| rng.random_range(0..=1u8)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn into_bits(self) -> Vec<u8> {
        self.bits
    }

    /// Bit at 1-indexed position `i`.
    pub fn get(&self, i: usize) -> Option<u8> {
        i.checked_sub(1).and_then(|j| self.bits.get(j).copied())
    }

    /// The inclusive 1-indexed substring `x_start ..= x_end`.
    ///
    /// Panics if the range is out of bounds.
    pub fn slice(&self, start: usize, end: usize) -> BitString {
        assert!(start >= 1 && end <= self.len() && start <= end + 1);
        Self {
            bits: self.bits[start - 1..end].to_vec(),
        }
    }

    /// Appends one bit.
    pub fn with_bit(&self, bit: u8) -> BitString {
        let mut bits = self.bits.clone();
        bits.push(bit & 1);
        Self { bits }
    }
}

impl AsRef<[u8]> for BitString {
    fn as_ref(&self) -> &[u8] {
        &self.bits
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.bits {
            f.write_str(if b == 1 { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for BitString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.trim()
            .chars()
            .map(|c| match c {
                '0' => Ok(0),
                '1' => Ok(1),
                other => Err(Error::Parse(format!("unexpected character {other:?}"))),
            })
            .collect::<Result<Vec<u8>>>()
            .map(|bits| Self { bits })
    }
}

impl Serialize for BitString {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for BitString {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Occurrence indicator of a pattern: `entries[i] = 1` iff the source has
/// the pattern starting at position `i`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct IndicatorVector {
    pub entries: BitString,
    pub pattern_length: usize,
}

impl IndicatorVector {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// 1-indexed positions holding a 1.
    pub fn support(&self) -> Vec<usize> {
        support(self.entries.bits())
    }
}

impl AsRef<[u8]> for IndicatorVector {
    fn as_ref(&self) -> &[u8] {
        self.entries.bits()
    }
}

impl fmt::Display for IndicatorVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.entries.fmt(f)
    }
}

pub(crate) fn support(bits: &[u8]) -> Vec<usize> {
    bits.iter()
        .enumerate()
        .filter(|(_, &b)| b == 1)
        .map(|(i, _)| i + 1)
        .collect()
}

/// Minimal deletion/insertion counts turning `y` into `x`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditDistanceReport {
    pub deletions_needed: usize,
    pub insertions_needed: usize,
    pub lcs_length: usize,
}

/// Length of the longest common subsequence.
pub fn lcs_length(a: &[u8], b: &[u8]) -> usize {
    let (a, b) = if a.len() < b.len() { (b, a) } else { (a, b) };
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for &ca in a {
        for (j, &cb) in b.iter().enumerate() {
            cur[j + 1] = if ca == cb {
                prev[j] + 1
            } else {
                cur[j].max(prev[j + 1])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Deletion/insertion distance from `y` to `x` (no substitutions).
pub fn edit_report(x: &[u8], y: &[u8]) -> EditDistanceReport {
    let lcs = lcs_length(x, y);
    EditDistanceReport {
        deletions_needed: y.len() - lcs,
        insertions_needed: x.len() - lcs,
        lcs_length: lcs,
    }
}

/// Whether `x` is reachable from `y` by at most `k` deletions and at most
/// `k` insertions.
pub fn edit_ball_membership(x: &BitString, y: &BitString, k: usize) -> (bool, EditDistanceReport) {
    let report = edit_report(x.bits(), y.bits());
    (
        report.deletions_needed <= k && report.insertions_needed <= k,
        report,
    )
}

/// Smallest 1-indexed position where the strings differ.
pub fn first_diff_index(x: &BitString, y: &BitString) -> Result<Option<usize>> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    Ok(x.bits()
        .iter()
        .zip(y.bits())
        .position(|(a, b)| a != b)
        .map(|i| i + 1))
}

/// `w_i = w_{i+a}` for every `i` in `1..=|w|-a`.
pub fn has_period(w: &BitString, a: usize) -> Result<bool> {
    if a == 0 || a > w.len() {
        return Err(Error::PeriodOutOfRange {
            period: a,
            len: w.len(),
        });
    }
    let b = w.bits();
    Ok(b.iter().zip(&b[a..]).all(|(x, y)| x == y))
}

/// No period `a` with `1 <= a <= ceil(|w|/2) - 1`.
///
/// Strings of length at most 2 have an empty range and are non-periodic.
pub fn is_non_periodic(w: &BitString) -> bool {
    let max_period = w.len().div_ceil(2).saturating_sub(1);
    (1..=max_period).all(|a| !has_period(w, a).unwrap_or(false))
}

/// Appends the bit that makes an odd-length string non-periodic, preferring 0.
pub fn extend_to_nonperiodic(w_prime: &BitString) -> Result<BitString> {
    if w_prime.len().is_multiple_of(2) {
        return Err(Error::EvenLength(w_prime.len()));
    }
    let zero = w_prime.with_bit(0);
    if is_non_periodic(&zero) {
        Ok(zero)
    } else {
        Ok(w_prime.with_bit(1))
    }
}

/// Every two 1-entries at positions `i < j` satisfy `j - i >= p`.
pub fn in_runlength_class<V: AsRef<[u8]> + ?Sized>(v: &V, p: usize) -> bool {
    let mut last: Option<usize> = None;
    for (i, &b) in v.as_ref().iter().enumerate() {
        if b == 1 {
            if let Some(prev) = last {
                if i - prev < p {
                    return false;
                }
            }
            last = Some(i);
        }
    }
    true
}

pub fn indicator_vector(x: &BitString, w: &BitString) -> Result<IndicatorVector> {
    let (n, l) = (x.len(), w.len());
    if l > n {
        return Err(Error::PatternTooLong {
            pattern: l,
            text: n,
        });
    }
    let mut entries = vec![0u8; n];
    if l > 0 {
        for (i, window) in x.bits().windows(l).enumerate() {
            entries[i] = u8::from(window == w.bits());
        }
    }
    Ok(IndicatorVector {
        entries: BitString::from_raw(entries),
        pattern_length: l,
    })
}

/// How many insertions follow the deletions in [`sample_from_edit_ball_with`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum LengthMode {
    /// As many insertions as deletions, so `|x| = |y|`.
    #[default]
    Equal,
    /// Insertion count drawn independently from `0..=k`.
    Free,
}

/// Random `x` in the edit ball of `y`: `k` uniformly placed deletions
/// followed by `k` insertions of uniform bits at uniform positions.
pub fn sample_from_edit_ball(y: &BitString, k: usize, rng_seed: u64) -> Result<BitString> {
    sample_from_edit_ball_with(y, k, rng_seed, LengthMode::Equal)
}

pub fn sample_from_edit_ball_with(
    y: &BitString,
    k: usize,
    rng_seed: u64,
    mode: LengthMode,
) -> Result<BitString> {
    if k > y.len() {
        return Err(Error::RadiusTooLarge { k, len: y.len() });
    }
    let mut rng = seed::rng(rng_seed);
    let mut drop = vec![false; y.len()];
    for i in index::sample(&mut rng, y.len(), k) {
        drop[i] = true;
    }
    let mut bits: Vec<u8> = y
        .bits()
        .iter()
        .zip(&drop)
        .filter(|(_, &d)| !d)
        .map(|(&b, _)| b)
        .collect();
    let inserts = match mode {
        LengthMode::Equal => k,
        LengthMode::Free => rng.random_range(0..=k),
    };
    for _ in 0..inserts {
        let at = rng.random_range(0..=bits.len());
        bits.insert(at, rng.random_range(0..=1u8));
    }
    Ok(BitString::from_raw(bits))
}
