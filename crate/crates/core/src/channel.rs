//! The i.i.d. deletion channel.
//!
//! Besides sampling, this module carries two exact routes to trace
//! statistics: brute-force enumeration of all `2^n` deletion patterns
//! ([`exact_trace_distribution`]), used as an oracle, and a
//! polynomial-time dynamic program for multi-bit statistics
//! ([`exact_statistic_expectation`]). Trace positions past the end of a
//! trace hold no bit, so any statistic that looks there evaluates to 0.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{Num, One, ToPrimitive, Zero};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::bitstr::BitString;
use crate::error::{Error, Result};
use crate::poly::{multibit_sum, f_multibit, FixedComplex};
use crate::seed;

/// Longest input accepted by the enumeration oracle.
pub const MAX_ENUMERATION_LEN: usize = 20;

/// Deletion probability `q` in `[0, 1)`, optionally held as an exact
/// fraction.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelParam {
    q: f64,
    exact: Option<BigRational>,
}

impl ChannelParam {
    pub fn new(q: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&q) {
            return Err(Error::InvalidChannel(q.to_string()));
        }
        Ok(Self { q, exact: None })
    }

    pub fn fraction(numer: i64, denom: i64) -> Result<Self> {
        if denom == 0 {
            return Err(Error::InvalidChannel(format!("{numer}/{denom}")));
        }
        Self::from_rational(BigRational::new(numer.into(), denom.into()))
    }

    pub fn from_rational(r: BigRational) -> Result<Self> {
        if r < BigRational::zero() || r >= BigRational::one() {
            return Err(Error::InvalidChannel(r.to_string()));
        }
        Ok(Self {
            q: r.to_f64().unwrap_or(f64::NAN),
            exact: Some(r),
        })
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn exact(&self) -> Option<&BigRational> {
        self.exact.as_ref()
    }

    /// Exact value of `q`: the fraction if given, otherwise the binary
    /// value of the double.
    pub fn as_rational(&self) -> BigRational {
        self.exact
            .clone()
            .unwrap_or_else(|| BigRational::from_float(self.q).expect("finite q"))
    }
}

impl FromStr for ChannelParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some((a, b)) = s.split_once('/') {
            let num: BigInt = a.trim().parse().map_err(|_| Error::InvalidChannel(s.into()))?;
            let den: BigInt = b.trim().parse().map_err(|_| Error::InvalidChannel(s.into()))?;
            if den.is_zero() {
                return Err(Error::InvalidChannel(s.into()));
            }
            Self::from_rational(BigRational::new(num, den))
        } else {
            let q: f64 = s.parse().map_err(|_| Error::InvalidChannel(s.into()))?;
            Self::new(q)
        }
    }
}

impl fmt::Display for ChannelParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.exact {
            Some(r) => write!(f, "{}/{}", r.numer(), r.denom()),
            None => write!(f, "{}", self.q),
        }
    }
}

impl Serialize for ChannelParam {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match &self.exact {
            Some(_) => s.collect_str(self),
            None => s.serialize_f64(self.q),
        }
    }
}

impl<'de> Deserialize<'de> for ChannelParam {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(q) => ChannelParam::new(q),
            Raw::Str(s) => s.parse(),
        }
        .map_err(serde::de::Error::custom)
    }
}

/// Output of the channel: a subsequence of the source.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Trace {
    pub bits: Vec<u8>,
    pub source_length: usize,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }
}

impl fmt::Display for Trace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.bits {
            f.write_str(if b == 1 { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// A multi-bit statistic: "trace positions `i_1 < .. < i_l` carry the bits
/// `w_1, .., w_l`".
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StatisticSpec {
    pattern: BitString,
    indices: Vec<usize>,
}

impl StatisticSpec {
    pub fn new(pattern: BitString, indices: Vec<usize>) -> Result<Self> {
        if pattern.is_empty() || pattern.len() != indices.len() {
            return Err(Error::InvalidSpec(format!(
                "pattern length {} vs {} indices",
                pattern.len(),
                indices.len()
            )));
        }
        if indices[0] == 0 || indices.windows(2).any(|p| p[0] >= p[1]) {
            return Err(Error::InvalidSpec(format!(
                "indices must be strictly increasing and 1-based: {indices:?}"
            )));
        }
        Ok(Self { pattern, indices })
    }

    /// Consecutive positions `start, start + 1, ..`.
    pub fn window(pattern: BitString, start: usize) -> Result<Self> {
        let indices = (start..start + pattern.len()).collect();
        Self::new(pattern, indices)
    }

    pub fn pattern(&self) -> &BitString {
        &self.pattern
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn last_index(&self) -> usize {
        *self.indices.last().expect("non-empty")
    }

    pub fn matches(&self, trace: &[u8]) -> bool {
        self.last_index() <= trace.len()
            && self
                .indices
                .iter()
                .zip(self.pattern.bits())
                .all(|(&i, &b)| trace[i - 1] == b)
    }
}

impl fmt::Display for StatisticSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{:?}", self.pattern, self.indices)
    }
}

fn transmit_with<R: Rng + ?Sized>(x: &[u8], q: f64, rng: &mut R) -> Vec<u8> {
    x.iter()
        .copied()
        .filter(|_| rng.random::<f64>() >= q)
        .collect()
}

/// Passes `x` through the channel once.
pub fn transmit(x: &BitString, ch: &ChannelParam, rng_seed: u64) -> Trace {
    let mut rng = seed::rng(rng_seed);
    Trace {
        bits: transmit_with(x.bits(), ch.q(), &mut rng),
        source_length: x.len(),
    }
}

/// `count` independent traces; sample `i` uses the seed derived from
/// `(rng_seed, i)`.
pub fn generate_traces(x: &BitString, ch: &ChannelParam, rng_seed: u64, count: usize) -> Vec<Trace> {
    (0..count as u64)
        .into_par_iter()
        .map(|i| transmit(x, ch, seed::derive(rng_seed, &[i])))
        .collect()
}

/// Number of traces among those of [`generate_traces`] that satisfy
/// `spec`, without materialising them.
pub fn count_matching_traces(
    x: &BitString,
    ch: &ChannelParam,
    rng_seed: u64,
    count: u64,
    spec: &StatisticSpec,
) -> u64 {
    let q = ch.q();
    let src = x.bits();
    let last = spec.last_index();
    (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = seed::rng(seed::derive(rng_seed, &[i]));
            let mut pos = 0;
            let mut next = 0;
            for &b in src {
                if rng.random::<f64>() < q {
                    continue;
                }
                pos += 1;
                if pos == spec.indices[next] {
                    if b != spec.pattern.bits()[next] {
                        return 0;
                    }
                    next += 1;
                    if pos == last {
                        return 1;
                    }
                }
            }
            0
        })
        .sum()
}

fn check_guard(len: usize, max: usize) -> Result<()> {
    if len > max {
        return Err(Error::EnumerationGuard { len, max });
    }
    Ok(())
}

/// Sums `q^{deleted} (1 - q)^{kept}` over every deletion pattern.
fn enumerate_distribution<T: Clone + Num>(x: &[u8], q: &T) -> HashMap<Vec<u8>, T> {
    let n = x.len();
    let keep = T::one() - q.clone();
    // weight[k] = (1-q)^k q^(n-k)
    let weight: Vec<T> = (0..=n)
        .map(|k| {
            let mut w = T::one();
            for _ in 0..k {
                w = w * keep.clone();
            }
            for _ in k..n {
                w = w * q.clone();
            }
            w
        })
        .collect();
    let mut out: HashMap<Vec<u8>, T> = HashMap::new();
    let mut trace = Vec::with_capacity(n);
    for mask in 0u32..(1u32 << n) {
        trace.clear();
        for (i, &b) in x.iter().enumerate() {
            if mask >> i & 1 == 1 {
                trace.push(b);
            }
        }
        let w = weight[mask.count_ones() as usize].clone();
        match out.get_mut(&trace) {
            Some(p) => *p = p.clone() + w,
            None => {
                out.insert(trace.clone(), w);
            }
        }
    }
    out
}

fn to_sorted<T>(m: HashMap<Vec<u8>, T>) -> BTreeMap<BitString, T> {
    m.into_iter()
        .map(|(k, v)| (BitString::from_raw(k), v))
        .collect()
}

/// Exact output distribution by enumeration (floating point).
pub fn exact_trace_distribution(x: &BitString, ch: &ChannelParam) -> Result<BTreeMap<BitString, f64>> {
    check_guard(x.len(), MAX_ENUMERATION_LEN)?;
    Ok(to_sorted(enumerate_distribution(x.bits(), &ch.q())))
}

/// Exact output distribution in rational arithmetic; requires a
/// fractional `q`.
pub fn exact_trace_distribution_rational(
    x: &BitString,
    ch: &ChannelParam,
) -> Result<BTreeMap<BitString, BigRational>> {
    check_guard(x.len(), MAX_ENUMERATION_LEN)?;
    let q = ch.exact().ok_or(Error::NotRational)?;
    Ok(to_sorted(enumerate_distribution(x.bits(), q)))
}

/// Probability that the trace reaches every index of `spec` with the
/// required bits, by a dynamic program over (source prefix, surviving
/// count). Runs in `O(n * i_l)`.
fn statistic_dp<T: Clone + Num>(x: &[u8], spec: &StatisticSpec, q: &T) -> T {
    let last = spec.last_index();
    if last > x.len() {
        return T::zero();
    }
    let keep = T::one() - q.clone();
    // Required bit at each trace position up to `last` (None = free).
    let mut need: Vec<Option<u8>> = vec![None; last + 1];
    for (&i, &b) in spec.indices.iter().zip(spec.pattern.bits()) {
        need[i] = Some(b);
    }
    // p[c] = P(c survivors so far, constraints up to c satisfied), c <= last.
    let mut p: Vec<T> = vec![T::zero(); last + 1];
    p[0] = T::one();
    let mut reach = 0;
    for (s, &b) in x.iter().enumerate() {
        // Absorbing state: once position `last` exists it stays.
        let top = reach.min(last);
        let mut next: Vec<T> = vec![T::zero(); last + 1];
        next[last] = p[last].clone();
        for c in 0..=top.min(last.saturating_sub(1)) {
            if p[c].is_zero() {
                continue;
            }
            next[c] = next[c].clone() + p[c].clone() * q.clone();
            if need[c + 1].is_none_or(|nb| nb == b) {
                next[c + 1] = next[c + 1].clone() + p[c].clone() * keep.clone();
            }
        }
        p = next;
        reach = s + 1;
    }
    p[last].clone()
}

/// Exact `P(T_{i_j} = w_j for all j)` in floating point.
pub fn exact_statistic_expectation(x: &BitString, spec: &StatisticSpec, ch: &ChannelParam) -> f64 {
    statistic_dp(x.bits(), spec, &ch.q())
}

/// Exact `P(T_{i_j} = w_j for all j)` as a fraction.
pub fn exact_statistic_expectation_rational(
    x: &BitString,
    spec: &StatisticSpec,
    ch: &ChannelParam,
) -> Result<BigRational> {
    let q = ch.exact().ok_or(Error::NotRational)?;
    Ok(statistic_dp(x.bits(), spec, q))
}

/// Fraction of traces satisfying `spec`.
pub fn empirical_statistic(traces: &[Trace], spec: &StatisticSpec) -> Result<f64> {
    if traces.is_empty() {
        return Err(Error::EmptyTraces);
    }
    let hits = traces.iter().filter(|t| spec.matches(&t.bits)).count();
    Ok(hits as f64 / traces.len() as f64)
}

/// Exponent convention on the expectation side of the multi-bit identity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndexConvention {
    /// First trace index enters as `a_1^{i_1}`.
    AsPrinted,
    /// First trace index enters as `z_1 a_1^{i_1 - 1}`, i.e. trace
    /// positions are counted from 0.
    ZeroBasedTrace,
}

impl IndexConvention {
    pub const ALL: [IndexConvention; 2] = [IndexConvention::ZeroBasedTrace, IndexConvention::AsPrinted];
}

#[derive(Clone, Debug, Serialize)]
pub struct IdentityCheck {
    /// Residual under the adopted convention.
    pub residual: f64,
    pub convention: IndexConvention,
    pub residuals: Vec<(IndexConvention, f64)>,
    pub expectation: Complex64,
    pub polynomial: Complex64,
}

/// Residual tolerance used to decide that a convention matches.
pub const IDENTITY_TOLERANCE: f64 = 1e-12;

/// Checks the multi-bit statistic identity for `(x, w)` at the points `z`.
///
/// The expectation side is computed from the enumerated trace
/// distribution with `a_h = (z_h - q)/(1 - q)`; the polynomial side is
/// `f_{x,w}(z_1, .., z_l)`. Both sides are evaluated in fixed point at
/// `precision_bits`. Every [`IndexConvention`] is tried and the first one
/// whose residual is within [`IDENTITY_TOLERANCE`] is reported (the
/// smallest residual if none is).
pub fn verify_mbs_identity(
    x: &BitString,
    w: &BitString,
    z: &[Complex64],
    ch: &ChannelParam,
    n_max: usize,
    precision_bits: u32,
) -> Result<IdentityCheck> {
    check_guard(x.len(), n_max.min(MAX_ENUMERATION_LEN))?;
    if w.is_empty() || w.len() != z.len() {
        return Err(Error::InvalidSpec(format!(
            "{} evaluation points for a pattern of length {}",
            z.len(),
            w.len()
        )));
    }
    let bits = precision_bits.max(64);
    let q = ch.as_rational();
    let inv_keep = (BigRational::one() - &q).recip();
    let qf = FixedComplex::from_real_rational(&q, bits);

    let zf: Vec<FixedComplex> = z.iter().map(|&c| FixedComplex::from_complex64(c, bits)).collect();
    let a: Vec<FixedComplex> = zf.iter().map(|zh| (zh - &qf).scale_rational(&inv_keep)).collect();
    let scale = num_traits::pow(inv_keep, w.len());

    let dist: Vec<(BitString, FixedComplex)> = match ch.exact() {
        Some(_) => exact_trace_distribution_rational(x, ch)?
            .into_iter()
            .map(|(t, p)| (t, FixedComplex::from_real_rational(&p, bits)))
            .collect(),
        None => exact_trace_distribution(x, ch)?
            .into_iter()
            .map(|(t, p)| (t, FixedComplex::from_f64(p, 0.0, bits)))
            .collect(),
    };

    let poly = f_multibit(x.bits(), w.bits(), &zf);
    let mut residuals = Vec::new();
    let mut sides = Vec::new();
    for conv in IndexConvention::ALL {
        let shift = match conv {
            IndexConvention::AsPrinted => 0,
            IndexConvention::ZeroBasedTrace => 1,
        };
        let mut e = FixedComplex::zero(bits);
        for (t, p) in &dist {
            let g = multibit_sum(t.bits(), w.bits(), &a, shift);
            if !g.is_zero() {
                e = &e + &(p * &g);
            }
        }
        e = e.scale_rational(&scale);
        if conv == IndexConvention::ZeroBasedTrace {
            e = &e * &zf[0];
        }
        let r = (&e - &poly).abs_f64();
        residuals.push((conv, r));
        sides.push(e);
    }
    let pick = residuals
        .iter()
        .position(|(_, r)| *r <= IDENTITY_TOLERANCE)
        .unwrap_or_else(|| {
            (0..residuals.len())
                .min_by(|&i, &j| residuals[i].1.total_cmp(&residuals[j].1))
                .unwrap_or(0)
        });
    Ok(IdentityCheck {
        residual: residuals[pick].1,
        convention: residuals[pick].0,
        residuals: residuals.clone(),
        expectation: sides[pick].to_complex64(),
        polynomial: poly.to_complex64(),
    })
}

/// Header line of a newline-delimited trace batch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceBatchHeader {
    pub n: usize,
    pub q: ChannelParam,
    pub seed: u64,
    #[serde(rename = "N")]
    pub count: usize,
}

/// Writes the JSON header followed by one `0`/`1` line per trace (empty
/// traces are empty lines).
pub fn write_trace_batch<W: Write>(mut out: W, header: &TraceBatchHeader, traces: &[Trace]) -> std::io::Result<()> {
    serde_json::to_writer(&mut out, header)?;
    writeln!(out)?;
    for t in traces {
        writeln!(out, "{t}")?;
    }
    Ok(())
}

pub fn read_trace_batch<R: BufRead>(input: R) -> Result<(TraceBatchHeader, Vec<Trace>)> {
    let mut lines = input.lines();
    let head = lines
        .next()
        .ok_or_else(|| Error::Parse("missing header".into()))?
        .map_err(|e| Error::Parse(e.to_string()))?;
    let header: TraceBatchHeader =
        serde_json::from_str(&head).map_err(|e| Error::Parse(format!("header: {e}")))?;
    let mut traces = Vec::with_capacity(header.count);
    for line in lines {
        let line = line.map_err(|e| Error::Parse(e.to_string()))?;
        let bits: BitString = line.parse()?;
        if bits.len() > header.n {
            return Err(Error::Parse(format!("trace longer than n = {}", header.n)));
        }
        traces.push(Trace {
            bits: bits.into_bits(),
            source_length: header.n,
        });
    }
    if traces.len() != header.count {
        return Err(Error::Parse(format!(
            "header announces {} traces, found {}",
            header.count,
            traces.len()
        )));
    }
    Ok((header, traces))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bs(s: &str) -> BitString {
        s.parse().unwrap()
    }

    fn frac(a: i64, b: i64) -> BigRational {
        BigRational::new(a.into(), b.into())
    }

    #[test]
    fn channel_param_parsing() {
        let c: ChannelParam = "1/5".parse().unwrap();
        assert_eq!(c.exact(), Some(&frac(1, 5)));
        assert!((c.q() - 0.2).abs() < 1e-15);
        assert_eq!(c.to_string(), "1/5");
        let d: ChannelParam = "0.3".parse().unwrap();
        assert_eq!(d.exact(), None);
        assert!("1".parse::<ChannelParam>().is_err());
        assert!("-0.1".parse::<ChannelParam>().is_err());
        assert!("3/2".parse::<ChannelParam>().is_err());
        assert!("1/0".parse::<ChannelParam>().is_err());
        assert_eq!(serde_json::to_string(&c).unwrap(), "\"1/5\"");
        assert_eq!(serde_json::from_str::<ChannelParam>("0.25").unwrap().q(), 0.25);
        assert_eq!(serde_json::from_str::<ChannelParam>("\"1/4\"").unwrap().exact(), Some(&frac(1, 4)));
    }

    #[test]
    fn spec_validation() {
        assert!(StatisticSpec::new(bs("10"), vec![2, 2]).is_err());
        assert!(StatisticSpec::new(bs("10"), vec![1]).is_err());
        assert!(StatisticSpec::new(bs("1"), vec![0]).is_err());
        assert!(StatisticSpec::new(bs(""), vec![]).is_err());
        let s = StatisticSpec::window(bs("101"), 4).unwrap();
        assert_eq!(s.indices(), &[4, 5, 6]);
    }

    #[test]
    fn transmit_examples() {
        let ch0 = ChannelParam::new(0.0).unwrap();
        assert_eq!(transmit(&bs("1011"), &ch0, 1).to_string(), "1011");
        let ch = ChannelParam::new(0.5).unwrap();
        assert_eq!(transmit(&bs("0101"), &ch, 42), transmit(&bs("0101"), &ch, 42));
        let traces = generate_traces(&bs("1011"), &ChannelParam::new(0.9).unwrap(), 3, 20_000);
        let mean = traces.iter().map(Trace::len).sum::<usize>() as f64 / traces.len() as f64;
        // sd of the mean is sqrt(4 * 0.09 / 20000) ~ 0.0042.
        assert!((mean - 0.4).abs() < 0.02, "{mean}");
    }

    #[test]
    fn distribution_examples() {
        let d = exact_trace_distribution_rational(&bs("1"), &ChannelParam::fraction(3, 10).unwrap()).unwrap();
        assert_eq!(d[&bs("1")], frac(7, 10));
        assert_eq!(d[&bs("")], frac(3, 10));
        let d = exact_trace_distribution_rational(&bs("11"), &ChannelParam::fraction(1, 2).unwrap()).unwrap();
        assert_eq!(d.len(), 3);
        assert_eq!(d[&bs("11")], frac(1, 4));
        assert_eq!(d[&bs("1")], frac(1, 2));
        assert_eq!(d[&bs("")], frac(1, 4));
        let f = exact_trace_distribution(&bs("0110100"), &ChannelParam::new(0.37).unwrap()).unwrap();
        assert!((f.values().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(exact_trace_distribution(&BitString::zeros(21), &ChannelParam::new(0.1).unwrap()).is_err());
        assert_eq!(
            exact_trace_distribution_rational(&bs("1"), &ChannelParam::new(0.5).unwrap()),
            Err(Error::NotRational)
        );
    }

    #[test]
    fn expectation_examples() {
        let half = ChannelParam::fraction(1, 2).unwrap();
        let one = StatisticSpec::new(bs("1"), vec![1]).unwrap();
        assert_eq!(exact_statistic_expectation_rational(&bs("11"), &one, &half).unwrap(), frac(3, 4));
        assert_eq!(exact_statistic_expectation_rational(&bs("10"), &one, &half).unwrap(), frac(1, 2));
        let far = StatisticSpec::new(bs("1"), vec![3]).unwrap();
        assert_eq!(exact_statistic_expectation(&bs("11"), &far, &half), 0.0);
    }

    #[test]
    fn empirical_examples() {
        let traces: Vec<Trace> = ["11", "1", ""]
            .iter()
            .map(|s| Trace { bits: bs(s).into_bits(), source_length: 2 })
            .collect();
        let spec = StatisticSpec::new(bs("1"), vec![1]).unwrap();
        assert!((empirical_statistic(&traces, &spec).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        let far = StatisticSpec::new(bs("1"), vec![3]).unwrap();
        assert_eq!(empirical_statistic(&traces, &far).unwrap(), 0.0);
        assert_eq!(empirical_statistic(&[], &spec), Err(Error::EmptyTraces));
    }

    #[test]
    fn streaming_count_matches_materialised_traces() {
        let x = bs("0110100111010");
        let ch = ChannelParam::new(0.3).unwrap();
        let spec = StatisticSpec::new(bs("101"), vec![2, 3, 6]).unwrap();
        let traces = generate_traces(&x, &ch, 17, 3000);
        let direct = traces.iter().filter(|t| spec.matches(&t.bits)).count() as u64;
        assert_eq!(count_matching_traces(&x, &ch, 17, 3000, &spec), direct);
    }

    #[test]
    fn identity_single_bit() {
        let ch = ChannelParam::fraction(3, 10).unwrap();
        for z in [Complex64::new(0.4, -0.9), Complex64::new(1.1, 0.2), Complex64::new(1.0, 0.0)] {
            let r = verify_mbs_identity(&bs("1"), &bs("1"), &[z], &ch, 20, 160).unwrap();
            assert_eq!(r.convention, IndexConvention::ZeroBasedTrace);
            assert!(r.residual <= 1e-12);
        }
        // Away from z = 1 the printed exponents are off by a factor a_1 / z_1.
        let r = verify_mbs_identity(&bs("1"), &bs("1"), &[Complex64::new(0.4, -0.9)], &ch, 20, 160).unwrap();
        assert!(r.residuals.iter().any(|&(c, v)| c == IndexConvention::AsPrinted && v > 1e-3));
    }

    #[test]
    fn identity_at_all_ones_and_zero_tail() {
        let ch = ChannelParam::fraction(1, 4).unwrap();
        let ones = [Complex64::new(1.0, 0.0); 3];
        let r = verify_mbs_identity(&bs("0110101"), &bs("101"), &ones, &ch, 20, 160).unwrap();
        assert!(r.residual <= 1e-12);
        // Count of matching index tuples.
        assert!((r.polynomial.re - 7.0).abs() < 1e-12, "{}", r.polynomial);

        let z = [Complex64::new(0.7, 0.3), Complex64::new(0.0, 0.0)];
        let r = verify_mbs_identity(&bs("000000"), &bs("11"), &z, &ch, 20, 160).unwrap();
        assert_eq!(r.polynomial, Complex64::new(0.0, 0.0));
        assert!(r.residual <= 1e-12);
    }

    #[test]
    fn identity_guard() {
        let ch = ChannelParam::new(0.1).unwrap();
        let z = [Complex64::new(1.0, 0.0)];
        assert!(verify_mbs_identity(&BitString::zeros(11), &bs("1"), &z, &ch, 10, 128).is_err());
        assert!(verify_mbs_identity(&bs("01"), &bs("11"), &z, &ch, 10, 128).is_err());
    }

    #[test]
    fn trace_batch_round_trip() {
        let x = bs("1101001");
        let ch = ChannelParam::fraction(1, 3).unwrap();
        let traces = generate_traces(&x, &ch, 9, 50);
        let header = TraceBatchHeader { n: 7, q: ch, seed: 9, count: 50 };
        let mut buf = Vec::new();
        write_trace_batch(&mut buf, &header, &traces).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("{\"n\":7,\"q\":\"1/3\",\"seed\":9,\"N\":50}\n"));
        let (h, t) = read_trace_batch(&buf[..]).unwrap();
        assert_eq!(h, header);
        assert_eq!(t, traces);
        assert!(read_trace_batch(&b"{\"n\":2,\"q\":0.1,\"seed\":1,\"N\":1}\n111\n"[..]).is_err());
    }

    fn arb_case() -> impl Strategy<Value = (BitString, StatisticSpec)> {
        (prop::collection::vec(0u8..=1, 1..=10), 1usize..=4, any::<u64>()).prop_map(|(x, l, s)| {
            let mut rng = seed::rng(s);
            let l = l.min(x.len() + 1);
            let top = x.len() + 2;
            let mut idx = rand::seq::index::sample(&mut rng, top, l).into_vec();
            idx.sort_unstable();
            let idx: Vec<usize> = idx.into_iter().map(|i| i + 1).collect();
            let pattern = BitString::random(l, &mut rng);
            (BitString::from_raw(x), StatisticSpec::new(pattern, idx).unwrap())
        })
    }

    proptest! {
        #[test]
        fn dp_matches_enumeration((x, spec) in arb_case(), qn in 0i64..8) {
            let ch = ChannelParam::fraction(qn, 8).unwrap();
            let dist = exact_trace_distribution_rational(&x, &ch).unwrap();
            let oracle: BigRational = dist
                .iter()
                .filter(|(t, _)| spec.matches(t.bits()))
                .map(|(_, p)| p.clone())
                .sum();
            prop_assert_eq!(exact_statistic_expectation_rational(&x, &spec, &ch).unwrap(), oracle);
        }

        #[test]
        fn noiseless_expectation_is_indicator((x, spec) in arb_case()) {
            let ch = ChannelParam::new(0.0).unwrap();
            let e = exact_statistic_expectation(&x, &spec, &ch);
            prop_assert_eq!(e, if spec.matches(x.bits()) { 1.0 } else { 0.0 });
        }

        #[test]
        fn extra_constraints_never_increase((x, spec) in arb_case(), q in 0.0f64..0.95, extra in 0u8..=1) {
            let ch = ChannelParam::new(q).unwrap();
            let mut idx = spec.indices().to_vec();
            idx.push(spec.last_index() + 1);
            let longer = StatisticSpec::new(spec.pattern().with_bit(extra), idx).unwrap();
            prop_assert!(
                exact_statistic_expectation(&x, &longer, &ch) <= exact_statistic_expectation(&x, &spec, &ch) + 1e-15
            );
        }
    }
}
