//! Property suites for the structural facts the pipeline relies on.
//!
//! Each suite draws its instances from a seed, counts checks and failures,
//! and keeps the first few failing instances for the report.

use num_bigint::BigInt;
use num_complex::Complex64;
use num_traits::One;
use rand::Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::bitstr::{
    edit_ball_membership, edit_report, extend_to_nonperiodic, first_diff_index, in_runlength_class,
    indicator_vector, is_non_periodic, sample_from_edit_ball, BitString, IndicatorVector,
};
use crate::channel::{verify_mbs_identity, ChannelParam, IndexConvention, IDENTITY_TOLERANCE};
use crate::distinguish::{main_pattern, sample_pair, PATTERN_FACTOR};
use crate::error::{Error, Result};
use crate::poly::{
    coefficient_l1_check, deflate, divisibility_order, find_separating_power, lemma6_search, IntPolynomial,
};
use crate::seed;

const KEEP_FAILURES: usize = 5;
/// Pair draws allowed per requested instance when hunting for main mode.
const ATTEMPTS_PER_INSTANCE: usize = 2000;

#[derive(Clone, Debug, Default, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub checked: usize,
    pub failures: usize,
    pub failure_examples: Vec<String>,
    /// Suite-specific counters.
    pub details: Value,
}

impl SuiteReport {
    fn new(suite: &str) -> Self {
        Self {
            suite: suite.into(),
            details: json!({}),
            ..Default::default()
        }
    }

    fn record(&mut self, ok: bool, describe: impl FnOnce() -> String) {
        self.checked += 1;
        if !ok {
            self.failures += 1;
            if self.failure_examples.len() < KEEP_FAILURES {
                self.failure_examples.push(describe());
            }
        }
    }

    pub fn passed(&self) -> bool {
        self.failures == 0 && self.checked > 0
    }
}

/// Coefficient-mass checks collected alongside another suite.
#[derive(Clone, Debug, Default, Serialize)]
pub struct L1Tally {
    pub checked: usize,
    pub failures: usize,
    /// Quotients whose source polynomial had a coefficient outside
    /// `{-1, 0, 1}`, where the bound does not apply.
    pub not_applicable: usize,
}

impl L1Tally {
    fn check(&mut self, f: &IntPolynomial, n: usize) -> bool {
        if f.coefficients().iter().any(|c| c.magnitude() > &One::one()) {
            self.not_applicable += 1;
            return true;
        }
        let order = divisibility_order(f, usize::MAX).expect("non-zero difference");
        let q = deflate(f, order).expect("exact order");
        let ok = coefficient_l1_check(&q, n, order).passes;
        self.checked += 1;
        if !ok {
            self.failures += 1;
        }
        ok
    }
}

/// Every odd-length `w'` of length `2p - 1`, `p <= max_p`, extends to a
/// non-periodic string.
pub fn lemma4_suite(max_p: usize) -> SuiteReport {
    let mut r = SuiteReport::new("lemma4");
    for p in 1..=max_p {
        let len = 2 * p - 1;
        for mask in 0u64..(1 << len) {
            let w = BitString::new((0..len).map(|i| (mask >> i & 1) as u8).collect()).expect("binary");
            let ok = extend_to_nonperiodic(&w).is_ok_and(|e| is_non_periodic(&e) && e.len() == len + 1);
            r.record(ok, || format!("w' = {w}"));
        }
    }
    r.details = json!({ "max_p": max_p });
    r
}

/// A main-mode instance: a pair within distance `k` whose first difference
/// is at or after `12k`, with its pattern and indicator vectors.
#[derive(Clone, Debug)]
pub struct MainInstance {
    pub x: BitString,
    pub y: BitString,
    pub k: usize,
    pub t0: usize,
    pub w: BitString,
    pub u: IndicatorVector,
    pub v: IndicatorVector,
}

/// Draws a main-mode instance with `n` uniform in `n_range` (clamped to
/// `n > 12k`).
pub fn draw_main_instance(
    k: usize,
    n_range: (usize, usize),
    rng_seed: u64,
) -> Result<MainInstance> {
    let lo = n_range.0.max(PATTERN_FACTOR * k + 1);
    let hi = n_range.1;
    if lo > hi {
        return Err(Error::InvalidConfig(format!("no length in [{lo}, {hi}] admits main mode")));
    }
    for attempt in 0..ATTEMPTS_PER_INSTANCE as u64 {
        let mut rng = seed::derived_rng(rng_seed, &[attempt]);
        let n = rng.random_range(lo..=hi);
        let (x, y) = sample_pair(n, k, rng.random())?;
        let t0 = first_diff_index(&x, &y)?.expect("distinct pair");
        if t0 < PATTERN_FACTOR * k {
            continue;
        }
        let w = main_pattern(&x, t0, k)?;
        let u = indicator_vector(&x, &w)?;
        let v = indicator_vector(&y, &w)?;
        return Ok(MainInstance { x, y, k, t0, w, u, v });
    }
    Err(Error::InvalidConfig("main-mode instance not found".into()))
}

/// Run-length class and indicator distance for pipeline patterns.
pub fn lemma5_suite(instances: usize, n_max: usize, k_max: usize, master: u64) -> Result<SuiteReport> {
    let mut r = SuiteReport::new("lemma5");
    let mut worst = (0usize, 0usize);
    for i in 0..instances {
        let k = 1 + i % k_max;
        let inst = draw_main_instance(k, (1, n_max), seed::derive(master, &[i as u64]))?;
        let p = PATTERN_FACTOR / 2 * k;
        let ab = inst.w.len() == 2 * p
            && is_non_periodic(&inst.w)
            && in_runlength_class(&inst.u, p)
            && in_runlength_class(&inst.v, p)
            && edit_ball_membership(&inst.x, &inst.y, k).0;
        let rep = edit_report(inst.u.entries.bits(), inst.v.entries.bits());
        worst.0 = worst.0.max(rep.deletions_needed);
        worst.1 = worst.1.max(rep.insertions_needed);
        let c = rep.deletions_needed <= 5 * k && rep.insertions_needed <= 5 * k;
        r.record(ab && c, || {
            format!(
                "x = {}, y = {}, w = {}, del = {}, ins = {}",
                inst.x, inst.y, inst.w, rep.deletions_needed, rep.insertions_needed
            )
        });
    }
    r.details = json!({ "n_max": n_max, "k_max": k_max, "max_deletions": worst.0, "max_insertions": worst.1 });
    Ok(r)
}

/// A separating power in `1..=12k+1` exists for main-mode indicator
/// vectors; also tallies coefficient-mass checks on their quotients.
pub fn lemma2_suite(instances: usize, k: usize, n_range: (usize, usize), master: u64) -> Result<(SuiteReport, L1Tally)> {
    let mut r = SuiteReport::new("lemma2");
    let mut l1 = L1Tally::default();
    let mut hist = vec![0usize; PATTERN_FACTOR * k + 2];
    for i in 0..instances {
        let inst = draw_main_instance(k, n_range, seed::derive(master, &[i as u64]))?;
        let differ_at_start = inst.u.entries.get(inst.t0 - PATTERN_FACTOR * k + 1)
            != inst.v.entries.get(inst.t0 - PATTERN_FACTOR * k + 1);
        let m = find_separating_power(&inst.u, &inst.v, PATTERN_FACTOR * k + 1)?;
        if let Some(m) = m {
            hist[m] += 1;
        }
        let f = IntPolynomial::from_indicator_difference(inst.u.entries.bits(), inst.v.entries.bits());
        l1.check(&f, inst.x.len());
        r.record(differ_at_start && m.is_some(), || {
            format!("x = {}, y = {}, w = {}, m = {m:?}", inst.x, inst.y, inst.w)
        });
    }
    r.details = json!({ "k": k, "separating_power_histogram": hist, "l1": &l1 });
    Ok((r, l1))
}

fn multiset_power_sum(values: &[u64], j: u32) -> BigInt {
    values.iter().map(|&a| BigInt::from(a).pow(j)).sum()
}

/// Order of agreement of power sums, counted from `j = 0` (cardinality).
fn agreement_order(alpha: &[u64], beta: &[u64]) -> usize {
    (0..)
        .find(|&j| multiset_power_sum(alpha, j as u32) != multiset_power_sum(beta, j as u32))
        .expect("distinct multisets disagree at some power")
}

/// Prouhet doubling: if `a`, `b` agree to order `m` then `a ∪ (b + s)` and
/// `b ∪ (a + s)` agree to order `m + 1`.
fn prouhet_pair<R: Rng + ?Sized>(levels: usize, max_value: u64, rng: &mut R) -> (Vec<u64>, Vec<u64>) {
    let budget = max_value / (levels as u64 + 1);
    let mut a = vec![rng.random_range(0..=budget)];
    let mut b = vec![rng.random_range(0..=budget)];
    for _ in 0..levels {
        let s = rng.random_range(1..=budget.max(1));
        let na: Vec<u64> = a.iter().copied().chain(b.iter().map(|v| v + s)).collect();
        let nb: Vec<u64> = b.iter().copied().chain(a.iter().map(|v| v + s)).collect();
        a = na;
        b = nb;
    }
    (a, b)
}

fn sorted(mut v: Vec<u64>) -> Vec<u64> {
    v.sort_unstable();
    v
}

/// Divisibility order of `Σ z^α - Σ z^β` equals the power-sum agreement
/// order, on random and on structured multiset pairs.
/// Coefficient-mass checks run on every quotient whose source has
/// coefficients in `{-1, 0, 1}`.
pub fn lemma3_suite(pairs: usize, max_size: usize, max_value: u64, master: u64) -> (SuiteReport, L1Tally) {
    let mut r = SuiteReport::new("lemma3");
    let mut l1 = L1Tally::default();
    let mut rng = seed::rng(master);
    let mut hist: Vec<usize> = Vec::new();
    let max_levels = (max_size.max(1) as f64).log2().floor() as usize;
    while r.checked < pairs {
        let (alpha, beta) = if r.checked.is_multiple_of(2) {
            let la = rng.random_range(1..=max_size);
            let lb = if rng.random_bool(0.5) { la } else { rng.random_range(1..=max_size) };
            (
                (0..la).map(|_| rng.random_range(0..=max_value)).collect::<Vec<_>>(),
                (0..lb).map(|_| rng.random_range(0..=max_value)).collect::<Vec<_>>(),
            )
        } else {
            prouhet_pair(rng.random_range(0..=max_levels), max_value, &mut rng)
        };
        if sorted(alpha.clone()) == sorted(beta.clone()) {
            continue;
        }
        let f = IntPolynomial::from_exponent_multisets(&alpha, &beta);
        let order = divisibility_order(&f, usize::MAX).expect("non-zero");
        let expect = agreement_order(&alpha, &beta);
        l1.check(&f, f.degree().unwrap_or(0));
        if hist.len() <= expect {
            hist.resize(expect + 1, 0);
        }
        hist[expect] += 1;
        r.record(order == expect, || format!("alpha = {alpha:?}, beta = {beta:?}, order = {order}, expected {expect}"));
    }
    r.details = json!({ "max_size": max_size, "max_value": max_value, "order_histogram": hist, "l1": &l1 });
    (r, l1)
}

/// Options for [`lemma6_suite`].
#[derive(Clone, Debug)]
pub struct Lemma6Options {
    pub instances: usize,
    pub n_range: (usize, usize),
    pub qs: Vec<ChannelParam>,
    pub max_m: usize,
    pub precision_bits: Option<u32>,
    /// Below this length INVALID certificates are logged, not failed.
    pub strict_from_n: usize,
    /// Include every certificate's JSON in the report.
    pub keep_certificates: bool,
}

impl Default for Lemma6Options {
    fn default() -> Self {
        Self {
            instances: 40,
            n_range: (50, 200),
            qs: vec![ChannelParam::new(0.1).expect("valid"), ChannelParam::new(0.3).expect("valid")],
            max_m: 4,
            precision_bits: None,
            strict_from_n: 50,
            keep_certificates: false,
        }
    }
}

/// Certificates for main-mode instances (`k = 1`) with separating power
/// at most `max_m`, per channel.
pub fn lemma6_suite(opts: &Lemma6Options, master: u64) -> Result<(SuiteReport, L1Tally)> {
    let mut r = SuiteReport::new("lemma6");
    let mut l1 = L1Tally::default();
    let (mut valid, mut avg_ok, mut logged, mut skipped_m) = (0usize, 0usize, 0usize, 0usize);
    let mut max_cf: f64 = 0.0;
    let mut min_ratio = f64::INFINITY;
    let mut draw = 0u64;
    let mut done = 0;
    let mut kept = Vec::new();
    while done < opts.instances {
        let inst = draw_main_instance(1, opts.n_range, seed::derive(master, &[draw]))?;
        draw += 1;
        if draw as usize > opts.instances * ATTEMPTS_PER_INSTANCE {
            return Err(Error::InvalidConfig("too few instances with small separating power".into()));
        }
        let m = find_separating_power(&inst.u, &inst.v, PATTERN_FACTOR + 1)?.ok_or(Error::NoSeparatingStatistic)?;
        if m > opts.max_m {
            skipped_m += 1;
            continue;
        }
        done += 1;
        let n = inst.x.len();
        let f = IntPolynomial::from_indicator_difference(inst.u.entries.bits(), inst.v.entries.bits());
        l1.check(&f, n);
        for ch in &opts.qs {
            let cert = lemma6_search(&inst.u, &inst.v, m, ch, opts.precision_bits)?;
            max_cf = max_cf.max(cert.channel_factor);
            min_ratio = min_ratio.min(cert.witness_value / cert.bound);
            valid += usize::from(cert.valid);
            avg_ok += usize::from(cert.avg_at_least_one);
            let ok = cert.valid && cert.avg_at_least_one;
            if opts.keep_certificates {
                let mut c = cert.to_json();
                c["n"] = json!(n);
                c["q"] = json!(ch.to_string());
                kept.push(c);
            }
            if n < opts.strict_from_n {
                logged += usize::from(!ok);
                continue;
            }
            r.record(ok, || {
                format!("x = {}, y = {}, q = {ch}, certificate = {}", inst.x, inst.y, cert.to_json())
            });
        }
    }
    let total = done * opts.qs.len();
    let mut details = json!({
        "certificates": total,
        "valid": valid,
        "valid_rate": valid as f64 / total.max(1) as f64,
        "avg_at_least_one": avg_ok,
        "invalid_below_strict_n": logged,
        "skipped_large_m": skipped_m,
        "max_channel_factor": max_cf,
        "min_value_over_bound": min_ratio,
        "l1": &l1,
    });
    if opts.keep_certificates {
        details["certificate_list"] = Value::Array(kept);
    }
    r.details = details;
    Ok((r, l1))
}

/// Options for [`identity_suite`].
#[derive(Clone, Debug)]
pub struct IdentityOptions {
    pub n_max: usize,
    pub ell_max: usize,
    /// Size of the pool of evaluation points.
    pub points: usize,
    pub radius: f64,
    pub qs: Vec<ChannelParam>,
    pub precision_bits: u32,
}

impl Default for IdentityOptions {
    fn default() -> Self {
        Self {
            n_max: 10,
            ell_max: 3,
            points: 100,
            radius: 1.2,
            qs: vec![
                ChannelParam::new(0.0).expect("valid"),
                ChannelParam::fraction(1, 4).expect("valid"),
                ChannelParam::fraction(1, 2).expect("valid"),
                ChannelParam::new(0.3).expect("valid"),
            ],
            precision_bits: 160,
        }
    }
}

/// Uniform points in the disc of the given radius.
pub fn point_pool(count: usize, radius: f64, rng_seed: u64) -> Vec<Complex64> {
    let mut rng = seed::rng(rng_seed);
    (0..count)
        .map(|_| {
            let r = radius * rng.random::<f64>().sqrt();
            let t = std::f64::consts::TAU * rng.random::<f64>();
            Complex64::from_polar(r, t)
        })
        .collect()
}

/// The multi-bit identity on every `x` with `1 <= |x| <= n_max`, for each
/// `ℓ <= ell_max` with a random pattern and points cycled from the pool.
pub fn identity_suite(opts: &IdentityOptions, master: u64) -> Result<SuiteReport> {
    let mut r = SuiteReport::new("identity");
    let pool = point_pool(opts.points, opts.radius, seed::derive(master, &[0]));
    let mut rng = seed::derived_rng(master, &[1]);
    let mut cursor = 0usize;
    let mut worst: f64 = 0.0;
    let mut shifted = 0usize;
    for len in 1..=opts.n_max {
        for mask in 0u64..(1 << len) {
            let x = BitString::new((0..len).map(|i| (mask >> i & 1) as u8).collect()).expect("binary");
            for ell in 1..=opts.ell_max {
                let w = BitString::random(ell, &mut rng);
                let z: Vec<Complex64> = (0..ell).map(|h| pool[(cursor + h) % pool.len()]).collect();
                cursor += 1;
                let ch = &opts.qs[cursor % opts.qs.len()];
                let res = verify_mbs_identity(&x, &w, &z, ch, opts.n_max, opts.precision_bits)?;
                worst = worst.max(res.residual);
                shifted += usize::from(res.convention == IndexConvention::ZeroBasedTrace);
                r.record(res.residual <= IDENTITY_TOLERANCE, || {
                    format!("x = {x}, w = {w}, q = {ch}, z = {z:?}, residuals = {:?}", res.residuals)
                });
            }
        }
    }
    r.details = json!({
        "n_max": opts.n_max,
        "ell_max": opts.ell_max,
        "pool": pool.len(),
        "max_residual": worst,
        "zero_based_matches": shifted,
    });
    Ok(r)
}

/// Sanity pass over [`sample_from_edit_ball`]: samples stay in the ball.
pub fn edit_ball_suite(samples: usize, n_max: usize, k_max: usize, master: u64) -> Result<SuiteReport> {
    let mut r = SuiteReport::new("edit_ball");
    let mut rng = seed::rng(master);
    for _ in 0..samples {
        let n = rng.random_range(1..=n_max);
        let k = rng.random_range(0..=k_max.min(n));
        let y = BitString::random(n, &mut rng);
        let x = sample_from_edit_ball(&y, k, rng.random())?;
        let (inside, _) = edit_ball_membership(&x, &y, k);
        r.record(inside && x.len() == n, || format!("y = {y}, x = {x}, k = {k}"));
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lemma4_small() {
        let r = lemma4_suite(3);
        assert_eq!(r.checked, 2 + 8 + 32);
        assert!(r.passed());
    }

    #[test]
    fn lemma3_small() {
        let (r, l1) = lemma3_suite(60, 8, 30, 4);
        assert_eq!(l1.failures, 0);
        assert!(r.passed(), "{:?}", r.failure_examples);
        assert_eq!(r.checked, 60);
    }

    #[test]
    fn prouhet_pairs_reach_requested_order() {
        let mut rng = seed::rng(9);
        for levels in 0..=3 {
            let (a, b) = prouhet_pair(levels, 30, &mut rng);
            assert_eq!(a.len(), 1 << levels);
            assert!(a.iter().chain(&b).all(|&v| v <= 30));
            if sorted(a.clone()) != sorted(b.clone()) {
                assert!(agreement_order(&a, &b) > levels);
            }
        }
        assert_eq!(agreement_order(&[1, 5, 6], &[2, 3, 7]), 3);
    }

    #[test]
    fn main_instances_have_late_difference() {
        for s in 0..10 {
            let inst = draw_main_instance(1, (20, 40), s).unwrap();
            assert!(inst.t0 >= 12);
            assert_eq!(inst.w.len(), 12);
            assert_eq!(inst.x.len(), inst.y.len());
        }
        assert!(draw_main_instance(3, (10, 30), 0).is_err());
    }

    #[test]
    fn lemma5_and_lemma2_small() {
        assert!(lemma5_suite(10, 40, 2, 3).unwrap().passed());
        let (r, l1) = lemma2_suite(10, 1, (20, 50), 3).unwrap();
        assert!(r.passed());
        assert_eq!(l1.failures, 0);
    }

    #[test]
    fn identity_small() {
        let opts = IdentityOptions { n_max: 4, points: 10, ..Default::default() };
        let r = identity_suite(&opts, 2).unwrap();
        assert_eq!(r.checked, 30 * 3);
        assert!(r.passed(), "{:?}", r.failure_examples);
    }

    #[test]
    fn lemma6_small() {
        let opts = Lemma6Options { instances: 3, n_range: (30, 60), ..Default::default() };
        let (r, l1) = lemma6_suite(&opts, 5).unwrap();
        assert_eq!(l1.failures, 0);
        assert!(r.details["certificates"].as_u64().unwrap() == 6);
    }

    #[test]
    fn edit_ball_sampler_suite() {
        assert!(edit_ball_suite(200, 30, 3, 1).unwrap().passed());
    }
}
