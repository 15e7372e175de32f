//! Power sums, `(z - 1)`-divisibility, and certified polynomial evaluation.
//!
//! Two strings' pattern indicator vectors `u`, `v` define the difference
//! polynomial `f(z) = sum_i (u_i - v_i) z^i`. The first power `m` at which
//! `sum_i i^m u_i` and `sum_i i^m v_i` disagree controls how flat `f` is at
//! `z = 1`: when the occurrence counts agree, `(z - 1)^m` exactly divides
//! `f`. [`search::lemma6_search`] turns that into a point `z` close to `1`
//! where `|f(z)|` is provably bounded below, with all arithmetic done in
//! binary fixed point with explicit error budgets.

mod fixed;
mod intpoly;
pub mod search;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, One, Signed, ToPrimitive, Zero};
use serde::Serialize;

pub use fixed::{unit_root, Evaluation, FixedComplex};
pub use intpoly::{deflate, divisibility_order, IntPolynomial};
pub use search::{lemma6_search, lemma7_gap_search, Certificate, EvalPoint, GapSearch};

use crate::error::{Error, Result};

/// `sum_i i^m v_i` over 1-indexed positions.
pub fn power_sum<V: AsRef<[u8]> + ?Sized>(v: &V, m: u32) -> BigInt {
    v.as_ref()
        .iter()
        .enumerate()
        .filter(|(_, &b)| b == 1)
        .map(|(i, _)| BigInt::from(i + 1).pow(m))
        .sum()
}

/// `sum_i (sum_{j <= i} j^m) v_i`.
pub fn prefix_power_sum<V: AsRef<[u8]> + ?Sized>(v: &V, m: u32) -> BigInt {
    let mut prefix = BigInt::zero();
    let mut total = BigInt::zero();
    for (i, &b) in v.as_ref().iter().enumerate() {
        prefix += BigInt::from(i + 1).pow(m);
        if b == 1 {
            total += &prefix;
        }
    }
    total
}

/// Smallest `m` in `1..=m_max` where the power sums of `u` and `v` differ.
pub fn find_separating_power<U, V>(u: &U, v: &V, m_max: usize) -> Result<Option<usize>>
where
    U: AsRef<[u8]> + ?Sized,
    V: AsRef<[u8]> + ?Sized,
{
    let (u, v) = (u.as_ref(), v.as_ref());
    if u.len() != v.len() {
        return Err(Error::LengthMismatch {
            left: u.len(),
            right: v.len(),
        });
    }
    Ok((1..=m_max).find(|&m| power_sum(u, m as u32) != power_sum(v, m as u32)))
}

/// Smallest `m >= 0` where the power sums differ; equals the exact order
/// of `(z - 1)` in the difference polynomial.
pub fn first_disagreeing_power<U, V>(u: &U, v: &V) -> Option<usize>
where
    U: AsRef<[u8]> + ?Sized,
    V: AsRef<[u8]> + ?Sized,
{
    let (u, v) = (u.as_ref(), v.as_ref());
    if u == v {
        return None;
    }
    (0..).find(|&m| power_sum(u, m as u32) != power_sum(v, m as u32))
}

#[derive(Clone, Debug, Serialize)]
pub struct L1Check {
    #[serde(serialize_with = "ser_bigint")]
    pub l1: BigInt,
    /// `(n + 1)(e n / m)^m`, or `n + 1` when `m = 0`.
    pub bound: f64,
    pub passes: bool,
}

pub(crate) fn ser_bigint<S: serde::Serializer>(v: &BigInt, s: S) -> std::result::Result<S::Ok, S::Error> {
    match v.to_u64() {
        Some(u) => s.serialize_u64(u),
        None => s.collect_str(v),
    }
}

/// Rational bracket `[lo, hi]` around Euler's number.
fn euler_bracket() -> (BigRational, BigRational) {
    const TERMS: u64 = 40;
    let mut sum = BigRational::zero();
    let mut fact = BigInt::one();
    for k in 0..=TERMS {
        if k > 0 {
            fact *= k;
        }
        sum += BigRational::new(BigInt::one(), fact.clone());
    }
    // Tail after TERMS is below 2 / (TERMS + 1)!.
    let tail = BigRational::new(BigInt::from(2), fact * (TERMS + 1));
    let hi = &sum + tail;
    (sum, hi)
}

/// Checks the coefficient mass of a deflated quotient against
/// `(n + 1)(e n / m)^m`, exactly.
pub fn coefficient_l1_check(q: &IntPolynomial, n: usize, m: usize) -> L1Check {
    let l1 = q.l1_norm();
    let n1 = BigRational::from_integer(BigInt::from(n + 1));
    let bound_at = |e: &BigRational| -> BigRational {
        if m == 0 {
            return n1.clone();
        }
        let base = e * BigRational::new(BigInt::from(n), BigInt::from(m));
        &n1 * num_traits::pow(base, m)
    };
    let (e_lo, e_hi) = euler_bracket();
    let l1r = BigRational::from_integer(l1.clone());
    let lo = bound_at(&e_lo);
    let passes = if l1r <= lo {
        true
    } else {
        // Only reachable when l1 sits inside the rounding bracket.
        l1r <= bound_at(&e_hi)
    };
    let bound = if m == 0 {
        (n + 1) as f64
    } else {
        let ln = ((n + 1) as f64).ln() + m as f64 * (1.0 + (n as f64 / m as f64).ln());
        ln.exp()
    };
    L1Check { l1, bound, passes }
}

/// Default working precision for a separating power `m` at length `n`.
pub fn default_precision(n: usize, m: usize) -> u32 {
    let log_n = (n.max(2) as f64).log2();
    let need = ((2 * m + 2) as f64 * log_n).ceil() as u32 + 32;
    need.max(64)
}

/// Horner evaluation of `f` at a fixed-point `z` known to within
/// `z_err_ulps` ulps (in modulus).
///
/// The returned budget covers both the truncation in each Horner step,
/// at most `2 deg sum |c_i| R^i` ulps with `R = max(1, |z|)`, and the
/// propagation of the input error through `f'`.
pub fn eval_at(f: &IntPolynomial, z: &FixedComplex, z_err_ulps: u64) -> Evaluation {
    let bits = z.bits();
    let coeffs = f.coefficients();
    let Some(deg) = f.degree() else {
        return Evaluation {
            value: FixedComplex::zero(bits),
            error_ulps: BigInt::zero(),
        };
    };
    let mut acc = FixedComplex::from_int(&coeffs[deg], bits);
    for c in coeffs[..deg].iter().rev() {
        acc = &(&acc * z) + &FixedComplex::from_int(c, bits);
    }

    let ulp = 2f64.powi(-(bits.min(1000) as i32));
    let r = (z.abs_f64() + z_err_ulps as f64 * ulp).max(1.0) * (1.0 + 1e-12);
    let mut s0 = 0.0f64;
    let mut s1 = 0.0f64;
    let mut rp = 1.0f64;
    for (i, c) in coeffs.iter().enumerate() {
        let a = c.abs().to_f64().unwrap_or(f64::MAX);
        if i > 0 {
            s1 += i as f64 * a * rp;
            rp *= r;
        }
        s0 += a * rp;
    }
    let budget = (2.0 * deg as f64 * s0 + z_err_ulps as f64 * s1) * 1.01 + 2.0;
    Evaluation {
        value: acc,
        error_ulps: BigInt::from_f64(budget.ceil()).unwrap_or_else(|| BigInt::one() << 1024u32),
    }
}

/// Evaluates `f` at a double-precision point using `precision_bits`
/// fractional bits.
pub fn eval_f(f: &IntPolynomial, z: num_complex::Complex64, precision_bits: u32) -> Result<Evaluation> {
    if precision_bits < 64 {
        return Err(Error::InvalidConfig(format!(
            "precision must be at least 64 bits, got {precision_bits}"
        )));
    }
    let zf = FixedComplex::from_complex64(z, precision_bits);
    // Doubles near unit magnitude convert exactly at >= 64 bits; allow one
    // ulp per component for the rest.
    Ok(eval_at(f, &zf, 2))
}

/// Multi-variate pattern polynomial
/// `sum_{j_1 < .. < j_l} [x_{j_h} = w_h for all h] z_1^{j_1 - shift} prod_{h >= 2} z_h^{j_h - j_{h-1} - 1}`.
///
/// With `shift = 0` this is the polynomial side of the multi-bit statistic
/// identity; setting `z_2 = .. = z_l = 0` leaves `sum_i 1_w(x)_i z_1^i`.
pub fn multibit_sum(bits: &[u8], pattern: &[u8], vars: &[FixedComplex], shift: u64) -> FixedComplex {
    assert_eq!(pattern.len(), vars.len(), "one variable per pattern bit");
    assert!(shift <= 1);
    let prec = vars[0].bits();
    let l = pattern.len();
    let mut total = FixedComplex::zero(prec);
    if l == 0 || bits.len() < l {
        return total;
    }
    // acc[h] = sum over partial tuples ending before the current position of
    // weight * z_{h+1}^{gap so far}, for h = 1..l-1 (0-based h-1).
    let mut acc: Vec<FixedComplex> = vec![FixedComplex::zero(prec); l];
    let mut first_pow = if shift == 0 {
        vars[0].clone()
    } else {
        FixedComplex::one(prec)
    };
    let mut ends: Vec<Option<FixedComplex>> = vec![None; l];
    for &b in bits {
        // Tuples whose h-th element sits at this position.
        ends[0] = (b == pattern[0]).then(|| first_pow.clone());
        for h in 1..l {
            ends[h] = (b == pattern[h] && !acc[h].is_zero()).then(|| acc[h].clone());
        }
        for h in 1..l {
            let mut next = &acc[h] * &vars[h];
            if let Some(e) = &ends[h - 1] {
                next = &next + e;
            }
            acc[h] = next;
        }
        if let Some(e) = &ends[l - 1] {
            total = &total + e;
        }
        first_pow = &first_pow * &vars[0];
    }
    total
}

/// `f_{x,w}(z_1, .., z_l)` with 1-indexed exponents.
pub fn f_multibit(x: &[u8], w: &[u8], z: &[FixedComplex]) -> FixedComplex {
    multibit_sum(x, w, z, 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use proptest::prelude::*;

    #[test]
    fn power_sum_examples() {
        let v = [0u8, 1, 0, 0, 1];
        assert_eq!(power_sum(&v[..], 3), BigInt::from(133));
        assert_eq!(power_sum(&v[..], 0), BigInt::from(2));
        assert_eq!(power_sum(&[0u8; 6][..], 4), BigInt::zero());
    }

    #[test]
    fn prefix_power_sum_examples() {
        assert_eq!(prefix_power_sum(&[0u8, 0, 1][..], 1), BigInt::from(6));
        assert_eq!(prefix_power_sum(&[1u8, 0, 0][..], 5), BigInt::from(1));
    }

    fn ones_at(n: usize, pos: &[usize]) -> Vec<u8> {
        let mut v = vec![0u8; n];
        for &p in pos {
            v[p - 1] = 1;
        }
        v
    }

    #[test]
    fn separating_power_examples() {
        let u = ones_at(7, &[1, 5, 6]);
        let v = ones_at(7, &[2, 3, 7]);
        assert_eq!(find_separating_power(&u, &u, 5).unwrap(), None);
        assert_eq!(find_separating_power(&u, &v, 4).unwrap(), Some(3));
        assert_eq!(find_separating_power(&u, &v, 2).unwrap(), None);
        assert_eq!(
            find_separating_power(&ones_at(2, &[1]), &ones_at(2, &[2]), 2).unwrap(),
            Some(1)
        );
        assert!(find_separating_power(&u, &v[..3], 4).is_err());
        // Classic pair: order of (z-1) is exactly 3.
        let f = IntPolynomial::from_indicator_difference(&u, &v);
        assert_eq!(divisibility_order(&f, 20).unwrap(), 3);
        assert_eq!(first_disagreeing_power(&u, &v), Some(3));
    }

    #[test]
    fn l1_examples() {
        let q = IntPolynomial::from_i64(&[0, -1]);
        let c = coefficient_l1_check(&q, 2, 1);
        assert_eq!(c.l1, BigInt::one());
        assert!(c.passes);
        assert!((c.bound - 3.0 * 2.0 * std::f64::consts::E).abs() < 1e-9);
        let one = IntPolynomial::from_i64(&[1]);
        assert!(coefficient_l1_check(&one, 10, 4).passes);
        assert!(!coefficient_l1_check(&IntPolynomial::from_i64(&[100]), 3, 0).passes);
    }

    #[test]
    fn l1_bound_is_tight_at_the_boundary() {
        // (n+1)(en/m)^m with n = 2, m = 1 is 16.31.. so 16 passes, 17 fails.
        assert!(coefficient_l1_check(&IntPolynomial::from_i64(&[16]), 2, 1).passes);
        assert!(!coefficient_l1_check(&IntPolynomial::from_i64(&[17]), 2, 1).passes);
    }

    #[test]
    fn eval_examples() {
        let f = IntPolynomial::from_i64(&[0, 1, -1]);
        let at_one = eval_f(&f, Complex64::new(1.0, 0.0), 64).unwrap();
        assert!(at_one.value.is_zero());
        let at_two = eval_f(&f, Complex64::new(2.0, 0.0), 64).unwrap();
        assert_eq!(at_two.value.to_complex64(), Complex64::new(-2.0, 0.0));
        assert!(eval_f(&f, Complex64::new(2.0, 0.0), 32).is_err());
    }

    #[test]
    fn eval_matches_exact_rational_oracle() {
        // f = sum of +-z^i, z = 1 + 1/n^2 evaluated exactly in rationals.
        let coeffs = [0i64, 1, -1, 0, 1, 1, -1, 0, -1, 1, 1];
        let f = IntPolynomial::from_i64(&coeffs);
        for n in [3i64, 7, 10] {
            let z = BigRational::new(BigInt::from(n * n + 1), BigInt::from(n * n));
            let exact: BigRational = coeffs
                .iter()
                .enumerate()
                .map(|(i, &c)| BigRational::from_integer(c.into()) * num_traits::pow(z.clone(), i))
                .sum();
            let zf = FixedComplex::from_real_rational(&z, 160);
            let ev = eval_at(&f, &zf, 1);
            let exact_f = FixedComplex::from_real_rational(&exact, 160);
            let diff = (ev.value.re_mantissa() - exact_f.re_mantissa()).abs();
            assert!(diff <= ev.error_ulps, "n={n}");
            assert!(ev.value.im_mantissa().is_zero());
        }
    }

    /// Brute force over all increasing index tuples.
    fn tuple_sum_oracle(bits: &[u8], pattern: &[u8], z: &[Complex64], shift: i32) -> Complex64 {
        #[allow(clippy::too_many_arguments)]
        fn rec(
            bits: &[u8],
            pattern: &[u8],
            z: &[Complex64],
            shift: i32,
            start: usize,
            prev: usize,
            h: usize,
            acc: Complex64,
        ) -> Complex64 {
            if h == pattern.len() {
                return acc;
            }
            let mut s = Complex64::new(0.0, 0.0);
            for j in start..=bits.len() {
                if bits[j - 1] != pattern[h] {
                    continue;
                }
                let e = if h == 0 { j as i32 - shift } else { (j - prev - 1) as i32 };
                let w = if e == 0 { Complex64::new(1.0, 0.0) } else { z[h].powi(e) };
                s += rec(bits, pattern, z, shift, j + 1, j, h + 1, acc * w);
            }
            s
        }
        rec(bits, pattern, z, shift, 1, 0, 0, Complex64::new(1.0, 0.0))
    }

    proptest! {
        #[test]
        fn multibit_sum_matches_tuple_enumeration(
            bits in prop::collection::vec(0u8..=1, 0..9),
            pattern in prop::collection::vec(0u8..=1, 1..4),
            re in prop::collection::vec(-1.2f64..1.2, 3),
            im in prop::collection::vec(-1.2f64..1.2, 3),
            shift in 0u64..=1,
            zero_tail in any::<bool>(),
        ) {
            let l = pattern.len();
            let z: Vec<Complex64> = (0..l)
                .map(|h| if zero_tail && h > 0 { Complex64::new(0.0, 0.0) } else { Complex64::new(re[h], im[h]) })
                .collect();
            let zf: Vec<FixedComplex> = z.iter().map(|&c| FixedComplex::from_complex64(c, 128)).collect();
            let got = multibit_sum(&bits, &pattern, &zf, shift).to_complex64();
            let want = tuple_sum_oracle(&bits, &pattern, &z, shift as i32);
            prop_assert!((got - want).norm() <= 1e-9 * (1.0 + want.norm()), "{got} vs {want}");
        }

        #[test]
        fn zero_tail_reduces_to_indicator_polynomial(
            x in prop::collection::vec(0u8..=1, 1..20),
            w in prop::collection::vec(0u8..=1, 1..4),
            re in -1.2f64..1.2, im in -1.2f64..1.2,
        ) {
            prop_assume!(w.len() <= x.len());
            let mut vars = vec![FixedComplex::zero(128); w.len()];
            vars[0] = FixedComplex::from_f64(re, im, 128);
            let lhs = f_multibit(&x, &w, &vars);
            let ind: Vec<u8> = (0..x.len())
                .map(|i| u8::from(i + w.len() <= x.len() && x[i..i + w.len()] == w[..]))
                .collect();
            let poly = IntPolynomial::from_indicator_difference(&ind, &[]);
            let rhs = eval_at(&poly, &vars[0], 0);
            prop_assert!((lhs.to_complex64() - rhs.value.to_complex64()).norm() < 1e-20);
        }

        #[test]
        fn eval_error_bound_is_honoured(
            c in prop::collection::vec(-1i64..=1, 2..80),
            theta in 0.0f64..std::f64::consts::TAU,
            bits in 64u32..120,
        ) {
            let f = IntPolynomial::from_i64(&c);
            prop_assume!(!f.is_zero());
            let z = Complex64::new(1.0 + theta.cos() / 400.0, theta.sin() / 400.0);
            let lo = eval_f(&f, z, bits).unwrap();
            let hi = eval_f(&f, z, 2 * bits).unwrap();
            let diff = &hi.value - &lo.value.with_bits(2 * bits);
            let moved = diff.abs_f64();
            prop_assert!(moved <= lo.error_bound(), "{moved} > {}", lo.error_bound());
        }

        #[test]
        fn separating_power_equals_order_when_counts_agree(
            a in prop::collection::vec(1u64..30, 1..8),
            b in prop::collection::vec(1u64..30, 1..8),
        ) {
            let n = 30;
            let mut u = vec![0u8; n];
            let mut v = vec![0u8; n];
            for &x in &a { u[x as usize - 1] = 1; }
            for &x in &b { v[x as usize - 1] = 1; }
            prop_assume!(u != v);
            let f = IntPolynomial::from_indicator_difference(&u, &v);
            let order = divisibility_order(&f, 64).unwrap();
            prop_assert_eq!(Some(order), first_disagreeing_power(&u, &v));
            if power_sum(&u, 0) == power_sum(&v, 0) {
                prop_assert_eq!(find_separating_power(&u, &v, 64).unwrap(), Some(order));
            }
        }
    }

    /// Faulhaber: sum_{j<=i} j^m = (1/(m+1)) sum_{r=0}^m C(m+1, r) B_r i^{m+1-r}
    /// with B_1 = +1/2.
    #[test]
    fn prefix_power_sums_follow_faulhaber() {
        let binom = |n: i64, k: i64| -> BigInt {
            (0..k).fold(BigInt::one(), |acc, t| acc * (n - t) / (t + 1))
        };
        // Bernoulli numbers with B_1 = +1/2 from the standard recurrence.
        let mut bern: Vec<BigRational> = vec![BigRational::one()];
        for m in 1..=7i64 {
            let s: BigRational = (0..m)
                .map(|k| BigRational::from_integer(binom(m + 1, k)) * &bern[k as usize])
                .sum();
            bern.push(-s / BigRational::from_integer(BigInt::from(m + 1)));
        }
        bern[1] = BigRational::new(1.into(), 2.into());

        let mut rng = crate::seed::rng(5);
        for m in 0..=6u32 {
            for _ in 0..20 {
                let v = crate::bitstr::BitString::random(25, &mut rng);
                let direct = prefix_power_sum(v.bits(), m);
                let combo: BigRational = (0..=m as i64)
                    .map(|r| {
                        BigRational::from_integer(binom(m as i64 + 1, r))
                            * &bern[r as usize]
                            * BigRational::from_integer(power_sum(v.bits(), (m as i64 + 1 - r) as u32))
                    })
                    .sum::<BigRational>()
                    / BigRational::from_integer(BigInt::from(m + 1));
                assert_eq!(BigRational::from_integer(direct), combo, "m={m}");
            }
        }
    }
}
