//! Binary fixed-point complex arithmetic on big integers.
//!
//! A value is stored as a pair of integer mantissas scaled by `2^-bits`.
//! Additions are exact; every multiplication or division truncates toward
//! negative infinity, so each operation contributes less than one unit in
//! the last place (ulp) per component. Callers that need certified results
//! track ulp budgets explicitly; see [`Evaluation`].

use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_complex::Complex64;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{Float, One, Signed, ToPrimitive, Zero};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FixedComplex {
    re: BigInt,
    im: BigInt,
    bits: u32,
}

/// `floor(v / 2^s)`.
fn shr_floor(v: &BigInt, s: u32) -> BigInt {
    if s == 0 {
        return v.clone();
    }
    v.div_floor(&(BigInt::one() << s))
}

fn f64_to_scaled(v: f64, bits: u32) -> BigInt {
    assert!(v.is_finite(), "cannot convert {v} to fixed point");
    if v == 0.0 {
        return BigInt::zero();
    }
    let (mant, exp, sign) = Float::integer_decode(v);
    let m = BigInt::from(mant) * i64::from(sign);
    let e = i64::from(exp) + i64::from(bits);
    if e >= 0 {
        m << (e as u64)
    } else {
        shr_floor(&m, (-e) as u32)
    }
}

fn rational_to_scaled(v: &BigRational, bits: u32) -> BigInt {
    (v.numer() << bits).div_floor(v.denom())
}

/// `m * 2^-bits` rounded to the nearest double (up to the precision of
/// the leading 64 bits).
pub(crate) fn scaled_to_f64(m: &BigInt, bits: u32) -> f64 {
    let len = m.bits();
    if len == 0 {
        return 0.0;
    }
    let drop = len.saturating_sub(64);
    let top = (m >> drop).to_f64().unwrap_or(0.0);
    let mut e = drop as i64 - i64::from(bits);
    let mut out = top;
    while e < -1000 {
        out *= 2f64.powi(-1000);
        e += 1000;
    }
    while e > 1000 {
        out *= 2f64.powi(1000);
        e -= 1000;
    }
    out * 2f64.powi(e as i32)
}

impl FixedComplex {
    pub fn zero(bits: u32) -> Self {
        Self {
            re: BigInt::zero(),
            im: BigInt::zero(),
            bits,
        }
    }

    pub fn one(bits: u32) -> Self {
        Self::from_int(&BigInt::one(), bits)
    }

    pub fn from_int(c: &BigInt, bits: u32) -> Self {
        Self {
            re: c << bits,
            im: BigInt::zero(),
            bits,
        }
    }

    /// Exact whenever the doubles fit in `bits` fractional bits.
    pub fn from_f64(re: f64, im: f64, bits: u32) -> Self {
        Self {
            re: f64_to_scaled(re, bits),
            im: f64_to_scaled(im, bits),
            bits,
        }
    }

    pub fn from_complex64(z: Complex64, bits: u32) -> Self {
        Self::from_f64(z.re, z.im, bits)
    }

    pub fn from_rational(re: &BigRational, im: &BigRational, bits: u32) -> Self {
        Self {
            re: rational_to_scaled(re, bits),
            im: rational_to_scaled(im, bits),
            bits,
        }
    }

    pub fn from_real_rational(re: &BigRational, bits: u32) -> Self {
        Self {
            re: rational_to_scaled(re, bits),
            im: BigInt::zero(),
            bits,
        }
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn re_mantissa(&self) -> &BigInt {
        &self.re
    }

    pub fn im_mantissa(&self) -> &BigInt {
        &self.im
    }

    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    /// Changes the number of fractional bits (truncating when reducing).
    pub fn with_bits(&self, bits: u32) -> Self {
        let (re, im) = if bits >= self.bits {
            let s = bits - self.bits;
            (&self.re << s, &self.im << s)
        } else {
            let s = self.bits - bits;
            (shr_floor(&self.re, s), shr_floor(&self.im, s))
        };
        Self { re, im, bits }
    }

    /// `re^2 + im^2` as an exact integer scaled by `2^-(2 bits)`.
    pub fn norm_sqr_scaled(&self) -> BigInt {
        &self.re * &self.re + &self.im * &self.im
    }

    pub fn to_complex64(&self) -> Complex64 {
        Complex64::new(
            scaled_to_f64(&self.re, self.bits),
            scaled_to_f64(&self.im, self.bits),
        )
    }

    pub fn abs_f64(&self) -> f64 {
        // Normalise before squaring so tiny magnitudes do not underflow.
        let scale = self.re.bits().max(self.im.bits());
        if scale == 0 {
            return 0.0;
        }
        let drop = scale.saturating_sub(60);
        let re = scaled_to_f64(&(&self.re >> drop), 0);
        let im = scaled_to_f64(&(&self.im >> drop), 0);
        re.hypot(im) * scaled_to_f64(&BigInt::one(), self.bits) * 2f64.powi(drop as i32)
    }

    /// Exact product with an integer.
    pub fn scale_int(&self, c: &BigInt) -> Self {
        Self {
            re: &self.re * c,
            im: &self.im * c,
            bits: self.bits,
        }
    }

    /// Product with a rational, truncated.
    pub fn scale_rational(&self, r: &BigRational) -> Self {
        Self {
            re: (&self.re * r.numer()).div_floor(r.denom()),
            im: (&self.im * r.numer()).div_floor(r.denom()),
            bits: self.bits,
        }
    }

    /// Product with a real fixed-point number given by its mantissa.
    pub fn mul_real(&self, mantissa: &BigInt) -> Self {
        Self {
            re: shr_floor(&(&self.re * mantissa), self.bits),
            im: shr_floor(&(&self.im * mantissa), self.bits),
            bits: self.bits,
        }
    }

    pub fn conj(&self) -> Self {
        Self {
            re: self.re.clone(),
            im: -&self.im,
            bits: self.bits,
        }
    }

    pub fn pow(&self, e: u64) -> Self {
        let mut acc = Self::one(self.bits);
        let mut base = self.clone();
        let mut e = e;
        while e > 0 {
            if e & 1 == 1 {
                acc = &acc * &base;
            }
            e >>= 1;
            if e > 0 {
                base = &base * &base;
            }
        }
        acc
    }
}

impl Add for &FixedComplex {
    type Output = FixedComplex;
    fn add(self, rhs: &FixedComplex) -> FixedComplex {
        debug_assert_eq!(self.bits, rhs.bits);
        FixedComplex {
            re: &self.re + &rhs.re,
            im: &self.im + &rhs.im,
            bits: self.bits,
        }
    }
}

impl Sub for &FixedComplex {
    type Output = FixedComplex;
    fn sub(self, rhs: &FixedComplex) -> FixedComplex {
        debug_assert_eq!(self.bits, rhs.bits);
        FixedComplex {
            re: &self.re - &rhs.re,
            im: &self.im - &rhs.im,
            bits: self.bits,
        }
    }
}

impl Neg for &FixedComplex {
    type Output = FixedComplex;
    fn neg(self) -> FixedComplex {
        FixedComplex {
            re: -&self.re,
            im: -&self.im,
            bits: self.bits,
        }
    }
}

impl Mul for &FixedComplex {
    type Output = FixedComplex;
    fn mul(self, rhs: &FixedComplex) -> FixedComplex {
        debug_assert_eq!(self.bits, rhs.bits);
        let re = &self.re * &rhs.re - &self.im * &rhs.im;
        let im = &self.re * &rhs.im + &self.im * &rhs.re;
        FixedComplex {
            re: shr_floor(&re, self.bits),
            im: shr_floor(&im, self.bits),
            bits: self.bits,
        }
    }
}

/// `atan(1/x) * 2^bits`, truncated termwise.
fn atan_inv(x: u32, bits: u32) -> BigInt {
    let x2 = BigInt::from(u64::from(x) * u64::from(x));
    let mut power = (BigInt::one() << bits) / x;
    let mut sum = BigInt::zero();
    let mut k: u32 = 0;
    loop {
        let term = &power / (2 * k + 1);
        if term.is_zero() {
            break;
        }
        if k.is_multiple_of(2) {
            sum += term;
        } else {
            sum -= term;
        }
        power /= &x2;
        k += 1;
    }
    sum
}

/// `pi * 2^bits` via Machin's formula.
pub(crate) fn pi_scaled(bits: u32) -> BigInt {
    const GUARD: u32 = 32;
    let w = bits + GUARD;
    let pi = atan_inv(5, w) * 16 - atan_inv(239, w) * 4;
    shr_floor(&pi, GUARD)
}

/// `(cos theta, sin theta) * 2^bits` for a scaled angle with `|theta| <= 4`.
fn cos_sin_scaled(theta: &BigInt, bits: u32) -> (BigInt, BigInt) {
    let one = BigInt::one() << bits;
    let theta2 = shr_floor(&(theta * theta), bits);
    let mut cos = one.clone();
    let mut sin = theta.clone();
    let mut c_term = one;
    let mut s_term = theta.clone();
    let mut k: u64 = 1;
    loop {
        c_term = -shr_floor(&(&c_term * &theta2), bits) / ((2 * k - 1) * (2 * k));
        s_term = -shr_floor(&(&s_term * &theta2), bits) / ((2 * k) * (2 * k + 1));
        if c_term.is_zero() && s_term.is_zero() {
            break;
        }
        cos += &c_term;
        sin += &s_term;
        k += 1;
    }
    (cos, sin)
}

/// `exp(2 pi i j / d)` at `bits` fractional bits.
///
/// Exact when the root is one of `1, i, -1, -i`; otherwise each component
/// is within 2 ulps of the true value.
pub fn unit_root(j: u64, d: u64, bits: u32) -> FixedComplex {
    assert!(d > 0);
    let j = j % d;
    if (4 * j).is_multiple_of(d) {
        let one = BigInt::one() << bits;
        let (re, im) = match 4 * j / d {
            0 => (one, BigInt::zero()),
            1 => (BigInt::zero(), one),
            2 => (-one, BigInt::zero()),
            _ => (BigInt::zero(), -one),
        };
        return FixedComplex { re, im, bits };
    }
    const GUARD: u32 = 40;
    let w = bits + GUARD;
    // Angle reduced to (-pi, pi].
    let signed = if 2 * j > d {
        -(BigInt::from(d - j))
    } else {
        BigInt::from(j)
    };
    let theta = (pi_scaled(w) * BigInt::from(2) * signed).div_floor(&BigInt::from(d));
    let (c, s) = cos_sin_scaled(&theta, w);
    FixedComplex {
        re: shr_floor(&c, GUARD),
        im: shr_floor(&s, GUARD),
        bits,
    }
}

/// A fixed-point value together with a certified absolute error bound of
/// `error_ulps * 2^-bits`.
#[derive(Clone, Debug)]
pub struct Evaluation {
    pub value: FixedComplex,
    pub error_ulps: BigInt,
}

impl Evaluation {
    pub fn error_bound(&self) -> f64 {
        scaled_to_f64(&self.error_ulps, self.value.bits())
    }

    /// Compares `|value|` against `bound` using the error budget.
    ///
    /// `Some(true)` when the true magnitude is certainly `>= bound`,
    /// `Some(false)` when it is certainly `< bound`, `None` when the error
    /// budget straddles the bound.
    pub fn certify_at_least(&self, bound: &BigRational) -> Option<bool> {
        let bits = self.value.bits();
        let scale = BigInt::one() << bits;
        let n2 = self.value.norm_sqr_scaled();
        // bound * 2^bits as num/den.
        let b_num = bound.numer() * &scale;
        let b_den = bound.denom().clone();
        let err = &self.error_ulps * &b_den;

        let hi = &b_num + &err;
        if !hi.is_positive() || &n2 * &b_den * &b_den >= &hi * &hi {
            return Some(true);
        }
        let lo = &b_num - &err;
        if lo.is_positive() && &n2 * &b_den * &b_den < &lo * &lo {
            return Some(false);
        }
        None
    }
}
