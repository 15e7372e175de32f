use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use serde::Serialize;

use crate::error::{Error, Result};

/// Polynomial with exact integer coefficients; `coefficients[i]` multiplies
/// `z^i`. Trailing zeros are trimmed so the zero polynomial is empty.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct IntPolynomial {
    coefficients: Vec<BigInt>,
}

impl IntPolynomial {
    pub fn new(mut coefficients: Vec<BigInt>) -> Self {
        while coefficients.last().is_some_and(Zero::is_zero) {
            coefficients.pop();
        }
        Self { coefficients }
    }

    pub fn from_i64(coefficients: &[i64]) -> Self {
        Self::new(coefficients.iter().map(|&c| BigInt::from(c)).collect())
    }

    /// `sum_i u_i z^i - sum_i v_i z^i` over 1-indexed positions.
    pub fn from_indicator_difference(u: &[u8], v: &[u8]) -> Self {
        let len = u.len().max(v.len());
        let mut c = vec![BigInt::zero(); len + 1];
        for (i, &b) in u.iter().enumerate() {
            c[i + 1] += i64::from(b);
        }
        for (i, &b) in v.iter().enumerate() {
            c[i + 1] -= i64::from(b);
        }
        Self::new(c)
    }

    /// `sum_a z^a - sum_b z^b` for two integer multisets of exponents.
    pub fn from_exponent_multisets(alpha: &[u64], beta: &[u64]) -> Self {
        let top = alpha.iter().chain(beta).copied().max().unwrap_or(0) as usize;
        let mut c = vec![BigInt::zero(); top + 1];
        for &a in alpha {
            c[a as usize] += 1;
        }
        for &b in beta {
            c[b as usize] -= 1;
        }
        Self::new(c)
    }

    pub fn coefficients(&self) -> &[BigInt] {
        &self.coefficients
    }

    pub fn is_zero(&self) -> bool {
        self.coefficients.is_empty()
    }

    /// `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coefficients.len().checked_sub(1)
    }

    pub fn value_at_one(&self) -> BigInt {
        self.coefficients.iter().sum()
    }

    pub fn l1_norm(&self) -> BigInt {
        self.coefficients.iter().map(|c| c.abs()).sum()
    }

    /// Synthetic division by `(z - 1)`, returning quotient and remainder.
    pub fn divide_by_z_minus_one(&self) -> (IntPolynomial, BigInt) {
        let Some(deg) = self.degree() else {
            return (Self::default(), BigInt::zero());
        };
        let mut q = vec![BigInt::zero(); deg];
        let mut carry = BigInt::zero();
        for i in (1..=deg).rev() {
            carry += &self.coefficients[i];
            q[i - 1] = carry.clone();
        }
        let rem = carry + &self.coefficients[0];
        (Self::new(q), rem)
    }

    /// Product with `(z - 1)^m`.
    pub fn times_z_minus_one_pow(&self, m: usize) -> IntPolynomial {
        let mut c = self.coefficients.clone();
        for _ in 0..m {
            if c.is_empty() {
                break;
            }
            let mut next = vec![BigInt::zero(); c.len() + 1];
            for (i, ci) in c.iter().enumerate() {
                next[i + 1] += ci;
                next[i] -= ci;
            }
            c = next;
        }
        Self::new(c)
    }

    /// `(z - 1)^m` expanded.
    pub fn z_minus_one_pow(m: usize) -> IntPolynomial {
        Self::new(vec![BigInt::one()]).times_z_minus_one_pow(m)
    }
}

impl fmt::Display for IntPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return f.write_str("0");
        }
        let mut first = true;
        for (i, c) in self.coefficients.iter().enumerate().rev() {
            if c.is_zero() {
                continue;
            }
            let sign = if c.is_negative() { "-" } else { "+" };
            if first {
                if c.is_negative() {
                    f.write_str("-")?;
                }
            } else {
                write!(f, " {sign} ")?;
            }
            first = false;
            let a = c.abs();
            match (i, a.is_one()) {
                (0, _) => write!(f, "{a}")?,
                (1, true) => f.write_str("z")?,
                (1, false) => write!(f, "{a}z")?,
                (_, true) => write!(f, "z^{i}")?,
                (_, false) => write!(f, "{a}z^{i}")?,
            }
        }
        Ok(())
    }
}

impl Serialize for IntPolynomial {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(self.coefficients.iter().map(|c| c.to_string()))
    }
}

/// Largest `m <= order_cap` such that `(z - 1)^m` divides `f`.
pub fn divisibility_order(f: &IntPolynomial, order_cap: usize) -> Result<usize> {
    if f.is_zero() {
        return Err(Error::ZeroPolynomial);
    }
    let mut cur = f.clone();
    let mut order = 0;
    while order < order_cap {
        let (q, r) = cur.divide_by_z_minus_one();
        if !r.is_zero() {
            break;
        }
        cur = q;
        order += 1;
    }
    Ok(order)
}

/// Exact quotient `f / (z - 1)^m`.
pub fn deflate(f: &IntPolynomial, m: usize) -> Result<IntPolynomial> {
    let mut cur = f.clone();
    for step in 0..m {
        let (q, r) = cur.divide_by_z_minus_one();
        if !r.is_zero() {
            return Err(Error::NotDivisible { order: step + 1 });
        }
        cur = q;
    }
    Ok(cur)
}
