//! Searching near `z = 1` for large values of the difference polynomial.

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::One;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use super::{
    default_precision, deflate, divisibility_order, eval_at, f_multibit, power_sum, ser_bigint, Evaluation, FixedComplex, IntPolynomial,
};
use crate::channel::ChannelParam;
use crate::error::{Error, Result};

/// Candidate points are accurate to this many ulps in modulus.
const POINT_ERR_ULPS: u64 = 5;
const MAX_ESCALATIONS: u32 = 4;

/// `|(z - q) / (1 - q)|^n`.
pub fn channel_factor(z: Complex64, q: f64, n: usize) -> f64 {
    let r2 = (z - q).norm_sqr() / ((1.0 - q) * (1.0 - q));
    (0.5 * n as f64 * r2.ln()).exp()
}

#[derive(Clone, Debug, Serialize)]
pub struct EvalPoint {
    pub index: u64,
    pub z: Complex64Json,
    /// `|f(z)|`.
    pub value: f64,
    pub error_bound: f64,
    pub channel_factor: f64,
    pub channel_ok: bool,
}

#[derive(Clone, Copy, Debug, Serialize, PartialEq)]
pub struct Complex64Json {
    pub re: f64,
    pub im: f64,
}

impl From<Complex64> for Complex64Json {
    fn from(z: Complex64) -> Self {
        Self { re: z.re, im: z.im }
    }
}

/// Witness that two indicator vectors give statistically separable traces.
#[derive(Clone, Debug, Serialize)]
pub struct Certificate {
    pub n: usize,
    pub separating_power: usize,
    /// Exact order of `(z - 1)` in the difference polynomial.
    pub divisibility_order: usize,
    pub quotient: IntPolynomial,
    #[serde(serialize_with = "ser_bigint")]
    pub quotient_l1: BigInt,
    /// Number of candidate points, `2m + 2`.
    pub points_on_circle: u64,
    pub witness_index: u64,
    #[serde(skip)]
    pub witness_z: FixedComplex,
    pub witness_value: f64,
    pub witness_error: f64,
    pub bound: f64,
    #[serde(skip)]
    pub bound_exact: BigRational,
    pub channel_factor: f64,
    /// `|f(witness)| >= bound`, certified against the rounding budget.
    pub value_ok: bool,
    pub valid: bool,
    /// `|sum_j q(z_j)|` over all candidate points.
    pub avg_over_d: f64,
    pub avg_at_least_one: bool,
    pub precision_bits: u32,
    pub points: Vec<EvalPoint>,
}

impl Certificate {
    pub fn witness(&self) -> Complex64 {
        self.witness_z.to_complex64()
    }

    /// Compact JSON form.
    pub fn to_json(&self) -> serde_json::Value {
        let z = self.witness();
        let l1 = match num_traits::ToPrimitive::to_u64(&self.quotient_l1) {
            Some(v) => json!(v),
            None => json!(self.quotient_l1.to_string()),
        };
        json!({
            "m": self.separating_power,
            "order": self.divisibility_order,
            "quotient_l1": l1,
            "z": { "re": z.re, "im": z.im },
            "value": self.witness_value,
            "bound": self.bound,
            "channel_factor": self.channel_factor,
            "valid": self.valid,
            "avg_over_D": self.avg_over_d,
        })
    }
}

/// `1 + exp(2 pi i j / d) / n^2`.
pub fn circle_point(j: u64, d: u64, n: usize, bits: u32) -> FixedComplex {
    let inv_n2 = BigRational::new(BigInt::one(), BigInt::from(n) * BigInt::from(n));
    let root = super::unit_root(j, d, bits).scale_rational(&inv_n2);
    &FixedComplex::one(bits) + &root
}

struct Attempt {
    evals: Vec<(FixedComplex, Evaluation, Evaluation)>,
    best: usize,
    value_ok: bool,
    avg: Evaluation,
    avg_ok: bool,
}

fn attempt(f: &IntPolynomial, q: &IntPolynomial, n: usize, d: u64, bound: &BigRational, bits: u32) -> Option<Attempt> {
    let evals: Vec<(FixedComplex, Evaluation, Evaluation)> = (1..=d)
        .into_par_iter()
        .map(|j| {
            let z = circle_point(j, d, n, bits);
            let fv = eval_at(f, &z, POINT_ERR_ULPS);
            let qv = eval_at(q, &z, POINT_ERR_ULPS);
            (z, fv, qv)
        })
        .collect();
    // Largest |f|, earliest index on ties.
    let mut best = 0;
    for (i, e) in evals.iter().enumerate() {
        if e.1.value.norm_sqr_scaled() > evals[best].1.value.norm_sqr_scaled() {
            best = i;
        }
    }
    let value_ok = evals[best].1.certify_at_least(bound)?;

    let mut sum = FixedComplex::zero(bits);
    let mut err = BigInt::from(0);
    for e in &evals {
        sum = &sum + &e.2.value;
        err += &e.2.error_ulps;
    }
    let avg = Evaluation {
        value: sum,
        error_ulps: err,
    };
    let avg_ok = avg.certify_at_least(&BigRational::one())?;
    Some(Attempt {
        evals,
        best,
        value_ok,
        avg,
        avg_ok,
    })
}

/// Evaluates the difference polynomial of `u` and `v` at the `2m + 2`
/// points `1 + exp(2 pi i j / (2m + 2)) / n^2` and certifies the largest
/// value against `1 / (n^{2m} (2m + 2))`.
///
/// `m` must be a power at which the power sums of `u` and `v` differ.
/// With `precision_bits = None` the working precision starts at
/// [`default_precision`] and doubles while the comparison is inconclusive;
/// an explicit precision is tried once.
pub fn lemma6_search<U, V>(
    u: &U,
    v: &V,
    m: usize,
    ch: &ChannelParam,
    precision_bits: Option<u32>,
) -> Result<Certificate>
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
    let n = u.len();
    if u == v {
        return Err(Error::NoSeparatingPower("identical indicator vectors".into()));
    }
    if power_sum(u, m as u32) == power_sum(v, m as u32) {
        return Err(Error::NoSeparatingPower(format!("power sums agree at m = {m}")));
    }
    let f = IntPolynomial::from_indicator_difference(u, v);
    let order = divisibility_order(&f, usize::MAX)?;
    let quotient = deflate(&f, order)?;
    let d = 2 * m as u64 + 2;
    let bound = BigRational::new(
        BigInt::one(),
        BigInt::from(n).pow(2 * m as u32) * BigInt::from(d),
    );

    let (mut bits, tries) = match precision_bits {
        Some(b) => (b.max(64), 1),
        None => (default_precision(n, m), MAX_ESCALATIONS + 1),
    };
    let mut found = None;
    for _ in 0..tries {
        if let Some(a) = attempt(&f, &quotient, n, d, &bound, bits) {
            found = Some(a);
            break;
        }
        bits *= 2;
    }
    let Some(a) = found else {
        return Err(Error::PrecisionInsufficient { bits: bits / 2 });
    };
    let Attempt {
        evals,
        best,
        value_ok,
        avg,
        avg_ok,
    } = a;
    let bits = avg.value.bits();

    let q = ch.q();
    let points: Vec<EvalPoint> = evals
        .iter()
        .enumerate()
        .map(|(i, (z, fv, _))| {
            let zc = z.to_complex64();
            let cf = channel_factor(zc, q, n);
            EvalPoint {
                index: i as u64 + 1,
                z: zc.into(),
                value: fv.value.abs_f64(),
                error_bound: fv.error_bound(),
                channel_factor: cf,
                channel_ok: cf <= 2.0,
            }
        })
        .collect();
    let witness = &points[best];
    let channel_factor = witness.channel_factor;
    Ok(Certificate {
        n,
        separating_power: m,
        divisibility_order: order,
        quotient_l1: quotient.l1_norm(),
        quotient,
        points_on_circle: d,
        witness_index: witness.index,
        witness_z: evals[best].0.clone(),
        witness_value: witness.value,
        witness_error: witness.error_bound,
        bound: 1.0 / (n as f64).powi(2 * m as i32) / d as f64,
        bound_exact: bound,
        channel_factor,
        value_ok,
        valid: value_ok && channel_factor <= 2.0,
        avg_over_d: avg.value.abs_f64(),
        avg_at_least_one: avg_ok,
        precision_bits: bits,
        points,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct GapSearch {
    pub z1: Complex64Json,
    /// Common value of `z_2 = .. = z_l` attaining the largest gap.
    pub z_best: f64,
    pub gap: f64,
    /// `|(z_best - q)/(1 - q)|^n`.
    pub channel_factor: f64,
    pub grid: Vec<(f64, f64)>,
}

/// Uniform grid on `[max(2q - 1, 0), 1]`, both endpoints included.
pub fn gap_grid(q: f64, grid_size: usize) -> Vec<f64> {
    let lo = (2.0 * q - 1.0).max(0.0);
    match grid_size {
        0 => Vec::new(),
        1 => vec![1.0],
        g => (0..g)
            .map(|i| if i + 1 == g { 1.0 } else { lo + (1.0 - lo) * i as f64 / (g - 1) as f64 })
            .collect(),
    }
}

/// Fixes `z_1` at the certificate's witness and scans a real common value
/// for the remaining variables, reporting the largest measured
/// `|f_{x,w}(z_1, z, .., z) - f_{y,w}(z_1, z, .., z)|`.
pub fn lemma7_gap_search(
    x: &[u8],
    y: &[u8],
    w: &[u8],
    cert: &Certificate,
    ch: &ChannelParam,
    grid_size: usize,
) -> Result<GapSearch> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if w.is_empty() || grid_size == 0 {
        return Err(Error::InvalidConfig("pattern and grid must be non-empty".into()));
    }
    let bits = cert.precision_bits;
    let z1 = cert.witness_z.with_bits(bits);
    let q = ch.q();
    let grid = gap_grid(q, grid_size);
    let gaps: Vec<(f64, f64)> = grid
        .par_iter()
        .map(|&z| {
            let zf = FixedComplex::from_f64(z, 0.0, bits);
            let mut vars = vec![zf; w.len()];
            vars[0] = z1.clone();
            let diff = &f_multibit(x, w, &vars) - &f_multibit(y, w, &vars);
            (z, diff.abs_f64())
        })
        .collect();
    let mut best = 0;
    for (i, g) in gaps.iter().enumerate() {
        if g.1 > gaps[best].1 {
            best = i;
        }
    }
    let z_best = gaps[best].0;
    Ok(GapSearch {
        z1: cert.witness().into(),
        z_best,
        gap: gaps[best].1,
        channel_factor: channel_factor(Complex64::new(z_best, 0.0), q, x.len()),
        grid: gaps,
    })
}
