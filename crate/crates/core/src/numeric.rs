//! Scalar arithmetic shared by every other module.
//!
//! All reals are MPFR floats ([`rug::Float`]) at a working precision derived
//! from a decimal digit count. Inputs may be decimal strings, rationals
//! `a/c`, or quadratic irrationals `(a+b*sqrt(d))/c`; the source form is kept
//! so a value can be re-evaluated at a higher precision.

use std::cmp::Ordering;
use std::fmt;

use rug::ops::Pow;
use rug::{Assign, Float, Integer, Rational};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Decimal working precision. Arithmetic runs with the same number of guard
/// digits again, so the binary precision covers `2 * digits` decimal digits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Precision {
    digits: u32,
}

impl Precision {
    pub const MIN_DIGITS: u32 = 30;
    pub const DEFAULT_DIGITS: u32 = 50;

    pub fn new(digits: u32) -> Result<Self> {
        if digits < Self::MIN_DIGITS {
            return Err(Error::Validation(format!(
                "precision must be at least {} digits, got {digits}",
                Self::MIN_DIGITS
            )));
        }
        Ok(Precision { digits })
    }

    pub fn digits(&self) -> u32 {
        self.digits
    }

    /// Binary precision of every working float.
    pub fn bits(&self) -> u32 {
        // log2(10) = 3.3219...
        ((2 * self.digits) as f64 * std::f64::consts::LOG2_10).ceil() as u32
    }

    /// `10^(-digits/2)`, the tolerance for every equality-style comparison.
    pub fn tolerance(&self) -> Float {
        let e = self.digits.div_ceil(2);
        let mut t = Float::with_val(self.bits(), Float::u_pow_u(10, e));
        t.recip_mut();
        t
    }

    pub fn doubled(&self) -> Self {
        Precision {
            digits: self.digits * 2,
        }
    }

    /// A float at working precision.
    pub fn float<T>(&self, value: T) -> Float
    where
        Float: Assign<T>,
    {
        Float::with_val(self.bits(), value)
    }

    pub fn zero(&self) -> Float {
        Float::new(self.bits())
    }

    pub fn pi(&self) -> Float {
        Float::with_val(self.bits(), rug::float::Constant::Pi)
    }
}

impl Default for Precision {
    fn default() -> Self {
        Precision {
            digits: Self::DEFAULT_DIGITS,
        }
    }
}

/// `(a + b*sqrt(d)) / c` with integer coefficients, `c != 0`, `d >= 0`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QuadraticIrrational {
    pub a: Integer,
    pub b: Integer,
    pub c: Integer,
    pub d: Integer,
}

impl QuadraticIrrational {
    pub fn new(a: Integer, b: Integer, c: Integer, d: Integer) -> Result<Self> {
        if c == 0 {
            return Err(Error::Domain("quadratic irrational with zero denominator".into()));
        }
        if d < 0 {
            return Err(Error::Domain("quadratic irrational with negative radicand".into()));
        }
        let mut q = QuadraticIrrational { a, b, c, d };
        q.normalize();
        Ok(q)
    }

    pub fn rational(p: Integer, s: Integer) -> Result<Self> {
        Self::new(p, Integer::new(), s, Integer::new())
    }

    /// The golden ratio `(1+sqrt(5))/2`.
    pub fn golden_ratio() -> Self {
        Self::new(1.into(), 1.into(), 2.into(), 5.into()).expect("valid literal")
    }

    fn normalize(&mut self) {
        if self.b == 0 || self.d == 0 {
            self.b = Integer::new();
            self.d = Integer::new();
        } else if self.d.is_perfect_square() {
            let root = self.d.clone().sqrt();
            self.a += &self.b * root;
            self.b = Integer::new();
            self.d = Integer::new();
        }
        if self.c < 0 {
            self.a = -self.a.clone();
            self.b = -self.b.clone();
            self.c = -self.c.clone();
        }
        let g = self.a.clone().gcd(&self.b).gcd(&self.c);
        if g > 1 {
            self.a /= &g;
            self.b /= &g;
            self.c /= &g;
        }
    }

    pub fn is_rational(&self) -> bool {
        self.b == 0
    }

    pub fn exact(&self) -> Option<Rational> {
        self.is_rational()
            .then(|| Rational::from((self.a.clone(), self.c.clone())))
    }

    pub fn eval(&self, prec: &Precision) -> Float {
        let bits = prec.bits();
        let mut root = Float::with_val(bits, &self.d);
        root.sqrt_mut();
        let mut num = Float::with_val(bits, &self.b * &root);
        num += &self.a;
        num / &self.c
    }

    /// Sum of two values sharing a radicand; `None` when the radicands differ.
    pub fn checked_add(&self, other: &Self) -> Option<Self> {
        let d = if self.b == 0 {
            other.d.clone()
        } else if other.b == 0 || self.d == other.d {
            self.d.clone()
        } else {
            return None;
        };
        let a = Integer::from(&self.a * &other.c) + Integer::from(&other.a * &self.c);
        let b = Integer::from(&self.b * &other.c) + Integer::from(&other.b * &self.c);
        let c = Integer::from(&self.c * &other.c);
        Self::new(a, b, c, d).ok()
    }

    pub fn mul_int(&self, n: &Integer) -> Self {
        let mut q = QuadraticIrrational {
            a: Integer::from(&self.a * n),
            b: Integer::from(&self.b * n),
            c: self.c.clone(),
            d: self.d.clone(),
        };
        q.normalize();
        q
    }
}

impl fmt::Display for QuadraticIrrational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_rational() {
            if self.c == 1 {
                write!(f, "{}", self.a)
            } else {
                write!(f, "{}/{}", self.a, self.c)
            }
        } else {
            write!(f, "({}+{}*sqrt({}))/{}", self.a, self.b, self.d, self.c)
        }
    }
}

/// Where a [`RealScalar`] came from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ScalarSource {
    Decimal(String),
    Quadratic(QuadraticIrrational),
}

/// A real number at working precision together with its exact source.
#[derive(Clone, Debug)]
pub struct RealScalar {
    source: ScalarSource,
    value: Float,
}

impl PartialEq for RealScalar {
    fn eq(&self, other: &Self) -> bool {
        self.source == other.source && self.value == other.value
    }
}

impl RealScalar {
    /// Accepts a decimal literal (`-0.25`, `3`, `1.5e-3`), a fraction `p/s`,
    /// a quadratic literal `(a+b*sqrt(d))/c`, `sqrt(d)`, or `phi`.
    pub fn parse(input: &str, prec: &Precision) -> Result<Self> {
        let s: String = input.chars().filter(|c| !c.is_whitespace()).collect();
        if s.is_empty() {
            return Err(Error::parse(input, "empty literal"));
        }
        if s.eq_ignore_ascii_case("phi") {
            return Ok(Self::from_quadratic(QuadraticIrrational::golden_ratio(), prec));
        }
        if s.contains("sqrt") {
            return parse_quadratic(&s)
                .map(|q| Self::from_quadratic(q, prec))
                .ok_or_else(|| Error::parse(input, "expected (a+b*sqrt(d))/c"));
        }
        if let Some((p, q)) = s.split_once('/') {
            let p: Integer = p.parse().map_err(|_| Error::parse(input, "bad numerator"))?;
            let q: Integer = q.parse().map_err(|_| Error::parse(input, "bad denominator"))?;
            let quad = QuadraticIrrational::rational(p, q)?;
            return Ok(Self::from_quadratic(quad, prec));
        }
        parse_decimal_rational(&s).ok_or_else(|| Error::parse(input, "not a decimal literal"))?;
        let value = Float::with_val(
            prec.bits(),
            Float::parse(&s).map_err(|e| Error::parse(input, e.to_string()))?,
        );
        Ok(RealScalar {
            source: ScalarSource::Decimal(s),
            value,
        })
    }

    pub fn from_quadratic(q: QuadraticIrrational, prec: &Precision) -> Self {
        let value = q.eval(prec);
        RealScalar {
            source: ScalarSource::Quadratic(q),
            value,
        }
    }

    pub fn from_integer(n: i64, prec: &Precision) -> Self {
        Self::from_quadratic(
            QuadraticIrrational::rational(n.into(), 1.into()).expect("nonzero denominator"),
            prec,
        )
    }

    /// Wraps a computed float; its source becomes the exact binary value
    /// written out in decimal.
    pub fn from_float(value: Float) -> Self {
        RealScalar {
            source: ScalarSource::Decimal(fmt_real(&value)),
            value,
        }
    }

    pub fn value(&self) -> &Float {
        &self.value
    }

    pub fn source(&self) -> &ScalarSource {
        &self.source
    }

    /// Re-evaluates the source at another precision.
    pub fn at_precision(&self, prec: &Precision) -> Self {
        match &self.source {
            ScalarSource::Quadratic(q) => Self::from_quadratic(q.clone(), prec),
            ScalarSource::Decimal(s) => RealScalar {
                source: self.source.clone(),
                value: Float::with_val(
                    prec.bits(),
                    Float::parse(s).expect("validated on construction"),
                ),
            },
        }
    }

    /// Exact rational value when the source is rational.
    pub fn exact(&self) -> Option<Rational> {
        match &self.source {
            ScalarSource::Quadratic(q) => q.exact(),
            ScalarSource::Decimal(s) => parse_decimal_rational(s),
        }
    }

    pub fn literal(&self) -> String {
        match &self.source {
            ScalarSource::Decimal(s) => s.clone(),
            ScalarSource::Quadratic(q) => q.to_string(),
        }
    }
}

impl fmt::Display for RealScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.literal())
    }
}

fn parse_quadratic(s: &str) -> Option<QuadraticIrrational> {
    if let Some(inner) = s.strip_prefix("sqrt(").and_then(|r| r.strip_suffix(')')) {
        let d: Integer = inner.parse().ok()?;
        return QuadraticIrrational::new(Integer::new(), 1.into(), 1.into(), d).ok();
    }
    // (a+b*sqrt(d))/c, with '+' possibly followed by '-'.
    let (num, den) = s.rsplit_once(")/")?;
    let num = num.strip_prefix('(')?;
    let c: Integer = den.parse().ok()?;
    let sqrt_pos = num.find("*sqrt(")?;
    let (head, tail) = num.split_at(sqrt_pos);
    let d: Integer = tail.strip_prefix("*sqrt(")?.strip_suffix(')')?.parse().ok()?;
    // split head "a+b" / "a-b" / "a+-b" at the last sign that is not leading
    let bytes = head.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&i| (bytes[i] == b'+' || bytes[i] == b'-') && bytes[i - 1] != b'+' && bytes[i - 1] != b'-')?;
    let a: Integer = head[..split].parse().ok()?;
    let b_str = &head[split..];
    let b: Integer = b_str.strip_prefix('+').unwrap_or(b_str).parse().ok()?;
    QuadraticIrrational::new(a, b, c, d).ok()
}

/// Exact value of a decimal literal (optional sign, digits, '.', exponent).
fn parse_decimal_rational(s: &str) -> Option<Rational> {
    let (mantissa, exp) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i32>().ok()?),
        None => (s, 0),
    };
    let (neg, body) = match mantissa.as_bytes().first()? {
        b'-' => (true, &mantissa[1..]),
        b'+' => (false, &mantissa[1..]),
        _ => (false, mantissa),
    };
    let (int_part, frac_part) = body.split_once('.').unwrap_or((body, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.bytes().chain(frac_part.bytes()).all(|b| b.is_ascii_digit()) {
        return None;
    }
    let digits = format!("{int_part}{frac_part}");
    let mut num: Integer = digits.parse().ok()?;
    if neg {
        num = -num;
    }
    let scale = exp - frac_part.len() as i32;
    let ten = Integer::from(10);
    Some(if scale >= 0 {
        Rational::from(num * ten.pow(scale as u32))
    } else {
        Rational::from((num, ten.pow((-scale) as u32)))
    })
}

/// Decimal rendering with every significant digit of the binary value.
pub fn fmt_real(x: &Float) -> String {
    x.to_string_radix(10, None)
}

/// Serde adapter writing a float as its full decimal expansion.
pub fn serialize_float<S: serde::Serializer>(x: &Float, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&fmt_real(x))
}

pub fn serialize_floats<S: serde::Serializer>(xs: &[Float], s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(xs.iter().map(fmt_real))
}

/// Distance to the nearest integer, `||x||`, in `[0, 1/2]`.
pub fn dist_nearest_int(x: &Float) -> Float {
    let mut out = Float::new(x.prec());
    dist_nearest_int_into(&mut out, x);
    out
}

/// Allocation-free variant of [`dist_nearest_int`] for hot loops.
pub fn dist_nearest_int_into(out: &mut Float, x: &Float) {
    out.assign(x.round_ref());
    *out -= x;
    out.abs_mut();
}

/// `max_i |q_i|`.
pub fn sup_norm(q: &[i64]) -> u64 {
    q.iter().map(|v| v.unsigned_abs()).max().unwrap_or(0)
}

/// `base^exponent` for `base >= 0`; `0^e` requires `e > 0`.
pub fn weighted_power(base: &Float, exponent: &Float) -> Result<Float> {
    if base.is_nan() || exponent.is_nan() {
        return Err(Error::Domain("NaN in weighted_power".into()));
    }
    if *base < 0 {
        return Err(Error::Domain(format!(
            "negative base {} in weighted_power",
            fmt_real(base)
        )));
    }
    if base.is_zero() {
        if *exponent <= 0 {
            return Err(Error::Domain("zero base with nonpositive exponent".into()));
        }
        return Ok(Float::new(base.prec()));
    }
    Ok(Float::with_val(base.prec().max(exponent.prec()), base.pow(exponent)))
}

/// `floor(x + tol)` as an `i64`; the tolerance keeps closed-box bounds such
/// as `8^(1/3) = 2` from dropping to 1 through rounding.
pub fn floor_tol(x: &Float, tol: &Float) -> Result<i64> {
    let mut y = Float::with_val(x.prec(), x + tol);
    y.floor_mut();
    y.to_integer()
        .and_then(|i| i.to_i64())
        .ok_or_else(|| Error::Domain(format!("{} does not fit a 64-bit integer", fmt_real(x))))
}

/// Comparison with tolerance: `Less` only when `a < b - tol`.
pub fn cmp_tol(a: &Float, b: &Float, tol: &Float) -> Ordering {
    let diff = Float::with_val(a.prec().max(b.prec()), a - b);
    if diff > *tol {
        Ordering::Greater
    } else if diff < -tol.clone() {
        Ordering::Less
    } else {
        Ordering::Equal
    }
}

/// Positive weights `k_1..k_n` summing to one, plus the column count `m`.
#[derive(Clone, Debug, PartialEq)]
pub struct Weights {
    k: Vec<RealScalar>,
    m: usize,
}

impl Weights {
    pub fn new(k: Vec<RealScalar>, m: usize, prec: &Precision) -> Result<Self> {
        if k.is_empty() {
            return Err(Error::Validation("weights need n >= 1".into()));
        }
        if m == 0 {
            return Err(Error::Validation("weights need m >= 1".into()));
        }
        for (i, ki) in k.iter().enumerate() {
            if *ki.value() <= 0 {
                return Err(Error::Validation(format!("weight k_{} = {ki} is not positive", i + 1)));
            }
        }
        let mut sum = prec.zero();
        for ki in &k {
            sum += ki.value();
        }
        sum -= 1;
        sum.abs_mut();
        if sum > prec.tolerance() {
            return Err(Error::Validation(format!(
                "weights must sum to 1 (off by {})",
                sum.to_string_radix(10, Some(6))
            )));
        }
        Ok(Weights { k, m })
    }

    pub fn parse<S: AsRef<str>>(literals: &[S], m: usize, prec: &Precision) -> Result<Self> {
        let k = literals
            .iter()
            .map(|s| RealScalar::parse(s.as_ref(), prec))
            .collect::<Result<Vec<_>>>()?;
        Self::new(k, m, prec)
    }

    pub fn n(&self) -> usize {
        self.k.len()
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn k(&self, i: usize) -> &Float {
        self.k[i].value()
    }

    pub fn scalars(&self) -> &[RealScalar] {
        &self.k
    }

    /// `m * k_i`, the exponent of `|q|` in the quality functionals.
    pub fn exponent(&self, i: usize) -> Float {
        Float::with_val(self.k(i).prec(), self.k(i) * self.m as u32)
    }

    /// `1 / (m * k_i)`, the exponent used on the dual side.
    pub fn dual_exponent(&self, i: usize) -> Float {
        let mut e = self.exponent(i);
        e.recip_mut();
        e
    }

    pub fn is_sorted_desc(&self) -> bool {
        self.k.windows(2).all(|w| w[0].value() >= w[1].value())
    }

    /// Index of the largest weight (first on ties).
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for i in 1..self.n() {
            if self.k(i) > self.k(best) {
                best = i;
            }
        }
        best
    }

    pub fn at_precision(&self, prec: &Precision) -> Self {
        Weights {
            k: self.k.iter().map(|s| s.at_precision(prec)).collect(),
            m: self.m,
        }
    }

    /// Weights reordered so that `out[i] = self[perm[i]]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        Weights {
            k: perm.iter().map(|&p| self.k[p].clone()).collect(),
            m: self.m,
        }
    }

    pub fn literals(&self) -> Vec<String> {
        self.k.iter().map(RealScalar::literal).collect()
    }
}
