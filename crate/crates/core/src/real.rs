//! Scalars: exact rationals, or dyadic approximations carrying their precision.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::str::FromStr;

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub const DEFAULT_PREC: u32 = 192;

/// A real scalar.
///
/// The stored value is always a rational. When `exact` is false the value is
/// a dyadic rounding of some real number, accurate to `2^-prec`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Real {
    value: BigRational,
    exact: bool,
    prec: u32,
}

impl Real {
    pub fn exact(value: BigRational) -> Self {
        Real { value, exact: true, prec: DEFAULT_PREC }
    }

    pub fn approx(value: BigRational, prec: u32) -> Self {
        Real { value, exact: false, prec }
    }

    pub fn from_int<T: Into<BigInt>>(n: T) -> Self {
        Real::exact(BigRational::from_integer(n.into()))
    }

    pub fn ratio(p: i64, q: i64) -> Self {
        Real::exact(BigRational::new(p.into(), q.into()))
    }

    pub fn zero() -> Self {
        Real::from_int(0)
    }

    pub fn one() -> Self {
        Real::from_int(1)
    }

    /// Exact rational nearest to an `f64` (every finite double is dyadic).
    pub fn from_f64(x: f64) -> Self {
        Real::exact(BigRational::from_float(x).expect("finite float"))
    }

    /// `sqrt(m)/q` rounded to `prec` fractional bits; exact when `m` is a square.
    pub fn sqrt_over(m: &BigUint, q: &BigUint, prec: u32) -> Result<Self> {
        if q.is_zero() {
            return Err(Error::InvalidInput("zero denominator".into()));
        }
        let r = m.sqrt();
        if &r * &r == *m {
            return Ok(Real::exact(BigRational::new(r.into(), q.clone().into())));
        }
        // floor(sqrt(m / q^2) * 2^prec) == isqrt(floor(m * 4^prec / q^2))
        let scaled = (m << (2 * prec as usize)) / (q * q);
        let fl = scaled.sqrt();
        // round to nearest: compare with the midpoint (fl + 1/2)^2 = fl^2 + fl + 1/4
        let fl4 = BigUint::from(4u32) * (&fl * &fl + &fl) + BigUint::one();
        let lhs = (m << (2 * prec as usize + 2)) / (q * q);
        let num = if lhs >= fl4 { fl + 1u32 } else { fl };
        let den = BigUint::one() << prec as usize;
        Ok(Real::approx(BigRational::new(num.into(), den.into()), prec))
    }

    pub fn value(&self) -> &BigRational {
        &self.value
    }

    pub fn into_value(self) -> BigRational {
        self.value
    }

    pub fn is_exact(&self) -> bool {
        self.exact
    }

    pub fn prec(&self) -> u32 {
        self.prec
    }

    /// Bound on `|value - true value|`.
    pub fn error_bound(&self) -> BigRational {
        if self.exact {
            BigRational::zero()
        } else {
            BigRational::new(BigInt::one(), BigInt::one() << self.prec as usize)
        }
    }

    pub fn to_f64(&self) -> f64 {
        rat_to_f64(&self.value)
    }

    pub fn is_zero(&self) -> bool {
        self.value.is_zero()
    }

    pub fn abs(&self) -> Real {
        self.with_value(self.value.abs())
    }

    pub fn recip(&self) -> Real {
        let v = self.value.recip();
        // e / a^2, plus a bit for the second-order term
        let le = self.log_err() - 2.0 * mag(&self.value) + 1.0;
        self.tagged(v, le)
    }

    pub fn floor(&self) -> BigInt {
        self.value.floor().to_integer()
    }

    /// Distance to the nearest integer.
    pub fn frac_dist(&self) -> Real {
        self.with_value(frac_dist(&self.value))
    }

    pub fn pow(&self, e: u32) -> Real {
        let mut acc = BigRational::one();
        for _ in 0..e {
            acc *= &self.value;
        }
        if e == 0 {
            return Real::exact(acc);
        }
        let le = self.log_err() + (e as f64).log2() + (e - 1) as f64 * mag(&self.value) + 1.0;
        self.tagged(acc, le)
    }

    fn log_err(&self) -> f64 {
        if self.exact {
            f64::NEG_INFINITY
        } else {
            -(self.prec as f64)
        }
    }

    /// Inexact-preserving constructor from a log2 error bound.
    fn tagged(&self, value: BigRational, log_err: f64) -> Real {
        if self.exact {
            return Real::exact(value);
        }
        Real::approx(value, prec_for(log_err))
    }

    pub(crate) fn with_value(&self, value: BigRational) -> Real {
        Real { value, exact: self.exact, prec: self.prec }
    }

    /// Result of a binary operation, with a first-order error bound.
    fn combine(&self, other: &Real, value: BigRational, op: char) -> Real {
        if self.exact && other.exact {
            return Real::exact(value);
        }
        let (la, lb) = (self.log_err(), other.log_err());
        let le = match op {
            '+' | '-' => lse(la, lb),
            '*' => lse(lse(la + mag(&other.value), lb + mag(&self.value)), la + lb),
            _ => lse(la, lb + mag(&value)) - mag(&other.value) + 1.0,
        };
        Real::approx(value, prec_for(le))
    }

    pub fn parse(s: &str) -> Result<Real> {
        Real::parse_with_prec(s, DEFAULT_PREC)
    }

    /// Grammar: optional sign, then one of a decimal (with optional exponent),
    /// `p/q`, `sqrt(m)`, `sqrt(m)/q`. A trailing `~P` marks an inexact value at
    /// precision `P` (this is how inexact values are written back out).
    pub fn parse_with_prec(s: &str, prec: u32) -> Result<Real> {
        let err = |msg: &str| Error::Parse { field: format!("'{s}'"), msg: msg.to_string() };
        let t = s.trim();
        if t.is_empty() {
            return Err(err("empty"));
        }
        if let Some((body, p)) = t.split_once('~') {
            let p: u32 = p.trim().parse().map_err(|_| err("bad precision suffix"))?;
            let v = Real::parse_with_prec(body, prec)?;
            return Ok(Real::approx(v.value, p));
        }
        let (neg, body) = match t.as_bytes()[0] {
            b'-' => (true, &t[1..]),
            b'+' => (false, &t[1..]),
            _ => (false, t),
        };
        let body = body.trim();
        let v = if let Some(rest) = body.strip_prefix("sqrt(") {
            let (m, tail) = rest.split_once(')').ok_or_else(|| err("unclosed sqrt("))?;
            let m: BigUint = m.trim().parse().map_err(|_| err("bad sqrt argument"))?;
            let q: BigUint = match tail.trim() {
                "" => BigUint::one(),
                tl => {
                    let q = tl.strip_prefix('/').ok_or_else(|| err("expected /q after sqrt"))?;
                    q.trim().parse().map_err(|_| err("bad denominator"))?
                }
            };
            Real::sqrt_over(&m, &q, prec).map_err(|_| err("zero denominator"))?
        } else if let Some((p, q)) = body.split_once('/') {
            let p: BigInt = p.trim().parse().map_err(|_| err("bad numerator"))?;
            let q: BigInt = q.trim().parse().map_err(|_| err("bad denominator"))?;
            if q.is_zero() {
                return Err(err("zero denominator"));
            }
            Real::exact(BigRational::new(p, q))
        } else {
            Real::exact(parse_decimal(body).ok_or_else(|| err("not a number"))?)
        };
        Ok(if neg { -v } else { v })
    }
}

fn parse_decimal(s: &str) -> Option<BigRational> {
    let (mant, exp) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i32>().ok()?),
        None => (s, 0),
    };
    let (ip, fp) = match mant.split_once('.') {
        Some((a, b)) => (a, b),
        None => (mant, ""),
    };
    if ip.is_empty() && fp.is_empty() {
        return None;
    }
    if !ip.chars().chain(fp.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let digits: BigInt = format!("{ip}{fp}").parse().ok()?;
    let scale = exp - fp.len() as i32;
    let ten = BigInt::from(10);
    Some(if scale >= 0 {
        BigRational::from_integer(digits * num_traits::pow(ten, scale as usize))
    } else {
        BigRational::new(digits, num_traits::pow(ten, (-scale) as usize))
    })
}

impl FromStr for Real {
    type Err = Error;
    fn from_str(s: &str) -> Result<Real> {
        Real::parse(s)
    }
}

impl fmt::Display for Real {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let v = &self.value;
        if v.is_integer() {
            write!(f, "{}", v.numer())?;
        } else {
            write!(f, "{}/{}", v.numer(), v.denom())?;
        }
        if !self.exact {
            write!(f, "~{}", self.prec)?;
        }
        Ok(())
    }
}

impl Serialize for Real {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Real {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Real::parse(&s).map_err(serde::de::Error::custom)
    }
}

impl PartialOrd for Real {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.value.cmp(&other.value))
    }
}

macro_rules! binop {
    ($tr:ident, $m:ident, $op:tt) => {
        impl<'a> $tr<&'a Real> for &'a Real {
            type Output = Real;
            fn $m(self, o: &'a Real) -> Real {
                self.combine(o, &self.value $op &o.value, stringify!($op).chars().next().unwrap())
            }
        }
        impl $tr<Real> for Real {
            type Output = Real;
            fn $m(self, o: Real) -> Real {
                (&self).$m(&o)
            }
        }
    };
}
binop!(Add, add, +);
binop!(Sub, sub, -);
binop!(Mul, mul, *);
binop!(Div, div, /);

impl Neg for Real {
    type Output = Real;
    fn neg(self) -> Real {
        Real { value: -self.value, ..self }
    }
}

impl Neg for &Real {
    type Output = Real;
    fn neg(self) -> Real {
        self.with_value(-self.value.clone())
    }
}

// ---------------------------------------------------------------------------
// rational helpers

pub fn rat(p: i64, q: i64) -> BigRational {
    BigRational::new(p.into(), q.into())
}

pub fn rat_int<T: Into<BigInt>>(n: T) -> BigRational {
    BigRational::from_integer(n.into())
}

/// `t - round(t)` in absolute value, ties irrelevant (both give 1/2).
pub fn frac_dist(t: &BigRational) -> BigRational {
    let f = t - t.floor();
    let c = BigRational::one() - &f;
    if f <= c {
        f
    } else {
        c
    }
}

/// Representative of `t mod 1` in `[0, 1)`.
pub fn frac(t: &BigRational) -> BigRational {
    t - t.floor()
}

/// Representative of `t mod 1` in `(-1/2, 1/2]`.
pub fn centered_frac(t: &BigRational) -> BigRational {
    let f = frac(t);
    if f > rat(1, 2) {
        f - BigRational::one()
    } else {
        f
    }
}

pub fn pow2(e: i64) -> BigRational {
    if e >= 0 {
        rat_int(BigInt::one() << e as usize)
    } else {
        BigRational::new(BigInt::one(), BigInt::one() << (-e) as usize)
    }
}

/// Nearest double to a rational, robust to huge numerators and denominators.
pub fn rat_to_f64(r: &BigRational) -> f64 {
    if r.is_zero() {
        return 0.0;
    }
    let n = r.numer();
    let d = r.denom();
    let nb = n.bits() as i64;
    let db = d.bits() as i64;
    // scale so that the integer quotient carries ~64 significant bits
    let shift = 64 - (nb - db);
    let q = if shift >= 0 { (n << shift as usize) / d } else { n / (d << (-shift) as usize) };
    let mag = q.magnitude().to_f64().unwrap_or(f64::INFINITY);
    let e = (-shift).clamp(-4000, 4000) as i32;
    let v = mag * 2f64.powi(e / 2) * 2f64.powi(e - e / 2);
    if q.sign() == Sign::Minus {
        -v
    } else {
        v
    }
}

/// `log2 |r|`, or `-inf` for zero.
fn mag(r: &BigRational) -> f64 {
    if r.is_zero() {
        f64::NEG_INFINITY
    } else {
        rat_log2(r)
    }
}

/// `log2(2^a + 2^b)`, rounded up.
fn lse(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY {
        hi
    } else {
        hi + (1.0 + (lo - hi).exp2()).log2()
    }
}

/// Largest `p` with `2^-p >= 2^log_err`, clamped to `[0, 1 << 20]`.
fn prec_for(log_err: f64) -> u32 {
    if log_err == f64::NEG_INFINITY {
        return 1 << 20;
    }
    (-log_err).floor().clamp(0.0, (1u32 << 20) as f64) as u32
}

/// `floor(log2 |r|)` style magnitude, as `f64` log2.
pub fn rat_log2(r: &BigRational) -> f64 {
    let n = r.numer().magnitude();
    let d = r.denom().magnitude();
    let nb = n.bits() as i64;
    let db = d.bits() as i64;
    let sn = (nb - 60).max(0);
    let sd = (db - 60).max(0);
    let nf = (n >> sn as usize).to_f64().unwrap();
    let df = (d >> sd as usize).to_f64().unwrap();
    nf.log2() - df.log2() + (sn - sd) as f64
}

pub fn round_rat(r: &BigRational) -> BigInt {
    (r + rat(1, 2)).floor().to_integer()
}

/// Round to a dyadic with `bits` fractional bits (nearest, ties up).
pub fn round_dyadic(r: &BigRational, bits: u32) -> BigRational {
    let s = BigInt::one() << bits as usize;
    let scaled = r * BigRational::from_integer(s.clone());
    BigRational::new(round_rat(&scaled), s)
}

pub fn lcm_denoms<'a, I: IntoIterator<Item = &'a BigRational>>(it: I) -> BigInt {
    it.into_iter().fold(BigInt::one(), |acc, r| acc.lcm(r.denom()))
}
