//! Fixed-point `e(t) = exp(2 pi i t)` at arbitrary precision, plus fast
//! double-precision variants.
//!
//! All variants reduce `t` exactly to `(-1/2, 1/2]` and then to an angle of at
//! most `pi/4`, so `e(0) = 1`, `e(1/2) = -1` and `e(-t) = conj e(t)` hold exactly.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::real::centered_frac;

/// Fixed-point trigonometry with `bits` fractional bits.
#[derive(Clone, Debug)]
pub struct Trig {
    bits: u32,
    pi: BigInt,
}

fn atan_inv(m: u32, bits: u32) -> BigInt {
    let one = BigInt::one() << bits as usize;
    let m = BigInt::from(m);
    let m2 = &m * &m;
    let mut term = &one / &m;
    let mut sum = BigInt::zero();
    let mut n = 0u32;
    while !term.is_zero() {
        let t = &term / BigInt::from(2 * n + 1);
        if n % 2 == 0 {
            sum += t;
        } else {
            sum -= t;
        }
        term /= &m2;
        n += 1;
    }
    sum
}

impl Trig {
    pub fn new(bits: u32) -> Trig {
        let g = bits + 16;
        let pi = (BigInt::from(16) * atan_inv(5, g) - BigInt::from(4) * atan_inv(239, g)) >> 16usize;
        Trig { bits, pi }
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn one(&self) -> BigInt {
        BigInt::one() << self.bits as usize
    }

    /// `(cos x, sin x)` for fixed-point `0 <= x <= pi/4`.
    fn cos_sin_small(&self, x: &BigInt) -> (BigInt, BigInt) {
        let b = self.bits as usize;
        let x2 = (x * x) >> b;
        let mut c = self.one();
        let mut term = self.one();
        let mut k = 0u64;
        loop {
            term = -((&term * &x2) >> b) / BigInt::from((k + 1) * (k + 2));
            if term.is_zero() {
                break;
            }
            c += &term;
            k += 2;
        }
        let mut s = x.clone();
        let mut term = x.clone();
        let mut k = 1u64;
        loop {
            term = -((&term * &x2) >> b) / BigInt::from((k + 1) * (k + 2));
            if term.is_zero() {
                break;
            }
            s += &term;
            k += 2;
        }
        (c, s)
    }

    /// `e(s)` for fixed-point `u = floor(s * 2^bits)` with `0 <= s <= 1/2`.
    fn cis_half(&self, u: &BigInt) -> (BigInt, BigInt) {
        let b = self.bits as usize;
        let one = self.one();
        let w4 = u << 2usize;
        let qd: BigInt = &w4 >> b;
        let wf = w4 - (&qd << b);
        let half_pi = &self.pi >> 1usize;
        let (c, s) = if wf.is_zero() {
            (one.clone(), BigInt::zero())
        } else if wf <= (&one >> 1usize) {
            self.cos_sin_small(&((&half_pi * &wf) >> b))
        } else {
            let (c2, s2) = self.cos_sin_small(&((&half_pi * (&one - &wf)) >> b));
            (s2, c2)
        };
        match qd.to_u32().unwrap_or(2) {
            0 => (c, s),
            1 => (-s, c),
            _ => (-c, -s),
        }
    }

    /// Fixed-point `(cos 2 pi t, sin 2 pi t)`; the reduction of `t` is exact.
    pub fn cis_turns(&self, t: &BigRational) -> (BigInt, BigInt) {
        let s = centered_frac(t);
        let neg = s.is_negative();
        let a = s.abs();
        let u = (a.numer() << self.bits as usize).div_floor(a.denom());
        let (c, sn) = self.cis_half(&u);
        if neg {
            (c, -sn)
        } else {
            (c, sn)
        }
    }
}

/// Double-precision `e(t)` with the same exact reduction.
pub fn cis_turns_f64(t: f64) -> (f64, f64) {
    let s = t - t.round();
    // t.round() rounds half away from zero; map -1/2 to +1/2
    let s = if s == -0.5 { 0.5 } else { s };
    let neg = s < 0.0;
    let a = s.abs();
    let w = 4.0 * a;
    let qd = w.floor();
    let wf = w - qd;
    let hp = std::f64::consts::FRAC_PI_2;
    let (c, sn) = if wf == 0.0 {
        (1.0, 0.0)
    } else if wf <= 0.5 {
        let (s1, c1) = (hp * wf).sin_cos();
        (c1, s1)
    } else {
        let (s1, c1) = (hp * (1.0 - wf)).sin_cos();
        (s1, c1)
    };
    let (c, sn) = match qd as i32 {
        0 => (c, sn),
        1 => (-sn, c),
        _ => (-c, -sn),
    };
    if neg {
        (c, -sn)
    } else {
        (c, sn)
    }
}

const TABLE_BITS: u32 = 12;

/// Table-driven `e(t)` for phases on the 2^-64 grid; absolute error ~1e-13.
pub struct FastCis {
    table: Vec<(f64, f64)>,
}

impl Default for FastCis {
    fn default() -> Self {
        Self::new()
    }
}

impl FastCis {
    pub fn new() -> FastCis {
        let n = 1usize << TABLE_BITS;
        let table = (0..n).map(|j| cis_turns_f64(j as f64 / n as f64)).collect();
        FastCis { table }
    }

    #[inline(always)]
    pub fn cis(&self, phase: u64) -> (f64, f64) {
        let idx = (phase >> (64 - TABLE_BITS)) as usize;
        let rem = phase << TABLE_BITS;
        // remaining angle in turns, below 2^-TABLE_BITS
        let d = (rem as f64) * (1.0 / 18446744073709551616.0) / (1u64 << TABLE_BITS) as f64;
        let th = std::f64::consts::TAU * d;
        let th2 = th * th;
        let cd = 1.0 - th2 * 0.5 + th2 * th2 / 24.0;
        let sd = th * (1.0 - th2 / 6.0 + th2 * th2 / 120.0);
        let (ct, st) = self.table[idx];
        (ct * cd - st * sd, st * cd + ct * sd)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::real::rat;

    fn to_f(v: &BigInt, bits: u32) -> f64 {
        crate::real::rat_to_f64(&BigRational::new(v.clone(), BigInt::one() << bits as usize))
    }

    #[test]
    fn pi_digits() {
        let t = Trig::new(200);
        let p = to_f(&t.pi, 200);
        assert_eq!(p, std::f64::consts::PI);
        // agreement between precisions well beyond double precision
        let t2 = Trig::new(400);
        let diff = (&t2.pi >> 200usize) - &t.pi;
        assert!(diff.abs() <= BigInt::from(2));
    }

    #[test]
    fn exact_special_values() {
        let t = Trig::new(128);
        assert_eq!(t.cis_turns(&rat(0, 1)), (t.one(), BigInt::zero()));
        assert_eq!(t.cis_turns(&rat(1, 2)), (-t.one(), BigInt::zero()));
        assert_eq!(t.cis_turns(&rat(1, 4)), (BigInt::zero(), t.one()));
        assert_eq!(t.cis_turns(&rat(-1, 4)), (BigInt::zero(), -t.one()));
        assert_eq!(t.cis_turns(&rat(7, 1)), (t.one(), BigInt::zero()));
        assert_eq!(cis_turns_f64(0.5), (-1.0, 0.0));
        assert_eq!(cis_turns_f64(-0.5), (-1.0, 0.0));
        assert_eq!(cis_turns_f64(3.0), (1.0, 0.0));
    }

    #[test]
    fn matches_libm() {
        let t = Trig::new(100);
        for i in 0..200 {
            let x = rat(i * 37 - 3000, 977);
            let (c, s) = t.cis_turns(&x);
            let xf = crate::real::rat_to_f64(&x) * std::f64::consts::TAU;
            assert!((to_f(&c, 100) - xf.cos()).abs() < 1e-13);
            assert!((to_f(&s, 100) - xf.sin()).abs() < 1e-13);
            let (cf, sf) = cis_turns_f64(crate::real::rat_to_f64(&x));
            assert!((cf - xf.cos()).abs() < 1e-13 && (sf - xf.sin()).abs() < 1e-13);
        }
    }

    #[test]
    fn conjugate_symmetry_is_exact() {
        let t = Trig::new(160);
        for i in 1..50 {
            let x = rat(i * 101, 1013);
            let (c1, s1) = t.cis_turns(&x);
            let (c2, s2) = t.cis_turns(&-x);
            assert_eq!(c1, c2);
            assert_eq!(s1, -s2);
        }
    }

    #[test]
    fn fast_table_close_to_libm() {
        let f = FastCis::new();
        let mut p = 0x9e37_79b9_7f4a_7c15u64;
        for _ in 0..10_000 {
            p = p.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let t = p as f64 / 2f64.powi(64);
            let (c, s) = f.cis(p);
            let th = std::f64::consts::TAU * t;
            assert!((c - th.cos()).abs() < 1e-12 && (s - th.sin()).abs() < 1e-12);
        }
    }
}
