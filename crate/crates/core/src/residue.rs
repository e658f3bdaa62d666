//! Incremental evaluation of polynomials mod 1 along consecutive integers.
//!
//! A polynomial with rational coefficients is exactly `N(n)/D mod 1` for an
//! integer polynomial `N`. Splitting `D = 2^s L` with `L` odd, the fraction is a
//! sum of a dyadic part and an odd-modulus part, each stepped with forward
//! differences in fixed-width modular arithmetic when it fits.

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use crate::real::{frac, frac_dist, rat_to_f64};

const W: usize = 4;
type Limbs = [u64; W];

#[derive(Clone, Debug)]
enum Modulus {
    /// values are fractions of 2^256
    Torus,
    /// values are fractions of a modulus below 2^127
    Small(u128),
    Big(BigUint),
}

#[derive(Clone, Debug)]
struct PartPlan {
    modulus: Modulus,
    /// coefficients of X^1..X^d, already reduced mod the modulus
    /// (for `Torus`, scaled up to the 2^256 grid)
    coeffs: Vec<BigUint>,
}

#[derive(Clone, Debug)]
enum PartState {
    Torus(Vec<Limbs>),
    Small(u128, Vec<u128>),
    Big(BigUint, Vec<BigUint>),
}

/// Exact plan for stepping one polynomial mod 1.
#[derive(Clone, Debug)]
pub struct PolyPlan {
    degree: usize,
    parts: Vec<PartPlan>,
}

fn torus_modulus() -> BigUint {
    BigUint::one() << 256usize
}

fn mod_inverse(a: &BigInt, m: &BigInt) -> BigInt {
    let g = a.extended_gcd(m);
    debug_assert!(g.gcd.is_one());
    g.x.mod_floor(m)
}

impl PolyPlan {
    /// `coeffs[j-1]` is the coefficient of `X^j`.
    pub fn new(coeffs: &[BigRational]) -> PolyPlan {
        let degree = coeffs.len();
        let fr: Vec<BigRational> = coeffs.iter().map(frac).collect();
        let den = fr.iter().fold(BigInt::one(), |acc, c| acc.lcm(c.denom()));
        if den.is_one() {
            return PolyPlan { degree, parts: Vec::new() };
        }
        let nums: Vec<BigInt> = fr.iter().map(|c| c.numer() * (&den / c.denom())).collect();
        let s = den.trailing_zeros().unwrap_or(0) as usize;
        let odd = &den >> s;
        let mut parts = Vec::new();
        if s > 0 {
            let m2 = BigInt::one() << s;
            let inv = mod_inverse(&odd.mod_floor(&m2), &m2);
            let cs: Vec<BigUint> = nums
                .iter()
                .map(|n| (n * &inv).mod_floor(&m2).to_biguint().unwrap())
                .collect();
            if s <= 256 {
                parts.push(PartPlan {
                    modulus: Modulus::Torus,
                    coeffs: cs.into_iter().map(|c| c << (256 - s)).collect(),
                });
            } else {
                parts.push(PartPlan { modulus: Modulus::Big(m2.to_biguint().unwrap()), coeffs: cs });
            }
        }
        if !odd.is_one() {
            let p2 = (BigInt::one() << s).mod_floor(&odd);
            let inv = mod_inverse(&p2, &odd);
            let cs: Vec<BigUint> =
                nums.iter().map(|n| (n * &inv).mod_floor(&odd).to_biguint().unwrap()).collect();
            let modulus = if odd.bits() < 127 {
                Modulus::Small(odd.to_u128().unwrap())
            } else {
                Modulus::Big(odd.to_biguint().unwrap())
            };
            parts.push(PartPlan { modulus, coeffs: cs });
        }
        PolyPlan { degree, parts }
    }

    pub fn is_zero_mod_one(&self) -> bool {
        self.parts.is_empty()
    }

    pub fn scanner_at(&self, n0: u64) -> PolyScan {
        let states = self.parts.iter().map(|p| p.state_at(n0, self.degree)).collect();
        PolyScan { states }
    }
}

impl PartPlan {
    fn modulus_big(&self) -> BigUint {
        match &self.modulus {
            Modulus::Torus => torus_modulus(),
            Modulus::Small(m) => BigUint::from(*m),
            Modulus::Big(m) => m.clone(),
        }
    }

    fn eval(&self, n: &BigUint, m: &BigUint) -> BigUint {
        let mut acc = BigUint::zero();
        for c in self.coeffs.iter().rev() {
            acc = ((acc + c) * n) % m;
        }
        acc
    }

    fn state_at(&self, n0: u64, d: usize) -> PartState {
        let m = self.modulus_big();
        let mut table: Vec<BigUint> =
            (0..=d as u64).map(|t| self.eval(&BigUint::from(n0 + t), &m)).collect();
        // in-place forward differences: table[i] becomes Δ^i P(n0)
        for i in 1..=d {
            for t in (i..=d).rev() {
                table[t] = (&table[t] + &m - &table[t - 1]) % &m;
            }
        }
        match &self.modulus {
            Modulus::Torus => PartState::Torus(table.iter().map(to_limbs).collect()),
            Modulus::Small(mm) => PartState::Small(*mm, table.iter().map(|v| v.to_u128().unwrap()).collect()),
            Modulus::Big(mm) => PartState::Big(mm.clone(), table),
        }
    }
}

fn to_limbs(v: &BigUint) -> Limbs {
    let mut out = [0u64; W];
    for (i, d) in v.iter_u64_digits().take(W).enumerate() {
        out[i] = d;
    }
    out
}

fn from_limbs(l: &Limbs) -> BigUint {
    let mut v = BigUint::zero();
    for d in l.iter().rev() {
        v = (v << 64usize) + BigUint::from(*d);
    }
    v
}

#[inline(always)]
fn add_limbs(a: &mut Limbs, b: &Limbs) {
    let mut carry = false;
    for i in 0..W {
        let (s1, c1) = a[i].overflowing_add(b[i]);
        let (s2, c2) = s1.overflowing_add(carry as u64);
        a[i] = s2;
        carry = c1 | c2;
    }
}

/// Running fractional part of one polynomial.
#[derive(Clone, Debug)]
pub struct PolyScan {
    states: Vec<PartState>,
}

impl PolyScan {
    #[inline]
    pub fn advance(&mut self) {
        for st in &mut self.states {
            match st {
                PartState::Torus(v) => {
                    for i in 0..v.len() - 1 {
                        let nx = v[i + 1];
                        add_limbs(&mut v[i], &nx);
                    }
                }
                PartState::Small(m, v) => {
                    let m = *m;
                    for i in 0..v.len() - 1 {
                        let s = v[i] + v[i + 1];
                        v[i] = if s >= m { s - m } else { s };
                    }
                }
                PartState::Big(m, v) => {
                    for i in 0..v.len() - 1 {
                        let s = &v[i] + &v[i + 1];
                        v[i] = if &s >= m { s - &*m } else { s };
                    }
                }
            }
        }
    }

    /// Fractional part in `[0, 1)`, absolute error below 1e-15.
    #[inline]
    pub fn frac_approx(&self) -> f64 {
        let mut t = 0.0f64;
        for st in &self.states {
            t += match st {
                PartState::Torus(v) => {
                    let l = &v[0];
                    (l[3] as f64 + l[2] as f64 * 5.421010862427522e-20) * 5.421010862427522e-20
                }
                PartState::Small(m, v) => v[0] as f64 / *m as f64,
                PartState::Big(m, v) => rat_to_f64(&BigRational::new(v[0].clone().into(), m.clone().into())),
            };
        }
        t - t.floor()
    }

    #[inline]
    pub fn dist_approx(&self) -> f64 {
        let f = self.frac_approx();
        f.min(1.0 - f)
    }

    /// Exact fractional part in `[0, 1)`.
    pub fn frac_exact(&self) -> BigRational {
        let mut t = BigRational::zero();
        for st in &self.states {
            t += match st {
                PartState::Torus(v) => BigRational::new(from_limbs(&v[0]).into(), torus_modulus().into()),
                PartState::Small(m, v) => BigRational::new(BigInt::from(v[0]), BigInt::from(*m)),
                PartState::Big(m, v) => BigRational::new(v[0].clone().into(), m.clone().into()),
            };
        }
        frac(&t)
    }

    pub fn dist_exact(&self) -> BigRational {
        frac_dist(&self.frac_exact())
    }

    /// Fractional part on the 2^-64 grid (truncated), wrapping.
    #[inline]
    pub fn frac_u64(&self) -> u64 {
        let mut t = 0u64;
        for st in &self.states {
            let v = match st {
                PartState::Torus(v) => v[0][3],
                PartState::Small(m, v) => {
                    if *m <= u64::MAX as u128 {
                        ((v[0] << 64) / *m) as u64
                    } else {
                        big_frac_u64(&BigUint::from(v[0]), &BigUint::from(*m))
                    }
                }
                PartState::Big(m, v) => big_frac_u64(&v[0], m),
            };
            t = t.wrapping_add(v);
        }
        t
    }
}

fn big_frac_u64(v: &BigUint, m: &BigUint) -> u64 {
    ((v << 64usize) / m).to_u64().unwrap_or(0)
}

/// Plans for every polynomial of a system.
#[derive(Clone, Debug)]
pub struct SystemPlan {
    polys: Vec<PolyPlan>,
}

impl SystemPlan {
    pub fn new(coeffs: &[Vec<BigRational>]) -> SystemPlan {
        SystemPlan { polys: coeffs.iter().map(|c| PolyPlan::new(c)).collect() }
    }

    pub fn k(&self) -> usize {
        self.polys.len()
    }

    pub fn scanner_at(&self, n0: u64) -> SystemScan {
        SystemScan { polys: self.polys.iter().map(|p| p.scanner_at(n0)).collect(), n: n0 }
    }
}

/// Simultaneous stepping of all polynomials; `n()` is the current argument.
#[derive(Clone, Debug)]
pub struct SystemScan {
    polys: Vec<PolyScan>,
    n: u64,
}

impl SystemScan {
    #[inline]
    pub fn n(&self) -> u64 {
        self.n
    }

    #[inline]
    pub fn advance(&mut self) {
        for p in &mut self.polys {
            p.advance();
        }
        self.n += 1;
    }

    #[inline]
    pub fn poly(&self, i: usize) -> &PolyScan {
        &self.polys[i]
    }

    #[inline]
    pub fn max_dist_approx(&self) -> f64 {
        self.polys.iter().map(|p| p.dist_approx()).fold(0.0, f64::max)
    }

    pub fn dists_exact(&self) -> Vec<BigRational> {
        self.polys.iter().map(|p| p.dist_exact()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::real::{pow2, rat};

    fn horner(c: &[BigRational], n: u64) -> BigRational {
        let x = BigRational::from_integer(n.into());
        let mut acc = BigRational::zero();
        for cj in c.iter().rev() {
            acc = (acc + cj) * &x;
        }
        acc
    }

    #[test]
    fn matches_direct_evaluation_for_mixed_denominators() {
        let cases: Vec<Vec<BigRational>> = vec![
            vec![rat(1, 3), rat(5, 12)],
            vec![rat(0, 1), rat(7, 1024), rat(-11, 6)],
            vec![pow2(-200) * rat(12345, 7), rat(3, 5)],
            vec![pow2(-300) * rat(1, 3), rat(1, 2)],
            vec![BigRational::new(1.into(), (BigInt::from(3) << 130usize) * 5), rat(1, 7)],
            vec![rat(4, 2), rat(-6, 3)],
        ];
        for c in cases {
            let plan = PolyPlan::new(&c);
            for start in [1u64, 17, 1000] {
                let mut s = plan.scanner_at(start);
                for n in start..start + 40 {
                    let want = frac(&horner(&c, n));
                    assert_eq!(s.frac_exact(), want, "n={n}");
                    let approx = crate::real::rat_to_f64(&want);
                    assert!((s.frac_approx() - approx).abs() < 1e-14 || (s.frac_approx() - approx).abs() > 1.0 - 1e-14);
                    let u = s.frac_u64() as f64 / 2f64.powi(64);
                    assert!((u - approx).abs() < 1e-12 || (u - approx).abs() > 1.0 - 1e-12);
                    s.advance();
                }
            }
        }
    }

    #[test]
    fn integer_polys_vanish() {
        let plan = PolyPlan::new(&[rat(3, 1), rat(-2, 1)]);
        assert!(plan.is_zero_mod_one());
        let s = plan.scanner_at(5);
        assert_eq!(s.dist_exact(), BigRational::zero());
        assert_eq!(s.frac_approx(), 0.0);
    }
}
