//! Polynomial systems, tolerances, and the exhaustive oracle.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::real::{frac_dist as rat_frac_dist, rat, Real};
use crate::residue::{SystemPlan, SystemScan};

pub const DEFAULT_ENUM_CAP: u64 = 100_000_000;

/// Decisions taken on `f64` approximations need at least this much room;
/// anything closer is settled in exact arithmetic.
pub(crate) const MARGIN: f64 = 1e-9;

const CHUNK: u64 = 1 << 15;

/// `f(X) = sum_j coeffs[j-1] X^j`; the constant term is structurally absent.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Poly {
    coeffs: Vec<Real>,
}

impl Poly {
    pub fn new(coeffs: Vec<Real>) -> Result<Poly> {
        if coeffs.is_empty() {
            return Err(Error::InvalidInput("polynomial needs degree bound d >= 1".into()));
        }
        Ok(Poly { coeffs })
    }

    pub fn from_rats(coeffs: Vec<BigRational>) -> Result<Poly> {
        Poly::new(coeffs.into_iter().map(Real::exact).collect())
    }

    pub fn zero(d: usize) -> Poly {
        Poly { coeffs: vec![Real::zero(); d] }
    }

    pub fn d(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeffs(&self) -> &[Real] {
        &self.coeffs
    }

    /// Coefficient of `X^j`, `1 <= j <= d`.
    pub fn coeff(&self, j: usize) -> &Real {
        &self.coeffs[j - 1]
    }

    pub fn values(&self) -> Vec<BigRational> {
        self.coeffs.iter().map(|c| c.value().clone()).collect()
    }

    pub fn is_exact(&self) -> bool {
        self.coeffs.iter().all(Real::is_exact)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(Real::is_zero)
    }

    pub fn eval(&self, n: &BigRational) -> BigRational {
        let mut acc = BigRational::zero();
        for c in self.coeffs.iter().rev() {
            acc = (acc + c.value()) * n;
        }
        acc
    }

    pub fn scale(&self, s: &Real) -> Poly {
        Poly { coeffs: self.coeffs.iter().map(|c| c * s).collect() }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PolySystem {
    d: usize,
    polys: Vec<Poly>,
}

impl PolySystem {
    pub fn new(polys: Vec<Poly>) -> Result<PolySystem> {
        let first = polys.first().ok_or_else(|| Error::InvalidInput("system needs k >= 1".into()))?;
        let d = first.d();
        if let Some(i) = polys.iter().position(|p| p.d() != d) {
            return Err(Error::InvalidInput(format!("poly {i} has degree bound {} != {d}", polys[i].d())));
        }
        Ok(PolySystem { d, polys })
    }

    /// Convenience constructor from coefficient strings.
    pub fn parse(rows: &[&[&str]]) -> Result<PolySystem> {
        let polys = rows
            .iter()
            .map(|r| Poly::new(r.iter().map(|s| Real::parse(s)).collect::<Result<Vec<_>>>()?))
            .collect::<Result<Vec<_>>>()?;
        PolySystem::new(polys)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn k(&self) -> usize {
        self.polys.len()
    }

    pub fn polys(&self) -> &[Poly] {
        &self.polys
    }

    pub fn poly(&self, i: usize) -> &Poly {
        &self.polys[i]
    }

    /// `beta[i][j-1] = f_{i,j}`.
    pub fn coeff_matrix(&self) -> Vec<Vec<BigRational>> {
        self.polys.iter().map(Poly::values).collect()
    }

    pub fn is_exact(&self) -> bool {
        self.polys.iter().all(Poly::is_exact)
    }

    pub fn scale(&self, s: &Real) -> PolySystem {
        PolySystem { d: self.d, polys: self.polys.iter().map(|p| p.scale(s)).collect() }
    }

    pub fn plan(&self) -> SystemPlan {
        SystemPlan::new(&self.coeff_matrix())
    }

    /// Smallest precision among inexact coefficients, if any.
    pub fn min_inexact_prec(&self) -> Option<u32> {
        self.polys.iter().flat_map(|p| p.coeffs.iter()).filter(|c| !c.is_exact()).map(Real::prec).min()
    }
}

/// Tolerances `eps_i` in `(0, 1/2]`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Epsilons {
    eps: Vec<Real>,
}

impl Epsilons {
    pub fn new(eps: Vec<Real>) -> Result<Epsilons> {
        if eps.is_empty() {
            return Err(Error::InvalidInput("need at least one tolerance".into()));
        }
        let half = rat(1, 2);
        for (i, e) in eps.iter().enumerate() {
            if e.value() <= &BigRational::zero() || e.value() > &half {
                return Err(Error::InvalidInput(format!("eps[{i}] = {e} outside (0, 1/2]")));
            }
        }
        Ok(Epsilons { eps })
    }

    pub fn parse(eps: &[&str]) -> Result<Epsilons> {
        Epsilons::new(eps.iter().map(|s| Real::parse(s)).collect::<Result<Vec<_>>>()?)
    }

    pub fn uniform(k: usize, e: Real) -> Result<Epsilons> {
        Epsilons::new(vec![e; k])
    }

    pub fn eps(&self) -> &[Real] {
        &self.eps
    }

    pub fn len(&self) -> usize {
        self.eps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eps.is_empty()
    }

    pub fn get(&self, i: usize) -> &Real {
        &self.eps[i]
    }

    /// `Delta = prod eps_i`, recomputed on every call.
    pub fn delta_product(&self) -> Real {
        self.eps.iter().fold(Real::one(), |acc, e| &acc * e)
    }

    pub fn halved(&self) -> Epsilons {
        let h = Real::ratio(1, 2);
        Epsilons { eps: self.eps.iter().map(|e| e * &h).collect() }
    }

    /// Which tolerances exceed 1/100 (outside the range the guarantee covers).
    pub fn outside_hypothesis(&self) -> Vec<bool> {
        let lim = rat(1, 100);
        self.eps.iter().map(|e| e.value() > &lim).collect()
    }

    pub fn values(&self) -> Vec<BigRational> {
        self.eps.iter().map(|e| e.value().clone()).collect()
    }
}

/// One instance of the search problem: find `n < y` with `||f_i(n)|| < eps_i`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "SystemFile", into = "SystemFile")]
pub struct SystemState {
    pub system: PolySystem,
    pub eps: Epsilons,
    pub y: Real,
}

impl SystemState {
    pub fn new(system: PolySystem, eps: Epsilons, y: Real) -> Result<SystemState> {
        if system.k() != eps.len() {
            return Err(Error::ShapeMismatch(format!("{} polynomials but {} tolerances", system.k(), eps.len())));
        }
        if y.value() <= &BigRational::one() {
            return Err(Error::InvalidInput(format!("horizon {y} must exceed 1")));
        }
        Ok(SystemState { system, eps, y })
    }

    pub fn k(&self) -> usize {
        self.system.k()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("serializable")
    }

    /// SHA-256 of the canonical JSON form, hex encoded.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.to_json().as_bytes()))
    }
}

/// On-disk form: `{"d": int, "polys": [[str]], "eps": [str], "x": str}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SystemFile {
    pub d: i64,
    pub polys: Vec<Vec<String>>,
    pub eps: Vec<String>,
    pub x: String,
}

impl From<SystemState> for SystemFile {
    fn from(s: SystemState) -> SystemFile {
        SystemFile {
            d: s.system.d() as i64,
            polys: s.system.polys().iter().map(|p| p.coeffs().iter().map(Real::to_string).collect()).collect(),
            eps: s.eps.eps().iter().map(Real::to_string).collect(),
            x: s.y.to_string(),
        }
    }
}

impl TryFrom<SystemFile> for SystemState {
    type Error = Error;

    fn try_from(f: SystemFile) -> Result<SystemState> {
        f.into_state(crate::real::DEFAULT_PREC)
    }
}

impl SystemFile {
    /// Validate and convert, evaluating `sqrt(..)` entries to `prec` bits.
    pub fn into_state(self, prec: u32) -> Result<SystemState> {
        let f = self;
        let perr = |field: String, msg: String| Error::Parse { field, msg };
        if f.d < 1 {
            return Err(perr("d".into(), format!("degree bound must be >= 1, got {}", f.d)));
        }
        let d = f.d as usize;
        if f.polys.is_empty() {
            return Err(perr("polys".into(), "need at least one polynomial".into()));
        }
        let mut polys = Vec::new();
        for (i, row) in f.polys.iter().enumerate() {
            if row.len() != d {
                return Err(perr(
                    format!("polys[{i}]"),
                    format!("expected {d} coefficients (X^1..X^{d}, no constant term), got {}", row.len()),
                ));
            }
            let mut cs = Vec::new();
            for (j, s) in row.iter().enumerate() {
                cs.push(Real::parse_with_prec(s, prec).map_err(|e| perr(format!("polys[{i}][{j}]"), e.to_string()))?);
            }
            polys.push(Poly::new(cs)?);
        }
        let mut eps = Vec::new();
        for (i, s) in f.eps.iter().enumerate() {
            eps.push(Real::parse(s).map_err(|e| perr(format!("eps[{i}]"), e.to_string()))?);
        }
        if eps.len() != polys.len() {
            return Err(perr("eps".into(), format!("{} tolerances for {} polynomials", eps.len(), polys.len())));
        }
        let eps = Epsilons::new(eps).map_err(|e| perr("eps".into(), e.to_string()))?;
        let y = Real::parse(&f.x).map_err(|e| perr("x".into(), e.to_string()))?;
        SystemState::new(PolySystem::new(polys)?, eps, y).map_err(|e| perr("x".into(), e.to_string()))
    }
}

// ---------------------------------------------------------------------------
// oracle operations

pub fn frac_dist(t: &Real) -> Real {
    t.frac_dist()
}

/// Distances `||f_i(n)||`, by exact Horner evaluation.
pub fn eval_system(system: &PolySystem, n: &BigInt) -> Vec<Real> {
    let x = BigRational::from_integer(n.clone());
    system
        .polys()
        .iter()
        .map(|p| {
            let v = rat_frac_dist(&p.eval(&x));
            // the value carries sum_j err_j n^j of accumulated coefficient error
            p.coeffs()
                .iter()
                .enumerate()
                .filter(|(_, c)| !c.is_exact())
                .fold(Real::exact(v), |acc, (j, c)| {
                    let err = Real::approx(BigRational::zero(), c.prec()) * Real::exact(x.pow(j as i32 + 1));
                    acc + err
                })
        })
        .collect()
}

/// `a < b` for every value within the error bounds of both.
pub fn certainly_less(a: &Real, b: &Real) -> bool {
    a.value() + a.error_bound() < b.value() - b.error_bound()
}

fn real_like(system: &PolySystem, v: BigRational) -> Real {
    match system.min_inexact_prec() {
        None => Real::exact(v),
        Some(p) => Real::approx(v, p),
    }
}

/// `ceil(x) - 1`: the largest integer strictly below `x`.
pub fn below(x: &Real) -> Result<u64> {
    let c: BigInt = x.value().ceil().to_integer() - 1;
    u64::try_from(c.max(BigInt::zero())).map_err(|_| Error::HorizonTooLarge { needed: u128::MAX, cap: 0 })
}

/// `floor(x)`.
pub fn floor_u64(x: &Real) -> Result<u64> {
    let f = x.floor().max(BigInt::zero());
    u64::try_from(f).map_err(|_| Error::HorizonTooLarge { needed: u128::MAX, cap: 0 })
}

pub(crate) fn check_cap(count: u64, cap: u64) -> Result<()> {
    if count > cap {
        return Err(Error::HorizonTooLarge { needed: count as u128, cap });
    }
    Ok(())
}

/// Run `f` over consecutive chunks of `1..=hi`, collecting results in order.
pub(crate) fn chunked<T: Send>(hi: u64, f: impl Fn(&mut SystemScan, u64) -> T + Sync, plan: &SystemPlan) -> Vec<T> {
    if hi == 0 {
        return Vec::new();
    }
    let nchunks = hi.div_ceil(CHUNK);
    (0..nchunks)
        .into_par_iter()
        .map(|c| {
            let lo = c * CHUNK + 1;
            let end = ((c + 1) * CHUNK).min(hi);
            let mut s = plan.scanner_at(lo);
            f(&mut s, end)
        })
        .collect()
}

fn exact_max(s: &SystemScan, k: usize) -> BigRational {
    (0..k).map(|i| s.poly(i).dist_exact()).max().unwrap_or_else(BigRational::zero)
}

/// Smallest `n` in `1..ceil(x)` minimising `max_i ||f_i(n)||`, with that value.
pub fn brute_force_min(system: &PolySystem, x: &Real, cap: u64) -> Result<(u64, Real)> {
    if x.value() < &rat(2, 1) {
        return Err(Error::Precondition("brute_force_min needs x >= 2".into()));
    }
    let hi = below(x)?;
    check_cap(hi, cap)?;
    let (n, v) = min_scan(system, hi);
    Ok((n, real_like(system, v)))
}

/// Exhaustive minimum over `1..=hi`; also used for prefix minima.
pub(crate) fn min_scan(system: &PolySystem, hi: u64) -> (u64, BigRational) {
    let plan = system.plan();
    let k = system.k();
    let parts = chunked(
        hi,
        |s, end| {
            let mut best_n = s.n();
            let mut best = exact_max(s, k);
            let mut best_f = crate::real::rat_to_f64(&best);
            while s.n() < end {
                s.advance();
                let a = s.max_dist_approx();
                if a <= best_f + MARGIN {
                    let e = exact_max(s, k);
                    if e < best {
                        best_f = crate::real::rat_to_f64(&e);
                        best = e;
                        best_n = s.n();
                    }
                }
            }
            (best_n, best)
        },
        &plan,
    );
    let mut it = parts.into_iter();
    let mut best = it.next().expect("hi >= 1");
    for p in it {
        if p.1 < best.1 {
            best = p;
        }
    }
    best
}

/// Decide `dist < eps` for every coordinate, exactly.
#[inline]
fn is_hit(s: &SystemScan, eps: &[BigRational], eps_f: &[f64]) -> bool {
    for (i, (e, ef)) in eps.iter().zip(eps_f).enumerate() {
        let a = s.poly(i).dist_approx();
        if a >= ef + MARGIN {
            return false;
        }
        if a > ef - MARGIN && &s.poly(i).dist_exact() >= e {
            return false;
        }
    }
    true
}

/// Number of `n` in `1..=floor(x)` with `||f_i(n)|| < eps_i` for all `i`.
pub fn hit_count(system: &PolySystem, eps: &Epsilons, x: &Real, cap: u64) -> Result<u64> {
    if system.k() != eps.len() {
        return Err(Error::ShapeMismatch("eps length".into()));
    }
    let hi = floor_u64(x)?;
    check_cap(hi, cap)?;
    Ok(count_hits(system, eps, hi))
}

pub(crate) fn count_hits(system: &PolySystem, eps: &Epsilons, hi: u64) -> u64 {
    let plan = system.plan();
    let ev = eps.values();
    let ef: Vec<f64> = ev.iter().map(crate::real::rat_to_f64).collect();
    chunked(
        hi,
        |s, end| {
            let mut c = 0u64;
            loop {
                if is_hit(s, &ev, &ef) {
                    c += 1;
                }
                if s.n() >= end {
                    break;
                }
                s.advance();
            }
            c
        },
        &plan,
    )
    .into_iter()
    .sum()
}

/// Smallest `n < x` with `||f_i(n)|| < eps_i` for all `i`, with its distances.
pub fn first_hit(system: &PolySystem, eps: &Epsilons, x: &Real, cap: u64) -> Result<Option<(u64, Vec<Real>)>> {
    let hi = below(x)?;
    check_cap(hi, cap)?;
    Ok(first_hit_upto(system, eps, hi).map(|n| (n, eval_system(system, &BigInt::from(n)))))
}

pub(crate) fn first_hit_upto(system: &PolySystem, eps: &Epsilons, hi: u64) -> Option<u64> {
    let plan = system.plan();
    let ev = eps.values();
    let ef: Vec<f64> = ev.iter().map(crate::real::rat_to_f64).collect();
    // sequential over chunks so the scan stops at the first hit
    let mut lo = 1u64;
    while lo <= hi {
        let end = (lo + CHUNK * 8 - 1).min(hi);
        let block: Vec<Option<u64>> = chunked_range(lo, end, &plan, |s, e| -> Option<u64> {
            loop {
                if is_hit(s, &ev, &ef) {
                    return Some(s.n());
                }
                if s.n() >= e {
                    return None;
                }
                s.advance();
            }
        });
        if let Some(n) = block.into_iter().flatten().next() {
            return Some(n);
        }
        lo = end + 1;
    }
    None
}

fn chunked_range<T: Send>(
    lo: u64,
    hi: u64,
    plan: &SystemPlan,
    f: impl Fn(&mut SystemScan, u64) -> T + Sync,
) -> Vec<T> {
    let n = hi - lo + 1;
    let nchunks = n.div_ceil(CHUNK);
    (0..nchunks)
        .into_par_iter()
        .map(|c| {
            let a = lo + c * CHUNK;
            let b = (a + CHUNK - 1).min(hi);
            let mut s = plan.scanner_at(a);
            f(&mut s, b)
        })
        .collect()
}
