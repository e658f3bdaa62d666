//! Weyl sums, smoothed counting, and the hit-density / large-coefficient
//! dichotomy.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hpmath::{cis_turns_f64, FastCis, Trig};
use crate::real::{rat, rat_to_f64, round_dyadic, Real, DEFAULT_PREC};
use crate::residue::PolyPlan;
use crate::system::{check_cap, count_hits, floor_u64, Epsilons, Poly, PolySystem, DEFAULT_ENUM_CAP, MARGIN};

pub type FrequencyVector = Vec<i64>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Complex {
    pub re: Real,
    pub im: Real,
}

impl Complex {
    pub fn abs_f64(&self) -> f64 {
        self.re.to_f64().hypot(self.im.to_f64())
    }
}

/// Coefficients of `sum_i h_i f_i`.
pub fn phase_coeffs(system: &PolySystem, h: &[i64]) -> Vec<BigRational> {
    (1..=system.d())
        .map(|j| {
            system
                .polys()
                .iter()
                .zip(h)
                .fold(BigRational::zero(), |acc, (p, &hi)| acc + p.coeff(j).value() * BigRational::from_integer(hi.into()))
        })
        .collect()
}

/// Bound on the phase error at `n <= x` caused by inexact coefficients.
pub fn phase_error_bound(system: &PolySystem, h: &[i64], x: &Real) -> f64 {
    let xf = x.to_f64();
    let mut tot = 0.0;
    for (p, &hi) in system.polys().iter().zip(h) {
        for (j, c) in p.coeffs().iter().enumerate() {
            if !c.is_exact() {
                tot += (hi.unsigned_abs() as f64) * 2f64.powi(-(c.prec() as i32)) * xf.powi(j as i32 + 1);
            }
        }
    }
    tot
}

/// `sum_{n <= x} e(sum_i h_i f_i(n))` at `DEFAULT_PREC` bits.
pub fn weyl_sum(system: &PolySystem, h: &[i64], x: &Real) -> Result<Complex> {
    weyl_sum_prec(system, h, x, DEFAULT_PREC)
}

/// Weyl sum with phases reduced exactly mod 1 and trigonometry carried at
/// `prec + 32` fixed-point bits; the result is rounded to `prec` bits.
pub fn weyl_sum_prec(system: &PolySystem, h: &[i64], x: &Real, prec: u32) -> Result<Complex> {
    if h.len() != system.k() {
        return Err(Error::ShapeMismatch(format!("h has length {}, system has k = {}", h.len(), system.k())));
    }
    if x.value() < &BigRational::one() {
        return Err(Error::Precondition("weyl_sum needs x >= 1".into()));
    }
    let xn = floor_u64(x)?;
    let plan = PolyPlan::new(&phase_coeffs(system, h));
    let trig = Trig::new(prec + 32);
    const CH: u64 = 256;
    let parts: Vec<(BigInt, BigInt)> = (0..xn.div_ceil(CH))
        .into_par_iter()
        .map(|c| {
            let lo = c * CH + 1;
            let hi = ((c + 1) * CH).min(xn);
            let mut s = plan.scanner_at(lo);
            let (mut re, mut im) = (BigInt::zero(), BigInt::zero());
            for n in lo..=hi {
                let (cr, si) = trig.cis_turns(&s.frac_exact());
                re += cr;
                im += si;
                if n < hi {
                    s.advance();
                }
            }
            (re, im)
        })
        .collect();
    let (re, im) = parts.into_iter().fold((BigInt::zero(), BigInt::zero()), |a, b| (a.0 + b.0, a.1 + b.1));
    let den = trig.one();
    let to_real = |v: BigInt| {
        let r = BigRational::new(v, den.clone());
        Real::approx(round_dyadic(&r, prec), prec)
    };
    Ok(Complex { re: to_real(re), im: to_real(im) })
}

/// Double-precision Weyl sum (exact phase reduction, `f64` trigonometry).
pub fn weyl_sum_fast(system: &PolySystem, h: &[i64], x: &Real) -> Result<(f64, f64)> {
    if h.len() != system.k() {
        return Err(Error::ShapeMismatch("h length".into()));
    }
    let xn = floor_u64(x)?;
    Ok(weyl_sum_fast_coeffs(&phase_coeffs(system, h), xn))
}

pub(crate) fn weyl_sum_fast_coeffs(coeffs: &[BigRational], xn: u64) -> (f64, f64) {
    if xn == 0 {
        return (0.0, 0.0);
    }
    let plan = PolyPlan::new(coeffs);
    let mut s = plan.scanner_at(1);
    let (mut re, mut im) = (0.0f64, 0.0f64);
    for n in 1..=xn {
        let (c, sn) = cis_turns_f64(s.frac_approx());
        re += c;
        im += sn;
        if n < xn {
            s.advance();
        }
    }
    (re, im)
}

// ---------------------------------------------------------------------------
// smoothing kernel

/// The fixed bump: 1 on `|s| <= 1/2`, 0 on `|s| >= 1`, and in between the
/// complement of the integrated quadratic B-spline, which makes it C^2.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SmoothingKernel {
    pub fourier_tail_cut: u64,
}

impl Default for SmoothingKernel {
    fn default() -> Self {
        SmoothingKernel { fourier_tail_cut: 2000 }
    }
}

fn bspline_cdf(u: &BigRational) -> BigRational {
    let one = BigRational::one();
    let u2 = u * u;
    let u3 = &u2 * u;
    if u <= &one {
        u3 / rat(6, 1)
    } else if u <= &rat(2, 1) {
        -u3 / rat(3, 1) + u2 * rat(3, 2) - u * rat(3, 2) + rat(1, 2)
    } else {
        let w = rat(3, 1) - u;
        one - &w * &w * &w / rat(6, 1)
    }
}

impl SmoothingKernel {
    pub fn phi(&self, s: &BigRational) -> BigRational {
        let a = s.abs();
        if a <= rat(1, 2) {
            BigRational::one()
        } else if a >= BigRational::one() {
            BigRational::zero()
        } else {
            BigRational::one() - bspline_cdf(&((a * rat(2, 1) - rat(1, 1)) * rat(3, 1)))
        }
    }

    pub fn phi_f64(&self, s: f64) -> f64 {
        let a = s.abs();
        if a <= 0.5 {
            1.0
        } else if a >= 1.0 {
            0.0
        } else {
            let u = 3.0 * (2.0 * a - 1.0);
            let f = if u <= 1.0 {
                u * u * u / 6.0
            } else if u <= 2.0 {
                -u * u * u / 3.0 + 1.5 * u * u - 1.5 * u + 0.5
            } else {
                1.0 - (3.0 - u).powi(3) / 6.0
            };
            1.0 - f
        }
    }

    /// `int phi(s) e(-xi s) ds`, by composite Simpson on knot-aligned panels.
    pub fn phi_hat(&self, xi: f64) -> f64 {
        let n = 6 * 400;
        let hstep = 1.0 / n as f64;
        let g = |s: f64| self.phi_f64(s) * (std::f64::consts::TAU * xi * s).cos();
        let mut acc = g(0.0) + g(1.0);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * g(i as f64 * hstep);
        }
        2.0 * acc * hstep / 3.0
    }
}

/// `sum_{n <= x} prod_i Phi_i(f_i(n))` with `Phi_i(t) = phi(||t|| / eps_i)`,
/// in exact arithmetic.
pub fn smoothed_count(system: &PolySystem, eps: &Epsilons, x: &Real, kernel: &SmoothingKernel) -> Result<Real> {
    if x.value() < &rat(2, 1) {
        return Err(Error::Precondition("smoothed_count needs x >= 2".into()));
    }
    if eps.len() != system.k() {
        return Err(Error::ShapeMismatch("eps length".into()));
    }
    let xn = floor_u64(x)?;
    check_cap(xn, DEFAULT_ENUM_CAP)?;
    let plan = system.plan();
    let ev = eps.values();
    let ef: Vec<f64> = ev.iter().map(rat_to_f64).collect();
    let k = system.k();
    let parts = crate::system::chunked(
        xn,
        |s, end| {
            let mut acc = BigRational::zero();
            loop {
                let mut prod = BigRational::one();
                for i in 0..k {
                    let a = s.poly(i).dist_approx();
                    if a >= ef[i] + MARGIN {
                        prod = BigRational::zero();
                        break;
                    }
                    if a < ef[i] / 2.0 - MARGIN {
                        continue;
                    }
                    let v = kernel.phi(&(s.poly(i).dist_exact() / &ev[i]));
                    if v.is_zero() {
                        prod = v;
                        break;
                    }
                    prod *= v;
                }
                acc += prod;
                if s.n() >= end {
                    break;
                }
                s.advance();
            }
            acc
        },
        &plan,
    );
    let total = parts.into_iter().fold(BigRational::zero(), |a, b| a + b);
    Ok(match system.min_inexact_prec() {
        None => Real::exact(total),
        Some(p) => Real::approx(total, p),
    })
}

/// The dual side: `sum_h prod_i eps_i phi_hat(eps_i h_i) S(h)` over
/// `|h_i| <= fourier_tail_cut`. Only meant as a cross-check for small `k`.
pub fn smoothed_count_fourier(system: &PolySystem, eps: &Epsilons, x: &Real, kernel: &SmoothingKernel) -> Result<f64> {
    let xn = floor_u64(x)?;
    let k = system.k();
    let cut = kernel.fourier_tail_cut as i64;
    let side = (2 * cut + 1) as u64;
    let total = side.checked_pow(k as u32).ok_or_else(|| Error::Cap("fourier box".into()))?;
    if total > 1_000_000 {
        return Err(Error::Cap(format!("fourier box {total}")));
    }
    let ef: Vec<f64> = eps.eps().iter().map(Real::to_f64).collect();
    let tables = frac_tables(system, xn);
    let fc = FastCis::new();
    let sum: f64 = (0..total)
        .into_par_iter()
        .map(|idx| {
            let h = mixed_radix(idx, side, cut, k);
            let mut w = 1.0;
            for i in 0..k {
                w *= ef[i] * kernel.phi_hat(ef[i] * h[i] as f64);
            }
            if w == 0.0 {
                return 0.0;
            }
            let (re, _) = sum_from_tables(&tables, &h, &fc);
            w * re
        })
        .collect::<Vec<f64>>()
        .into_iter()
        .sum();
    Ok(sum)
}

fn mixed_radix(mut idx: u64, side: u64, cap: i64, k: usize) -> Vec<i64> {
    let mut h = vec![0i64; k];
    for hi in h.iter_mut() {
        *hi = (idx % side) as i64 - cap;
        idx /= side;
    }
    h
}

/// `f_i(n) mod 1` on the 2^-64 grid, for `n = 1..=xn`.
fn frac_tables(system: &PolySystem, xn: u64) -> Vec<Vec<u64>> {
    let plan = system.plan();
    let k = system.k();
    let mut out = vec![Vec::with_capacity(xn as usize); k];
    if xn == 0 {
        return out;
    }
    let mut s = plan.scanner_at(1);
    for n in 1..=xn {
        for (i, t) in out.iter_mut().enumerate() {
            t.push(s.poly(i).frac_u64());
        }
        if n < xn {
            s.advance();
        }
    }
    out
}

fn sum_from_tables(tables: &[Vec<u64>], h: &[i64], fc: &FastCis) -> (f64, f64) {
    let len = tables.first().map_or(0, Vec::len);
    let (mut re, mut im) = (0.0, 0.0);
    for n in 0..len {
        let mut ph = 0u64;
        for (t, &hi) in tables.iter().zip(h) {
            ph = ph.wrapping_add(t[n].wrapping_mul(hi as u64));
        }
        let (c, s) = fc.cis(ph);
        re += c;
        im += s;
    }
    (re, im)
}

// ---------------------------------------------------------------------------
// dichotomy

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub h: FrequencyVector,
    pub sum_modulus: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "branch")]
pub enum FourierDichotomy {
    HitDensity {
        density_count: u64,
        /// `c_hit * Delta * floor(x)`
        threshold: f64,
    },
    LargeCoefficients {
        /// `Q = 2^j`
        q: u64,
        j: u32,
        witnesses: Vec<Witness>,
        /// false when no class met the `Q^(1/2)` threshold and the most
        /// populated one was returned instead
        qualified: bool,
        h_caps: Vec<i64>,
        box_size: u64,
        /// `(j, members)` for every nonempty class
        class_sizes: Vec<(u32, u64)>,
        density_count: u64,
        threshold: f64,
    },
}

impl FourierDichotomy {
    pub fn is_hit_density(&self) -> bool {
        matches!(self, FourierDichotomy::HitDensity { .. })
    }

    pub fn witnesses(&self) -> &[Witness] {
        match self {
            FourierDichotomy::HitDensity { .. } => &[],
            FourierDichotomy::LargeCoefficients { witnesses, .. } => witnesses,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DichotomyOptions {
    pub max_box: u64,
    pub enum_cap: u64,
}

impl Default for DichotomyOptions {
    fn default() -> Self {
        DichotomyOptions { max_box: 1 << 15, enum_cap: DEFAULT_ENUM_CAP }
    }
}

/// `h_cap_i = floor(eps_i^-1 Delta^(-1/(2k)^4))`.
pub fn h_caps(eps: &Epsilons) -> Vec<i64> {
    let k = eps.len() as f64;
    let log_delta: f64 = eps.eps().iter().map(|e| e.to_f64().ln()).sum();
    let boost = (-log_delta / (2.0 * k).powi(4)).exp();
    eps.eps().iter().map(|e| (boost / e.to_f64()).floor() as i64).collect()
}

pub fn box_size(caps: &[i64]) -> f64 {
    caps.iter().map(|&c| (2 * c + 1) as f64).product()
}

/// The `j >= 1` with `X/2^j <= m < X/2^(j-1)`; `m = X` lands in `j = 1`.
pub fn dyadic_class(m: f64, xn: u64) -> Option<u32> {
    if m <= 0.0 || xn == 0 {
        return None;
    }
    let x = xn as f64;
    let mut j = 1u32;
    while m < x / 2f64.powi(j as i32) {
        j += 1;
        if j > 1000 {
            return None;
        }
    }
    Some(j)
}

/// Tolerance for re-evaluating a witness into its window.
pub fn window_tolerance(xn: u64) -> f64 {
    xn as f64 * 2f64.powi(-30)
}

/// Independent check that `|S(h)|` lies in `[X/Q, 2X/Q]` (up to `window_tolerance`).
pub fn witness_in_window(system: &PolySystem, h: &[i64], x: &Real, q: u64) -> Result<bool> {
    let xn = floor_u64(x)?;
    let (re, im) = weyl_sum_fast(system, h, x)?;
    let m = re.hypot(im);
    let tol = window_tolerance(xn);
    let lo = xn as f64 / q as f64;
    Ok(m >= lo - tol && m <= 2.0 * lo + tol)
}

pub fn large_coefficients(system: &PolySystem, eps: &Epsilons, x: &Real, c_hit: f64) -> Result<FourierDichotomy> {
    large_coefficients_with(system, eps, x, c_hit, &DichotomyOptions::default())
}

pub fn large_coefficients_with(
    system: &PolySystem,
    eps: &Epsilons,
    x: &Real,
    c_hit: f64,
    opts: &DichotomyOptions,
) -> Result<FourierDichotomy> {
    if eps.len() != system.k() {
        return Err(Error::ShapeMismatch("eps length".into()));
    }
    let delta = eps.delta_product();
    if delta.value() > &rat(1, 4) {
        return Err(Error::Precondition(format!("Delta = {} exceeds 1/4", delta.to_f64())));
    }
    let xn = floor_u64(x)?;
    check_cap(xn, opts.enum_cap)?;
    let count = count_hits(system, eps, xn);
    let thr = BigRational::from_float(c_hit).ok_or_else(|| Error::InvalidInput("c_hit".into()))?
        * delta.value()
        * BigRational::from_integer(xn.into());
    let threshold = rat_to_f64(&thr);
    if BigRational::from_integer(count.into()) >= thr {
        return Ok(FourierDichotomy::HitDensity { density_count: count, threshold });
    }

    let caps = h_caps(eps);
    let bsz = box_size(&caps);
    if bsz > opts.max_box as f64 {
        return Err(Error::BoxTooLarge { size: bsz, cap: opts.max_box });
    }
    let k = system.k();
    let tables = frac_tables(system, xn);
    let fc = FastCis::new();
    let total = bsz as u64;
    // S(-h) is the conjugate of S(h): evaluate one representative per pair.
    let reps: Vec<Vec<i64>> = (0..total)
        .filter_map(|idx| {
            let mut rem = idx;
            let mut h = vec![0i64; k];
            for i in 0..k {
                let side = (2 * caps[i] + 1) as u64;
                h[i] = (rem % side) as i64 - caps[i];
                rem /= side;
            }
            match h.iter().find(|&&v| v != 0) {
                Some(&v) if v > 0 => Some(h),
                _ => None,
            }
        })
        .collect();
    let mods: Vec<f64> = reps
        .par_iter()
        .map(|h| {
            let (re, im) = sum_from_tables(&tables, h, &fc);
            re.hypot(im)
        })
        .collect();

    let mut classes: std::collections::BTreeMap<u32, Vec<Witness>> = Default::default();
    for (h, m) in reps.into_iter().zip(mods) {
        if let Some(j) = dyadic_class(m, xn) {
            let neg: Vec<i64> = h.iter().map(|v| -v).collect();
            let e = classes.entry(j).or_default();
            e.push(Witness { h, sum_modulus: m });
            e.push(Witness { h: neg, sum_modulus: m });
        }
    }
    if classes.is_empty() {
        return Err(Error::Degenerate("every frequency in the box has a vanishing sum".into()));
    }
    let class_sizes: Vec<(u32, u64)> = classes.iter().map(|(j, v)| (*j, v.len() as u64)).collect();
    let chosen = class_sizes.iter().find(|(j, c)| {
        // c >= 2^(j/2)  <=>  c^2 >= 2^j
        (*c as u128).pow(2) >= 1u128 << (*j).min(127)
    });
    let (j, qualified) = match chosen {
        Some((j, _)) => (*j, true),
        None => {
            let best = class_sizes.iter().max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0))).unwrap();
            (best.0, false)
        }
    };
    let mut witnesses = classes.remove(&j).unwrap();
    witnesses.sort_by(|a, b| a.h.cmp(&b.h));
    Ok(FourierDichotomy::LargeCoefficients {
        q: 1u64 << j.min(63),
        j,
        witnesses,
        qualified,
        h_caps: caps,
        box_size: total,
        class_sizes,
        density_count: count,
        threshold,
    })
}

// ---------------------------------------------------------------------------
// Weyl bound probe

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WeylBoundReport {
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

/// Compare `|sum_{n <= x} e(f(n) alpha)|` with `C (x/q^c + x/(x^d/q)^c)`.
#[allow(clippy::too_many_arguments)]
pub fn verify_weyl_bound(
    poly: &Poly,
    alpha: &Real,
    a: i64,
    q: i64,
    big_q: i64,
    x: &Real,
    c_d: f64,
    c_check: f64,
) -> Result<WeylBoundReport> {
    if q < 1 || big_q < q {
        return Err(Error::InvalidApproximation(format!("need 1 <= q <= Q, got q = {q}, Q = {big_q}")));
    }
    if a.gcd(&q) != 1 {
        return Err(Error::InvalidApproximation(format!("gcd({a}, {q}) != 1")));
    }
    let gap = (alpha.value() - rat(a, q)).abs();
    if gap > BigRational::new(BigInt::one(), BigInt::from(q) * BigInt::from(big_q)) {
        return Err(Error::InvalidApproximation(format!("|alpha - {a}/{q}| > 1/(qQ)")));
    }
    let d = poly
        .coeffs()
        .iter()
        .rposition(|c| !c.is_zero())
        .ok_or_else(|| Error::InvalidInput("zero polynomial".into()))?
        + 1;
    let xn = floor_u64(x)?;
    let coeffs: Vec<BigRational> = poly.coeffs().iter().map(|c| c.value() * alpha.value()).collect();
    let (re, im) = weyl_sum_fast_coeffs(&coeffs, xn);
    let lhs = re.hypot(im);
    let xf = x.to_f64();
    let qf = q as f64;
    let rhs = c_check * (xf / qf.powf(c_d) + xf / (xf.powi(d as i32) / qf).powf(c_d));
    Ok(WeylBoundReport { lhs, rhs, pass: lhs <= rhs })
}
