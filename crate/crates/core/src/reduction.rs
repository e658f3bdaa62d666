//! One dimension-reduction step: from quasi-orthogonal relations with a
//! common denominator, a smaller system whose solutions lift to the parent,
//! and the density comparison between the two.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::intmat::{self, det_bareiss, inverse_rat, lll_rows, solve_integer, IMat};
use crate::latgeom::{in_relation_box, inf_norm, lambda3_basis, max_minor, sublattice_determinants, GeneratorSet};
use crate::real::{rat_log2, Real};
use crate::system::{certainly_less, eval_system, Epsilons, Poly, PolySystem, SystemState};

/// LLL parameter used for the basis of the kernel lattice.
const LLL_DELTA: f64 = 0.99;

pub fn default_delta_const(k: usize, d: usize) -> Real {
    let s = 16 * ((k + d) * (k + d)) as i64;
    Real::ratio(1, s)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReductionStep {
    pub k_prime: usize,
    /// new coordinate `i` is original coordinate `perm[i]` (0-based); the
    /// first `r` are the columns of the leading minor
    pub perm: Vec<usize>,
    pub q0: u64,
    #[serde(with = "crate::serde_str::one")]
    pub d1: BigInt,
    #[serde(with = "crate::serde_str::one")]
    pub d2: BigInt,
    /// columns are a reduced basis of the kernel lattice
    #[serde(with = "crate::serde_str::mat")]
    pub z: IMat,
    /// `b'_{i,j}` in permuted order, `k x d`
    #[serde(with = "crate::serde_str::mat")]
    pub b_prime: IMat,
    /// new bounds `B'_i`; the child's tolerances are their reciprocals
    pub bounds_prime: Vec<Real>,
    pub min_h_tilde: Real,
    pub delta_const: Real,
    pub c_cfg: f64,
    pub gens: GeneratorSet,
    pub child: SystemState,
    pub parent_digest: String,
}

impl ReductionStep {
    pub fn r(&self) -> usize {
        self.gens.r
    }

    pub fn g(&self) -> &PolySystem {
        &self.child.system
    }

    pub fn eps_prime(&self) -> &Epsilons {
        &self.child.eps
    }

    pub fn y(&self) -> &Real {
        &self.child.y
    }

    /// `q0 D2`, the factor applied when lifting.
    pub fn lift_factor(&self) -> BigInt {
        &self.d2 * BigInt::from(self.q0)
    }

    /// Original index constrained by the child's `i`-th tolerance.
    pub fn child_source(&self, i: usize) -> usize {
        self.perm[self.gens.r + i]
    }
}

/// `q0^e`, exact for integral `e >= 0`.
pub fn q0_pow(q0: u64, e: f64) -> Real {
    if e >= 0.0 && e.fract() == 0.0 && e < 4096.0 {
        Real::exact(BigRational::from_integer(BigInt::from(q0).pow(e as u32)))
    } else {
        Real::from_f64((q0 as f64).powf(e))
    }
}

/// `|sum_i h_i q0 f_{i,j} - a_j| <= eta^j` for every generator, with the
/// usual interval discipline for inexact coefficients.
fn gens_fit(system: &PolySystem, gens: &GeneratorSet, q0: u64) -> bool {
    let scaled = system.scale(&Real::from_int(q0));
    gens.h_vecs.len() == gens.r
        && gens.h_vecs.iter().zip(&gens.a_vecs).all(|(h, a)| {
            h.len() == system.k() && a.len() == system.d() && in_relation_box(&scaled, &gens.bounds, &gens.eta, h, a)
        })
}

fn h_tilde(gens: &GeneratorSet) -> Vec<Vec<BigRational>> {
    gens.h_tilde()
}

pub fn reduce_dimension(
    state: &SystemState,
    gens: &GeneratorSet,
    q0: u64,
    c_cfg: f64,
    delta_const: &Real,
) -> Result<ReductionStep> {
    let (k, d, r) = (state.k(), state.system.d(), gens.r);
    if r == 0 || r >= k {
        return Err(Error::Precondition(format!("need 1 <= r < k, got r = {r}, k = {k}")));
    }
    if q0 == 0 {
        return Err(Error::Precondition("q0 must be positive".into()));
    }
    let dv = delta_const.value();
    if !dv.is_positive() || dv >= &BigRational::one() {
        return Err(Error::Precondition("delta_const must lie in (0, 1)".into()));
    }
    if gens.bounds.len() != k {
        return Err(Error::ShapeMismatch("generator bounds".into()));
    }
    if !gens_fit(&state.system, gens, q0) {
        return Err(Error::Precondition("generators are not decisively relations of the q0-scaled system".into()));
    }
    let x = &state.y;
    let qc = q0_pow(q0, c_cfg);
    if gens.eta.value() * x.value() >= *qc.value() {
        return Err(Error::Precondition("eta must be below q0^C / x".into()));
    }

    let ht = h_tilde(gens);
    let (minor, cols) = max_minor(&ht);
    if minor.is_zero() {
        return Err(Error::Dependent);
    }
    let mut perm = cols.clone();
    perm.extend((0..k).filter(|i| !cols.contains(i)));
    let m_perm: IMat = gens.h_vecs.iter().map(|h| perm.iter().map(|&c| h[c].clone()).collect()).collect();
    let h1: IMat = m_perm.iter().map(|row| row[..r].to_vec()).collect();
    let h2: IMat = m_perm.iter().map(|row| row[r..].iter().map(|v| -v).collect()).collect();

    let rep = sublattice_determinants(&h1, &h2)?;
    let (d1, d2) = (rep.det1, rep.det2);
    let lam3 = lambda3_basis(&h1, &h2)?;
    let red = lll_rows(&lam3)?.reduced;
    let z = intmat::transpose(&red);
    if det_bareiss(&z).abs() * &d2 != d1 {
        return Err(Error::Degenerate("kernel lattice determinant does not match D1/D2".into()));
    }

    let kp = k - r;
    let mut b_prime: IMat = vec![vec![BigInt::zero(); d]; k];
    let q0b = BigInt::from(q0);
    for j in 1..=d {
        let scale = d2.pow(j as u32) * q0b.pow(j as u32 - 1);
        let rhs: Vec<BigInt> = gens.a_vecs.iter().map(|a| &scale * &a[j - 1]).collect();
        let sol = solve_integer(&m_perm, &rhs)
            .ok_or_else(|| Error::IntegralityFailure(format!("no integer b' for slot {j} with q0 = {q0}")))?;
        for (i, v) in sol.into_iter().enumerate() {
            b_prime[i][j - 1] = v;
        }
    }

    let g = child_polys(&state.system, &perm, r, &d2, q0, &b_prime, &z)?;

    let bounds_prime: Vec<Real> = (0..kp)
        .map(|i| {
            let zn = inf_norm(&z.iter().map(|row| BigRational::from_integer(row[i].clone())).collect::<Vec<_>>());
            &(&delta_const.recip().pow(2) * &gens.bounds[perm[r + i]]) * &Real::exact(zn)
        })
        .collect();
    let eps_prime = Epsilons::new(bounds_prime.iter().map(Real::recip).collect())?;

    let min_h = Real::exact(ht.iter().map(|v| inf_norm(v)).min().expect("r >= 1"));
    let y = horizon(x, delta_const, &min_h, q0, c_cfg, &d2);
    if y.value() <= &BigRational::one() || y.value() >= x.value() {
        return Err(Error::DegenerateHorizon { y: y.to_f64() });
    }
    let child = SystemState::new(g, eps_prime, y)?;
    Ok(ReductionStep {
        k_prime: kp,
        perm,
        q0,
        d1,
        d2,
        z,
        b_prime,
        bounds_prime,
        min_h_tilde: min_h,
        delta_const: delta_const.clone(),
        c_cfg,
        gens: gens.clone(),
        child,
        parent_digest: state.digest(),
    })
}

/// `y = delta x min ||h~||_inf / (q0^(C+1) D2)`.
fn horizon(x: &Real, delta: &Real, min_h: &Real, q0: u64, c_cfg: f64, d2: &BigInt) -> Real {
    let den = &q0_pow(q0, c_cfg + 1.0) * &Real::exact(BigRational::from_integer(d2.clone()));
    &(&(delta * x) * min_h) / &den
}

/// `f~_i(X) = f_i(D2 q0 X) - sum_j b'_{i,j} X^j` for the trailing
/// coordinates, in permuted order.
pub fn f_tilde(system: &PolySystem, perm: &[usize], r: usize, d2: &BigInt, q0: u64, b_prime: &IMat) -> Vec<Poly> {
    let s = BigRational::from_integer(d2 * BigInt::from(q0));
    (r..perm.len())
        .map(|i| {
            let p = system.poly(perm[i]);
            let cs = (1..=system.d())
                .map(|j| {
                    let sj = Real::exact(s.pow(j as i32));
                    &(p.coeff(j) * &sj) - &Real::exact(BigRational::from_integer(b_prime[i][j - 1].clone()))
                })
                .collect();
            Poly::new(cs).expect("d >= 1")
        })
        .collect()
}

fn child_polys(system: &PolySystem, perm: &[usize], r: usize, d2: &BigInt, q0: u64, b_prime: &IMat, z: &IMat) -> Result<PolySystem> {
    let ft = f_tilde(system, perm, r, d2, q0, b_prime);
    let zinv = inverse_rat(&intmat::to_qmat(z))?;
    let d = system.d();
    let polys = zinv
        .iter()
        .map(|row| {
            let cs = (1..=d)
                .map(|j| {
                    row.iter().zip(&ft).fold(Real::zero(), |acc, (c, f)| {
                        if c.is_zero() {
                            acc
                        } else {
                            acc + &Real::exact(c.clone()) * f.coeff(j)
                        }
                    })
                })
                .collect();
            Poly::new(cs)
        })
        .collect::<Result<Vec<_>>>()?;
    PolySystem::new(polys)
}

/// `n = n' q0 D2`, verified against the parent by exact re-evaluation.
pub fn lift_solution(step: &ReductionStep, n_prime: &BigInt, parent: &SystemState) -> Result<(BigInt, Vec<Real>)> {
    if !n_prime.is_positive() || BigRational::from_integer(n_prime.clone()) >= *step.y().value() {
        return Err(Error::Precondition(format!("n' = {n_prime} must lie in [1, y)")));
    }
    let child_d = eval_system(step.g(), n_prime);
    if let Some(i) = (0..child_d.len()).find(|&i| !certainly_less(&child_d[i], step.eps_prime().get(i))) {
        return Err(Error::Precondition(format!("n' = {n_prime} misses child tolerance {i}")));
    }
    let n = n_prime * step.lift_factor();
    if BigRational::from_integer(n.clone()) >= *parent.y.value() {
        return Err(Error::HorizonOverflow { n: n.to_string(), y: parent.y.to_string() });
    }
    let dists = eval_system(&parent.system, &n);
    for (i, (dist, eps)) in dists.iter().zip(parent.eps.eps()).enumerate() {
        if !certainly_less(dist, eps) {
            return Err(Error::LiftVerification { index: i, dist: dist.to_string(), eps: eps.to_string() });
        }
    }
    Ok((n, dists))
}

// ---------------------------------------------------------------------------
// density comparison

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityReport {
    /// `log2( y / prod(B')^E' )`
    pub log2_lhs: f64,
    /// `log2( x / prod(B)^E )`
    pub log2_rhs: f64,
    pub log2_ratio: f64,
    /// `2^log2_ratio`; may underflow, the log is authoritative
    pub ratio: f64,
    pub e_new: f64,
    pub e_old: f64,
    pub log2_c_impl: f64,
    /// `prod ||h~||_inf <= q0^(-(C+1)/(E'-1))`: together with the explicit
    /// constants this makes the comparison unconditional
    pub q0_condition: bool,
    pub pass: bool,
}

/// Exponents `(E', E) = (3C^2 - C^2/k'^3, 3C^2 - C^2/k^3 - C^2/k^4)`.
pub fn density_exponents(c: f64, k: usize, kp: usize) -> (f64, f64) {
    let c2 = c * c;
    let (k, kp) = (k as f64, kp as f64);
    (3.0 * c2 - c2 / kp.powi(3), 3.0 * c2 - c2 / k.powi(3) - c2 / k.powi(4))
}

/// `log2 y - E' sum log2 B'` and `log2 x - E sum log2 B`.
pub fn density_sides(x: &Real, y: &Real, bounds: &[Real], bounds_prime: &[Real], c: f64) -> (f64, f64) {
    let (e_new, e_old) = density_exponents(c, bounds.len(), bounds_prime.len());
    let sb: f64 = bounds.iter().map(|b| rat_log2(b.value())).sum();
    let sbp: f64 = bounds_prime.iter().map(|b| rat_log2(b.value())).sum();
    (rat_log2(y.value()) - e_new * sbp, rat_log2(x.value()) - e_old * sb)
}

/// Explicit constant in `lhs >= rhs / C_impl`. With `m >= prod ||h~||_inf`,
/// `D1 <= k^(r/2) prod ||h~||_inf prod_{lead} B`, and the LLL bound
/// `prod ||z_i|| <= alpha^(k'(k'-1)/4) D1/D2` (`alpha = 1/(0.99 - 1/4)`),
/// the remaining factors are `delta^(1 + 2k'E')`, `alpha^(E' k'(k'-1)/4)` and
/// `k^(E' r/2)`.
pub fn log2_c_impl(delta: &Real, c: f64, k: usize, kp: usize) -> f64 {
    let r = k - kp;
    let (e_new, _) = density_exponents(c, k, kp);
    let alpha = 1.0 / (LLL_DELTA - 0.25);
    let kpf = kp as f64;
    -(1.0 + 2.0 * kpf * e_new) * rat_log2(delta.value())
        + e_new * alpha.log2() * kpf * (kpf - 1.0) / 4.0
        + e_new * (r as f64 / 2.0) * (k as f64).log2()
}

pub fn density_invariant(parent: &SystemState, step: &ReductionStep, c_cfg: f64) -> DensityReport {
    let k = parent.k();
    let kp = step.k_prime;
    let (e_new, e_old) = density_exponents(c_cfg, k, kp);
    let (l, rr) = density_sides(&parent.y, step.y(), &step.gens.bounds, &step.bounds_prime, c_cfg);
    let lc = log2_c_impl(&step.delta_const, c_cfg, k, kp);
    let t: f64 = h_tilde(&step.gens).iter().map(|v| rat_log2(&inf_norm(v))).sum();
    let q0_condition = -(e_new - 1.0) * t >= (c_cfg + 1.0) * (step.q0 as f64).log2();
    let log2_ratio = l - rr;
    DensityReport {
        log2_lhs: l,
        log2_rhs: rr,
        log2_ratio,
        ratio: log2_ratio.exp2(),
        e_new,
        e_old,
        log2_c_impl: lc,
        q0_condition,
        pass: log2_ratio.is_finite() && log2_ratio >= -lc,
    }
}

// ---------------------------------------------------------------------------
// replay

/// Every structural invariant of a step, re-checked from its stored data
/// against the given parent. Returns the failed checks.
pub fn check_step(parent: &SystemState, step: &ReductionStep) -> Vec<String> {
    let mut bad = Vec::new();
    let mut fail = |s: &str| bad.push(s.to_string());
    let (k, d, r) = (parent.k(), parent.system.d(), step.gens.r);
    if step.parent_digest != parent.digest() {
        fail("parent digest mismatch");
    }
    if r == 0 || r >= k || step.k_prime != k - r || step.child.k() != step.k_prime {
        fail("dimension bookkeeping");
        return bad;
    }
    let mut seen = step.perm.clone();
    seen.sort_unstable();
    if seen != (0..k).collect::<Vec<_>>() {
        fail("perm is not a permutation");
        return bad;
    }
    if step.z.len() != step.k_prime || step.b_prime.len() != k || step.b_prime.iter().any(|row| row.len() != d) {
        fail("matrix shapes");
        return bad;
    }
    if !gens_fit(&parent.system, &step.gens, step.q0) {
        fail("generators are not relations of the q0-scaled system");
    }
    let m_perm: IMat = step.gens.h_vecs.iter().map(|h| step.perm.iter().map(|&c| h[c].clone()).collect()).collect();
    let h1: IMat = m_perm.iter().map(|row| row[..r].to_vec()).collect();
    let h2: IMat = m_perm.iter().map(|row| row[r..].iter().map(|v| -v).collect()).collect();
    match sublattice_determinants(&h1, &h2) {
        Ok(rep) => {
            if rep.det1 != step.d1 || rep.det2 != step.d2 {
                fail("D1 or D2 does not match the generators");
            }
        }
        Err(_) => fail("leading minor is singular"),
    }
    if step.d2.is_zero() || !(&step.d1 % &step.d2).is_zero() {
        fail("D2 does not divide D1");
    }
    if det_bareiss(&step.z).abs() * &step.d2 != step.d1 {
        fail("|det Z| D2 != D1");
    }
    for c in 0..step.k_prime {
        let col: Vec<BigInt> = step.z.iter().map(|row| row[c].clone()).collect();
        if solve_integer(&h1, &intmat::mat_vec(&h2, &col)).is_none() {
            fail("a column of Z is outside the kernel lattice");
        }
    }
    let q0b = BigInt::from(step.q0);
    for j in 1..=d {
        let scale = step.d2.pow(j as u32) * q0b.pow(j as u32 - 1);
        let col: Vec<BigInt> = step.b_prime.iter().map(|row| row[j - 1].clone()).collect();
        let lhs = intmat::mat_vec(&m_perm, &col);
        if step.gens.a_vecs.iter().zip(&lhs).any(|(a, v)| &scale * &a[j - 1] != *v) {
            fail("b' system is inconsistent");
        }
    }
    // Z g = f~ on the coefficients and at sample points
    let ft = f_tilde(&parent.system, &step.perm, r, &step.d2, step.q0, &step.b_prime);
    let zq = intmat::to_qmat(&step.z);
    for j in 1..=d {
        for (i, f) in ft.iter().enumerate() {
            let s: BigRational = (0..step.k_prime).map(|l| &zq[i][l] * step.g().poly(l).coeff(j).value()).sum();
            if &s != f.coeff(j).value() {
                fail("Z g != f~");
            }
        }
    }
    for t in 1..=20i64 {
        let tq = BigRational::from_integer(BigInt::from(t * 7 - 3));
        let gv: Vec<BigRational> = step.g().polys().iter().map(|p| p.eval(&tq)).collect();
        let zg = intmat::mat_vec(&zq, &gv);
        if ft.iter().zip(&zg).any(|(f, v)| &f.eval(&tq) != v) {
            fail("Z g(t) != f~(t)");
            break;
        }
    }
    for i in 0..step.k_prime {
        let zn = inf_norm(&zq.iter().map(|row| row[i].clone()).collect::<Vec<_>>());
        let want = &(&step.delta_const.recip().pow(2) * &step.gens.bounds[step.perm[r + i]]) * &Real::exact(zn);
        if want.value() != step.bounds_prime[i].value() || step.eps_prime().get(i).value() != &want.value().recip() {
            fail("B' or eps' formula");
        }
    }
    let min_h = h_tilde(&step.gens).iter().map(|v| inf_norm(v)).min().unwrap_or_default();
    if &min_h != step.min_h_tilde.value() {
        fail("min ||h~|| mismatch");
    }
    let y = horizon(&parent.y, &step.delta_const, &step.min_h_tilde, step.q0, step.c_cfg, &step.d2);
    if y.value() != step.y().value() {
        fail("horizon formula");
    }
    if step.y().value() <= &BigRational::one() || step.y().value() >= parent.y.value() {
        fail("horizon outside (1, x)");
    }
    if step.gens.eta.value() * parent.y.value() >= *q0_pow(step.q0, step.c_cfg).value() {
        fail("eta >= q0^C / x");
    }
    match reduce_dimension(parent, &step.gens, step.q0, step.c_cfg, &step.delta_const) {
        Ok(again) if &again == step => {}
        _ => fail("step does not reproduce from its inputs"),
    }
    bad
}

/// `max |b'|` as a float, for diagnostics.
pub fn b_prime_size(step: &ReductionStep) -> f64 {
    step.b_prime.iter().flatten().map(|v| v.abs().to_f64().unwrap_or(f64::INFINITY)).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::intmat::to_imat;
    use crate::latgeom::{quasi_orthogonal_generators, GeneratorOutcome};
    use crate::real::rat;
    use crate::system::brute_force_min;

    fn gens_for(system: &PolySystem, eps: &Epsilons, q0: u64, eta: BigRational, n: u64) -> GeneratorSet {
        let bounds: Vec<Real> = eps.eps().iter().map(Real::recip).collect();
        let scaled = system.scale(&Real::from_int(q0));
        match quasi_orthogonal_generators(&scaled, &bounds, &Real::exact(eta), n, 0.25).unwrap() {
            GeneratorOutcome::Found(g) => g,
            o => panic!("{o:?}"),
        }
    }

    #[test]
    fn duplicate_sqrt2_reduces_and_lifts() {
        let sys = PolySystem::parse(&[&["0", "sqrt(2)"], &["0", "sqrt(2)"]]).unwrap();
        let eps = Epsilons::parse(&["0.05", "0.05"]).unwrap();
        let st = SystemState::new(sys.clone(), eps.clone(), Real::from_int(10_000)).unwrap();
        let g = gens_for(&sys, &eps, 1, rat(1, 20_000), 41);
        assert_eq!(g.h_vecs, to_imat(&[vec![1, -1]]));
        let step = reduce_dimension(&st, &g, 1, 4.0, &Real::ratio(1, 2)).unwrap();
        assert_eq!(step.k_prime, 1);
        assert_eq!((step.d1.clone(), step.d2.clone()), (BigInt::one(), BigInt::one()));
        assert!(check_step(&st, &step).is_empty(), "{:?}", check_step(&st, &step));
        // every child solution lifts
        let hi = step.y().floor().to_u64().unwrap();
        let mut lifted = 0;
        for np in 1..=hi {
            let n = BigInt::from(np);
            let cd = eval_system(step.g(), &n);
            if certainly_less(&cd[0], step.eps_prime().get(0)) {
                let (m, dists) = lift_solution(&step, &n, &st).unwrap();
                assert_eq!(m, n);
                assert!(dists.iter().zip(eps.eps()).all(|(a, b)| certainly_less(a, b)));
                lifted += 1;
            }
        }
        assert!(lifted > 0);
        let rep = density_invariant(&st, &step, 4.0);
        assert!(rep.pass && rep.log2_ratio.is_finite(), "{rep:?}");
        assert!(rep.q0_condition);
    }

    #[test]
    fn rational_dependence_with_q0() {
        // f1 = X/3 + X^2/5 and f2 = 2 f1; q0 = 15 clears every denominator
        let sys = PolySystem::parse(&[&["1/3", "1/5"], &["2/3", "2/5"], &["sqrt(3)", "0"]]).unwrap();
        let eps = Epsilons::parse(&["1/20", "1/20", "1/10"]).unwrap();
        let st = SystemState::new(sys.clone(), eps.clone(), Real::from_int(10_000_000_000i64)).unwrap();
        let gset = gens_for(&sys, &eps, 15, rat(1, 10_000_000), 41);
        let step = reduce_dimension(&st, &gset, 15, 4.0, &Real::ratio(1, 4)).unwrap();
        assert!(step.k_prime < 3);
        assert!(check_step(&st, &step).is_empty(), "{:?}", check_step(&st, &step));
        // polynomial identity at 20 sample points, recomputed independently
        let ft = f_tilde(&sys, &step.perm, step.r(), &step.d2, step.q0, &step.b_prime);
        for t in 0..20i64 {
            let tq = rat(t * t - 5, 1);
            let gv: Vec<BigRational> = step.g().polys().iter().map(|p| p.eval(&tq)).collect();
            let zg = intmat::mat_vec(&intmat::to_qmat(&step.z), &gv);
            for (f, v) in ft.iter().zip(&zg) {
                assert_eq!(&f.eval(&tq), v);
            }
        }
    }

    #[test]
    fn k1_rejected() {
        let sys = PolySystem::parse(&[&["1/2"]]).unwrap();
        let eps = Epsilons::parse(&["0.01"]).unwrap();
        let st = SystemState::new(sys.clone(), eps.clone(), Real::from_int(10_000)).unwrap();
        let g = gens_for(&sys, &eps, 1, rat(1, 20_000), 3);
        assert!(matches!(reduce_dimension(&st, &g, 1, 4.0, &Real::ratio(1, 2)), Err(Error::Precondition(_))));
    }

    #[test]
    fn tampered_steps_fail() {
        let sys = PolySystem::parse(&[&["0", "sqrt(2)"], &["0", "sqrt(2)"]]).unwrap();
        let eps = Epsilons::parse(&["0.05", "0.05"]).unwrap();
        let st = SystemState::new(sys.clone(), eps.clone(), Real::from_int(10_000)).unwrap();
        let g = gens_for(&sys, &eps, 1, rat(1, 20_000), 41);
        let step = reduce_dimension(&st, &g, 1, 4.0, &Real::ratio(1, 2)).unwrap();
        // perturb the child polynomial through b': lifted points no longer verify
        let mut bad = step.clone();
        bad.b_prime[1][1] += 1;
        let shift = PolySystem::parse(&[&["0", "sqrt(2)"]]).unwrap();
        bad.child.system = PolySystem::new(vec![Poly::new(vec![Real::zero(), shift.poly(0).coeff(2) - &Real::from_int(1)]).unwrap()]).unwrap();
        assert!(!check_step(&st, &bad).is_empty());
        let mut bad2 = step.clone();
        bad2.child.system = PolySystem::parse(&[&["1/3", "sqrt(2)"]]).unwrap();
        let (n0, _) = brute_force_min(bad2.g(), bad2.y(), 1 << 20).unwrap();
        let cd = eval_system(bad2.g(), &BigInt::from(n0));
        if certainly_less(&cd[0], bad2.eps_prime().get(0)) {
            assert!(matches!(lift_solution(&bad2, &BigInt::from(n0), &st), Err(Error::LiftVerification { .. })));
        }
        assert!(!check_step(&st, &bad2).is_empty());
        // arithmetic of the map
        let mut six = step.clone();
        six.q0 = 2;
        six.d2 = BigInt::from(3);
        assert_eq!(BigInt::from(2) * six.lift_factor(), BigInt::from(12));
    }

    #[test]
    fn lift_rejects_wrong_child_point() {
        let sys = PolySystem::parse(&[&["0", "sqrt(2)"], &["0", "sqrt(2)"]]).unwrap();
        let eps = Epsilons::parse(&["0.05", "0.05"]).unwrap();
        let st = SystemState::new(sys.clone(), eps.clone(), Real::from_int(10_000)).unwrap();
        let g = gens_for(&sys, &eps, 1, rat(1, 20_000), 41);
        let step = reduce_dimension(&st, &g, 1, 4.0, &Real::ratio(1, 2)).unwrap();
        // n' = 1: ||sqrt 2|| = 0.414 misses eps'
        assert!(matches!(lift_solution(&step, &BigInt::one(), &st), Err(Error::Precondition(_))));
        assert!(lift_solution(&step, &BigInt::from(1_000_000), &st).is_err());
    }

    #[test]
    fn density_formula() {
        // k' = k - 1, all bounds 1 except y = x: ratio is 1
        let x = Real::from_int(1000);
        let (l, r) = density_sides(&x, &x, &[Real::one(), Real::one()], &[Real::one()], 4.0);
        assert_eq!(l, r);
        // general bounds: lhs/rhs = (prod B)^E / (prod B')^E'
        let b = [Real::from_int(4), Real::from_int(8)];
        let bp = [Real::from_int(2)];
        let (l, r) = density_sides(&x, &x, &b, &bp, 4.0);
        let (en, eo) = density_exponents(4.0, 2, 1);
        assert!(((l - r) - (eo * 5.0 - en * 1.0)).abs() < 1e-9);
        // halving y halves the ratio
        let (l2, _) = density_sides(&x, &Real::from_int(500), &b, &bp, 4.0);
        assert!(((l - l2) - 1.0).abs() < 1e-12);
        assert!(en <= eo);
    }
}
