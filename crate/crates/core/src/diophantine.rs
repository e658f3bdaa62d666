//! Rational reconstruction of coefficient relations from large Fourier
//! witnesses.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expsum::{FourierDichotomy, FrequencyVector};
use crate::real::{rat_log2, Real};
use crate::system::{Epsilons, PolySystem};

/// Candidates for best approximations with denominator at most `qmax`:
/// every convergent and, per partial quotient, the largest admissible
/// intermediate fraction.
fn cf_candidates(alpha: &BigRational, qmax: &BigInt) -> Vec<(BigInt, BigInt)> {
    let mut out = Vec::new();
    let a0 = alpha.floor().to_integer();
    out.push((a0.clone(), BigInt::one()));
    out.push((&a0 + 1, BigInt::one()));
    let (mut pm, mut qm) = (BigInt::one(), BigInt::zero());
    let (mut p, mut q) = (a0.clone(), BigInt::one());
    let mut rest = alpha - BigRational::from_integer(a0);
    while !rest.is_zero() {
        let v = rest.recip();
        let a = v.floor().to_integer();
        rest = v - BigRational::from_integer(a.clone());
        // largest t <= a with qm + t q <= qmax
        let tmax = (qmax - &qm).div_floor(&q);
        let t = tmax.min(a.clone());
        if t >= BigInt::one() {
            out.push((&pm + &t * &p, &qm + &t * &q));
        }
        if t < a {
            break;
        }
        let np = &pm + &a * &p;
        let nq = &qm + &a * &q;
        pm = std::mem::replace(&mut p, np);
        qm = std::mem::replace(&mut q, nq);
    }
    out.retain(|(_, q)| q <= qmax);
    out
}

/// The fraction `a/q` with `1 <= q <= qmax` minimising `|q alpha - a|`
/// (ties: smaller `q`, then smaller `a`). Such a fraction always satisfies
/// `|alpha - a/q| <= 1/(q (qmax + 1))`.
pub fn best_rational(alpha: &Real, qmax: u64) -> Result<(BigInt, u64)> {
    if qmax == 0 {
        return Err(Error::InvalidInput("Q must be >= 1".into()));
    }
    let al = alpha.value();
    let best = cf_candidates(al, &BigInt::from(qmax))
        .into_iter()
        .map(|(a, q)| {
            let err = (BigRational::from_integer(q.clone()) * al - BigRational::from_integer(a.clone())).abs();
            (err, q, a)
        })
        .min()
        .expect("q = 1 is always a candidate");
    let (_, q, a) = best;
    Ok((a, q.to_u64().unwrap()))
}

/// The fraction `a/q` with `1 <= q <= qmax` minimising `|alpha - a/q|`
/// (ties: smaller `q`).
pub fn closest_rational(alpha: &Real, qmax: u64) -> Result<(BigInt, u64)> {
    if qmax == 0 {
        return Err(Error::InvalidInput("Q must be >= 1".into()));
    }
    let al = alpha.value();
    let (_, q, a) = cf_candidates(al, &BigInt::from(qmax))
        .into_iter()
        .map(|(a, q)| ((al - BigRational::new(a.clone(), q.clone())).abs(), q, a))
        .min()
        .unwrap();
    Ok((a, q.to_u64().unwrap()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelationTriple {
    #[serde(with = "crate::serde_str::vec")]
    pub a: Vec<BigInt>,
    pub q: Vec<u64>,
    pub h: FrequencyVector,
    pub residuals: Vec<Real>,
}

impl RelationTriple {
    /// `a_j / q_j`.
    pub fn fraction(&self, j: usize) -> BigRational {
        BigRational::new(self.a[j].clone(), BigInt::from(self.q[j]))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RelationOptions {
    /// `None` selects `min(ceil(Delta^-C), 10^6)`.
    pub q_rel: Option<u64>,
    pub tol_rel: f64,
    pub c_cfg: f64,
}

impl Default for RelationOptions {
    fn default() -> Self {
        RelationOptions { q_rel: None, tol_rel: 1.0, c_cfg: 4.0 }
    }
}

pub const Q_REL_CAP: u64 = 1_000_000;

pub fn default_q_rel(eps: &Epsilons, c_cfg: f64) -> u64 {
    let l = -rat_log2(eps.delta_product().value()) * c_cfg;
    if l >= (Q_REL_CAP as f64).log2() {
        Q_REL_CAP
    } else {
        (2f64.powf(l).ceil() as u64).clamp(1, Q_REL_CAP)
    }
}

/// `sigma_j = sum_i h_i f_{i,j}` for `j = 1..d`.
pub fn sigma(system: &PolySystem, h: &[i64]) -> Vec<Real> {
    (1..=system.d())
        .map(|j| {
            system
                .polys()
                .iter()
                .zip(h)
                .fold(Real::zero(), |acc, (p, &hi)| acc + p.coeff(j) * &Real::from_int(hi))
        })
        .collect()
}

fn residuals_of(sig: &[Real], a: &[BigInt], q: &[u64]) -> Vec<Real> {
    sig.iter()
        .zip(a.iter().zip(q))
        .map(|(s, (a, &q))| (s - &Real::exact(BigRational::new(a.clone(), BigInt::from(q)))).abs())
        .collect()
}

/// Keep-test `residual_j <= tol Q^C / x^j`, in log space.
fn within_tolerance(res: &Real, j: usize, x: &Real, q_rel: u64, o: &RelationOptions) -> bool {
    if res.is_zero() {
        return true;
    }
    let lhs = rat_log2(res.value());
    let rhs = o.tol_rel.log2() + o.c_cfg * (q_rel as f64).log2() - j as f64 * rat_log2(x.value());
    lhs <= rhs
}

pub fn build_relations(
    system: &PolySystem,
    eps: &Epsilons,
    x: &Real,
    dich: &FourierDichotomy,
    opts: &RelationOptions,
) -> Result<Vec<RelationTriple>> {
    let FourierDichotomy::LargeCoefficients { witnesses, .. } = dich else {
        return Err(Error::Precondition("relations need a large-coefficient outcome".into()));
    };
    let q_rel = opts.q_rel.unwrap_or_else(|| default_q_rel(eps, opts.c_cfg));
    let mut out = Vec::new();
    for w in witnesses {
        if w.h.len() != system.k() {
            return Err(Error::ShapeMismatch("witness length".into()));
        }
        let sig = sigma(system, &w.h);
        let mut a = Vec::with_capacity(sig.len());
        let mut q = Vec::with_capacity(sig.len());
        for s in &sig {
            let (aj, qj) = best_rational(s, q_rel)?;
            a.push(aj);
            q.push(qj);
        }
        let residuals = residuals_of(&sig, &a, &q);
        if residuals.iter().enumerate().all(|(j, r)| within_tolerance(r, j + 1, x, q_rel, opts)) {
            out.push(RelationTriple { a, q, h: w.h.clone(), residuals });
        }
    }
    out.sort_by(|a, b| a.h.cmp(&b.h));
    out.dedup_by(|a, b| a.h == b.h);
    Ok(out)
}

/// Residuals recomputed from scratch.
pub fn relation_residual(triple: &RelationTriple, system: &PolySystem) -> Result<Vec<Real>> {
    if triple.h.len() != system.k() || triple.a.len() != system.d() || triple.q.len() != system.d() {
        return Err(Error::ShapeMismatch("triple does not fit the system".into()));
    }
    Ok(residuals_of(&sigma(system, &triple.h), &triple.a, &triple.q))
}

/// Stored residuals agree with a recomputation to `2^-40`, and each
/// `a_j/q_j` is in lowest terms.
pub fn check_relation(triple: &RelationTriple, system: &PolySystem) -> Result<bool> {
    let fresh = relation_residual(triple, system)?;
    let tol = crate::real::pow2(-40);
    let close = fresh
        .iter()
        .zip(&triple.residuals)
        .all(|(a, b)| (a.value() - b.value()).abs() <= tol);
    let lowest = triple.a.iter().zip(&triple.q).all(|(a, &q)| q >= 1 && a.gcd(&BigInt::from(q)).is_one());
    Ok(close && lowest && triple.residuals.len() == system.d())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expsum::Witness;
    use crate::real::rat;

    #[test]
    fn best_rational_examples() {
        assert_eq!(best_rational(&Real::exact(rat(1, 2)), 10).unwrap(), (1.into(), 2));
        assert_eq!(best_rational(&Real::zero(), 5).unwrap(), (0.into(), 1));
        let pi = Real::parse("3.14159265358979323846264338327950288419716939937510582097494459").unwrap();
        assert_eq!(best_rational(&pi, 10).unwrap(), (22.into(), 7));
        assert_eq!(best_rational(&pi, 200).unwrap(), (355.into(), 113));
        assert_eq!(best_rational(&Real::exact(rat(-7, 3)), 10).unwrap(), ((-7).into(), 3));
    }

    fn oracle(al: &BigRational, qmax: u64) -> (BigInt, u64) {
        let mut best: Option<(BigRational, u64, BigInt)> = None;
        for q in 1..=qmax {
            let t = al * BigRational::from_integer(q.into());
            let f = t.floor().to_integer();
            for a in [f.clone(), f + 1] {
                let e = (&t - BigRational::from_integer(a.clone())).abs();
                let c = (e, q, a);
                if best.as_ref().is_none_or(|b| c < *b) {
                    best = Some(c);
                }
            }
        }
        let (_, q, a) = best.unwrap();
        (a, q)
    }

    #[test]
    fn best_rational_matches_scan() {
        let mut s = 12345u64;
        for _ in 0..300 {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let num = (s >> 20) as i64 % 1_000_003 - 500_000;
            let den = ((s >> 5) % 99_991 + 1) as i64;
            let al = rat(num, den);
            let qmax = (s >> 40) % 120 + 1;
            let got = best_rational(&Real::exact(al.clone()), qmax).unwrap();
            assert_eq!(got, oracle(&al, qmax), "{al} {qmax}");
            let (a, q) = got;
            let gap = (&al - BigRational::new(a, q.into())).abs();
            assert!(gap <= BigRational::new(1.into(), BigInt::from(q) * BigInt::from(qmax + 1)));
        }
    }

    #[test]
    fn closest_rational_is_first_kind() {
        assert_eq!(closest_rational(&Real::exact(rat(3, 10)), 3).unwrap(), (1.into(), 3));
        for qmax in 1..40u64 {
            let al = rat(1000, 2718);
            let (a, q) = closest_rational(&Real::exact(al.clone()), qmax).unwrap();
            let e = (&al - BigRational::new(a, q.into())).abs();
            for qq in 1..=qmax {
                let t = (&al * BigRational::from_integer(qq.into())).round().to_integer();
                assert!(e <= (&al - BigRational::new(t, qq.into())).abs());
            }
        }
    }

    fn lc(ws: Vec<Vec<i64>>) -> FourierDichotomy {
        FourierDichotomy::LargeCoefficients {
            q: 2,
            j: 1,
            witnesses: ws.into_iter().map(|h| Witness { h, sum_modulus: 1.0 }).collect(),
            qualified: true,
            h_caps: vec![],
            box_size: 0,
            class_sizes: vec![],
            density_count: 0,
            threshold: 0.0,
        }
    }

    #[test]
    fn cancellation_and_rational() {
        let s = PolySystem::parse(&[&["0", "sqrt(2)"], &["0", "sqrt(2)"]]).unwrap();
        let e = Epsilons::parse(&["0.05", "0.05"]).unwrap();
        let r = build_relations(&s, &e, &Real::from_int(200), &lc(vec![vec![1, -1]]), &Default::default()).unwrap();
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].q, vec![1, 1]);
        assert!(r[0].a.iter().all(Zero::is_zero));
        assert!(r[0].residuals.iter().all(Real::is_zero));
        assert!(relation_residual(&r[0], &s).unwrap().iter().all(Real::is_zero));

        let s = PolySystem::parse(&[&["3/7"]]).unwrap();
        let e = Epsilons::parse(&["0.1"]).unwrap();
        let o = RelationOptions { q_rel: Some(10), ..Default::default() };
        let r = build_relations(&s, &e, &Real::from_int(100), &lc(vec![vec![1]]), &o).unwrap();
        assert_eq!((r[0].a[0].clone(), r[0].q[0]), (3.into(), 7));
        assert!(r[0].residuals[0].is_zero());
        assert!(check_relation(&r[0], &s).unwrap());
    }

    #[test]
    fn kept_set_matches_exhaustive() {
        let s = PolySystem::parse(&[&["0.31830988618379067", "sqrt(2)"], &["2/9", "0.5772156649015329"]]).unwrap();
        let e = Epsilons::parse(&["0.05", "0.05"]).unwrap();
        let x = Real::from_int(50);
        let ws: Vec<Vec<i64>> = (-3..=3).flat_map(|a| (-3..=3).map(move |b| vec![a, b])).filter(|h| h != &vec![0, 0]).collect();
        let o = RelationOptions { q_rel: Some(30), tol_rel: 1.0, c_cfg: 1.0 };
        let r = build_relations(&s, &e, &x, &lc(ws.clone()), &o).unwrap();
        let mut expect = Vec::new();
        for h in ws {
            let sig = sigma(&s, &h);
            let mut keep = true;
            for (j, sj) in sig.iter().enumerate() {
                let (a, q) = oracle(sj.value(), 30);
                let res = (sj.value() - BigRational::new(a, q.into())).abs();
                let lim = BigRational::from_integer(30.into()) / BigRational::from_integer(50.into()).pow(j as i32 + 1);
                keep &= res <= lim;
            }
            if keep {
                expect.push(h);
            }
        }
        expect.sort();
        let got: Vec<Vec<i64>> = r.iter().map(|t| t.h.clone()).collect();
        assert_eq!(got, expect);
        for t in &r {
            assert!(check_relation(t, &s).unwrap());
        }
        // idempotent
        let again = build_relations(&s, &e, &x, &lc(got.clone()), &o).unwrap();
        assert_eq!(again, r);
    }

    #[test]
    fn rejects_density_branch() {
        let s = PolySystem::parse(&[&["0"]]).unwrap();
        let e = Epsilons::parse(&["0.1"]).unwrap();
        let d = FourierDichotomy::HitDensity { density_count: 1, threshold: 0.0 };
        assert!(build_relations(&s, &e, &Real::from_int(10), &d, &Default::default()).is_err());
    }
}
