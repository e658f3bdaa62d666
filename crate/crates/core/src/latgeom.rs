//! Geometry of numbers for coefficient relations: the scaled relation
//! lattice, its reduction and short vectors, quasi-orthogonal generators, and
//! the sublattice determinant identity.

use std::collections::HashMap;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::intmat::{self, det_bareiss, det_rat, dot, gram_det, hnf_columns, kernel_basis, lll_rows, IMat, QMat};
use crate::real::{lcm_denoms, pow2, rat_log2, rat_to_f64, round_dyadic, Real, DEFAULT_PREC};
use crate::system::PolySystem;

pub const POINT_CAP: u64 = 1_000_000;
pub const ENUM_MAX_DIM: usize = 8;
/// Bits kept beyond `d log2(1/eta)` when rounding irrational coefficients.
const GUARD_BITS: u32 = 36;

/// `sqrt` of a nonnegative rational as a `Real`, exact when possible.
pub fn sqrt_rat(v: &BigRational) -> Real {
    let p = v.numer().magnitude();
    let q = v.denom().magnitude();
    Real::sqrt_over(&(p * q), q, DEFAULT_PREC).expect("nonzero denominator")
}

pub fn inf_norm(v: &[BigRational]) -> BigRational {
    v.iter().map(|x| x.abs()).max().unwrap_or_else(BigRational::zero)
}

/// r-dimensional volume spanned by the rows.
pub fn wedge_norm(vectors: &[Vec<BigRational>]) -> Result<Real> {
    let k = vectors.first().map_or(0, Vec::len);
    if vectors.len() > k {
        return Err(Error::Precondition(format!("{} vectors in dimension {k}", vectors.len())));
    }
    if vectors.iter().any(|v| v.len() != k) {
        return Err(Error::ShapeMismatch("ragged vectors".into()));
    }
    Ok(sqrt_rat(&gram_det(vectors)))
}

pub fn combinations(n: usize, r: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if r > n {
        return out;
    }
    let mut idx: Vec<usize> = (0..r).collect();
    loop {
        out.push(idx.clone());
        let mut i = r;
        while i > 0 && idx[i - 1] == n - r + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return out;
        }
        idx[i - 1] += 1;
        for j in i..r {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Largest `|det|` among `r x r` column minors of the `r x k` rows; ties go
/// to the lexicographically first column set.
pub fn max_minor(rows: &[Vec<BigRational>]) -> (BigRational, Vec<usize>) {
    let r = rows.len();
    let k = rows.first().map_or(0, Vec::len);
    let mut best = (BigRational::zero(), (0..r).collect::<Vec<_>>());
    for cols in combinations(k, r) {
        let m: QMat = rows.iter().map(|row| cols.iter().map(|&c| row[c].clone()).collect()).collect();
        let d = det_rat(&m).abs();
        if d > best.0 {
            best = (d, cols);
        }
    }
    best
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeBasis {
    /// basis vectors as rows
    #[serde(with = "crate::serde_str::mat")]
    pub vectors: QMat,
    pub reduced_flag: bool,
    /// `||b_i||_inf` in nondecreasing order once reduced
    pub minima_estimates: Vec<f64>,
    /// `vectors = transform * (basis as first built)`
    #[serde(with = "crate::serde_str::mat")]
    pub transform: IMat,
}

impl LatticeBasis {
    pub fn new(vectors: QMat) -> Result<LatticeBasis> {
        let m = vectors.first().map_or(0, Vec::len);
        if vectors.is_empty() || vectors.iter().any(|v| v.len() != m) || vectors.len() > m {
            return Err(Error::ShapeMismatch("basis must be n independent vectors of equal length".into()));
        }
        if gram_det(&vectors).is_zero() {
            return Err(Error::Dependent);
        }
        let n = vectors.len();
        Ok(LatticeBasis { vectors, reduced_flag: false, minima_estimates: Vec::new(), transform: intmat::identity(n) })
    }

    pub fn rank(&self) -> usize {
        self.vectors.len()
    }

    pub fn dim(&self) -> usize {
        self.vectors[0].len()
    }

    /// `sqrt(det Gram)`.
    pub fn covolume(&self) -> Real {
        sqrt_rat(&gram_det(&self.vectors))
    }
}

/// Integral LLL (`delta = 0.99`) on a uniformly rescaled copy, then a stable
/// sort by sup-norm.
pub fn reduce_basis(basis: &LatticeBasis) -> Result<LatticeBasis> {
    let l = lcm_denoms(basis.vectors.iter().flatten());
    let lq = BigRational::from_integer(l.clone());
    let ints: IMat = basis.vectors.iter().map(|v| v.iter().map(|x| (x * &lq).to_integer()).collect()).collect();
    let out = lll_rows(&ints)?;
    let mut rows: Vec<(BigRational, Vec<BigRational>, Vec<BigInt>)> = out
        .reduced
        .iter()
        .zip(&out.transform)
        .map(|(v, t)| {
            let q: Vec<BigRational> = v.iter().map(|x| BigRational::new(x.clone(), l.clone())).collect();
            (inf_norm(&q), q, t.clone())
        })
        .collect();
    rows.sort_by(|a, b| a.0.cmp(&b.0));
    let t_new: IMat = rows.iter().map(|r| r.2.clone()).collect();
    Ok(LatticeBasis {
        minima_estimates: rows.iter().map(|r| rat_to_f64(&r.0)).collect(),
        vectors: rows.into_iter().map(|r| r.1).collect(),
        reduced_flag: true,
        transform: intmat::mat_mul(&t_new, &basis.transform),
    })
}

/// Coefficient vectors (over `basis`) of the nonzero lattice points with
/// sup-norm at most `radius`. Enumeration runs inside the circumscribed
/// Euclidean ball using Gram–Schmidt data computed exactly, and every point
/// is filtered exactly.
pub fn lattice_points_inf(basis: &LatticeBasis, radius: &BigRational, cap: u64) -> Result<Vec<Vec<BigInt>>> {
    let n = basis.rank();
    if n > ENUM_MAX_DIM {
        return Err(Error::Cap(format!("enumeration limited to dimension {ENUM_MAX_DIM}")));
    }
    let b = &basis.vectors;
    let mut bstar: QMat = Vec::with_capacity(n);
    let mut mu = vec![vec![0.0f64; n]; n];
    let mut bn = vec![0.0f64; n];
    for i in 0..n {
        let mut v = b[i].clone();
        for j in 0..i {
            let m = dot(&b[i], &bstar[j]) / dot(&bstar[j], &bstar[j]);
            mu[i][j] = rat_to_f64(&m);
            for (c, x) in v.iter_mut().enumerate() {
                *x -= &m * &bstar[j][c];
            }
        }
        bn[i] = rat_to_f64(&dot(&v, &v));
        bstar.push(v);
    }
    let m = basis.dim() as f64;
    let rf = rat_to_f64(radius);
    let r2 = rf * rf * m * (1.0 + 1e-6) + 1e-300;
    let mut out = Vec::new();
    let mut x = vec![0i64; n];
    let mut seen = 0u64;
    // depth-first over levels n-1 .. 0
    fn rec(
        lvl: usize,
        partial: f64,
        x: &mut Vec<i64>,
        ctx: &(&[Vec<f64>], &[f64], f64),
        visit: &mut dyn FnMut(&[i64]) -> bool,
    ) -> bool {
        let (mu, bn, r2) = *ctx;
        let n = x.len();
        let c: f64 = -(lvl + 1..n).map(|j| mu[j][lvl] * x[j] as f64).sum::<f64>();
        let rem = (r2 - partial).max(0.0);
        let w = (rem / bn[lvl]).sqrt();
        let lo = (c - w).ceil() as i64;
        let hi = (c + w).floor() as i64;
        for v in lo..=hi {
            x[lvl] = v;
            let t = v as f64 - c;
            let p = partial + t * t * bn[lvl];
            if p > r2 {
                continue;
            }
            let ok = if lvl == 0 { visit(x) } else { rec(lvl - 1, p, x, ctx, visit) };
            if !ok {
                return false;
            }
        }
        x[lvl] = 0;
        true
    }
    let mut visit = |coef: &[i64]| -> bool {
        if coef.iter().all(|&c| c == 0) {
            return true;
        }
        let v: Vec<BigRational> = (0..basis.dim())
            .map(|c| coef.iter().zip(b).fold(BigRational::zero(), |acc, (&k, row)| acc + BigRational::from_integer(k.into()) * &row[c]))
            .collect();
        if &inf_norm(&v) <= radius {
            out.push(coef.iter().map(|&c| BigInt::from(c)).collect());
            seen += 1;
            if seen > cap {
                return false;
            }
        }
        true
    };
    let done = rec(n - 1, 0.0, &mut x, &(&mu, &bn, r2), &mut visit);
    if !done {
        return Err(Error::Cap(format!("more than {cap} lattice points")));
    }
    Ok(out)
}

/// Smallest sup-norm of a nonzero lattice vector, by enumeration.
pub fn first_minimum_inf(basis: &LatticeBasis) -> Result<BigRational> {
    let start = basis.vectors.iter().map(|v| inf_norm(v)).min().unwrap();
    let pts = lattice_points_inf(basis, &start, POINT_CAP)?;
    Ok(pts
        .iter()
        .map(|c| {
            let v: Vec<BigRational> = (0..basis.dim())
                .map(|j| c.iter().zip(&basis.vectors).fold(BigRational::zero(), |acc, (k, row)| acc + BigRational::from_integer(k.clone()) * &row[j]))
                .collect();
            inf_norm(&v)
        })
        .min()
        .unwrap_or(start))
}

// ---------------------------------------------------------------------------
// the relation lattice

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RelationLattice {
    pub basis: LatticeBasis,
    pub k: usize,
    pub d: usize,
    /// coefficients as entered into the lattice (rounded when irrational)
    #[serde(with = "crate::serde_str::mat")]
    pub beta: QMat,
    pub bounds: Vec<Real>,
    pub eta: Real,
    /// largest `|beta - beta entered|`, including input error
    #[serde(with = "crate::serde_str::one")]
    pub rounding_radius: BigRational,
}

fn check_box(system: &PolySystem, bounds: &[Real], eta: &Real) -> Result<()> {
    if bounds.len() != system.k() {
        return Err(Error::ShapeMismatch("one bound per polynomial".into()));
    }
    if bounds.iter().any(|b| b.value() < &BigRational::one()) {
        return Err(Error::Precondition("bounds must be >= 1".into()));
    }
    if !eta.value().is_positive() || eta.value() > &BigRational::new(1.into(), 100.into()) {
        return Err(Error::Precondition("eta must lie in (0, 1/100]".into()));
    }
    Ok(())
}

/// Rows `e_i/B_i - sum_j beta_ij/eta^j e_{k+j}` and `e_{k+j}/eta^j`: lattice
/// points of sup-norm at most 1 are exactly the integer `(h, a)` with
/// `|sum_i h_i beta_ij - a_j| <= eta^j` and `|h_i| <= B_i`.
pub fn build_relation_lattice(system: &PolySystem, bounds: &[Real], eta: &Real) -> Result<RelationLattice> {
    check_box(system, bounds, eta)?;
    let (k, d) = (system.k(), system.d());
    let ev = eta.value();
    let bits = (d as f64 * -rat_log2(ev)).ceil() as u32 + GUARD_BITS;
    let mut radius = BigRational::zero();
    let mut beta = vec![vec![BigRational::zero(); d]; k];
    for i in 0..k {
        for j in 0..d {
            let c = system.poly(i).coeff(j + 1);
            let v = c.value();
            let b = if c.is_exact() && v.denom().bits() <= bits as u64 { v.clone() } else { round_dyadic(v, bits) };
            let rr = (v - &b).abs() + c.error_bound();
            if rr > radius {
                radius = rr;
            }
            beta[i][j] = b;
        }
    }
    let eta_d = ev.pow(d as i32);
    let limit = &eta_d * pow2(-20);
    if radius > limit {
        return Err(Error::Precision { radius_log2: rat_log2(&radius), limit_log2: rat_log2(&limit) });
    }
    let eta_pows: Vec<BigRational> = (1..=d).map(|j| ev.pow(j as i32)).collect();
    let mut rows: QMat = Vec::with_capacity(k + d);
    for i in 0..k {
        let mut row = vec![BigRational::zero(); k + d];
        row[i] = bounds[i].value().recip();
        for j in 0..d {
            row[k + j] = -&beta[i][j] / &eta_pows[j];
        }
        rows.push(row);
    }
    for j in 0..d {
        let mut row = vec![BigRational::zero(); k + d];
        row[k + j] = eta_pows[j].recip();
        rows.push(row);
    }
    Ok(RelationLattice {
        basis: LatticeBasis::new(rows)?,
        k,
        d,
        beta,
        bounds: bounds.to_vec(),
        eta: eta.clone(),
        rounding_radius: radius,
    })
}

/// Number of integer points of the relation box, counted on the lattice as
/// built (zero included).
pub fn relation_point_count(lat: &RelationLattice, cap: u64) -> Result<u64> {
    let red = reduce_basis(&lat.basis)?;
    Ok(lattice_points_inf(&red, &BigRational::one(), cap)?.len() as u64 + 1)
}

/// Decisive membership of `(h, a)` in the relation box for the system's
/// coefficients, allowing for their error bounds.
pub fn in_relation_box(system: &PolySystem, bounds: &[Real], eta: &Real, h: &[BigInt], a: &[BigInt]) -> bool {
    if h.iter().zip(bounds).any(|(hi, b)| &BigRational::from_integer(hi.abs()) > b.value()) {
        return false;
    }
    (1..=system.d()).all(|j| {
        let mut v = -BigRational::from_integer(a[j - 1].clone());
        let mut err = BigRational::zero();
        for (p, hi) in system.polys().iter().zip(h) {
            let c = p.coeff(j);
            let hq = BigRational::from_integer(hi.clone());
            v += &hq * c.value();
            err += hq.abs() * c.error_bound();
        }
        v.abs() + err <= eta.value().pow(j as i32)
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GeneratorOptions {
    pub c_orth: f64,
    /// `None` selects `2^(k+d)`
    pub c_slack: Option<f64>,
    /// largest `r` to try
    pub r_cap: Option<usize>,
}

impl Default for GeneratorOptions {
    fn default() -> Self {
        GeneratorOptions { c_orth: 0.25, c_slack: None, r_cap: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSet {
    pub r: usize,
    #[serde(with = "crate::serde_str::mat")]
    pub h_vecs: IMat,
    #[serde(with = "crate::serde_str::mat")]
    pub a_vecs: IMat,
    pub bounds: Vec<Real>,
    pub eta: Real,
    /// `prod_j ||h~^(j)||_inf`
    pub tilde_product: Real,
    /// `||h~^(1) ^ ... ^ h~^(r)|| / prod_j ||h~^(j)||_2`
    pub orth_ratio: f64,
    /// largest `r x r` minor of the `h~` over the wedge norm
    pub minor_ratio: f64,
    pub n_target: u64,
    pub c_slack: f64,
    /// `tilde_product * N^(1/(d+1))`: the slack actually needed
    pub slack_used: f64,
    /// number of reduced basis vectors of sup-norm at most 1
    pub j_short: usize,
}

impl GeneratorSet {
    pub fn h_tilde(&self) -> QMat {
        self.h_vecs
            .iter()
            .map(|h| h.iter().zip(&self.bounds).map(|(x, b)| BigRational::from_integer(x.clone()) / b.value()).collect())
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome")]
pub enum GeneratorOutcome {
    Found(GeneratorSet),
    NoShortVector { j_short: usize, reason: String },
}

pub fn quasi_orthogonal_generators(
    system: &PolySystem,
    bounds: &[Real],
    eta: &Real,
    n_target: u64,
    c_orth: f64,
) -> Result<GeneratorOutcome> {
    quasi_orthogonal_generators_with(system, bounds, eta, n_target, &GeneratorOptions { c_orth, ..Default::default() })
}

const MAX_CANDIDATES: usize = 16;

pub fn quasi_orthogonal_generators_with(
    system: &PolySystem,
    bounds: &[Real],
    eta: &Real,
    n_target: u64,
    opts: &GeneratorOptions,
) -> Result<GeneratorOutcome> {
    if n_target < 2 {
        return Err(Error::Precondition("N_target must be >= 2".into()));
    }
    let lat = build_relation_lattice(system, bounds, eta)?;
    let red = reduce_basis(&lat.basis)?;
    let (k, d) = (lat.k, lat.d);
    let c_slack = opts.c_slack.unwrap_or(2f64.powi((k + d) as i32));
    let one = BigRational::one();
    let j_short = red.vectors.iter().take_while(|v| inf_norm(v) <= one).count();
    let mut cands: Vec<(Vec<BigInt>, Vec<BigInt>)> = Vec::new();
    for t in red.transform.iter().take(j_short) {
        let h = t[..k].to_vec();
        let a = t[k..].to_vec();
        if h.iter().all(Zero::is_zero) {
            continue;
        }
        if in_relation_box(system, bounds, eta, &h, &a) {
            cands.push((h, a));
        }
        if cands.len() == MAX_CANDIDATES {
            break;
        }
    }
    let jj = j_short;
    let r_max = if jj > d { (jj - d).min(k) } else { jj.min(1) };
    let r_hi = r_max.min(opts.r_cap.unwrap_or(k)).min(cands.len());
    if r_hi == 0 {
        return Ok(GeneratorOutcome::NoShortVector { j_short, reason: "no verified short vectors".into() });
    }
    let target = (n_target as f64).powf(-1.0 / (d as f64 + 1.0)) * c_slack;
    let c2 = opts.c_orth * opts.c_orth;
    let tilde = |h: &[BigInt]| -> Vec<BigRational> {
        h.iter().zip(bounds).map(|(x, b)| BigRational::from_integer(x.clone()) / b.value()).collect()
    };
    for r in (1..=r_hi).rev() {
        let mut scored: Vec<(BigRational, Vec<usize>, BigRational)> = combinations(cands.len(), r)
            .into_iter()
            .filter_map(|s| {
                let rows: QMat = s.iter().map(|&i| tilde(&cands[i].0)).collect();
                let g = gram_det(&rows);
                if g.is_zero() {
                    return None;
                }
                Some((max_minor(&rows).0, s, g))
            })
            .collect();
        scored.sort_by(|a, b| b.0.cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
        for (minor, s, g) in scored {
            let rows: QMat = s.iter().map(|&i| tilde(&cands[i].0)).collect();
            let l2: BigRational = rows.iter().map(|v| dot(v, v)).fold(one.clone(), |a, b| a * b);
            let orth_sq = &g / &l2;
            let tp: BigRational = rows.iter().map(|v| inf_norm(v)).fold(one.clone(), |a, b| a * b);
            if rat_to_f64(&orth_sq) < c2 || rat_to_f64(&tp) > target {
                continue;
            }
            let mut h_vecs = Vec::new();
            let mut a_vecs = Vec::new();
            for &i in &s {
                let (mut h, mut a) = cands[i].clone();
                if h.iter().find(|v| !v.is_zero()).is_some_and(|v| v.is_negative()) {
                    h.iter_mut().for_each(|v| *v = -&*v);
                    a.iter_mut().for_each(|v| *v = -&*v);
                }
                h_vecs.push(h);
                a_vecs.push(a);
            }
            let wedge = rat_to_f64(&g).sqrt();
            let tpf = rat_to_f64(&tp);
            return Ok(GeneratorOutcome::Found(GeneratorSet {
                r,
                h_vecs,
                a_vecs,
                bounds: bounds.to_vec(),
                eta: eta.clone(),
                tilde_product: Real::exact(tp),
                orth_ratio: rat_to_f64(&orth_sq).sqrt(),
                minor_ratio: rat_to_f64(&minor) / wedge,
                n_target,
                c_slack,
                slack_used: tpf * (n_target as f64).powf(1.0 / (d as f64 + 1.0)),
                j_short,
            }));
        }
    }
    Ok(GeneratorOutcome::NoShortVector { j_short, reason: "no subset met the orthogonality and size thresholds".into() })
}

/// Every `(h, a)` of the set lies decisively in the relation box.
pub fn verify_generators(system: &PolySystem, g: &GeneratorSet) -> bool {
    g.h_vecs.len() == g.r
        && g.a_vecs.len() == g.r
        && g.h_vecs.iter().zip(&g.a_vecs).all(|(h, a)| h.len() == system.k() && a.len() == system.d() && in_relation_box(system, &g.bounds, &g.eta, h, a))
}

// ---------------------------------------------------------------------------
// sublattice determinants

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SublatticeReport {
    #[serde(with = "crate::serde_str::one")]
    pub det1: BigInt,
    #[serde(with = "crate::serde_str::one")]
    pub det2: BigInt,
    #[serde(with = "crate::serde_str::one")]
    pub det3: BigInt,
    pub identity_holds: bool,
}

fn check_pair(h1: &IMat, h2: &IMat) -> Result<(usize, usize)> {
    let r = h1.len();
    if r == 0 || h1.iter().any(|row| row.len() != r) {
        return Err(Error::ShapeMismatch("H1 must be square".into()));
    }
    if h2.len() != r {
        return Err(Error::ShapeMismatch("H2 must have as many rows as H1".into()));
    }
    let l = h2[0].len();
    if h2.iter().any(|row| row.len() != l) {
        return Err(Error::ShapeMismatch("ragged H2".into()));
    }
    Ok((r, l))
}

/// Basis (rows) of `{y : H1 x = H2 y for some integer x}`.
pub fn lambda3_basis(h1: &IMat, h2: &IMat) -> Result<IMat> {
    let (r, l) = check_pair(h1, h2)?;
    if det_bareiss(h1).is_zero() {
        return Err(Error::Singular);
    }
    let m: IMat = (0..r).map(|i| h1[i].iter().cloned().chain(h2[i].iter().map(|v| -v)).collect()).collect();
    let ker = kernel_basis(&m);
    debug_assert_eq!(ker.len(), l);
    Ok(ker.into_iter().map(|v| v[r..].to_vec()).collect())
}

/// `det(Lambda_2)` for `Lambda_2 = H1 Z^r + H2 Z^l`.
pub fn det_lambda2(h1: &IMat, h2: &IMat) -> Result<BigInt> {
    let (r, _) = check_pair(h1, h2)?;
    let m: IMat = (0..r).map(|i| h1[i].iter().chain(&h2[i]).cloned().collect()).collect();
    let f = hnf_columns(&m);
    if f.rank() < r {
        return Err(Error::Singular);
    }
    Ok((0..r).map(|c| f.h[f.pivots[c]][c].abs()).fold(BigInt::one(), |a, b| a * b))
}

pub fn sublattice_determinants(h1: &IMat, h2: &IMat) -> Result<SublatticeReport> {
    let (_, l) = check_pair(h1, h2)?;
    let det1 = det_bareiss(h1).abs();
    if det1.is_zero() {
        return Err(Error::Singular);
    }
    let det2 = det_lambda2(h1, h2)?;
    let det3 = if l == 0 { BigInt::one() } else { det_bareiss(&lambda3_basis(h1, h2)?).abs() };
    let identity_holds = det1 == &det2 * &det3;
    Ok(SublatticeReport { det1, det2, det3, identity_holds })
}

/// Independent determinants by counting residues mod `D1 = |det H1|`.
///
/// `Lambda_2` and `Lambda_3` both contain `D1 Z^dim`, so
/// `#(Lambda_2 mod D1) = D1^r / det2` and `#(Lambda_3 mod D1) = D1^l / det3`.
/// Classes are enumerated outright when `D1^dim` is small; otherwise
/// `Lambda_2` is counted modulo `Lambda_1` (a group of order at most `D1`)
/// and `Lambda_3` by a dynamic program over the same group.
pub mod residue_oracle {
    use super::*;

    const DIRECT: u64 = 1 << 20;

    fn adjugate(h1: &IMat) -> IMat {
        let d = det_bareiss(h1);
        let inv = intmat::inverse_rat(&intmat::to_qmat(h1)).expect("nonsingular");
        inv.iter().map(|row| row.iter().map(|v| (v * BigRational::from_integer(d.clone())).to_integer()).collect()).collect()
    }

    fn modp(v: &BigInt, m: i64) -> i64 {
        v.mod_floor(&BigInt::from(m)).to_i64().unwrap()
    }

    fn encode(v: &[i64], m: i64) -> u64 {
        v.iter().fold(0u64, |acc, &x| acc * m as u64 + x as u64)
    }

    /// Size of the subgroup of `(Z/m)^r` generated by `gens` (each of length r).
    fn subgroup_size(gens: &[Vec<i64>], r: usize, m: i64) -> u64 {
        let mut seen: HashMap<Vec<i64>, ()> = HashMap::new();
        let zero = vec![0i64; r];
        seen.insert(zero.clone(), ());
        let mut stack = vec![zero];
        while let Some(v) = stack.pop() {
            for g in gens {
                let w: Vec<i64> = v.iter().zip(g).map(|(a, b)| (a + b).rem_euclid(m)).collect();
                if seen.insert(w.clone(), ()).is_none() {
                    stack.push(w);
                }
            }
        }
        seen.len() as u64
    }

    pub fn det2(h1: &IMat, h2: &IMat) -> Result<BigInt> {
        let (r, l) = check_pair(h1, h2)?;
        let d1 = det_bareiss(h1).abs().to_i64().ok_or_else(|| Error::Cap("det too large".into()))?;
        if d1 == 0 {
            return Err(Error::Singular);
        }
        let total = (d1 as u64).checked_pow(r as u32);
        if let Some(t) = total.filter(|&t| t <= DIRECT) {
            // residues of H1 Z^r + H2 Z^l mod D1, by closure from the generators
            let gens: Vec<Vec<i64>> = (0..r + l)
                .map(|c| (0..r).map(|i| modp(if c < r { &h1[i][c] } else { &h2[i][c - r] }, d1)).collect())
                .collect();
            let mut seen = vec![false; t as usize];
            let mut stack = vec![vec![0i64; r]];
            seen[0] = true;
            let mut count = 1u64;
            while let Some(v) = stack.pop() {
                for g in &gens {
                    let w: Vec<i64> = v.iter().zip(g).map(|(a, b)| (a + b).rem_euclid(d1)).collect();
                    let e = encode(&w, d1) as usize;
                    if !seen[e] {
                        seen[e] = true;
                        count += 1;
                        stack.push(w);
                    }
                }
            }
            return Ok(BigInt::from(t / count));
        }
        // Lambda_2 / Lambda_1 via adj(H1) H2 mod D1
        let a = intmat::mat_mul(&adjugate(h1), h2);
        let gens: Vec<Vec<i64>> = (0..l).map(|c| (0..r).map(|i| modp(&a[i][c], d1)).collect()).collect();
        Ok(BigInt::from(d1 as u64 / subgroup_size(&gens, r, d1)))
    }

    pub fn det3(h1: &IMat, h2: &IMat) -> Result<BigInt> {
        let (r, l) = check_pair(h1, h2)?;
        if l == 0 {
            return Ok(BigInt::one());
        }
        let d1 = det_bareiss(h1).abs().to_i64().ok_or_else(|| Error::Cap("det too large".into()))?;
        if d1 == 0 {
            return Err(Error::Singular);
        }
        let a = intmat::mat_mul(&adjugate(h1), h2);
        let am: Vec<Vec<i64>> = a.iter().map(|row| row.iter().map(|v| modp(v, d1)).collect()).collect();
        let total = (d1 as u128).pow(l as u32);
        let count: u128 = if total <= DIRECT as u128 {
            // every y in [0, D1)^l
            let mut y = vec![0i64; l];
            let mut c = 0u128;
            loop {
                if (0..r).all(|i| (0..l).map(|j| am[i][j] * y[j]).sum::<i64>().rem_euclid(d1) == 0) {
                    c += 1;
                }
                let mut p = 0;
                while p < l && y[p] == d1 - 1 {
                    y[p] = 0;
                    p += 1;
                }
                if p == l {
                    break;
                }
                y[p] += 1;
            }
            c
        } else {
            // partial sums sum_{j<t} A[:,j] y_j mod D1, with multiplicities
            let mut states: HashMap<Vec<i64>, u128> = HashMap::new();
            states.insert(vec![0; r], 1);
            for j in 0..l {
                let mut next: HashMap<Vec<i64>, u128> = HashMap::new();
                for (s, c) in &states {
                    for v in 0..d1 {
                        let w: Vec<i64> = (0..r).map(|i| (s[i] + am[i][j] * v).rem_euclid(d1)).collect();
                        *next.entry(w).or_default() += c;
                    }
                }
                states = next;
            }
            states.get(&vec![0; r]).copied().unwrap_or(0)
        };
        Ok(BigInt::from(total / count))
    }
}

/// `|det|` of an integer matrix as a `BigUint`.
pub fn abs_det(m: &IMat) -> BigUint {
    det_bareiss(m).magnitude().clone()
}
