//! Exact integer and rational matrix routines: determinants, inverses,
//! column Hermite form with transform, integer kernels and solutions, and
//! integral LLL.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};

pub type IMat = Vec<Vec<BigInt>>;
pub type QMat = Vec<Vec<BigRational>>;

pub fn identity(n: usize) -> IMat {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { BigInt::one() } else { BigInt::zero() }).collect())
        .collect()
}

pub fn to_imat(m: &[Vec<i64>]) -> IMat {
    m.iter().map(|r| r.iter().map(|&v| BigInt::from(v)).collect()).collect()
}

pub fn to_qmat(m: &[Vec<BigInt>]) -> QMat {
    m.iter().map(|r| r.iter().map(|v| BigRational::from_integer(v.clone())).collect()).collect()
}

pub fn transpose<T: Clone>(m: &[Vec<T>]) -> Vec<Vec<T>> {
    if m.is_empty() {
        return Vec::new();
    }
    (0..m[0].len()).map(|j| m.iter().map(|r| r[j].clone()).collect()).collect()
}

pub fn mat_mul<T>(a: &[Vec<T>], b: &[Vec<T>]) -> Vec<Vec<T>>
where
    T: Clone + Zero,
    for<'x> &'x T: std::ops::Mul<&'x T, Output = T>,
{
    let inner = b.len();
    let cols = b.first().map_or(0, Vec::len);
    a.iter()
        .map(|r| {
            (0..cols)
                .map(|j| (0..inner).fold(T::zero(), |acc, l| acc + &r[l] * &b[l][j]))
                .collect()
        })
        .collect()
}

pub fn mat_vec<T>(a: &[Vec<T>], v: &[T]) -> Vec<T>
where
    T: Clone + Zero,
    for<'x> &'x T: std::ops::Mul<&'x T, Output = T>,
{
    a.iter().map(|r| r.iter().zip(v).fold(T::zero(), |acc, (x, y)| acc + x * y)).collect()
}

pub fn dot<T>(a: &[T], b: &[T]) -> T
where
    T: Clone + Zero,
    for<'x> &'x T: std::ops::Mul<&'x T, Output = T>,
{
    a.iter().zip(b).fold(T::zero(), |acc, (x, y)| acc + x * y)
}

/// Fraction-free determinant.
pub fn det_bareiss(m: &[Vec<BigInt>]) -> BigInt {
    let n = m.len();
    if n == 0 {
        return BigInt::one();
    }
    let mut a = m.to_vec();
    let mut sign = false;
    let mut prev = BigInt::one();
    for k in 0..n - 1 {
        if a[k][k].is_zero() {
            match (k + 1..n).find(|&i| !a[i][k].is_zero()) {
                Some(i) => {
                    a.swap(i, k);
                    sign = !sign;
                }
                None => return BigInt::zero(),
            }
        }
        for i in k + 1..n {
            for j in k + 1..n {
                a[i][j] = (&a[i][j] * &a[k][k] - &a[i][k] * &a[k][j]) / &prev;
            }
        }
        prev = a[k][k].clone();
    }
    let d = a[n - 1][n - 1].clone();
    if sign {
        -d
    } else {
        d
    }
}

/// Row-reduce `[m | aug]`; returns the determinant and the solved augment.
fn gauss(m: &[Vec<BigRational>], aug: Option<QMat>) -> (BigRational, Option<QMat>) {
    let n = m.len();
    let mut a = m.to_vec();
    let mut b = aug;
    let mut det = BigRational::one();
    for c in 0..n {
        let Some(p) = (c..n).find(|&i| !a[i][c].is_zero()) else {
            return (BigRational::zero(), None);
        };
        if p != c {
            a.swap(p, c);
            if let Some(b) = b.as_mut() {
                b.swap(p, c);
            }
            det = -det;
        }
        let piv = a[c][c].clone();
        det *= &piv;
        for i in 0..n {
            if i == c || a[i][c].is_zero() {
                continue;
            }
            let f = &a[i][c] / &piv;
            for j in c..n {
                let t = &f * &a[c][j];
                a[i][j] -= t;
            }
            if let Some(b) = b.as_mut() {
                for j in 0..b[0].len() {
                    let t = &f * &b[c][j];
                    b[i][j] -= t;
                }
            }
        }
    }
    if let Some(b) = b.as_mut() {
        for (i, row) in b.iter_mut().enumerate() {
            for v in row.iter_mut() {
                *v = &*v / &a[i][i];
            }
        }
    }
    (det, b)
}

pub fn det_rat(m: &[Vec<BigRational>]) -> BigRational {
    if m.is_empty() {
        return BigRational::one();
    }
    gauss(m, None).0
}

pub fn inverse_rat(m: &[Vec<BigRational>]) -> Result<QMat> {
    let n = m.len();
    let id = to_qmat(&identity(n));
    match gauss(m, Some(id)) {
        (d, Some(inv)) if !d.is_zero() => Ok(inv),
        _ => Err(Error::Singular),
    }
}

/// Exact Gram determinant `det(V V^T)` of the rows of `v`.
pub fn gram_det(v: &[Vec<BigRational>]) -> BigRational {
    let g: QMat = v.iter().map(|a| v.iter().map(|b| dot(a, b)).collect()).collect();
    det_rat(&g)
}

/// `(g, s, t)` with `s a + t b = g = gcd(a, b) >= 0`.
fn egcd(a: &BigInt, b: &BigInt) -> (BigInt, BigInt, BigInt) {
    let e = a.extended_gcd(b);
    if e.gcd.is_negative() {
        (-e.gcd, -e.x, -e.y)
    } else {
        (e.gcd, e.x, e.y)
    }
}

/// Column Hermite form: `M U = H` with `U` unimodular and `H` lower echelon
/// (positive pivots, entries left of each pivot reduced into `[0, pivot)`).
#[derive(Clone, Debug)]
pub struct ColumnHnf {
    pub h: IMat,
    pub u: IMat,
    /// row index of the pivot in each of the first `rank` columns
    pub pivots: Vec<usize>,
}

impl ColumnHnf {
    pub fn rank(&self) -> usize {
        self.pivots.len()
    }
}

pub fn hnf_columns(m: &[Vec<BigInt>]) -> ColumnHnf {
    let rows = m.len();
    let cols = m.first().map_or(0, Vec::len);
    let mut h = m.to_vec();
    let mut u = identity(cols);
    let mut pivots = Vec::new();
    let mut t = 0usize;
    // column operation: (c1, c2) <- (p c1 + q c2, r c1 + s c2)
    let colop = |mat: &mut IMat, c1: usize, c2: usize, p: &BigInt, q: &BigInt, r: &BigInt, s: &BigInt| {
        for row in mat.iter_mut() {
            let x = row[c1].clone();
            let y = row[c2].clone();
            row[c1] = p * &x + q * &y;
            row[c2] = r * &x + s * &y;
        }
    };
    for i in 0..rows {
        if t >= cols {
            break;
        }
        for j in t + 1..cols {
            if h[i][j].is_zero() {
                continue;
            }
            let a = h[i][t].clone();
            let b = h[i][j].clone();
            let (g, s, v) = egcd(&a, &b);
            let (r, w) = (-(&b / &g), &a / &g);
            colop(&mut h, t, j, &s, &v, &r, &w);
            colop(&mut u, t, j, &s, &v, &r, &w);
        }
        if h[i][t].is_zero() {
            continue;
        }
        if h[i][t].is_negative() {
            for row in h.iter_mut().chain(u.iter_mut()) {
                row[t] = -&row[t];
            }
        }
        let piv = h[i][t].clone();
        for j in 0..t {
            let f = h[i][j].div_floor(&piv);
            if f.is_zero() {
                continue;
            }
            for row in h.iter_mut().chain(u.iter_mut()) {
                let d = &f * &row[t];
                row[j] -= d;
            }
        }
        pivots.push(i);
        t += 1;
    }
    ColumnHnf { h, u, pivots }
}

/// Basis (as vectors) of the integer kernel `{y : M y = 0}`.
pub fn kernel_basis(m: &[Vec<BigInt>]) -> Vec<Vec<BigInt>> {
    let f = hnf_columns(m);
    let cols = f.u.len();
    (f.rank()..cols).map(|j| f.u.iter().map(|r| r[j].clone()).collect()).collect()
}

/// An integer `x` with `M x = b`, or `None` when there is none.
pub fn solve_integer(m: &[Vec<BigInt>], b: &[BigInt]) -> Option<Vec<BigInt>> {
    let f = hnf_columns(m);
    let cols = f.u.len();
    let mut z = vec![BigInt::zero(); cols];
    for (k, &p) in f.pivots.iter().enumerate() {
        let mut rhs = b[p].clone();
        for l in 0..k {
            rhs -= &f.h[p][l] * &z[l];
        }
        let (q, r) = rhs.div_rem(&f.h[p][k]);
        if !r.is_zero() {
            return None;
        }
        z[k] = q;
    }
    if mat_vec(&f.h, &z) != b {
        return None;
    }
    Some(mat_vec(&f.u, &z))
}

/// Result of integral LLL on the rows of a basis: `reduced = transform * input`.
#[derive(Clone, Debug)]
pub struct LllOutput {
    pub reduced: IMat,
    pub transform: IMat,
}

/// Integral LLL (all-integer Gram–Schmidt data) with parameter `p/q`.
pub fn lll_rows_with(basis: &[Vec<BigInt>], p: i64, q: i64) -> Result<LllOutput> {
    let n = basis.len();
    let mut b: IMat = std::iter::once(Vec::new()).chain(basis.iter().cloned()).collect();
    let mut hm: IMat = std::iter::once(Vec::new()).chain(identity(n)).collect();
    if n == 0 {
        return Ok(LllOutput { reduced: Vec::new(), transform: Vec::new() });
    }
    let mut d = vec![BigInt::zero(); n + 1];
    let mut lam = vec![vec![BigInt::zero(); n + 1]; n + 1];
    d[0] = BigInt::one();
    d[1] = dot(&b[1], &b[1]);
    if d[1].is_zero() {
        return Err(Error::Dependent);
    }
    let (pb, qb) = (BigInt::from(p), BigInt::from(q));
    let mut k = 2usize;
    let mut kmax = 1usize;

    fn red(k: usize, l: usize, b: &mut IMat, hm: &mut IMat, d: &[BigInt], lam: &mut [Vec<BigInt>]) {
        let two_l: BigInt = &lam[k][l] * 2;
        if two_l.abs() <= d[l] {
            return;
        }
        let qq = (&two_l + &d[l]).div_floor(&(&d[l] * 2));
        for c in 0..b[k].len() {
            let t = &qq * &b[l][c];
            b[k][c] -= t;
        }
        for c in 0..hm[k].len() {
            let t = &qq * &hm[l][c];
            hm[k][c] -= t;
        }
        let t = &qq * &d[l];
        lam[k][l] -= t;
        for i in 1..l {
            let t = &qq * &lam[l][i];
            lam[k][i] -= t;
        }
    }

    while k <= n {
        if k > kmax {
            kmax = k;
            for j in 1..=k {
                let mut u = dot(&b[k], &b[j]);
                for i in 1..j {
                    u = (&d[i] * &u - &lam[k][i] * &lam[j][i]) / &d[i - 1];
                }
                if j < k {
                    lam[k][j] = u;
                } else {
                    if u.is_zero() {
                        return Err(Error::Dependent);
                    }
                    d[k] = u;
                }
            }
        }
        loop {
            red(k, k - 1, &mut b, &mut hm, &d, &mut lam);
            let l2 = &lam[k][k - 1] * &lam[k][k - 1];
            let lhs = &qb * &d[k] * &d[k - 2];
            let rhs = &pb * &d[k - 1] * &d[k - 1] - &qb * &l2;
            if lhs < rhs {
                // swap k and k-1
                b.swap(k, k - 1);
                hm.swap(k, k - 1);
                for j in 1..k - 1 {
                    let t = lam[k][j].clone();
                    lam[k][j] = std::mem::replace(&mut lam[k - 1][j], t);
                }
                let lm = lam[k][k - 1].clone();
                let bb = (&d[k - 2] * &d[k] + &lm * &lm) / &d[k - 1];
                for i in k + 1..=kmax {
                    let t = lam[i][k].clone();
                    lam[i][k] = (&d[k] * &lam[i][k - 1] - &lm * &t) / &d[k - 1];
                    lam[i][k - 1] = (&bb * &t + &lm * &lam[i][k]) / &d[k];
                }
                d[k - 1] = bb;
                if k > 2 {
                    k -= 1;
                }
            } else {
                for l in (1..k - 1).rev() {
                    red(k, l, &mut b, &mut hm, &d, &mut lam);
                }
                k += 1;
                break;
            }
        }
    }
    b.remove(0);
    hm.remove(0);
    Ok(LllOutput { reduced: b, transform: hm })
}

/// Integral LLL with `delta = 99/100`.
pub fn lll_rows(basis: &[Vec<BigInt>]) -> Result<LllOutput> {
    lll_rows_with(basis, 99, 100)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Lcg(u64);
    impl Lcg {
        fn next(&mut self, lo: i64, hi: i64) -> i64 {
            self.0 = self.0.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            lo + ((self.0 >> 33) % (hi - lo + 1) as u64) as i64
        }
        fn mat(&mut self, r: usize, c: usize, lo: i64, hi: i64) -> IMat {
            (0..r).map(|_| (0..c).map(|_| BigInt::from(self.next(lo, hi))).collect()).collect()
        }
    }

    fn cofactor_det(m: &[Vec<BigInt>]) -> BigInt {
        let n = m.len();
        if n == 0 {
            return BigInt::one();
        }
        let mut acc = BigInt::zero();
        for j in 0..n {
            let minor: IMat = m[1..].iter().map(|r| r.iter().enumerate().filter(|(c, _)| *c != j).map(|(_, v)| v.clone()).collect()).collect();
            let t = &m[0][j] * cofactor_det(&minor);
            if j % 2 == 0 {
                acc += t
            } else {
                acc -= t
            }
        }
        acc
    }

    #[test]
    fn determinants_agree() {
        let mut g = Lcg(7);
        for n in 0..6 {
            for _ in 0..20 {
                let m = g.mat(n, n, -6, 6);
                let d = cofactor_det(&m);
                assert_eq!(det_bareiss(&m), d);
                assert_eq!(det_rat(&to_qmat(&m)), BigRational::from_integer(d));
            }
        }
    }

    #[test]
    fn inverse_round_trip() {
        let mut g = Lcg(8);
        for _ in 0..20 {
            let m = to_qmat(&g.mat(4, 4, -5, 5));
            match inverse_rat(&m) {
                Ok(inv) => assert_eq!(mat_mul(&m, &inv), to_qmat(&identity(4))),
                Err(Error::Singular) => assert!(det_rat(&m).is_zero()),
                Err(e) => panic!("{e}"),
            }
        }
    }

    #[test]
    fn hnf_kernel_solve() {
        let mut g = Lcg(9);
        for _ in 0..100 {
            let r = g.next(1, 4) as usize;
            let c = g.next(1, 6) as usize;
            let m = g.mat(r, c, -5, 5);
            let f = hnf_columns(&m);
            assert_eq!(mat_mul(&m, &f.u), f.h);
            assert_eq!(det_bareiss(&f.u).abs(), BigInt::one());
            for j in f.rank()..c {
                assert!(f.h.iter().all(|row| row[j].is_zero()));
            }
            for y in kernel_basis(&m) {
                assert!(mat_vec(&m, &y).iter().all(Zero::is_zero));
            }
            let x: Vec<BigInt> = (0..c).map(|_| BigInt::from(g.next(-4, 4))).collect();
            let b = mat_vec(&m, &x);
            let s = solve_integer(&m, &b).unwrap();
            assert_eq!(mat_vec(&m, &s), b);
        }
        // 2x = 1 has no integer solution
        assert!(solve_integer(&to_imat(&[vec![2]]), &[BigInt::one()]).is_none());
        assert!(solve_integer(&to_imat(&[vec![1], vec![1]]), &[BigInt::one(), BigInt::zero()]).is_none());
    }

    fn lovasz_ok(b: &IMat) -> bool {
        // recompute Gram–Schmidt rationally and check both LLL conditions
        let q = to_qmat(b);
        let n = q.len();
        let mut bs: QMat = Vec::new();
        let mut mu = vec![vec![BigRational::zero(); n]; n];
        for i in 0..n {
            let mut v = q[i].clone();
            for j in 0..i {
                mu[i][j] = dot(&q[i], &bs[j]) / dot(&bs[j], &bs[j]);
                for c in 0..v.len() {
                    v[c] -= &mu[i][j] * &bs[j][c];
                }
            }
            bs.push(v);
        }
        let half = BigRational::new(1.into(), 2.into());
        let delta = BigRational::new(99.into(), 100.into());
        for i in 0..n {
            for j in 0..i {
                if mu[i][j].abs() > half {
                    return false;
                }
            }
            if i > 0 {
                let lhs = dot(&bs[i], &bs[i]);
                let rhs = (&delta - &mu[i][i - 1] * &mu[i][i - 1]) * dot(&bs[i - 1], &bs[i - 1]);
                if lhs < rhs {
                    return false;
                }
            }
        }
        true
    }

    #[test]
    fn lll_two_dim() {
        let b = to_imat(&[vec![1, 0], vec![1_000_000, 1]]);
        let o = lll_rows(&b).unwrap();
        let mut rows: Vec<Vec<i64>> = o.reduced.iter().map(|r| r.iter().map(|v| i64::try_from(v.abs()).unwrap()).collect()).collect();
        rows.sort();
        assert_eq!(rows, vec![vec![0, 1], vec![1, 0]]);
        assert_eq!(mat_mul(&o.transform, &b), o.reduced);
    }

    #[test]
    fn lll_random() {
        let mut g = Lcg(10);
        for _ in 0..30 {
            let b = g.mat(5, 5, -50, 50);
            let d = det_bareiss(&b);
            if d.is_zero() {
                continue;
            }
            let o = lll_rows(&b).unwrap();
            assert_eq!(mat_mul(&o.transform, &b), o.reduced);
            assert_eq!(det_bareiss(&o.transform).abs(), BigInt::one());
            assert_eq!(det_bareiss(&o.reduced).abs(), d.abs());
            assert!(lovasz_ok(&o.reduced));
            let had = |m: &IMat| m.iter().map(|r| dot(r, r)).fold(BigInt::one(), |a, x| a * x);
            assert!(had(&o.reduced) <= had(&b));
        }
        assert!(matches!(lll_rows(&to_imat(&[vec![1, 2], vec![2, 4]])), Err(Error::Dependent)));
    }
}
