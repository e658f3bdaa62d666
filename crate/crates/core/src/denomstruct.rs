//! Structure of relation denominators: common-denominator clustering, gcd
//! graphs, dominant divisors and r-fold sum sets.

use std::collections::{BTreeMap, HashSet};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::diophantine::RelationTriple;
use crate::error::{Error, Result};

pub const DEFAULT_DELTA: f64 = 1.0 / 400.0;
pub const RFOLD_CAP: u64 = 10_000_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenominatorCluster {
    pub q0: Vec<u64>,
    pub members: Vec<RelationTriple>,
    /// `prod_j q0[j]`
    pub q_merged: u64,
}

/// Slot by slot, keep the relations sharing the most frequent `q_j`
/// (ties: smallest `q_j`).
pub fn cluster_by_denominator(relations: &[RelationTriple]) -> Result<DenominatorCluster> {
    let first = relations.first().ok_or(Error::EmptyInput)?;
    let d = first.q.len();
    if relations.iter().any(|r| r.q.len() != d) {
        return Err(Error::ShapeMismatch("relations disagree on d".into()));
    }
    let mut cur: Vec<&RelationTriple> = relations.iter().collect();
    let mut q0 = Vec::with_capacity(d);
    for j in 0..d {
        let mut freq: BTreeMap<u64, usize> = BTreeMap::new();
        for r in &cur {
            *freq.entry(r.q[j]).or_default() += 1;
        }
        let top = *freq.values().max().unwrap();
        // ascending iteration: the first maximum is the smallest q
        let qj = freq.iter().find(|(_, &c)| c == top).map(|(&q, _)| q).unwrap();
        cur.retain(|r| r.q[j] == qj);
        q0.push(qj);
    }
    let q_merged = q0
        .iter()
        .try_fold(1u64, |acc, &q| acc.checked_mul(q))
        .ok_or_else(|| Error::Cap("merged denominator exceeds 64 bits".into()))?;
    Ok(DenominatorCluster { q0, members: cur.into_iter().cloned().collect(), q_merged })
}

/// Index pairs `i < j` with `gcd(B[i], B[j]) >= threshold`.
pub fn gcd_graph(b: &[u64], threshold: u64) -> Vec<(usize, usize)> {
    let mut e = Vec::new();
    for i in 0..b.len() {
        for j in i + 1..b.len() {
            if b[i].gcd(&b[j]) >= threshold {
                e.push((i, j));
            }
        }
    }
    e
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DivisorFilterResult {
    pub d0: u64,
    pub filtered: Vec<u64>,
    pub trace: Vec<u64>,
}

/// Repeatedly divide out the smallest `l > 1` dividing at least
/// `#B / l^(delta/10)` of the current elements, dropping the others.
pub fn dominant_divisor_filter(b: &[u64], delta: f64) -> Result<DivisorFilterResult> {
    if b.is_empty() {
        return Err(Error::EmptyInput);
    }
    if b.contains(&0) {
        return Err(Error::InvalidInput("elements must be positive".into()));
    }
    if !(delta > 0.0 && delta < 1.0 / 200.0) {
        return Err(Error::InvalidInput(format!("delta = {delta} outside (0, 1/200)")));
    }
    let mut cur = b.to_vec();
    let mut d0 = 1u64;
    let mut trace = Vec::new();
    'outer: loop {
        let max = *cur.iter().max().unwrap();
        let n = cur.len() as f64;
        for l in 2..=max {
            let c = cur.iter().filter(|&&v| v % l == 0).count();
            if c > 0 && c as f64 * (l as f64).powf(delta / 10.0) >= n {
                cur = cur.into_iter().filter(|v| v % l == 0).map(|v| v / l).collect();
                d0 *= l;
                trace.push(l);
                continue 'outer;
            }
        }
        break;
    }
    Ok(DivisorFilterResult { d0, filtered: cur, trace })
}

/// Re-apply a recorded trace to the original list.
pub fn replay_divisor_trace(b: &[u64], trace: &[u64]) -> DivisorFilterResult {
    let mut cur = b.to_vec();
    let mut d0 = 1;
    for &l in trace {
        cur = cur.into_iter().filter(|v| v % l == 0).map(|v| v / l).collect();
        d0 *= l;
    }
    DivisorFilterResult { d0, filtered: cur, trace: trace.to_vec() }
}

fn binom_capped(n: u64, r: u64, cap: u64) -> Option<u64> {
    let mut acc: u128 = 1;
    for i in 0..r {
        acc = acc * (n + i) as u128 / (i + 1) as u128;
        if acc > cap as u128 {
            return None;
        }
    }
    Some(acc as u64)
}

/// Number of distinct sums over unordered `r`-multisets of `values`.
pub fn rfold_sum_count_values(values: &[BigRational], r: usize) -> Result<u64> {
    if values.is_empty() || r == 0 {
        return Err(Error::EmptyInput);
    }
    let n = values.len();
    binom_capped(n as u64, r as u64, RFOLD_CAP)
        .ok_or_else(|| Error::Cap(format!("{n} values, r = {r}: too many multisets")))?;
    let mut seen: HashSet<BigRational> = HashSet::new();
    let mut idx = vec![0usize; r];
    loop {
        let s = idx.iter().fold(BigRational::zero(), |acc, &i| acc + &values[i]);
        seen.insert(s);
        // next nondecreasing index tuple
        let mut p = r;
        while p > 0 && idx[p - 1] == n - 1 {
            p -= 1;
        }
        if p == 0 {
            break;
        }
        let v = idx[p - 1] + 1;
        for slot in &mut idx[p - 1..] {
            *slot = v;
        }
    }
    Ok(seen.len() as u64)
}

/// `rfold_sum_count_values` on `a_j/q_j` for 1-based `slot`.
pub fn rfold_sum_count(relations: &[RelationTriple], r: usize, slot: usize) -> Result<u64> {
    let d = relations.first().ok_or(Error::EmptyInput)?.q.len();
    if slot == 0 || slot > d {
        return Err(Error::InvalidInput(format!("slot {slot} outside 1..={d}")));
    }
    let vals: Vec<BigRational> = relations.iter().map(|t| t.fraction(slot - 1)).collect();
    rfold_sum_count_values(&vals, r)
}

/// Reduced denominator of `sum a_i / b_i`.
pub fn sum_denominator(fracs: &[(i64, u64)]) -> BigInt {
    fracs
        .iter()
        .fold(BigRational::zero(), |acc, &(a, b)| acc + BigRational::new(a.into(), b.into()))
        .denom()
        .clone()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DenomReport {
    pub cluster: DenominatorCluster,
    pub gcd_threshold: u64,
    pub gcd_edges: usize,
    pub divisor_filter: Vec<DivisorFilterResult>,
    /// `(r, slot, count)`
    pub rfold_counts: Vec<(usize, usize, u64)>,
}

/// Cluster plus diagnostics on every slot.
pub fn analyze(relations: &[RelationTriple], delta: f64) -> Result<DenomReport> {
    let cluster = cluster_by_denominator(relations)?;
    let d = cluster.q0.len();
    let mut all_q: Vec<u64> = relations.iter().flat_map(|t| t.q.iter().copied()).collect();
    all_q.sort_unstable();
    let qmax = *all_q.last().unwrap_or(&1);
    let r = 2.0f64;
    let thr = ((qmax as f64).powf(delta * delta / (r * r)).ceil() as u64).max(2);
    let gcd_edges = gcd_graph(&all_q, thr).len();
    let divisor_filter = (0..d)
        .map(|j| dominant_divisor_filter(&relations.iter().map(|t| t.q[j]).collect::<Vec<_>>(), delta))
        .collect::<Result<Vec<_>>>()?;
    let mut rfold_counts = Vec::new();
    for r in [2usize, 3] {
        for slot in 1..=d {
            match rfold_sum_count(relations, r, slot) {
                Ok(c) => rfold_counts.push((r, slot, c)),
                Err(Error::Cap(_)) => {}
                Err(e) => return Err(e),
            }
        }
    }
    Ok(DenomReport { cluster, gcd_threshold: thr, gcd_edges, divisor_filter, rfold_counts })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::real::{rat, Real};

    fn rel(q: &[u64]) -> RelationTriple {
        RelationTriple { a: q.iter().map(|_| BigInt::from(1)).collect(), q: q.to_vec(), h: vec![1], residuals: vec![Real::zero(); q.len()] }
    }

    #[test]
    fn clustering() {
        let c = cluster_by_denominator(&[rel(&[2]), rel(&[2]), rel(&[3])]).unwrap();
        assert_eq!((c.q0, c.members.len()), (vec![2], 2));
        let c = cluster_by_denominator(&[rel(&[2, 3]), rel(&[2, 5]), rel(&[2, 3])]).unwrap();
        assert_eq!((c.q0.clone(), c.members.len(), c.q_merged), (vec![2, 3], 2, 6));
        let again = cluster_by_denominator(&c.members).unwrap();
        assert_eq!(again, c);
        let c = cluster_by_denominator(&[rel(&[7, 4])]).unwrap();
        assert_eq!((c.q0, c.members.len()), (vec![7, 4], 1));
        // tie goes to the smaller denominator
        let c = cluster_by_denominator(&[rel(&[5]), rel(&[3])]).unwrap();
        assert_eq!(c.q0, vec![3]);
        assert!(matches!(cluster_by_denominator(&[]), Err(Error::EmptyInput)));
    }

    #[test]
    fn gcd_edges() {
        assert_eq!(gcd_graph(&[4, 6, 9], 2), vec![(0, 1), (1, 2)]);
        assert!(gcd_graph(&[2, 3, 5, 7, 11], 2).is_empty());
        let mut s = 99u64;
        let b: Vec<u64> = (0..100)
            .map(|_| {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1);
                (s >> 33) % 10_000 + 1
            })
            .collect();
        let e = gcd_graph(&b, 10);
        let mut oracle = Vec::new();
        for i in 0..b.len() {
            for j in i + 1..b.len() {
                // subtractive gcd as an independent routine
                let (mut x, mut y) = (b[i], b[j]);
                while x != y {
                    if x > y {
                        x -= y
                    } else {
                        y -= x
                    }
                }
                if x >= 10 {
                    oracle.push((i, j));
                }
            }
        }
        assert_eq!(e, oracle);
    }

    #[test]
    fn divisor_filter_examples() {
        let r = dominant_divisor_filter(&[4, 8, 12], DEFAULT_DELTA).unwrap();
        assert_eq!(r, DivisorFilterResult { d0: 4, filtered: vec![1, 2, 3], trace: vec![2, 2] });
        let r = dominant_divisor_filter(&[2, 3, 5, 7], DEFAULT_DELTA).unwrap();
        assert_eq!((r.d0, r.filtered), (1, vec![2, 3, 5, 7]));
        let r = dominant_divisor_filter(&[6, 6, 6], DEFAULT_DELTA).unwrap();
        assert_eq!(r, DivisorFilterResult { d0: 6, filtered: vec![1, 1, 1], trace: vec![2, 3] });
        assert_eq!(replay_divisor_trace(&[6, 6, 6], &r.trace), r);
        assert!(dominant_divisor_filter(&[4], 0.01).is_err());
    }

    #[test]
    fn rfold_examples() {
        assert_eq!(rfold_sum_count_values(&[rat(1, 2), rat(1, 3)], 2).unwrap(), 3);
        assert_eq!(rfold_sum_count_values(&[rat(1, 2), rat(1, 3), rat(1, 5)], 2).unwrap(), 6);
        assert_eq!(rfold_sum_count_values(&[rat(2, 7)], 3).unwrap(), 1);
        let rels = vec![rel(&[2]), rel(&[3])];
        assert_eq!(rfold_sum_count(&rels, 2, 1).unwrap(), 3);
        assert!(rfold_sum_count(&rels, 2, 2).is_err());
    }

    #[test]
    fn coprime_denominators_multiply() {
        assert_eq!(sum_denominator(&[(1, 3), (2, 5), (-1, 7)]), BigInt::from(105));
        assert_eq!(sum_denominator(&[(1, 4), (1, 9), (3, 25), (5, 11)]), BigInt::from(4 * 9 * 25 * 11));
    }
}
