//! Multi-index combinatorics and the truncated index family.
//!
//! Indices are ordered by total degree first; ties are broken at the last
//! coordinate where the two indices differ, the smaller entry there coming
//! first. The family `Λ(α)` collects every index `≤ α` in that order. It is
//! downward closed as an order ideal of a total order, which is what makes
//! the truncated shifts below commute, but membership is not entrywise
//! domination: `(2,0) ∈ Λ((1,1))` even though `(2,0) ≰ (1,1)` entrywise.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::matrix::{czeros, CMatrix, C64};

/// A multi-index in `Z_{>=0}^n`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct MultiIndex(Vec<usize>);

impl MultiIndex {
    pub fn new(entries: Vec<usize>) -> Self {
        assert!(!entries.is_empty(), "multi-index needs at least one entry");
        MultiIndex(entries)
    }

    pub fn zero(n: usize) -> Self {
        MultiIndex(vec![0; n])
    }

    /// Unit index `ε_i` (0-based coordinate).
    pub fn unit(n: usize, i: usize) -> Self {
        let mut v = vec![0; n];
        v[i] = 1;
        MultiIndex(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn degree(&self) -> usize {
        self.0.iter().sum()
    }

    pub fn entries(&self) -> &[usize] {
        &self.0
    }

    pub fn get(&self, i: usize) -> usize {
        self.0[i]
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&e| e == 0)
    }

    /// `self + ε_i`.
    pub fn bump(&self, i: usize) -> Self {
        let mut v = self.0.clone();
        v[i] += 1;
        MultiIndex(v)
    }

    /// `self − ε_i`, if the i-th entry is positive.
    pub fn lower(&self, i: usize) -> Option<Self> {
        if self.0[i] == 0 {
            return None;
        }
        let mut v = self.0.clone();
        v[i] -= 1;
        Some(MultiIndex(v))
    }

    pub fn add(&self, other: &Self) -> Self {
        MultiIndex(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    /// Entrywise difference, if `other ≤ self` entrywise.
    pub fn checked_sub(&self, other: &Self) -> Option<Self> {
        if self.dim() != other.dim() || !other.le_entrywise(self) {
            return None;
        }
        Some(MultiIndex(
            self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect(),
        ))
    }

    /// Entrywise domination `self_i ≤ other_i` for every coordinate.
    pub fn le_entrywise(&self, other: &Self) -> bool {
        self.dim() == other.dim() && self.0.iter().zip(&other.0).all(|(a, b)| a <= b)
    }

    /// `∏ m_i!` as an exact small float.
    pub fn factorial(&self) -> f64 {
        self.0
            .iter()
            .map(|&m| (1..=m).map(|k| k as f64).product::<f64>())
            .product()
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|e| e.to_string()).collect();
        write!(f, "{}", parts.join(","))
    }
}

impl fmt::Debug for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({})", self)
    }
}

impl FromStr for MultiIndex {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let entries: std::result::Result<Vec<usize>, _> =
            s.split(',').map(|p| p.trim().parse::<usize>()).collect();
        match entries {
            Ok(v) if !v.is_empty() => Ok(MultiIndex(v)),
            _ => Err(Error::InvalidParams(format!(
                "cannot parse multi-index from {s:?}; expected comma-separated non-negative integers"
            ))),
        }
    }
}

impl Ord for MultiIndex {
    /// Degree first, ties broken at the last differing coordinate (smaller
    /// entry first). Indices of different lengths compare by length so that
    /// ordered maps stay total; same-length comparison is the graded order.
    fn cmp(&self, other: &Self) -> Ordering {
        self.dim()
            .cmp(&other.dim())
            .then_with(|| self.degree().cmp(&other.degree()))
            .then_with(|| {
                for (a, b) in self.0.iter().zip(&other.0).rev() {
                    match a.cmp(b) {
                        Ordering::Equal => continue,
                        ord => return ord,
                    }
                }
                Ordering::Equal
            })
    }
}

impl PartialOrd for MultiIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Graded comparison of two indices of equal length.
pub fn graded_colex_compare(a: &MultiIndex, b: &MultiIndex) -> Result<Ordering> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch(format!(
            "cannot compare indices of lengths {} and {}",
            a.dim(),
            b.dim()
        )));
    }
    Ok(a.cmp(b))
}

/// All indices of `n` entries with total degree exactly `d`, in graded order.
pub fn enumerate_degree(n: usize, d: usize) -> Vec<MultiIndex> {
    fn rec(n: usize, d: usize, prefix: &mut Vec<usize>, out: &mut Vec<MultiIndex>) {
        if n == 1 {
            prefix.push(d);
            out.push(MultiIndex::new(prefix.clone()));
            prefix.pop();
            return;
        }
        for first in 0..=d {
            prefix.push(first);
            rec(n - 1, d - first, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(n, d, &mut Vec::new(), &mut out);
    out.sort();
    out
}

/// All indices of `n` entries with total degree at most `dmax`, in graded order.
pub fn enumerate_up_to(n: usize, dmax: usize) -> Vec<MultiIndex> {
    let mut out = Vec::new();
    for d in 0..=dmax {
        out.extend(enumerate_degree(n, d));
    }
    out
}

/// The index family `Λ(α)` together with rank lookups.
#[derive(Clone, Debug)]
pub struct IndexFamily {
    alpha: MultiIndex,
    members: Vec<MultiIndex>,
    rank: HashMap<MultiIndex, usize>,
}

impl IndexFamily {
    pub fn alpha(&self) -> &MultiIndex {
        &self.alpha
    }

    pub fn dim(&self) -> usize {
        self.alpha.dim()
    }

    /// Number of members, the size of the member kernels.
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn members(&self) -> &[MultiIndex] {
        &self.members
    }

    pub fn member(&self, rank: usize) -> &MultiIndex {
        &self.members[rank]
    }

    pub fn rank_of(&self, idx: &MultiIndex) -> Option<usize> {
        self.rank.get(idx).copied()
    }

    pub fn contains(&self, idx: &MultiIndex) -> bool {
        self.rank.contains_key(idx)
    }
}

/// Enumerate `Λ(α) = {β : β ≤ α}` in increasing order. Rank 0 is always the
/// zero index.
pub fn index_family(alpha: &MultiIndex) -> IndexFamily {
    let n = alpha.dim();
    let mut members = Vec::new();
    for d in 0..alpha.degree() {
        members.extend(enumerate_degree(n, d));
    }
    for idx in enumerate_degree(n, alpha.degree()) {
        if idx.cmp(alpha) != Ordering::Greater {
            members.push(idx);
        }
    }
    let rank = members
        .iter()
        .cloned()
        .enumerate()
        .map(|(k, m)| (m, k))
        .collect();
    IndexFamily {
        alpha: alpha.clone(),
        members,
        rank,
    }
}

pub(crate) fn binomial(top: usize, bottom: usize) -> f64 {
    if bottom > top {
        return 0.0;
    }
    let k = bottom.min(top - bottom);
    let mut acc = 1.0_f64;
    for j in 0..k {
        acc = acc * (top - j) as f64 / (j + 1) as f64;
    }
    acc.round()
}

/// `∏_i C(γ_i, β_i)`; zero as soon as some `β_i > γ_i`.
pub fn multi_binomial(gamma: &MultiIndex, beta: &MultiIndex) -> Result<f64> {
    if gamma.dim() != beta.dim() {
        return Err(Error::DimensionMismatch(format!(
            "binomial of indices with lengths {} and {}",
            gamma.dim(),
            beta.dim()
        )));
    }
    Ok(gamma
        .entries()
        .iter()
        .zip(beta.entries())
        .map(|(&g, &b)| binomial(g, b))
        .product())
}

/// Rising factorial `∏_i x_i (x_i+1) ⋯ (x_i+m_i−1)`; empty products are 1.
pub fn multi_pochhammer(x: &[f64], m: &MultiIndex) -> Result<f64> {
    if x.len() != m.dim() {
        return Err(Error::DimensionMismatch(format!(
            "pochhammer of base length {} against index length {}",
            x.len(),
            m.dim()
        )));
    }
    let mut acc = 1.0;
    for (&xi, &mi) in x.iter().zip(m.entries()) {
        for k in 0..mi {
            acc *= xi + k as f64;
        }
    }
    Ok(acc)
}

/// Matrix of the i-th truncated shift on `Λ`: `e_θ ↦ (θ_i+1) e_{θ+ε_i}`,
/// dropped to zero when `θ+ε_i` leaves the family.
pub fn shift_matrix(coord: usize, fam: &IndexFamily) -> Result<CMatrix> {
    if coord >= fam.dim() {
        return Err(Error::DimensionMismatch(format!(
            "shift coordinate {coord} out of range for n = {}",
            fam.dim()
        )));
    }
    let r = fam.len();
    let mut m = czeros(r, r);
    for (col, theta) in fam.members().iter().enumerate() {
        if let Some(row) = fam.rank_of(&theta.bump(coord)) {
            m[(row, col)] = C64::new((theta.get(coord) + 1) as f64, 0.0);
        }
    }
    Ok(m)
}

/// Diagonal matrix with entries `∏_i (1−u_i)^{−θ_i}` over the family.
pub fn diagonal_matrix(u: &[C64], fam: &IndexFamily) -> Result<CMatrix> {
    if u.len() != fam.dim() {
        return Err(Error::DimensionMismatch(format!(
            "diagonal argument length {} against n = {}",
            u.len(),
            fam.dim()
        )));
    }
    let one = C64::new(1.0, 0.0);
    for (i, ui) in u.iter().enumerate() {
        if (one - ui).norm() == 0.0 {
            return Err(Error::Singularity(format!("1 - u_{i} vanishes")));
        }
    }
    let r = fam.len();
    let mut m = czeros(r, r);
    for (k, theta) in fam.members().iter().enumerate() {
        let mut d = one;
        for (i, ui) in u.iter().enumerate() {
            d *= (one - ui).powi(-(theta.get(i) as i32));
        }
        m[(k, k)] = d;
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mi(v: &[usize]) -> MultiIndex {
        MultiIndex::new(v.to_vec())
    }

    #[test]
    fn degree_dominates_the_order() {
        assert_eq!(
            graded_colex_compare(&mi(&[0, 0]), &mi(&[1, 0])).unwrap(),
            Ordering::Less
        );
        assert_eq!(
            graded_colex_compare(&mi(&[2, 0]), &mi(&[0, 1])).unwrap(),
            Ordering::Greater
        );
    }

    #[test]
    fn ties_break_at_the_last_differing_coordinate() {
        assert_eq!(
            graded_colex_compare(&mi(&[1, 0]), &mi(&[0, 1])).unwrap(),
            Ordering::Less
        );
        assert_eq!(
            graded_colex_compare(&mi(&[2, 0]), &mi(&[1, 1])).unwrap(),
            Ordering::Less
        );
        assert_eq!(
            graded_colex_compare(&mi(&[1, 1]), &mi(&[0, 2])).unwrap(),
            Ordering::Less
        );
        assert_eq!(
            graded_colex_compare(&mi(&[1, 0, 2]), &mi(&[1, 0, 2])).unwrap(),
            Ordering::Equal
        );
    }

    #[test]
    fn compare_rejects_length_mismatch() {
        assert!(graded_colex_compare(&mi(&[1]), &mi(&[1, 0])).is_err());
    }

    #[test]
    fn family_of_scalar_alpha_two() {
        let fam = index_family(&mi(&[2]));
        let got: Vec<_> = fam.members().iter().map(|m| m.to_string()).collect();
        assert_eq!(got, ["0", "1", "2"]);
        assert_eq!(fam.len(), 3);
    }

    #[test]
    fn family_of_alpha_zero_one() {
        let fam = index_family(&mi(&[0, 1]));
        let got: Vec<_> = fam.members().iter().map(|m| m.to_string()).collect();
        assert_eq!(got, ["0,0", "1,0", "0,1"]);
    }

    #[test]
    fn family_of_alpha_one_one_contains_two_zero() {
        let fam = index_family(&mi(&[1, 1]));
        let got: Vec<_> = fam.members().iter().map(|m| m.to_string()).collect();
        assert_eq!(got, ["0,0", "1,0", "0,1", "2,0", "1,1"]);
        assert!(fam.contains(&mi(&[2, 0])));
        assert!(!mi(&[2, 0]).le_entrywise(&mi(&[1, 1])));
    }

    #[test]
    fn family_of_zero_alpha_is_the_singleton() {
        let fam = index_family(&mi(&[0, 0, 0]));
        assert_eq!(fam.len(), 1);
        assert_eq!(fam.member(0), &MultiIndex::zero(3));
    }

    #[test]
    fn family_rank_zero_is_the_zero_index() {
        for alpha in enumerate_up_to(3, 3) {
            let fam = index_family(&alpha);
            assert_eq!(fam.member(0), &MultiIndex::zero(3));
            // members strictly increase
            for w in fam.members().windows(2) {
                assert_eq!(w[0].cmp(&w[1]), Ordering::Less);
            }
        }
    }

    #[test]
    fn binomial_examples() {
        assert_eq!(multi_binomial(&mi(&[2, 1]), &mi(&[1, 0])).unwrap(), 2.0);
        assert_eq!(multi_binomial(&mi(&[1, 1]), &mi(&[2, 0])).unwrap(), 0.0);
        assert_eq!(multi_binomial(&mi(&[3]), &mi(&[3])).unwrap(), 1.0);
    }

    #[test]
    fn binomial_matches_factorial_oracle() {
        // C(t, b) = t! / (b! (t-b)!) checked over a small exhaustive range.
        let fact = |k: usize| (1..=k).map(|j| j as f64).product::<f64>();
        for t in 0..=8usize {
            for b in 0..=t {
                let expect = fact(t) / (fact(b) * fact(t - b));
                assert_eq!(binomial(t, b), expect, "C({t},{b})");
            }
        }
    }

    #[test]
    fn binomial_vandermonde_identity() {
        // Σ_k C(m,k) C(n,p−k) = C(m+n,p)
        for m in 0..=5usize {
            for n in 0..=5usize {
                for p in 0..=(m + n) {
                    let mut lhs = 0.0;
                    for k in 0..=p {
                        lhs += binomial(m, k) * binomial(n, p - k);
                    }
                    assert_eq!(lhs, binomial(m + n, p));
                }
            }
        }
    }

    #[test]
    fn pochhammer_examples() {
        assert_eq!(
            multi_pochhammer(&[2.0, 3.0], &mi(&[2, 1])).unwrap(),
            2.0 * 3.0 * 3.0
        );
        assert_eq!(multi_pochhammer(&[5.5, 0.1], &mi(&[0, 0])).unwrap(), 1.0);
    }

    #[test]
    fn pochhammer_matches_gamma_ratio() {
        use statrs::function::gamma::ln_gamma;
        for x in [0.5_f64, 1.5, 2.0, 3.25] {
            for m in 0..6usize {
                let got = multi_pochhammer(&[x], &mi(&[m])).unwrap();
                let expect = (ln_gamma(x + m as f64) - ln_gamma(x)).exp();
                assert!(
                    (got - expect).abs() <= 1e-10 * expect.abs().max(1.0),
                    "({x})_{m}: {got} vs {expect}"
                );
            }
        }
    }

    #[test]
    fn shift_matrix_truncates_at_the_family_boundary() {
        let fam = index_family(&mi(&[2]));
        let s = shift_matrix(0, &fam).unwrap();
        // e_0 -> e_1, e_1 -> 2 e_2, e_2 -> 0
        assert_eq!(s[(1, 0)].re, 1.0);
        assert_eq!(s[(2, 1)].re, 2.0);
        assert_eq!(s.column(2).iter().map(|c| c.norm()).sum::<f64>(), 0.0);
    }

    #[test]
    fn shift_matrices_commute_on_every_small_family() {
        for n in 1..=3usize {
            for alpha in enumerate_up_to(n, 3) {
                if alpha.dim() != n {
                    continue;
                }
                let fam = index_family(&alpha);
                let shifts: Vec<_> = (0..n).map(|i| shift_matrix(i, &fam).unwrap()).collect();
                for i in 0..n {
                    for j in 0..n {
                        let ab = &shifts[i] * &shifts[j];
                        let ba = &shifts[j] * &shifts[i];
                        assert_eq!(ab, ba, "alpha {alpha:?}, coords {i},{j}");
                    }
                }
            }
        }
    }

    #[test]
    fn diagonal_matrix_examples() {
        let fam = index_family(&mi(&[2]));
        let d = diagonal_matrix(&[C64::new(0.0, 0.0)], &fam).unwrap();
        assert_eq!(d, crate::matrix::cidentity(3));

        let d = diagonal_matrix(&[C64::new(0.25, 0.0)], &fam).unwrap();
        assert!((d[(0, 0)].re - 1.0).abs() < 1e-15);
        assert!((d[(1, 1)].re - 4.0 / 3.0).abs() < 1e-15);
        assert!((d[(2, 2)].re - 16.0 / 9.0).abs() < 1e-15);

        assert!(diagonal_matrix(&[C64::new(1.0, 0.0)], &fam).is_err());
    }

    #[test]
    fn multi_index_parsing_roundtrip() {
        let idx: MultiIndex = "2,0,1".parse().unwrap();
        assert_eq!(idx, mi(&[2, 0, 1]));
        assert_eq!(idx.to_string(), "2,0,1");
        assert!("2,-1".parse::<MultiIndex>().is_err());
        assert!("".parse::<MultiIndex>().is_err());
    }
}
