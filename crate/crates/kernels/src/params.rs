//! Parameter tuples `(α, λ, μ)` for the kernel family, with the derived
//! combinatorial data cached at construction.

use std::collections::BTreeMap;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::matrix::{czeros, CMatrix, C64};
use crate::multiindex::{
    index_family, multi_binomial, multi_pochhammer, shift_matrix, IndexFamily, MultiIndex,
};

/// A member of the kernel family: the truncation index `α`, the positive
/// weight tuple `λ`, and one positive coefficient `μ_β` per member of `Λ(α)`
/// with `μ_0 = 1`.
#[derive(Clone, Debug)]
pub struct KernelParams {
    family: IndexFamily,
    lambda: Vec<f64>,
    mu: Vec<f64>,
    shifts: Vec<CMatrix>,
    b_diag: Vec<f64>,
}

impl KernelParams {
    /// Build a parameter tuple with `μ` given in family rank order.
    pub fn new(alpha: MultiIndex, lambda: Vec<f64>, mu: Vec<f64>) -> Result<Self> {
        let n = alpha.dim();
        if lambda.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "lambda has {} entries for n = {n}",
                lambda.len()
            )));
        }
        for (i, l) in lambda.iter().enumerate() {
            if !l.is_finite() || *l <= 0.0 {
                return Err(Error::InvalidParams(format!(
                    "lambda[{i}] = {l} must be a positive finite real"
                )));
            }
        }
        let family = index_family(&alpha);
        if mu.len() != family.len() {
            return Err(Error::InvalidParams(format!(
                "mu has {} entries but the index family has {} members",
                mu.len(),
                family.len()
            )));
        }
        if mu[0] != 1.0 {
            return Err(Error::InvalidParams(format!(
                "mu at the zero index must equal 1, got {}",
                mu[0]
            )));
        }
        for (k, m) in mu.iter().enumerate() {
            if !m.is_finite() || *m <= 0.0 {
                return Err(Error::InvalidParams(format!(
                    "mu[{}] = {m} must be a positive finite real",
                    family.member(k)
                )));
            }
        }
        let shifts = (0..n)
            .map(|i| shift_matrix(i, &family))
            .collect::<Result<Vec<_>>>()?;
        let b_diag = kernel_diag_at_zero(&family, &lambda, &mu)?;
        Ok(KernelParams {
            family,
            lambda,
            mu,
            shifts,
            b_diag,
        })
    }

    /// Build with all coefficients `μ_β = 1`.
    pub fn with_unit_mu(alpha: MultiIndex, lambda: Vec<f64>) -> Result<Self> {
        let r = index_family(&alpha).len();
        Self::new(alpha, lambda, vec![1.0; r])
    }

    /// Build from a map keyed by multi-index; every family member must be
    /// present exactly once and no extra keys are allowed.
    pub fn from_mu_map(
        alpha: MultiIndex,
        lambda: Vec<f64>,
        map: &BTreeMap<MultiIndex, f64>,
    ) -> Result<Self> {
        let family = index_family(&alpha);
        for key in map.keys() {
            if !family.contains(key) {
                return Err(Error::InvalidParams(format!(
                    "mu key {key} is not a member of the index family of {}",
                    family.alpha()
                )));
            }
        }
        let mut mu = Vec::with_capacity(family.len());
        for member in family.members() {
            match map.get(member) {
                Some(v) => mu.push(*v),
                None => {
                    return Err(Error::InvalidParams(format!(
                        "mu entry for index {member} is missing"
                    )))
                }
            }
        }
        Self::new(alpha, lambda, mu)
    }

    pub fn n(&self) -> usize {
        self.family.dim()
    }

    /// Size of the member kernel matrices.
    pub fn r(&self) -> usize {
        self.family.len()
    }

    pub fn alpha(&self) -> &MultiIndex {
        self.family.alpha()
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn mu_of(&self, beta: &MultiIndex) -> Option<f64> {
        self.family.rank_of(beta).map(|k| self.mu[k])
    }

    pub fn family(&self) -> &IndexFamily {
        &self.family
    }

    /// Truncated shift matrix for a 0-based coordinate.
    pub fn shift(&self, coord: usize) -> &CMatrix {
        &self.shifts[coord]
    }

    /// Diagonal of the kernel value at the origin.
    pub fn b_diag(&self) -> &[f64] {
        &self.b_diag
    }

    /// `λ + 2β` for a family member.
    pub fn lambda_shifted(&self, beta: &MultiIndex) -> Vec<f64> {
        self.lambda
            .iter()
            .zip(beta.entries())
            .map(|(l, b)| l + 2.0 * *b as f64)
            .collect()
    }

    /// `Σ_i c_i S_i` for coefficient vector `c`.
    pub fn shift_combination(&self, coeffs: &[C64]) -> CMatrix {
        let r = self.r();
        let mut m = czeros(r, r);
        for (c, s) in coeffs.iter().zip(&self.shifts) {
            if c.norm_sqr() != 0.0 {
                m += s.map(|e| e * c);
            }
        }
        m
    }

    /// Degree of `α`; powers of shift combinations vanish beyond it.
    pub fn nilpotency(&self) -> usize {
        self.alpha().degree()
    }
}

/// Diagonal of `K(0,0)`: entry `θ` is
/// `Σ_{β ≤ θ entrywise} μ_β² C(θ,β)² (θ−β)! / (λ+2β)_{θ−β}`.
fn kernel_diag_at_zero(family: &IndexFamily, lambda: &[f64], mu: &[f64]) -> Result<Vec<f64>> {
    let mut diag = Vec::with_capacity(family.len());
    for theta in family.members() {
        let mut acc = 0.0;
        for (k, beta) in family.members().iter().enumerate() {
            let c = multi_binomial(theta, beta)?;
            if c == 0.0 {
                continue;
            }
            let gap = theta.checked_sub(beta).expect("binomial filtered domination");
            let shifted: Vec<f64> = lambda
                .iter()
                .zip(beta.entries())
                .map(|(l, b)| l + 2.0 * *b as f64)
                .collect();
            acc += mu[k] * mu[k] * c * c * gap.factorial() / multi_pochhammer(&shifted, &gap)?;
        }
        diag.push(acc);
    }
    Ok(diag)
}

/// The lower-triangular matrix `L(λ)` with
/// `L_{θβ} = C(θ,β)² (θ−β)! / (λ+2β)_{θ−β}` (zero unless `β ≤ θ` entrywise),
/// so that the diagonal of `K(0,0)` equals `L(λ)` applied to `(μ_β²)_β`.
pub fn l_matrix(lambda: &[f64], family: &IndexFamily) -> Result<DMatrix<f64>> {
    if lambda.len() != family.dim() {
        return Err(Error::DimensionMismatch(format!(
            "lambda has {} entries for n = {}",
            lambda.len(),
            family.dim()
        )));
    }
    let r = family.len();
    let mut l = DMatrix::<f64>::zeros(r, r);
    for (row, theta) in family.members().iter().enumerate() {
        for (col, beta) in family.members().iter().enumerate() {
            let c = multi_binomial(theta, beta)?;
            if c == 0.0 {
                continue;
            }
            let gap = theta.checked_sub(beta).expect("binomial filtered domination");
            let shifted: Vec<f64> = lambda
                .iter()
                .zip(beta.entries())
                .map(|(l, b)| l + 2.0 * *b as f64)
                .collect();
            l[(row, col)] = c * c * gap.factorial() / multi_pochhammer(&shifted, &gap)?;
        }
    }
    Ok(l)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mi(v: &[usize]) -> MultiIndex {
        MultiIndex::new(v.to_vec())
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(KernelParams::new(mi(&[1]), vec![0.0], vec![1.0, 1.0]).is_err());
        assert!(KernelParams::new(mi(&[1]), vec![1.0, 2.0], vec![1.0, 1.0]).is_err());
        assert!(KernelParams::new(mi(&[1]), vec![1.0], vec![2.0, 1.0]).is_err());
        assert!(KernelParams::new(mi(&[1]), vec![1.0], vec![1.0, -1.0]).is_err());
        assert!(KernelParams::new(mi(&[1]), vec![1.0], vec![1.0]).is_err());
    }

    #[test]
    fn mu_map_must_cover_the_family_exactly() {
        let mut map = BTreeMap::new();
        map.insert(mi(&[0, 0]), 1.0);
        map.insert(mi(&[1, 0]), 0.8);
        let missing = KernelParams::from_mu_map(mi(&[0, 1]), vec![2.0, 3.0], &map.clone());
        assert!(missing.is_err());
        map.insert(mi(&[0, 1]), 1.2);
        assert!(KernelParams::from_mu_map(mi(&[0, 1]), vec![2.0, 3.0], &map.clone()).is_ok());
        map.insert(mi(&[1, 1]), 0.9);
        assert!(KernelParams::from_mu_map(mi(&[0, 1]), vec![2.0, 3.0], &map).is_err());
    }

    #[test]
    fn b_diagonal_of_the_scalar_alpha_two_member() {
        let p = KernelParams::with_unit_mu(mi(&[2]), vec![2.0]).unwrap();
        let b = p.b_diag();
        assert!((b[0] - 1.0).abs() < 1e-15);
        assert!((b[1] - 1.5).abs() < 1e-15);
        assert!((b[2] - 7.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn b_diagonal_of_the_two_variable_member() {
        let p = KernelParams::with_unit_mu(mi(&[0, 1]), vec![2.0, 3.0]).unwrap();
        let b = p.b_diag();
        assert!((b[0] - 1.0).abs() < 1e-15);
        assert!((b[1] - 1.5).abs() < 1e-15);
        assert!((b[2] - 4.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn l_matrix_frozen_for_lambda_two() {
        let fam = index_family(&mi(&[2]));
        let l = l_matrix(&[2.0], &fam).unwrap();
        let expect = [
            [1.0, 0.0, 0.0],
            [0.5, 1.0, 0.0],
            [1.0 / 3.0, 1.0, 1.0],
        ];
        for i in 0..3 {
            for j in 0..3 {
                assert!(
                    (l[(i, j)] - expect[i][j]).abs() < 1e-15,
                    "L[{i}][{j}] = {}",
                    l[(i, j)]
                );
            }
        }
    }

    #[test]
    fn b_diag_is_l_applied_to_mu_squared() {
        let p = KernelParams::new(
            mi(&[1, 1]),
            vec![1.5, 2.5],
            vec![1.0, 0.8, 1.2, 0.9, 1.1],
        )
        .unwrap();
        let l = l_matrix(p.lambda(), p.family()).unwrap();
        let musq = nalgebra::DVector::from_iterator(p.r(), p.mu().iter().map(|m| m * m));
        let via_l = &l * &musq;
        for k in 0..p.r() {
            assert!(
                (p.b_diag()[k] - via_l[k]).abs() <= 1e-13 * via_l[k].abs(),
                "entry {k}"
            );
        }
    }
}
