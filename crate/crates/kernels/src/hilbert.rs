//! Truncated models of the function spaces: polynomial containers, monomial
//! norms, the branching maps Γ_β, discrete-series actions with their
//! intertwining check, and multiplication-operator matrices.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::kernels::{cauchy_derivative_oracle, check_in_polydisc, check_len, Quadrature};
use crate::matrix::{czeros, C64, CMatrix, CVector};
use crate::mobius::{cocycle_eval, MobiusFactor, MobiusTuple};
use crate::multiindex::{
    enumerate_up_to, multi_binomial, multi_pochhammer, MultiIndex,
};
use crate::params::KernelParams;

const CZERO: C64 = C64::new(0.0, 0.0);

/// Polynomial in `n` complex variables, sparse over monomials.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarPolynomial {
    n: usize,
    coeffs: BTreeMap<MultiIndex, C64>,
}

impl ScalarPolynomial {
    pub fn zero(n: usize) -> Self {
        ScalarPolynomial {
            n,
            coeffs: BTreeMap::new(),
        }
    }

    pub fn monomial(m: MultiIndex, coeff: C64) -> Self {
        let mut p = ScalarPolynomial::zero(m.dim());
        p.add_term(m, coeff);
        p
    }

    pub fn from_terms(n: usize, terms: &[(MultiIndex, C64)]) -> Result<Self> {
        let mut p = ScalarPolynomial::zero(n);
        for (m, c) in terms {
            if m.dim() != n {
                return Err(Error::DimensionMismatch(format!(
                    "term {m} in a polynomial over {n} variables"
                )));
            }
            p.add_term(m.clone(), *c);
        }
        Ok(p)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn add_term(&mut self, m: MultiIndex, coeff: C64) {
        let entry = self.coeffs.entry(m).or_insert(CZERO);
        *entry += coeff;
        if entry.norm() == 0.0 {
            let dead: Vec<MultiIndex> = self
                .coeffs
                .iter()
                .filter(|(_, c)| c.norm() == 0.0)
                .map(|(m, _)| m.clone())
                .collect();
            for m in dead {
                self.coeffs.remove(&m);
            }
        }
    }

    pub fn coeff(&self, m: &MultiIndex) -> C64 {
        self.coeffs.get(m).copied().unwrap_or(CZERO)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&MultiIndex, &C64)> {
        self.coeffs.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn degree(&self) -> usize {
        self.coeffs.keys().map(|m| m.degree()).max().unwrap_or(0)
    }

    pub fn scale(&self, c: C64) -> Self {
        if c.norm() == 0.0 {
            return ScalarPolynomial::zero(self.n);
        }
        ScalarPolynomial {
            n: self.n,
            coeffs: self.coeffs.iter().map(|(m, v)| (m.clone(), v * c)).collect(),
        }
    }

    pub fn eval(&self, z: &[C64]) -> Result<C64> {
        check_len("z", z, self.n)?;
        let mut acc = CZERO;
        for (m, c) in &self.coeffs {
            let mut term = *c;
            for (i, &mi) in m.entries().iter().enumerate() {
                term *= z[i].powu(mi as u32);
            }
            acc += term;
        }
        Ok(acc)
    }

    /// `∂^a` applied termwise: `z^m ↦ m!/(m−a)! z^{m−a}`.
    pub fn derivative(&self, a: &MultiIndex) -> Result<Self> {
        if a.dim() != self.n {
            return Err(Error::DimensionMismatch(format!(
                "derivative order {a} on a polynomial over {} variables",
                self.n
            )));
        }
        let mut out = ScalarPolynomial::zero(self.n);
        for (m, c) in &self.coeffs {
            if let Some(shifted) = m.checked_sub(a) {
                let mut factor = 1.0;
                for (&mi, &ai) in m.entries().iter().zip(a.entries()) {
                    for k in 0..ai {
                        factor *= (mi - k) as f64;
                    }
                }
                out.add_term(shifted, c * factor);
            }
        }
        Ok(out)
    }

    /// Multiply by the coordinate `z_i`.
    pub fn mul_coordinate(&self, i: usize) -> Result<Self> {
        if i >= self.n {
            return Err(Error::DimensionMismatch(format!(
                "coordinate {i} out of range for n = {}",
                self.n
            )));
        }
        let mut out = ScalarPolynomial::zero(self.n);
        for (m, c) in &self.coeffs {
            out.add_term(m.bump(i), *c);
        }
        Ok(out)
    }
}

/// Polynomial map `Dⁿ → Cʳ`, one scalar polynomial per component.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorPolynomial {
    n: usize,
    components: Vec<ScalarPolynomial>,
}

impl VectorPolynomial {
    pub fn zero(n: usize, r: usize) -> Self {
        VectorPolynomial {
            n,
            components: vec![ScalarPolynomial::zero(n); r],
        }
    }

    pub fn from_components(components: Vec<ScalarPolynomial>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidParams("vector polynomial needs components".into()));
        }
        let n = components[0].n();
        if components.iter().any(|c| c.n() != n) {
            return Err(Error::DimensionMismatch(
                "components over different variable counts".into(),
            ));
        }
        Ok(VectorPolynomial { n, components })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn r(&self) -> usize {
        self.components.len()
    }

    pub fn component(&self, k: usize) -> &ScalarPolynomial {
        &self.components[k]
    }

    pub fn component_mut(&mut self, k: usize) -> &mut ScalarPolynomial {
        &mut self.components[k]
    }

    pub fn degree(&self) -> usize {
        self.components.iter().map(|c| c.degree()).max().unwrap_or(0)
    }

    pub fn scale(&self, c: C64) -> Self {
        VectorPolynomial {
            n: self.n,
            components: self.components.iter().map(|p| p.scale(c)).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &VectorPolynomial) {
        assert_eq!(self.r(), other.r(), "component count mismatch");
        for (mine, theirs) in self.components.iter_mut().zip(&other.components) {
            for (m, c) in &theirs.coeffs {
                mine.add_term(m.clone(), *c);
            }
        }
    }

    pub fn mul_coordinate(&self, i: usize) -> Result<Self> {
        let components = self
            .components
            .iter()
            .map(|c| c.mul_coordinate(i))
            .collect::<Result<Vec<_>>>()?;
        VectorPolynomial::from_components(components)
    }

    pub fn eval(&self, z: &[C64]) -> Result<CVector> {
        let mut out = CVector::zeros(self.r());
        for (k, c) in self.components.iter().enumerate() {
            out[k] = c.eval(z)?;
        }
        Ok(out)
    }
}

/// Squared monomial norm `‖z^m‖² = m!/(ν)_m` in the scalar space of weight ν.
pub fn monomial_norm_sq(nu: &[f64], m: &MultiIndex) -> Result<f64> {
    Ok(m.factorial() / multi_pochhammer(nu, m)?)
}

/// Table of `‖z^m‖²` for all `|m| ≤ cutoff`.
pub fn monomial_norms(nu: &[f64], cutoff: usize) -> Result<BTreeMap<MultiIndex, f64>> {
    let mut out = BTreeMap::new();
    for m in enumerate_up_to(nu.len(), cutoff) {
        let v = monomial_norm_sq(nu, &m)?;
        out.insert(m, v);
    }
    Ok(out)
}

/// The branching map `Γ_β` on polynomials: component `γ` is
/// `C(γ,β) ∂^{γ−β} f / (λ+2β)_{γ−β}`, zero when `β ≰ γ`.
pub fn gamma_apply(
    beta: &MultiIndex,
    params: &KernelParams,
    f: &ScalarPolynomial,
) -> Result<VectorPolynomial> {
    let fam = params.family();
    if !fam.contains(beta) {
        return Err(Error::InvalidParams(format!(
            "index {beta} is not a member of the family for alpha = {}",
            fam.alpha()
        )));
    }
    if f.n() != params.n() {
        return Err(Error::DimensionMismatch(format!(
            "polynomial over {} variables against n = {}",
            f.n(),
            params.n()
        )));
    }
    let nu = params.lambda_shifted(beta);
    let mut components = Vec::with_capacity(params.r());
    for gamma in fam.members() {
        let cb = multi_binomial(gamma, beta)?;
        if cb == 0.0 {
            components.push(ScalarPolynomial::zero(params.n()));
            continue;
        }
        let diff = gamma.checked_sub(beta).expect("binomial nonzero implies beta <= gamma");
        let poch = multi_pochhammer(&nu, &diff)?;
        components.push(f.derivative(&diff)?.scale(C64::new(cb / poch, 0.0)));
    }
    VectorPolynomial::from_components(components)
}

/// One-factor discrete-series action: `(g′)^{t/2}(w)·f(g(w))`.
pub fn discrete_series_apply<F>(g: &MobiusFactor, t: f64, f: F, w: C64) -> Result<C64>
where
    F: Fn(C64) -> C64,
{
    let jac = g.derivative_power(w, t / 2.0)?;
    Ok(jac * f(g.act(w)))
}

/// Tuple version of the scalar action on weight `ν`:
/// `∏_i (g_i′)^{ν_i/2}(z_i) · f(g(z))`.
pub fn discrete_series_apply_tuple(
    g: &MobiusTuple,
    nu: &[f64],
    f: &ScalarPolynomial,
    z: &[C64],
) -> Result<C64> {
    check_len("z", z, nu.len())?;
    if g.n() != nu.len() || f.n() != nu.len() {
        return Err(Error::DimensionMismatch(format!(
            "action of a {}-factor tuple with {} weights on a polynomial over {} variables",
            g.n(),
            nu.len(),
            f.n()
        )));
    }
    let mut jac = C64::new(1.0, 0.0);
    for i in 0..nu.len() {
        jac *= g.factor(i).derivative_power(z[i], nu[i] / 2.0)?;
    }
    Ok(jac * f.eval(&g.act(z)?)?)
}

/// Max residual over the samples of
/// `‖Γ_β(U(g̃)f)(z) − J(g̃,z)·(Γ_β f)(g(z))‖₂`,
/// the left side differentiated numerically so the two routes stay
/// independent.
pub fn verify_intertwining(
    beta: &MultiIndex,
    params: &KernelParams,
    g: &MobiusTuple,
    f: &ScalarPolynomial,
    samples: &[Vec<C64>],
    quad: &Quadrature,
) -> Result<f64> {
    let fam = params.family();
    if !fam.contains(beta) {
        return Err(Error::InvalidParams(format!(
            "index {beta} is not a member of the family for alpha = {}",
            fam.alpha()
        )));
    }
    quad.validate()?;
    let nu = params.lambda_shifted(beta);
    let gamma_f = gamma_apply(beta, params, f)?;
    let acted = |w: &[C64]| discrete_series_apply_tuple(g, &nu, f, w);
    let mut worst = 0.0_f64;
    for z in samples {
        check_len("sample", z, params.n())?;
        check_in_polydisc("sample", z)?;
        // Shrink the circles so they stay inside the disc at this point.
        let slack = z
            .iter()
            .map(|zi| 0.5 * (1.0 - zi.norm()))
            .fold(f64::INFINITY, f64::min);
        let local = Quadrature {
            radius: quad.radius.min(slack),
            nodes: quad.nodes,
        };
        local.validate()?;

        let mut lhs = CVector::zeros(params.r());
        for (k, gamma) in fam.members().iter().enumerate() {
            let cb = multi_binomial(gamma, beta)?;
            if cb == 0.0 {
                continue;
            }
            let diff = gamma.checked_sub(beta).expect("beta <= gamma");
            let poch = multi_pochhammer(&nu, &diff)?;
            let deriv = if diff.degree() == 0 {
                acted(z)?
            } else {
                cauchy_derivative_oracle(&acted, z, &diff, &local)?
            };
            lhs[k] = deriv * (cb / poch);
        }

        let rhs = cocycle_eval(g, z, params)? * gamma_f.eval(&g.act(z)?)?;
        let residual = (lhs - rhs).norm();
        worst = worst.max(residual);
    }
    Ok(worst)
}

/// Enumeration of the truncated direct-sum basis `(β, m)` with `|m| ≤ cutoff`,
/// block-major in the family rank of `β`, graded within a block.
pub fn direct_sum_labels(params: &KernelParams, cutoff: usize) -> Vec<(usize, MultiIndex)> {
    let monomials = enumerate_up_to(params.n(), cutoff);
    let mut labels = Vec::with_capacity(params.r() * monomials.len());
    for beta_rank in 0..params.r() {
        for m in &monomials {
            labels.push((beta_rank, m.clone()));
        }
    }
    labels
}

/// Matrix of `f ↦ z_i f` on the truncated direct sum, block diagonal over β
/// with weighted-shift blocks of entries `√((m_i+1)/(ν_i+m_i))`.
pub fn multiplication_matrix(
    params: &KernelParams,
    coord: usize,
    cutoff: usize,
) -> Result<CMatrix> {
    if coord >= params.n() {
        return Err(Error::DimensionMismatch(format!(
            "coordinate {coord} out of range for n = {}",
            params.n()
        )));
    }
    if cutoff < params.alpha().degree() + 2 {
        return Err(Error::InvalidParams(format!(
            "cutoff {cutoff} too small, need at least |alpha| + 2 = {}",
            params.alpha().degree() + 2
        )));
    }
    let monomials = enumerate_up_to(params.n(), cutoff);
    let rank: BTreeMap<&MultiIndex, usize> =
        monomials.iter().enumerate().map(|(k, m)| (m, k)).collect();
    let blk = monomials.len();
    let dim = params.r() * blk;
    let mut out = czeros(dim, dim);
    for beta_rank in 0..params.r() {
        let nu = params.lambda_shifted(params.family().member(beta_rank));
        for (col, m) in monomials.iter().enumerate() {
            let up = m.bump(coord);
            if let Some(&row) = rank.get(&up) {
                let w = ((m.get(coord) + 1) as f64 / (nu[coord] + m.get(coord) as f64)).sqrt();
                out[(beta_rank * blk + row, beta_rank * blk + col)] = C64::new(w, 0.0);
            }
        }
    }
    Ok(out)
}

/// Coefficient vector of the truncated direct-sum kernel column at `(w, ξ)`:
/// block β holds `ξ_β · conj(w^m)/‖z^m‖_{λ+2β}` over the monomials.
pub fn direct_sum_kernel_column(
    params: &KernelParams,
    cutoff: usize,
    w: &[C64],
    xi: &CVector,
) -> Result<CVector> {
    check_len("w", w, params.n())?;
    check_in_polydisc("w", w)?;
    if xi.len() != params.r() {
        return Err(Error::DimensionMismatch(format!(
            "vector of length {} against r = {}",
            xi.len(),
            params.r()
        )));
    }
    let monomials = enumerate_up_to(params.n(), cutoff);
    let blk = monomials.len();
    let mut out = CVector::zeros(params.r() * blk);
    for beta_rank in 0..params.r() {
        let nu = params.lambda_shifted(params.family().member(beta_rank));
        for (k, m) in monomials.iter().enumerate() {
            let mut wm = C64::new(1.0, 0.0);
            for (i, &mi) in m.entries().iter().enumerate() {
                wm *= w[i].powu(mi as u32);
            }
            let norm = monomial_norm_sq(&nu, m)?.sqrt();
            out[beta_rank * blk + k] = xi[beta_rank] * wm.conj() / norm;
        }
    }
    Ok(out)
}

/// Truncated model of the reproducing kernel space: the orthonormal family
/// `u_{β,m} = μ_β Γ_β(z^m)/‖z^m‖_{λ+2β}` over `|m| ≤ cutoff`, with the
/// change-of-basis data needed for injectivity and reproducing checks.
pub struct TruncatedSpaceModel<'a> {
    params: &'a KernelParams,
    cutoff: usize,
    labels: Vec<(usize, MultiIndex)>,
    basis: Vec<VectorPolynomial>,
}

impl<'a> TruncatedSpaceModel<'a> {
    pub fn new(params: &'a KernelParams, cutoff: usize) -> Result<Self> {
        let labels = direct_sum_labels(params, cutoff);
        let mut basis = Vec::with_capacity(labels.len());
        for (beta_rank, m) in &labels {
            let beta = params.family().member(*beta_rank).clone();
            let nu = params.lambda_shifted(&beta);
            let mono = ScalarPolynomial::monomial(m.clone(), C64::new(1.0, 0.0));
            let u = gamma_apply(&beta, params, &mono)?;
            let scale = params.mu()[*beta_rank] / monomial_norm_sq(&nu, m)?.sqrt();
            basis.push(u.scale(C64::new(scale, 0.0)));
        }
        Ok(TruncatedSpaceModel {
            params,
            cutoff,
            labels,
            basis,
        })
    }

    pub fn params(&self) -> &KernelParams {
        self.params
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn len(&self) -> usize {
        self.basis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.basis.is_empty()
    }

    pub fn labels(&self) -> &[(usize, MultiIndex)] {
        &self.labels
    }

    pub fn basis(&self) -> &[VectorPolynomial] {
        &self.basis
    }

    /// `Σ_u u(z) u(w)^*`, the rank-one expansion of the truncated kernel.
    pub fn kernel_truncation(&self, z: &[C64], w: &[C64]) -> Result<CMatrix> {
        let r = self.params.r();
        let mut acc = czeros(r, r);
        for u in &self.basis {
            let uz = u.eval(z)?;
            let uw = u.eval(w)?;
            acc += uz * uw.adjoint();
        }
        Ok(acc)
    }

    /// Same expansion restricted to one β block.
    pub fn kernel_truncation_block(
        &self,
        beta_rank: usize,
        z: &[C64],
        w: &[C64],
    ) -> Result<CMatrix> {
        let r = self.params.r();
        let mut acc = czeros(r, r);
        for ((br, _), u) in self.labels.iter().zip(&self.basis) {
            if *br != beta_rank {
                continue;
            }
            let uz = u.eval(z)?;
            let uw = u.eval(w)?;
            acc += uz * uw.adjoint();
        }
        Ok(acc)
    }

    /// Coefficients of the truncated kernel column `K(·,w)ξ` in the basis:
    /// `c_u = u(w)^* ξ`.
    pub fn kernel_column_coefficients(&self, w: &[C64], xi: &CVector) -> Result<CVector> {
        if xi.len() != self.params.r() {
            return Err(Error::DimensionMismatch(format!(
                "vector of length {} against r = {}",
                xi.len(),
                self.params.r()
            )));
        }
        let mut out = CVector::zeros(self.len());
        for (k, u) in self.basis.iter().enumerate() {
            out[k] = (u.eval(w)?.adjoint() * xi)[0];
        }
        Ok(out)
    }

    /// Change-of-basis matrix from the basis to monomial-vector coordinates
    /// `(γ, p)` with `|p| ≤ cutoff`; columns are the basis elements.
    pub fn change_of_basis(&self) -> CMatrix {
        let monomials = enumerate_up_to(self.params.n(), self.cutoff);
        let rows = self.params.r() * monomials.len();
        let mut t = czeros(rows, self.len());
        for (col, u) in self.basis.iter().enumerate() {
            for gamma_rank in 0..self.params.r() {
                for (p_rank, p) in monomials.iter().enumerate() {
                    t[(gamma_rank * monomials.len() + p_rank, col)] =
                        u.component(gamma_rank).coeff(p);
                }
            }
        }
        t
    }

    /// Smallest singular value of the change-of-basis matrix; positivity
    /// certifies injectivity of the assembled Γ on the truncation.
    pub fn injectivity_margin(&self) -> f64 {
        let svals = crate::matrix::singular_values(&self.change_of_basis());
        svals.last().copied().unwrap_or(0.0)
    }
}
