//! Origin curvature in closed form and by quadrature, parameter recovery,
//! the boundedness witness, commutant-based irreducibility certification,
//! inequivalence witnesses, the tensor-product baseline, and pairwise
//! classification.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::kernels::{
    kernel_canonical, normalized_kernel, scalar_kernel, taylor_coefficients, CanonicalKernel,
    KernelFn, NormalizedKernel, Quadrature, ScalarProductKernel,
};
use crate::matrix::{czeros, diag_pow, singular_values, C64, CMatrix};
use crate::multiindex::{enumerate_degree, index_family, IndexFamily, MultiIndex};
use crate::params::{l_matrix, KernelParams};

/// One origin-evaluated curvature component.
#[derive(Clone, Debug)]
pub struct CurvatureComponent {
    pub i: usize,
    pub j: usize,
    pub matrix: CMatrix,
    pub at_origin: bool,
}

/// Closed-form curvature component at the origin, in the gauge where the
/// kernel is the identity at 0.
///
/// For `i = j` the component is diagonal with entries
/// `λ_i + 2θ_i − (θ_i+1)² b_θ/b_{θ+ε_i} + θ_i² b_{θ−ε_i}/b_θ`,
/// terms dropped when the stepped index leaves the family. For `i ≠ j` it is
/// `B^{−1/2} S_j B S_i^* B^{−1/2} − B^{1/2} S_i^* B^{−1} S_j B^{1/2}`.
pub fn curvature_closed(params: &KernelParams, i: usize, j: usize) -> Result<CurvatureComponent> {
    let n = params.n();
    if i >= n || j >= n {
        return Err(Error::DimensionMismatch(format!(
            "curvature component ({i},{j}) out of range for n = {n}"
        )));
    }
    let fam = params.family();
    let b = params.b_diag();
    let r = params.r();
    let matrix = if i == j {
        let mut m = czeros(r, r);
        for (k, theta) in fam.members().iter().enumerate() {
            let ti = theta.get(i) as f64;
            let mut v = params.lambda()[i] + 2.0 * ti;
            if let Some(up) = fam.rank_of(&theta.bump(i)) {
                v -= (ti + 1.0) * (ti + 1.0) * b[k] / b[up];
            }
            if let Some(lowered) = theta.lower(i) {
                let down = fam.rank_of(&lowered).expect("family is downward closed");
                v += ti * ti * b[down] / b[k];
            }
            m[(k, k)] = C64::new(v, 0.0);
        }
        m
    } else {
        let bh = diag_pow(b, 0.5);
        let bhi = diag_pow(b, -0.5);
        let bm = diag_pow(b, 1.0);
        let bmi = diag_pow(b, -1.0);
        let si = params.shift(i);
        let sj = params.shift(j);
        &bhi * sj * &bm * si.adjoint() * &bhi - &bh * si.adjoint() * &bmi * sj * &bh
    };
    Ok(CurvatureComponent {
        i,
        j,
        matrix,
        at_origin: true,
    })
}

/// Assemble a curvature component from a Taylor coefficient map.
///
/// Raw convention: `B⁻¹C_{ε_iε_j} − B⁻¹C_{0,ε_j}B⁻¹C_{ε_i,0}` with
/// `B = C_{0,0}`. Normalized convention: the map must come from the
/// normalized kernel, where the pure coefficients vanish and the component
/// reduces to `C_{ε_iε_j}`.
pub fn curvature_from_taylor(
    coeffs: &BTreeMap<(MultiIndex, MultiIndex), CMatrix>,
    n: usize,
    i: usize,
    j: usize,
    normalized: bool,
) -> Result<CMatrix> {
    let zero = MultiIndex::zero(n);
    let ei = MultiIndex::unit(n, i);
    let ej = MultiIndex::unit(n, j);
    let get = |a: &MultiIndex, b: &MultiIndex| -> Result<&CMatrix> {
        coeffs.get(&(a.clone(), b.clone())).ok_or_else(|| {
            Error::InvalidParams(format!("taylor map is missing coefficient ({a}),({b})"))
        })
    };
    let cij = get(&ei, &ej)?;
    if normalized {
        return Ok(cij.clone());
    }
    let b = get(&zero, &zero)?;
    let binv = b.clone().try_inverse().ok_or_else(|| {
        Error::Singularity("kernel value at the origin is not invertible".into())
    })?;
    let c0j = get(&zero, &ej)?;
    let ci0 = get(&ei, &zero)?;
    Ok(&binv * cij - &binv * c0j * &binv * ci0)
}

/// Curvature component by quadrature on the parameter kernel. With
/// `use_normalized` the coefficients come from the normalized kernel and the
/// result matches `curvature_closed`; without it the raw-kernel convention is
/// used.
pub fn curvature_oracle(
    params: &KernelParams,
    i: usize,
    j: usize,
    use_normalized: bool,
    quad: &Quadrature,
) -> Result<CMatrix> {
    let coeffs = if use_normalized {
        taylor_coefficients(&NormalizedKernel::new(params), 2, quad)?
    } else {
        taylor_coefficients(&CanonicalKernel::new(params), 2, quad)?
    };
    curvature_from_taylor(&coeffs, params.n(), i, j, use_normalized)
}

/// Raw-convention curvature oracle for an arbitrary kernel evaluator.
pub fn curvature_oracle_kernel(
    kernel: &dyn KernelFn,
    i: usize,
    j: usize,
    quad: &Quadrature,
) -> Result<CMatrix> {
    let coeffs = taylor_coefficients(kernel, 2, quad)?;
    curvature_from_taylor(&coeffs, kernel.n(), i, j, false)
}

/// Sum of the two shift-ratio terms of the diagonal curvature over the whole
/// family; telescopes to zero along every `ε_i` chain for any positive
/// diagonal.
pub fn shift_trace_telescope(b: &[f64], fam: &IndexFamily, i: usize) -> Result<f64> {
    if b.len() != fam.len() {
        return Err(Error::DimensionMismatch(format!(
            "diagonal of length {} against family size {}",
            b.len(),
            fam.len()
        )));
    }
    let mut acc = 0.0;
    for (k, theta) in fam.members().iter().enumerate() {
        let ti = theta.get(i) as f64;
        if let Some(up) = fam.rank_of(&theta.bump(i)) {
            acc -= (ti + 1.0) * (ti + 1.0) * b[k] / b[up];
        }
        if let Some(lowered) = theta.lower(i) {
            let down = fam.rank_of(&lowered).expect("family is downward closed");
            acc += ti * ti * b[down] / b[k];
        }
    }
    Ok(acc)
}

/// Recover λ from the diagonal curvature traces:
/// `λ_i = (tr 𝒦_{ii}(0) − 2 Σ_θ θ_i)/r`. Independent of μ because the
/// shift-ratio terms telescope.
pub fn recover_lambda(params: &KernelParams) -> Result<Vec<f64>> {
    let r = params.r() as f64;
    let mut out = Vec::with_capacity(params.n());
    for i in 0..params.n() {
        let trace = curvature_closed(params, i, i)?.matrix.trace().re;
        let theta_sum: usize = params
            .family()
            .members()
            .iter()
            .map(|theta| theta.get(i))
            .sum();
        out.push((trace - 2.0 * theta_sum as f64) / r);
    }
    Ok(out)
}

/// Boundedness witness: a uniform shift ε, reweighting μ′ with
/// `(μ′)² = L(λ−ε)^{−1} L(λ) μ²`, and the commutator constants
/// `c_j = max(1, 1/ε_j)`.
#[derive(Clone, Debug)]
pub struct BoundednessWitness {
    pub epsilon: Vec<f64>,
    pub mu_prime: Vec<f64>,
    pub c: Vec<f64>,
    /// Number of halvings taken before a positive solution appeared.
    pub shrink_steps: usize,
}

/// Search for the witness by halving a uniform ε from `min(λ)/2` until the
/// reweighting comes out entrywise positive.
pub fn boundedness_witness(params: &KernelParams) -> Result<BoundednessWitness> {
    let lam_min = params
        .lambda()
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    let floor = lam_min * 2.0_f64.powi(-20);
    if lam_min <= 2.0_f64.powi(-20) {
        return Err(Error::WitnessSearch(format!(
            "min(lambda) = {lam_min} leaves no room below the halving floor"
        )));
    }
    let rhs = params.b_diag();
    let fam = params.family();
    let mut eps = lam_min / 2.0;
    let mut steps = 0;
    while eps >= floor {
        let shifted: Vec<f64> = params.lambda().iter().map(|&l| l - eps).collect();
        let l = l_matrix(&shifted, fam)?;
        // Unit lower-triangular forward substitution.
        let mut x = vec![0.0_f64; rhs.len()];
        for k in 0..rhs.len() {
            let mut v = rhs[k];
            for j in 0..k {
                v -= l[(k, j)] * x[j];
            }
            x[k] = v;
        }
        if x.iter().all(|&v| v > 0.0) {
            return Ok(BoundednessWitness {
                epsilon: vec![eps; params.n()],
                mu_prime: x.iter().map(|v| v.sqrt()).collect(),
                c: vec![(1.0_f64).max(1.0 / eps); params.n()],
                shrink_steps: steps,
            });
        }
        eps /= 2.0;
        steps += 1;
    }
    Err(Error::WitnessSearch(
        "no positive reweighting found above the halving floor".into(),
    ))
}

/// Parameter set `(λ−ε, μ′)` induced by a witness.
pub fn witness_params(params: &KernelParams, witness: &BoundednessWitness) -> Result<KernelParams> {
    let shifted: Vec<f64> = params
        .lambda()
        .iter()
        .zip(&witness.epsilon)
        .map(|(&l, &e)| l - e)
        .collect();
    KernelParams::new(params.alpha().clone(), shifted, witness.mu_prime.clone())
}

/// Relative residual of the factorization
/// `K^{(λ,μ)}(z,w) = ∏(1−z_iw̄_i)^{−ε_i} K^{(λ−ε,μ′)}(z,w)` at one pair.
pub fn factorization_residual(
    params: &KernelParams,
    witness: &BoundednessWitness,
    z: &[C64],
    w: &[C64],
) -> Result<f64> {
    let left = kernel_canonical(params, z, w)?;
    let prime = witness_params(params, witness)?;
    let scalar = scalar_kernel(&witness.epsilon, z, w)?;
    let right = kernel_canonical(&prime, z, w)? * scalar;
    Ok(crate::matrix::rel_residual(&left, &right))
}

/// Kernel scaled by `(c − z_j w̄_j)`; PSD Grams of this certify the
/// commutator bound behind the boundedness theorem.
pub struct ScaledCoordinateKernel<'a> {
    inner: &'a dyn KernelFn,
    coord: usize,
    c: f64,
}

impl<'a> ScaledCoordinateKernel<'a> {
    pub fn new(inner: &'a dyn KernelFn, coord: usize, c: f64) -> Result<Self> {
        if coord >= inner.n() {
            return Err(Error::DimensionMismatch(format!(
                "coordinate {coord} out of range for n = {}",
                inner.n()
            )));
        }
        Ok(ScaledCoordinateKernel { inner, coord, c })
    }
}

impl KernelFn for ScaledCoordinateKernel<'_> {
    fn n(&self) -> usize {
        self.inner.n()
    }

    fn size(&self) -> usize {
        self.inner.size()
    }

    fn eval(&self, z: &[C64], w: &[C64]) -> Result<CMatrix> {
        let base = self.inner.eval(z, w)?;
        let factor = C64::new(self.c, 0.0) - z[self.coord] * w[self.coord].conj();
        Ok(base * factor)
    }
}

/// Certificate from the finite-order commutant: dimension one certifies
/// irreducibility; anything larger is only "inconclusive at this order".
#[derive(Clone, Debug)]
pub struct IrreducibilityCertificate {
    pub commutant_dimension: usize,
    pub irreducible: bool,
    pub order: usize,
}

/// Default coefficient order for the commutant system.
pub fn default_commutant_order(params: &KernelParams) -> usize {
    2 * params.alpha().degree() + 2
}

/// Dimension of `{X : XC = CX for all C}` by SVD nullity of the stacked
/// Kronecker system, at relative threshold 1e−6.
pub fn commutant_dimension(mats: &[CMatrix]) -> Result<usize> {
    if mats.is_empty() {
        return Err(Error::InvalidParams("empty coefficient list".into()));
    }
    let r = mats[0].nrows();
    if mats.iter().any(|m| m.nrows() != r || m.ncols() != r) {
        return Err(Error::DimensionMismatch(
            "coefficient matrices must be square of equal size".into(),
        ));
    }
    let id = CMatrix::identity(r, r);
    let mut stacked = czeros(mats.len() * r * r, r * r);
    for (k, c) in mats.iter().enumerate() {
        let block = c.transpose().kronecker(&id) - id.kronecker(c);
        stacked.view_mut((k * r * r, 0), (r * r, r * r)).copy_from(&block);
    }
    let svals = singular_values(&stacked);
    let smax = svals.first().copied().unwrap_or(0.0);
    if smax == 0.0 {
        return Ok(r * r);
    }
    Ok(svals.iter().filter(|&&s| s < 1e-6 * smax).count())
}

/// Build the commutant system from normalized-kernel Taylor coefficients of
/// total order at most `order` and certify one-sidedly.
pub fn irreducibility_certificate(
    params: &KernelParams,
    order: usize,
    quad: &Quadrature,
) -> Result<IrreducibilityCertificate> {
    if order < 2 {
        return Err(Error::InvalidParams(format!(
            "commutant order {order} too small, need at least 2"
        )));
    }
    let coeffs = taylor_coefficients(&NormalizedKernel::new(params), order, quad)?;
    let mats: Vec<CMatrix> = coeffs.into_values().collect();
    let dim = commutant_dimension(&mats)?;
    Ok(IrreducibilityCertificate {
        commutant_dimension: dim,
        irreducible: dim == 1,
        order,
    })
}

/// The parameter kernel restricted to the `coord` axis, as a one-variable
/// matrix kernel in the normalized gauge.
pub struct AxisKernel<'a> {
    params: &'a KernelParams,
    coord: usize,
}

impl<'a> AxisKernel<'a> {
    pub fn new(params: &'a KernelParams, coord: usize) -> Result<Self> {
        if coord >= params.n() {
            return Err(Error::DimensionMismatch(format!(
                "axis {coord} out of range for n = {}",
                params.n()
            )));
        }
        Ok(AxisKernel { params, coord })
    }
}

impl KernelFn for AxisKernel<'_> {
    fn n(&self) -> usize {
        1
    }

    fn size(&self) -> usize {
        self.params.r()
    }

    fn eval(&self, z: &[C64], w: &[C64]) -> Result<CMatrix> {
        let mut ze = vec![C64::new(0.0, 0.0); self.params.n()];
        let mut we = ze.clone();
        ze[self.coord] = z[0];
        we[self.coord] = w[0];
        normalized_kernel(self.params, &ze, &we)
    }
}

/// Matrices `c(q)` = coefficient of `z_i^{q+1} w̄_i^q` in the normalized
/// kernel on the `i`-th axis, for `0 ≤ q ≤ qmax`.
pub fn axis_coefficients(
    params: &KernelParams,
    coord: usize,
    qmax: usize,
    quad: &Quadrature,
) -> Result<Vec<CMatrix>> {
    if qmax < 1 {
        return Err(Error::InvalidParams(
            "axis coefficient scan needs qmax >= 1".into(),
        ));
    }
    let axis = AxisKernel::new(params, coord)?;
    let coeffs = taylor_coefficients(&axis, 2 * qmax + 1, quad)?;
    let mut out = Vec::with_capacity(qmax + 1);
    for q in 0..=qmax {
        let key = (
            MultiIndex::new(vec![q + 1]),
            MultiIndex::new(vec![q]),
        );
        out.push(
            coeffs
                .get(&key)
                .cloned()
                .ok_or_else(|| Error::InvalidParams(format!("missing axis coefficient q = {q}")))?,
        );
    }
    Ok(out)
}

/// Outcome of the axis shift-structure scan along one coordinate.
#[derive(Clone, Debug)]
pub struct AxisDiagnostic {
    /// Adjacent pairs `(rank θ, rank θ+ε_i)` of the `ε_i` chains in the family.
    pub pairs: Vec<(usize, usize)>,
    /// Smallest q with the pair's entry above the detection floor, per pair.
    pub minimal_q: Vec<Option<usize>>,
    /// True when every chain pair was detected at some q ≤ qmax.
    pub conclusive: bool,
    /// Largest magnitude found outside the chain support pattern.
    pub off_support_max: f64,
}

/// Scan the axis coefficients for the shift structure: every `c(q)` is
/// supported on the first superdiagonal of the `ε_i` chains, and every chain
/// pair must show a nonzero entry at some `q ≤ qmax` for the scan to be
/// conclusive.
pub fn axis_shift_diagnostic(
    params: &KernelParams,
    coord: usize,
    qmax: usize,
    quad: &Quadrature,
) -> Result<AxisDiagnostic> {
    let coeffs = axis_coefficients(params, coord, qmax, quad)?;
    let fam = params.family();
    let mut pairs = Vec::new();
    for (k, theta) in fam.members().iter().enumerate() {
        if let Some(up) = fam.rank_of(&theta.bump(coord)) {
            pairs.push((k, up));
        }
    }
    let scale = coeffs
        .iter()
        .map(|c| c.iter().map(|v| v.norm()).fold(0.0, f64::max))
        .fold(0.0, f64::max)
        .max(1.0);
    let mut minimal_q = vec![None; pairs.len()];
    let mut off_support_max = 0.0_f64;
    for (q, c) in coeffs.iter().enumerate() {
        for row in 0..c.nrows() {
            for col in 0..c.ncols() {
                let mag = c[(row, col)].norm();
                if let Some(p) = pairs.iter().position(|&(lo, hi)| lo == row && hi == col) {
                    if mag > 1e-8 * scale && minimal_q[p].is_none() {
                        minimal_q[p] = Some(q);
                    }
                } else {
                    off_support_max = off_support_max.max(mag);
                }
            }
        }
    }
    let conclusive = minimal_q.iter().all(|q| q.is_some());
    Ok(AxisDiagnostic {
        pairs,
        minimal_q,
        conclusive,
        off_support_max,
    })
}

/// Witness triple for inequivalence from tensor products: coordinates are
/// zero-based.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WitnessTriple {
    pub theta: MultiIndex,
    pub i: usize,
    pub j: usize,
}

/// Pick the witness triple `(θ, i, j)` with `θ ∈ Λ`, `θ−ε_i+ε_j ∈ Λ` and
/// `θ+ε_j ∉ Λ`. Concentrated α take `θ = α−ε_1`; otherwise `θ` puts the whole
/// degree on the first coordinate.
pub fn inequivalence_witness(alpha: &MultiIndex) -> Result<WitnessTriple> {
    let n = alpha.dim();
    let d = alpha.degree();
    if n < 2 {
        return Err(Error::NoWitness(
            "mixed-coordinate witnesses need at least two variables".into(),
        ));
    }
    if d == 0 {
        return Err(Error::NoWitness("the zero index has no chains to probe".into()));
    }
    if d == 1 && alpha.get(0) == 1 {
        return Err(Error::NoWitness(
            "alpha = e_1 is excluded by hypothesis".into(),
        ));
    }
    let concentrated = alpha.get(0) == d;
    let (theta, j) = if concentrated {
        (alpha.lower(0).expect("degree on the first coordinate"), 1)
    } else {
        let mut entries = vec![0usize; n];
        entries[0] = d;
        let j = (1..n)
            .find(|&k| alpha.get(k) >= 1)
            .expect("non-concentrated alpha has mass beyond the first coordinate");
        (MultiIndex::new(entries), j)
    };
    let witness = WitnessTriple { theta, i: 0, j };
    let fam = index_family(alpha);
    let stepped = witness
        .theta
        .lower(witness.i)
        .map(|t| t.bump(witness.j));
    let valid = fam.contains(&witness.theta)
        && stepped.as_ref().is_some_and(|t| fam.contains(t))
        && !fam.contains(&witness.theta.bump(witness.j));
    if !valid {
        return Err(Error::NoWitness(format!(
            "constructed triple failed validation for alpha = {alpha}"
        )));
    }
    Ok(witness)
}

/// Exhaustive witness construction over all admissible α with the given
/// bounds; every returned triple has been validated against its family.
pub fn witness_scan(nmax: usize, degmax: usize) -> Result<Vec<(MultiIndex, WitnessTriple)>> {
    let mut out = Vec::new();
    for n in 2..=nmax {
        for d in 1..=degmax {
            for alpha in enumerate_degree(n, d) {
                if d == 1 && alpha.get(0) == 1 {
                    continue;
                }
                let w = inequivalence_witness(&alpha)?;
                out.push((alpha, w));
            }
        }
    }
    Ok(out)
}

/// Predicted magnitude of the `(θ−ε_i+ε_j, θ)` entry of the mixed curvature:
/// `θ_i (θ_j+1) b_{θ−ε_i} / √(b_θ b_{θ−ε_i+ε_j})`.
pub fn witness_entry_predicted(params: &KernelParams, witness: &WitnessTriple) -> Result<f64> {
    let fam = params.family();
    let b = params.b_diag();
    let theta = &witness.theta;
    let lowered = theta.lower(witness.i).ok_or_else(|| {
        Error::InvalidParams(format!("theta = {theta} has no step down in coordinate {}", witness.i))
    })?;
    let target = lowered.bump(witness.j);
    let k_theta = fam
        .rank_of(theta)
        .ok_or_else(|| Error::InvalidParams(format!("theta = {theta} outside the family")))?;
    let k_low = fam.rank_of(&lowered).expect("family is downward closed");
    let k_target = fam
        .rank_of(&target)
        .ok_or_else(|| Error::InvalidParams(format!("index {target} outside the family")))?;
    let ti = theta.get(witness.i) as f64;
    let tj = theta.get(witness.j) as f64;
    Ok(ti * (tj + 1.0) * b[k_low] / (b[k_theta] * b[k_target]).sqrt())
}

/// The same entry read off the closed-form mixed curvature matrix.
pub fn witness_entry_measured(params: &KernelParams, witness: &WitnessTriple) -> Result<C64> {
    let fam = params.family();
    let lowered = witness.theta.lower(witness.i).ok_or_else(|| {
        Error::InvalidParams(format!(
            "theta = {} has no step down in coordinate {}",
            witness.theta, witness.i
        ))
    })?;
    let target = lowered.bump(witness.j);
    let row = fam
        .rank_of(&target)
        .ok_or_else(|| Error::InvalidParams(format!("index {target} outside the family")))?;
    let col = fam
        .rank_of(&witness.theta)
        .ok_or_else(|| Error::InvalidParams(format!("theta = {} outside the family", witness.theta)))?;
    let k = curvature_closed(params, witness.i, witness.j)?;
    Ok(k.matrix[(row, col)])
}

/// Product of one-variable scalar kernels as a baseline evaluator; its
/// normalized mixed curvature vanishes identically.
pub fn tensor_kernel(nu: Vec<f64>) -> Result<ScalarProductKernel> {
    ScalarProductKernel::new(nu)
}

/// Reason a pair of parameter sets was separated.
#[derive(Clone, Debug, PartialEq)]
pub enum ClassificationWitness {
    None,
    TraceMismatch { coord: usize, left: f64, right: f64 },
    DiagonalMismatch { theta: MultiIndex, left: f64, right: f64 },
}

#[derive(Clone, Debug)]
pub struct ClassificationVerdict {
    pub equivalent: bool,
    pub witness: ClassificationWitness,
}

/// Classify two parameter sets over the same `(n, α)` by exact invariants:
/// the curvature traces pin λ, then the kernel diagonal at the origin pins μ.
pub fn classify_pair(p1: &KernelParams, p2: &KernelParams) -> Result<ClassificationVerdict> {
    if p1.n() != p2.n() || p1.alpha() != p2.alpha() {
        return Err(Error::Incomparable(format!(
            "cannot compare alpha = {} over n = {} with alpha = {} over n = {}",
            p1.alpha(),
            p1.n(),
            p2.alpha(),
            p2.n()
        )));
    }
    for i in 0..p1.n() {
        let t1 = curvature_closed(p1, i, i)?.matrix.trace().re;
        let t2 = curvature_closed(p2, i, i)?.matrix.trace().re;
        if (t1 - t2).abs() > 1e-9 {
            return Ok(ClassificationVerdict {
                equivalent: false,
                witness: ClassificationWitness::TraceMismatch {
                    coord: i,
                    left: t1,
                    right: t2,
                },
            });
        }
    }
    for (k, theta) in p1.family().members().iter().enumerate() {
        let b1 = p1.b_diag()[k];
        let b2 = p2.b_diag()[k];
        if (b1 - b2).abs() > 1e-9 {
            return Ok(ClassificationVerdict {
                equivalent: false,
                witness: ClassificationWitness::DiagonalMismatch {
                    theta: theta.clone(),
                    left: b1,
                    right: b2,
                },
            });
        }
    }
    Ok(ClassificationVerdict {
        equivalent: true,
        witness: ClassificationWitness::None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::{frob, rel_residual};
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn c1_params() -> KernelParams {
        KernelParams::new(MultiIndex::new(vec![2]), vec![2.0], vec![1.0, 1.0, 1.0]).unwrap()
    }

    fn c2_params() -> KernelParams {
        KernelParams::with_unit_mu(MultiIndex::new(vec![0, 1]), vec![2.0, 3.0]).unwrap()
    }

    fn c3_params() -> KernelParams {
        KernelParams::new(
            MultiIndex::new(vec![1, 1]),
            vec![1.5, 2.5],
            vec![1.0, 0.8, 1.2, 0.9, 1.1],
        )
        .unwrap()
    }

    #[test]
    fn curvature_closed_c1_diagonal_frozen() {
        let p = c1_params();
        let k = curvature_closed(&p, 0, 0).unwrap();
        let want = [4.0 / 3.0, 44.0 / 21.0, 60.0 / 7.0];
        for (idx, w) in want.iter().enumerate() {
            assert!(
                (k.matrix[(idx, idx)] - c(*w, 0.0)).norm() < 1e-12,
                "entry {idx}: {} vs {w}",
                k.matrix[(idx, idx)]
            );
        }
        for row in 0..3 {
            for col in 0..3 {
                if row != col {
                    assert_eq!(k.matrix[(row, col)], c(0.0, 0.0));
                }
            }
        }
        assert!((k.matrix.trace().re - 12.0).abs() < 1e-12);
    }

    #[test]
    fn curvature_closed_c2_mixed_frozen() {
        // Only the column at θ=(1,0) survives, mapped to (1/√2)·e_{(0,1)}.
        let p = c2_params();
        let k = curvature_closed(&p, 0, 1).unwrap().matrix;
        let fam = p.family();
        let col = fam.rank_of(&MultiIndex::new(vec![1, 0])).unwrap();
        let row = fam.rank_of(&MultiIndex::new(vec![0, 1])).unwrap();
        let want = 1.0 / 2.0_f64.sqrt();
        assert!((k[(row, col)] - c(want, 0.0)).norm() < 1e-14);
        for rr in 0..3 {
            for cc in 0..3 {
                if (rr, cc) != (row, col) {
                    assert!(k[(rr, cc)].norm() < 1e-14, "entry ({rr},{cc}) = {}", k[(rr, cc)]);
                }
            }
        }
    }

    #[test]
    fn curvature_oracle_matches_closed_c1() {
        let p = c1_params();
        let quad = Quadrature::default();
        let oracle = curvature_oracle(&p, 0, 0, true, &quad).unwrap();
        let closed = curvature_closed(&p, 0, 0).unwrap().matrix;
        assert!(rel_residual(&oracle, &closed) < 1e-7, "residual {}", rel_residual(&oracle, &closed));
    }

    #[test]
    fn curvature_oracle_matches_closed_c2_all_components() {
        let p = c2_params();
        let quad = Quadrature::new(0.4, 24).unwrap();
        let coeffs =
            taylor_coefficients(&NormalizedKernel::new(&p), 2, &quad).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let oracle = curvature_from_taylor(&coeffs, 2, i, j, true).unwrap();
                let closed = curvature_closed(&p, i, j).unwrap().matrix;
                let gap = if frob(&closed) == 0.0 {
                    frob(&oracle)
                } else {
                    rel_residual(&oracle, &closed)
                };
                assert!(gap < 1e-7, "component ({i},{j}) residual {gap}");
            }
        }
    }

    #[test]
    fn curvature_raw_oracle_c1_structure() {
        // In the raw gauge the diagonal component is λ + 2θ with matching trace.
        let p = c1_params();
        let quad = Quadrature::default();
        let raw = curvature_oracle(&p, 0, 0, false, &quad).unwrap();
        for (idx, want) in [2.0, 4.0, 6.0].iter().enumerate() {
            assert!(
                (raw[(idx, idx)] - c(*want, 0.0)).norm() < 1e-9,
                "raw entry {idx}: {}",
                raw[(idx, idx)]
            );
        }
        assert!((raw.trace().re - 12.0).abs() < 1e-9);
    }

    #[test]
    fn telescoping_trace_identity() {
        let fams = [
            index_family(&MultiIndex::new(vec![2])),
            index_family(&MultiIndex::new(vec![0, 1])),
            index_family(&MultiIndex::new(vec![1, 1])),
            index_family(&MultiIndex::new(vec![2, 1, 0])),
        ];
        for fam in &fams {
            let b: Vec<f64> = (0..fam.len())
                .map(|k| 0.3 + 1.7 * ((k * 2654435761usize) % 97) as f64 / 97.0)
                .collect();
            for i in 0..fam.dim() {
                let resid = shift_trace_telescope(&b, fam, i).unwrap();
                assert!(resid.abs() < 1e-12, "telescope residual {resid}");
            }
        }
    }

    #[test]
    fn recover_lambda_roundtrip() {
        assert_relative_eq!(recover_lambda(&c1_params()).unwrap()[0], 2.0, epsilon = 1e-12);
        let l2 = recover_lambda(&c2_params()).unwrap();
        assert_relative_eq!(l2[0], 2.0, epsilon = 1e-12);
        assert_relative_eq!(l2[1], 3.0, epsilon = 1e-12);
        let l3 = recover_lambda(&c3_params()).unwrap();
        assert_relative_eq!(l3[0], 1.5, epsilon = 1e-12);
        assert_relative_eq!(l3[1], 2.5, epsilon = 1e-12);
    }

    #[test]
    fn recover_lambda_is_mu_independent() {
        let alpha = MultiIndex::new(vec![2]);
        for mu in [
            vec![1.0, 0.3, 2.5],
            vec![1.0, 4.0, 0.01],
            vec![1.0, 1.7, 0.9],
        ] {
            let p = KernelParams::new(alpha.clone(), vec![2.0], mu).unwrap();
            assert_relative_eq!(recover_lambda(&p).unwrap()[0], 2.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn boundedness_witness_c1_frozen() {
        let p = c1_params();
        let w = boundedness_witness(&p).unwrap();
        assert_eq!(w.shrink_steps, 0);
        assert_relative_eq!(w.epsilon[0], 1.0);
        assert_relative_eq!(w.mu_prime[0], 1.0);
        assert_relative_eq!(w.mu_prime[1], 0.5_f64.sqrt(), max_relative = 1e-14);
        assert_relative_eq!(w.mu_prime[2], (2.0 / 3.0_f64).sqrt(), max_relative = 1e-14);
        assert_relative_eq!(w.c[0], 1.0);
    }

    #[test]
    fn boundedness_factorization_and_diagonal() {
        for p in [c1_params(), c3_params()] {
            let w = boundedness_witness(&p).unwrap();
            let prime = witness_params(&p, &w).unwrap();
            for (a, b) in p.b_diag().iter().zip(prime.b_diag()) {
                assert_relative_eq!(a, b, max_relative = 1e-13);
            }
            let pts: Vec<Vec<C64>> = match p.n() {
                1 => vec![vec![c(0.3, 0.2)], vec![c(-0.5, 0.1)]],
                _ => vec![
                    vec![c(0.3, 0.2), c(-0.1, 0.4)],
                    vec![c(-0.2, -0.3), c(0.5, 0.0)],
                ],
            };
            for z in &pts {
                for wpt in &pts {
                    let resid = factorization_residual(&p, &w, z, wpt).unwrap();
                    assert!(resid < 1e-10, "factorization residual {resid}");
                }
            }
        }
    }

    #[test]
    fn boundedness_rejects_degenerate_lambda() {
        let p = KernelParams::with_unit_mu(MultiIndex::new(vec![1]), vec![2.0_f64.powi(-21)])
            .unwrap();
        assert!(matches!(
            boundedness_witness(&p),
            Err(Error::WitnessSearch(_))
        ));
    }

    #[test]
    fn scaled_kernel_gram_is_psd() {
        let p = c1_params();
        let w = boundedness_witness(&p).unwrap();
        let base = CanonicalKernel::new(&p);
        let scaled = ScaledCoordinateKernel::new(&base, 0, w.c[0]).unwrap();
        let pts = vec![
            vec![c(0.0, 0.0)],
            vec![c(0.45, 0.3)],
            vec![c(-0.5, 0.2)],
            vec![c(0.1, -0.7)],
        ];
        let g = crate::kernels::gram_matrix(&scaled, &pts).unwrap();
        let (lo, hi) = crate::matrix::hermitian_eigen_range(&g);
        assert!(lo > -1e-10 * hi.abs(), "min eigenvalue {lo}");
    }

    #[test]
    fn commutant_identity_only_is_degenerate() {
        let id = CMatrix::identity(3, 3);
        assert_eq!(commutant_dimension(&[id]).unwrap(), 9);
    }

    #[test]
    fn irreducibility_c1_c2() {
        let p1 = c1_params();
        let cert = irreducibility_certificate(
            &p1,
            default_commutant_order(&p1),
            &Quadrature::default(),
        )
        .unwrap();
        assert_eq!(cert.commutant_dimension, 1);
        assert!(cert.irreducible);

        let p2 = c2_params();
        let cert = irreducibility_certificate(
            &p2,
            default_commutant_order(&p2),
            &Quadrature::new(0.4, 16).unwrap(),
        )
        .unwrap();
        assert_eq!(cert.commutant_dimension, 1);
        assert!(cert.irreducible);
    }

    #[test]
    fn axis_scan_c1() {
        let p = c1_params();
        let diag = axis_shift_diagnostic(&p, 0, 3, &Quadrature::default()).unwrap();
        assert_eq!(diag.pairs, vec![(0, 1), (1, 2)]);
        // The identity-normalization kills the q = 0 coefficient, so the
        // first detection happens at q = 1.
        assert!(diag.conclusive);
        assert_eq!(diag.minimal_q, vec![Some(1), Some(1)]);
        assert!(diag.off_support_max < 1e-9, "off-support {}", diag.off_support_max);

        let coeffs = axis_coefficients(&p, 0, 3, &Quadrature::default()).unwrap();
        assert!(frob(&coeffs[0]) < 1e-10, "c(0) should vanish, norm {}", frob(&coeffs[0]));
    }

    #[test]
    fn witness_examples_and_errors() {
        let w = inequivalence_witness(&MultiIndex::new(vec![2, 0])).unwrap();
        assert_eq!(w.theta, MultiIndex::new(vec![1, 0]));
        assert_eq!((w.i, w.j), (0, 1));
        let w = inequivalence_witness(&MultiIndex::new(vec![0, 1])).unwrap();
        assert_eq!(w.theta, MultiIndex::new(vec![1, 0]));
        assert_eq!((w.i, w.j), (0, 1));
        assert!(matches!(
            inequivalence_witness(&MultiIndex::new(vec![1, 0])),
            Err(Error::NoWitness(_))
        ));
        assert!(matches!(
            inequivalence_witness(&MultiIndex::new(vec![3])),
            Err(Error::NoWitness(_))
        ));
        assert!(matches!(
            inequivalence_witness(&MultiIndex::new(vec![0, 0])),
            Err(Error::NoWitness(_))
        ));
    }

    #[test]
    fn witness_scan_is_exhaustive_and_valid() {
        let scan = witness_scan(4, 4).unwrap();
        // Families with n in 2..=4, degree 1..=4, minus the three ε₁ cases.
        assert_eq!(scan.len(), 114);
        for (alpha, w) in &scan {
            let fam = index_family(alpha);
            assert!(fam.contains(&w.theta), "theta outside family for {alpha}");
            let stepped = w.theta.lower(w.i).unwrap().bump(w.j);
            assert!(fam.contains(&stepped), "stepped index outside family for {alpha}");
            assert!(
                !fam.contains(&w.theta.bump(w.j)),
                "theta+e_j should leave the family for {alpha}"
            );
        }
    }

    #[test]
    fn witness_entry_c2_frozen() {
        let p = c2_params();
        let w = inequivalence_witness(p.alpha()).unwrap();
        let predicted = witness_entry_predicted(&p, &w).unwrap();
        assert_relative_eq!(predicted, 1.0 / 2.0_f64.sqrt(), max_relative = 1e-14);
        let measured = witness_entry_measured(&p, &w).unwrap();
        assert!((measured - c(predicted, 0.0)).norm() < 1e-13);
        assert!(measured.norm() > 1e-10);
    }

    #[test]
    fn tensor_baseline_curvature() {
        let k = tensor_kernel(vec![2.0, 3.0]).unwrap();
        let quad = Quadrature::new(0.4, 16).unwrap();
        let mixed = curvature_oracle_kernel(&k, 0, 1, &quad).unwrap();
        assert!(frob(&mixed) < 1e-12, "mixed curvature {}", frob(&mixed));
        for (i, want) in [2.0, 3.0].iter().enumerate() {
            let diag = curvature_oracle_kernel(&k, i, i, &quad).unwrap();
            assert!((diag[(0, 0)] - c(*want, 0.0)).norm() < 1e-9);
        }
    }

    #[test]
    fn classify_pairs() {
        for p in [c1_params(), c2_params(), c3_params()] {
            let v = classify_pair(&p, &p).unwrap();
            assert!(v.equivalent);
            assert_eq!(v.witness, ClassificationWitness::None);
        }

        let p1 = c1_params();
        let p2 =
            KernelParams::new(MultiIndex::new(vec![2]), vec![2.5], vec![1.0, 1.0, 1.0]).unwrap();
        let v = classify_pair(&p1, &p2).unwrap();
        assert!(!v.equivalent);
        match v.witness {
            ClassificationWitness::TraceMismatch { left, right, .. } => {
                assert_relative_eq!(left, 12.0, epsilon = 1e-12);
                assert_relative_eq!(right, 13.5, epsilon = 1e-12);
            }
            other => panic!("expected trace witness, got {other:?}"),
        }

        let p3 =
            KernelParams::new(MultiIndex::new(vec![2]), vec![2.0], vec![1.0, 1.0, 2.0]).unwrap();
        let v = classify_pair(&p1, &p3).unwrap();
        assert!(!v.equivalent);
        match v.witness {
            ClassificationWitness::DiagonalMismatch { theta, left, right } => {
                assert_eq!(theta, MultiIndex::new(vec![2]));
                assert_relative_eq!(left, 7.0 / 3.0, max_relative = 1e-14);
                assert_relative_eq!(right, 16.0 / 3.0, max_relative = 1e-14);
            }
            other => panic!("expected diagonal witness, got {other:?}"),
        }

        // Symmetry of the verdict.
        let v = classify_pair(&p2, &p1).unwrap();
        assert!(!v.equivalent);

        assert!(matches!(
            classify_pair(&p1, &c2_params()),
            Err(Error::Incomparable(_))
        ));
    }
}
