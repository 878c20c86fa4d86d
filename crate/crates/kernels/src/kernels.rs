//! Kernel evaluation on the polydisc: the scalar factors, closed-form mixed
//! derivatives, the block and canonical construction routes for the matrix
//! kernel, normalization at the origin, and Taylor coefficient extraction by
//! circle quadrature.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::matrix::{czeros, diag_pow, nilpotent_exp, C64, CMatrix};
use crate::multiindex::{binomial, diagonal_matrix, enumerate_up_to, multi_binomial, MultiIndex};
use crate::params::KernelParams;

const ONE: C64 = C64::new(1.0, 0.0);
const CZERO: C64 = C64::new(0.0, 0.0);

/// Circle-quadrature settings shared by the Taylor engine and the derivative
/// oracle. `radius` is the common circle radius, `nodes` the trapezoid count
/// per circle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Quadrature {
    pub radius: f64,
    pub nodes: usize,
}

impl Default for Quadrature {
    fn default() -> Self {
        Quadrature {
            radius: 0.4,
            nodes: 64,
        }
    }
}

impl Quadrature {
    pub fn new(radius: f64, nodes: usize) -> Result<Self> {
        let q = Quadrature { radius, nodes };
        q.validate()?;
        Ok(q)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.radius.is_finite() || self.radius <= 0.0 || self.radius >= 1.0 {
            return Err(Error::InvalidParams(format!(
                "quadrature radius {} outside (0, 1)",
                self.radius
            )));
        }
        if self.nodes < 8 {
            return Err(Error::InvalidParams(format!(
                "quadrature needs at least 8 nodes, got {}",
                self.nodes
            )));
        }
        Ok(())
    }

    /// `nodes`-th roots of unity, index `k` holding `exp(2πik/nodes)`.
    fn roots(&self) -> Vec<C64> {
        (0..self.nodes)
            .map(|k| C64::from_polar(1.0, TAU * k as f64 / self.nodes as f64))
            .collect()
    }
}

pub(crate) fn check_len(label: &str, z: &[C64], n: usize) -> Result<()> {
    if z.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "{label} has {} coordinates, expected {n}",
            z.len()
        )));
    }
    Ok(())
}

/// Reject points on or outside the unit polydisc boundary.
pub(crate) fn check_in_polydisc(label: &str, z: &[C64]) -> Result<()> {
    for (i, zi) in z.iter().enumerate() {
        if !zi.re.is_finite() || !zi.im.is_finite() {
            return Err(Error::Domain(format!("{label}[{i}] is not finite")));
        }
        if zi.norm() >= 1.0 {
            return Err(Error::Domain(format!(
                "{label}[{i}] has modulus {:.6} >= 1",
                zi.norm()
            )));
        }
    }
    Ok(())
}

/// Rising factorial `x (x+1) ⋯ (x+m−1)`; 1 when `m = 0`.
fn poch(x: f64, m: usize) -> f64 {
    let mut acc = 1.0;
    for k in 0..m {
        acc *= x + k as f64;
    }
    acc
}

/// Falling factorial `p (p−1) ⋯ (p−k+1)`; requires `k <= p`.
fn falling(p: usize, k: usize) -> f64 {
    let mut acc = 1.0;
    for j in 0..k {
        acc *= (p - j) as f64;
    }
    acc
}

/// `∏_i (1 − z_i w̄_i)^{−ν_i}` for `z, w` in the polydisc.
pub fn scalar_kernel(nu: &[f64], z: &[C64], w: &[C64]) -> Result<C64> {
    check_len("z", z, nu.len())?;
    check_len("w", w, nu.len())?;
    check_in_polydisc("z", z)?;
    check_in_polydisc("w", w)?;
    let mut acc = ONE;
    for i in 0..nu.len() {
        // |z_i w̄_i| < 1 keeps 1 − z_i w̄_i in the right half plane, so the
        // principal power below is continuous on the whole domain.
        acc *= (ONE - z[i] * w[i].conj()).powf(-nu[i]);
    }
    Ok(acc)
}

/// Mixed derivative `∂_z^a ∂̄_w^b` of the scalar kernel, in closed form.
///
/// Coordinates factor, and in one variable with `u = w̄`,
/// `∂_z^p ∂_u^q (1−zu)^{−ν}` expands by Leibniz into the finite sum below.
pub fn scalar_kernel_deriv(
    nu: &[f64],
    a: &MultiIndex,
    b: &MultiIndex,
    z: &[C64],
    w: &[C64],
) -> Result<C64> {
    check_len("z", z, nu.len())?;
    check_len("w", w, nu.len())?;
    if a.dim() != nu.len() || b.dim() != nu.len() {
        return Err(Error::DimensionMismatch(format!(
            "derivative orders of lengths {} and {} against n = {}",
            a.dim(),
            b.dim(),
            nu.len()
        )));
    }
    check_in_polydisc("z", z)?;
    check_in_polydisc("w", w)?;
    let mut acc = ONE;
    for i in 0..nu.len() {
        let (p, q) = (a.get(i), b.get(i));
        let (zi, u) = (z[i], w[i].conj());
        let base = ONE - zi * u;
        let mut s = CZERO;
        for k in 0..=p.min(q) {
            let coef = binomial(q, k) * falling(p, k) * poch(nu[i] + p as f64, q - k);
            s += coef
                * u.powu((p - k) as u32)
                * zi.powu((q - k) as u32)
                * base.powf(-(nu[i] + (p + q - k) as f64));
        }
        acc *= poch(nu[i], p) * s;
    }
    Ok(acc)
}

/// Numerical `∂^a f(center)` from trapezoid sums over a product of circles.
/// Fails with `Geometry` when some circle leaves the polydisc.
pub fn cauchy_derivative_oracle<F>(
    f: F,
    center: &[C64],
    a: &MultiIndex,
    quad: &Quadrature,
) -> Result<C64>
where
    F: Fn(&[C64]) -> Result<C64>,
{
    quad.validate()?;
    let n = center.len();
    if a.dim() != n {
        return Err(Error::DimensionMismatch(format!(
            "derivative order of length {} against n = {n}",
            a.dim()
        )));
    }
    check_in_polydisc("center", center)?;
    for (i, c) in center.iter().enumerate() {
        if c.norm() + quad.radius >= 1.0 {
            return Err(Error::Geometry(format!(
                "circle {i} leaves the polydisc: |center| = {:.6} with radius {}",
                c.norm(),
                quad.radius
            )));
        }
    }
    let nn = quad.nodes;
    let roots = quad.roots();
    let total = nn.pow(n as u32);
    let mut digits = vec![0usize; n];
    let mut point = vec![CZERO; n];
    let mut acc = CZERO;
    for flat in 0..total {
        let mut rem = flat;
        for i in 0..n {
            digits[i] = rem % nn;
            rem /= nn;
            point[i] = center[i] + quad.radius * roots[digits[i]];
        }
        let twist: usize = digits
            .iter()
            .zip(a.entries())
            .map(|(&d, &ai)| d * ai % nn)
            .sum();
        acc += f(&point)? * roots[(nn - twist % nn) % nn];
    }
    let scale = a.factorial() / (quad.radius.powi(a.degree() as i32) * total as f64);
    Ok(acc * scale)
}

/// A matrix-valued kernel on the polydisc, holomorphic in `z` and
/// anti-holomorphic in `w`.
pub trait KernelFn {
    fn n(&self) -> usize;
    /// Row/column count of the value matrices.
    fn size(&self) -> usize;
    fn eval(&self, z: &[C64], w: &[C64]) -> Result<CMatrix>;
}

/// Product-form evaluator, the fast route.
pub struct CanonicalKernel<'a> {
    params: &'a KernelParams,
}

impl<'a> CanonicalKernel<'a> {
    pub fn new(params: &'a KernelParams) -> Self {
        CanonicalKernel { params }
    }
}

impl KernelFn for CanonicalKernel<'_> {
    fn n(&self) -> usize {
        self.params.n()
    }

    fn size(&self) -> usize {
        self.params.r()
    }

    fn eval(&self, z: &[C64], w: &[C64]) -> Result<CMatrix> {
        kernel_canonical(self.params, z, w)
    }
}

/// Blockwise evaluator, the independent slow route.
pub struct DirectSumKernel<'a> {
    params: &'a KernelParams,
}

impl<'a> DirectSumKernel<'a> {
    pub fn new(params: &'a KernelParams) -> Self {
        DirectSumKernel { params }
    }
}

impl KernelFn for DirectSumKernel<'_> {
    fn n(&self) -> usize {
        self.params.n()
    }

    fn size(&self) -> usize {
        self.params.r()
    }

    fn eval(&self, z: &[C64], w: &[C64]) -> Result<CMatrix> {
        kernel_direct_sum(self.params, z, w)
    }
}

/// Evaluator for the kernel normalized to the identity at the origin.
pub struct NormalizedKernel<'a> {
    params: &'a KernelParams,
}

impl<'a> NormalizedKernel<'a> {
    pub fn new(params: &'a KernelParams) -> Self {
        NormalizedKernel { params }
    }
}

impl KernelFn for NormalizedKernel<'_> {
    fn n(&self) -> usize {
        self.params.n()
    }

    fn size(&self) -> usize {
        self.params.r()
    }

    fn eval(&self, z: &[C64], w: &[C64]) -> Result<CMatrix> {
        normalized_kernel(self.params, z, w)
    }
}

/// Scalar product kernel `∏_i (1 − z_i w̄_i)^{−ν_i}` wrapped as a 1×1 matrix
/// kernel.
pub struct ScalarProductKernel {
    nu: Vec<f64>,
}

impl ScalarProductKernel {
    pub fn new(nu: Vec<f64>) -> Result<Self> {
        if nu.is_empty() {
            return Err(Error::InvalidParams("empty weight vector".into()));
        }
        for (i, &v) in nu.iter().enumerate() {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::InvalidParams(format!(
                    "weight nu[{i}] = {v} must be positive and finite"
                )));
            }
        }
        Ok(ScalarProductKernel { nu })
    }

    pub fn nu(&self) -> &[f64] {
        &self.nu
    }
}

impl KernelFn for ScalarProductKernel {
    fn n(&self) -> usize {
        self.nu.len()
    }

    fn size(&self) -> usize {
        1
    }

    fn eval(&self, z: &[C64], w: &[C64]) -> Result<CMatrix> {
        let v = scalar_kernel(&self.nu, z, w)?;
        Ok(CMatrix::from_element(1, 1, v))
    }
}

/// One block `K_β`, entries indexed by the family:
/// `K_β(z,w)_{s,t} = C(s,β) C(t,β) / ((λ+2β)_{s−β} (λ+2β)_{t−β})
///  · ∂^{s−β} ∂̄^{t−β} ∏ (1−z_i w̄_i)^{−(λ_i+2β_i)}`,
/// zero wherever `β ≰ s` or `β ≰ t`.
pub fn block_kernel(
    params: &KernelParams,
    beta: &MultiIndex,
    z: &[C64],
    w: &[C64],
) -> Result<CMatrix> {
    let fam = params.family();
    if !fam.contains(beta) {
        return Err(Error::InvalidParams(format!(
            "index {beta} is not a member of the family for alpha = {}",
            fam.alpha()
        )));
    }
    check_len("z", z, params.n())?;
    check_len("w", w, params.n())?;
    check_in_polydisc("z", z)?;
    check_in_polydisc("w", w)?;
    let nu = params.lambda_shifted(beta);
    let r = params.r();
    let mut out = czeros(r, r);
    for (row, s) in fam.members().iter().enumerate() {
        let cs = multi_binomial(s, beta)?;
        if cs == 0.0 {
            continue;
        }
        let ds = s.checked_sub(beta).expect("binomial nonzero implies beta <= s");
        let ps = crate::multiindex::multi_pochhammer(&nu, &ds)?;
        for (col, t) in fam.members().iter().enumerate() {
            let ct = multi_binomial(t, beta)?;
            if ct == 0.0 {
                continue;
            }
            let dt = t.checked_sub(beta).expect("binomial nonzero implies beta <= t");
            let pt = crate::multiindex::multi_pochhammer(&nu, &dt)?;
            let deriv = scalar_kernel_deriv(&nu, &ds, &dt, z, w)?;
            out[(row, col)] = cs * ct / (ps * pt) * deriv;
        }
    }
    Ok(out)
}

/// Weighted block sum `Σ_β μ_β² K_β` over the whole family.
pub fn kernel_direct_sum(params: &KernelParams, z: &[C64], w: &[C64]) -> Result<CMatrix> {
    let r = params.r();
    let mut out = czeros(r, r);
    for (k, beta) in params.family().members().iter().enumerate() {
        let block = block_kernel(params, beta, z, w)?;
        let weight = params.mu()[k] * params.mu()[k];
        out.zip_apply(&block, |o, b| *o += weight * b);
    }
    Ok(out)
}

/// Product-form kernel
/// `∏(1−z_iw̄_i)^{−λ_i} · D(zw̄) e^{Σ w̄_i S_i} B e^{Σ z_i S_i^*} D(zw̄)`
/// with `B = K(0,0)` diagonal.
pub fn kernel_canonical(params: &KernelParams, z: &[C64], w: &[C64]) -> Result<CMatrix> {
    check_len("z", z, params.n())?;
    check_len("w", w, params.n())?;
    check_in_polydisc("z", z)?;
    check_in_polydisc("w", w)?;
    let scalar = scalar_kernel(params.lambda(), z, w)?;
    let u: Vec<C64> = z.iter().zip(w).map(|(zi, wi)| zi * wi.conj()).collect();
    let d = diagonal_matrix(&u, params.family())?;
    let wbar: Vec<C64> = w.iter().map(|wi| wi.conj()).collect();
    let zbar: Vec<C64> = z.iter().map(|zi| zi.conj()).collect();
    let deg = params.nilpotency();
    let ew = nilpotent_exp(&params.shift_combination(&wbar), deg);
    // Σ z_i S_i^* is the adjoint of Σ z̄_i S_i.
    let ez = nilpotent_exp(&params.shift_combination(&zbar).adjoint(), deg);
    let b = kernel_at_zero(params);
    Ok((&d * ew * b * ez * d) * scalar)
}

/// `K(0,0)`, the diagonal matrix carried by the parameter set.
pub fn kernel_at_zero(params: &KernelParams) -> CMatrix {
    diag_pow(params.b_diag(), 1.0)
}

/// Kernel conjugated to satisfy `K̂(z,0) = K̂(0,w) = I`:
/// `K̂(z,w) = B^{1/2} K(z,0)^{−1} K(z,w) K(0,w)^{−1} B^{1/2}` with the
/// normalizers in nilpotent closed form.
pub fn normalized_kernel(params: &KernelParams, z: &[C64], w: &[C64]) -> Result<CMatrix> {
    let k = kernel_canonical(params, z, w)?;
    let left = left_normalizer(params, z)?;
    let right = right_normalizer(params, w)?;
    Ok(left * k * right)
}

/// `B^{1/2} K(z,0)^{−1} = B^{1/2} e^{−Σ z_i S_i^*} B^{−1}`.
pub fn left_normalizer(params: &KernelParams, z: &[C64]) -> Result<CMatrix> {
    check_len("z", z, params.n())?;
    check_in_polydisc("z", z)?;
    let zbar: Vec<C64> = z.iter().map(|zi| zi.conj()).collect();
    let e = nilpotent_exp(
        &(-params.shift_combination(&zbar).adjoint()),
        params.nilpotency(),
    );
    Ok(diag_pow(params.b_diag(), 0.5) * e * diag_pow(params.b_diag(), -1.0))
}

/// `K(0,w)^{−1} B^{1/2} = B^{−1} e^{−Σ w̄_i S_i} B^{1/2}`.
pub fn right_normalizer(params: &KernelParams, w: &[C64]) -> Result<CMatrix> {
    check_len("w", w, params.n())?;
    check_in_polydisc("w", w)?;
    let wbar: Vec<C64> = w.iter().map(|wi| wi.conj()).collect();
    let e = nilpotent_exp(&(-params.shift_combination(&wbar)), params.nilpotency());
    Ok(diag_pow(params.b_diag(), -1.0) * e * diag_pow(params.b_diag(), 0.5))
}

/// Taylor coefficient matrices `C_{a,b}` with `|a| + |b| <= order`, where
/// `K(z,w) = Σ C_{a,b} z^a w̄^b`, extracted by trapezoid quadrature over
/// product circles around the origin.
pub fn taylor_coefficients<K: KernelFn + ?Sized>(
    kernel: &K,
    order: usize,
    quad: &Quadrature,
) -> Result<BTreeMap<(MultiIndex, MultiIndex), CMatrix>> {
    quad.validate()?;
    if quad.nodes < order + 2 {
        return Err(Error::InvalidParams(format!(
            "{} quadrature nodes cannot separate coefficients of order {order}",
            quad.nodes
        )));
    }
    let n = kernel.n();
    let r = kernel.size();
    let nn = quad.nodes;
    let roots = quad.roots();
    let total = nn.pow(n as u32);

    let idx_list = enumerate_up_to(n, order);
    // Pairs (a, b) with |a| + |b| <= order, and flat ranks for the per-point
    // partial sums.
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for (ai, a) in idx_list.iter().enumerate() {
        for (bi, b) in idx_list.iter().enumerate() {
            if a.degree() + b.degree() <= order {
                pairs.push((ai, bi));
            }
        }
    }

    // Grid points and the phase index <a, digits> mod nodes for every index,
    // precomputed once per side.
    let mut points: Vec<Vec<C64>> = Vec::with_capacity(total);
    let mut neg_phase: Vec<Vec<usize>> = Vec::with_capacity(total);
    let mut pos_phase: Vec<Vec<usize>> = Vec::with_capacity(total);
    let mut digits = vec![0usize; n];
    for flat in 0..total {
        let mut rem = flat;
        for i in 0..n {
            digits[i] = rem % nn;
            rem /= nn;
        }
        points.push(digits.iter().map(|&d| quad.radius * roots[d]).collect());
        let mut neg = Vec::with_capacity(idx_list.len());
        let mut pos = Vec::with_capacity(idx_list.len());
        for idx in &idx_list {
            let s: usize = digits
                .iter()
                .zip(idx.entries())
                .map(|(&d, &ik)| d * ik % nn)
                .sum();
            neg.push((nn - s % nn) % nn);
            pos.push(s % nn);
        }
        neg_phase.push(neg);
        pos_phase.push(pos);
    }

    let cells = r * r;
    let mut acc = vec![vec![CZERO; cells]; pairs.len()];
    let mut partial = vec![vec![CZERO; cells]; idx_list.len()];
    for wp in 0..total {
        for row in partial.iter_mut() {
            row.fill(CZERO);
        }
        for zp in 0..total {
            let value = kernel.eval(&points[zp], &points[wp])?;
            let slice = value.as_slice();
            for (ai, row) in partial.iter_mut().enumerate() {
                let phase = roots[neg_phase[zp][ai]];
                for (dst, src) in row.iter_mut().zip(slice) {
                    *dst += src * phase;
                }
            }
        }
        for (pi, &(ai, bi)) in pairs.iter().enumerate() {
            let phase = roots[pos_phase[wp][bi]];
            let row = &partial[ai];
            let out = &mut acc[pi];
            for (dst, src) in out.iter_mut().zip(row) {
                *dst += src * phase;
            }
        }
    }

    let norm = (total as f64) * (total as f64);
    let mut map = BTreeMap::new();
    for (pi, &(ai, bi)) in pairs.iter().enumerate() {
        let a = &idx_list[ai];
        let b = &idx_list[bi];
        let scale = quad.radius.powi(-((a.degree() + b.degree()) as i32)) / norm;
        let m = CMatrix::from_column_slice(r, r, &acc[pi]) * C64::new(scale, 0.0);
        map.insert((a.clone(), b.clone()), m);
    }
    Ok(map)
}

/// Gram matrix with blocks `G_{ij} = K(p_i, p_j)`, stacked in point order.
pub fn gram_matrix<K: KernelFn + ?Sized>(kernel: &K, points: &[Vec<C64>]) -> Result<CMatrix> {
    if points.is_empty() {
        return Err(Error::InvalidParams("empty point list".into()));
    }
    let r = kernel.size();
    let m = points.len();
    let mut g = czeros(m * r, m * r);
    for (i, p) in points.iter().enumerate() {
        for (j, q) in points.iter().enumerate() {
            let block = kernel.eval(p, q)?;
            g.view_mut((i * r, j * r), (r, r)).copy_from(&block);
        }
    }
    Ok(g)
}
