//! Lifted disc automorphisms and the matrix multiplier they induce.
//!
//! A factor `(a, t)` with `|a| < 1` and `t` an unreduced real angle stands
//! for the automorphism `w ↦ e^{it} (w−a)/(1−āw)` together with a choice of
//! lift to the universal cover. The lift only matters through the fractional
//! derivative powers `(g')^s`: these are evaluated as
//! `e^{ist} ((1−|a|²)/(1−āw)²)^s` with the principal branch of the base,
//! which is safe because `Re(1−āw) > 0` on the disc keeps the base off the
//! negative real axis.

use num_complex::ComplexFloat;

use crate::error::{Error, Result};
use crate::matrix::{czeros, CMatrix, C64};
use crate::multiindex::{diagonal_matrix, multi_binomial};
use crate::params::KernelParams;

const ONE: C64 = C64::new(1.0, 0.0);

/// One coordinate of a lifted automorphism tuple.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MobiusFactor {
    a: C64,
    t: f64,
}

impl MobiusFactor {
    pub fn new(a: C64, t: f64) -> Result<Self> {
        if !(a.norm() < 1.0) || !t.is_finite() {
            return Err(Error::Domain(format!(
                "mobius factor needs |a| < 1 and finite t, got a = {a}, t = {t}"
            )));
        }
        Ok(MobiusFactor { a, t })
    }

    pub fn identity() -> Self {
        MobiusFactor {
            a: C64::new(0.0, 0.0),
            t: 0.0,
        }
    }

    pub fn a(&self) -> C64 {
        self.a
    }

    /// The unreduced lifted angle.
    pub fn t(&self) -> f64 {
        self.t
    }

    /// Apply the underlying automorphism.
    pub fn act(&self, w: C64) -> C64 {
        C64::from_polar(1.0, self.t) * (w - self.a) / (ONE - self.a.conj() * w)
    }

    /// `(g')^s(w)` on the chosen lift, any real exponent `s`.
    pub fn derivative_power(&self, w: C64, s: f64) -> Result<C64> {
        if !(w.norm() < 1.0) {
            return Err(Error::Domain(format!("|w| = {} is not inside D", w.norm())));
        }
        let denom = ONE - self.a.conj() * w;
        let base = (1.0 - self.a.norm_sqr()) / (denom * denom);
        Ok(C64::from_polar(1.0, s * self.t) * base.powf(s))
    }

    /// The constant `c_g = −e^{−it/2} ā / √(1−|a|²)` with
    /// `g'' = −2 c_g (g')^{3/2}` on the chosen lift.
    pub fn schwarz_constant(&self) -> C64 {
        -C64::from_polar(1.0, -self.t / 2.0) * self.a.conj() / (1.0 - self.a.norm_sqr()).sqrt()
    }

    /// Preimage of `v` under the underlying automorphism.
    pub fn act_inverse(&self, v: C64) -> C64 {
        let ve = v * C64::from_polar(1.0, -self.t);
        (self.a + ve) / (ONE + self.a.conj() * ve)
    }
}

/// Underlying composition `g1 ∘ g2` with the angle reduced to `(−π, π]`.
fn compose_underlying(g1: &MobiusFactor, g2: &MobiusFactor) -> (C64, f64) {
    let b = g2.act_inverse(g1.a);
    // e^{iτ} = h'(b) (1−|b|²) for h = g1 ∘ g2 in standard form h(b) = 0.
    let d1 = g1
        .derivative_power(g1.a, 1.0)
        .expect("|a| < 1 by construction");
    let d2 = g2.derivative_power(b, 1.0).expect("|b| < 1 for an automorphism");
    let tau = (d1 * d2 * (1.0 - b.norm_sqr())).arg();
    (b, tau)
}

/// Compose two lifted factors, tracking the lifted angle of the result by
/// continuation along the path `u ↦ (u·a₁, u·t₁) ∘ g₂`, which starts at
/// `g₂`'s own lift. A jump above `π/2` between consecutive steps aborts with
/// a continuation error; callers retry with more steps.
pub fn compose_factors(g1: &MobiusFactor, g2: &MobiusFactor, steps: usize) -> Result<MobiusFactor> {
    if steps < 8 {
        return Err(Error::InvalidParams(format!(
            "continuation needs at least 8 steps, got {steps}"
        )));
    }
    let mut t_curr = g2.t;
    let mut b_final = g2.a;
    for k in 1..=steps {
        let u = k as f64 / steps as f64;
        let partial = MobiusFactor {
            a: g1.a.scale(u),
            t: g1.t * u,
        };
        let (b, tau) = compose_underlying(&partial, g2);
        // nearest representative of tau modulo 2π
        let mut delta = (tau - t_curr).rem_euclid(2.0 * std::f64::consts::PI);
        if delta > std::f64::consts::PI {
            delta -= 2.0 * std::f64::consts::PI;
        }
        if delta.abs() > std::f64::consts::FRAC_PI_2 {
            return Err(Error::Continuation(format!(
                "angle jump {delta:.3} at step {k}/{steps}; retry with more steps"
            )));
        }
        t_curr += delta;
        b_final = b;
    }
    Ok(MobiusFactor {
        a: b_final,
        t: t_curr,
    })
}

/// A lifted automorphism of the polydisc, one factor per coordinate.
#[derive(Clone, Debug, PartialEq)]
pub struct MobiusTuple(Vec<MobiusFactor>);

impl MobiusTuple {
    pub fn new(factors: Vec<MobiusFactor>) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::InvalidParams("empty automorphism tuple".into()));
        }
        Ok(MobiusTuple(factors))
    }

    pub fn identity(n: usize) -> Self {
        MobiusTuple(vec![MobiusFactor::identity(); n])
    }

    /// The tuple `φ_z` with `φ_{z_i}(w) = (w−z_i)/(1−z̄_i w)` and zero angles.
    pub fn centered_at(z: &[C64]) -> Result<Self> {
        let factors = z
            .iter()
            .map(|&zi| MobiusFactor::new(zi, 0.0))
            .collect::<Result<Vec<_>>>()?;
        MobiusTuple::new(factors)
    }

    pub fn n(&self) -> usize {
        self.0.len()
    }

    pub fn factors(&self) -> &[MobiusFactor] {
        &self.0
    }

    pub fn factor(&self, i: usize) -> &MobiusFactor {
        &self.0[i]
    }

    pub fn act(&self, z: &[C64]) -> Result<Vec<C64>> {
        if z.len() != self.n() {
            return Err(Error::DimensionMismatch(format!(
                "point has {} coordinates for an n = {} tuple",
                z.len(),
                self.n()
            )));
        }
        for zi in z {
            if !(zi.norm() < 1.0) {
                return Err(Error::Domain(format!("|z_i| = {} is not inside D", zi.norm())));
            }
        }
        Ok(z.iter().zip(&self.0).map(|(&zi, g)| g.act(zi)).collect())
    }
}

/// Composition `g1 ∘ g2` on the cover, coordinate by coordinate.
pub fn compose_lifted(g1: &MobiusTuple, g2: &MobiusTuple, steps: usize) -> Result<MobiusTuple> {
    if g1.n() != g2.n() {
        return Err(Error::DimensionMismatch(format!(
            "composing tuples of sizes {} and {}",
            g1.n(),
            g2.n()
        )));
    }
    let factors = g1
        .0
        .iter()
        .zip(&g2.0)
        .map(|(f1, f2)| compose_factors(f1, f2, steps))
        .collect::<Result<Vec<_>>>()?;
    MobiusTuple::new(factors)
}

/// The matrix multiplier of a lifted tuple at `z`: entry `(θ, η)` is
/// `C(θ,η) ∏_i (−c_{g_i})^{θ_i−η_i} (g_i')^{(λ_i+θ_i+η_i)/2}(z_i)` when
/// `η ≤ θ` entrywise and zero otherwise. Lower triangular in the family
/// order with nonvanishing diagonal, hence invertible.
pub fn cocycle_eval(g: &MobiusTuple, z: &[C64], params: &KernelParams) -> Result<CMatrix> {
    let n = params.n();
    if g.n() != n || z.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "cocycle for n = {n} got a tuple of size {} at a point of size {}",
            g.n(),
            z.len()
        )));
    }
    let fam = params.family();
    let r = fam.len();
    let neg_c: Vec<C64> = g.0.iter().map(|f| -f.schwarz_constant()).collect();
    let mut m = czeros(r, r);
    for (row, theta) in fam.members().iter().enumerate() {
        for (col, eta) in fam.members().iter().enumerate() {
            if !eta.le_entrywise(theta) {
                continue;
            }
            let mut entry = C64::new(multi_binomial(theta, eta)?, 0.0);
            for i in 0..n {
                let k = theta.get(i) - eta.get(i);
                if k > 0 {
                    entry *= neg_c[i].powi(k as i32);
                }
                let s = (params.lambda()[i] + (theta.get(i) + eta.get(i)) as f64) / 2.0;
                entry *= g.0[i].derivative_power(z[i], s)?;
            }
            m[(row, col)] = entry;
        }
    }
    Ok(m)
}

/// Closed product form of the multiplier of `φ_z` at `z` itself:
/// `∏_i (1−|z_i|²)^{−λ_i/2} · D(|z|²) · exp(Σ_i z̄_i S_i)`.
pub fn cocycle_factored(z: &[C64], params: &KernelParams) -> Result<CMatrix> {
    let n = params.n();
    if z.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "point has {} coordinates for n = {n}",
            z.len()
        )));
    }
    let mut scalar = 1.0;
    let mut usq = Vec::with_capacity(n);
    let mut conj = Vec::with_capacity(n);
    for (zi, li) in z.iter().zip(params.lambda()) {
        if !(zi.norm() < 1.0) {
            return Err(Error::Domain(format!("|z_i| = {} is not inside D", zi.norm())));
        }
        scalar *= (1.0 - zi.norm_sqr()).powf(-li / 2.0);
        usq.push(C64::new(zi.norm_sqr(), 0.0));
        conj.push(zi.conj());
    }
    let d = diagonal_matrix(&usq, params.family())?;
    let e = crate::matrix::nilpotent_exp(&params.shift_combination(&conj), params.nilpotency());
    Ok((d * e).scale(scalar))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::multiindex::MultiIndex;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn params_c1() -> KernelParams {
        KernelParams::with_unit_mu(MultiIndex::new(vec![2]), vec![2.0]).unwrap()
    }

    #[test]
    fn act_moves_the_base_point_to_zero() {
        let g = MobiusFactor::new(c(0.5, 0.0), 0.0).unwrap();
        assert!((g.act(c(0.5, 0.0))).norm() < 1e-15);
        let back = g.act_inverse(g.act(c(0.3, -0.2)));
        assert!((back - c(0.3, -0.2)).norm() < 1e-15);
    }

    #[test]
    fn derivative_power_examples() {
        let g = MobiusFactor::new(c(0.5, 0.0), 0.0).unwrap();
        let d1 = g.derivative_power(c(0.0, 0.0), 1.0).unwrap();
        assert!((d1 - c(0.75, 0.0)).norm() < 1e-15);
        let dh = g.derivative_power(c(0.0, 0.0), 0.5).unwrap();
        assert!((dh - c(0.75f64.sqrt(), 0.0)).norm() < 1e-15);
    }

    #[test]
    fn derivative_power_is_multiplicative_in_the_exponent() {
        let g = MobiusFactor::new(c(0.3, -0.4), 1.7).unwrap();
        let w = c(-0.2, 0.55);
        for (s1, s2) in [(0.5, 0.5), (1.3, -0.6), (2.5, 0.25)] {
            let prod =
                g.derivative_power(w, s1).unwrap() * g.derivative_power(w, s2).unwrap();
            let direct = g.derivative_power(w, s1 + s2).unwrap();
            assert!((prod - direct).norm() < 1e-14 * direct.norm().max(1.0));
        }
    }

    #[test]
    fn schwarz_constant_examples() {
        let id = MobiusFactor::identity();
        assert_eq!(id.schwarz_constant(), c(0.0, 0.0));

        let g = MobiusFactor::new(c(0.5, 0.0), 0.0).unwrap();
        let expect = -1.0 / 3.0_f64.sqrt();
        assert!((g.schwarz_constant() - c(expect, 0.0)).norm() < 1e-15);

        let g = MobiusFactor::new(c(0.0, 0.5), 0.0).unwrap();
        assert!((g.schwarz_constant() - c(0.0, 1.0 / 3.0_f64.sqrt())).norm() < 1e-15);
    }

    #[test]
    fn schwarz_constant_reproduces_the_second_derivative() {
        // g'' = −2 c_g (g')^{3/2}, with g'' computed from the closed form
        // of g' differentiated by hand: g''(w) = 2 ā e^{it} (1−|a|²)/(1−āw)³.
        let g = MobiusFactor::new(c(0.31, 0.42), -2.3).unwrap();
        let cg = g.schwarz_constant();
        for w in [c(0.0, 0.0), c(0.5, -0.3), c(-0.7, 0.1)] {
            let denom = ONE - g.a().conj() * w;
            let second = 2.0 * g.a().conj() * C64::from_polar(1.0, g.t())
                * (1.0 - g.a().norm_sqr())
                / (denom * denom * denom);
            let rhs = -2.0 * cg * g.derivative_power(w, 1.5).unwrap();
            assert!((second - rhs).norm() < 1e-13 * second.norm().max(1.0));
        }
    }

    #[test]
    fn composition_with_identity_is_exact() {
        let g = MobiusFactor::new(c(0.4, 0.1), 2.0).unwrap();
        let id = MobiusFactor::identity();
        let left = compose_factors(&id, &g, 16).unwrap();
        assert!((left.a() - g.a()).norm() < 1e-15);
        assert!((left.t() - g.t()).abs() < 1e-15);
        let right = compose_factors(&g, &id, 64).unwrap();
        assert!((right.a() - g.a()).norm() < 1e-12);
        assert!((right.t() - g.t()).abs() < 1e-12);
    }

    #[test]
    fn composition_satisfies_the_chain_rule_for_derivative_powers() {
        let g1 = MobiusFactor::new(c(0.4, -0.2), 4.0).unwrap();
        let g2 = MobiusFactor::new(c(-0.1, 0.6), -3.5).unwrap();
        let h = compose_factors(&g1, &g2, 256).unwrap();
        for w in [c(0.0, 0.0), c(0.3, 0.3), c(-0.5, 0.2)] {
            assert!((h.act(w) - g1.act(g2.act(w))).norm() < 1e-13);
            for s in [0.5, 1.0, 1.37, 3.0] {
                let lhs = h.derivative_power(w, s).unwrap();
                let rhs = g2.derivative_power(w, s).unwrap()
                    * g1.derivative_power(g2.act(w), s).unwrap();
                assert!(
                    (lhs - rhs).norm() < 1e-12 * rhs.norm().max(1.0),
                    "s = {s}, w = {w}"
                );
            }
        }
    }

    #[test]
    fn coarse_continuation_is_rejected_and_retry_succeeds() {
        let g1 = MobiusFactor::new(c(0.0, 0.0), 30.0).unwrap();
        let id = MobiusFactor::identity();
        assert!(matches!(
            compose_factors(&g1, &id, 8),
            Err(Error::Continuation(_))
        ));
        let h = compose_factors(&g1, &id, 64).unwrap();
        assert!((h.t() - 30.0).abs() < 1e-12);
        assert!(matches!(
            compose_factors(&g1, &id, 4),
            Err(Error::InvalidParams(_))
        ));
    }

    #[test]
    fn cocycle_at_the_identity_is_the_identity_matrix() {
        let p = params_c1();
        let j = cocycle_eval(&MobiusTuple::identity(1), &[c(0.2, 0.1)], &p).unwrap();
        assert!((j - crate::matrix::cidentity(3)).norm() < 1e-15);
    }

    #[test]
    fn cocycle_entries_frozen_for_the_scalar_member() {
        let p = params_c1();
        let g = MobiusTuple::new(vec![MobiusFactor::new(c(0.5, 0.0), 0.0).unwrap()]).unwrap();
        let j = cocycle_eval(&g, &[c(0.5, 0.0)], &p).unwrap();
        // row θ=1, column η=0 and the (1,1) diagonal
        assert!((j[(1, 0)] - c(8.0 / 9.0, 0.0)).norm() < 1e-14);
        assert!((j[(1, 1)] - c(16.0 / 9.0, 0.0)).norm() < 1e-14);
        // upper part vanishes
        assert_eq!(j[(0, 1)], c(0.0, 0.0));
        assert_eq!(j[(0, 2)], c(0.0, 0.0));
    }

    #[test]
    fn factored_multiplier_matches_the_entrywise_formula() {
        let p = params_c1();
        let z = [c(0.5, 0.0)];
        let factored = cocycle_factored(&z, &p).unwrap();
        let direct = cocycle_eval(&MobiusTuple::centered_at(&z).unwrap(), &z, &p).unwrap();
        assert!(crate::matrix::rel_residual(&factored, &direct) < 1e-14);
        // frozen diagonal (1−|z|²)^{−λ/2−θ} at z = 1/2
        for (k, expect) in [(0usize, 4.0 / 3.0), (1, 16.0 / 9.0), (2, 64.0 / 27.0)] {
            assert!((factored[(k, k)] - c(expect, 0.0)).norm() < 1e-14);
        }
        assert!((factored[(1, 0)] - c(8.0 / 9.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn factored_multiplier_at_zero_is_the_identity() {
        let p = params_c1();
        let j = cocycle_factored(&[c(0.0, 0.0)], &p).unwrap();
        assert!((j - crate::matrix::cidentity(3)).norm() < 1e-15);
    }
}
