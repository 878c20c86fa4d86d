//! Thin helpers over `nalgebra` dense complex matrices.
//!
//! Everything in the crate works with dynamically sized matrices over
//! `Complex<f64>`; the sizes involved are tiny (the member kernels of the
//! family are r x r with r rarely above a few dozen), so no effort is spent
//! on structure beyond what keeps the formulas readable.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub fn cidentity(r: usize) -> CMatrix {
    CMatrix::identity(r, r)
}

pub fn czeros(rows: usize, cols: usize) -> CMatrix {
    CMatrix::zeros(rows, cols)
}

/// Frobenius norm.
pub fn frob(m: &CMatrix) -> f64 {
    m.norm()
}

/// `‖a − b‖_F / max(‖a‖_F, ‖b‖_F)`, with 0/0 = 0.
pub fn rel_residual(a: &CMatrix, b: &CMatrix) -> f64 {
    let scale = frob(a).max(frob(b));
    if scale == 0.0 {
        return 0.0;
    }
    (a - b).norm() / scale
}

/// Hermitian part `(m + m*)/2`; the matrices we feed to eigensolvers are
/// Hermitian up to roundoff and this makes that exact.
pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

/// Eigenvalue range `(min, max)` of the Hermitian part of `m`.
pub fn hermitian_eigen_range(m: &CMatrix) -> (f64, f64) {
    let sym = hermitian_part(m);
    let eig = sym.symmetric_eigen();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in eig.eigenvalues.iter() {
        lo = lo.min(*v);
        hi = hi.max(*v);
    }
    (lo, hi)
}

/// Singular values of `m`, descending.
pub fn singular_values(m: &CMatrix) -> Vec<f64> {
    let svd = m.clone().svd(false, false);
    let mut sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
    sv
}

/// Diagonal matrix with entries `d_k^p` for a strictly positive diagonal.
pub fn diag_pow(d: &[f64], p: f64) -> CMatrix {
    let r = d.len();
    CMatrix::from_fn(r, r, |i, j| {
        if i == j {
            C64::new(d[i].powf(p), 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    })
}

/// `exp(m)` for a nilpotent `m`: the series is summed until a power of `m`
/// vanishes, and `max_pow` bounds the loop for safety.
pub fn nilpotent_exp(m: &CMatrix, max_pow: usize) -> CMatrix {
    let r = m.nrows();
    let mut sum = cidentity(r);
    let mut term = cidentity(r);
    for k in 1..=max_pow {
        term = (&term * m).unscale(k as f64);
        if term.iter().all(|c| c.norm_sqr() == 0.0) {
            break;
        }
        sum += &term;
    }
    sum
}
