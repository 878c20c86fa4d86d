//! Matrix-valued quasi-invariant reproducing kernels on the unit polydisc.
//!
//! The crate constructs a family of positive-definite `r x r` kernel
//! matrices on `D^n`, indexed by a truncation multi-index `α`, a positive
//! weight tuple `λ`, and per-member coefficients `μ`. Around that core it
//! provides:
//!
//! * the combinatorics of the truncated index family ([`multiindex`]),
//! * lifted disc automorphisms, their derivative powers on the universal
//!   cover, and the matrix multiplier they induce ([`mobius`]),
//! * kernel evaluation along two independent routes plus quadrature-based
//!   differentiation oracles ([`kernels`]),
//! * a truncated function-space model with the weighted-shift operators
//!   ([`hilbert`]),
//! * curvature invariants, boundedness witnesses, irreducibility
//!   certificates, and parameter classification ([`analysis`]).

pub mod analysis;
pub mod error;
pub mod hilbert;
pub mod kernels;
pub mod matrix;
pub mod mobius;
pub mod multiindex;
pub mod params;

pub use error::{Error, Result};
pub use matrix::{CMatrix, CVector, C64};
pub use multiindex::{index_family, IndexFamily, MultiIndex};
pub use params::KernelParams;

/// Crate version, echoed into verification reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
