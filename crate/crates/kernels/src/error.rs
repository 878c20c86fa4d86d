//! Error type shared by every module of the crate.

/// Failure modes surfaced by the library.
///
/// The variants split into three broad groups: caller mistakes
/// (`DimensionMismatch`, `InvalidParams`, `Domain`), numerical-geometry
/// guards (`Geometry`, `Singularity`, `Continuation`), and searches that can
/// legitimately come up empty (`WitnessSearch`, `NoWitness`, `Incomparable`).
#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("point outside the open unit polydisc: {0}")]
    Domain(String),

    #[error("singular diagonal entry: {0}")]
    Singularity(String),

    #[error("quadrature circle leaves the polydisc: {0}")]
    Geometry(String),

    #[error("winding continuation too coarse: {0}")]
    Continuation(String),

    #[error("witness search failed: {0}")]
    WitnessSearch(String),

    #[error("no witness exists: {0}")]
    NoWitness(String),

    #[error("incomparable parameter tuples: {0}")]
    Incomparable(String),
}

pub type Result<T> = std::result::Result<T, Error>;
