//! Error types shared across the engine.

use thiserror::Error;

/// Everything that can go wrong while building or evaluating symbol expressions.
#[derive(Debug, Error)]
pub enum CalcError {
    /// An index letter occurred more than twice in a single term.
    #[error("index {0} occurs {1} times in one term; at most two occurrences (one contraction) are allowed")]
    IndexOveruse(String, usize),

    /// A contraction was requested between slots that do not exist.
    #[error("malformed contraction: {0}")]
    BadContraction(String),

    /// An operation that only makes sense in the commutative regime was
    /// attempted on Moyal-regime data, or vice versa.
    #[error("regime violation: {0}")]
    RegimeViolation(String),

    /// Angular averaging was requested above the supported momentum degree.
    #[error("angular moment of degree {0} exceeds the supported maximum of {1}")]
    AngularDegree(usize, usize),

    /// A radial kernel failed a structural precondition (wrong homogeneity,
    /// unexpected cut-off powers surviving, ...).
    #[error("radial reduction failed: {0}")]
    RadialStructure(String),

    /// The reference-scale bookkeeping did not cancel where it must.
    #[error("reference scale leaked into a scheme-independent quantity: {0}")]
    ScaleLeak(String),

    /// Spinor-trace machinery was handed an odd word or an unknown atom.
    #[error("gamma-algebra error: {0}")]
    GammaAlgebra(String),

    /// Exact linear algebra over the invariant basis failed a consistency check.
    #[error("reduction to canonical invariants failed: {0}")]
    ReductionFailure(String),

    /// A derivation pipeline produced something outside its published contract.
    #[error("derivation `{case}` failed: {detail}")]
    DerivationFailure { case: String, detail: String },

    /// Numeric grid data was malformed or sized inconsistently.
    #[error("grid data error: {0}")]
    GridData(String),

    /// I/O wrapper so pipelines can bubble file problems with context.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// Serialization wrapper for report emission.
    #[error("serialization error: {0}")]
    Serialize(#[from] serde_json::Error),
}

/// Convenient alias used throughout the crate.
pub type Result<T> = std::result::Result<T, CalcError>;
