//! Exact symbolic engine for one-loop divergence coefficients of gauge
//! backgrounds on flat four-space and its constant-deformation counterpart.
//!
//! The crate computes cut-off regularized traces of pseudodifferential
//! operators by composing their symbols exactly: terms are ordered words of
//! matrix-valued atoms with rational kernels in the loop momentum, angular
//! averages are evaluated combinatorially, radial integrals reduce to exact
//! binomial data, and everything divergent is collected into graded
//! divergence profiles whose reference-scale independence is asserted, not
//! assumed.

pub mod angular;
pub mod atom;
pub mod coeff;
pub mod compose;
pub mod derive;
pub mod error;
pub mod eval;
pub mod expr;
pub mod gamma;
pub mod heat;
pub mod index;
pub mod kernel;
pub mod profile;
pub mod radial;
pub mod reduce;
pub mod report;
pub mod regime;
pub mod term;

pub use atom::WordAtom;
pub use coeff::{Coefficient, Grading};
pub use derive::{run_case, DerivationCase, DeriveConfig};
pub use error::{CalcError, Result};
pub use expr::Expr;
pub use index::{DerivSet, Index, IndexAllocator, DIM};
pub use kernel::Kernel;
pub use profile::{DivergenceProfile, Grade};
pub use radial::LogUnitConvention;
pub use regime::Regime;
pub use report::DerivationReport;
pub use term::Term;
