//! Product regimes and shift-marker normalization.
//!
//! The engine runs identically on the pointwise product and on the deformed
//! (star) product.  Symbols of star-multiplication operators are ordinary
//! functions evaluated at the translated point `x - (1/2) Theta p`; the
//! translation is recorded per field atom as a boolean shift marker rather
//! than expanded, because the star product is translation covariant:
//! shifting both factors shifts their star product by the same amount.
//! Under the trace integral over position the common translation drops out,
//! which is exactly when markers may be removed.

use crate::error::{CalcError, Result};
use crate::expr::Expr;
use serde::{Deserialize, Serialize};
use std::fmt;

/// Which product the derivation runs on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    /// Ordinary pointwise product on flat four-space.
    Commutative,
    /// Deformed product with constant antisymmetric deformation matrix.
    Moyal,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Regime::Commutative => write!(f, "commutative"),
            Regime::Moyal => write!(f, "moyal"),
        }
    }
}

/// Remove shift markers from terms sitting under the position integral.
///
/// Every field atom of a term must carry the marker (the common translation
/// by `-(1/2) Theta p`); a term mixing marked and unmarked atoms cannot have
/// come from a well-formed operator symbol and is rejected.  Terms without
/// field atoms pass through unchanged.
pub fn shift_normalize_under_integral(expr: &Expr) -> Result<Expr> {
    let mut out = Expr::zero();
    for t in &expr.terms {
        let flags: Vec<bool> = t.word.iter().filter_map(|a| a.shifted()).collect();
        if flags.is_empty() {
            out.terms.push(t.clone());
            continue;
        }
        if flags.iter().any(|&s| s) && !flags.iter().all(|&s| s) {
            return Err(CalcError::RegimeViolation(format!(
                "term mixes shifted and unshifted field atoms: {t}"
            )));
        }
        let mut stripped = t.clone();
        for atom in &mut stripped.word {
            if atom.shifted() == Some(true) {
                *atom = atom.with_shift(false);
            }
        }
        out.terms.push(stripped);
    }
    Ok(out)
}

/// Assert that no atom carries a shift marker (commutative-regime data).
pub fn assert_unshifted(expr: &Expr) -> Result<()> {
    for t in &expr.terms {
        for a in &t.word {
            if a.shifted() == Some(true) {
                return Err(CalcError::RegimeViolation(format!(
                    "shift marker in commutative-regime data: {t}"
                )));
            }
        }
    }
    Ok(())
}
