//! Graded divergence profiles of cut-off regularized traces.
//!
//! A profile collects, per divergence grade
//!
//! ```text
//!   Lambda^a * (log Lambda)^b * (log L0)^c
//! ```
//!
//! the exact expression multiplying that grade.  Finite and vanishing
//! contributions are not tracked beyond a marker: cut-off finite parts are
//! scheme junk, while every divergent coefficient is exact.  The reference
//! scale may appear in intermediate entries (honest quadratic divergences of
//! individual pipeline stages do depend on it) but must cancel from any
//! physical assembly, which `assert_no_scale_leak` enforces.

use crate::error::{CalcError, Result};
use crate::expr::Expr;
use crate::term::Term;
use serde::Serialize;
use std::collections::BTreeMap;
use std::fmt;

/// One divergence grade.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct Grade {
    /// Power of the cut-off.
    pub lambda_pow: i32,
    /// Power of `log Lambda` (0 or 1 in every pipeline here).
    pub log_pow: u8,
    /// Power of `log L0` riding along with the entry.
    pub log0_pow: u8,
}

impl Grade {
    pub const LOG: Grade = Grade {
        lambda_pow: 0,
        log_pow: 1,
        log0_pow: 0,
    };

    /// True when the grade must be tracked: it diverges as the cut-off
    /// grows, or it is cut-off finite but scheme dependent (a bare
    /// reference-scale logarithm), which the leak assertions must see.
    pub fn is_divergent(&self) -> bool {
        self.lambda_pow > 0 || (self.lambda_pow == 0 && (self.log_pow > 0 || self.log0_pow > 0))
    }
}

impl fmt::Display for Grade {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        if self.lambda_pow != 0 {
            parts.push(format!("L^{}", self.lambda_pow));
        }
        if self.log_pow > 0 {
            parts.push(if self.log_pow == 1 {
                "logL".to_string()
            } else {
                format!("logL^{}", self.log_pow)
            });
        }
        if self.log0_pow > 0 {
            parts.push(format!("logL0^{}", self.log0_pow));
        }
        if parts.is_empty() {
            parts.push("1".to_string());
        }
        write!(f, "{}", parts.join("*"))
    }
}

/// Divergence profile: exact expressions per divergent grade plus a finite
/// residue marker.
#[derive(Clone, Debug, Default)]
pub struct DivergenceProfile {
    pub entries: BTreeMap<Grade, Expr>,
    /// Set when finite or vanishing contributions were dropped.
    pub finite_residue: bool,
}

impl DivergenceProfile {
    pub fn new() -> Self {
        DivergenceProfile::default()
    }

    /// Add a term at a grade.  Non-divergent grades only flip the residue
    /// marker.
    pub fn add(&mut self, grade: Grade, term: Term) {
        if !grade.is_divergent() {
            self.finite_residue = true;
            return;
        }
        self.entries
            .entry(grade)
            .or_insert_with(Expr::zero)
            .terms
            .push(term);
    }

    /// Merge another profile into this one.
    pub fn absorb(&mut self, other: DivergenceProfile) {
        for (g, e) in other.entries {
            self.entries
                .entry(g)
                .or_insert_with(Expr::zero)
                .terms
                .extend(e.terms);
        }
        self.finite_residue |= other.finite_residue;
    }

    /// Normalize every entry, dropping grades that cancel completely.
    pub fn normalized(&self) -> Result<DivergenceProfile> {
        let mut out = DivergenceProfile {
            entries: BTreeMap::new(),
            finite_residue: self.finite_residue,
        };
        for (g, e) in &self.entries {
            let n = e.normalized()?;
            if !n.terms.is_empty() {
                out.entries.insert(*g, n);
            }
        }
        Ok(out)
    }

    /// The coefficient of `log Lambda` (reference-scale free by definition
    /// of the grade).
    pub fn log_coefficient(&self) -> Result<Expr> {
        match self.entries.get(&Grade::LOG) {
            Some(e) => e.normalized(),
            None => Ok(Expr::zero()),
        }
    }

    /// Fail if any surviving divergent entry depends on the reference scale,
    /// either through an explicit `log L0` grade or through `L0` powers in
    /// coefficients.
    pub fn assert_no_scale_leak(&self) -> Result<()> {
        let n = self.normalized()?;
        for (g, e) in &n.entries {
            if g.log0_pow > 0 {
                return Err(CalcError::ScaleLeak(format!(
                    "grade {g} survives with coefficient {e}"
                )));
            }
            for t in &e.terms {
                if t.coeff.grading.l0_pow != 0 {
                    return Err(CalcError::ScaleLeak(format!(
                        "term {t} at grade {g} carries reference-scale powers"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Fail unless the given grade cancels exactly.
    pub fn assert_grade_cancels(&self, grade: Grade) -> Result<()> {
        if let Some(e) = self.entries.get(&grade) {
            if !e.is_zero()? {
                return Err(CalcError::RadialStructure(format!(
                    "grade {grade} expected to cancel, found {}",
                    e.normalized()?
                )));
            }
        }
        Ok(())
    }

    /// Scale every entry.
    pub fn scale(&self, c: &crate::coeff::Coefficient) -> DivergenceProfile {
        DivergenceProfile {
            entries: self
                .entries
                .iter()
                .map(|(g, e)| (*g, e.scale(c)))
                .collect(),
            finite_residue: self.finite_residue,
        }
    }
}

impl fmt::Display for DivergenceProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (g, e) in &self.entries {
            writeln!(f, "[{g}]  {e}")?;
        }
        if self.finite_residue {
            writeln!(f, "[finite]  (dropped)")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeff::Coefficient;

    #[test]
    fn finite_grades_only_mark() {
        let mut p = DivergenceProfile::new();
        p.add(
            Grade {
                lambda_pow: 0,
                log_pow: 0,
                log0_pow: 0,
            },
            Term::one(),
        );
        p.add(
            Grade {
                lambda_pow: -2,
                log_pow: 1,
                log0_pow: 0,
            },
            Term::one(),
        );
        assert!(p.entries.is_empty());
        assert!(p.finite_residue);
    }

    #[test]
    fn scale_leak_is_detected() {
        let mut p = DivergenceProfile::new();
        let mut t = Term::one();
        t.coeff = Coefficient::one().times_l0_pow(2);
        p.add(Grade::LOG, t);
        assert!(p.assert_no_scale_leak().is_err());

        let mut q = DivergenceProfile::new();
        q.add(
            Grade {
                lambda_pow: 2,
                log_pow: 0,
                log0_pow: 1,
            },
            Term::one(),
        );
        assert!(q.assert_no_scale_leak().is_err());
    }

    #[test]
    fn cancelling_entries_pass_assertions() {
        let mut p = DivergenceProfile::new();
        let t = Term::one();
        let mut minus = t.clone();
        minus.coeff = -minus.coeff;
        let g = Grade {
            lambda_pow: 2,
            log_pow: 1,
            log0_pow: 0,
        };
        p.add(g, t);
        p.add(g, minus);
        p.assert_grade_cancels(g).unwrap();
        assert!(p.normalized().unwrap().entries.is_empty());
    }
}
