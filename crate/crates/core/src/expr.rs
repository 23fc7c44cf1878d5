//! Sums of terms with normalization, arithmetic, and stable digests.

use crate::coeff::Coefficient;
use crate::error::Result;
use crate::term::{Term, TermKey};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fmt;

/// A finite sum of terms.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Expr {
    pub terms: Vec<Term>,
}

impl Expr {
    /// The empty sum.
    pub fn zero() -> Self {
        Expr { terms: Vec::new() }
    }

    /// A single-term expression.
    pub fn from_term(t: Term) -> Self {
        Expr { terms: vec![t] }
    }

    /// True when no terms survive normalization.
    pub fn is_zero(&self) -> Result<bool> {
        Ok(self.normalized()?.terms.is_empty())
    }

    /// Canonicalize every term, split mixed kernels over the partial
    /// fraction basis, and merge equal keys; zero terms are dropped and the
    /// survivors sorted, so equal expressions compare equal.
    pub fn normalized(&self) -> Result<Expr> {
        let mut merged: BTreeMap<TermKey, Coefficient> = BTreeMap::new();
        for t in &self.terms {
            let c = t.canonicalize()?;
            if c.is_zero() {
                continue;
            }
            for (m2, r, kernel) in c.kernel.partial_fraction() {
                let mut piece = c.clone();
                piece.coeff = piece.coeff.scale(&r).times_m2_pow(m2);
                piece.kernel = kernel;
                let key = piece.merge_key();
                match merged.get_mut(&key) {
                    Some(acc) => *acc = acc.checked_add(&piece.coeff),
                    None => {
                        merged.insert(key, piece.coeff);
                    }
                }
            }
        }
        let terms = merged
            .into_iter()
            .filter(|(_, c)| !c.is_zero())
            .map(|(k, coeff)| Term {
                coeff,
                word: k.word,
                etas: k.etas,
                p_open: k.p_open,
                kernel: k.kernel,
                has_log: k.has_log,
            })
            .collect();
        Ok(Expr { terms })
    }

    /// Sum of two expressions (not normalized).
    pub fn add(&self, other: &Expr) -> Expr {
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        Expr { terms }
    }

    /// Negation.
    pub fn neg(&self) -> Expr {
        Expr {
            terms: self
                .terms
                .iter()
                .map(|t| {
                    let mut t = t.clone();
                    t.coeff = -t.coeff;
                    t
                })
                .collect(),
        }
    }

    /// Multiply every term's coefficient.
    pub fn scale(&self, c: &Coefficient) -> Expr {
        Expr {
            terms: self
                .terms
                .iter()
                .map(|t| {
                    let mut t = t.clone();
                    t.coeff = t.coeff.clone() * c.clone();
                    t
                })
                .collect(),
        }
    }

    /// Non-commutative distributive product (not normalized).
    pub fn mul(&self, other: &Expr) -> Expr {
        let mut terms = Vec::with_capacity(self.terms.len() * other.terms.len());
        for a in &self.terms {
            for b in &other.terms {
                terms.push(a.mul(b));
            }
        }
        Expr { terms }
    }

    /// Number of terms as stored.
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    /// True when the stored list is empty (zero before normalization too).
    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Stable text rendering of the normalized expression, one term per line.
    pub fn canonical_text(&self) -> Result<String> {
        let n = self.normalized()?;
        if n.terms.is_empty() {
            return Ok("0".to_string());
        }
        Ok(n.terms
            .iter()
            .map(|t| t.to_string())
            .collect::<Vec<_>>()
            .join("\n"))
    }

    /// SHA-256 of the canonical text, as lowercase hex.  Stable across runs
    /// and platforms; used to chain derivation stages in reports.
    pub fn digest(&self) -> Result<String> {
        let text = self.canonical_text()?;
        let mut h = Sha256::new();
        h.update(text.as_bytes());
        let bytes = h.finalize();
        let mut out = String::with_capacity(64);
        for b in bytes {
            out.push_str(&format!("{b:02x}"));
        }
        Ok(out)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, t) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, "  +  ")?;
            }
            write!(f, "{t}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::atom::WordAtom;
    use crate::index::Index;

    #[test]
    fn opposite_terms_cancel() {
        let t = Term::from_word(vec![WordAtom::BoxOp, WordAtom::BoxOp]);
        let mut minus = t.clone();
        minus.coeff = -minus.coeff;
        let e = Expr { terms: vec![t, minus] };
        assert!(e.is_zero().unwrap());
    }

    #[test]
    fn equal_terms_merge_with_summed_coefficients() {
        let mk = |a: u32, b: u32| {
            Term::from_word(vec![
                WordAtom::CovD(Index(a)),
                WordAtom::CovD(Index(b)),
                WordAtom::CovD(Index(a)),
                WordAtom::CovD(Index(b)),
            ])
        };
        let e = Expr {
            terms: vec![mk(0, 1), mk(5, 8)],
        };
        let n = e.normalized().unwrap();
        assert_eq!(n.terms.len(), 1);
        assert_eq!(n.terms[0].coeff, Coefficient::from_int(2));
    }

    #[test]
    fn digest_is_labeling_independent() {
        let mk = |a: u32, b: u32| {
            Expr::from_term(Term::from_word(vec![
                WordAtom::CovD(Index(a)),
                WordAtom::BoxOp,
                WordAtom::CovD(Index(a)),
                WordAtom::gauge(Index(b)),
                WordAtom::gauge(Index(b)),
            ]))
        };
        assert_eq!(mk(2, 7).digest().unwrap(), mk(9, 1).digest().unwrap());
        assert_ne!(mk(2, 7).digest().unwrap(), Expr::zero().digest().unwrap());
    }

    #[test]
    fn zero_digest_is_stable() {
        // Hash of the literal "0"; pinned so report chains stay comparable.
        assert_eq!(
            Expr::zero().digest().unwrap(),
            "5feceb66ffc86f38d952786c6d696c79c2dbc239dd4e91b46729d73a27fb57e9"
        );
    }

    #[test]
    fn grading_separates_terms() {
        let t1 = Term::one();
        let mut t2 = Term::one();
        t2.coeff = Coefficient::one().times_m2_pow(1);
        let e = Expr {
            terms: vec![t1, t2],
        };
        assert_eq!(e.normalized().unwrap().terms.len(), 2);
    }
}
