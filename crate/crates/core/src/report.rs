//! Derivation reports: auditable records of end-to-end pipeline runs.
//!
//! A report pins down everything needed to replay or check a derivation:
//! the configuration, the ordered stage list with content digests on both
//! sides of every stage, the divergence profile kept by the radial
//! reduction, the canonical final form, the canonical target, and a strict
//! verdict — `pass` exactly when the two canonical forms coincide byte for
//! byte.  Serialization is deterministic: all maps are ordered, all numbers
//! are exact rationals rendered as text.

use crate::error::Result;
use crate::expr::Expr;
use crate::profile::DivergenceProfile;
use serde::Serialize;
use sha2::{Digest, Sha256};

/// An expression frozen into report form: canonical text plus its digest.
#[derive(Clone, Debug, Serialize)]
pub struct ExprRecord {
    pub terms: usize,
    pub text: String,
    pub digest: String,
}

impl ExprRecord {
    pub fn of(e: &Expr) -> Result<ExprRecord> {
        let n = e.normalized()?;
        Ok(ExprRecord {
            terms: n.len(),
            text: n.canonical_text()?,
            digest: n.digest()?,
        })
    }
}

/// One pipeline stage: what went in, what came out.
#[derive(Clone, Debug, Serialize)]
pub struct StageRecord {
    pub name: String,
    pub input_terms: usize,
    pub input_digest: String,
    pub output_terms: usize,
    pub output_digest: String,
}

impl StageRecord {
    pub fn new(name: &str, input: &Expr, output: &Expr) -> Result<StageRecord> {
        Ok(StageRecord {
            name: name.to_string(),
            input_terms: input.len(),
            input_digest: input.normalized()?.digest()?,
            output_terms: output.len(),
            output_digest: output.normalized()?.digest()?,
        })
    }

    /// A stage whose output is not a single expression (a profile, a table):
    /// the caller supplies the output digest and a size.
    pub fn with_output_digest(
        name: &str,
        input: &Expr,
        output_terms: usize,
        output_digest: String,
    ) -> Result<StageRecord> {
        Ok(StageRecord {
            name: name.to_string(),
            input_terms: input.len(),
            input_digest: input.normalized()?.digest()?,
            output_terms,
            output_digest,
        })
    }
}

/// One divergence grade of the profile, rendered exactly.
#[derive(Clone, Debug, Serialize)]
pub struct GradeRecord {
    pub grade: String,
    pub terms: usize,
    pub coefficient: String,
    pub digest: String,
}

/// The divergence profile in report form.
#[derive(Clone, Debug, Serialize)]
pub struct ProfileRecord {
    pub entries: Vec<GradeRecord>,
    pub finite_residue: bool,
}

impl ProfileRecord {
    pub fn of(profile: &DivergenceProfile) -> Result<ProfileRecord> {
        let n = profile.normalized()?;
        let mut entries = Vec::new();
        for (g, e) in &n.entries {
            entries.push(GradeRecord {
                grade: g.to_string(),
                terms: e.len(),
                coefficient: e.canonical_text()?,
                digest: e.digest()?,
            });
        }
        Ok(ProfileRecord {
            entries,
            finite_residue: n.finite_residue,
        })
    }

    /// Combined digest over every grade, usable as a stage output digest.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        for entry in &self.entries {
            h.update(entry.grade.as_bytes());
            h.update(b"=");
            h.update(entry.digest.as_bytes());
            h.update(b";");
        }
        h.update(if self.finite_residue { b"+" } else { b"." });
        format!("{:x}", h.finalize())
    }

    /// Total term count across all grades.
    pub fn terms(&self) -> usize {
        self.entries.iter().map(|e| e.terms).sum()
    }
}

/// Configuration snapshot stored with every report.
#[derive(Clone, Debug, Serialize)]
pub struct ConfigRecord {
    pub order: usize,
    pub theta_order: usize,
    pub heat_depth: usize,
    pub regime: String,
    pub convention: String,
}

/// The complete, serializable outcome of one derivation case.
#[derive(Clone, Debug, Serialize)]
pub struct DerivationReport {
    pub case: String,
    pub config: ConfigRecord,
    pub stages: Vec<StageRecord>,
    pub profile: ProfileRecord,
    #[serde(rename = "final")]
    pub final_form: ExprRecord,
    pub target: ExprRecord,
    pub verdict: String,
    pub notes: Vec<String>,
}

impl DerivationReport {
    /// True when the final canonical form equals the target exactly.
    pub fn passed(&self) -> bool {
        self.verdict == "pass"
    }

    /// Deterministic JSON rendering.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// The verdict string for a comparison outcome.
pub fn verdict(passed: bool) -> String {
    if passed { "pass" } else { "fail" }.to_string()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeff::Coefficient;
    use crate::profile::Grade;
    use crate::term::Term;

    #[test]
    fn profile_digest_tracks_content() {
        let mut p = DivergenceProfile::new();
        let mut t = Term::one();
        t.coeff = Coefficient::from_int(3);
        p.add(Grade::LOG, t);
        let a = ProfileRecord::of(&p).unwrap();

        let mut q = DivergenceProfile::new();
        let mut t = Term::one();
        t.coeff = Coefficient::from_int(4);
        q.add(Grade::LOG, t);
        let b = ProfileRecord::of(&q).unwrap();

        assert_ne!(a.digest(), b.digest());
        assert_eq!(a.digest(), ProfileRecord::of(&p).unwrap().digest());
    }

    #[test]
    fn report_serializes_with_stable_field_names() {
        let expr = Expr::from_term(Term::one());
        let report = DerivationReport {
            case: "probe".into(),
            config: ConfigRecord {
                order: 4,
                theta_order: 5,
                heat_depth: 4,
                regime: "commutative".into(),
                convention: "single-unit".into(),
            },
            stages: vec![StageRecord::new("identity", &expr, &expr).unwrap()],
            profile: ProfileRecord::of(&DivergenceProfile::new()).unwrap(),
            final_form: ExprRecord::of(&expr).unwrap(),
            target: ExprRecord::of(&expr).unwrap(),
            verdict: verdict(true),
            notes: vec!["probe note".into()],
        };
        let json = report.to_json().unwrap();
        for field in [
            "\"case\"",
            "\"config\"",
            "\"stages\"",
            "\"profile\"",
            "\"final\"",
            "\"target\"",
            "\"verdict\"",
            "\"notes\"",
        ] {
            assert!(json.contains(field), "missing {field} in {json}");
        }
        assert!(report.passed());
        assert_eq!(report.to_json().unwrap(), json);
    }
}
