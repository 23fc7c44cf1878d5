//! Reduction of contracted field words modulo trace and integral relations.
//!
//! The divergent coefficients the engine produces are rational combinations
//! of fully contracted words in the gauge potential (with at most one
//! central scalar insertion), read under a matrix trace and a position
//! integral.  Two such combinations are physically equal when they differ by
//! relations the trace-integral kills:
//!
//!   * total derivatives integrate to zero (integration by parts),
//!   * the trace is invariant under cyclic rotation of a word — in both
//!     product regimes, because the deformed product is tracial under the
//!     integral,
//!   * the regulator insertion is central in the pointwise regime and may
//!     hop past its neighbours there, and only there.
//!
//! Equality is decided by linear algebra rather than rewriting: the finite
//! monomial basis at each mass dimension is enumerated, the relation rows
//! are assembled per coefficient grading, and expressions are projected
//! along the row span by exact Gaussian elimination over the Gaussian
//! rationals, choosing pivots of smallest coefficient magnitude.  The
//! projection is linear and idempotent, so both "equal modulo relations"
//! and "proportional modulo relations" are decidable; the latter returns
//! the exact graded ratio.

use crate::atom::WordAtom;
use crate::coeff::{Coefficient, Grading};
use crate::compose::d_dx;
use crate::error::{CalcError, Result};
use crate::eval::evaluate_on_one;
use crate::expr::Expr;
use crate::index::{DerivSet, Index};
use crate::kernel::Kernel;
use crate::regime::{shift_normalize_under_integral, Regime};
use crate::term::{Term, TermKey};
use num::bigint::BigInt;
use num::Signed;
use std::collections::{BTreeMap, BTreeSet};

/// Largest word dimension the relation tables cover.
pub const MAX_WORD_DIMENSION: i64 = 4;

/// Reserved label for the free index of an integration-by-parts seed.
const FREE: Index = Index(60);

// --------------------------------------------------------------------------
// expansion to gauge-potential words
// --------------------------------------------------------------------------

/// Expand every covariant atom into partials and gauge insertions.
///
/// Field-strength atoms are rewritten first,
///
/// ```text
///   F_{ab} = d_a A_b - d_b A_a + i e (A_a A_b - A_b A_a),
/// ```
///
/// with applied derivatives distributed over the commutator by the Leibniz
/// rule and shift markers inherited from the strength atom.  Covariant
/// derivative words are then evaluated on the constant 1, which is exactly
/// how they enter trace integrands.  The result is normalized.
pub fn expand_covariant(e: &Expr, regime: Regime) -> Result<Expr> {
    let mut flat = Expr::zero();
    for term in &e.terms {
        flat.terms.extend(expand_strengths(term)?);
    }
    evaluate_on_one(&flat, regime)?.normalized()
}

/// Rewrite every strength atom of one term into gauge-potential words.
fn expand_strengths(term: &Term) -> Result<Vec<Term>> {
    let mut work = vec![term.clone()];
    let mut done = Vec::new();
    while let Some(t) = work.pop() {
        if t.word.iter().any(|a| matches!(a, WordAtom::SigmaF { .. })) {
            return Err(CalcError::GammaAlgebra(format!(
                "spin block must be traced out before covariant expansion: {t}"
            )));
        }
        let pos = t
            .word
            .iter()
            .position(|a| matches!(a, WordAtom::Strength { .. }));
        let Some(i) = pos else {
            done.push(t);
            continue;
        };
        let WordAtom::Strength {
            first,
            second,
            derivs,
            shifted,
        } = t.word[i].clone()
        else {
            unreachable!()
        };
        let gauge = |index: Index, derivs: DerivSet| WordAtom::Gauge {
            index,
            derivs,
            shifted,
        };

        let mut branches: Vec<(Coefficient, Vec<WordAtom>)> = Vec::new();
        let mut with_a = derivs.clone();
        with_a.push(first);
        branches.push((Coefficient::one(), vec![gauge(second, with_a)]));
        let mut with_b = derivs.clone();
        with_b.push(second);
        branches.push((-Coefficient::one(), vec![gauge(first, with_b)]));

        let ie = Coefficient::one().times_i_pow(1).times_e_pow(1);
        let ds: Vec<Index> = derivs.iter().collect();
        for mask in 0..(1u32 << ds.len()) {
            let mut left = DerivSet::empty();
            let mut right = DerivSet::empty();
            for (bit, &idx) in ds.iter().enumerate() {
                if mask & (1 << bit) != 0 {
                    left.push(idx);
                } else {
                    right.push(idx);
                }
            }
            branches.push((
                ie.clone(),
                vec![gauge(first, left.clone()), gauge(second, right.clone())],
            ));
            branches.push((-ie.clone(), vec![gauge(second, left), gauge(first, right)]));
        }

        for (c, atoms) in branches {
            let mut nt = t.clone();
            nt.coeff = nt.coeff.clone() * c;
            nt.word.splice(i..=i, atoms);
            work.push(nt);
        }
    }
    Ok(done)
}

/// First-order gauge variation of a strength-form expression.
///
/// Every strength atom varies into `ie` times its commutator with the
/// parameter atom, derivatives distributed by the Leibniz rule:
///
/// ```text
///   delta (d^D F) = i e  sum_{D1 + D2 = D} ( d^{D1}F d^{D2}chi
///                                          - d^{D1}chi d^{D2}F ).
/// ```
///
/// Words must consist of strength atoms only; anything else is rejected so
/// the variation is always taken at the strength level.
pub fn gauge_variation(e: &Expr) -> Result<Expr> {
    let mut out = Expr::zero();
    for t in &e.terms {
        for a in &t.word {
            if !matches!(a, WordAtom::Strength { .. }) {
                return Err(CalcError::BadContraction(format!(
                    "gauge variation expects strength-form words, found {a}"
                )));
            }
        }
        for i in 0..t.word.len() {
            let WordAtom::Strength {
                first,
                second,
                derivs,
                shifted,
            } = t.word[i].clone()
            else {
                unreachable!()
            };
            let ie = Coefficient::one().times_i_pow(1).times_e_pow(1);
            let ds: Vec<Index> = derivs.iter().collect();
            for mask in 0..(1u32 << ds.len()) {
                let mut on_f = DerivSet::empty();
                let mut on_chi = DerivSet::empty();
                for (bit, &idx) in ds.iter().enumerate() {
                    if mask & (1 << bit) != 0 {
                        on_chi.push(idx);
                    } else {
                        on_f.push(idx);
                    }
                }
                let f_atom = WordAtom::Strength {
                    first,
                    second,
                    derivs: on_f,
                    shifted,
                };
                let chi = WordAtom::GaugeParam {
                    derivs: on_chi,
                    shifted,
                };
                let mut plus = t.clone();
                plus.coeff = plus.coeff.clone() * ie.clone();
                plus.word.splice(i..=i, [f_atom.clone(), chi.clone()]);
                out.terms.push(plus);
                let mut minus = t.clone();
                minus.coeff = minus.coeff.clone() * -ie.clone();
                minus.word.splice(i..=i, [chi, f_atom]);
                out.terms.push(minus);
            }
        }
    }
    Ok(out)
}

/// Reorder each word as if all field atoms were commuting scalar functions.
///
/// Only meaningful on the pointwise product with a one-dimensional gauge
/// group; the deformed product admits no pointwise reordering and is
/// rejected.  Commutator pairs built from identical atom payloads cancel
/// after normalization.
pub fn abelianize(e: &Expr, regime: Regime) -> Result<Expr> {
    if regime == Regime::Moyal {
        return Err(CalcError::RegimeViolation(
            "the deformed product admits no pointwise reordering".into(),
        ));
    }
    let mut out = e.clone();
    for t in &mut out.terms {
        if t.word.iter().any(|a| a.is_operator()) {
            return Err(CalcError::BadContraction(
                "cannot reorder operator atoms; expand them first".into(),
            ));
        }
        t.word.sort();
    }
    Ok(out)
}

// --------------------------------------------------------------------------
// relation rows
// --------------------------------------------------------------------------

/// Scalar insertion a reducible word may carry besides gauge atoms.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum SectorScalar {
    None,
    Regulator,
    Parameter,
}

/// Classify a word's sector and reject anything outside the tables.
fn word_sector(word: &[WordAtom]) -> Result<SectorScalar> {
    let mut found = SectorScalar::None;
    for a in word {
        let kind = match a {
            WordAtom::Gauge { .. } => continue,
            WordAtom::Regulator { .. } => SectorScalar::Regulator,
            WordAtom::GaugeParam { .. } => SectorScalar::Parameter,
            other => {
                return Err(CalcError::ReductionFailure(format!(
                    "atom {other} is not reducible; expand covariant content first"
                )))
            }
        };
        if found != SectorScalar::None {
            return Err(CalcError::ReductionFailure(
                "words with several scalar insertions are outside the relation tables".into(),
            ));
        }
        found = kind;
    }
    Ok(found)
}

/// Check that a term is a pure, fully contracted position-space word of
/// bounded dimension, and return its sector.
fn validate_reducible(t: &Term) -> Result<SectorScalar> {
    if t.kernel != Kernel::ONE || t.has_log || !t.p_open.is_empty() || !t.etas.is_empty() {
        return Err(CalcError::ReductionFailure(format!(
            "only pure position-space words are reducible; momentum content survives in {t}"
        )));
    }
    let sector = word_sector(&t.word)?;
    let mut counts: BTreeMap<Index, usize> = BTreeMap::new();
    for a in &t.word {
        for i in a.indices() {
            *counts.entry(i).or_insert(0) += 1;
        }
    }
    if counts.values().any(|&c| c != 2) {
        return Err(CalcError::ReductionFailure(format!(
            "open index in a trace word: {t}"
        )));
    }
    let dim: i64 = t
        .word
        .iter()
        .map(|a| a.field_dimension().unwrap_or(0))
        .sum();
    if dim > MAX_WORD_DIMENSION {
        return Err(CalcError::ReductionFailure(format!(
            "word dimension {dim} above the supported bound {MAX_WORD_DIMENSION}"
        )));
    }
    Ok(sector)
}

/// Ordered word skeletons at `total_dim`: per atom `(is_scalar, derivative
/// count)`, with the scalar (when the sector has one) appearing exactly once.
fn skeletons(total_dim: i64, scalar: SectorScalar) -> Vec<Vec<(bool, usize)>> {
    fn recurse(
        remaining: i64,
        scalar_pending: bool,
        prefix: &mut Vec<(bool, usize)>,
        out: &mut Vec<Vec<(bool, usize)>>,
    ) {
        if remaining == 0 && !scalar_pending {
            if !prefix.is_empty() {
                out.push(prefix.clone());
            }
            return;
        }
        for d in 0..remaining {
            prefix.push((false, d as usize));
            recurse(remaining - 1 - d, scalar_pending, prefix, out);
            prefix.pop();
        }
        if scalar_pending {
            for d in 0..=remaining {
                prefix.push((true, d as usize));
                recurse(remaining - d, false, prefix, out);
                prefix.pop();
            }
        }
    }
    let mut out = Vec::new();
    let mut prefix = Vec::new();
    recurse(
        total_dim,
        scalar != SectorScalar::None,
        &mut prefix,
        &mut out,
    );
    out
}

/// All fully contracted labelings of a skeleton (plus one free slot when
/// `free`), canonicalized and deduplicated.
fn materialize(skeleton: &[(bool, usize)], scalar: SectorScalar, free: bool) -> Result<Vec<Term>> {
    let slots: usize = skeleton.iter().map(|&(s, d)| d + usize::from(!s)).sum();
    let free_choices: Vec<Option<usize>> = if free {
        (0..slots).map(Some).collect()
    } else {
        vec![None]
    };
    let mut reps: BTreeMap<TermKey, Term> = BTreeMap::new();
    for free_slot in free_choices {
        let rest: Vec<usize> = (0..slots).filter(|s| Some(*s) != free_slot).collect();
        if rest.len() % 2 != 0 {
            continue;
        }
        for pairing in crate::angular::pairings(rest.len()) {
            let mut label_of = vec![FREE; slots];
            for (li, &(x, y)) in pairing.iter().enumerate() {
                label_of[rest[x]] = Index(li as u32);
                label_of[rest[y]] = Index(li as u32);
            }
            let mut word = Vec::new();
            let mut cursor = 0usize;
            for &(is_scalar, d) in skeleton {
                let mut derivs = DerivSet::empty();
                for _ in 0..d {
                    derivs.push(label_of[cursor]);
                    cursor += 1;
                }
                if is_scalar {
                    word.push(match scalar {
                        SectorScalar::Regulator => WordAtom::Regulator {
                            derivs,
                            shifted: false,
                        },
                        SectorScalar::Parameter => WordAtom::GaugeParam {
                            derivs,
                            shifted: false,
                        },
                        SectorScalar::None => unreachable!("scalar slot without a scalar sector"),
                    });
                } else {
                    let own = label_of[cursor];
                    cursor += 1;
                    word.push(WordAtom::Gauge {
                        index: own,
                        derivs,
                        shifted: false,
                    });
                }
            }
            let t = Term::from_word(word).canonicalize()?;
            if t.is_zero() {
                continue;
            }
            reps.entry(t.merge_key()).or_insert(t);
        }
    }
    Ok(reps.into_values().collect())
}

/// Copy of a term with unit magnitude at the given grading.
fn graded_unit(t: &Term, grading: Grading) -> Term {
    let mut out = t.clone();
    out.coeff = Coefficient::one().with_grading(grading);
    out
}

/// All relation rows of one sector, instantiated at one grading.
fn sector_rows(scalar: SectorScalar, grading: Grading, regime: Regime) -> Result<Vec<Expr>> {
    let unit = Coefficient::one().with_grading(grading);
    let mut rows = Vec::new();
    for dim in 1..=MAX_WORD_DIMENSION {
        for skel in skeletons(dim, scalar) {
            for rep in materialize(&skel, scalar, false)? {
                let n = rep.word.len();
                let base = graded_unit(&rep, grading);
                for r in 1..n {
                    let mut rotated = base.clone();
                    rotated.word.rotate_left(r);
                    rotated.coeff = -rotated.coeff.clone();
                    rows.push(Expr {
                        terms: vec![base.clone(), rotated],
                    });
                }
                if scalar == SectorScalar::Regulator && regime == Regime::Commutative {
                    for i in 0..n.saturating_sub(1) {
                        let involves_scalar = matches!(rep.word[i], WordAtom::Regulator { .. })
                            || matches!(rep.word[i + 1], WordAtom::Regulator { .. });
                        if involves_scalar {
                            let mut swapped = base.clone();
                            swapped.word.swap(i, i + 1);
                            swapped.coeff = -swapped.coeff.clone();
                            rows.push(Expr {
                                terms: vec![base.clone(), swapped],
                            });
                        }
                    }
                }
            }
        }
        for skel in skeletons(dim - 1, scalar) {
            for seed in materialize(&skel, scalar, true)? {
                let row = Expr {
                    terms: d_dx(&seed, FREE),
                };
                rows.push(row.scale(&unit));
            }
        }
    }
    Ok(rows)
}

// --------------------------------------------------------------------------
// exact elimination
// --------------------------------------------------------------------------

type Vector = BTreeMap<TermKey, Coefficient>;

fn vector_of(e: &Expr) -> Result<Vector> {
    let n = e.normalized()?;
    Ok(n.terms.into_iter().map(|t| (t.merge_key(), t.coeff)).collect())
}

fn expr_of(v: Vector) -> Expr {
    Expr {
        terms: v
            .into_iter()
            .map(|(k, coeff)| Term {
                coeff,
                word: k.word,
                etas: k.etas,
                p_open: k.p_open,
                kernel: k.kernel,
                has_log: k.has_log,
            })
            .collect(),
    }
}

/// `target -= c * row`, dropping entries that cancel exactly.
fn subtract_scaled(target: &mut Vector, row: &Vector, c: &Coefficient) {
    for (k, rc) in row {
        let delta = -(c.clone() * rc.clone());
        let merged = match target.get(k) {
            Some(acc) => acc.checked_add(&delta),
            None => delta,
        };
        if merged.is_zero() {
            target.remove(k);
        } else {
            target.insert(k.clone(), merged);
        }
    }
}

/// Magnitude measure for pivot selection: total size of both rational parts.
fn coefficient_size(c: &Coefficient) -> BigInt {
    c.re.numer().abs() + c.re.denom().abs() + c.im.numer().abs() + c.im.denom().abs()
}

/// Coordinates of an expression after projection along a relation span.
#[derive(Clone, Debug)]
pub struct CanonicalForm {
    /// Residual expression on non-pivot monomial coordinates.
    pub residual: Expr,
}

impl CanonicalForm {
    /// True when the expression lies inside the relation span.
    pub fn is_zero(&self) -> bool {
        self.residual.is_empty()
    }
}

/// An eliminated relation span.
///
/// Rows are stored in reduced echelon form, keyed by pivot coordinate and
/// mutually back-substituted, so projecting a vector is a single pass.  Row
/// coefficients are normalized to unit pivots; their gradings are relative
/// to the pivot's, which keeps every stored vector grading-consistent per
/// coordinate.
pub struct ReductionSpace {
    rows: Vec<(TermKey, Vector)>,
}

impl ReductionSpace {
    /// Eliminate a list of relation rows; dependent rows drop out.
    pub fn from_rows(rows: Vec<Expr>) -> Result<ReductionSpace> {
        let mut space = ReductionSpace { rows: Vec::new() };
        for r in rows {
            let v = vector_of(&r)?;
            space.insert(v);
        }
        Ok(space)
    }

    /// Number of independent relations.
    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    fn eliminate(&self, v: &mut Vector) {
        for (pivot, row) in &self.rows {
            if let Some(c) = v.get(pivot).cloned() {
                subtract_scaled(v, row, &c);
            }
        }
    }

    fn insert(&mut self, mut v: Vector) {
        self.eliminate(&mut v);
        if v.is_empty() {
            return;
        }
        let pivot = v
            .iter()
            .min_by(|(ka, ca), (kb, cb)| {
                coefficient_size(ca)
                    .cmp(&coefficient_size(cb))
                    .then(ka.cmp(kb))
            })
            .map(|(k, _)| k.clone())
            .expect("non-empty vector has a pivot");
        let inv = v[&pivot].invert();
        let normalized: Vector = v.into_iter().map(|(k, c)| (k, c * inv.clone())).collect();
        for (_, row) in &mut self.rows {
            if let Some(c) = row.get(&pivot).cloned() {
                subtract_scaled(row, &normalized, &c);
            }
        }
        self.rows.push((pivot, normalized));
    }

    /// Project an expression along the span.  The residual is zero exactly
    /// when the expression is a combination of relations.
    pub fn reduce(&self, e: &Expr) -> Result<CanonicalForm> {
        let mut v = vector_of(e)?;
        self.eliminate(&mut v);
        Ok(CanonicalForm {
            residual: expr_of(v).normalized()?,
        })
    }
}

// --------------------------------------------------------------------------
// public reduction interface
// --------------------------------------------------------------------------

/// Assemble the relation span covering every sector and grading occurring
/// in `e`.  Shift markers are stripped first: reduction always happens
/// under the trace integral, where the common translation drops out.
pub fn relation_space_for(e: &Expr, regime: Regime) -> Result<ReductionSpace> {
    let n = shift_normalize_under_integral(&e.normalized()?)?.normalized()?;
    let mut tags: BTreeSet<(SectorScalar, Grading)> = BTreeSet::new();
    for t in &n.terms {
        let sector = validate_reducible(t)?;
        tags.insert((sector, t.coeff.grading));
    }
    let mut rows = Vec::new();
    for (sector, grading) in tags {
        rows.extend(sector_rows(sector, grading, regime)?);
    }
    ReductionSpace::from_rows(rows)
}

/// Project `e` along the relations valid for its own sectors and gradings.
pub fn reduce_mod_relations(e: &Expr, regime: Regime) -> Result<CanonicalForm> {
    let stripped = shift_normalize_under_integral(&e.normalized()?)?;
    let space = relation_space_for(&stripped, regime)?;
    space.reduce(&stripped)
}

/// True when `a` and `b` agree modulo the relations.
pub fn equals_mod_relations(a: &Expr, b: &Expr, regime: Regime) -> Result<bool> {
    Ok(reduce_mod_relations(&a.add(&b.neg()), regime)?.is_zero())
}

/// Exact graded ratio `lambda` with `e = lambda * target` modulo relations.
///
/// Both expressions are reduced in one shared span; the ratio is read off a
/// matching coordinate and then verified across the whole residual, so a
/// non-proportional pair is an error, never a silent approximation.
pub fn reduce_against(e: &Expr, target: &Expr, regime: Regime) -> Result<Coefficient> {
    let se = shift_normalize_under_integral(&e.normalized()?)?;
    let st = shift_normalize_under_integral(&target.normalized()?)?;
    let space = relation_space_for(&se.add(&st), regime)?;
    let re = space.reduce(&se)?.residual;
    let rt = space.reduce(&st)?.residual;
    if rt.is_empty() {
        return Err(CalcError::ReductionFailure(
            "proportionality target reduces to zero".into(),
        ));
    }
    if re.is_empty() {
        return Ok(Coefficient::zero());
    }
    let probe = &rt.terms[0];
    let hit = re
        .terms
        .iter()
        .find(|t| same_structure(t, probe))
        .ok_or_else(|| {
            CalcError::ReductionFailure(format!("no counterpart for coordinate {probe}"))
        })?;
    let lambda = hit.coeff.clone() * probe.coeff.invert();
    if rt.scale(&lambda).normalized()? != re {
        return Err(CalcError::ReductionFailure(
            "residuals are not proportional".into(),
        ));
    }
    Ok(lambda)
}

/// Everything identifying a coordinate except its coefficient.
fn same_structure(a: &Term, b: &Term) -> bool {
    a.word == b.word
        && a.etas == b.etas
        && a.p_open == b.p_open
        && a.kernel == b.kernel
        && a.has_log == b.has_log
}

/// Membership in the span of cyclic-rotation rows alone, built from the
/// expression's own words.  Valid in both regimes.
pub fn vanishes_by_cyclicity(e: &Expr) -> Result<bool> {
    let n = shift_normalize_under_integral(&e.normalized()?)?.normalized()?;
    let mut rows = Vec::new();
    for t in &n.terms {
        let base = graded_unit(t, t.coeff.grading);
        for r in 1..t.word.len() {
            let mut rotated = base.clone();
            rotated.word.rotate_left(r);
            rotated.coeff = -rotated.coeff.clone();
            rows.push(Expr {
                terms: vec![base.clone(), rotated],
            });
        }
    }
    let space = ReductionSpace::from_rows(rows)?;
    Ok(space.reduce(&n)?.is_zero())
}
