//! Terms: coefficient, word, contractions, momentum content, kernel.
//!
//! A term represents
//!
//! ```text
//!   coeff * word[0] word[1] ... * eta^{ab} ... * p_open[0] p_open[1] ...
//!         * (p^2)^a / (p^2+m^2)^N * [log((p^2+m^2)/L0^2)]
//! ```
//!
//! Index labels occurring twice are contracted; once, free.  The word is
//! ordered and never reordered: atoms are matrix valued and the engine makes
//! no commutativity assumption in any product regime.
//!
//! `canonicalize` brings a term to a unique normal form so that equal terms
//! compare equal byte-for-byte:
//!  1. momentum self-contractions fold into the kernel,
//!  2. metric factors contract eagerly onto their partners,
//!  3. antisymmetry of the field strength fixes slot orientation (or kills
//!     the term),
//!  4. bound labels are renamed canonically via occurrence signatures.
//!
//! Renaming soundness: a bound label's signature is the multiset of its slot
//! descriptors, and every descriptor is either a unique slot (which at most
//! one label can occupy) or a multiset home (derivative sets, the open
//! momentum list).  Labels with equal signatures therefore occupy only
//! multiset homes and are literally interchangeable, so sorting by signature
//! yields a normal form independent of the input labeling.

use crate::atom::WordAtom;
use crate::coeff::Coefficient;
use crate::error::{CalcError, Result};
use crate::index::{Index, DIM};
use crate::kernel::Kernel;
use std::collections::BTreeMap;
use std::fmt;

/// Where one occurrence of an index label lives.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Slot {
    /// Inside the derivative multiset of word atom `pos`.
    Deriv { pos: usize },
    /// The `k`-th own index slot of word atom `pos`.
    Own { pos: usize, k: usize },
    /// In the open momentum list.
    Momentum,
    /// In a surviving free-free metric factor.
    Metric,
}

/// A single summand.
#[derive(Clone, Debug, PartialEq)]
pub struct Term {
    pub coeff: Coefficient,
    pub word: Vec<WordAtom>,
    /// Explicit metric factors between otherwise-free labels.
    pub etas: Vec<(Index, Index)>,
    /// Open momentum factors `p_a` (kept sorted in canonical form).
    pub p_open: Vec<Index>,
    pub kernel: Kernel,
    /// Marks an undifferentiated factor `log((p^2+m^2)/L0^2)`.
    pub has_log: bool,
}

impl Term {
    /// The multiplicative unit.
    pub fn one() -> Self {
        Term {
            coeff: Coefficient::one(),
            word: Vec::new(),
            etas: Vec::new(),
            p_open: Vec::new(),
            kernel: Kernel::ONE,
            has_log: false,
        }
    }

    /// A bare word with unit coefficient.
    pub fn from_word(word: Vec<WordAtom>) -> Self {
        Term {
            word,
            ..Term::one()
        }
    }

    /// True when the numeric coefficient vanishes.
    pub fn is_zero(&self) -> bool {
        self.coeff.is_zero()
    }

    /// Largest index label value mentioned anywhere, if any.
    pub fn max_label(&self) -> Option<u32> {
        self.all_labels().into_iter().map(|i| i.0).max()
    }

    fn all_labels(&self) -> Vec<Index> {
        let mut v: Vec<Index> = Vec::new();
        for a in &self.word {
            v.extend(a.indices());
        }
        v.extend(self.p_open.iter().copied());
        for &(a, b) in &self.etas {
            v.push(a);
            v.push(b);
        }
        v
    }

    /// Occurrence count per label.
    fn occurrences(&self) -> BTreeMap<Index, usize> {
        let mut m = BTreeMap::new();
        for l in self.all_labels() {
            *m.entry(l).or_insert(0) += 1;
        }
        m
    }

    /// Apply a label map everywhere.
    pub fn relabel(&self, map: &impl Fn(Index) -> Index) -> Term {
        Term {
            coeff: self.coeff.clone(),
            word: self.word.iter().map(|a| a.relabel(map)).collect(),
            etas: self.etas.iter().map(|&(a, b)| (map(a), map(b))).collect(),
            p_open: self.p_open.iter().map(|&i| map(i)).collect(),
            kernel: self.kernel,
            has_log: self.has_log,
        }
    }

    /// Rename every *bound* label to a fresh value at or above `floor`,
    /// leaving free labels untouched.  Used before term multiplication to
    /// avoid accidental capture.
    pub fn uplift_bound(&self, floor: u32) -> Term {
        let occ = self.occurrences();
        let mut next = floor;
        let mut map: BTreeMap<Index, Index> = BTreeMap::new();
        for (&l, &n) in &occ {
            if n >= 2 {
                map.insert(l, Index(next));
                next += 1;
            }
        }
        self.relabel(&|i| *map.get(&i).unwrap_or(&i))
    }

    /// Non-commutative product: concatenates words, merges momentum content
    /// and kernels.  The right factor's bound labels are lifted clear of the
    /// left factor's labels first; free labels shared between the factors
    /// become cross-contractions, which is the caller's intent when labels
    /// are shared deliberately.
    pub fn mul(&self, rhs: &Term) -> Term {
        let floor = self.max_label().map_or(0, |m| m + 1);
        let floor = floor.max(rhs.max_label().map_or(0, |m| m + 1));
        assert!(
            !(self.has_log && rhs.has_log),
            "products with two logarithm factors are outside the kernel space"
        );
        let r = rhs.uplift_bound(floor);
        let mut word = self.word.clone();
        word.extend(r.word.iter().cloned());
        let mut etas = self.etas.clone();
        etas.extend(r.etas.iter().copied());
        let mut p_open = self.p_open.clone();
        p_open.extend(r.p_open.iter().copied());
        Term {
            coeff: self.coeff.clone() * r.coeff.clone(),
            word,
            etas,
            p_open,
            kernel: self.kernel.mul(r.kernel),
            has_log: self.has_log || r.has_log,
        }
    }

    /// Slot descriptors for every occurrence of every label, in a fixed
    /// traversal order.
    fn slots(&self) -> Vec<(Index, Slot)> {
        let mut out = Vec::new();
        for (pos, atom) in self.word.iter().enumerate() {
            if let Some(ds) = atom.derivs() {
                for idx in ds.iter() {
                    out.push((idx, Slot::Deriv { pos }));
                }
            }
            match atom {
                WordAtom::Partial(i) | WordAtom::CovD(i) => {
                    out.push((*i, Slot::Own { pos, k: 0 }));
                }
                WordAtom::Gauge { index, .. } => {
                    out.push((*index, Slot::Own { pos, k: 0 }));
                }
                WordAtom::Strength { first, second, .. } => {
                    out.push((*first, Slot::Own { pos, k: 0 }));
                    out.push((*second, Slot::Own { pos, k: 1 }));
                }
                _ => {}
            }
        }
        for &i in &self.p_open {
            out.push((i, Slot::Momentum));
        }
        for &(a, b) in &self.etas {
            out.push((a, Slot::Metric));
            out.push((b, Slot::Metric));
        }
        out
    }

    /// Fold repeated labels in the momentum list into `p^2` powers.
    fn fold_momentum_squares(&mut self) {
        let mut counts: BTreeMap<Index, usize> = BTreeMap::new();
        for &i in &self.p_open {
            *counts.entry(i).or_insert(0) += 1;
        }
        let mut kept = Vec::new();
        for (&i, &n) in &counts {
            match n {
                1 => kept.push(i),
                2 => self.kernel.u_pow += 1,
                _ => unreachable!("occurrence validation admits at most two"),
            }
        }
        kept.sort();
        self.p_open = kept;
    }

    /// Contract metric factors whose endpoints are bound elsewhere, and fold
    /// self-contracted metrics into the dimension factor.
    fn contract_etas(&mut self) {
        loop {
            let mut progress = false;
            let mut i = 0;
            while i < self.etas.len() {
                let (a, b) = self.etas[i];
                if a == b {
                    // eta^{aa} = dim
                    self.coeff = self.coeff.scale(&num::BigRational::from_integer(
                        num::BigInt::from(DIM),
                    ));
                    self.etas.remove(i);
                    progress = true;
                    continue;
                }
                // Count occurrences of a and b outside this metric factor.
                let outside = |label: Index, skip: usize| -> usize {
                    let mut n = 0;
                    for atom in &self.word {
                        n += atom.indices().iter().filter(|&&x| x == label).count();
                    }
                    n += self.p_open.iter().filter(|&&x| x == label).count();
                    for (j, &(x, y)) in self.etas.iter().enumerate() {
                        if j == skip {
                            continue;
                        }
                        n += usize::from(x == label) + usize::from(y == label);
                    }
                    n
                };
                if outside(b, i) > 0 {
                    // eta^{ab} X_b  ->  X_a
                    self.etas.remove(i);
                    let sub = |x: Index| if x == b { a } else { x };
                    *self = self.relabel(&sub);
                    progress = true;
                    continue;
                }
                if outside(a, i) > 0 {
                    self.etas.remove(i);
                    let sub = |x: Index| if x == a { b } else { x };
                    *self = self.relabel(&sub);
                    progress = true;
                    continue;
                }
                i += 1;
            }
            if !progress {
                break;
            }
        }
        for pair in &mut self.etas {
            if pair.0 > pair.1 {
                *pair = (pair.1, pair.0);
            }
        }
        self.etas.sort();
    }

    /// Canonical relabeling of bound labels for a fixed strength orientation.
    /// Returns the relabeled term.
    fn relabel_canonically(&self) -> Term {
        let occ = self.occurrences();
        let free: Vec<Index> = occ
            .iter()
            .filter(|&(_, &n)| n == 1)
            .map(|(&l, _)| l)
            .collect();
        let bound: Vec<Index> = occ
            .iter()
            .filter(|&(_, &n)| n >= 2)
            .map(|(&l, _)| l)
            .collect();

        // Signature of each bound label: sorted multiset of its slots.
        let slots = self.slots();
        let mut sig: BTreeMap<Index, Vec<Slot>> = BTreeMap::new();
        for (l, s) in slots {
            if bound.contains(&l) {
                sig.entry(l).or_default().push(s);
            }
        }
        for v in sig.values_mut() {
            v.sort();
        }

        let mut order: Vec<Index> = bound.clone();
        order.sort_by(|a, b| sig[a].cmp(&sig[b]).then(a.cmp(b)));

        // Hand out the smallest labels not used by free indices.
        let mut fresh = Vec::new();
        let mut candidate = 0u32;
        while fresh.len() < order.len() {
            if !free.contains(&Index(candidate)) {
                fresh.push(Index(candidate));
            }
            candidate += 1;
        }
        let map: BTreeMap<Index, Index> =
            order.iter().copied().zip(fresh.into_iter()).collect();
        let mut out = self.relabel(&|i| *map.get(&i).unwrap_or(&i));
        out.p_open.sort();
        out.etas.sort();
        out
    }

    /// A total encoding of everything except the numeric coefficient value.
    /// Canonically equal terms produce equal keys.
    pub fn merge_key(&self) -> TermKey {
        TermKey {
            word: self.word.clone(),
            etas: self.etas.clone(),
            p_open: self.p_open.clone(),
            kernel: self.kernel,
            has_log: self.has_log,
            grading: self.coeff.grading,
        }
    }

    /// Bring the term to its unique normal form.
    pub fn canonicalize(&self) -> Result<Term> {
        // Validate occurrence counts first.
        for (l, n) in self.occurrences() {
            if n > 2 {
                return Err(CalcError::IndexOveruse(l.to_string(), n));
            }
        }
        let mut t = self.clone();
        t.fold_momentum_squares();
        t.contract_etas();
        t.fold_momentum_squares();

        // Antisymmetry: equal slots kill the strength.
        for atom in &t.word {
            if let WordAtom::Strength { first, second, .. } = atom {
                if first == second {
                    t.coeff = Coefficient::zero();
                    t.word.clear();
                    t.etas.clear();
                    t.p_open.clear();
                    t.kernel = Kernel::ONE;
                    t.has_log = false;
                    return Ok(t);
                }
            }
        }

        // Enumerate strength orientations; pick the minimal encoding.
        let f_positions: Vec<usize> = t
            .word
            .iter()
            .enumerate()
            .filter(|(_, a)| matches!(a, WordAtom::Strength { .. }))
            .map(|(i, _)| i)
            .collect();
        let n_f = f_positions.len();
        assert!(n_f <= 16, "unreasonably many strength atoms in one term");

        let mut best: Option<(TermKey, i32, Term)> = None;
        let mut degenerate = false;
        for mask in 0..(1u32 << n_f) {
            let mut variant = t.clone();
            let mut sign = 1i32;
            for (bit, &pos) in f_positions.iter().enumerate() {
                if mask & (1 << bit) != 0 {
                    if let WordAtom::Strength { first, second, .. } = &mut variant.word[pos] {
                        std::mem::swap(first, second);
                        sign = -sign;
                    }
                }
            }
            let relabeled = variant.relabel_canonically();
            let key = relabeled.merge_key();
            match &best {
                None => best = Some((key, sign, relabeled)),
                Some((bk, bs, _)) => {
                    if key < *bk {
                        degenerate = false;
                        best = Some((key, sign, relabeled));
                    } else if key == *bk && sign != *bs {
                        degenerate = true;
                    }
                }
            }
        }
        let (_, sign, mut out) = best.expect("orientation enumeration is non-empty");
        if degenerate {
            // The same normal form arises with both signs: the term vanishes
            // by antisymmetry.
            out.coeff = Coefficient::zero();
            return Ok(out);
        }
        if sign < 0 {
            out.coeff = -out.coeff;
        }
        Ok(out)
    }
}

/// Everything that identifies a canonical term apart from its numeric value.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct TermKey {
    pub word: Vec<WordAtom>,
    pub etas: Vec<(Index, Index)>,
    pub p_open: Vec<Index>,
    pub kernel: Kernel,
    pub has_log: bool,
    pub grading: crate::coeff::Grading,
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.coeff)?;
        for (a, b) in &self.etas {
            write!(f, " eta[{a},{b}]")?;
        }
        for i in &self.p_open {
            write!(f, " p[{i}]")?;
        }
        if self.kernel != Kernel::ONE {
            write!(f, " {}", self.kernel)?;
        }
        if self.has_log {
            write!(f, " log((u+m2)/L0^2)")?;
        }
        for a in &self.word {
            write!(f, " {a}")?;
        }
        Ok(())
    }
}
