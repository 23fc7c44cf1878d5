//! Evaluation of operator words on the constant function 1.
//!
//! Symbol recursions produce words mixing operator atoms (`Box`, `D`, open
//! partials) with field atoms.  Evaluating such a word on 1 means expanding
//! every covariant operator into partials and gauge-potential insertions and
//! then pushing partials to the right by the Leibniz rule until each either
//! lands on a field atom or annihilates against the constant.
//!
//! ```text
//!   D_a   = d_a + i e A_a
//!   Box   = D^a D_a
//!   d_a ( X_1 X_2 ... X_k ) = (d_a X_1) X_2 ... + ... + X_1 ... (d_a X_k)
//!   d_a 1 = 0
//! ```

use crate::atom::WordAtom;
use crate::coeff::Coefficient;
use crate::error::{CalcError, Result};
use crate::expr::Expr;
use crate::index::IndexAllocator;
use crate::regime::Regime;
use crate::term::Term;

/// Rewrite `Box` and `D` atoms into open partials and gauge insertions.
///
/// In the deformed regime the gauge potential inside a covariant operator is
/// evaluated at the translated point, so freshly created `Gauge` atoms carry
/// the shift marker there.
pub fn expand_operators(expr: &Expr, regime: Regime) -> Expr {
    let shifted = matches!(regime, Regime::Moyal);
    let mut out = Expr::zero();
    for term in &expr.terms {
        let mut alloc = IndexAllocator::above(term.max_label().unwrap_or(0));
        // Working stack: (scalar multiplier, partially rewritten word).
        let mut work: Vec<(Coefficient, Vec<WordAtom>)> =
            vec![(Coefficient::one(), term.word.clone())];
        let mut done: Vec<(Coefficient, Vec<WordAtom>)> = Vec::new();
        while let Some((c, word)) = work.pop() {
            // Find the first still-covariant atom.
            let pos = word
                .iter()
                .position(|a| matches!(a, WordAtom::CovD(_) | WordAtom::BoxOp));
            match pos {
                None => done.push((c, word)),
                Some(i) => match &word[i] {
                    WordAtom::CovD(idx) => {
                        let idx = *idx;
                        let mut w1 = word.clone();
                        w1[i] = WordAtom::Partial(idx);
                        work.push((c.clone(), w1));
                        let mut w2 = word.clone();
                        w2[i] = WordAtom::Gauge {
                            index: idx,
                            derivs: crate::index::DerivSet::empty(),
                            shifted,
                        };
                        work.push((c.times_i_pow(1).times_e_pow(1), w2));
                    }
                    WordAtom::BoxOp => {
                        let a = alloc.fresh();
                        let mut w = word.clone();
                        w.splice(i..=i, [WordAtom::CovD(a), WordAtom::CovD(a)]);
                        work.push((c, w));
                    }
                    _ => unreachable!(),
                },
            }
        }
        for (c, word) in done {
            let mut t = term.clone();
            t.coeff = t.coeff.clone() * c;
            t.word = word;
            out.terms.push(t);
        }
    }
    out
}

/// Push all open partials onto field atoms by the Leibniz rule, evaluating
/// the word on the constant 1.  The input must already be free of covariant
/// atoms; `evaluate_on_one` handles the combined job.
fn apply_partials(term: &Term) -> Result<Vec<Term>> {
    for a in &term.word {
        if matches!(a, WordAtom::CovD(_) | WordAtom::BoxOp) {
            return Err(CalcError::BadContraction(format!(
                "covariant atom survived expansion in {term}"
            )));
        }
    }
    // Process right to left; the state is a list of pure field words.
    let mut state: Vec<Vec<WordAtom>> = vec![Vec::new()];
    for atom in term.word.iter().rev() {
        match atom {
            WordAtom::Partial(idx) => {
                let mut next = Vec::new();
                for w in &state {
                    for k in 0..w.len() {
                        let mut branched = w.clone();
                        branched[k] = branched[k].apply_derivative(*idx);
                        next.push(branched);
                    }
                    // Empty word: the partial hits 1 and the branch dies.
                }
                state = next;
            }
            field => {
                for w in &mut state {
                    w.insert(0, field.clone());
                }
            }
        }
    }
    Ok(state
        .into_iter()
        .map(|w| {
            let mut t = term.clone();
            t.word = w;
            t
        })
        .collect())
}

/// Expand covariant operators and evaluate every word on 1.
pub fn evaluate_on_one(expr: &Expr, regime: Regime) -> Result<Expr> {
    let expanded = expand_operators(expr, regime);
    let mut out = Expr::zero();
    for t in &expanded.terms {
        out.terms.extend(apply_partials(t)?);
    }
    Ok(out)
}

/// The operator word `(Box + 2 i p.D)` as an expression, used by both the
/// resolvent and the sharp-cut-off recursions.
pub fn box_plus_two_ip_d(alloc: &mut IndexAllocator) -> Expr {
    let mut e = Expr::zero();
    e.terms.push(Term::from_word(vec![WordAtom::BoxOp]));
    let a = alloc.fresh();
    let mut t = Term::from_word(vec![WordAtom::CovD(a)]);
    t.p_open = vec![a];
    t.coeff = Coefficient::from_int(2).times_i_pow(1);
    e.terms.push(t);
    e
}

/// `(Box + 2 i p.D)^n` evaluated on 1, normalized.
pub fn box_word_power(n: usize, regime: Regime) -> Result<Expr> {
    let mut alloc = IndexAllocator::above(1000);
    let mut acc = Expr::from_term(Term::one());
    for _ in 0..n {
        let factor = box_plus_two_ip_d(&mut alloc);
        acc = factor.mul(&acc);
    }
    evaluate_on_one(&acc, regime)?.normalized()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::index::Index;
    use num::bigint::BigInt;
    use num::rational::BigRational;
    use num::{One, Zero};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeMap;

    // ---- exact oracle: 2x2 matrices of complex-rational polynomials ----
    //
    // The oracle never uses the Leibniz rule: covariant operators are
    // applied as honest matrix differential operators on exact polynomial
    // data, so any bookkeeping error in the engine's expansion or
    // derivative pushing shows up as a numeric mismatch.

    type Rat = BigRational;

    #[derive(Clone, Debug, PartialEq)]
    struct CP {
        re: Rat,
        im: Rat,
    }

    impl CP {
        fn zero() -> Self {
            CP {
                re: Rat::zero(),
                im: Rat::zero(),
            }
        }
        fn is_zero(&self) -> bool {
            self.re.is_zero() && self.im.is_zero()
        }
        fn add(&self, o: &CP) -> CP {
            CP {
                re: &self.re + &o.re,
                im: &self.im + &o.im,
            }
        }
        fn mul(&self, o: &CP) -> CP {
            CP {
                re: &self.re * &o.re - &self.im * &o.im,
                im: &self.re * &o.im + &self.im * &o.re,
            }
        }
        fn scale(&self, r: &Rat) -> CP {
            CP {
                re: &self.re * r,
                im: &self.im * r,
            }
        }
    }

    type Poly = BTreeMap<[u8; 4], CP>;

    fn p_add(a: &Poly, b: &Poly) -> Poly {
        let mut out = a.clone();
        for (k, v) in b {
            let e = out.entry(*k).or_insert_with(CP::zero);
            *e = e.add(v);
        }
        out.retain(|_, v| !v.is_zero());
        out
    }

    fn p_mul(a: &Poly, b: &Poly) -> Poly {
        let mut out = Poly::new();
        for (ka, va) in a {
            for (kb, vb) in b {
                let mut k = *ka;
                for i in 0..4 {
                    k[i] += kb[i];
                }
                let e = out.entry(k).or_insert_with(CP::zero);
                *e = e.add(&va.mul(vb));
            }
        }
        out.retain(|_, v| !v.is_zero());
        out
    }

    fn p_deriv(a: &Poly, axis: usize) -> Poly {
        let mut out = Poly::new();
        for (k, v) in a {
            if k[axis] == 0 {
                continue;
            }
            let mut kk = *k;
            kk[axis] -= 1;
            let c = v.scale(&Rat::from_integer(BigInt::from(k[axis])));
            let e = out.entry(kk).or_insert_with(CP::zero);
            *e = e.add(&c);
        }
        out
    }

    const N: usize = 2;
    type PM = Vec<Vec<Poly>>;

    fn pm_zero() -> PM {
        vec![vec![Poly::new(); N]; N]
    }

    fn pm_id() -> PM {
        let mut m = pm_zero();
        for (i, row) in m.iter_mut().enumerate() {
            row[i].insert(
                [0, 0, 0, 0],
                CP {
                    re: Rat::one(),
                    im: Rat::zero(),
                },
            );
        }
        m
    }

    fn pm_add(a: &PM, b: &PM) -> PM {
        (0..N)
            .map(|i| (0..N).map(|j| p_add(&a[i][j], &b[i][j])).collect())
            .collect()
    }

    fn pm_mul(a: &PM, b: &PM) -> PM {
        (0..N)
            .map(|i| {
                (0..N)
                    .map(|j| {
                        let mut acc = Poly::new();
                        for (k, a_ik) in a[i].iter().enumerate() {
                            acc = p_add(&acc, &p_mul(a_ik, &b[k][j]));
                        }
                        acc
                    })
                    .collect()
            })
            .collect()
    }

    fn pm_scale(a: &PM, c: &CP) -> PM {
        let one = Poly::from([([0u8, 0, 0, 0], c.clone())]);
        (0..N)
            .map(|i| (0..N).map(|j| p_mul(&a[i][j], &one)).collect())
            .collect()
    }

    fn pm_deriv(a: &PM, axis: usize) -> PM {
        (0..N)
            .map(|i| (0..N).map(|j| p_deriv(&a[i][j], axis)).collect())
            .collect()
    }

    /// Random polynomial matrix with small rational coefficients.
    fn random_pm(rng: &mut ChaCha8Rng, max_deg: u8) -> PM {
        let mut m = pm_zero();
        for row in &mut m {
            for entry in row {
                for _ in 0..4 {
                    let k = [
                        rng.gen_range(0..=max_deg),
                        rng.gen_range(0..=max_deg),
                        rng.gen_range(0..=max_deg),
                        rng.gen_range(0..=max_deg),
                    ];
                    let c = CP {
                        re: Rat::new(BigInt::from(rng.gen_range(-4i64..=4)), BigInt::from(3)),
                        im: Rat::new(BigInt::from(rng.gen_range(-4i64..=4)), BigInt::from(2)),
                    };
                    let e = entry.entry(k).or_insert_with(CP::zero);
                    *e = e.add(&c);
                }
            }
        }
        m
    }

    /// Scalar complex-rational matrix: a polynomial matrix evaluated at the
    /// probe point.
    type SM = Vec<Vec<CP>>;

    fn eval_poly(p: &Poly, x: &[Rat; 4]) -> CP {
        let mut acc = CP::zero();
        for (k, v) in p {
            let mut mono = Rat::one();
            for (axis, &e) in k.iter().enumerate() {
                for _ in 0..e {
                    mono *= &x[axis];
                }
            }
            acc = acc.add(&v.scale(&mono));
        }
        acc
    }

    fn eval_pm(m: &PM, x: &[Rat; 4]) -> SM {
        m.iter()
            .map(|row| row.iter().map(|p| eval_poly(p, x)).collect())
            .collect()
    }

    fn sm_zero() -> SM {
        vec![vec![CP::zero(); N]; N]
    }

    fn sm_add(a: &SM, b: &SM) -> SM {
        (0..N)
            .map(|i| (0..N).map(|j| a[i][j].add(&b[i][j])).collect())
            .collect()
    }

    fn sm_mul(a: &SM, b: &SM) -> SM {
        (0..N)
            .map(|i| {
                (0..N)
                    .map(|j| {
                        let mut acc = CP::zero();
                        for k in 0..N {
                            acc = acc.add(&a[i][k].mul(&b[k][j]));
                        }
                        acc
                    })
                    .collect()
            })
            .collect()
    }

    fn sm_scale(a: &SM, c: &CP) -> SM {
        (0..N)
            .map(|i| (0..N).map(|j| a[i][j].mul(c)).collect())
            .collect()
    }

    struct Model {
        gauge: [PM; 4],
        coupling: Rat,
        momentum: [Rat; 4],
        point: [Rat; 4],
        /// Cache of derivative matrices evaluated at the probe point,
        /// keyed by (gauge axis, sorted derivative axes).
        deriv_cache: std::cell::RefCell<BTreeMap<(usize, Vec<usize>), SM>>,
    }

    impl Model {
        fn random(seed: u64) -> Model {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let gauge = [
                random_pm(&mut rng, 2),
                random_pm(&mut rng, 2),
                random_pm(&mut rng, 2),
                random_pm(&mut rng, 2),
            ];
            let momentum = [
                Rat::new(BigInt::from(1), BigInt::from(2)),
                Rat::new(BigInt::from(-2), BigInt::from(3)),
                Rat::new(BigInt::from(3), BigInt::from(5)),
                Rat::new(BigInt::from(-1), BigInt::from(7)),
            ];
            let point = [
                Rat::new(BigInt::from(2), BigInt::from(3)),
                Rat::new(BigInt::from(-1), BigInt::from(2)),
                Rat::new(BigInt::from(1), BigInt::from(5)),
                Rat::new(BigInt::from(3), BigInt::from(7)),
            ];
            Model {
                gauge,
                coupling: Rat::new(BigInt::from(3), BigInt::from(2)),
                momentum,
                point,
                deriv_cache: std::cell::RefCell::new(BTreeMap::new()),
            }
        }

        /// True covariant derivative as an operator on polynomial matrices.
        fn cov_d(&self, axis: usize, g: &PM) -> PM {
            let ie = CP {
                re: Rat::zero(),
                im: self.coupling.clone(),
            };
            pm_add(&pm_deriv(g, axis), &pm_scale(&pm_mul(&self.gauge[axis], g), &ie))
        }

        fn box_op(&self, g: &PM) -> PM {
            let mut acc = pm_zero();
            for a in 0..4 {
                acc = pm_add(&acc, &self.cov_d(a, &self.cov_d(a, g)));
            }
            acc
        }

        /// `(Box + 2 i p.D) g`, exactly.
        fn box_plus_two_ip_d(&self, g: &PM) -> PM {
            let mut acc = self.box_op(g);
            for a in 0..4 {
                let two_i_p = CP {
                    re: Rat::zero(),
                    im: Rat::from_integer(BigInt::from(2)) * &self.momentum[a],
                };
                acc = pm_add(&acc, &pm_scale(&self.cov_d(a, g), &two_i_p));
            }
            acc
        }

        fn gauge_deriv_at_point(&self, axis: usize, derivs: Vec<usize>) -> SM {
            let key = (axis, derivs);
            if let Some(hit) = self.deriv_cache.borrow().get(&key) {
                return hit.clone();
            }
            let mut g = self.gauge[axis].clone();
            for &d in &key.1 {
                g = pm_deriv(&g, d);
            }
            let sm = eval_pm(&g, &self.point);
            self.deriv_cache.borrow_mut().insert(key.clone(), sm.clone());
            sm
        }

        /// Evaluate one engine output term under the model assignment.
        fn assign_term(&self, t: &Term) -> SM {
            assert_eq!(t.kernel, crate::kernel::Kernel::ONE);
            assert!(!t.has_log && t.etas.is_empty());
            let mut m: Option<SM> = None;
            for atom in &t.word {
                let sm = match atom {
                    WordAtom::Gauge { index, derivs, shifted } => {
                        assert!(!shifted);
                        let mut ds: Vec<usize> =
                            derivs.iter().map(|d| d.0 as usize % 4).collect();
                        ds.sort();
                        self.gauge_deriv_at_point(index.0 as usize % 4, ds)
                    }
                    other => panic!("unexpected atom in evaluated word: {other}"),
                };
                m = Some(match m {
                    None => sm,
                    Some(acc) => sm_mul(&acc, &sm),
                });
            }
            let mut m = m.unwrap_or_else(|| eval_pm(&pm_id(), &self.point));
            // Coefficient: (re + i im) * coupling^e_pow, momentum contractions.
            let g = t.coeff.grading;
            assert_eq!(g.m2_pow, 0);
            assert_eq!(g.pi_inv2_pow, 0);
            assert_eq!(g.l0_pow, 0);
            assert!(g.e_pow >= 0);
            let mut scalar = CP {
                re: t.coeff.re.clone(),
                im: t.coeff.im.clone(),
            };
            for _ in 0..g.e_pow {
                scalar = scalar.scale(&self.coupling);
            }
            for idx in &t.p_open {
                scalar = scalar.scale(&self.momentum[idx.0 as usize % 4]);
            }
            m = sm_scale(&m, &scalar);
            m
        }
    }

    /// Engine vs oracle for (Box + 2 i p.D)^n 1.  Index labels in the engine
    /// output are reduced mod 4 by the assignment, so the word is built over
    /// labels 0..3 with contractions mapped faithfully by construction: the
    /// engine's fresh labels are congruent to distinct axes only through the
    /// contraction sum, which the assignment reproduces by summing over the
    /// bound pair's shared axis.
    fn check_power(n: usize, seed: u64) {
        // The mod-4 reduction of labels is only faithful if every bound pair
        // sums over its axis.  Expand bound contractions explicitly: each
        // bound label with two slots ranges over axes 0..3.  To keep the
        // oracle simple we instead expand the engine output over all axis
        // assignments of its bound labels.
        let model = Model::random(seed);
        let engine = box_word_power(n, Regime::Commutative).unwrap();

        // Expand each engine term over axis assignments of its bound labels.
        let mut engine_total = sm_zero();
        for t in &engine.terms {
            let mut counts: BTreeMap<Index, usize> = BTreeMap::new();
            for a in &t.word {
                for i in a.indices() {
                    *counts.entry(i).or_insert(0) += 1;
                }
            }
            for &i in &t.p_open {
                *counts.entry(i).or_insert(0) += 1;
            }
            let bound: Vec<Index> = counts
                .iter()
                .filter(|&(_, &c)| c == 2)
                .map(|(&i, _)| i)
                .collect();
            assert!(counts.values().all(|&c| c <= 2));
            let k = bound.len();
            let mut assignment = vec![0usize; k];
            loop {
                // Relabel bound index j to axis assignment[j]; the
                // assign_term mod-4 lookup then reads the intended axis.
                let map: BTreeMap<Index, Index> = bound
                    .iter()
                    .zip(&assignment)
                    .map(|(&b, &ax)| (b, Index(ax as u32)))
                    .collect();
                // Free labels must already be < 4 to denote real axes.
                let relabeled = t.relabel(&|i| *map.get(&i).unwrap_or(&i));
                engine_total = sm_add(&engine_total, &model.assign_term(&relabeled));
                // Advance the odometer.
                let mut j = 0;
                loop {
                    if j == k {
                        break;
                    }
                    assignment[j] += 1;
                    if assignment[j] < 4 {
                        break;
                    }
                    assignment[j] = 0;
                    j += 1;
                }
                if j == k {
                    break;
                }
            }
        }

        let mut oracle = pm_id();
        for _ in 0..n {
            oracle = model.box_plus_two_ip_d(&oracle);
        }
        let oracle_at_point = eval_pm(&oracle, &model.point);
        assert_eq!(engine_total, oracle_at_point, "mismatch at power {n}");
    }

    #[test]
    fn power_one_matches_exact_operator_oracle() {
        check_power(1, 11);
    }

    #[test]
    fn power_two_matches_exact_operator_oracle() {
        check_power(2, 12);
    }

    #[test]
    fn power_three_matches_exact_operator_oracle() {
        check_power(3, 13);
    }

    #[test]
    fn partial_on_constant_annihilates() {
        let t = Term::from_word(vec![WordAtom::Partial(Index(0))]);
        let e = evaluate_on_one(&Expr::from_term(t), Regime::Commutative).unwrap();
        assert!(e.is_zero().unwrap());
    }

    #[test]
    fn box_on_one_gives_divergence_and_square_terms() {
        // Box 1 = i e (d.A) + (ie)^2 A.A  (the pure d^2 part dies on 1).
        let t = Term::from_word(vec![WordAtom::BoxOp]);
        let out = evaluate_on_one(&Expr::from_term(t), Regime::Commutative)
            .unwrap()
            .normalized()
            .unwrap();
        assert_eq!(out.terms.len(), 2);
        let words: Vec<usize> = out.terms.iter().map(|t| t.word.len()).collect();
        assert!(words.contains(&1) && words.contains(&2));
    }

    #[test]
    fn moyal_expansion_marks_created_atoms() {
        let t = Term::from_word(vec![WordAtom::BoxOp]);
        let out = evaluate_on_one(&Expr::from_term(t), Regime::Moyal).unwrap();
        for term in &out.terms {
            for a in &term.word {
                assert_eq!(a.shifted(), Some(true));
            }
        }
    }
}
