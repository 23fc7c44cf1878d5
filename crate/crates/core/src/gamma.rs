//! Spin-space traces for the squared Dirac operator.
//!
//! The fermionic pipeline works with words over the same atoms as the
//! bosonic one plus the spin coupling `sigma.F = (1/2) sigma_ab F_ab`,
//! `sigma_ab = (1/2)[gamma_a, gamma_b]`, kept opaque until the spin trace.
//! This module eliminates spin space exactly: every `sigma.F` atom is
//! replaced by a field-strength atom with a fresh index pair, and the trace
//! of the accompanying product of `sigma` matrices is expanded into metric
//! contractions through the classical recursion
//!
//! ```text
//!   tr(gamma_{a1} ... gamma_{an}) = sum_{j=2}^n (-1)^j delta_{a1 aj}
//!                                   tr(gamma ... without a1, aj),
//! ```
//!
//! `tr(1) = 4`, odd strings vanishing.  Everything stays rational; the
//! explicit Euclidean representation in the test oracle never enters the
//! engine path.

use crate::error::Result;
use crate::expr::Expr;
use crate::index::{Index, IndexAllocator};
use crate::atom::WordAtom;
use num::bigint::BigInt;
use num::rational::BigRational;

/// Trace over spin space.
///
/// Words free of `sigma.F` are proportional to the spin identity and pick up
/// a factor 4.  Each `sigma.F` occurrence contributes its definition factor
/// `1/2`, a strength atom with a fresh summed index pair, and membership in
/// the ordered `sigma` product whose trace becomes metric contractions.
pub fn spin_trace(expr: &Expr) -> Result<Expr> {
    let four = BigRational::from_integer(BigInt::from(4));
    let half = BigRational::new(BigInt::from(1), BigInt::from(2));
    let mut out = Expr::zero();
    for term in &expr.terms {
        let positions: Vec<usize> = term
            .word
            .iter()
            .enumerate()
            .filter_map(|(i, a)| matches!(a, WordAtom::SigmaF { .. }).then_some(i))
            .collect();
        if positions.is_empty() {
            let mut t = term.clone();
            t.coeff = t.coeff.scale(&four);
            out.terms.push(t);
            continue;
        }
        let mut alloc = IndexAllocator::above(term.max_label().unwrap_or(0));
        let mut word = term.word.clone();
        let mut pairs = Vec::new();
        for &pos in &positions {
            let first = alloc.fresh();
            let second = alloc.fresh();
            let (derivs, shifted) = match &word[pos] {
                WordAtom::SigmaF { derivs, shifted } => (derivs.clone(), *shifted),
                _ => unreachable!(),
            };
            word[pos] = WordAtom::Strength {
                first,
                second,
                derivs,
                shifted,
            };
            pairs.push((first, second));
        }
        let mut base = term.clone();
        base.word = word;
        for _ in &positions {
            base.coeff = base.coeff.scale(&half);
        }
        for (weight, etas) in sigma_product_trace(&pairs) {
            let mut t = base.clone();
            t.coeff = t.coeff.scale(&weight);
            t.etas.extend(etas);
            out.terms.push(t);
        }
    }
    Ok(out)
}

/// Trace of an ordered product `sigma_{a1 b1} ... sigma_{ak bk}` as a sum of
/// weighted metric pairings.
///
/// Each factor expands as `gamma_a gamma_b - delta_ab`; the choices where a
/// factor collapses to its metric part contribute the pair directly with a
/// sign, the rest feed the concatenated gamma string into the trace
/// recursion.
pub(crate) fn sigma_product_trace(
    pairs: &[(Index, Index)],
) -> Vec<(BigRational, Vec<(Index, Index)>)> {
    let k = pairs.len();
    let mut out = Vec::new();
    for mask in 0u32..(1 << k) {
        let mut string = Vec::new();
        let mut collapsed = Vec::new();
        let mut sign = BigRational::from_integer(BigInt::from(1));
        let minus_one = BigRational::from_integer(BigInt::from(-1));
        for (i, (a, b)) in pairs.iter().enumerate() {
            if mask & (1 << i) != 0 {
                collapsed.push((*a, *b));
                sign *= minus_one.clone();
            } else {
                string.push(*a);
                string.push(*b);
            }
        }
        for (w, mut etas) in gamma_string_trace(&string) {
            etas.extend(collapsed.iter().copied());
            out.push((sign.clone() * w, etas));
        }
    }
    out
}

/// Trace of a gamma string as weighted perfect pairings with recursion
/// signs.
pub(crate) fn gamma_string_trace(labels: &[Index]) -> Vec<(BigRational, Vec<(Index, Index)>)> {
    if labels.is_empty() {
        return vec![(BigRational::from_integer(BigInt::from(4)), Vec::new())];
    }
    if labels.len() % 2 == 1 {
        return Vec::new();
    }
    let mut out = Vec::new();
    let head = labels[0];
    for i in 1..labels.len() {
        let sign = if i % 2 == 1 { 1 } else { -1 };
        let mut rest = Vec::with_capacity(labels.len() - 2);
        rest.extend_from_slice(&labels[1..i]);
        rest.extend_from_slice(&labels[i + 1..]);
        for (w, mut etas) in gamma_string_trace(&rest) {
            etas.push((head, labels[i]));
            out.push((w * BigRational::from_integer(BigInt::from(sign)), etas));
        }
    }
    out
}

#[cfg(test)]
pub(crate) mod rep4 {
    //! Explicit Euclidean gamma matrices over exact complex rationals, used
    //! only as an independent oracle for the symbolic trace recursion.

    use num::bigint::BigInt;
    use num::rational::BigRational;
    use num::Zero;
    use num_complex::Complex;

    pub type C = Complex<BigRational>;
    pub type Mat = [[C; 4]; 4];

    fn c(re: i64, im: i64) -> C {
        Complex::new(
            BigRational::from_integer(BigInt::from(re)),
            BigRational::from_integer(BigInt::from(im)),
        )
    }

    pub fn zero() -> Mat {
        core::array::from_fn(|_| core::array::from_fn(|_| c(0, 0)))
    }

    pub fn identity() -> Mat {
        let mut m = zero();
        for i in 0..4 {
            m[i][i] = c(1, 0);
        }
        m
    }

    pub fn mul(a: &Mat, b: &Mat) -> Mat {
        let mut out = zero();
        for i in 0..4 {
            for j in 0..4 {
                let mut acc = c(0, 0);
                for k in 0..4 {
                    acc = acc + a[i][k].clone() * b[k][j].clone();
                }
                out[i][j] = acc;
            }
        }
        out
    }

    pub fn add(a: &Mat, b: &Mat) -> Mat {
        let mut out = zero();
        for i in 0..4 {
            for j in 0..4 {
                out[i][j] = a[i][j].clone() + b[i][j].clone();
            }
        }
        out
    }

    pub fn scale(a: &Mat, s: &C) -> Mat {
        let mut out = zero();
        for i in 0..4 {
            for j in 0..4 {
                out[i][j] = a[i][j].clone() * s.clone();
            }
        }
        out
    }

    pub fn trace(a: &Mat) -> C {
        let mut acc = c(0, 0);
        for i in 0..4 {
            acc = acc + a[i][i].clone();
        }
        acc
    }

    /// Euclidean gammas, `{gamma_a, gamma_b} = 2 delta_ab`:
    /// `gamma_k = offdiag(-i sigma_k, i sigma_k)` for `k = 1..3` and
    /// `gamma_4 = offdiag(1, 1)`.
    pub fn gamma(axis: usize) -> Mat {
        let mut m = zero();
        match axis {
            1 => {
                // sigma_1 = [[0,1],[1,0]]
                m[0][3] = c(0, -1);
                m[1][2] = c(0, -1);
                m[2][1] = c(0, 1);
                m[3][0] = c(0, 1);
            }
            2 => {
                // sigma_2 = [[0,-i],[i,0]]
                m[0][3] = c(-1, 0);
                m[1][2] = c(1, 0);
                m[2][1] = c(1, 0);
                m[3][0] = c(-1, 0);
            }
            3 => {
                // sigma_3 = [[1,0],[0,-1]]
                m[0][2] = c(0, -1);
                m[1][3] = c(0, 1);
                m[2][0] = c(0, 1);
                m[3][1] = c(0, -1);
            }
            4 => {
                m[0][2] = c(1, 0);
                m[1][3] = c(1, 0);
                m[2][0] = c(1, 0);
                m[3][1] = c(1, 0);
            }
            _ => panic!("axis out of range"),
        }
        m
    }

    /// `sigma_ab = gamma_a gamma_b - delta_ab`.
    pub fn sigma(a: usize, b: usize) -> Mat {
        let g = mul(&gamma(a), &gamma(b));
        if a == b {
            add(&g, &scale(&identity(), &c(-1, 0)))
        } else {
            g
        }
    }

    pub fn is_zero(m: &Mat) -> bool {
        m.iter().all(|row| row.iter().all(|x| x.is_zero()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::atom::WordAtom;
    use crate::term::Term;
    use num::Zero;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn clifford_relations_hold() {
        for a in 1..=4 {
            for b in 1..=4 {
                let anti = rep4::add(
                    &rep4::mul(&rep4::gamma(a), &rep4::gamma(b)),
                    &rep4::mul(&rep4::gamma(b), &rep4::gamma(a)),
                );
                let expect = if a == b {
                    rep4::scale(&rep4::identity(), &num_complex::Complex::new(rat(2, 1), rat(0, 1)))
                } else {
                    rep4::zero()
                };
                let mut diff = anti;
                for i in 0..4 {
                    for j in 0..4 {
                        diff[i][j] = diff[i][j].clone() - expect[i][j].clone();
                    }
                }
                assert!(rep4::is_zero(&diff), "anticommutator failed at {a},{b}");
            }
        }
    }

    /// Evaluate a symbolic pairing sum at a concrete axis assignment.
    fn eval_pairings(
        pairings: &[(BigRational, Vec<(Index, Index)>)],
        axes: &[usize],
    ) -> BigRational {
        let mut acc = BigRational::zero();
        for (w, etas) in pairings {
            let ok = etas
                .iter()
                .all(|(x, y)| axes[x.0 as usize] == axes[y.0 as usize]);
            if ok {
                acc += w.clone();
            }
        }
        acc
    }

    fn rep_string_trace(axes: &[usize]) -> num_complex::Complex<BigRational> {
        let mut m = rep4::identity();
        for &a in axes {
            m = rep4::mul(&m, &rep4::gamma(a));
        }
        rep4::trace(&m)
    }

    #[test]
    fn string_traces_match_representation_exhaustively() {
        // Lengths 2 and 4 over all axis assignments.
        for len in [2usize, 4] {
            let labels: Vec<Index> = (0..len as u32).map(Index).collect();
            let pairings = gamma_string_trace(&labels);
            let mut axes = vec![1usize; len];
            loop {
                let symbolic = eval_pairings(&pairings, &axes);
                let rep = rep_string_trace(&axes);
                assert!(rep.im.is_zero());
                assert_eq!(symbolic, rep.re, "axes {axes:?}");
                // odometer
                let mut i = 0;
                loop {
                    if i == len {
                        break;
                    }
                    axes[i] += 1;
                    if axes[i] <= 4 {
                        break;
                    }
                    axes[i] = 1;
                    i += 1;
                }
                if i == len {
                    break;
                }
            }
        }
    }

    #[test]
    fn string_traces_match_representation_sampled() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for len in [6usize, 8] {
            let labels: Vec<Index> = (0..len as u32).map(Index).collect();
            let pairings = gamma_string_trace(&labels);
            for _ in 0..40 {
                let axes: Vec<usize> = (0..len).map(|_| rng.gen_range(1..=4)).collect();
                let symbolic = eval_pairings(&pairings, &axes);
                let rep = rep_string_trace(&axes);
                assert!(rep.im.is_zero());
                assert_eq!(symbolic, rep.re, "axes {axes:?}");
            }
        }
    }

    #[test]
    fn four_gamma_trace_is_the_classical_pattern() {
        // tr(g_a g_b g_c g_d) = 4(d_ab d_cd - d_ac d_bd + d_ad d_bc).
        let labels: Vec<Index> = (0..4u32).map(Index).collect();
        let pairings = gamma_string_trace(&labels);
        assert_eq!(pairings.len(), 3);
        for (w, etas) in &pairings {
            let pat: Vec<(u32, u32)> = etas.iter().map(|(a, b)| (a.0, b.0)).collect();
            let expected = match pat.as_slice() {
                [(2, 3), (0, 1)] => rat(4, 1),
                [(1, 2), (0, 3)] => rat(4, 1),
                [(1, 3), (0, 2)] => rat(-4, 1),
                other => panic!("unexpected pairing {other:?}"),
            };
            assert_eq!(*w, expected);
        }
    }

    #[test]
    fn sigma_pair_trace_matches_representation() {
        let pairs = [(Index(0), Index(1)), (Index(2), Index(3))];
        let pairings = sigma_product_trace(&pairs);
        for a in 1..=4usize {
            for b in 1..=4 {
                for c in 1..=4 {
                    for d in 1..=4 {
                        let rep = rep4::trace(&rep4::mul(&rep4::sigma(a, b), &rep4::sigma(c, d)));
                        assert!(rep.im.is_zero());
                        let axes = [a, b, c, d];
                        let symbolic = eval_pairings(&pairings, &axes);
                        assert_eq!(symbolic, rep.re, "axes {axes:?}");
                        // Classical closed form.
                        let delta = |x: usize, y: usize| i64::from(x == y);
                        let closed =
                            rat(-4 * (delta(a, c) * delta(b, d) - delta(a, d) * delta(b, c)), 1);
                        assert_eq!(rep.re, closed);
                    }
                }
            }
        }
    }

    #[test]
    fn lone_spin_coupling_traces_to_zero() {
        let mut t = Term::one();
        t.word = vec![WordAtom::sigma_f()];
        let traced = spin_trace(&Expr::from_term(t)).unwrap();
        assert!(traced.normalized().unwrap().is_zero().unwrap());
    }

    #[test]
    fn spin_free_words_pick_up_dimension_four() {
        let mut t = Term::one();
        t.word = vec![WordAtom::gauge(Index(0))];
        let traced = spin_trace(&Expr::from_term(t)).unwrap();
        let n = traced.normalized().unwrap();
        assert_eq!(n.terms.len(), 1);
        assert_eq!(n.terms[0].coeff.re, rat(4, 1));
    }

    #[test]
    fn double_spin_coupling_contracts_strengths() {
        // tr_spin (sigma.F)(sigma.F) = -2 F_ab F_ab.
        let mut t = Term::one();
        t.word = vec![WordAtom::sigma_f(), WordAtom::sigma_f()];
        let traced = spin_trace(&Expr::from_term(t)).unwrap().normalized().unwrap();

        let mut expect = Term::one();
        expect.word = vec![
            WordAtom::strength(Index(0), Index(1)),
            WordAtom::strength(Index(0), Index(1)),
        ];
        expect.coeff = expect.coeff.scale(&rat(-2, 1));
        let expect = Expr::from_term(expect).normalized().unwrap();
        assert_eq!(traced.digest().unwrap(), expect.digest().unwrap());
    }

    #[test]
    fn spin_trace_keeps_orbital_factors() {
        // A word with the spin coupling next to a gauge atom keeps the
        // orbital ordering while spin space is traced out.
        let mut t = Term::one();
        t.word = vec![
            WordAtom::gauge(Index(0)),
            WordAtom::sigma_f(),
            WordAtom::sigma_f(),
        ];
        let traced = spin_trace(&Expr::from_term(t)).unwrap().normalized().unwrap();
        for term in &traced.terms {
            assert!(matches!(term.word[0], WordAtom::Gauge { .. }));
            assert_eq!(term.word.len(), 3);
        }
    }
}
