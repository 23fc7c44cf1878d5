//! Heat-kernel moment table and the zeta-side assembly of `a_4`.
//!
//! The smeared heat trace of the gauge Laplacian expands in moments
//!
//! ```text
//!   d(f, r, 2t)  =  (1/(8 pi^2)) (-4)^{-t} [u^t] < f (m^2 - Box_A - 2 i p.D_A)^r 1 >
//! ```
//!
//! where `[u^t]` reads the coefficient of the `t`-th momentum-square power
//! after angular averaging and `f` is the central scalar insertion carried
//! along as a word atom.  Everything downstream is a finite rational
//! combination of these moments:
//!
//! ```text
//!   a_4      =  (1/2) sum_t 4^t/(t+2) d(f, t+2, 2t)
//!   c_log    =  - sum_t 4^t/(t+2) d(f, t+2, 2t) + (1/2) m^4 d(f, 0, 0)
//!   chi(0)   =  (1/4) d(f, 0, 0)
//! ```
//!
//! with `t = 0, 1, 2` in four dimensions.  The three displays satisfy the
//! exact linear identity `-c_log/2 + (m^4/4) d(f,0,0) = a_4`, which ties
//! the cut-off logarithm to the heat-kernel coefficient and is asserted,
//! not assumed, by the derivation pipelines.

use crate::angular::angular_average;
use crate::atom::WordAtom;
use crate::coeff::Coefficient;
use crate::error::Result;
use crate::eval::evaluate_on_one;
use crate::expr::Expr;
use crate::index::{DerivSet, IndexAllocator};
use crate::regime::Regime;
use crate::term::Term;
use num::bigint::BigInt;
use num::rational::BigRational;
use std::collections::BTreeMap;

/// The factor `(m^2 - Box - 2 i p.D)` as an operator expression.
fn heat_factor(alloc: &mut IndexAllocator) -> Expr {
    let mut e = Expr::zero();
    let mut mass = Term::one();
    mass.coeff = Coefficient::one().times_m2_pow(1);
    e.terms.push(mass);
    let mut boxed = Term::from_word(vec![WordAtom::BoxOp]);
    boxed.coeff = Coefficient::from_int(-1);
    e.terms.push(boxed);
    let a = alloc.fresh();
    let mut drift = Term::from_word(vec![WordAtom::CovD(a)]);
    drift.p_open = vec![a];
    drift.coeff = Coefficient::from_int(-2).times_i_pow(1);
    e.terms.push(drift);
    e
}

/// `(m^2 - Box - 2 i p.D)^r` evaluated on 1, normalized.
pub fn heat_word_power(r: usize, regime: Regime) -> Result<Expr> {
    let mut alloc = IndexAllocator::above(1000);
    let mut acc = Expr::from_term(Term::one());
    for _ in 0..r {
        let factor = heat_factor(&mut alloc);
        acc = factor.mul(&acc);
    }
    evaluate_on_one(&acc, regime)?.normalized()
}

/// The moment table `(r, 2t) -> d(f, r, 2t)`.
///
/// Entries are trace-invariant expressions carrying the central regulator
/// atom in front; absent keys are zero.  The regulator is treated as central
/// in both regimes — it smears the trace from outside the operator word —
/// and inherits the word's shift marker so deformed-regime tables stay
/// marker-uniform under the integral.
pub struct HeatKernelTable {
    entries: BTreeMap<(usize, usize), Expr>,
    r_max: usize,
}

impl HeatKernelTable {
    /// Expand the heat word to every power up to `r_max` and read off the
    /// momentum-square moments.
    pub fn build(r_max: usize, regime: Regime) -> Result<HeatKernelTable> {
        let mut entries = BTreeMap::new();
        for r in 0..=r_max {
            let expansion = heat_word_power(r, regime)?;
            let mut smeared = Expr::zero();
            for t in &expansion.terms {
                let marker = t
                    .word
                    .iter()
                    .find_map(|a| a.shifted())
                    .unwrap_or(false);
                let mut with_f = t.clone();
                with_f.word.insert(
                    0,
                    WordAtom::Regulator {
                        derivs: DerivSet::empty(),
                        shifted: marker,
                    },
                );
                smeared.terms.push(with_f);
            }
            let averaged = angular_average(&smeared)?.normalized()?;
            let mut by_moment: BTreeMap<usize, Expr> = BTreeMap::new();
            for t in &averaged.terms {
                assert_eq!(t.kernel.den_pow, 0, "heat expansion grew a denominator");
                assert!(!t.has_log, "heat expansion grew a logarithm");
                assert!(t.p_open.is_empty(), "open momentum after averaging");
                let power = t.kernel.u_pow as usize;
                assert!(2 * power <= r, "moment beyond the binomial bound");
                let mut stripped = t.clone();
                stripped.kernel = crate::kernel::Kernel::ONE;
                let weight = BigRational::new(
                    BigInt::from((-1i64).pow(power as u32)),
                    BigInt::from(4i64.pow(power as u32)),
                );
                stripped.coeff = stripped.coeff.scale(&weight).times_pi_inv2(1);
                stripped.coeff = stripped.coeff.scale(&BigRational::new(
                    BigInt::from(1),
                    BigInt::from(8),
                ));
                by_moment
                    .entry(power)
                    .or_insert_with(Expr::zero)
                    .terms
                    .push(stripped);
            }
            for (t_pow, e) in by_moment {
                entries.insert((r, 2 * t_pow), e.normalized()?);
            }
        }
        Ok(HeatKernelTable { entries, r_max })
    }

    /// Largest expanded power.
    pub fn depth(&self) -> usize {
        self.r_max
    }

    /// The moment `d(f, r, 2t)`; zero when no such momentum power exists.
    pub fn moment(&self, r: usize, two_t: usize) -> Expr {
        self.entries
            .get(&(r, two_t))
            .cloned()
            .unwrap_or_else(Expr::zero)
    }
}

/// `sum_{t=0}^{2} 4^t/(t+2) d(f, t+2, 2t)`, the shared backbone of the
/// cut-off logarithm and the heat coefficient.
fn moment_sum(table: &HeatKernelTable) -> Result<Expr> {
    assert!(
        table.depth() >= 4,
        "moment assembly needs the table expanded to r = 4"
    );
    let mut acc = Expr::zero();
    for t in 0..=2usize {
        let weight = BigRational::new(BigInt::from(4i64.pow(t as u32)), BigInt::from(t as i64 + 2));
        let scaled = table
            .moment(t + 2, 2 * t)
            .scale(&Coefficient::one().scale(&weight));
        acc = acc.add(&scaled);
    }
    acc.normalized()
}

/// The logarithmic cut-off coefficient assembled from heat moments:
/// `c_log = -sum_t 4^t/(t+2) d(f,t+2,2t) + (1/2) m^4 d(f,0,0)`.
pub fn heat_log_coefficient(table: &HeatKernelTable) -> Result<Expr> {
    let sum = moment_sum(table)?;
    let vacuum = table
        .moment(0, 0)
        .scale(&Coefficient::from_ratio(1, 2).times_m2_pow(2));
    sum.neg().add(&vacuum).normalized()
}

/// The fourth heat-kernel coefficient: `a_4 = (1/2) sum_t 4^t/(t+2) d(f,t+2,2t)`.
pub fn heat_a4(table: &HeatKernelTable) -> Result<Expr> {
    moment_sum(table)?
        .scale(&Coefficient::from_ratio(1, 2))
        .normalized()
}

/// The spectral-function value entering the residue: `chi(0) = (1/4) d(f,0,0)`.
pub fn chi_zero(table: &HeatKernelTable) -> Result<Expr> {
    table
        .moment(0, 0)
        .scale(&Coefficient::from_ratio(1, 4))
        .normalized()
}

/// The residual of `-c_log/2 + (m^4/4) d(f,0,0) - a_4`, exactly zero when
/// the cut-off logarithm and the heat coefficient agree.
pub fn a4_identity_residual(table: &HeatKernelTable) -> Result<Expr> {
    let half_clog = heat_log_coefficient(table)?.scale(&Coefficient::from_ratio(-1, 2));
    let vacuum = table
        .moment(0, 0)
        .scale(&Coefficient::from_ratio(1, 4).times_m2_pow(2));
    half_clog.add(&vacuum).add(&heat_a4(table)?.neg()).normalized()
}
