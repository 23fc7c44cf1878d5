//! Radial reduction: the `u = p^2` integrals and cut-off evaluations.
//!
//! Three ingredients close the pipeline after angular averaging:
//!
//! * the logarithm symbol, built from the auxiliary-parameter identity
//!   `int_0^1 ds s^{n-1} (1+sa)^{-(n+1)} = 1/(n (1+a)^n)`, with the
//!   reference-scale powers of the parametrization tracked and asserted to
//!   cancel;
//! * the radial trace integral `int_1^{Lambda^2} du` of rational kernels,
//!   expanded exactly into divergence grades;
//! * sharp-cut-off boundary evaluation `g^(k)(Lambda^2)` for the
//!   delta-derivative terms of covariant cut-off symbols.
//!
//! The infrared end of the radial integral is held at `u = 1`: divergence
//! grades are insensitive to the lower limit, which only feeds the finite
//! residue marker.

use crate::coeff::Coefficient;
use crate::error::{CalcError, Result};
use crate::eval::evaluate_on_one;
use crate::expr::Expr;
use crate::kernel::{binom_neg, Kernel, LogKernelTerm};
use crate::profile::{DivergenceProfile, Grade};
use crate::regime::Regime;
use crate::term::Term;
use num::bigint::BigInt;
use num::rational::BigRational;

/// How boundary logarithms `log((Lambda^2+m^2)/L0^2)` convert to the
/// `log Lambda` unit.
///
/// `Honest` counts the analytic two units (`log Lambda^2 = 2 log Lambda`).
/// `SingleUnit` counts one unit per boundary logarithm; the covariant
/// cut-off assembly uses it, and callers must surface that choice in their
/// derivation notes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LogUnitConvention {
    Honest,
    SingleUnit,
}

impl LogUnitConvention {
    fn units(self) -> i64 {
        match self {
            LogUnitConvention::Honest => 2,
            LogUnitConvention::SingleUnit => 1,
        }
    }
}

/// `int_0^1 ds s^{n-1} w(s)^{-(n+1)}` where `w(s) = L0^2 (1 + s a)` and
/// `1 + a = (u + m^2)/L0^2`: exactly `(1/n) L0^{-2} (u+m^2)^{-n}`.
///
/// Returned as a graded coefficient (carrying `L0^{-2}`) and a kernel.
pub fn s_integral(n: u32) -> (Coefficient, Kernel) {
    assert!(n >= 1);
    (
        Coefficient::from_ratio(1, n as i64).times_l0_pow(-2),
        Kernel::new(0, n as i64),
    )
}

/// Symbol of `log((m^2 - box)/L0^2)` up to and including perturbation order
/// `n_max`, where `box` is the covariant Laplacian whose single-step
/// composition word is `factor` (for minimally coupled bosons,
/// `Box + 2 i p.D`).
///
/// ```text
///   sigma = log((u+m^2)/L0^2) * 1  -  sum_{n>=1} (1/n) (u+m^2)^{-n} W^n 1
/// ```
///
/// Each order combines the parametrization prefactor `-L0^2` with the
/// auxiliary integral; the reference-scale grading must cancel exactly and
/// is asserted term by term.
pub fn log_symbol(factor: &Expr, n_max: usize, regime: Regime) -> Result<Expr> {
    let mut out = Expr::zero();
    for order in log_symbol_orders(factor, n_max, regime)? {
        out.terms.extend(order.terms);
    }
    Ok(out)
}

/// The same expansion split by perturbation order: element `n` holds the
/// order-`n` contribution, with the bare logarithm at position zero.
pub fn log_symbol_orders(factor: &Expr, n_max: usize, regime: Regime) -> Result<Vec<Expr>> {
    let mut out = Vec::with_capacity(n_max + 1);
    let mut lead = Term::one();
    lead.has_log = true;
    out.push(Expr::from_term(lead));

    let mut power = Expr::from_term(Term::one());
    for n in 1..=n_max {
        power = factor.mul(&power);
        let evaluated = evaluate_on_one(&power, regime)?.normalized()?;
        let (s_coeff, s_kernel) = s_integral(n as u32);
        let prefactor = (-Coefficient::one().times_l0_pow(2)) * s_coeff;
        assert_eq!(
            prefactor.grading.l0_pow, 0,
            "reference-scale powers must cancel in the log symbol"
        );
        let mut order = Expr::zero();
        for t in &evaluated.terms {
            let mut t = t.clone();
            t.coeff = t.coeff.clone() * prefactor.clone();
            t.kernel = t.kernel.mul(s_kernel);
            order.terms.push(t);
        }
        out.push(order);
    }
    Ok(out)
}

/// Multiply by the momentum-space trace measure: integrating a symbol over
/// momenta and positions gives `(1/8 pi^2) int du (u/2) <.>_avg` per unit
/// volume, applied here as a factor `u/(16 pi^2)` on every term.
pub fn trace_measure(expr: &Expr) -> Expr {
    Expr {
        terms: expr
            .terms
            .iter()
            .map(|t| {
                let mut t = t.clone();
                t.coeff = t
                    .coeff
                    .scale(&BigRational::new(BigInt::from(1), BigInt::from(16)))
                    .times_pi_inv2(1);
                t.kernel.u_pow += 1;
                t
            })
            .collect(),
    }
}

/// Expand the boundary value of `c * u^alpha (u+m^2)^{-beta} [* log]` at
/// `u = Lambda^2` into divergence grades.
fn boundary_at_cutoff(
    base: &Term,
    convention: LogUnitConvention,
    profile: &mut DivergenceProfile,
) {
    let alpha = base.kernel.u_pow;
    let beta = base.kernel.den_pow;
    let lead = alpha - beta;

    // Rational factor: sum_j binom(-beta, j) m^{2j} Lambda^{2(lead - j)}.
    let mut j = 0i64;
    loop {
        let lam = lead - j;
        let b = binom_neg(beta, j);
        let rational_piece = |extra: &BigRational, m2_extra: i64| -> Coefficient {
            base.coeff
                .scale(&b)
                .scale(extra)
                .times_m2_pow((j + m2_extra) as i32)
        };
        let one = BigRational::from_integer(BigInt::from(1));

        if !base.has_log {
            if lam <= 0 {
                profile.finite_residue = true;
                if j > lead {
                    break;
                }
                j += 1;
                continue;
            }
            let mut t = strip_radial(base);
            t.coeff = rational_piece(&one, 0);
            profile.add(
                Grade {
                    lambda_pow: (2 * lam) as i32,
                    log_pow: 0,
                    log0_pow: 0,
                },
                t,
            );
        } else {
            // log((Lambda^2+m^2)/L0^2)
            //   = 2 logL + sum_{s>=1} (-1)^{s+1} m^{2s} L^{-2s} / s - 2 logL0.
            // Under the single-unit convention the whole boundary logarithm
            // counts as exactly one logL; only the honest expansion produces
            // the mass series and the reference-scale piece separately.
            if lam >= 0 {
                let units = BigRational::from_integer(BigInt::from(convention.units()));
                let mut t = strip_radial(base);
                t.coeff = rational_piece(&units, 0);
                profile.add(
                    Grade {
                        lambda_pow: (2 * lam) as i32,
                        log_pow: 1,
                        log0_pow: 0,
                    },
                    t,
                );
            } else {
                profile.finite_residue = true;
            }
            if convention == LogUnitConvention::Honest {
                if lam >= 0 {
                    let minus_two = BigRational::from_integer(BigInt::from(-2));
                    let mut t = strip_radial(base);
                    t.coeff = rational_piece(&minus_two, 0);
                    profile.add(
                        Grade {
                            lambda_pow: (2 * lam) as i32,
                            log_pow: 0,
                            log0_pow: 1,
                        },
                        t,
                    );
                }
                let mut s = 1i64;
                while lam - s > 0 {
                    let c = BigRational::new(
                        BigInt::from(if s % 2 == 1 { 1 } else { -1 }),
                        BigInt::from(s),
                    );
                    let mut t = strip_radial(base);
                    t.coeff = rational_piece(&c, s);
                    profile.add(
                        Grade {
                            lambda_pow: (2 * (lam - s)) as i32,
                            log_pow: 0,
                            log0_pow: 0,
                        },
                        t,
                    );
                    s += 1;
                }
            }
            profile.finite_residue = true;
        }

        // Advance j; once the leading power is exhausted nothing further is
        // divergent, and for beta = 0 the binomials vanish beyond j = 0.
        j += 1;
        if j > lead || (beta == 0 && j >= 1) {
            if beta > 0 || lead >= 0 {
                profile.finite_residue = true;
            }
            break;
        }
    }
}

/// Copy a term with its radial data removed (kernel, log flag).
fn strip_radial(t: &Term) -> Term {
    let mut out = t.clone();
    out.kernel = Kernel::ONE;
    out.has_log = false;
    out
}

/// Integrate every term's kernel over `u` from 1 to `Lambda^2`, collecting
/// divergence grades exactly.
///
/// Logarithm-carrying kernels are supported for pure powers (`beta = 0`) by
/// parts; mixed `log/(u+m^2)^beta` integrands do not occur in any pipeline
/// and are rejected.
pub fn radial_profile(expr: &Expr) -> Result<DivergenceProfile> {
    let mut profile = DivergenceProfile::new();
    for t in &expr.terms {
        radial_term(t, &mut profile)?;
    }
    Ok(profile)
}

fn radial_term(t: &Term, profile: &mut DivergenceProfile) -> Result<()> {
    if t.has_log {
        let a = t.kernel.u_pow;
        if t.kernel.den_pow != 0 {
            return Err(CalcError::RadialStructure(format!(
                "logarithmic integrand with shifted denominator: {t}"
            )));
        }
        if a < 0 {
            return Err(CalcError::RadialStructure(format!(
                "logarithmic integrand with negative power: {t}"
            )));
        }
        // int u^a log du = [u^{a+1}/(a+1) log] - int u^{a+1}/((a+1)(u+m^2)).
        let inv = BigRational::new(BigInt::from(1), BigInt::from(a + 1));
        let mut boundary = t.clone();
        boundary.coeff = boundary.coeff.scale(&inv);
        boundary.kernel = Kernel::new(a + 1, 0);
        boundary_at_cutoff(&boundary, LogUnitConvention::Honest, profile);
        profile.finite_residue = true; // lower limit

        let mut rest = t.clone();
        rest.coeff = -rest.coeff.scale(&inv);
        rest.kernel = Kernel::new(a + 1, 1);
        rest.has_log = false;
        return radial_term(&rest, profile);
    }

    // Rational kernel: expand the large-u tail; each power integrates to
    // its own grade, the u^{-1} term to the logarithm.
    let a = t.kernel.u_pow;
    let n = t.kernel.den_pow;
    let mut j = 0i64;
    loop {
        let w = a - n - j; // integrand behaves as u^w at this mass order
        if w < -1 {
            profile.finite_residue = true;
            break;
        }
        let b = binom_neg(n, j);
        if w == -1 {
            let two = BigRational::from_integer(BigInt::from(2));
            let mut out = strip_radial(t);
            out.coeff = t.coeff.scale(&b).scale(&two).times_m2_pow(j as i32);
            profile.add(Grade::LOG, out);
        } else {
            let inv = BigRational::new(BigInt::from(1), BigInt::from(w + 1));
            let mut out = strip_radial(t);
            out.coeff = t.coeff.scale(&b).scale(&inv).times_m2_pow(j as i32);
            profile.add(
                Grade {
                    lambda_pow: (2 * (w + 1)) as i32,
                    log_pow: 0,
                    log0_pow: 0,
                },
                out,
            );
        }
        profile.finite_residue = true; // lower limit of each piece
        if n == 0 {
            // Pure power: the binomial series has a single term.
            break;
        }
        j += 1;
    }
    Ok(())
}

/// Evaluate `d^k/du^k` of a term's radial data at `u = Lambda^2`,
/// distributing the result over divergence grades.
///
/// This is the reduction of `int du g(u) delta^(k)(Lambda^2 - u) = g^(k)(Lambda^2)`
/// for smooth `g` supported above the lower limit.
pub fn delta_evaluate(
    t: &Term,
    k: usize,
    convention: LogUnitConvention,
) -> Result<DivergenceProfile> {
    let mut pieces = vec![LogKernelTerm {
        coeff: t.coeff.clone(),
        kernel: t.kernel,
        has_log: t.has_log,
    }];
    for _ in 0..k {
        let mut next = Vec::new();
        for p in &pieces {
            next.extend(p.d_du());
        }
        pieces = next;
    }
    let mut profile = DivergenceProfile::new();
    for p in pieces {
        let mut q = strip_radial(t);
        q.coeff = p.coeff;
        q.kernel = p.kernel;
        q.has_log = p.has_log;
        boundary_at_cutoff(&q, convention, &mut profile);
    }
    Ok(profile)
}
