//! End-to-end derivations of one-loop divergence coefficients.
//!
//! Each derivation case walks a fixed stage list — symbol expansion,
//! trace subtraction, angular averaging, radial reduction, covariant
//! reduction — and freezes the outcome into a [`DerivationReport`]:
//! digests on both sides of every stage, the full divergence profile, the
//! canonical final form next to the canonical target, and a verdict that
//! passes exactly when the two coincide.  Intermediate bundles with known
//! closed forms are checked along the way and recorded as notes, so a
//! report documents not just the answer but the route.

use crate::angular::angular_average;
use crate::atom::WordAtom;
use crate::coeff::Coefficient;
use crate::compose::{bch_commutator_audit, log_difference_decay_audit};
use crate::error::{CalcError, Result};
use crate::eval::{box_plus_two_ip_d, evaluate_on_one};
use crate::expr::Expr;
use crate::gamma::spin_trace;
use crate::heat::{
    a4_identity_residual, chi_zero, heat_a4, heat_log_coefficient, heat_word_power,
    HeatKernelTable,
};
use crate::index::{Index, IndexAllocator};
use crate::profile::{DivergenceProfile, Grade};
use crate::radial::{
    delta_evaluate, log_symbol_orders, radial_profile, trace_measure, LogUnitConvention,
};
use crate::reduce::{
    equals_mod_relations, expand_covariant, gauge_variation, reduce_against,
    reduce_mod_relations, relation_space_for,
};
use crate::regime::{shift_normalize_under_integral, Regime};
use crate::report::{
    verdict, ConfigRecord, DerivationReport, ExprRecord, ProfileRecord, StageRecord,
};
use crate::term::Term;
use num::bigint::BigInt;
use num::rational::BigRational;
use sha2::{Digest, Sha256};

/// The five end-to-end cases the engine can derive.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DerivationCase {
    BosonClog,
    FermionClog,
    GaugeInvariantClog,
    HeatKernelA4,
    MoyalClog,
}

impl DerivationCase {
    pub const ALL: [DerivationCase; 5] = [
        DerivationCase::BosonClog,
        DerivationCase::FermionClog,
        DerivationCase::GaugeInvariantClog,
        DerivationCase::HeatKernelA4,
        DerivationCase::MoyalClog,
    ];

    /// Stable case identifier used in reports and on the command line.
    pub fn name(self) -> &'static str {
        match self {
            DerivationCase::BosonClog => "boson-clog",
            DerivationCase::FermionClog => "fermion-clog",
            DerivationCase::GaugeInvariantClog => "gauge-invariant-clog",
            DerivationCase::HeatKernelA4 => "heat-kernel-a4",
            DerivationCase::MoyalClog => "moyal-clog",
        }
    }

    pub fn from_name(name: &str) -> Option<DerivationCase> {
        DerivationCase::ALL.into_iter().find(|c| c.name() == name)
    }
}

/// Tunable knobs of the derivation pipelines.
#[derive(Clone, Copy, Debug)]
pub struct DeriveConfig {
    /// Resolvent truncation order for logarithm symbols.
    pub order: usize,
    /// Truncation order for the sharp-cut-off symbol expansion.
    pub theta_order: usize,
    /// Largest expanded power of the heat word.
    pub heat_depth: usize,
    /// Product regime override; each case supplies its own default.
    pub regime: Option<Regime>,
    /// How boundary logarithms convert to `log Lambda` units.
    pub convention: LogUnitConvention,
}

impl Default for DeriveConfig {
    fn default() -> Self {
        DeriveConfig {
            order: 4,
            theta_order: 5,
            heat_depth: 4,
            regime: None,
            convention: LogUnitConvention::SingleUnit,
        }
    }
}

impl DeriveConfig {
    fn record(&self, regime: Regime) -> ConfigRecord {
        ConfigRecord {
            order: self.order,
            theta_order: self.theta_order,
            heat_depth: self.heat_depth,
            regime: regime.to_string(),
            convention: match self.convention {
                LogUnitConvention::Honest => "honest".to_string(),
                LogUnitConvention::SingleUnit => "single-unit".to_string(),
            },
        }
    }

    fn units(&self) -> i64 {
        match self.convention {
            LogUnitConvention::Honest => 2,
            LogUnitConvention::SingleUnit => 1,
        }
    }
}

/// Run one derivation case under the given configuration.
pub fn run_case(case: DerivationCase, config: &DeriveConfig) -> Result<DerivationReport> {
    match case {
        DerivationCase::BosonClog => run_boson_clog(config),
        DerivationCase::FermionClog => run_fermion_clog(config),
        DerivationCase::GaugeInvariantClog => run_gauge_invariant_clog(config),
        DerivationCase::HeatKernelA4 => run_heat_kernel_a4(config),
        DerivationCase::MoyalClog => run_moyal_clog(config),
    }
}

fn pipeline_error(case: DerivationCase, detail: String) -> CalcError {
    CalcError::DerivationFailure {
        case: case.name().to_string(),
        detail,
    }
}

fn pointwise_only(case: DerivationCase, config: &DeriveConfig) -> Result<Regime> {
    match config.regime {
        None | Some(Regime::Commutative) => Ok(Regime::Commutative),
        Some(Regime::Moyal) => Err(CalcError::RegimeViolation(format!(
            "case `{}` runs on the pointwise product; the deformed trace is its own case",
            case.name()
        ))),
    }
}

// ---------------------------------------------------------------------------
// small expression utilities
// ---------------------------------------------------------------------------

fn concat(parts: &[Expr]) -> Expr {
    Expr {
        terms: parts.iter().flat_map(|e| e.terms.clone()).collect(),
    }
}

fn massless_part(e: &Expr) -> Expr {
    Expr {
        terms: e
            .terms
            .iter()
            .filter(|t| t.coeff.grading.m2_pow == 0)
            .cloned()
            .collect(),
    }
}

fn massive_part(e: &Expr) -> Expr {
    Expr {
        terms: e
            .terms
            .iter()
            .filter(|t| t.coeff.grading.m2_pow != 0)
            .cloned()
            .collect(),
    }
}

fn has_field_atom(t: &Term) -> bool {
    t.word.iter().any(|a| {
        matches!(
            a,
            WordAtom::Gauge { .. } | WordAtom::Strength { .. } | WordAtom::SigmaF { .. }
        )
    })
}

fn field_free_part(e: &Expr) -> Expr {
    Expr {
        terms: e
            .terms
            .iter()
            .filter(|t| !has_field_atom(t))
            .cloned()
            .collect(),
    }
}

fn field_part(e: &Expr) -> Expr {
    Expr {
        terms: e
            .terms
            .iter()
            .filter(|t| has_field_atom(t))
            .cloned()
            .collect(),
    }
}

fn profile_entry(p: &DivergenceProfile, grade: Grade) -> Expr {
    p.entries.get(&grade).cloned().unwrap_or_else(Expr::zero)
}

fn rational(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// Record that an expression vanishes, identically or under trace relations.
fn must_vanish(
    case: DerivationCase,
    e: &Expr,
    regime: Regime,
    what: &str,
    notes: &mut Vec<String>,
) -> Result<()> {
    let n = e.normalized()?;
    if n.is_empty() {
        notes.push(format!("{what} cancels identically"));
        return Ok(());
    }
    if reduce_mod_relations(&n, regime)?.is_zero() {
        notes.push(format!("{what} reduces to zero under trace relations"));
        return Ok(());
    }
    Err(pipeline_error(
        case,
        format!("{what} fails to vanish: {}", n.canonical_text()?),
    ))
}

// ---------------------------------------------------------------------------
// reference words
// ---------------------------------------------------------------------------

/// `Box Box` applied to the constant function.
fn box_square(regime: Regime) -> Result<Expr> {
    let w = Expr::from_term(Term::from_word(vec![WordAtom::BoxOp, WordAtom::BoxOp]));
    evaluate_on_one(&w, regime)?.normalized()
}

/// `D^mu Box D_mu` applied to the constant function.
fn d_box_d(regime: Regime) -> Result<Expr> {
    let a = Index(61);
    let w = Expr::from_term(Term::from_word(vec![
        WordAtom::CovD(a),
        WordAtom::BoxOp,
        WordAtom::CovD(a),
    ]));
    evaluate_on_one(&w, regime)?.normalized()
}

/// `D^nu D^mu D_nu D_mu` applied to the constant function.
fn d_four(regime: Regime) -> Result<Expr> {
    let a = Index(61);
    let b = Index(62);
    let w = Expr::from_term(Term::from_word(vec![
        WordAtom::CovD(a),
        WordAtom::CovD(b),
        WordAtom::CovD(a),
        WordAtom::CovD(b),
    ]));
    evaluate_on_one(&w, regime)?.normalized()
}

/// `Box` applied to the constant function.
fn box_one(regime: Regime) -> Result<Expr> {
    let w = Expr::from_term(Term::from_word(vec![WordAtom::BoxOp]));
    evaluate_on_one(&w, regime)?.normalized()
}

/// The contracted strength-square word, marker-carrying in the deformed
/// regime.
fn strength_square(regime: Regime) -> Expr {
    let a = Index(61);
    let b = Index(62);
    let mut f1 = WordAtom::strength(a, b);
    let mut f2 = WordAtom::strength(a, b);
    if regime == Regime::Moyal {
        f1 = f1.with_shift(true);
        f2 = f2.with_shift(true);
    }
    Expr::from_term(Term::from_word(vec![f1, f2]))
}

// ---------------------------------------------------------------------------
// stage bookkeeping
// ---------------------------------------------------------------------------

struct StageLog {
    stages: Vec<StageRecord>,
    notes: Vec<String>,
}

impl StageLog {
    fn new() -> Self {
        StageLog {
            stages: Vec::new(),
            notes: Vec::new(),
        }
    }

    fn record(&mut self, name: &str, input: &Expr, output: &Expr) -> Result<()> {
        self.stages.push(StageRecord::new(name, input, output)?);
        Ok(())
    }

    fn record_profile(
        &mut self,
        name: &str,
        input: &Expr,
        profile: &DivergenceProfile,
    ) -> Result<ProfileRecord> {
        let record = ProfileRecord::of(profile)?;
        self.stages.push(StageRecord::with_output_digest(
            name,
            input,
            record.terms(),
            record.digest(),
        )?);
        Ok(record)
    }

    fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }
}

// ---------------------------------------------------------------------------
// shared resolvent pipeline
// ---------------------------------------------------------------------------

struct ResolventRun {
    log: StageLog,
    profile: DivergenceProfile,
    /// Massless logarithm coefficient per expansion order (index = order).
    order_logs: Vec<Expr>,
    /// Total massless logarithm coefficient.
    log_m0: Expr,
}

/// The operator word whose resolvent powers drive the squared-spinor trace:
/// the minimally coupled step plus the spin coupling.
fn spinor_square_factor(alloc: &mut IndexAllocator) -> Expr {
    let mut e = box_plus_two_ip_d(alloc);
    let mut s = Term::from_word(vec![WordAtom::sigma_f()]);
    s.coeff = Coefficient::i().times_e_pow(1);
    e.terms.push(s);
    e
}

/// Expand the logarithm symbol of the minimally coupled trace, subtract the
/// free part, average, integrate, and collect divergence grades.
///
/// With `spin` set the one-step word gains the spin coupling and every
/// order passes through the spinor trace before averaging.
fn resolvent_log_run(
    case: DerivationCase,
    order: usize,
    regime: Regime,
    spin: bool,
) -> Result<ResolventRun> {
    assert!(
        !spin || regime == Regime::Commutative,
        "spin traces are only wired for the pointwise product"
    );
    let mut log = StageLog::new();
    let mut alloc = IndexAllocator::above(1000);
    let factor = if spin {
        spinor_square_factor(&mut alloc)
    } else {
        box_plus_two_ip_d(&mut alloc)
    };

    let mut orders = log_symbol_orders(&factor, order, regime)?;
    let symbol = concat(&orders);
    log.record("logarithm_symbol", &factor, &symbol)?;

    if spin {
        let mut traced = Vec::with_capacity(orders.len());
        for o in &orders {
            traced.push(spin_trace(o)?.normalized()?);
        }
        let traced_symbol = concat(&traced);
        log.record("spin_trace", &symbol, &traced_symbol)?;
        orders = traced;
    }

    let symbol = concat(&orders);
    let interacting: Vec<Expr> = orders.iter().map(field_part).collect();
    for (n, o) in orders.iter().enumerate().skip(1) {
        if !field_free_part(o).normalized()?.is_empty() {
            return Err(pipeline_error(
                case,
                format!("interacting order {n} contains field-free terms"),
            ));
        }
    }
    let interacting_symbol = concat(&interacting);
    log.record("free_trace_subtraction", &symbol, &interacting_symbol)?;
    log.note(
        "the free trace cancels against the normalization: only the bare logarithm \
         is field-independent, so the subtracted expansion vanishes at zero background",
    );

    let averaged: Vec<Expr> = interacting
        .iter()
        .map(|e| angular_average(e))
        .collect::<Result<_>>()?;
    let averaged_symbol = concat(&averaged);
    log.record("angular_average", &interacting_symbol, &averaged_symbol)?;

    let measured: Vec<Expr> = averaged
        .iter()
        .map(|e| trace_measure(e).normalized())
        .collect::<Result<_>>()?;
    let measured_symbol = concat(&measured);
    log.record("radial_trace_measure", &averaged_symbol, &measured_symbol)?;

    let mut profile = DivergenceProfile::new();
    let mut order_logs = vec![Expr::zero()];
    for m in measured.iter().skip(1) {
        let p = radial_profile(m)?;
        order_logs.push(massless_part(&p.log_coefficient()?).normalized()?);
        profile.absorb(p);
    }
    let profile = profile.normalized()?;
    log.record_profile("radial_profile", &measured_symbol, &profile)?;

    profile.assert_no_scale_leak()?;
    log.note("no divergent grade depends on the reference scale");

    let full_log = profile.log_coefficient()?;
    must_vanish(
        case,
        &massive_part(&full_log),
        regime,
        "the massive logarithm channel",
        &mut log.notes,
    )?;
    let log_m0 = massless_part(&full_log).normalized()?;

    Ok(ResolventRun {
        log,
        profile,
        order_logs,
        log_m0,
    })
}

/// Verify the per-order logarithm content against its closed operator form.
fn order_bundle_checks(
    case: DerivationCase,
    run: &ResolventRun,
    regime: Regime,
    notes: &mut Vec<String>,
) -> Result<()> {
    let bundles: [(usize, Vec<(Expr, i64, i64)>, &str); 4] = [
        (1, vec![], "0"),
        (
            2,
            vec![(box_square(regime)?, -1, 16)],
            "-1/(16 pi^2) Box^2",
        ),
        (
            3,
            vec![
                (box_square(regime)?, 1, 12),
                (d_box_d(regime)?, 1, 24),
            ],
            "1/(12 pi^2) Box^2 + 1/(24 pi^2) D.Box D",
        ),
        (
            4,
            vec![
                (box_square(regime)?, -1, 48),
                (d_box_d(regime)?, -1, 48),
                (d_four(regime)?, -1, 48),
            ],
            "-1/(48 pi^2) (Box^2 + D.Box D + DD DD)",
        ),
    ];
    for (n, pieces, label) in bundles {
        if n >= run.order_logs.len() {
            continue;
        }
        let got = &run.order_logs[n];
        let mut expected = Expr::zero();
        for (word, num, den) in pieces {
            let c = Coefficient::from_ratio(num, den).times_pi_inv2(1);
            expected = expected.add(&word.scale(&c));
        }
        if expected.terms.is_empty() {
            if !got.is_empty() {
                return Err(pipeline_error(
                    case,
                    format!("order {n} logarithm expected to vanish, found {got}"),
                ));
            }
            notes.push(format!("order {n} logarithm vanishes by power counting"));
            continue;
        }
        if !equals_mod_relations(got, &expected, regime)? {
            return Err(pipeline_error(
                case,
                format!("order {n} logarithm does not match {label}"),
            ));
        }
        notes.push(format!("order {n} logarithm matches {label}"));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// shared report tail
// ---------------------------------------------------------------------------

struct Comparison {
    final_record: ExprRecord,
    target_record: ExprRecord,
    passed: bool,
    coefficient: Coefficient,
}

/// Reduce the final expression and the scaled target in one relation space
/// and compare the canonical forms byte for byte.
fn compare_with_target(
    finale: &Expr,
    target_base: &Expr,
    expected: &Coefficient,
    regime: Regime,
) -> Result<Comparison> {
    let target = target_base.scale(expected).normalized()?;
    let joint = finale.add(&target);
    let space = relation_space_for(&joint, regime)?;
    let reduced_final = space.reduce(finale)?;
    let reduced_target = space.reduce(&target)?;
    let passed = reduced_final.residual.digest()? == reduced_target.residual.digest()?;
    let coefficient = reduce_against(finale, target_base, regime)?;
    Ok(Comparison {
        final_record: ExprRecord::of(&reduced_final.residual)?,
        target_record: ExprRecord::of(&reduced_target.residual)?,
        passed,
        coefficient,
    })
}

/// Check that the gauge variation of the target strength form dies under
/// the trace relations.
fn gauge_invariance_check(
    case: DerivationCase,
    regime: Regime,
    notes: &mut Vec<String>,
) -> Result<()> {
    let form = strength_square(regime);
    let varied = gauge_variation(&form)?;
    let expanded = expand_covariant(&varied, regime)?;
    must_vanish(
        case,
        &expanded,
        regime,
        "the gauge variation of the strength-square final form",
        notes,
    )
}

// ---------------------------------------------------------------------------
// case: minimally coupled boson, sharp cut-off
// ---------------------------------------------------------------------------

/// Logarithmic divergence of the cut-off regularized boson trace.
pub fn run_boson_clog(config: &DeriveConfig) -> Result<DerivationReport> {
    let case = DerivationCase::BosonClog;
    let regime = pointwise_only(case, config)?;
    let mut run = resolvent_log_run(case, config.order, regime, false)?;
    let mut notes = std::mem::take(&mut run.log.notes);
    order_bundle_checks(case, &run, regime, &mut notes)?;

    let expanded = expand_covariant(&run.log_m0, regime)?;
    run.log
        .stages
        .push(StageRecord::new("strength_expansion", &run.log_m0, &expanded)?);

    let target_base = expand_covariant(&strength_square(regime), regime)?;
    let expected = Coefficient::from_ratio(1, 96)
        .times_e_pow(2)
        .times_pi_inv2(1);
    let cmp = compare_with_target(&expanded, &target_base, &expected, regime)?;
    run.log
        .stages
        .push(StageRecord::with_output_digest(
            "covariant_reduction",
            &expanded,
            cmp.final_record.terms,
            cmp.final_record.digest.clone(),
        )?);
    notes.push(format!(
        "logarithm coefficient per contracted strength square: {}",
        cmp.coefficient
    ));
    gauge_invariance_check(case, regime, &mut notes)?;

    Ok(DerivationReport {
        case: case.name().to_string(),
        config: config.record(regime),
        stages: run.log.stages,
        profile: ProfileRecord::of(&run.profile)?,
        final_form: cmp.final_record,
        target: cmp.target_record,
        verdict: verdict(cmp.passed),
        notes,
    })
}

// ---------------------------------------------------------------------------
// case: minimally coupled spinor, sharp cut-off
// ---------------------------------------------------------------------------

/// Logarithmic divergence of the cut-off regularized spinor trace.
pub fn run_fermion_clog(config: &DeriveConfig) -> Result<DerivationReport> {
    let case = DerivationCase::FermionClog;
    let regime = pointwise_only(case, config)?;
    let mut run = resolvent_log_run(case, config.order, regime, true)?;
    let mut notes = std::mem::take(&mut run.log.notes);

    spin_channel_checks(case, regime, &mut notes)?;
    notes.extend(bch_commutator_audit(regime)?);

    let expanded = expand_covariant(&run.log_m0, regime)?;
    run.log
        .stages
        .push(StageRecord::new("strength_expansion", &run.log_m0, &expanded)?);

    let half = Coefficient::from_ratio(1, 2);
    let halved = expanded.scale(&half).normalized()?;
    run.log
        .stages
        .push(StageRecord::new("half_spinor_normalization", &expanded, &halved)?);
    notes.push(
        "a single spinor counts half of the squared-operator trace; the factor \
         enters after the logarithm coefficient is extracted"
            .to_string(),
    );

    let target_base = expand_covariant(&strength_square(regime), regime)?;
    let expected = Coefficient::from_ratio(-1, 24)
        .times_e_pow(2)
        .times_pi_inv2(1);
    let cmp = compare_with_target(&halved, &target_base, &expected, regime)?;
    run.log
        .stages
        .push(StageRecord::with_output_digest(
            "covariant_reduction",
            &halved,
            cmp.final_record.terms,
            cmp.final_record.digest.clone(),
        )?);
    notes.push(format!(
        "logarithm coefficient per contracted strength square: {}",
        cmp.coefficient
    ));
    gauge_invariance_check(case, regime, &mut notes)?;

    Ok(DerivationReport {
        case: case.name().to_string(),
        config: config.record(regime),
        stages: run.log.stages,
        profile: ProfileRecord::of(&run.profile)?,
        final_form: cmp.final_record,
        target: cmp.target_record,
        verdict: verdict(cmp.passed),
        notes,
    })
}

/// Isolate the square of the spin coupling and pin its logarithm, then
/// verify the spinor trace of that square against the strength square.
fn spin_channel_checks(
    case: DerivationCase,
    regime: Regime,
    notes: &mut Vec<String>,
) -> Result<()> {
    let mut alloc = IndexAllocator::above(1000);
    let factor = spinor_square_factor(&mut alloc);
    let orders = log_symbol_orders(&factor, 2, regime)?;
    let channel = Expr {
        terms: orders[2]
            .terms
            .iter()
            .filter(|t| {
                t.word.len() == 2
                    && t.word.iter().all(|a| {
                        matches!(a, WordAtom::SigmaF { .. })
                            && a.derivs().map(|d| d.is_empty()).unwrap_or(false)
                    })
            })
            .cloned()
            .collect(),
    };
    let measured = trace_measure(&angular_average(&channel)?).normalized()?;
    let log = massless_part(&radial_profile(&measured)?.log_coefficient()?).normalized()?;

    let mut expected_term = Term::from_word(vec![WordAtom::sigma_f(), WordAtom::sigma_f()]);
    expected_term.coeff = Coefficient::from_ratio(1, 16)
        .times_e_pow(2)
        .times_pi_inv2(1);
    let expected = Expr::from_term(expected_term).normalized()?;
    if log.digest()? != expected.digest()? {
        return Err(pipeline_error(
            case,
            format!("spin-square channel logarithm is {log}, not e^2/(16 pi^2)"),
        ));
    }
    notes.push(
        "the isolated spin-square channel contributes e^2/(16 pi^2) per traced \
         spin-coupling square"
            .to_string(),
    );

    let spin_square = Expr::from_term(Term::from_word(vec![
        WordAtom::sigma_f(),
        WordAtom::sigma_f(),
    ]));
    let traced = spin_trace(&spin_square)?.normalized()?;
    let minus_two = strength_square(regime)
        .scale(&Coefficient::from_int(-2))
        .normalized()?;
    if traced.digest()? != minus_two.digest()? {
        return Err(pipeline_error(
            case,
            format!("spinor trace of the spin-coupling square is {traced}"),
        ));
    }
    notes.push(
        "the spinor trace of the spin-coupling square equals minus twice the \
         contracted strength square"
            .to_string(),
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// case: covariant cut-off
// ---------------------------------------------------------------------------

/// Logarithmic divergence when the cut-off rides on the covariant operator
/// itself instead of the free momentum square.
pub fn run_gauge_invariant_clog(config: &DeriveConfig) -> Result<DerivationReport> {
    let case = DerivationCase::GaugeInvariantClog;
    let regime = pointwise_only(case, config)?;
    let mut run = resolvent_log_run(case, config.order, regime, false)?;
    let mut notes = std::mem::take(&mut run.log.notes);

    // Difference of logarithms under the free projection: every order of
    // the interacting correction decays beyond the measure, so the sharp
    // boundary of a pure power series contributes no logarithm.
    let worst = log_difference_decay_audit(config.order, regime)?;
    notes.push(format!(
        "the logarithm-difference channel decays at least as p^{worst} and its \
         projected trace therefore carries no logarithmic grade"
    ));

    let (delta_profile, delta_integrands) = covariant_cutoff_delta(case, config, regime, &mut notes)?;
    let integrand = concat(&delta_integrands);
    let delta_record = ProfileRecord::of(&delta_profile)?;
    run.log.stages.push(StageRecord::with_output_digest(
        "covariant_cutoff_delta_expansion",
        &integrand,
        delta_record.terms(),
        delta_record.digest(),
    )?);

    let delta_log = profile_entry(&delta_profile, Grade::LOG).normalized()?;
    let delta_expanded = expand_covariant(&delta_log, regime)?;
    let delta_coeff = reduce_against(
        &delta_expanded,
        &expand_covariant(&strength_square(regime), regime)?,
        regime,
    )?;
    notes.push(format!(
        "the boundary correction alone contributes {delta_coeff} per contracted \
         strength square, multiplying the whole boundary logarithm"
    ));

    let mut profile = run.profile.clone();
    profile.absorb(delta_profile);
    let profile = profile.normalized()?;
    match config.convention {
        LogUnitConvention::SingleUnit => {
            profile.assert_no_scale_leak()?;
            notes.push(
                "the whole boundary logarithm counts as one logarithmic unit; under \
                 the honest two-unit conversion the logarithmic grade would cancel \
                 and a bare reference-scale logarithm would remain"
                    .to_string(),
            );
        }
        LogUnitConvention::Honest => {
            notes.push(
                "honest two-unit conversion: the logarithmic grade cancels between \
                 the sharp trace and the boundary correction, and the scheme \
                 logarithm survives at the reference-scale grade"
                    .to_string(),
            );
        }
    }

    let total_log = run.log_m0.add(&delta_log).normalized()?;
    let assembled = expand_covariant(&total_log, regime)?;
    run.log
        .stages
        .push(StageRecord::new("telescope_assembly", &total_log, &assembled)?);

    let target_base = expand_covariant(&strength_square(regime), regime)?;
    let expected = Coefficient::from_ratio(1, 192)
        .times_e_pow(2)
        .times_pi_inv2(1);
    let cmp = compare_with_target(&assembled, &target_base, &expected, regime)?;
    run.log.stages.push(StageRecord::with_output_digest(
        "covariant_reduction",
        &assembled,
        cmp.final_record.terms,
        cmp.final_record.digest.clone(),
    )?);
    notes.push(format!(
        "assembled logarithm coefficient per contracted strength square: {}",
        cmp.coefficient
    ));
    gauge_invariance_check(case, regime, &mut notes)?;

    Ok(DerivationReport {
        case: case.name().to_string(),
        config: config.record(regime),
        stages: run.log.stages,
        profile: ProfileRecord::of(&profile)?,
        final_form: cmp.final_record,
        target: cmp.target_record,
        verdict: verdict(cmp.passed),
        notes,
    })
}

/// Expand the covariant spectral projection around the free one and push
/// every order through sharp-boundary evaluation against the central free
/// logarithm.
///
/// Returns the collected boundary profile and the per-order integrands.
fn covariant_cutoff_delta(
    case: DerivationCase,
    config: &DeriveConfig,
    regime: Regime,
    notes: &mut Vec<String>,
) -> Result<(DivergenceProfile, Vec<Expr>)> {
    let mut alloc = IndexAllocator::above(1000);
    let factor = box_plus_two_ip_d(&mut alloc);
    let mut power = Expr::from_term(Term::one());
    let mut factorial = BigRational::from_integer(BigInt::from(1));
    let mut profile = DivergenceProfile::new();
    let mut integrands = Vec::new();
    let units = config.units();

    for n in 1..=config.theta_order {
        power = factor.mul(&power);
        factorial *= BigRational::from_integer(BigInt::from(n as i64));
        let evaluated = evaluate_on_one(&power, regime)?.normalized()?;
        let inv_factorial = factorial.recip();
        let mut integrand = Expr::zero();
        for t in &evaluated.terms {
            let mut t = t.clone();
            t.coeff = t.coeff.scale(&inv_factorial);
            assert!(!t.has_log, "cut-off expansion grew its own logarithm");
            t.has_log = true;
            integrand.terms.push(t);
        }
        let measured = trace_measure(&angular_average(&integrand)?).normalized()?;
        integrands.push(measured.clone());

        let mut order_profile = DivergenceProfile::new();
        for t in &measured.terms {
            order_profile.absorb(delta_evaluate(t, n - 1, config.convention)?);
        }
        let order_profile = order_profile.normalized()?;
        delta_channel_check(case, n, &order_profile, units, regime, notes)?;
        profile.absorb(order_profile);
    }

    let profile = profile.normalized()?;
    must_vanish(
        case,
        &profile_entry(&profile, Grade {
            lambda_pow: 2,
            log_pow: 1,
            log0_pow: 0,
        }),
        regime,
        "the quadratic boundary logarithm channel",
        notes,
    )?;
    Ok((profile, integrands))
}

/// Compare one order of the boundary expansion against its closed channel
/// weights.
fn delta_channel_check(
    case: DerivationCase,
    n: usize,
    profile: &DivergenceProfile,
    units: i64,
    regime: Regime,
    notes: &mut Vec<String>,
) -> Result<()> {
    let quad_log = Grade {
        lambda_pow: 2,
        log_pow: 1,
        log0_pow: 0,
    };
    let base = |num: i64, den: i64| -> Coefficient {
        Coefficient::one()
            .scale(&rational(num * units, den * 16))
            .times_pi_inv2(1)
    };
    let (quad_pieces, log_pieces): (Vec<(Expr, i64, i64)>, Vec<(Expr, i64, i64)>) = match n {
        1 => (vec![(box_one(regime)?, 1, 1)], vec![]),
        2 => (
            vec![(box_one(regime)?, -1, 1)],
            vec![(box_square(regime)?, 1, 2)],
        ),
        3 => (
            vec![],
            vec![
                (box_square(regime)?, -2, 3),
                (d_box_d(regime)?, -1, 3),
            ],
        ),
        4 => (
            vec![],
            vec![
                (box_square(regime)?, 1, 6),
                (d_box_d(regime)?, 1, 6),
                (d_four(regime)?, 1, 6),
            ],
        ),
        _ => {
            for (g, e) in &profile.entries {
                if g.log_pow > 0 && !e.normalized()?.is_empty() {
                    return Err(pipeline_error(
                        case,
                        format!("order {n} boundary term produces a logarithm at {g}"),
                    ));
                }
            }
            notes.push(format!(
                "order {n} boundary term carries no logarithm: the odd momentum \
                 average vanishes"
            ));
            return Ok(());
        }
    };

    for (grade, pieces, label) in [
        (quad_log, quad_pieces, "quadratic-logarithm"),
        (Grade::LOG, log_pieces, "logarithm"),
    ] {
        let got = profile_entry(profile, grade).normalized()?;
        let mut expected = Expr::zero();
        for (word, num, den) in &pieces {
            expected = expected.add(&word.scale(&base(*num, *den)));
        }
        if pieces.is_empty() {
            if !got.is_empty() {
                return Err(pipeline_error(
                    case,
                    format!("order {n} {label} channel expected empty, found {got}"),
                ));
            }
            continue;
        }
        if !equals_mod_relations(&got, &expected, regime)? {
            return Err(pipeline_error(
                case,
                format!("order {n} {label} channel does not match its closed weights"),
            ));
        }
    }
    notes.push(format!(
        "order {n} boundary channels match their closed weights"
    ));
    Ok(())
}

// ---------------------------------------------------------------------------
// case: heat moments and the residue identity
// ---------------------------------------------------------------------------

/// Assemble the fourth heat coefficient from the moment table and verify it
/// against the cut-off logarithm through the residue identity.
pub fn run_heat_kernel_a4(config: &DeriveConfig) -> Result<DerivationReport> {
    let case = DerivationCase::HeatKernelA4;
    let regime = config.regime.unwrap_or(Regime::Commutative);
    let mut log = StageLog::new();

    if config.heat_depth < 4 {
        return Err(pipeline_error(
            case,
            format!("moment assembly needs depth 4, configured {}", config.heat_depth),
        ));
    }
    let table = HeatKernelTable::build(config.heat_depth, regime)?;
    let anchor = heat_word_power(1, regime)?;
    let mut h = Sha256::new();
    let mut entries = 0usize;
    for r in 0..=table.depth() {
        for two_t in 0..=r {
            let m = table.moment(r, two_t);
            if m.is_empty() {
                continue;
            }
            entries += m.len();
            h.update(format!("{r},{two_t}:").as_bytes());
            h.update(m.digest()?.as_bytes());
        }
    }
    log.stages.push(StageRecord::with_output_digest(
        "heat_moment_table",
        &anchor,
        entries,
        format!("{:x}", h.finalize()),
    )?);
    log.note(
        "the smearing function enters as a central prefactor of every moment in \
         both product regimes"
            .to_string(),
    );

    let a4 = heat_a4(&table)?;
    let clog = heat_log_coefficient(&table)?;
    let chi = chi_zero(&table)?;
    log.record("residue_assembly", &concat(&[a4.clone(), chi.clone()]), &a4)?;

    let residual = a4_identity_residual(&table)?;
    let identity_ok = residual.is_empty();
    if identity_ok {
        log.note(
            "minus half the cut-off logarithm plus the quartic mass moment equals \
             the fourth heat coefficient exactly",
        );
    } else {
        log.note(format!(
            "residue identity fails with residual {}",
            residual.canonical_text()?
        ));
    }

    // Field-free content: the heat coefficient keeps the quartic mass
    // channel, the logarithm keeps none.
    let mut vacuum_term = Term::from_word(vec![WordAtom::regulator()]);
    vacuum_term.coeff = Coefficient::from_ratio(1, 32)
        .times_m2_pow(2)
        .times_pi_inv2(1);
    let vacuum = Expr::from_term(vacuum_term);
    let a4_vacuum_ok = field_free_part(&a4).normalized()?.digest()? == vacuum.normalized()?.digest()?;
    let clog_vacuum_ok = field_free_part(&clog).normalized()?.is_empty();
    if a4_vacuum_ok {
        log.note(
            "at vanishing background the heat coefficient reduces to the smeared \
             quartic mass channel m^4/(32 pi^2)",
        );
    }
    if clog_vacuum_ok {
        log.note("the cut-off logarithm carries no field-free content");
    }
    let mut chi_term = Term::from_word(vec![WordAtom::regulator()]);
    chi_term.coeff = Coefficient::from_ratio(1, 32).times_pi_inv2(1);
    let chi_ok = chi.digest()? == Expr::from_term(chi_term).normalized()?.digest()?;
    if chi_ok {
        log.note("the spectral value at the origin is the smeared unit over 32 pi^2");
    }

    // Cross-check the strength parts of both assemblies.
    let f_strength = {
        let mut e = strength_square(regime);
        for t in &mut e.terms {
            let marker = regime == Regime::Moyal;
            t.word.insert(
                0,
                if marker {
                    WordAtom::regulator().with_shift(true)
                } else {
                    WordAtom::regulator()
                },
            );
        }
        expand_covariant(&e, regime)?
    };
    let a4_m0 = massless_part(&a4).normalized()?;
    let clog_m0 = massless_part(&clog).normalized()?;
    let clog_coeff = reduce_against(&clog_m0, &f_strength, regime)?;
    let clog_ok = clog_coeff
        == Coefficient::from_ratio(1, 96)
            .times_e_pow(2)
            .times_pi_inv2(1);
    log.note(format!(
        "the cut-off logarithm's strength part carries {clog_coeff} per smeared \
         strength square"
    ));

    let expected = Coefficient::from_ratio(-1, 192)
        .times_e_pow(2)
        .times_pi_inv2(1);
    let cmp = compare_with_target(&a4_m0, &f_strength, &expected, regime)?;
    log.stages.push(StageRecord::with_output_digest(
        "covariant_reduction",
        &a4_m0,
        cmp.final_record.terms,
        cmp.final_record.digest.clone(),
    )?);
    log.note(format!(
        "heat coefficient strength part per smeared strength square: {}",
        cmp.coefficient
    ));

    let passed =
        cmp.passed && identity_ok && clog_ok && a4_vacuum_ok && clog_vacuum_ok && chi_ok;
    let profile = DivergenceProfile::new();
    Ok(DerivationReport {
        case: case.name().to_string(),
        config: config.record(regime),
        stages: log.stages,
        profile: ProfileRecord::of(&profile)?,
        final_form: cmp.final_record,
        target: cmp.target_record,
        verdict: verdict(passed),
        notes: log.notes,
    })
}

// ---------------------------------------------------------------------------
// case: deformed product
// ---------------------------------------------------------------------------

/// Logarithmic divergence of the deformed-product boson trace.
pub fn run_moyal_clog(config: &DeriveConfig) -> Result<DerivationReport> {
    let case = DerivationCase::MoyalClog;
    let regime = match config.regime {
        None | Some(Regime::Moyal) => Regime::Moyal,
        Some(Regime::Commutative) => {
            return Err(CalcError::RegimeViolation(
                "the deformed case runs on the star product; the pointwise trace is \
                 its own case"
                    .to_string(),
            ))
        }
    };
    let mut run = resolvent_log_run(case, config.order, regime, false)?;
    let mut notes = std::mem::take(&mut run.log.notes);

    let stripped = shift_normalize_under_integral(&run.log_m0)?.normalized()?;
    run.log
        .stages
        .push(StageRecord::new("shift_normalization", &run.log_m0, &stripped)?);
    notes.push(
        "every field atom of every term carries the common translation marker, \
         which the position integral removes"
            .to_string(),
    );

    // A/B: the same stage list under the pointwise flag must reproduce the
    // sharp-cut-off pipeline record for record, and stripping the markers
    // from the deformed logarithm must land on the pointwise logarithm.
    let pointwise = resolvent_log_run(case, config.order, Regime::Commutative, false)?;
    for (a, b) in run.log.stages.iter().zip(pointwise.log.stages.iter()) {
        if a.name != b.name && a.name != "shift_normalization" {
            return Err(pipeline_error(
                case,
                format!("stage list diverged: {} vs {}", a.name, b.name),
            ));
        }
    }
    if stripped.digest()? != pointwise.log_m0.digest()? {
        return Err(pipeline_error(
            case,
            "marker-stripped logarithm differs from the pointwise logarithm".to_string(),
        ));
    }
    notes.push(
        "after marker stripping the deformed logarithm coefficient is byte-identical \
         to the pointwise one: deformation reaches the result only through the \
         product on the invariant"
            .to_string(),
    );
    notes.push(
        "the rational coordinates carry no deformation-parameter dependence"
            .to_string(),
    );

    let expanded = expand_covariant(&run.log_m0, regime)?;
    run.log
        .stages
        .push(StageRecord::new("strength_expansion", &run.log_m0, &expanded)?);

    let target_base = expand_covariant(&strength_square(regime), regime)?;
    let expected = Coefficient::from_ratio(1, 96)
        .times_e_pow(2)
        .times_pi_inv2(1);
    let cmp = compare_with_target(&expanded, &target_base, &expected, regime)?;
    run.log.stages.push(StageRecord::with_output_digest(
        "covariant_reduction",
        &expanded,
        cmp.final_record.terms,
        cmp.final_record.digest.clone(),
    )?);
    notes.push(format!(
        "logarithm coefficient per star-contracted strength square: {}",
        cmp.coefficient
    ));
    gauge_invariance_check(case, regime, &mut notes)?;

    Ok(DerivationReport {
        case: case.name().to_string(),
        config: config.record(regime),
        stages: run.log.stages,
        profile: ProfileRecord::of(&run.profile)?,
        final_form: cmp.final_record,
        target: cmp.target_record,
        verdict: verdict(cmp.passed),
        notes,
    })
}

// ---------------------------------------------------------------------------
// positive powers
// ---------------------------------------------------------------------------

/// Iteration bound for positive-power symbols.
pub const MAX_POWER_ITERATIONS: usize = 8;

/// Symbol of the `(l+1)`-th positive power of the massive covariant
/// operator, built by applying one exact step per power:
/// multiply by `u + m^2` and subtract the operator word acting on the
/// accumulated symbol.
pub fn positive_power_symbol(l: usize, regime: Regime) -> Result<Expr> {
    if l > MAX_POWER_ITERATIONS {
        return Err(CalcError::RadialStructure(format!(
            "positive power {l} exceeds the iteration bound {MAX_POWER_ITERATIONS}"
        )));
    }
    let mut alloc = IndexAllocator::above(1500);
    let mut sym = Expr::from_term(Term::one());
    for _ in 0..=l {
        let mut next = Expr::zero();
        for t in &sym.terms {
            let mut u = t.clone();
            u.kernel.u_pow += 1;
            next.terms.push(u);
            let mut m = t.clone();
            m.coeff = m.coeff.times_m2_pow(1);
            next.terms.push(m);
        }
        let factor = box_plus_two_ip_d(&mut alloc);
        let acted = evaluate_on_one(&factor.mul(&sym), regime)?;
        sym = next.add(&acted.neg()).normalized()?;
    }
    Ok(sym)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compose::compose;
    use crate::kernel::Kernel;

    fn coeff(n: i64, d: i64) -> Coefficient {
        Coefficient::from_ratio(n, d).times_e_pow(2).times_pi_inv2(1)
    }

    #[test]
    fn case_names_roundtrip() {
        for case in DerivationCase::ALL {
            assert_eq!(DerivationCase::from_name(case.name()), Some(case));
        }
        assert_eq!(DerivationCase::from_name("unknown"), None);
    }

    #[test]
    fn boson_report_hits_the_strength_square_target() {
        let config = DeriveConfig::default();
        let report = run_boson_clog(&config).unwrap();
        assert!(report.passed(), "verdict: {}", report.verdict);
        assert!(report
            .notes
            .iter()
            .any(|n| n.contains("1/96*e^2*pi^-2")));
        assert!(report.notes.iter().any(|n| n.contains("order 2 logarithm")));
        let names: Vec<&str> = report.stages.iter().map(|s| s.name.as_str()).collect();
        assert_eq!(
            names,
            [
                "logarithm_symbol",
                "free_trace_subtraction",
                "angular_average",
                "radial_trace_measure",
                "radial_profile",
                "strength_expansion",
                "covariant_reduction"
            ]
        );

        let again = run_boson_clog(&config).unwrap();
        assert_eq!(report.to_json().unwrap(), again.to_json().unwrap());
    }

    #[test]
    fn boson_rejects_the_deformed_flag() {
        let config = DeriveConfig {
            regime: Some(Regime::Moyal),
            ..DeriveConfig::default()
        };
        assert!(run_boson_clog(&config).is_err());
    }

    #[test]
    fn fermion_report_halves_the_traced_square() {
        let report = run_fermion_clog(&DeriveConfig::default()).unwrap();
        assert!(report.passed(), "verdict: {}", report.verdict);
        assert!(report
            .notes
            .iter()
            .any(|n| n.contains("-1/24*e^2*pi^-2")));
        assert!(report
            .notes
            .iter()
            .any(|n| n.contains("e^2/(16 pi^2)")));
        assert!(report.notes.iter().any(|n| n.contains("p^-5")));
        assert!(report
            .stages
            .iter()
            .any(|s| s.name == "half_spinor_normalization"));
    }

    #[test]
    fn covariant_cutoff_halves_the_sharp_value() {
        let report = run_gauge_invariant_clog(&DeriveConfig::default()).unwrap();
        assert!(report.passed(), "verdict: {}", report.verdict);
        assert!(report
            .notes
            .iter()
            .any(|n| n.contains("1/192*e^2*pi^-2")));
        assert!(report
            .notes
            .iter()
            .any(|n| n.contains("order 5 boundary term carries no logarithm")));
        assert!(report
            .notes
            .iter()
            .any(|n| n.contains("honest two-unit conversion")));
    }

    #[test]
    fn honest_conversion_cancels_the_covariant_logarithm() {
        let config = DeriveConfig {
            convention: LogUnitConvention::Honest,
            ..DeriveConfig::default()
        };
        let report = run_gauge_invariant_clog(&config).unwrap();
        assert!(!report.passed());
        assert!(report
            .notes
            .iter()
            .any(|n| n.contains("scheme")));
        assert!(report
            .notes
            .iter()
            .any(|n| n.contains("contributes -1/96*e^2*pi^-2")));
    }

    #[test]
    fn heat_report_checks_the_residue_identity() {
        let report = run_heat_kernel_a4(&DeriveConfig::default()).unwrap();
        assert!(report.passed(), "verdict: {}", report.verdict);
        assert!(report
            .notes
            .iter()
            .any(|n| n.contains("equals the fourth heat coefficient exactly")));
        assert!(report
            .notes
            .iter()
            .any(|n| n.contains("1/96*e^2*pi^-2")));
        assert!(report
            .notes
            .iter()
            .any(|n| n.contains("-1/192*e^2*pi^-2")));
    }

    #[test]
    fn deformed_report_matches_pointwise_coordinates() {
        let report = run_moyal_clog(&DeriveConfig::default()).unwrap();
        assert!(report.passed(), "verdict: {}", report.verdict);
        assert!(report
            .notes
            .iter()
            .any(|n| n.contains("byte-identical")));
        assert!(report
            .notes
            .iter()
            .any(|n| n.contains("1/96*e^2*pi^-2")));
        assert!(report
            .stages
            .iter()
            .any(|s| s.name == "shift_normalization"));
    }

    #[test]
    fn deformed_case_rejects_the_pointwise_flag() {
        let config = DeriveConfig {
            regime: Some(Regime::Commutative),
            ..DeriveConfig::default()
        };
        assert!(run_moyal_clog(&config).is_err());
    }

    #[test]
    fn positive_power_starts_from_the_single_step() {
        let sym = positive_power_symbol(0, Regime::Commutative).unwrap();
        // u + m^2 minus the one-step action on the constant function.
        let mut alloc = IndexAllocator::above(1500);
        let factor = box_plus_two_ip_d(&mut alloc);
        let mut expected = Expr::zero();
        let mut u = Term::one();
        u.kernel = Kernel::new(1, 0);
        expected.terms.push(u);
        let mut m = Term::one();
        m.coeff = Coefficient::one().times_m2_pow(1);
        expected.terms.push(m);
        let acted = evaluate_on_one(&factor, Regime::Commutative).unwrap().neg();
        let expected = expected.add(&acted).normalized().unwrap();
        assert_eq!(sym.digest().unwrap(), expected.digest().unwrap());
    }

    #[test]
    fn positive_power_free_part_is_binomial() {
        for l in [1usize, 2] {
            let sym = positive_power_symbol(l, Regime::Commutative).unwrap();
            let free = field_free_part(&sym).normalized().unwrap();
            let mut expected = Expr::zero();
            let p = (l + 1) as i64;
            for j in 0..=p {
                let mut binom = BigRational::from_integer(BigInt::from(1));
                for i in 0..j {
                    binom = binom * rational(p - i, i + 1);
                }
                let mut t = Term::one();
                t.kernel = Kernel::new(j, 0);
                t.coeff = Coefficient::one()
                    .scale(&binom)
                    .times_m2_pow((p - j) as i32);
                expected.terms.push(t);
            }
            let expected = expected.normalized().unwrap();
            assert_eq!(free.digest().unwrap(), expected.digest().unwrap());
        }
    }

    #[test]
    fn positive_power_matches_the_composition_oracle() {
        let one = positive_power_symbol(0, Regime::Commutative).unwrap();
        let two = compose(&one, &one, 4).unwrap().normalized().unwrap();
        let three = compose(&one, &two, 4).unwrap().normalized().unwrap();
        let direct = positive_power_symbol(2, Regime::Commutative).unwrap();
        assert_eq!(direct.digest().unwrap(), three.digest().unwrap());
    }

    #[test]
    fn positive_power_respects_the_iteration_bound() {
        assert!(positive_power_symbol(MAX_POWER_ITERATIONS + 1, Regime::Commutative).is_err());
    }

    #[test]
    fn expected_targets_are_the_frozen_rationals() {
        assert_eq!(coeff(1, 96).to_string(), "1/96*e^2*pi^-2");
        assert_eq!(coeff(-1, 24).to_string(), "-1/24*e^2*pi^-2");
        assert_eq!(coeff(1, 192).to_string(), "1/192*e^2*pi^-2");
    }
}
