//! Reduction from geometric unit-disk independent set to Solow-Polasky
//! subset selection.
//!
//! A source instance `(P, k)` is scaled by `L` so that every pair at
//! distance `<= 1` gets similarity at least `q = exp(-theta0 L)`, every pair
//! at distance `> 1` gets similarity at most `r = exp(-theta0 L (1 + eta))`,
//! and every similarity is at most `rho = exp(-theta0 L delta) < 1/(4k)`.
//! With `q > k(k-1) r` the independent k-subsets then have strictly larger
//! SP than all others.
//!
//! Two ways of picking `L`:
//! - analytic: from the measured margins, `L = (1 + slack) * max(ln(4k) /
//!   (theta0 delta), ln(k(k-1)) / (theta0 eta))`. The image is materialized
//!   and can be evaluated.
//! - bit complexity: the integer `L = c * 2^(12B) * ceil(log2 M)` that only
//!   depends on the coordinate bit-length `B`. Similarities underflow by a
//!   huge margin, so the image stays symbolic and everything is checked on
//!   exponents.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::ToPrimitive;
use thiserror::Error;

use crate::bounds::{certify_gap_log, BoundsError, GapCertificate, LogBoxRegime};
use crate::diversity::{sp_of_subset, KernelParams, SignedLog};
use crate::geometry::{
    bit_length, margins, unit_disk_graph, GeometryError, PointSet, ScaleFactor, UnitDiskGraph,
};
use crate::solvers::{sp_select_exact, SelectOptions, Selection, SelectionResult, SolverError};
use crate::subsets::{binomial, fold_subsets};

pub const DEFAULT_SLACK: f64 = 0.1;

/// Relative slack allowed when checking measured deficits against the
/// certificate thresholds (equality is attained by extremal subsets).
pub const THRESHOLD_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReductionError {
    #[error("subset size must be at least 2 (sizes 0 and 1 are decided directly), got {0}")]
    SizeTooSmall(usize),
    #[error("subset size {k} exceeds the {n} source points")]
    SizeTooLarge { k: usize, n: usize },
    #[error("slack must be positive and finite, got {0}")]
    InvalidSlack(f64),
    #[error("scale factor {scale} does not exceed the required threshold {threshold}")]
    ScaleTooSmall { scale: f64, threshold: f64 },
    #[error("bit-complexity scaling needs exact rational coordinates")]
    FloatingBackend,
    #[error("scale plan condition failed: {0}")]
    ConditionFailed(&'static str),
    #[error("gap certificate does not separate the classes")]
    NotSeparated,
    #[error("instance has a symbolic image; SP evaluation needs the analytic mode")]
    SymbolicImage,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Bounds(#[from] BoundsError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScaleMode {
    Analytic,
    BitComplexity,
}

/// How [`reduce`] chooses the scale factor.
#[derive(Clone, Debug, PartialEq)]
pub enum ReductionMode {
    Analytic {
        slack: f64,
    },
    /// A caller-chosen scale, validated against the analytic threshold.
    Fixed(ScaleFactor),
    BitComplexity,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ScaleValue {
    Real(f64),
    Exact(BigRational),
    Integer(BigInt),
}

impl ScaleValue {
    pub fn to_f64(&self) -> f64 {
        match self {
            ScaleValue::Real(v) => *v,
            ScaleValue::Exact(v) => v.to_f64().unwrap_or(f64::INFINITY),
            ScaleValue::Integer(v) => v.to_f64().unwrap_or(f64::INFINITY),
        }
    }
}

/// Quantities of the bit-complexity scale.
#[derive(Clone, Debug, PartialEq)]
pub struct BitPlan {
    pub bit_length: u64,
    /// `2^(-12B)`.
    pub epsilon: BigRational,
    /// `max(4k, k(k-1) + 1)`.
    pub m: u128,
    /// `ceil(ln 2 / theta0)`.
    pub c_theta0: BigInt,
    /// `ceil(log2 M)`.
    pub log2_m_ceil: u64,
    /// `L * epsilon = c * ceil(log2 M)`, exact.
    pub scale_times_epsilon: BigInt,
    /// `theta0 * L * epsilon >= ln M`.
    pub exponent_condition: bool,
    /// `delta >= epsilon` and `eta >= epsilon`, decided exactly.
    pub margin_condition: bool,
    pub scale_bits: u64,
    /// `12B + bits(c) + bits(ceil(log2 M)) + 2`.
    pub scale_bits_bound: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalePlan {
    pub mode: ScaleMode,
    pub scale: ScaleValue,
    pub theta0: f64,
    pub k: usize,
    pub delta: f64,
    pub eta: f64,
    pub eta_is_sentinel: bool,
    /// `max(ln(4k) / (theta0 delta), ln(k(k-1)) / (theta0 eta))`.
    pub threshold: f64,
    pub slack: Option<f64>,
    /// `-theta0 L delta`.
    pub log_rho: f64,
    /// `-theta0 L (1 + eta)`.
    pub log_r: f64,
    /// `-theta0 L`.
    pub log_q: f64,
    /// `theta0 L eta`, computed as a product rather than `log_q - log_r`.
    pub log_q_over_r: f64,
    /// `rho < 1/(4k)`.
    pub rho_condition: bool,
    /// `theta0 L eta > ln(k(k-1))`.
    pub ratio_condition: bool,
    pub bits: Option<BitPlan>,
}

fn analytic_threshold(k: usize, theta0: f64, delta: f64, eta: f64) -> f64 {
    let kf = k as f64;
    let a = (4.0 * kf).ln() / (theta0 * delta);
    let b = (kf * (kf - 1.0)).ln() / (theta0 * eta);
    a.max(b)
}

fn check_k(points: &PointSet, k: usize) -> Result<(), ReductionError> {
    if k < 2 {
        return Err(ReductionError::SizeTooSmall(k));
    }
    if k > points.len() {
        return Err(ReductionError::SizeTooLarge { k, n: points.len() });
    }
    Ok(())
}

fn finish_plan(
    mode: ScaleMode,
    scale: ScaleValue,
    params: &KernelParams,
    k: usize,
    m: &crate::geometry::MarginReport,
    slack: Option<f64>,
    bits: Option<BitPlan>,
) -> ScalePlan {
    let theta0 = params.theta0();
    let l = scale.to_f64();
    let kf = k as f64;
    let log_q = -theta0 * l;
    let log_q_over_r = theta0 * l * m.eta;
    let log_rho = -theta0 * l * m.delta;
    ScalePlan {
        mode,
        scale,
        theta0,
        k,
        delta: m.delta,
        eta: m.eta,
        eta_is_sentinel: m.eta_is_sentinel,
        threshold: analytic_threshold(k, theta0, m.delta, m.eta),
        slack,
        log_rho,
        log_r: log_q - log_q_over_r,
        log_q,
        log_q_over_r,
        rho_condition: log_rho < -(4.0 * kf).ln(),
        ratio_condition: log_q_over_r > (kf * (kf - 1.0)).ln(),
        bits,
    }
}

fn require_conditions(plan: &ScalePlan) -> Result<(), ReductionError> {
    if !plan.rho_condition {
        return Err(ReductionError::ConditionFailed(
            "exp(-theta0 L delta) < 1/(4k)",
        ));
    }
    if !plan.ratio_condition {
        return Err(ReductionError::ConditionFailed("theta0 L eta > ln(k(k-1))"));
    }
    Ok(())
}

/// Analytic scale with `L = (1 + slack) * threshold`; `slack` must be
/// positive because the threshold inequality is strict.
pub fn plan_analytic(
    points: &PointSet,
    k: usize,
    params: &KernelParams,
    slack: f64,
) -> Result<ScalePlan, ReductionError> {
    check_k(points, k)?;
    if !(slack > 0.0 && slack.is_finite()) {
        return Err(ReductionError::InvalidSlack(slack));
    }
    let m = margins(points)?;
    let threshold = analytic_threshold(k, params.theta0(), m.delta, m.eta);
    let l = (1.0 + slack) * threshold;
    let plan = finish_plan(
        ScaleMode::Analytic,
        ScaleValue::Real(l),
        params,
        k,
        &m,
        Some(slack),
        None,
    );
    require_conditions(&plan)?;
    Ok(plan)
}

/// Analytic plan with a caller-chosen scale, which must exceed the
/// threshold strictly.
pub fn plan_with_scale(
    points: &PointSet,
    k: usize,
    params: &KernelParams,
    scale: ScaleFactor,
) -> Result<ScalePlan, ReductionError> {
    check_k(points, k)?;
    let m = margins(points)?;
    let threshold = analytic_threshold(k, params.theta0(), m.delta, m.eta);
    let value = match scale {
        ScaleFactor::Exact(v) => ScaleValue::Exact(v),
        ScaleFactor::Float(v) => ScaleValue::Real(v),
    };
    let l = value.to_f64();
    if !(l > threshold) {
        return Err(ReductionError::ScaleTooSmall {
            scale: l,
            threshold,
        });
    }
    let plan = finish_plan(ScaleMode::Analytic, value, params, k, &m, None, None);
    require_conditions(&plan)?;
    Ok(plan)
}

/// `ceil(ln 2 / theta0)`, nudged up if rounding in the quotient landed it
/// one short.
fn c_theta0(theta0: f64) -> BigInt {
    let mut c = (std::f64::consts::LN_2 / theta0).ceil().max(1.0);
    if theta0 * c < std::f64::consts::LN_2 {
        c += 1.0;
    }
    BigInt::from(c as u128)
}

/// Integer scale depending only on the coordinate bit-length.
pub fn plan_bit_complexity(
    points: &PointSet,
    k: usize,
    params: &KernelParams,
) -> Result<ScalePlan, ReductionError> {
    check_k(points, k)?;
    let m = margins(points)?;
    let exact = m.exact.as_ref().ok_or(ReductionError::FloatingBackend)?;
    let b = exact.bit_length;
    let kk = k as u128;
    let big_m = (4 * kk).max(kk * (kk - 1) + 1);
    let log2_m_ceil = u64::from(128 - (big_m - 1).leading_zeros());
    let c = c_theta0(params.theta0());
    let scale_times_epsilon = &c * BigInt::from(log2_m_ceil);
    let l: BigInt = &scale_times_epsilon << (12 * b as usize);
    let lhs = params.theta0() * scale_times_epsilon.to_f64().unwrap_or(f64::INFINITY);
    let bits = BitPlan {
        bit_length: b,
        epsilon: exact.epsilon.clone(),
        m: big_m,
        log2_m_ceil,
        scale_times_epsilon,
        exponent_condition: lhs >= (big_m as f64).ln(),
        margin_condition: exact.bit_margin_holds(),
        scale_bits: l.bits(),
        scale_bits_bound: 12 * b + bit_length(&c) + bit_length(&BigInt::from(log2_m_ceil)) + 2,
        c_theta0: c,
    };
    if !bits.exponent_condition {
        return Err(ReductionError::ConditionFailed("theta0 L epsilon >= ln M"));
    }
    if !bits.margin_condition {
        return Err(ReductionError::ConditionFailed(
            "delta >= epsilon and eta >= epsilon",
        ));
    }
    let plan = finish_plan(
        ScaleMode::BitComplexity,
        ScaleValue::Integer(l),
        params,
        k,
        &m,
        None,
        Some(bits),
    );
    require_conditions(&plan)?;
    Ok(plan)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReductionInstance {
    pub source: PointSet,
    pub k: usize,
    pub params: KernelParams,
    pub plan: ScalePlan,
    /// `X = L P`; `None` in bit-complexity mode, where the image is the
    /// pair `(P, L)`.
    pub image: Option<PointSet>,
    pub graph: UnitDiskGraph,
    pub certificate: GapCertificate,
}

/// Builds the scaled instance and its separation certificate. Fails if the
/// certificate does not separate.
pub fn reduce(
    points: &PointSet,
    k: usize,
    params: &KernelParams,
    mode: ReductionMode,
) -> Result<ReductionInstance, ReductionError> {
    let plan = match mode {
        ReductionMode::Analytic { slack } => plan_analytic(points, k, params, slack)?,
        ReductionMode::Fixed(scale) => plan_with_scale(points, k, params, scale)?,
        ReductionMode::BitComplexity => plan_bit_complexity(points, k, params)?,
    };
    let image = match &plan.scale {
        ScaleValue::Real(l) => Some(points.scale(*l)?),
        ScaleValue::Exact(l) => Some(points.scale(l.clone())?),
        ScaleValue::Integer(_) => None,
    };
    let graph = unit_disk_graph(points);
    let certificate = if graph.edge_count() == 0 {
        GapCertificate::vacuous(k, plan.log_rho, plan.log_r)
    } else {
        certify_gap_log(&LogBoxRegime::new(
            k,
            plan.log_rho,
            plan.log_q,
            plan.log_q_over_r,
        )?)
    };
    if !certificate.separated {
        return Err(ReductionError::NotSeparated);
    }
    Ok(ReductionInstance {
        source: points.clone(),
        k,
        params: *params,
        plan,
        image,
        graph,
        certificate,
    })
}

/// Does a subset with this deficit meet the good-class bound
/// `SP >= k / (1 + (k-1) r)`?
fn meets_good_bound(deficit: &SignedLog, cert: &GapCertificate) -> bool {
    deficit.sign <= 0 || deficit.ln_abs <= cert.log_good_deficit() + THRESHOLD_TOLERANCE
}

fn meets_bad_bound(deficit: &SignedLog, cert: &GapCertificate) -> bool {
    deficit.sign > 0 && deficit.ln_abs >= cert.log_bad_deficit() - THRESHOLD_TOLERANCE
}

#[derive(Clone, Debug, PartialEq)]
pub struct Decision {
    pub accept: bool,
    pub optimum: SelectionResult,
    pub good_lower: f64,
    pub bad_upper: f64,
    /// Source indices of the optimal subset when accepted.
    pub witness: Option<Vec<usize>>,
}

/// Answers the unit-disk question by SP selection on the image: accept iff
/// the optimum meets the good-class lower bound.
pub fn decide_via_sp(
    inst: &ReductionInstance,
    options: &SelectOptions,
) -> Result<Decision, ReductionError> {
    let image = inst.image.as_ref().ok_or(ReductionError::SymbolicImage)?;
    let optimum = sp_select_exact(image, inst.k, &inst.params, options)?;
    // rank by deficit; `best` is only the lexicographic representative
    let top = optimum
        .all_optima
        .iter()
        .max_by(|a, b| a.cmp_objective(b).then_with(|| b.indices.cmp(&a.indices)))
        .expect("non-empty optima");
    let accept = meets_good_bound(&top.deficit, &inst.certificate);
    Ok(Decision {
        accept,
        witness: accept.then(|| top.indices.clone()),
        good_lower: inst.certificate.good_lower,
        bad_upper: inst.certificate.bad_upper,
        optimum,
    })
}

/// Exhaustive check of the separation on one instance.
#[derive(Clone, Debug, PartialEq)]
pub struct VerificationReport {
    pub instance: ReductionInstance,
    /// Independent k-subsets of the source, sorted.
    pub independent_sets: Vec<Vec<usize>>,
    /// k-subsets of the image with `SP >= good_lower`, sorted.
    pub optimal_class: Vec<Vec<usize>>,
    /// Strict maximizer by objective (ties to the smallest indices).
    pub argmax: Selection,
    /// Result of the exact selector on the image.
    pub selection: SelectionResult,
    pub min_good: Option<Selection>,
    pub max_bad: Option<Selection>,
    pub evaluated_count: u128,
    /// `optimal_class == independent_sets`.
    pub classes_match: bool,
    /// The maximizer is independent whenever some independent set exists.
    pub argmax_independent: bool,
    /// Every good subset has strictly larger SP than every bad subset.
    pub strict_separation: bool,
    /// Good subsets meet `good_lower`, bad subsets stay under `bad_upper`.
    pub thresholds_respected: bool,
    pub passed: bool,
}

struct Evaluated {
    good: bool,
    selection: Selection,
}

/// Builds the analytic instance and compares, over every k-subset, the SP
/// ranking on the image with independence in the source.
pub fn verify_reduction(
    points: &PointSet,
    k: usize,
    params: &KernelParams,
    slack: f64,
    options: &SelectOptions,
) -> Result<VerificationReport, ReductionError> {
    verify_instance(
        reduce(points, k, params, ReductionMode::Analytic { slack })?,
        options,
    )
}

/// As [`verify_reduction`], for an already reduced analytic instance.
pub fn verify_instance(
    instance: ReductionInstance,
    options: &SelectOptions,
) -> Result<VerificationReport, ReductionError> {
    let image = instance
        .image
        .as_ref()
        .ok_or(ReductionError::SymbolicImage)?;
    let n = image.len();
    let k = instance.k;
    let total = binomial(n, k).unwrap_or(u128::MAX);
    if total > options.budget {
        return Err(SolverError::BudgetExceeded {
            required: total,
            budget: options.budget,
        }
        .into());
    }
    let graph = &instance.graph;
    let params = instance.params;
    let evaluated: Result<Vec<Evaluated>, SolverError> = fold_subsets(
        n,
        k,
        options.execution,
        || Ok(Vec::new()),
        |acc: Result<Vec<Evaluated>, SolverError>, subset| {
            let mut acc = acc?;
            let w = sp_of_subset(image, subset, &params).map_err(|source| SolverError::Subset {
                indices: subset.to_vec(),
                source,
            })?;
            acc.push(Evaluated {
                good: graph.is_independent(subset),
                selection: Selection {
                    indices: subset.to_vec(),
                    value: w.sp_value,
                    deficit: w.deficit,
                },
            });
            Ok(acc)
        },
        |a, b| match (a, b) {
            (Ok(mut a), Ok(b)) => {
                a.extend(b);
                Ok(a)
            }
            (Err(a), Err(b)) => Err(std::cmp::min_by_key(a, b, |e| match e {
                SolverError::Subset { indices, .. } => indices.clone(),
                _ => Vec::new(),
            })),
            (Err(e), _) | (_, Err(e)) => Err(e),
        },
    );
    let mut evaluated = evaluated?;
    evaluated.sort_by(|a, b| a.selection.indices.cmp(&b.selection.indices));
    let cert = &instance.certificate;

    let independent_sets: Vec<Vec<usize>> = evaluated
        .iter()
        .filter(|e| e.good)
        .map(|e| e.selection.indices.clone())
        .collect();
    let optimal_class: Vec<Vec<usize>> = evaluated
        .iter()
        .filter(|e| meets_good_bound(&e.selection.deficit, cert))
        .map(|e| e.selection.indices.clone())
        .collect();
    let by_objective = |a: &&Evaluated, b: &&Evaluated| {
        a.selection
            .cmp_objective(&b.selection)
            .then_with(|| b.selection.indices.cmp(&a.selection.indices))
    };
    let argmax = evaluated
        .iter()
        .max_by(by_objective)
        .expect("k <= n")
        .selection
        .clone();
    let min_good = evaluated
        .iter()
        .filter(|e| e.good)
        .min_by(by_objective)
        .map(|e| e.selection.clone());
    let max_bad = evaluated
        .iter()
        .filter(|e| !e.good)
        .max_by(by_objective)
        .map(|e| e.selection.clone());

    let classes_match = optimal_class == independent_sets;
    let argmax_independent = independent_sets.is_empty() || graph.is_independent(&argmax.indices);
    let strict_separation = match (&min_good, &max_bad) {
        (Some(g), Some(b)) => g.deficit.total_cmp(&b.deficit).is_lt(),
        _ => true,
    };
    let thresholds_respected = evaluated.iter().all(|e| {
        if e.good {
            meets_good_bound(&e.selection.deficit, cert)
        } else {
            meets_bad_bound(&e.selection.deficit, cert)
        }
    });
    let selection = sp_select_exact(image, k, &params, options)?;
    let passed = cert.separated
        && classes_match
        && argmax_independent
        && strict_separation
        && thresholds_respected;
    Ok(VerificationReport {
        independent_sets,
        optimal_class,
        argmax,
        selection,
        min_good,
        max_bad,
        evaluated_count: evaluated.len() as u128,
        classes_match,
        argmax_independent,
        strict_separation,
        thresholds_respected,
        passed,
        instance,
    })
}

/// The three-point source instance `{(0,0), (1,0), (0,3/4)}`.
pub fn triangle_instance() -> PointSet {
    use crate::geometry::Point2;
    PointSet::rational(vec![
        Point2::from_fractions(0, 1, 0, 1),
        Point2::from_fractions(1, 1, 0, 1),
        Point2::from_fractions(0, 1, 3, 4),
    ])
    .expect("distinct points")
}

/// Scale used with [`triangle_instance`] in the worked example.
pub fn triangle_scale() -> ScaleFactor {
    ScaleFactor::Exact(BigRational::from_integer(BigInt::from(3)))
}

impl ScalePlan {
    /// `L` as an exact rational when it has one.
    pub fn scale_exact(&self) -> Option<BigRational> {
        match &self.scale {
            ScaleValue::Real(v) => BigRational::from_float(*v),
            ScaleValue::Exact(v) => Some(v.clone()),
            ScaleValue::Integer(v) => Some(BigRational::from_integer(v.clone())),
        }
    }
}
