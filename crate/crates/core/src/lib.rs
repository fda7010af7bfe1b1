//! Verified computation for the two-stage Mann-Whitney test.
//!
//! The crate evaluates the closed-form joint raw moments of the stage-1 and
//! full-sample Mann-Whitney counts (U1, U2) up to total order 4, converts
//! them to mixed cumulants, and calibrates two-stage critical values either
//! exactly (small designs, by enumeration) or through a Cornish-Fisher
//! quantile expansion. An exact enumeration oracle cross-checks every
//! closed form; corrections to the published displays are catalogued in
//! FORMULA_ERRATA.md at the repository root.
//!
//! Arithmetic is generic over the scalar type: `f64` for the floating
//! general case and arbitrary-precision rationals wherever the formulas are
//! rational polynomials, so equality checks are exact.

pub mod cumulants;
pub mod dist;
pub mod error;
pub mod moments;
pub mod oracle;
pub mod pattern;
pub mod pi;
pub mod quantile;
pub mod scalar;
pub mod ustat;

pub use cumulants::{
    mixed_cumulants, paper_aggregates, standardized_shape, CumulantSet, PaperAggregates, Shape,
    ShapeTarget, Weighting,
};
pub use dist::Sampler;
pub use error::{Error, Result};
pub use moments::{
    helper_h_expectation, helper_h_null, helper_k_expectation, helper_k_null, moments_general,
    moments_null, MomentMode, MomentSet,
};
pub use oracle::{
    exact_joint_pmf, pmf_cumulants, pmf_moments, simulate_joint, validate_formulas, JointPmf,
    MomentEstimates, ValidationMode, ValidationReport, Verdict, DEFAULT_BUDGET,
};
pub use pi::{null_indicator_table, null_pi_vector, pi_monte_carlo, pi_plugin_from_data, Pi,
    PiEstimate, PiVector};
pub use quantile::{
    cornish_fisher_quantile, critical_values_cf, critical_values_exact, normal_inverse_cdf,
    overall_size, CalibrationMethod, CfOptions, CriticalValuePair, SizeMethod,
};
pub use ustat::{
    mann_whitney_u, two_stage_decision, two_stage_statistics, Decision, Outcome, SampleDesign,
    TwoStageData,
};

/// Exact rational scalar used throughout the null-mode paths.
pub type Rational = num_rational::BigRational;

/// Moment set in exact arithmetic.
pub type ExactMoments = MomentSet<Rational>;

/// Moment set in floating arithmetic.
pub type RealMoments = MomentSet<f64>;

/// Cumulant set in exact arithmetic.
pub type ExactCumulants = CumulantSet<Rational>;

/// Cumulant set in floating arithmetic.
pub type RealCumulants = CumulantSet<f64>;
