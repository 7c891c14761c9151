//! Motility functions γ(s) and the numerical audit of their structural hypotheses.
//!
//! A motility must be positive, non-increasing, convex, with a non-positive third
//! derivative, and must satisfy two supremum bounds:
//!
//! * `−2γ′(s) + γ″(s)s ≤ μ₀ < μ`
//! * `γ′(s)² / γ(s) ≤ c_γ < ∞`
//!
//! The suprema are approximated by a dense uniform grid search on `[0, s_max]`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MotilityError {
    #[error("motility evaluated at negative argument s = {0}")]
    NegativeArgument(f64),
    #[error("invalid motility parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid audit range: {0}")]
    InvalidAudit(String),
}

/// γ and its first three derivatives at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Derivatives {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
}

impl Derivatives {
    pub fn as_array(&self) -> [f64; 4] {
        [self.value, self.d1, self.d2, self.d3]
    }
}

type CustomFn = dyn Fn(f64) -> Derivatives + Send + Sync;

/// Built-in motility families plus user-supplied closed forms.
#[derive(Clone)]
pub enum MotilityFamily {
    /// `e^{−αs}`
    Exponential { alpha: f64 },
    /// `(ε + s)^{−α}`
    InversePower { epsilon: f64, alpha: f64 },
    Constant { c: f64 },
    /// Caller supplies all four derivatives.
    Custom { name: String, eval: Arc<CustomFn> },
}

impl fmt::Debug for MotilityFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Exponential { alpha } => write!(f, "Exponential(alpha={alpha})"),
            Self::InversePower { epsilon, alpha } => {
                write!(f, "InversePower(epsilon={epsilon}, alpha={alpha})")
            }
            Self::Constant { c } => write!(f, "Constant(c={c})"),
            Self::Custom { name, .. } => write!(f, "Custom({name})"),
        }
    }
}

/// Serializable description of a motility; custom closures cannot round-trip and
/// are recorded by name only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum MotilitySpec {
    Exponential { alpha: f64 },
    InversePower { epsilon: f64, alpha: f64 },
    Constant { c: f64 },
    Custom { name: String },
}

#[derive(Debug, Clone)]
pub struct MotilityFunction {
    family: MotilityFamily,
}

impl MotilityFunction {
    pub fn exponential(alpha: f64) -> Result<Self, MotilityError> {
        Self::new(MotilityFamily::Exponential { alpha })
    }

    pub fn inverse_power(epsilon: f64, alpha: f64) -> Result<Self, MotilityError> {
        Self::new(MotilityFamily::InversePower { epsilon, alpha })
    }

    pub fn constant(c: f64) -> Result<Self, MotilityError> {
        Self::new(MotilityFamily::Constant { c })
    }

    pub fn custom<F>(name: impl Into<String>, eval: F) -> Self
    where
        F: Fn(f64) -> Derivatives + Send + Sync + 'static,
    {
        Self {
            family: MotilityFamily::Custom {
                name: name.into(),
                eval: Arc::new(eval),
            },
        }
    }

    pub fn new(family: MotilityFamily) -> Result<Self, MotilityError> {
        let positive = |name: &str, x: f64| {
            if x.is_finite() && x > 0.0 {
                Ok(())
            } else {
                Err(MotilityError::InvalidParameter(format!(
                    "{name} must be positive and finite, got {x}"
                )))
            }
        };
        match &family {
            MotilityFamily::Exponential { alpha } => positive("alpha", *alpha)?,
            MotilityFamily::InversePower { epsilon, alpha } => {
                positive("epsilon", *epsilon)?;
                positive("alpha", *alpha)?;
            }
            MotilityFamily::Constant { c } => positive("c", *c)?,
            MotilityFamily::Custom { .. } => {}
        }
        Ok(Self { family })
    }

    pub fn from_spec(spec: &MotilitySpec) -> Result<Self, MotilityError> {
        match spec {
            MotilitySpec::Exponential { alpha } => Self::exponential(*alpha),
            MotilitySpec::InversePower { epsilon, alpha } => Self::inverse_power(*epsilon, *alpha),
            MotilitySpec::Constant { c } => Self::constant(*c),
            MotilitySpec::Custom { name } => Err(MotilityError::InvalidParameter(format!(
                "custom motility '{name}' cannot be built from a description"
            ))),
        }
    }

    pub fn spec(&self) -> MotilitySpec {
        match &self.family {
            MotilityFamily::Exponential { alpha } => MotilitySpec::Exponential { alpha: *alpha },
            MotilityFamily::InversePower { epsilon, alpha } => MotilitySpec::InversePower {
                epsilon: *epsilon,
                alpha: *alpha,
            },
            MotilityFamily::Constant { c } => MotilitySpec::Constant { c: *c },
            MotilityFamily::Custom { name, .. } => MotilitySpec::Custom { name: name.clone() },
        }
    }

    pub fn family(&self) -> &MotilityFamily {
        &self.family
    }

    /// Evaluates γ, γ′, γ″, γ‴ at `s ≥ 0`.
    pub fn eval(&self, s: f64) -> Result<Derivatives, MotilityError> {
        if !(s >= 0.0) {
            return Err(MotilityError::NegativeArgument(s));
        }
        Ok(self.eval_unchecked(s))
    }

    /// Closed-form evaluation without the domain check. The steppers call this in
    /// their inner loops where slightly negative undershoot must be reported by the
    /// positivity monitor rather than aborting the run.
    #[inline]
    pub fn eval_unchecked(&self, s: f64) -> Derivatives {
        match &self.family {
            MotilityFamily::Exponential { alpha } => {
                let e = (-alpha * s).exp();
                Derivatives {
                    value: e,
                    d1: -alpha * e,
                    d2: alpha * alpha * e,
                    d3: -alpha * alpha * alpha * e,
                }
            }
            MotilityFamily::InversePower { epsilon, alpha } => {
                let base = epsilon + s;
                let value = base.powf(-alpha);
                let d1 = -alpha * value / base;
                let d2 = -(alpha + 1.0) * d1 / base;
                let d3 = -(alpha + 2.0) * d2 / base;
                Derivatives { value, d1, d2, d3 }
            }
            MotilityFamily::Constant { c } => Derivatives {
                value: *c,
                d1: 0.0,
                d2: 0.0,
                d3: 0.0,
            },
            MotilityFamily::Custom { eval, .. } => eval(s),
        }
    }

    #[inline]
    pub fn value(&self, s: f64) -> f64 {
        match &self.family {
            MotilityFamily::Exponential { alpha } => (-alpha * s).exp(),
            MotilityFamily::Constant { c } => *c,
            _ => self.eval_unchecked(s).value,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Hypothesis {
    /// γ strictly positive
    Positive,
    /// γ′ ≤ 0
    NonIncreasing,
    /// γ″ ≥ 0
    Convex,
    /// γ‴ ≤ 0
    ThirdDerivative,
    /// `sup(−2γ′ + γ″s) < μ`
    GrowthDominance,
    /// `sup γ′²/γ < ∞`
    FiniteCGamma,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignViolation {
    pub hypothesis: Hypothesis,
    pub s: f64,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignChecks {
    pub positive: bool,
    pub non_increasing: bool,
    pub convex: bool,
    pub third_derivative: bool,
}

impl SignChecks {
    pub fn all(&self) -> bool {
        self.positive && self.non_increasing && self.convex && self.third_derivative
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisAudit {
    /// Grid maximum of `−2γ′(s) + γ″(s)s`.
    pub mu0_hat: f64,
    /// Grid maximum of `γ′(s)² / γ(s)`.
    pub c_gamma_hat: f64,
    pub gamma_min: f64,
    pub sign_checks: SignChecks,
    /// First offending point per failed sign hypothesis.
    pub violations: Vec<SignViolation>,
    pub s_max: f64,
    pub grid_points: usize,
    pub mu: f64,
    /// `μ − mu0_hat`
    pub margin: f64,
    pub mu0_max_at_boundary: bool,
    pub c_gamma_max_at_boundary: bool,
    pub passed: bool,
}

impl HypothesisAudit {
    /// The growth-dominance hypothesis alone (`mu0_hat < μ`).
    pub fn growth_dominance(&self) -> bool {
        self.mu0_hat < self.mu
    }
}

pub const DEFAULT_AUDIT_S_MAX: f64 = 50.0;
pub const DEFAULT_AUDIT_POINTS: usize = 1_000_000;

pub fn audit_hypotheses(
    gamma: &MotilityFunction,
    mu: f64,
    s_max: f64,
    n_points: usize,
) -> Result<HypothesisAudit, MotilityError> {
    if !(s_max > 0.0 && s_max.is_finite()) {
        return Err(MotilityError::InvalidAudit(format!(
            "s_max must be positive and finite, got {s_max}"
        )));
    }
    if n_points < 1000 {
        return Err(MotilityError::InvalidAudit(format!(
            "at least 1000 grid points required, got {n_points}"
        )));
    }
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(MotilityError::InvalidAudit(format!(
            "mu must be positive and finite, got {mu}"
        )));
    }

    let mut signs = SignChecks {
        positive: true,
        non_increasing: true,
        convex: true,
        third_derivative: true,
    };
    let mut violations = Vec::new();
    let mut mu0_hat = f64::NEG_INFINITY;
    let mut mu0_arg = 0usize;
    let mut c_gamma_hat = f64::NEG_INFINITY;
    let mut c_gamma_arg = 0usize;
    let mut gamma_min = f64::INFINITY;

    let last = n_points - 1;
    for i in 0..n_points {
        let s = s_max * i as f64 / last as f64;
        let d = gamma.eval_unchecked(s);

        let mut flag = |ok: &mut bool, hyp: Hypothesis, bad: bool, value: f64| {
            if bad && *ok {
                *ok = false;
                violations.push(SignViolation {
                    hypothesis: hyp,
                    s,
                    value,
                });
            }
        };
        flag(&mut signs.positive, Hypothesis::Positive, !(d.value > 0.0), d.value);
        flag(&mut signs.non_increasing, Hypothesis::NonIncreasing, d.d1 > 0.0, d.d1);
        flag(&mut signs.convex, Hypothesis::Convex, d.d2 < 0.0, d.d2);
        flag(&mut signs.third_derivative, Hypothesis::ThirdDerivative, d.d3 > 0.0, d.d3);

        gamma_min = gamma_min.min(d.value);
        let growth = -2.0 * d.d1 + d.d2 * s;
        if growth > mu0_hat {
            mu0_hat = growth;
            mu0_arg = i;
        }
        let cg = if d.value > 0.0 {
            d.d1 * d.d1 / d.value
        } else {
            f64::INFINITY
        };
        if cg > c_gamma_hat {
            c_gamma_hat = cg;
            c_gamma_arg = i;
        }
    }

    let passed =
        signs.all() && gamma_min > 0.0 && mu0_hat < mu && c_gamma_hat.is_finite();
    Ok(HypothesisAudit {
        mu0_hat,
        c_gamma_hat,
        gamma_min,
        sign_checks: signs,
        violations,
        s_max,
        grid_points: n_points,
        mu,
        margin: mu - mu0_hat,
        mu0_max_at_boundary: mu0_arg == last,
        c_gamma_max_at_boundary: c_gamma_arg == last,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn exponential_at_zero_alternates() {
        let g = MotilityFunction::exponential(1.0).unwrap();
        assert_eq!(g.eval(0.0).unwrap().as_array(), [1.0, -1.0, 1.0, -1.0]);
    }

    #[test]
    fn constant_has_vanishing_derivatives() {
        let g = MotilityFunction::constant(0.5).unwrap();
        assert_eq!(g.eval(3.0).unwrap().as_array(), [0.5, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn inverse_power_closed_form() {
        let g = MotilityFunction::inverse_power(1.0, 1.0).unwrap();
        let d = g.eval(0.0).unwrap().as_array();
        for (got, want) in d.iter().zip([1.0, -1.0, 2.0, -6.0]) {
            assert!(close(*got, want, 1e-14), "{d:?}");
        }
    }

    #[test]
    fn rejects_negative_argument_and_bad_parameters() {
        let g = MotilityFunction::exponential(1.0).unwrap();
        assert_eq!(g.eval(-1.0), Err(MotilityError::NegativeArgument(-1.0)));
        assert!(g.eval(f64::NAN).is_err());
        assert!(MotilityFunction::exponential(0.0).is_err());
        assert!(MotilityFunction::inverse_power(-1.0, 1.0).is_err());
        assert!(MotilityFunction::inverse_power(1.0, 0.0).is_err());
        assert!(MotilityFunction::constant(0.0).is_err());
    }

    #[test]
    fn audit_exponential_small_alpha_passes() {
        let g = MotilityFunction::exponential(0.1).unwrap();
        let audit = audit_hypotheses(&g, 1.0, 50.0, DEFAULT_AUDIT_POINTS).unwrap();
        assert!(close(audit.mu0_hat, 0.2, 1e-12), "{}", audit.mu0_hat);
        assert!(close(audit.c_gamma_hat, 0.01, 1e-12), "{}", audit.c_gamma_hat);
        assert!(audit.passed);
        assert!(!audit.mu0_max_at_boundary);
        assert!(close(audit.margin, 0.8, 1e-12));
    }

    #[test]
    fn audit_constant_passes_trivially() {
        let g = MotilityFunction::constant(1.0).unwrap();
        let audit = audit_hypotheses(&g, 0.5, 50.0, 10_000).unwrap();
        assert_eq!(audit.mu0_hat, 0.0);
        assert_eq!(audit.c_gamma_hat, 0.0);
        assert!(audit.passed);
    }

    #[test]
    fn audit_exponential_unit_alpha_fails_growth_dominance() {
        let g = MotilityFunction::exponential(1.0).unwrap();
        let audit = audit_hypotheses(&g, 1.0, 50.0, 100_000).unwrap();
        assert!(close(audit.mu0_hat, 2.0, 1e-12));
        assert!(audit.sign_checks.all());
        assert!(!audit.growth_dominance());
        assert!(!audit.passed);
    }

    #[test]
    fn audit_reports_sign_violation_location() {
        // Increasing motility breaks γ′ ≤ 0 everywhere after s = 0.
        let g = MotilityFunction::custom("increasing", |s| Derivatives {
            value: 1.0 + s,
            d1: 1.0,
            d2: 0.0,
            d3: 0.0,
        });
        let audit = audit_hypotheses(&g, 1.0, 10.0, 1000).unwrap();
        assert!(!audit.passed);
        assert!(!audit.sign_checks.non_increasing);
        assert_eq!(audit.violations[0].hypothesis, Hypothesis::NonIncreasing);
        assert_eq!(audit.violations[0].s, 0.0);
    }

    #[test]
    fn audit_flags_supremum_at_range_end() {
        // −2γ′ + γ″ s grows linearly for this (non-admissible) convex motility.
        let g = MotilityFunction::custom("linear-growth", |s| Derivatives {
            value: 1.0 + 1.0 / (1.0 + s),
            d1: 0.0,
            d2: 1.0,
            d3: 0.0,
        });
        let audit = audit_hypotheses(&g, 100.0, 10.0, 1000).unwrap();
        assert!(audit.mu0_max_at_boundary);
    }

    #[test]
    fn audit_rejects_bad_ranges() {
        let g = MotilityFunction::constant(1.0).unwrap();
        assert!(audit_hypotheses(&g, 1.0, 0.0, 1000).is_err());
        assert!(audit_hypotheses(&g, 1.0, 10.0, 999).is_err());
        assert!(audit_hypotheses(&g, 0.0, 10.0, 1000).is_err());
    }

    #[test]
    fn spec_round_trip() {
        let g = MotilityFunction::inverse_power(2.0, 0.5).unwrap();
        let back = MotilityFunction::from_spec(&g.spec()).unwrap();
        assert_eq!(back.eval(1.3).unwrap(), g.eval(1.3).unwrap());
        let json = serde_json::to_string(&g.spec()).unwrap();
        assert_eq!(json, r#"{"family":"inverse-power","epsilon":2.0,"alpha":0.5}"#);
    }
}
