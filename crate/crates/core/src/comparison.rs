//! Spatially constant comparison envelope `(u̲(t), ū(t))`.
//!
//! In log variables the envelope solves
//!
//! ```text
//! d/dt log ū = −γ′(u̲)(ū − u̲) + γ″(u̲) a(t) + μ(1 − ū)
//! d/dt log u̲ = −γ′(u̲)(u̲ − ū)              + μ(1 − u̲)
//! ```
//!
//! where `a(t)` bounds `‖∇v‖_∞`. Both motility derivatives are taken at the lower
//! envelope. The rectangle `0 < u̲ < 1 < ū` is invariant when the initial data
//! straddle 1.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::motility::MotilityFunction;
use crate::pde::ASeries;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ComparisonError {
    #[error("envelope bounds must satisfy 0 < lower <= upper, got ({lo}, {hi})")]
    Ordering { lo: f64, hi: f64 },
    #[error("initial envelope must straddle 1 strictly: 0 < lower < 1 < upper, got ({lo}, {hi})")]
    Straddle { lo: f64, hi: f64 },
    #[error("time step must be positive, got {0}")]
    TimeStep(f64),
    #[error("measured a(t) series is invalid: {0}")]
    Source(String),
    #[error("measured a(t) covers [0, {available}] but integration needs t = {requested}")]
    SourceRange { available: f64, requested: f64 },
    #[error("decay estimate needs mu0 < mu, got mu0 = {mu0}, mu = {mu}")]
    Hypothesis { mu0: f64, mu: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub t: f64,
    pub log_lo: f64,
    pub log_hi: f64,
}

impl Envelope {
    pub fn new(t: f64, lo: f64, hi: f64) -> Result<Self, ComparisonError> {
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return Err(ComparisonError::Ordering { lo, hi });
        }
        Ok(Self {
            t,
            log_lo: lo.ln(),
            log_hi: hi.ln(),
        })
    }

    pub fn lo(&self) -> f64 {
        self.log_lo.exp()
    }

    pub fn hi(&self) -> f64 {
        self.log_hi.exp()
    }

    pub fn log_gap(&self) -> f64 {
        self.log_hi - self.log_lo
    }

    /// `ū − u̲` without cancellation.
    pub fn gap(&self) -> f64 {
        self.lo() * self.log_gap().exp_m1()
    }

    /// `0 < u̲ < 1 < ū`, evaluated in log variables.
    pub fn in_rectangle(&self) -> bool {
        self.log_lo < 0.0 && self.log_hi > 0.0
    }

    /// `|ū − 1| + |u̲ − 1|`
    pub fn distance_to_one(&self) -> f64 {
        self.log_hi.exp_m1().abs() + self.log_lo.exp_m1().abs()
    }
}

/// Piecewise-linear `a(t)` sampled from a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasuredA {
    t: Vec<f64>,
    a: Vec<f64>,
}

impl MeasuredA {
    pub fn new(t: Vec<f64>, a: Vec<f64>) -> Result<Self, ComparisonError> {
        if t.is_empty() || t.len() != a.len() {
            return Err(ComparisonError::Source("times and values must be non-empty and of equal length".into()));
        }
        if t[0] != 0.0 {
            return Err(ComparisonError::Source(format!("series must start at t = 0, starts at {}", t[0])));
        }
        if t.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(ComparisonError::Source("times must be strictly increasing".into()));
        }
        if a.iter().any(|&x| !(x >= 0.0 && x.is_finite())) {
            return Err(ComparisonError::Source("values must be finite and non-negative".into()));
        }
        Ok(Self { t, a })
    }

    pub fn from_series(series: &ASeries) -> Result<Self, ComparisonError> {
        Self::new(series.t.clone(), series.a.clone())
    }

    pub fn t_end(&self) -> f64 {
        *self.t.last().expect("non-empty")
    }

    pub fn at(&self, t: f64) -> f64 {
        let n = self.t.len();
        if t <= self.t[0] || n == 1 {
            return self.a[0];
        }
        if t >= self.t[n - 1] {
            return self.a[n - 1];
        }
        let k = self.t.partition_point(|&s| s <= t);
        let (t0, t1) = (self.t[k - 1], self.t[k]);
        let w = (t - t0) / (t1 - t0);
        self.a[k - 1] * (1.0 - w) + self.a[k] * w
    }

    /// `∫_0^t a`, exact for the linear interpolant.
    pub fn integral_to(&self, t: f64) -> f64 {
        let mut total = 0.0;
        for k in 1..self.t.len() {
            let (t0, t1) = (self.t[k - 1], self.t[k]);
            if t0 >= t {
                break;
            }
            let right = t1.min(t);
            total += 0.5 * (self.a[k - 1] + self.at(right)) * (right - t0);
        }
        if t > self.t_end() {
            total += self.a[self.a.len() - 1] * (t - self.t_end());
        }
        total
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ASource {
    Measured(MeasuredA),
    /// `a = c_Ω (ū − u̲)²`, re-evaluated at every stage.
    ClosedBound { c_omega: f64 },
    Zero,
}

impl ASource {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Measured(_) => "measured",
            Self::ClosedBound { .. } => "closed-bound",
            Self::Zero => "zero",
        }
    }

    fn value(&self, t: f64, env: &Envelope) -> f64 {
        match self {
            Self::Measured(m) => m.at(t),
            Self::ClosedBound { c_omega } => {
                let g = env.gap();
                c_omega * g * g
            }
            Self::Zero => 0.0,
        }
    }
}

/// Right-hand sides `(d log ū/dt, d log u̲/dt)`.
pub fn envelope_rhs(env: &Envelope, a: f64, gamma: &MotilityFunction, mu: f64) -> (f64, f64) {
    let lo = env.lo();
    let d = gamma.eval_unchecked(lo);
    let gap = env.gap();
    let d_hi = -d.d1 * gap + d.d2 * a - mu * env.log_hi.exp_m1();
    let d_lo = d.d1 * gap - mu * env.log_lo.exp_m1();
    (d_hi, d_lo)
}

/// `d/dt (log ū − log u̲)` at the given state.
pub fn log_gap_rate(env: &Envelope, a: f64, gamma: &MotilityFunction, mu: f64) -> f64 {
    let (d_hi, d_lo) = envelope_rhs(env, a, gamma, mu);
    d_hi - d_lo
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopePoint {
    pub t: f64,
    pub log_lo: f64,
    pub log_hi: f64,
    pub a_used: f64,
}

impl EnvelopePoint {
    pub fn envelope(&self) -> Envelope {
        Envelope {
            t: self.t,
            log_lo: self.log_lo,
            log_hi: self.log_hi,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RectangleViolation {
    pub t: f64,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeTrajectory {
    pub points: Vec<EnvelopePoint>,
    pub source: String,
    pub mu: f64,
    pub dt: f64,
    /// Whether the initial data straddled 1 strictly, so the rectangle is tracked.
    pub strict_straddle: bool,
    /// First step leaving the rectangle; integration halts there.
    pub rectangle_violation: Option<RectangleViolation>,
}

impl EnvelopeTrajectory {
    pub fn initial(&self) -> Envelope {
        self.points[0].envelope()
    }

    pub fn last(&self) -> Envelope {
        self.points[self.points.len() - 1].envelope()
    }

    pub fn t_end(&self) -> f64 {
        self.points[self.points.len() - 1].t
    }

    /// Envelope at time `t`, linear in log variables between steps.
    pub fn at(&self, t: f64) -> Option<Envelope> {
        let first = self.points[0].t;
        let slack = 1e-12 * self.t_end().abs().max(1.0);
        if t < first - slack || t > self.t_end() + slack {
            return None;
        }
        let k = self.points.partition_point(|p| p.t <= t);
        if k == 0 {
            return Some(self.points[0].envelope());
        }
        if k >= self.points.len() {
            return Some(self.last());
        }
        let (p0, p1) = (&self.points[k - 1], &self.points[k]);
        let w = (t - p0.t) / (p1.t - p0.t);
        Some(Envelope {
            t,
            log_lo: p0.log_lo * (1.0 - w) + p1.log_lo * w,
            log_hi: p0.log_hi * (1.0 - w) + p1.log_hi * w,
        })
    }

    /// CSV with columns `t, u_lo, u_hi, log_gap, a_used, bound_fast,
    /// bound_conservative`. Bound columns are empty unless `(mu, mu0)` admits the
    /// decay estimate.
    pub fn to_csv(&self, mu0: Option<f64>) -> String {
        let env0 = self.initial();
        let mut out = String::from("t,u_lo,u_hi,log_gap,a_used,bound_fast,bound_conservative\n");
        for p in &self.points {
            let e = p.envelope();
            let bounds = mu0.and_then(|m0| decay_bound(&env0, self.mu, m0, p.t - env0.t).ok());
            let _ = write!(out, "{},{},{},{},{},", p.t, e.lo(), e.hi(), e.log_gap(), p.a_used);
            match bounds {
                Some(b) => {
                    let _ = writeln!(out, "{},{}", b.fast, b.conservative);
                }
                None => out.push_str(",\n"),
            }
        }
        out
    }
}

/// Classical RK4 on `(log u̲, log ū)` from `env0.t` to `t_end`.
pub fn integrate_envelope(
    env0: &Envelope,
    source: &ASource,
    gamma: &MotilityFunction,
    mu: f64,
    t_end: f64,
    dt: f64,
) -> Result<EnvelopeTrajectory, ComparisonError> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(ComparisonError::TimeStep(dt));
    }
    if !(env0.log_lo <= env0.log_hi) {
        return Err(ComparisonError::Ordering {
            lo: env0.lo(),
            hi: env0.hi(),
        });
    }
    if !(env0.log_lo <= 0.0 && env0.log_hi >= 0.0) {
        return Err(ComparisonError::Straddle {
            lo: env0.lo(),
            hi: env0.hi(),
        });
    }
    if let ASource::Measured(m) = source {
        if t_end > m.t_end() * (1.0 + 1e-12) + 1e-12 {
            return Err(ComparisonError::SourceRange {
                available: m.t_end(),
                requested: t_end,
            });
        }
    }

    let strict_straddle = env0.in_rectangle();
    let mut env = *env0;
    let mut traj = EnvelopeTrajectory {
        points: vec![EnvelopePoint {
            t: env.t,
            log_lo: env.log_lo,
            log_hi: env.log_hi,
            a_used: source.value(env.t, &env),
        }],
        source: source.name().to_string(),
        mu,
        dt,
        strict_straddle,
        rectangle_violation: None,
    };

    let rhs = |t: f64, e: &Envelope| -> (f64, f64) {
        let a = source.value(t, e);
        envelope_rhs(e, a, gamma, mu)
    };
    let shifted = |e: &Envelope, h: f64, k: (f64, f64)| Envelope {
        t: e.t + h,
        log_hi: e.log_hi + h * k.0,
        log_lo: e.log_lo + h * k.1,
    };

    let n_steps = ((t_end - env0.t) / dt).ceil().max(0.0) as usize;
    for step in 1..=n_steps {
        let t_next = if step == n_steps {
            t_end
        } else {
            env0.t + step as f64 * dt
        };
        let h = t_next - env.t;
        let t = env.t;
        let k1 = rhs(t, &env);
        let k2 = rhs(t + 0.5 * h, &shifted(&env, 0.5 * h, k1));
        let k3 = rhs(t + 0.5 * h, &shifted(&env, 0.5 * h, k2));
        let k4 = rhs(t + h, &shifted(&env, h, k3));
        env = Envelope {
            t: t_next,
            log_hi: env.log_hi + h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0),
            log_lo: env.log_lo + h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1),
        };
        traj.points.push(EnvelopePoint {
            t: env.t,
            log_lo: env.log_lo,
            log_hi: env.log_hi,
            a_used: source.value(env.t, &env),
        });
        if strict_straddle && !env.in_rectangle() {
            traj.rectangle_violation = Some(RectangleViolation {
                t: env.t,
                lo: env.lo(),
                hi: env.hi(),
            });
            break;
        }
    }
    Ok(traj)
}

/// Decay estimates for `log ū − log u̲`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayBound {
    /// `L₀ exp((μ₀ − μ)(ū₀/u̲₀) t)` with `L₀ = log(ū₀/u̲₀)`.
    pub fast: f64,
    /// `L₀ exp((μ₀ − μ)(u̲₀/ū₀) t)`.
    pub conservative: f64,
}

pub fn decay_bound(env0: &Envelope, mu: f64, mu0: f64, t: f64) -> Result<DecayBound, ComparisonError> {
    if !(mu0 < mu) {
        return Err(ComparisonError::Hypothesis { mu0, mu });
    }
    if !env0.in_rectangle() {
        return Err(ComparisonError::Straddle {
            lo: env0.lo(),
            hi: env0.hi(),
        });
    }
    let l0 = env0.log_gap();
    let ratio = env0.log_gap().exp();
    Ok(DecayBound {
        fast: l0 * ((mu0 - mu) * ratio * t).exp(),
        conservative: l0 * ((mu0 - mu) / ratio * t).exp(),
    })
}

/// Upper bound on `ū(t)` from integrating `γ″(0) a(t)` in the log-gap equation.
/// Valid while the growth-dominance hypothesis holds.
pub fn upper_envelope_bound(env0: &Envelope, gamma: &MotilityFunction, a: &MeasuredA, t: f64) -> f64 {
    let curvature = gamma.eval_unchecked(0.0).d2;
    (env0.log_gap() + curvature * a.integral_to(t)).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn logistic(u0: f64, mu: f64, t: f64) -> f64 {
        let e = (mu * t).exp();
        u0 * e / (1.0 - u0 + u0 * e)
    }

    #[test]
    fn steady_state_rhs_vanishes() {
        let g = MotilityFunction::exponential(0.3).unwrap();
        let env = Envelope::new(0.0, 1.0, 1.0).unwrap();
        assert_eq!(envelope_rhs(&env, 0.0, &g, 2.0), (0.0, 0.0));
    }

    #[test]
    fn constant_motility_gives_logistic_rhs() {
        let g = MotilityFunction::constant(2.0).unwrap();
        let env = Envelope::new(0.0, 0.4, 1.7).unwrap();
        let (dh, dl) = envelope_rhs(&env, 5.0, &g, 1.5);
        assert!((dh - 1.5 * (1.0 - 1.7)).abs() < 1e-14);
        assert!((dl - 1.5 * (1.0 - 0.4)).abs() < 1e-14);
    }

    #[test]
    fn exponential_rhs_hand_values() {
        let g = MotilityFunction::exponential(1.0).unwrap();
        let env = Envelope::new(0.0, 0.5, 2.0).unwrap();
        let (dh, dl) = envelope_rhs(&env, 0.0, &g, 1.0);
        assert!((dh - (-0.090_204_010_431_049_86)).abs() < 1e-14, "{dh}");
        assert!((dl - (-0.409_795_989_568_950_14)).abs() < 1e-14, "{dl}");
    }

    #[test]
    fn rk4_matches_logistic_closed_form() {
        let g = MotilityFunction::constant(1.0).unwrap();
        let env0 = Envelope::new(0.0, 0.5, 2.0).unwrap();
        let traj = integrate_envelope(&env0, &ASource::Zero, &g, 1.0, 5.0, 1e-3).unwrap();
        let last = traj.last();
        assert_eq!(last.t, 5.0);
        let rel = |x: f64, y: f64| ((x - y) / y).abs();
        assert!(rel(last.lo(), logistic(0.5, 1.0, 5.0)) <= 1e-6);
        assert!(rel(last.hi(), logistic(2.0, 1.0, 5.0)) <= 1e-6);
        assert!(traj.rectangle_violation.is_none());
    }

    #[test]
    fn unit_envelope_stays_put() {
        let g = MotilityFunction::exponential(0.1).unwrap();
        let env0 = Envelope::new(0.0, 1.0, 1.0).unwrap();
        for src in [ASource::Zero, ASource::ClosedBound { c_omega: 0.7 }] {
            let traj = integrate_envelope(&env0, &src, &g, 1.0, 3.0, 1e-2).unwrap();
            assert!(!traj.strict_straddle);
            assert!(traj.points.iter().all(|p| p.log_lo == 0.0 && p.log_hi == 0.0));
        }
    }

    #[test]
    fn closed_bound_envelope_collapses_to_one() {
        let g = MotilityFunction::exponential(0.1).unwrap();
        let env0 = Envelope::new(0.0, 0.5, 1.5).unwrap();
        let traj = integrate_envelope(&env0, &ASource::ClosedBound { c_omega: 0.7 }, &g, 1.0, 30.0, 1e-3).unwrap();
        assert!(traj.rectangle_violation.is_none());
        let last = traj.last();
        assert!(last.gap() < 1e-8, "{}", last.gap());
        assert!(last.distance_to_one() < 1e-8);
        assert!(last.in_rectangle());
    }

    #[test]
    fn rk4_self_convergence_is_fourth_order() {
        let g = MotilityFunction::exponential(0.5).unwrap();
        let env0 = Envelope::new(0.0, 0.3, 2.5).unwrap();
        let src = ASource::ClosedBound { c_omega: 0.5 };
        let at = |dt: f64| integrate_envelope(&env0, &src, &g, 1.0, 2.0, dt).unwrap().last();
        let reference = at(0.1 / 8.0);
        let err = |dt: f64| {
            let e = at(dt);
            (e.log_lo - reference.log_lo).abs() + (e.log_hi - reference.log_hi).abs()
        };
        let ratio = err(0.1) / err(0.05);
        assert!((13.0..19.0).contains(&ratio), "{ratio}");
    }

    #[test]
    fn measured_source_interpolates_and_integrates() {
        let m = MeasuredA::new(vec![0.0, 1.0, 3.0], vec![0.0, 2.0, 0.0]).unwrap();
        assert_eq!(m.at(0.5), 1.0);
        assert_eq!(m.at(2.0), 1.0);
        assert_eq!(m.at(10.0), 0.0);
        assert!((m.integral_to(3.0) - 3.0).abs() < 1e-14);
        assert!((m.integral_to(0.5) - 0.25).abs() < 1e-14);
        assert!((m.integral_to(2.0) - 2.5).abs() < 1e-14);
        assert!(MeasuredA::new(vec![0.0, 0.0], vec![1.0, 1.0]).is_err());
        assert!(MeasuredA::new(vec![0.0, 1.0], vec![1.0, -1.0]).is_err());
        assert!(MeasuredA::new(vec![0.5], vec![1.0]).is_err());
    }

    #[test]
    fn measured_source_range_is_enforced() {
        let g = MotilityFunction::exponential(0.1).unwrap();
        let m = MeasuredA::new(vec![0.0, 1.0], vec![0.1, 0.1]).unwrap();
        let env0 = Envelope::new(0.0, 0.5, 1.5).unwrap();
        assert!(matches!(
            integrate_envelope(&env0, &ASource::Measured(m), &g, 1.0, 2.0, 1e-2),
            Err(ComparisonError::SourceRange { .. })
        ));
    }

    #[test]
    fn straddle_preconditions() {
        let g = MotilityFunction::exponential(0.1).unwrap();
        let above = Envelope::new(0.0, 1.2, 1.5).unwrap();
        assert!(integrate_envelope(&above, &ASource::Zero, &g, 1.0, 1.0, 1e-2).is_err());
        assert!(Envelope::new(0.0, 2.0, 1.0).is_err());
        assert!(Envelope::new(0.0, 0.0, 1.0).is_err());
        let ok = Envelope::new(0.0, 0.5, 1.5).unwrap();
        assert!(integrate_envelope(&ok, &ASource::Zero, &g, 1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn rectangle_violation_halts() {
        // Increasing motility pulls both envelopes toward a point below 1.
        let g = MotilityFunction::custom("bad", |_| crate::motility::Derivatives {
            value: 1.0,
            d1: 5.0,
            d2: 0.0,
            d3: 0.0,
        });
        let env0 = Envelope::new(0.0, 0.9, 1.1).unwrap();
        let traj = integrate_envelope(&env0, &ASource::Zero, &g, 0.1, 5.0, 1e-2).unwrap();
        let v = traj.rectangle_violation.expect("violation");
        assert!(v.t < 5.0);
        assert_eq!(traj.t_end(), v.t);
    }

    #[test]
    fn decay_bound_values() {
        let env0 = Envelope::new(0.0, 0.5, 2.0).unwrap();
        let b0 = decay_bound(&env0, 1.0, 0.2, 0.0).unwrap();
        assert!((b0.fast - 4f64.ln()).abs() < 1e-15);
        assert!((b0.conservative - 4f64.ln()).abs() < 1e-15);
        let b5 = decay_bound(&env0, 1.0, 0.2, 5.0).unwrap();
        assert!((b5.fast / 1.560_068_781_409_505_8e-7 - 1.0).abs() < 1e-12);
        assert!((b5.conservative / 0.509_989_194_867_907_1 - 1.0).abs() < 1e-12);
        let far = decay_bound(&env0, 1.0, 0.2, 1e4).unwrap();
        assert_eq!((far.fast, far.conservative), (0.0, 0.0));
        assert!(matches!(
            decay_bound(&env0, 1.0, 1.0, 1.0),
            Err(ComparisonError::Hypothesis { .. })
        ));
    }

    #[test]
    fn interpolation_in_log_variables() {
        let g = MotilityFunction::constant(1.0).unwrap();
        let env0 = Envelope::new(0.0, 0.5, 2.0).unwrap();
        let traj = integrate_envelope(&env0, &ASource::Zero, &g, 1.0, 1.0, 0.25).unwrap();
        let mid = traj.at(0.125).unwrap();
        let (p0, p1) = (traj.points[0], traj.points[1]);
        assert!((mid.log_lo - 0.5 * (p0.log_lo + p1.log_lo)).abs() < 1e-15);
        assert!(traj.at(1.5).is_none());
        assert_eq!(traj.at(1.0).unwrap().log_hi, traj.last().log_hi);
    }

    #[test]
    fn csv_columns() {
        let g = MotilityFunction::exponential(0.1).unwrap();
        let env0 = Envelope::new(0.0, 0.5, 1.5).unwrap();
        let traj = integrate_envelope(&env0, &ASource::Zero, &g, 1.0, 0.01, 0.005).unwrap();
        let csv = traj.to_csv(Some(0.2));
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "t,u_lo,u_hi,log_gap,a_used,bound_fast,bound_conservative");
        assert_eq!(lines.clone().count(), 3);
        assert_eq!(lines.next().unwrap().split(',').count(), 7);
        let no_bounds = traj.to_csv(None);
        assert!(no_bounds.lines().nth(1).unwrap().ends_with(",,"));
    }
}
