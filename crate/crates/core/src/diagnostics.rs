//! Monitors that turn the qualitative properties of the system into checks
//! over trajectories. Checks annotate; they never abort.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::comparison::EnvelopeTrajectory;
use crate::pde::Trajectory;

pub const POSITIVITY_TOL: f64 = 1e-10;
pub const MASS_BOUND_REL: f64 = 1e-6;
pub const DECAY_REL: f64 = 1e-3;
pub const LP_BLOW_UP: f64 = 1e12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiagnosticsError {
    #[error("trajectory and envelope disagree: {0}")]
    Config(String),
    #[error("invalid argument: {0}")]
    Argument(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckStatus {
    Pass,
    Fail,
    /// The inputs do not meet the premise of the claim.
    PreconditionFailed,
    /// Hypotheses of the claim are not met; reported but not counted.
    Informational,
}

impl CheckStatus {
    pub fn label(&self) -> &'static str {
        match self {
            Self::Pass => "pass",
            Self::Fail => "FAIL",
            Self::PreconditionFailed => "PRECONDITION",
            Self::Informational => "info",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub name: String,
    /// The property being checked.
    pub claim: String,
    pub status: CheckStatus,
    /// Outcome of the comparison before gating.
    pub satisfied: bool,
    #[serde(deserialize_with = "nullable_f64")]
    pub worst_residual: f64,
    pub tolerance: f64,
    pub t_worst: Option<f64>,
    pub detail: String,
}

impl CheckRecord {
    fn new(name: &str, claim: &str, satisfied: bool, worst: Worst, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            claim: claim.into(),
            status: if satisfied { CheckStatus::Pass } else { CheckStatus::Fail },
            satisfied,
            worst_residual: if worst.value == f64::NEG_INFINITY { 0.0 } else { worst.value },
            tolerance,
            t_worst: worst.t,
            detail: String::new(),
        }
    }

    /// A record for a claim that could not be evaluated under the current hypotheses.
    pub fn informational(name: &str, claim: &str, detail: impl Into<String>) -> Self {
        let mut rec = Self::new(name, claim, false, Worst::zero(), 0.0).with_detail(detail);
        rec.status = CheckStatus::Informational;
        rec
    }

    fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = detail.into();
        self
    }

    /// Downgrades to informational when the claim's hypotheses do not hold.
    pub fn gated(mut self, hypotheses_hold: bool, reason: &str) -> Self {
        if !hypotheses_hold && self.status != CheckStatus::PreconditionFailed {
            self.status = CheckStatus::Informational;
            if !reason.is_empty() {
                if !self.detail.is_empty() {
                    self.detail.push_str("; ");
                }
                self.detail.push_str(reason);
            }
        }
        self
    }

    pub fn counts(&self) -> bool {
        matches!(self.status, CheckStatus::Pass | CheckStatus::Fail | CheckStatus::PreconditionFailed)
    }

    pub fn failed(&self) -> bool {
        matches!(self.status, CheckStatus::Fail | CheckStatus::PreconditionFailed)
    }
}

/// Non-finite residuals serialize as `null`; read them back as NaN.
fn nullable_f64<'de, D: serde::Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
}

/// Running maximum with the time it was attained.
#[derive(Debug, Clone, Copy)]
struct Worst {
    value: f64,
    t: Option<f64>,
}

impl Worst {
    fn new() -> Self {
        Self {
            value: f64::NEG_INFINITY,
            t: None,
        }
    }

    fn zero() -> Self {
        Self { value: 0.0, t: None }
    }

    fn update(&mut self, value: f64, t: f64) {
        if value > self.value || value.is_nan() {
            self.value = value;
            self.t = Some(t);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub checks: Vec<CheckRecord>,
    pub passed: bool,
}

impl DiagnosticsReport {
    pub fn new(checks: Vec<CheckRecord>) -> Self {
        let passed = checks.iter().all(|c| !c.failed());
        Self { checks, passed }
    }

    pub fn get(&self, name: &str) -> Option<&CheckRecord> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_text(&self) -> String {
        let name_w = self.checks.iter().map(|c| c.name.len()).max().unwrap_or(4).max(5);
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<name_w$}  {:<12}  {:>12}  {:>12}  {:>10}  claim",
            "check", "status", "residual", "tolerance", "t"
        );
        for c in &self.checks {
            let t = c.t_worst.map(|t| format!("{t:.4}")).unwrap_or_else(|| "-".into());
            let _ = writeln!(
                out,
                "{:<name_w$}  {:<12}  {:>12.4e}  {:>12.4e}  {:>10}  {}",
                c.name,
                c.status.label(),
                c.worst_residual,
                c.tolerance,
                t,
                c.claim
            );
            if !c.detail.is_empty() {
                let _ = writeln!(out, "{:<name_w$}  {}", "", c.detail);
            }
        }
        let _ = writeln!(out, "verdict: {}", if self.passed { "PASS" } else { "FAIL" });
        out
    }
}

/// `h² + dt` for the trajectory's grid and largest step.
pub fn discretization_scale(traj: &Trajectory) -> f64 {
    let h = (0..traj.grid.dim()).map(|a| traj.grid.spacing(a)).fold(0.0, f64::max);
    h * h + traj.max_dt
}

/// The run reached its final time without a stepper failure.
pub fn check_run_completed(traj: &Trajectory) -> CheckRecord {
    let last = traj.last().t;
    let rec = CheckRecord::new(
        "run-completed",
        "time stepping reached t_end",
        traj.completed(),
        Worst {
            value: traj.scheme.t_end - last,
            t: Some(last),
        },
        0.0,
    );
    match &traj.failure {
        Some(f) => rec.with_detail(f.clone()),
        None => rec.with_detail(format!("{} steps, max dt {:.3e}", traj.steps, traj.max_dt)),
    }
}

pub fn check_positivity(traj: &Trajectory) -> CheckRecord {
    let mut worst = Worst::new();
    for s in &traj.snapshots {
        worst.update(-s.u.min(), s.t);
    }
    let residual = Worst {
        value: worst.value.max(0.0),
        t: worst.t,
    };
    CheckRecord::new(
        "positivity",
        "density stays nonnegative",
        residual.value <= POSITIVITY_TOL,
        residual,
        POSITIVITY_TOL,
    )
    .with_detail(format!("min u = {:.6e}", -worst.value))
}

/// Mass balance `dM/dt = μM − μ∫u²` between snapshots and the bound
/// `M(t) ≤ max(M(0), |Ω|)`. The growth term comes from the run's per-step
/// integral when present, else from the trapezoid rule across snapshots.
pub fn check_mass(traj: &Trajectory, c_mass: f64) -> [CheckRecord; 2] {
    let grid = &traj.grid;
    let mu = traj.mu;
    let scale = discretization_scale(traj);
    let tol = c_mass * scale;
    let samples: Vec<(f64, f64, f64)> = traj
        .snapshots
        .iter()
        .map(|s| {
            let u = s.u.values();
            let m = grid.integrate_raw(u);
            let sq: Vec<f64> = u.iter().map(|x| x * x).collect();
            (s.t, m, mu * m - mu * grid.integrate_raw(&sq))
        })
        .collect();

    let per_step = traj.growth.len() == samples.len();
    let mut balance = Worst::zero();
    for (k, w) in samples.windows(2).enumerate() {
        let ((t0, m0, r0), (t1, m1, r1)) = (w[0], w[1]);
        if t1 <= t0 {
            continue;
        }
        let gained = if per_step {
            traj.growth[k + 1] - traj.growth[k]
        } else {
            0.5 * (t1 - t0) * (r0 + r1)
        };
        let residual = ((m1 - m0 - gained) / (t1 - t0)).abs();
        balance.update(residual, t1);
    }
    let balance_rec = CheckRecord::new(
        "mass-balance",
        "mass follows dM/dt = mu*M - mu*int(u^2)",
        balance.value <= tol,
        balance,
        tol,
    )
    .with_detail(format!("{} snapshot pairs", samples.len().saturating_sub(1)));

    let cap = samples[0].1.max(grid.volume()) * (1.0 + MASS_BOUND_REL);
    let mut excess = Worst::new();
    for &(t, m, _) in &samples {
        excess.update(m - cap, t);
    }
    let bound_rec = CheckRecord::new(
        "mass-bound",
        "mass stays below max(M(0), |Omega|)",
        excess.value <= 0.0,
        excess,
        MASS_BOUND_REL,
    )
    .with_detail(format!("cap = {cap:.9}"));
    [balance_rec, bound_rec]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpBoundCurve {
    pub p: f64,
    pub t: Vec<f64>,
    pub y: Vec<f64>,
    pub blow_up_time: Option<f64>,
}

impl LpBoundCurve {
    /// Linear interpolation; `None` past the last computed time.
    pub fn at(&self, t: f64) -> Option<f64> {
        let last = *self.t.last()?;
        if t > last {
            return None;
        }
        let k = self.t.partition_point(|&s| s <= t);
        if k == 0 {
            return Some(self.y[0]);
        }
        if k >= self.t.len() {
            return Some(self.y[self.y.len() - 1]);
        }
        let w = (t - self.t[k - 1]) / (self.t[k] - self.t[k - 1]);
        Some(self.y[k - 1] * (1.0 - w) + self.y[k] * w)
    }
}

/// RK4 for `y′ = p(μ|Ω| + c_Ω c_γ y^{(p+2)/p})` with steps limited to a 5%
/// relative change; stops at `t_end` or once `y` exceeds [`LP_BLOW_UP`].
pub fn integrate_lp_bound(
    p: f64,
    y0: f64,
    mu: f64,
    vol: f64,
    c_omega: f64,
    c_gamma: f64,
    t_end: f64,
) -> Result<LpBoundCurve, DiagnosticsError> {
    if !(p >= 1.0 && y0 >= 0.0 && mu >= 0.0 && vol > 0.0 && c_omega >= 0.0 && c_gamma >= 0.0 && t_end > 0.0) {
        return Err(DiagnosticsError::Argument(format!(
            "need p >= 1, y0 >= 0, mu >= 0, vol > 0, constants >= 0, t_end > 0 \
             (p = {p}, y0 = {y0}, mu = {mu}, vol = {vol}, c_omega = {c_omega}, c_gamma = {c_gamma}, t_end = {t_end})"
        )));
    }
    let k = c_omega * c_gamma;
    let q = (p + 2.0) / p;
    let f = |y: f64| p * (mu * vol + k * y.max(0.0).powf(q));
    let h_max = t_end / 2000.0;
    let mut curve = LpBoundCurve {
        p,
        t: vec![0.0],
        y: vec![y0],
        blow_up_time: None,
    };
    let (mut t, mut y) = (0.0, y0);
    while t < t_end {
        let slope = f(y);
        let mut h = h_max.min(t_end - t);
        if slope > 0.0 {
            h = h.min(0.05 * (1.0 + y) / slope);
        }
        let k1 = f(y);
        let k2 = f(y + 0.5 * h * k1);
        let k3 = f(y + 0.5 * h * k2);
        let k4 = f(y + h * k3);
        y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        t = if t_end - (t + h) <= 1e-12 * t_end { t_end } else { t + h };
        curve.t.push(t);
        curve.y.push(y);
        if !(y <= LP_BLOW_UP) {
            curve.blow_up_time = Some(t);
            break;
        }
    }
    Ok(curve)
}

/// Measured `∫u^p` stays below the curve before its blow-up time.
pub fn check_lp_bound(traj: &Trajectory, curve: &LpBoundCurve, c_tol: f64) -> CheckRecord {
    let p = curve.p;
    let tol = c_tol * discretization_scale(traj);
    let mut worst = Worst::new();
    let mut compared = 0usize;
    for s in &traj.snapshots {
        let Some(y) = curve.at(s.t) else { break };
        if curve.blow_up_time.is_some_and(|tb| s.t >= tb) {
            break;
        }
        let up: Vec<f64> = s.u.values().iter().map(|x| x.abs().powf(p)).collect();
        let measured = traj.grid.integrate_raw(&up);
        worst.update((measured - y) / y.max(1.0), s.t);
        compared += 1;
    }
    let t_end = traj.last().t;
    let blows_up_early = curve.blow_up_time.is_some_and(|tb| tb < t_end);
    let detail = match curve.blow_up_time {
        Some(tb) => format!("p = {p}, curve blows up at T_p = {tb:.6}; {compared} snapshots compared"),
        None => format!("p = {p}, curve finite on [0, {t_end}]; {compared} snapshots compared"),
    };
    let rec = CheckRecord::new(
        "lp-bound",
        "int(u^p) stays below the bounding ODE",
        worst.value <= tol,
        worst,
        tol,
    )
    .with_detail(detail);
    rec.gated(!blows_up_early, "bounding curve blows up before t_end")
}

fn same_model(traj: &Trajectory, env: &EnvelopeTrajectory) -> Result<(), DiagnosticsError> {
    if traj.mu != env.mu {
        return Err(DiagnosticsError::Config(format!(
            "trajectory mu = {}, envelope mu = {}",
            traj.mu, env.mu
        )));
    }
    Ok(())
}

/// `u̲(t) − tol ≤ u ≤ ū(t) + tol` at every snapshot covered by the envelope.
pub fn check_sandwich(traj: &Trajectory, env: &EnvelopeTrajectory, c_s: f64) -> Result<CheckRecord, DiagnosticsError> {
    same_model(traj, env)?;
    let tol = c_s * discretization_scale(traj);
    let e0 = env.initial();
    let u0 = &traj.initial().u;
    if e0.lo() > u0.min() || e0.hi() < u0.max() {
        let mut rec = CheckRecord::new(
            "sandwich",
            "envelope traps the density",
            false,
            Worst {
                value: (e0.lo() - u0.min()).max(u0.max() - e0.hi()),
                t: Some(traj.initial().t),
            },
            tol,
        )
        .with_detail(format!(
            "initial envelope [{:.6}, {:.6}] does not contain u0 range [{:.6}, {:.6}]",
            e0.lo(),
            e0.hi(),
            u0.min(),
            u0.max()
        ));
        rec.status = CheckStatus::PreconditionFailed;
        return Ok(rec);
    }
    let mut worst = Worst::new();
    let mut compared = 0usize;
    for s in &traj.snapshots {
        let Some(e) = env.at(s.t) else { break };
        worst.update((e.lo() - s.u.min()).max(s.u.max() - e.hi()), s.t);
        compared += 1;
    }
    let mut detail = format!("{compared} of {} snapshots compared", traj.snapshots.len());
    if let Some(v) = env.rectangle_violation {
        let _ = write!(detail, "; envelope left the rectangle at t = {:.6}", v.t);
    }
    Ok(CheckRecord::new(
        "sandwich",
        "envelope traps the density",
        worst.value <= tol,
        worst,
        tol,
    )
    .with_detail(detail))
}

/// `a(t) ≤ safety·c_Ω·(ū − u̲) + tol` at every snapshot.
pub fn check_gradient_bound(
    traj: &Trajectory,
    env: &EnvelopeTrajectory,
    c_omega: f64,
    safety: f64,
    c_tol: f64,
) -> Result<CheckRecord, DiagnosticsError> {
    same_model(traj, env)?;
    let tol = c_tol * discretization_scale(traj);
    let mut worst = Worst::new();
    for s in &traj.snapshots {
        let Some(e) = env.at(s.t) else { break };
        worst.update(s.a - safety * c_omega * e.gap(), s.t);
    }
    Ok(CheckRecord::new(
        "gradient-bound",
        "signal gradient bounded by c_Omega times the envelope gap",
        worst.value <= tol,
        worst,
        tol,
    )
    .with_detail(format!("c_Omega = {c_omega:.6}, safety = {safety}")))
}

/// `sup|u−1| + sup|v−1| ≤ eps` for snapshots at `t ≥ t_check`.
pub fn check_convergence(traj: &Trajectory, t_check: f64, eps: f64) -> CheckRecord {
    let mut worst = Worst::new();
    for s in traj.snapshots.iter().filter(|s| s.t >= t_check) {
        worst.update(s.u.sup_dist_to(1.0) + s.v.sup_dist_to(1.0), s.t);
    }
    let reached = worst.t.is_some();
    let rec = CheckRecord::new(
        "convergence",
        "solution approaches the steady state (1, 1)",
        reached && worst.value <= eps,
        worst,
        eps,
    );
    if reached {
        rec.with_detail(format!("t_check = {t_check}"))
    } else {
        rec.with_detail(format!("no snapshot at or after t_check = {t_check}"))
    }
}

/// `sup|u−1| ≤ |ū−1| + |u̲−1| + tol` at every snapshot.
pub fn check_envelope_distance(traj: &Trajectory, env: &EnvelopeTrajectory, c_tol: f64) -> Result<CheckRecord, DiagnosticsError> {
    same_model(traj, env)?;
    let tol = c_tol * discretization_scale(traj);
    let mut worst = Worst::new();
    for s in &traj.snapshots {
        let Some(e) = env.at(s.t) else { break };
        worst.update(s.u.sup_dist_to(1.0) - e.distance_to_one(), s.t);
    }
    Ok(CheckRecord::new(
        "envelope-distance",
        "distance of u to 1 bounded by the envelope's distance to 1",
        worst.value <= tol,
        worst,
        tol,
    ))
}

/// `0 < u̲ < 1 < ū` at every envelope step.
pub fn check_rectangle(env: &EnvelopeTrajectory) -> CheckRecord {
    let mut worst = Worst::new();
    for p in &env.points {
        worst.update(p.log_lo.max(-p.log_hi), p.t);
    }
    let satisfied = env.strict_straddle && env.rectangle_violation.is_none() && worst.value < 0.0;
    let detail = if !env.strict_straddle {
        "initial envelope does not straddle 1 strictly".to_string()
    } else if let Some(v) = env.rectangle_violation {
        format!("left the rectangle at t = {:.6}: ({:.9}, {:.9})", v.t, v.lo, v.hi)
    } else {
        format!("{} steps, source {}", env.points.len() - 1, env.source)
    };
    let mut rec = CheckRecord::new(
        "rectangle",
        "envelope keeps 0 < lower < 1 < upper",
        satisfied,
        worst,
        0.0,
    )
    .with_detail(detail);
    if !env.strict_straddle {
        rec.status = CheckStatus::PreconditionFailed;
    }
    rec
}

/// `log ū − log u̲` stays below the conservative decay bound up to `t_max`.
/// Violations of the sharper printed exponent are reported in the detail.
pub fn check_decay(env: &EnvelopeTrajectory, mu0: f64, t_max: f64) -> Result<CheckRecord, DiagnosticsError> {
    let e0 = env.initial();
    let mut worst = Worst::new();
    let mut fast_violations = 0usize;
    let mut fast_worst = 0.0f64;
    for p in env.points.iter().filter(|p| p.t <= t_max) {
        let b = crate::comparison::decay_bound(&e0, env.mu, mu0, p.t - e0.t)
            .map_err(|e| DiagnosticsError::Argument(e.to_string()))?;
        let lg = p.envelope().log_gap();
        worst.update(lg - b.conservative * (1.0 + DECAY_REL), p.t);
        if lg > b.fast * (1.0 + DECAY_REL) {
            fast_violations += 1;
            fast_worst = fast_worst.max(lg - b.fast);
        }
    }
    let detail = if fast_violations == 0 {
        "fast-exponent variant also holds".to_string()
    } else {
        format!("fast-exponent variant exceeded at {fast_violations} steps, worst excess {fast_worst:.3e}")
    };
    Ok(CheckRecord::new(
        "decay",
        "log-gap below log(hi0/lo0)*exp((mu0-mu)(lo0/hi0)t)",
        worst.value <= 0.0,
        worst,
        DECAY_REL,
    )
    .with_detail(detail))
}

/// `ū − u̲` is non-increasing from `t_from` on.
pub fn check_gap_monotone(env: &EnvelopeTrajectory, t_from: f64) -> CheckRecord {
    let mut worst = Worst::zero();
    let mut prev: Option<f64> = None;
    for p in env.points.iter().filter(|p| p.t >= t_from) {
        let g = p.envelope().gap();
        if let Some(g0) = prev {
            worst.update(g - g0, p.t);
        }
        prev = Some(g);
    }
    CheckRecord::new(
        "gap-monotone",
        "envelope gap is non-increasing",
        worst.value <= 0.0,
        worst,
        0.0,
    )
    .with_detail(format!("from t = {t_from}"))
}
