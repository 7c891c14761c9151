//! Workflows built from a [`RunConfig`]: simulate, envelope, verify, sweep.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::Serialize;
use thiserror::Error;

use crate::comparison::{integrate_envelope, ASource, ComparisonError, EnvelopeTrajectory, MeasuredA};
use crate::config::{ConfigError, RunConfig, SourceKind};
use crate::diagnostics::{self as diag, CheckRecord, DiagnosticsError, DiagnosticsReport, LpBoundCurve};
use crate::elliptic::{estimate_domain_constants, DomainConstants, EllipticError};
use crate::motility::{audit_hypotheses, HypothesisAudit, MotilityError};
use crate::output::{self, OutputError};
use crate::pde::{run, PdeError, Trajectory};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("configuration: {0}")]
    Config(#[from] ConfigError),
    #[error("motility: {0}")]
    Motility(#[from] MotilityError),
    #[error("simulation: {0}")]
    Pde(#[from] PdeError),
    #[error("elliptic solver: {0}")]
    Elliptic(#[from] EllipticError),
    #[error("envelope: {0}")]
    Comparison(#[from] ComparisonError),
    #[error("diagnostics: {0}")]
    Diagnostics(#[from] DiagnosticsError),
    #[error("output: {0}")]
    Output(#[from] OutputError),
}

pub fn audit(cfg: &RunConfig) -> Result<HypothesisAudit, PipelineError> {
    Ok(audit_hypotheses(
        &cfg.motility(),
        cfg.mu,
        cfg.diagnostics.audit_s_max,
        cfg.diagnostics.audit_points,
    )?)
}

pub fn constants(cfg: &RunConfig) -> Result<DomainConstants, PipelineError> {
    let grid = cfg.build_grid().map_err(|m| ConfigError { message: m, line: None })?;
    let d = &cfg.diagnostics;
    Ok(estimate_domain_constants(&grid, d.constant_samples, &[d.lp_p], cfg.seed)?)
}

/// `c_Ω` used by the checks: the configured override or the estimate.
pub fn c_omega(cfg: &RunConfig) -> Result<(f64, Option<DomainConstants>), PipelineError> {
    match cfg.diagnostics.c_omega {
        Some(c) => Ok((c, None)),
        None => {
            let k = constants(cfg)?;
            Ok((k.c_omega_hat, Some(k)))
        }
    }
}

pub fn simulate(cfg: &RunConfig) -> Result<Trajectory, PipelineError> {
    let grid = cfg.build_grid().map_err(|m| ConfigError { message: m, line: None })?;
    Ok(run(&cfg.initial_density(&grid), &cfg.model(), &cfg.scheme)?)
}

/// Envelope from the configured initial straddle. A measured source needs the
/// run it was measured on; its horizon is clipped to the run's last time.
pub fn envelope(
    cfg: &RunConfig,
    kind: SourceKind,
    traj: Option<&Trajectory>,
    c_omega_hat: f64,
) -> Result<EnvelopeTrajectory, PipelineError> {
    let grid = cfg.build_grid().map_err(|m| ConfigError { message: m, line: None })?;
    let env0 = cfg.initial_envelope(&cfg.initial_density(&grid))?;
    let mut t_end = cfg.envelope_t_end();
    let source = match kind {
        SourceKind::Measured => {
            let traj = traj.ok_or_else(|| ConfigError {
                message: "a measured envelope needs a simulation".into(),
                line: None,
            })?;
            let m = MeasuredA::from_series(&traj.a_series)?;
            t_end = t_end.min(m.t_end());
            ASource::Measured(m)
        }
        SourceKind::ClosedBound => ASource::ClosedBound {
            c_omega: cfg.diagnostics.c_omega_safety * c_omega_hat,
        },
        SourceKind::Zero => ASource::Zero,
    };
    Ok(integrate_envelope(&env0, &source, &cfg.motility(), cfg.mu, t_end, cfg.envelope.dt)?)
}

pub fn lp_curve(cfg: &RunConfig, traj: &Trajectory, audit: &HypothesisAudit, c_omega_hat: f64) -> Result<LpBoundCurve, PipelineError> {
    let p = cfg.diagnostics.lp_p;
    let u0 = &traj.initial().u;
    let up: Vec<f64> = u0.values().iter().map(|x| x.abs().powf(p)).collect();
    let y0 = traj.grid.integrate_raw(&up);
    Ok(diag::integrate_lp_bound(
        p,
        y0,
        cfg.mu,
        traj.grid.volume(),
        cfg.diagnostics.c_omega_safety * c_omega_hat,
        audit.c_gamma_hat,
        cfg.scheme.t_end.max(f64::MIN_POSITIVE),
    )?)
}

#[derive(Debug, Clone)]
pub struct VerifyOutcome {
    pub audit: HypothesisAudit,
    pub constants: Option<DomainConstants>,
    pub c_omega: f64,
    pub trajectory: Trajectory,
    pub measured: EnvelopeTrajectory,
    pub closed: EnvelopeTrajectory,
    pub lp: LpBoundCurve,
    pub report: DiagnosticsReport,
}

/// Runs the simulation, both envelopes and every check.
pub fn verify(cfg: &RunConfig) -> Result<VerifyOutcome, PipelineError> {
    let audit = audit(cfg)?;
    let (c_omega, constants) = c_omega(cfg)?;
    let traj = simulate(cfg)?;
    let measured = envelope(cfg, SourceKind::Measured, Some(&traj), c_omega)?;
    let closed = envelope(cfg, SourceKind::ClosedBound, None, c_omega)?;
    let lp = lp_curve(cfg, &traj, &audit, c_omega)?;
    let report = DiagnosticsReport::new(checks(cfg, &audit, c_omega, &traj, &measured, &closed, &lp)?);
    Ok(VerifyOutcome {
        audit,
        constants,
        c_omega,
        trajectory: traj,
        measured,
        closed,
        lp,
        report,
    })
}

/// Assembles the report. Claims whose hypotheses the audit rejects are
/// downgraded to informational.
pub fn checks(
    cfg: &RunConfig,
    audit: &HypothesisAudit,
    c_omega: f64,
    traj: &Trajectory,
    measured: &EnvelopeTrajectory,
    closed: &EnvelopeTrajectory,
    lp: &LpBoundCurve,
) -> Result<Vec<CheckRecord>, PipelineError> {
    let d = &cfg.diagnostics;
    let full = audit.passed;
    let signs = audit.sign_checks.all();
    let why_full = format!("hypotheses unmet (mu0_hat = {:.6}, mu = {})", audit.mu0_hat, cfg.mu);
    let why_signs = "motility sign conditions unmet";

    let mut out = vec![diag::check_run_completed(traj), diag::check_positivity(traj)];
    out.extend(diag::check_mass(traj, d.mass_c));
    out.push(diag::check_lp_bound(traj, lp, d.lp_c).gated(full, &why_full));
    out.push(diag::check_sandwich(traj, measured, d.sandwich_c)?.gated(signs, why_signs));
    out.push(
        diag::check_gradient_bound(traj, measured, c_omega, d.c_omega_safety, d.gradient_c)?.gated(signs, why_signs),
    );
    out.push(diag::check_envelope_distance(traj, measured, d.sandwich_c)?.gated(signs, why_signs));
    let mut rect_measured = diag::check_rectangle(measured).gated(full, &why_full);
    rect_measured.name = "rectangle-measured".into();
    let mut rect_closed = diag::check_rectangle(closed).gated(full, &why_full);
    rect_closed.name = "rectangle-closed-bound".into();
    out.push(rect_measured);
    out.push(rect_closed);
    if audit.growth_dominance() {
        out.push(diag::check_decay(closed, audit.mu0_hat, closed.t_end())?.gated(full, &why_full));
    } else {
        out.push(CheckRecord::informational("decay", "log-gap decay bound", why_full.clone()));
    }
    out.push(diag::check_gap_monotone(measured, d.gap_monotone_from).gated(full, &why_full));
    out.push(diag::check_convergence(traj, cfg.t_check(), d.eps).gated(full, &why_full));
    Ok(out)
}

#[derive(Serialize)]
struct Summary<'a> {
    audit: &'a HypothesisAudit,
    c_omega_hat: f64,
    constants: &'a Option<DomainConstants>,
    lp_blow_up_time: Option<f64>,
    passed: bool,
}

/// `verify` plus every artifact written under `dir`.
pub fn verify_to_dir(cfg: &RunConfig, dir: &Path) -> Result<VerifyOutcome, PipelineError> {
    let outcome = verify(cfg)?;
    output::write_trajectory(dir, cfg, &outcome.trajectory)?;
    output::write_envelope(&dir.join("envelope_measured.csv"), &outcome.measured, None)?;
    let mu0 = outcome.audit.growth_dominance().then_some(outcome.audit.mu0_hat);
    output::write_envelope(&dir.join("envelope_closed_bound.csv"), &outcome.closed, mu0)?;
    output::write_report(dir, &outcome.report)?;
    output::write_json(
        &dir.join("summary.json"),
        &Summary {
            audit: &outcome.audit,
            c_omega_hat: outcome.c_omega,
            constants: &outcome.constants,
            lp_blow_up_time: outcome.lp.blow_up_time,
            passed: outcome.report.passed,
        },
    )?;
    output::write_plot_script(dir)?;
    Ok(outcome)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub label: String,
    pub dir: PathBuf,
    pub audit_passed: bool,
    /// `None` when the point could not be evaluated.
    pub passed: Option<bool>,
    pub error: Option<String>,
}

/// Verifies every sweep point under `dir/<label>` with up to `workers` threads.
/// Results come back in sweep order regardless of scheduling.
pub fn sweep(cfg: &RunConfig, dir: &Path, workers: usize) -> Vec<SweepResult> {
    let points = cfg.sweep_points();
    let results: Mutex<Vec<Option<SweepResult>>> = Mutex::new(vec![None; points.len()]);
    let next = AtomicUsize::new(0);
    let workers = workers.clamp(1, points.len().max(1));
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                let Some((label, point)) = points.get(k) else { break };
                let point_dir = dir.join(label);
                let res = match verify_to_dir(point, &point_dir) {
                    Ok(o) => SweepResult {
                        label: label.clone(),
                        dir: point_dir,
                        audit_passed: o.audit.passed,
                        passed: Some(o.report.passed),
                        error: None,
                    },
                    Err(e) => SweepResult {
                        label: label.clone(),
                        dir: point_dir,
                        audit_passed: false,
                        passed: None,
                        error: Some(e.to_string()),
                    },
                };
                results.lock().expect("no poisoned workers")[k] = Some(res);
            });
        }
    });
    results
        .into_inner()
        .expect("no poisoned workers")
        .into_iter()
        .map(|r| r.expect("every point visited"))
        .collect()
}
