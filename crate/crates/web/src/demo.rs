//! JSON-in, JSON-out operations behind the browser page. Kept free of
//! wasm-bindgen so they run natively in tests.

use chemolab::comparison::decay_bound;
use chemolab::config::{RunConfig, SourceKind};
use chemolab::pde::Stepper;
use chemolab::pipeline;
use serde::{Deserialize, Serialize};

/// Page controls. Missing keys take the defaults below.
#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DemoParams {
    pub family: String,
    pub alpha: f64,
    pub epsilon: f64,
    pub mu: f64,
    pub points: usize,
    pub amplitude: f64,
    pub mode: u32,
    pub t_end: f64,
    pub frames: usize,
}

impl Default for DemoParams {
    fn default() -> Self {
        Self {
            family: "exponential".into(),
            alpha: 0.1,
            epsilon: 1.0,
            mu: 1.0,
            points: 81,
            amplitude: 0.5,
            mode: 1,
            t_end: 8.0,
            frames: 60,
        }
    }
}

const MAX_POINTS: usize = 201;
const MAX_T_END: f64 = 60.0;
const CURVE_SAMPLES: usize = 400;

impl DemoParams {
    pub fn from_json(text: &str) -> Result<Self, String> {
        let p: Self = if text.trim().is_empty() {
            Self::default()
        } else {
            serde_json::from_str(text).map_err(|e| format!("parameters: {e}"))?
        };
        if !(3..=MAX_POINTS).contains(&p.points) {
            return Err(format!("points must lie in 3..={MAX_POINTS}"));
        }
        if !(p.t_end > 0.0 && p.t_end <= MAX_T_END) {
            return Err(format!("t_end must lie in (0, {MAX_T_END}]"));
        }
        if p.frames < 2 {
            return Err("frames must be at least 2".into());
        }
        Ok(p)
    }

    fn motility_toml(&self) -> String {
        match self.family.as_str() {
            "inverse-power" => format!(
                "family = \"inverse-power\"\nepsilon = {:?}\nalpha = {:?}\n",
                self.epsilon, self.alpha
            ),
            other => format!("family = {other:?}\nalpha = {:?}\n", self.alpha),
        }
    }

    fn config(&self, stride: usize) -> Result<RunConfig, String> {
        let text = format!(
            "mu = {mu:?}\n\n[grid]\nextents = [1.0]\npoints = [{n}]\n\n[motility]\n{mot}\n[u0]\nkind = \"cosine\"\namplitude = {amp:?}\nmode = {mode}\n\n[scheme]\nt_end = {t:?}\noutput_stride = {stride}\n\n[diagnostics]\nconstant_samples = 16\naudit_points = 20000\neps = 0.05\n",
            mu = self.mu,
            n = self.points,
            mot = self.motility_toml(),
            amp = self.amplitude,
            mode = self.mode,
            t = self.t_end,
        );
        RunConfig::parse(&text).map_err(|e| e.to_string())
    }

    /// Stride that yields roughly `frames` snapshots.
    fn stride(&self) -> Result<usize, String> {
        let cfg = self.config(1)?;
        let grid = cfg.build_grid()?;
        let mut stepper = Stepper::new(grid, cfg.model(), cfg.scheme.clone()).map_err(|e| e.to_string())?;
        let state = stepper
            .state_from_density(0.0, cfg.initial_density(&grid))
            .map_err(|e| e.to_string())?;
        let dt = stepper.cfl_dt(&state).map_err(|e| e.to_string())?;
        let steps = (self.t_end / dt).ceil();
        Ok(((steps / self.frames as f64).ceil() as usize).max(1))
    }
}

fn thin<T: Copy>(xs: &[T], keep: usize) -> Vec<T> {
    if xs.len() <= keep {
        return xs.to_vec();
    }
    let last = xs.len() - 1;
    (0..keep).map(|k| xs[k * last / (keep - 1)]).collect()
}

#[derive(Debug, Serialize)]
pub struct Frame {
    pub t: f64,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

#[derive(Debug, Serialize)]
pub struct Band {
    pub t: Vec<f64>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

#[derive(Debug, Serialize)]
pub struct CheckRow {
    pub name: String,
    pub status: String,
    pub residual: f64,
    pub tolerance: f64,
}

#[derive(Debug, Serialize)]
pub struct SimulationView {
    pub x: Vec<f64>,
    pub frames: Vec<Frame>,
    pub range: Band,
    pub envelope: Band,
    pub steps: usize,
    pub failure: Option<String>,
    pub mu0_hat: f64,
    pub audit_passed: bool,
    pub checks: Vec<CheckRow>,
    pub passed: bool,
}

/// Runs and verifies the model; returns profiles, the observed range of `u`
/// and the measured envelope around it.
pub fn simulate(params: &DemoParams) -> Result<SimulationView, String> {
    let cfg = params.config(params.stride()?)?;
    let o = pipeline::verify(&cfg).map_err(|e| e.to_string())?;
    let traj = &o.trajectory;
    let x = (0..traj.grid.len()).map(|i| traj.grid.coords(i)[0]).collect();
    let frames = traj
        .snapshots
        .iter()
        .map(|s| Frame {
            t: s.t,
            u: s.u.values().to_vec(),
            v: s.v.values().to_vec(),
        })
        .collect();
    let range = Band {
        t: traj.snapshots.iter().map(|s| s.t).collect(),
        lo: traj.snapshots.iter().map(|s| s.u.min()).collect(),
        hi: traj.snapshots.iter().map(|s| s.u.max()).collect(),
    };
    let pts = thin(&o.measured.points, CURVE_SAMPLES);
    let envelope = Band {
        t: pts.iter().map(|p| p.t).collect(),
        lo: pts.iter().map(|p| p.envelope().lo()).collect(),
        hi: pts.iter().map(|p| p.envelope().hi()).collect(),
    };
    let checks = o
        .report
        .checks
        .iter()
        .map(|c| CheckRow {
            name: c.name.clone(),
            status: c.status.label().to_string(),
            residual: c.worst_residual,
            tolerance: c.tolerance,
        })
        .collect();
    Ok(SimulationView {
        x,
        frames,
        range,
        envelope,
        steps: traj.steps,
        failure: traj.failure.clone(),
        mu0_hat: o.audit.mu0_hat,
        audit_passed: o.audit.passed,
        checks,
        passed: o.report.passed,
    })
}

#[derive(Debug, Serialize)]
pub struct MotilityView {
    pub s: Vec<f64>,
    pub gamma: Vec<f64>,
    /// `−2γ′(s) + γ″(s)s`, bounded by `mu0_hat`.
    pub growth: Vec<f64>,
    /// `γ′(s)²/γ(s)`, bounded by `c_gamma_hat`.
    pub ratio: Vec<f64>,
    pub mu0_hat: f64,
    pub c_gamma_hat: f64,
    pub sign_checks: [bool; 4],
    pub passed: bool,
}

/// Audits the motility and samples the audited quantities on `[0, s_max]`.
pub fn motility(params: &DemoParams, s_max: f64) -> Result<MotilityView, String> {
    if !(s_max > 0.0 && s_max.is_finite()) {
        return Err("s_max must be positive".into());
    }
    let cfg = params.config(1)?;
    let audit = pipeline::audit(&cfg).map_err(|e| e.to_string())?;
    let gamma = cfg.motility();
    let s: Vec<f64> = (0..CURVE_SAMPLES).map(|k| s_max * k as f64 / (CURVE_SAMPLES - 1) as f64).collect();
    let d: Vec<_> = s.iter().map(|&x| gamma.eval_unchecked(x)).collect();
    let sc = audit.sign_checks;
    Ok(MotilityView {
        gamma: d.iter().map(|d| d.value).collect(),
        growth: d.iter().zip(&s).map(|(d, &x)| -2.0 * d.d1 + d.d2 * x).collect(),
        ratio: d.iter().map(|d| d.d1 * d.d1 / d.value).collect(),
        s,
        mu0_hat: audit.mu0_hat,
        c_gamma_hat: audit.c_gamma_hat,
        sign_checks: [sc.positive, sc.non_increasing, sc.convex, sc.third_derivative],
        passed: audit.passed,
    })
}

#[derive(Debug, Serialize)]
pub struct EnvelopeView {
    pub t: Vec<f64>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub log_gap: Vec<f64>,
    /// Empty unless `mu0_hat < mu`.
    pub bound_fast: Vec<f64>,
    pub bound_conservative: Vec<f64>,
    pub c_omega_hat: f64,
    pub mu0_hat: f64,
    pub left_rectangle: bool,
}

/// Closed-bound envelope (no simulation) with its log-gap decay bounds.
pub fn closed_envelope(params: &DemoParams) -> Result<EnvelopeView, String> {
    let cfg = params.config(1)?;
    let audit = pipeline::audit(&cfg).map_err(|e| e.to_string())?;
    let (c_omega, _) = pipeline::c_omega(&cfg).map_err(|e| e.to_string())?;
    let env = pipeline::envelope(&cfg, SourceKind::ClosedBound, None, c_omega).map_err(|e| e.to_string())?;
    let pts = thin(&env.points, CURVE_SAMPLES);
    let env0 = env.initial();
    let (mut fast, mut conservative) = (Vec::new(), Vec::new());
    if audit.growth_dominance() {
        for p in &pts {
            let b = decay_bound(&env0, cfg.mu, audit.mu0_hat, p.t).map_err(|e| e.to_string())?;
            fast.push(b.fast);
            conservative.push(b.conservative);
        }
    }
    Ok(EnvelopeView {
        t: pts.iter().map(|p| p.t).collect(),
        lo: pts.iter().map(|p| p.envelope().lo()).collect(),
        hi: pts.iter().map(|p| p.envelope().hi()).collect(),
        log_gap: pts.iter().map(|p| p.log_hi - p.log_lo).collect(),
        bound_fast: fast,
        bound_conservative: conservative,
        c_omega_hat: c_omega,
        mu0_hat: audit.mu0_hat,
        left_rectangle: env.rectangle_violation.is_some(),
    })
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String, String> {
    serde_json::to_string(value).map_err(|e| e.to_string())
}
