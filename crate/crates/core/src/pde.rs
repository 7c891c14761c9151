//! Explicit time stepping of the density equation
//! `u_t = Δ(γ(v)u) + μu(1 − u)` coupled to the elliptic solve `−Δv + v = u`.
//!
//! Two spatial forms are provided. [`SpatialForm::Conservative`] applies the
//! Neumann stencil to the composite field `γ(v)u`. [`SpatialForm::NonDivergence`]
//! expands the operator as
//! `γ(v)Δu + 2γ′(v)∇v·∇u + uγ′(v)Δv + uγ″(v)|∇v|²` and replaces `Δv` by `v − f`
//! using the elliptic equation, where `f` is the elliptic right-hand side.
//!
//! The optional regularization index `n` switches to the truncated problem with
//! reaction `μu(1 − u₊)` and elliptic right-hand side `u / (1 + u₊/n)`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::elliptic::{EllipticError, ScreenedPoissonSolver, DEFAULT_TOL};
use crate::grid::{Field, Grid};
use crate::motility::{MotilityFunction, MotilitySpec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PdeError {
    #[error("invalid scheme configuration: {0}")]
    Config(String),
    #[error("invalid initial data: {0}")]
    InitialData(String),
    #[error("time step {dt:e} exceeds the stability limit {limit:e}")]
    CflViolation { dt: f64, limit: f64 },
    #[error("motility vanishes on the current signal range; diffusion is degenerate")]
    DegenerateDiffusion,
    #[error("non-finite density at t = {t}")]
    BlowUp { t: f64 },
    #[error(transparent)]
    Elliptic(#[from] EllipticError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SpatialForm {
    #[default]
    Conservative,
    NonDivergence,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SchemeConfig {
    pub form: SpatialForm,
    /// Present: run the truncated problem with this index.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub regularization: Option<u32>,
    pub cfl_safety: f64,
    pub t_end: f64,
    /// Steps between recorded snapshots.
    pub output_stride: usize,
    pub elliptic_tol: f64,
}

impl Default for SchemeConfig {
    fn default() -> Self {
        Self {
            form: SpatialForm::Conservative,
            regularization: None,
            cfl_safety: 0.9,
            t_end: 1.0,
            output_stride: 1000,
            elliptic_tol: DEFAULT_TOL,
        }
    }
}

impl SchemeConfig {
    pub fn validate(&self) -> Result<(), PdeError> {
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            return Err(PdeError::Config(format!(
                "cfl_safety must lie in (0, 1], got {}",
                self.cfl_safety
            )));
        }
        if self.regularization == Some(0) {
            return Err(PdeError::Config("regularization index must be at least 1".into()));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(PdeError::Config(format!("t_end must be finite and non-negative, got {}", self.t_end)));
        }
        if self.output_stride == 0 {
            return Err(PdeError::Config("output_stride must be at least 1".into()));
        }
        if !(self.elliptic_tol > 0.0) {
            return Err(PdeError::Config(format!("elliptic_tol must be positive, got {}", self.elliptic_tol)));
        }
        Ok(())
    }
}

/// Motility and logistic rate.
#[derive(Debug, Clone)]
pub struct Model {
    pub gamma: MotilityFunction,
    pub mu: f64,
}

impl Model {
    pub fn new(gamma: MotilityFunction, mu: f64) -> Result<Self, PdeError> {
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(PdeError::Config(format!("mu must be positive and finite, got {mu}")));
        }
        Ok(Self { gamma, mu })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimState {
    pub t: f64,
    pub u: Field,
    pub v: Field,
    /// `‖∇v‖_∞` of the current signal.
    pub a: f64,
}

/// Elliptic right-hand side for density `u`.
#[inline]
fn elliptic_source(u: f64, regularization: Option<u32>) -> f64 {
    match regularization {
        None => u,
        Some(n) => u / (1.0 + u.max(0.0) / n as f64),
    }
}

#[inline]
fn reaction(u: f64, mu: f64, regularization: Option<u32>) -> f64 {
    match regularization {
        None => mu * u * (1.0 - u),
        Some(_) => mu * u * (1.0 - u.max(0.0)),
    }
}

/// Owns the solver and scratch buffers for one run.
#[derive(Debug, Clone)]
pub struct Stepper {
    grid: Grid,
    model: Model,
    cfg: SchemeConfig,
    solver: ScreenedPoissonSolver,
    gamma_v: Vec<f64>,
    dgamma_v: Vec<f64>,
    ddgamma_v: Vec<f64>,
    source: Vec<f64>,
    work: Vec<f64>,
    lap: Vec<f64>,
}

impl Stepper {
    pub fn new(grid: Grid, model: Model, cfg: SchemeConfig) -> Result<Self, PdeError> {
        cfg.validate()?;
        let n = grid.len();
        Ok(Self {
            grid,
            model,
            cfg,
            solver: ScreenedPoissonSolver::new(grid),
            gamma_v: vec![0.0; n],
            dgamma_v: vec![0.0; n],
            ddgamma_v: vec![0.0; n],
            source: vec![0.0; n],
            work: vec![0.0; n],
            lap: vec![0.0; n],
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn config(&self) -> &SchemeConfig {
        &self.cfg
    }

    /// Builds the state at time `t` for density `u`, solving for the signal.
    pub fn state_from_density(&mut self, t: f64, u: Field) -> Result<SimState, PdeError> {
        if u.grid() != &self.grid {
            return Err(PdeError::InitialData("density lives on a different grid".into()));
        }
        let mut v = u.values().to_vec();
        self.solve_signal(u.values(), &mut v)?;
        let a = self.grid.grad_sup_norm_raw(&v);
        let v = Field::new(self.grid, v).map_err(|_| PdeError::BlowUp { t })?;
        Ok(SimState { t, u, v, a })
    }

    fn solve_signal(&mut self, u: &[f64], v: &mut [f64]) -> Result<(), PdeError> {
        let reg = self.cfg.regularization;
        for (s, &ui) in self.source.iter_mut().zip(u) {
            *s = elliptic_source(ui, reg);
        }
        self.solver.solve(&self.source, v, self.cfg.elliptic_tol)?;
        Ok(())
    }

    /// Stability-limited step for the current state:
    /// `cfl_safety · h² / (2·dim·max γ(v))`, capped by `1 / (2μ·max(1, max u))`.
    pub fn cfl_dt(&self, state: &SimState) -> Result<f64, PdeError> {
        let gamma_max = state
            .v
            .values()
            .iter()
            .map(|&v| self.model.gamma.value(v))
            .fold(0.0, f64::max);
        self.cfl_from_gamma_max(gamma_max, state.u.max())
    }

    fn cfl_from_gamma_max(&self, gamma_max: f64, u_max: f64) -> Result<f64, PdeError> {
        if !(gamma_max > 0.0) {
            return Err(PdeError::DegenerateDiffusion);
        }
        let h = self.grid.min_spacing();
        let diffusion = self.cfg.cfl_safety * h * h / (2.0 * self.grid.dim() as f64 * gamma_max);
        let reaction = 1.0 / (2.0 * self.model.mu * u_max.max(1.0));
        Ok(diffusion.min(reaction))
    }

    /// Evaluates the motility on the current signal and returns the stable step.
    fn prepare(&mut self, state: &SimState) -> Result<f64, PdeError> {
        let need_derivs = self.cfg.form == SpatialForm::NonDivergence;
        let mut gamma_max = 0.0f64;
        for (k, &v) in state.v.values().iter().enumerate() {
            if need_derivs {
                let d = self.model.gamma.eval_unchecked(v);
                self.gamma_v[k] = d.value;
                self.dgamma_v[k] = d.d1;
                self.ddgamma_v[k] = d.d2;
            } else {
                self.gamma_v[k] = self.model.gamma.value(v);
            }
            gamma_max = gamma_max.max(self.gamma_v[k]);
        }
        self.cfl_from_gamma_max(gamma_max, state.u.max())
    }

    /// Advances `state` by `dt`, which must not exceed the stable step.
    pub fn step(&mut self, state: &mut SimState, dt: f64) -> Result<(), PdeError> {
        let limit = self.prepare(state)?;
        if !(dt > 0.0) || dt > limit * (1.0 + 1e-12) {
            return Err(PdeError::CflViolation { dt, limit });
        }
        self.advance(state, dt)
    }

    fn advance(&mut self, state: &mut SimState, dt: f64) -> Result<(), PdeError> {
        let mu = self.model.mu;
        let reg = self.cfg.regularization;
        let n = self.grid.len();
        match self.cfg.form {
            SpatialForm::Conservative => {
                let u = state.u.values();
                for k in 0..n {
                    self.work[k] = self.gamma_v[k] * u[k];
                }
                self.grid.laplacian_into(&self.work, &mut self.lap);
                let u = state.u.values_mut();
                for k in 0..n {
                    u[k] += dt * (self.lap[k] + reaction(u[k], mu, reg));
                }
            }
            SpatialForm::NonDivergence => {
                let (u, v) = (state.u.values(), state.v.values());
                self.grid.laplacian_into(u, &mut self.lap);
                for k in 0..n {
                    let gu = self.grid.gradient_mirror(u, k);
                    let gv = self.grid.gradient_mirror(v, k);
                    let cross = gu[0] * gv[0] + gu[1] * gv[1];
                    let grad_v2 = gv[0] * gv[0] + gv[1] * gv[1];
                    let lap_v = v[k] - elliptic_source(u[k], reg);
                    self.work[k] = self.gamma_v[k] * self.lap[k]
                        + 2.0 * self.dgamma_v[k] * cross
                        + u[k] * self.dgamma_v[k] * lap_v
                        + u[k] * self.ddgamma_v[k] * grad_v2
                        + reaction(u[k], mu, reg);
                }
                let u = state.u.values_mut();
                for k in 0..n {
                    u[k] += dt * self.work[k];
                }
            }
        }
        let t_new = state.t + dt;
        if !state.u.is_finite() {
            return Err(PdeError::BlowUp { t: t_new });
        }
        self.solve_signal(state.u.values(), state.v.values_mut())?;
        state.a = self.grid.grad_sup_norm_raw(state.v.values());
        state.t = t_new;
        Ok(())
    }
}

/// Stable step for `state` under `model` and `cfg`.
pub fn cfl_dt(state: &SimState, model: &Model, cfg: &SchemeConfig) -> Result<f64, PdeError> {
    Stepper::new(*state.u.grid(), model.clone(), cfg.clone())?.cfl_dt(state)
}

/// One explicit step returning the new state.
pub fn step(state: &SimState, model: &Model, cfg: &SchemeConfig, dt: f64) -> Result<SimState, PdeError> {
    let mut stepper = Stepper::new(*state.u.grid(), model.clone(), cfg.clone())?;
    let mut next = state.clone();
    stepper.step(&mut next, dt)?;
    Ok(next)
}

/// `a(t)` at every step of a run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ASeries {
    pub t: Vec<f64>,
    pub a: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub grid: Grid,
    pub motility: MotilitySpec,
    pub mu: f64,
    pub scheme: SchemeConfig,
    pub snapshots: Vec<SimState>,
    pub a_series: ASeries,
    /// `∫₀ᵗ μ(∫u − ∫u²) ds` at each snapshot, trapezoid rule per step.
    #[serde(default)]
    pub growth: Vec<f64>,
    pub steps: usize,
    pub max_dt: f64,
    /// Set when the run stopped early; snapshots up to the failure are kept.
    pub failure: Option<String>,
}

impl Trajectory {
    pub fn initial(&self) -> &SimState {
        &self.snapshots[0]
    }

    pub fn last(&self) -> &SimState {
        self.snapshots.last().expect("trajectory always holds the initial state")
    }

    pub fn completed(&self) -> bool {
        self.failure.is_none()
    }
}

/// Checks the initial density is finite and bounded away from zero.
pub fn validate_initial_density(u0: &Field) -> Result<(), PdeError> {
    if !u0.is_finite() {
        return Err(PdeError::InitialData("initial density is not finite".into()));
    }
    let min = u0.min();
    if !(min > 0.0) {
        return Err(PdeError::InitialData(format!(
            "initial density must be bounded below by a positive constant, min = {min}"
        )));
    }
    Ok(())
}

/// Integrates from `u0` to `cfg.t_end` with the adaptive stable step.
pub fn run(u0: &Field, model: &Model, cfg: &SchemeConfig) -> Result<Trajectory, PdeError> {
    validate_initial_density(u0)?;
    let grid = *u0.grid();
    let mut stepper = Stepper::new(grid, model.clone(), cfg.clone())?;
    let mut state = stepper.state_from_density(0.0, u0.clone())?;

    let mut traj = Trajectory {
        grid,
        motility: model.gamma.spec(),
        mu: model.mu,
        scheme: cfg.clone(),
        snapshots: vec![state.clone()],
        a_series: ASeries {
            t: vec![0.0],
            a: vec![state.a],
        },
        growth: vec![0.0],
        steps: 0,
        max_dt: 0.0,
        failure: None,
    };
    let mut rate = growth_rate(&state.u, model.mu);
    let mut growth = 0.0;

    let t_end = cfg.t_end;
    let end_slack = 1e-12 * t_end.max(1.0);
    while state.t < t_end - end_slack {
        let limit = match stepper.prepare(&state) {
            Ok(dt) => dt,
            Err(e) => {
                traj.failure = Some(e.to_string());
                break;
            }
        };
        let remaining = t_end - state.t;
        // Avoid a sliver step at the end.
        let dt = if remaining <= limit * (1.0 + 1e-9) {
            remaining
        } else if remaining < 2.0 * limit {
            0.5 * remaining
        } else {
            limit
        };
        if let Err(e) = stepper.advance(&mut state, dt) {
            traj.failure = Some(e.to_string());
            break;
        }
        if remaining <= limit * (1.0 + 1e-9) {
            state.t = t_end;
        }
        let next = growth_rate(&state.u, model.mu);
        growth += 0.5 * dt * (rate + next);
        rate = next;
        traj.steps += 1;
        traj.max_dt = traj.max_dt.max(dt);
        traj.a_series.t.push(state.t);
        traj.a_series.a.push(state.a);
        let at_end = state.t >= t_end - end_slack;
        if traj.steps % cfg.output_stride == 0 || at_end {
            traj.snapshots.push(state.clone());
            traj.growth.push(growth);
        }
    }
    Ok(traj)
}

/// `μ(∫u − ∫u²)`, the rate of change of mass.
fn growth_rate(u: &Field, mu: f64) -> f64 {
    let vals = u.values();
    let sq: Vec<f64> = vals.iter().map(|x| x * x).collect();
    mu * (u.grid().integrate_raw(vals) - u.grid().integrate_raw(&sq))
}
