//! Screened Poisson solves `(I − Δ_h) v = f` with Neumann boundaries, and sampled
//! estimates of the domain constants
//!
//! * `c_Ω = sup ‖∇φ‖_∞ / ‖f‖_∞`
//! * `c_p = sup ‖φ‖_∞ / ‖f‖_p`
//!
//! where `φ` solves the screened problem for `f`.
//!
//! The discrete operator is self-adjoint in the trapezoid-weighted inner product,
//! so conjugate gradients run in that inner product. One-dimensional grids use the
//! exact tridiagonal factorization as preconditioner.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{Field, Grid};

pub const DEFAULT_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EllipticError {
    #[error("conjugate gradients did not converge in {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("tolerance must be positive, got {0}")]
    Tolerance(f64),
    #[error("right-hand side is not finite")]
    NonFinite,
    #[error("right-hand side lives on a different grid")]
    GridMismatch,
    #[error("invalid estimation request: {0}")]
    Estimation(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EllipticSolution {
    pub v: Field,
    /// Max-norm residual of `(I − Δ_h) v − f` on exit.
    pub residual_norm: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveStats {
    pub residual_norm: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone)]
enum Preconditioner {
    /// Inverse of the (constant) diagonal.
    Jacobi(f64),
    /// Thomas factorization of the full 1D operator.
    Tridiagonal {
        sub: Vec<f64>,
        c_prime: Vec<f64>,
        inv_pivot: Vec<f64>,
    },
}

impl Preconditioner {
    fn for_grid(grid: &Grid) -> Self {
        if grid.dim() == 1 {
            let n = grid.len();
            let ih2 = 1.0 / (grid.spacing(0) * grid.spacing(0));
            let diag = 1.0 + 2.0 * ih2;
            let mut sub = vec![-ih2; n];
            let mut sup = vec![-ih2; n];
            sub[0] = 0.0;
            sub[n - 1] = -2.0 * ih2;
            sup[0] = -2.0 * ih2;
            sup[n - 1] = 0.0;
            let mut c_prime = vec![0.0; n];
            let mut inv_pivot = vec![0.0; n];
            inv_pivot[0] = 1.0 / diag;
            c_prime[0] = sup[0] * inv_pivot[0];
            for i in 1..n {
                let pivot = diag - sub[i] * c_prime[i - 1];
                inv_pivot[i] = 1.0 / pivot;
                c_prime[i] = sup[i] * inv_pivot[i];
            }
            Self::Tridiagonal {
                sub,
                c_prime,
                inv_pivot,
            }
        } else {
            let diag: f64 = 1.0
                + (0..grid.dim())
                    .map(|a| 2.0 / (grid.spacing(a) * grid.spacing(a)))
                    .sum::<f64>();
            Self::Jacobi(1.0 / diag)
        }
    }

    fn apply(&self, r: &[f64], z: &mut [f64]) {
        match self {
            Self::Jacobi(inv) => {
                for (zi, ri) in z.iter_mut().zip(r) {
                    *zi = inv * ri;
                }
            }
            Self::Tridiagonal {
                sub,
                c_prime,
                inv_pivot,
            } => {
                let n = r.len();
                z[0] = r[0] * inv_pivot[0];
                for i in 1..n {
                    z[i] = (r[i] - sub[i] * z[i - 1]) * inv_pivot[i];
                }
                for i in (0..n - 1).rev() {
                    z[i] -= c_prime[i] * z[i + 1];
                }
            }
        }
    }
}

/// Reusable matrix-free solver holding the preconditioner and scratch buffers.
#[derive(Debug, Clone)]
pub struct ScreenedPoissonSolver {
    grid: Grid,
    weights: Vec<f64>,
    precond: Preconditioner,
    r: Vec<f64>,
    z: Vec<f64>,
    p: Vec<f64>,
    q: Vec<f64>,
}

impl ScreenedPoissonSolver {
    pub fn new(grid: Grid) -> Self {
        let n = grid.len();
        Self {
            grid,
            weights: grid.weights(),
            precond: Preconditioner::for_grid(&grid),
            r: vec![0.0; n],
            z: vec![0.0; n],
            p: vec![0.0; n],
            q: vec![0.0; n],
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// `out = (I − Δ_h) x`
    pub fn apply_operator(&self, x: &[f64], out: &mut [f64]) {
        self.grid.laplacian_into(x, out);
        for (o, xi) in out.iter_mut().zip(x) {
            *o = xi - *o;
        }
    }

    fn residual(&mut self, f: &[f64], x: &[f64]) -> f64 {
        let mut r = std::mem::take(&mut self.r);
        self.apply_operator(x, &mut r);
        let mut norm = 0.0f64;
        for (ri, fi) in r.iter_mut().zip(f) {
            *ri = fi - *ri;
            norm = norm.max(ri.abs());
        }
        self.r = r;
        norm
    }

    fn dot(&self, a: &[f64], b: &[f64]) -> f64 {
        self.weights
            .iter()
            .zip(a.iter().zip(b))
            .map(|(w, (x, y))| w * x * y)
            .sum()
    }

    /// Solves in place, using the incoming `x` as initial guess. Iteration cap is
    /// ten times the number of vertices.
    pub fn solve(&mut self, f: &[f64], x: &mut [f64], tol: f64) -> Result<SolveStats, EllipticError> {
        if !(tol > 0.0) {
            return Err(EllipticError::Tolerance(tol));
        }
        if f.iter().any(|v| !v.is_finite()) {
            return Err(EllipticError::NonFinite);
        }
        let cap = 10 * self.grid.len();
        let mut iterations = 0;
        let mut residual = self.residual(f, x);

        // Outer loop restarts from the true residual if the recursive one drifted.
        while residual > tol {
            if iterations >= cap {
                return Err(EllipticError::NotConverged {
                    iterations,
                    residual,
                });
            }
            self.precond.apply(&self.r, &mut self.z);
            self.p.copy_from_slice(&self.z);
            let mut rz = self.dot(&self.r, &self.z);
            loop {
                let mut q = std::mem::take(&mut self.q);
                self.apply_operator(&self.p, &mut q);
                let pq = self.dot(&self.p, &q);
                self.q = q;
                iterations += 1;
                if !(pq > 0.0) {
                    break;
                }
                let alpha = rz / pq;
                let mut rec = 0.0f64;
                for i in 0..x.len() {
                    x[i] += alpha * self.p[i];
                    self.r[i] -= alpha * self.q[i];
                    rec = rec.max(self.r[i].abs());
                }
                if rec <= tol || iterations >= cap {
                    break;
                }
                self.precond.apply(&self.r, &mut self.z);
                let rz_new = self.dot(&self.r, &self.z);
                let beta = rz_new / rz;
                rz = rz_new;
                for (pi, zi) in self.p.iter_mut().zip(&self.z) {
                    *pi = zi + beta * *pi;
                }
            }
            residual = self.residual(f, x);
        }
        Ok(SolveStats {
            residual_norm: residual,
            iterations,
        })
    }
}

pub fn solve_screened_poisson(grid: &Grid, f: &Field, tol: f64) -> Result<EllipticSolution, EllipticError> {
    if f.grid() != grid {
        return Err(EllipticError::GridMismatch);
    }
    let mut solver = ScreenedPoissonSolver::new(*grid);
    let mut x = f.values().to_vec();
    let stats = solver.solve(f.values(), &mut x, tol)?;
    Ok(EllipticSolution {
        v: Field::new(*grid, x).map_err(|_| EllipticError::NonFinite)?,
        residual_norm: stats.residual_norm,
        iterations: stats.iterations,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainConstants {
    pub c_omega_hat: f64,
    /// Keyed by the exponent as written (`"4"`, `"2.5"`).
    pub c_p: BTreeMap<String, f64>,
    /// Random right-hand sides drawn (deterministic probes come on top).
    pub samples: usize,
    pub seed: u64,
}

impl DomainConstants {
    pub fn c_p(&self, p: f64) -> Option<f64> {
        self.c_p.get(&p_key(p)).copied()
    }
}

pub fn p_key(p: f64) -> String {
    format!("{p}")
}

/// Right-hand sides used by the estimator: fixed probes first, then
/// `n_samples` seeded random fields. The random sequence does not depend on
/// `n_samples`, so a smaller request sees a prefix of a larger one.
pub fn sample_fields(grid: &Grid, n_samples: usize, seed: u64) -> Vec<Field> {
    let lx = grid.extents()[0];
    let ly = if grid.dim() == 2 { grid.extents()[1] } else { 1.0 };
    let mut fields = vec![
        grid.constant(1.0),
        grid.sample(|x, y| bump(x - 0.5 * lx, y - 0.5 * ly, 0.1 * lx, grid.dim())),
        grid.sample(|x, y| bump(x, y, 0.1 * lx, grid.dim())),
        smooth_once(&grid.sample(|x, _| if x < 0.5 * lx { 1.0 } else { -1.0 })),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for k in 0..n_samples {
        let f = if k % 2 == 0 {
            random_smooth(grid, &mut rng)
        } else {
            smooth_once(&random_sign_pattern(grid, &mut rng))
        };
        fields.push(f);
    }
    fields
}

fn bump(dx: f64, dy: f64, width: f64, dim: usize) -> f64 {
    let r2 = dx * dx + if dim == 2 { dy * dy } else { 0.0 };
    (-r2 / (width * width)).exp()
}

fn random_smooth(grid: &Grid, rng: &mut ChaCha8Rng) -> Field {
    let lx = grid.extents()[0];
    let ly = if grid.dim() == 2 { grid.extents()[1] } else { 1.0 };
    let modes: Vec<(f64, f64, f64)> = (0..6)
        .map(|_| {
            (
                rng.random_range(-1.0..1.0),
                rng.random_range(0..8) as f64,
                rng.random_range(0..8) as f64,
            )
        })
        .collect();
    let dim = grid.dim();
    grid.sample(|x, y| {
        modes
            .iter()
            .map(|&(c, kx, ky)| {
                let ybit = if dim == 2 { (ky * PI * y / ly).cos() } else { 1.0 };
                c * (kx * PI * x / lx).cos() * ybit
            })
            .sum()
    })
}

fn random_switches(rng: &mut ChaCha8Rng, extent: f64) -> (f64, Vec<f64>) {
    let count = rng.random_range(1..=5);
    let mut cuts: Vec<f64> = (0..count).map(|_| rng.random_range(0.0..extent)).collect();
    cuts.sort_by(f64::total_cmp);
    let start = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    (start, cuts)
}

fn sign_at(start: f64, cuts: &[f64], x: f64) -> f64 {
    let crossed = cuts.iter().filter(|&&c| x >= c).count();
    if crossed % 2 == 0 {
        start
    } else {
        -start
    }
}

fn random_sign_pattern(grid: &Grid, rng: &mut ChaCha8Rng) -> Field {
    let (sx, cx) = random_switches(rng, grid.extents()[0]);
    let (sy, cy) = if grid.dim() == 2 {
        random_switches(rng, grid.extents()[1])
    } else {
        (1.0, Vec::new())
    };
    grid.sample(|x, y| sign_at(sx, &cx, x) * sign_at(sy, &cy, y))
}

/// One pass of the `[1, 2, 1] / 4` filter along every axis, mirrored at the ends.
fn smooth_once(f: &Field) -> Field {
    let grid = *f.grid();
    let mut values = f.values().to_vec();
    let nx = grid.points()[0];
    let ny = if grid.dim() == 2 { grid.points()[1] } else { 1 };
    let mut filtered = values.clone();
    for j in 0..ny {
        for i in 0..nx {
            let im = if i == 0 { 1 } else { i - 1 };
            let ip = if i == nx - 1 { nx - 2 } else { i + 1 };
            filtered[i + nx * j] =
                0.25 * (values[im + nx * j] + 2.0 * values[i + nx * j] + values[ip + nx * j]);
        }
    }
    values.copy_from_slice(&filtered);
    if grid.dim() == 2 {
        for j in 0..ny {
            let jm = if j == 0 { 1 } else { j - 1 };
            let jp = if j == ny - 1 { ny - 2 } else { j + 1 };
            for i in 0..nx {
                filtered[i + nx * j] =
                    0.25 * (values[i + nx * jm] + 2.0 * values[i + nx * j] + values[i + nx * jp]);
            }
        }
    }
    Field::new(grid, filtered).expect("filter preserves finiteness")
}

/// Ratios `(‖∇φ‖_∞/‖f‖_∞, [‖φ‖_∞/‖f‖_p for p in p_list])` for one right-hand side.
pub fn constant_ratios(grid: &Grid, f: &Field, p_list: &[f64], tol: f64) -> Result<(f64, Vec<f64>), EllipticError> {
    let sol = solve_screened_poisson(grid, f, tol)?;
    let f_inf = f.sup_norm();
    if f_inf == 0.0 {
        return Ok((0.0, vec![0.0; p_list.len()]));
    }
    let grad = crate::grid::grad_sup_norm(&sol.v) / f_inf;
    let v_inf = sol.v.sup_norm();
    let lp = p_list.iter().map(|&p| v_inf / f.lp_norm(p)).collect();
    Ok((grad, lp))
}

pub fn estimate_domain_constants(
    grid: &Grid,
    n_samples: usize,
    p_list: &[f64],
    seed: u64,
) -> Result<DomainConstants, EllipticError> {
    if n_samples == 0 {
        return Err(EllipticError::Estimation("n_samples must be at least 1".into()));
    }
    let half_dim = grid.dim() as f64 / 2.0;
    if let Some(bad) = p_list.iter().find(|&&p| !(p > half_dim && p.is_finite())) {
        return Err(EllipticError::Estimation(format!(
            "p = {bad} must be finite and exceed N/2 = {half_dim}"
        )));
    }
    let mut c_omega_hat = 0.0f64;
    let mut c_p = vec![0.0f64; p_list.len()];
    for f in sample_fields(grid, n_samples, seed) {
        let (grad, lp) = constant_ratios(grid, &f, p_list, DEFAULT_TOL)?;
        c_omega_hat = c_omega_hat.max(grad);
        for (best, r) in c_p.iter_mut().zip(lp) {
            *best = best.max(r);
        }
    }
    Ok(DomainConstants {
        c_omega_hat,
        c_p: p_list.iter().map(|&p| p_key(p)).zip(c_p).collect(),
        samples: n_samples,
        seed,
    })
}
