//! Vertex-centered structured grids on intervals and rectangles with homogeneous
//! Neumann boundaries.
//!
//! Boundary stencils use mirror ghosts (`f[-1] = f[1]`). With trapezoidal weights
//! this makes the discrete Laplacian self-adjoint, kills constants exactly, and
//! integrates to zero.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("dimension must be 1 or 2, got {0}")]
    Dimension(usize),
    #[error("axis {axis}: need at least 3 points, got {points}")]
    TooFewPoints { axis: usize, points: usize },
    #[error("axis {axis}: extent must be positive and finite, got {extent}")]
    Extent { axis: usize, extent: f64 },
    #[error("field has {got} values but grid has {expected} vertices")]
    Size { expected: usize, got: usize },
    #[error("field contains a non-finite value at vertex {0}")]
    NonFinite(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    dim: usize,
    extents: [f64; 2],
    points: [usize; 2],
}

impl Grid {
    pub fn new_1d(extent: f64, points: usize) -> Result<Self, GridError> {
        Self::new(&[extent], &[points])
    }

    pub fn new_2d(extents: [f64; 2], points: [usize; 2]) -> Result<Self, GridError> {
        Self::new(&extents, &points)
    }

    /// `points[k]` vertices along axis `k`, spanning `[0, extents[k]]`.
    pub fn new(extents: &[f64], points: &[usize]) -> Result<Self, GridError> {
        let dim = extents.len();
        if !(dim == 1 || dim == 2) || points.len() != dim {
            return Err(GridError::Dimension(dim.max(points.len())));
        }
        let mut e = [1.0; 2];
        let mut p = [1usize; 2];
        for axis in 0..dim {
            if !(extents[axis] > 0.0 && extents[axis].is_finite()) {
                return Err(GridError::Extent {
                    axis,
                    extent: extents[axis],
                });
            }
            if points[axis] < 3 {
                return Err(GridError::TooFewPoints {
                    axis,
                    points: points[axis],
                });
            }
            e[axis] = extents[axis];
            p[axis] = points[axis];
        }
        Ok(Self {
            dim,
            extents: e,
            points: p,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn extents(&self) -> &[f64] {
        &self.extents[..self.dim]
    }

    pub fn points(&self) -> &[usize] {
        &self.points[..self.dim]
    }

    pub fn len(&self) -> usize {
        self.points[0] * self.points[1]
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.extents[axis] / (self.points[axis] - 1) as f64
    }

    pub fn min_spacing(&self) -> f64 {
        (0..self.dim)
            .map(|a| self.spacing(a))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn volume(&self) -> f64 {
        self.extents().iter().product()
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        i + self.points[0] * j
    }

    /// Physical coordinates of vertex `idx` (second entry is 0 in 1D).
    pub fn coords(&self, idx: usize) -> [f64; 2] {
        let nx = self.points[0];
        let (i, j) = (idx % nx, idx / nx);
        [
            i as f64 * self.spacing(0),
            if self.dim == 2 {
                j as f64 * self.spacing(1)
            } else {
                0.0
            },
        ]
    }

    /// Trapezoidal quadrature weight of each vertex.
    pub fn weights(&self) -> Vec<f64> {
        let axis_weights = |axis: usize| -> Vec<f64> {
            let n = self.points[axis];
            let h = self.spacing(axis);
            (0..n)
                .map(|i| if i == 0 || i == n - 1 { 0.5 * h } else { h })
                .collect()
        };
        let wx = axis_weights(0);
        if self.dim == 1 {
            return wx;
        }
        let wy = axis_weights(1);
        let mut w = Vec::with_capacity(self.len());
        for wyj in &wy {
            for wxi in &wx {
                w.push(wxi * wyj);
            }
        }
        w
    }

    /// Samples `f(x, y)` at every vertex (`y = 0` in 1D).
    pub fn sample<F: Fn(f64, f64) -> f64>(&self, f: F) -> Field {
        let values = (0..self.len())
            .map(|idx| {
                let [x, y] = self.coords(idx);
                f(x, y)
            })
            .collect();
        Field { grid: *self, values }
    }

    pub fn constant(&self, c: f64) -> Field {
        Field {
            grid: *self,
            values: vec![c; self.len()],
        }
    }

    /// Neumann Laplacian of `f` into `out`, raw slices for the steppers.
    pub fn laplacian_into(&self, f: &[f64], out: &mut [f64]) {
        debug_assert_eq!(f.len(), self.len());
        debug_assert_eq!(out.len(), self.len());
        let nx = self.points[0];
        let ihx2 = 1.0 / (self.spacing(0) * self.spacing(0));
        if self.dim == 1 {
            laplacian_line(f, out, ihx2);
            return;
        }
        let ny = self.points[1];
        let ihy2 = 1.0 / (self.spacing(1) * self.spacing(1));
        for j in 0..ny {
            let row = j * nx;
            laplacian_line(&f[row..row + nx], &mut out[row..row + nx], ihx2);
        }
        for j in 0..ny {
            let jm = if j == 0 { 1 } else { j - 1 };
            let jp = if j == ny - 1 { ny - 2 } else { j + 1 };
            for i in 0..nx {
                let c = f[i + nx * j];
                out[i + nx * j] += ihy2 * (f[i + nx * jm] - 2.0 * c + f[i + nx * jp]);
            }
        }
    }

    /// Gradient at vertex `idx` using centered differences with mirror ghosts, so
    /// the normal component vanishes on the boundary.
    #[inline]
    pub fn gradient_mirror(&self, f: &[f64], idx: usize) -> [f64; 2] {
        let nx = self.points[0];
        let (i, j) = (idx % nx, idx / nx);
        let gx = if i == 0 || i == nx - 1 {
            0.0
        } else {
            (f[idx + 1] - f[idx - 1]) / (2.0 * self.spacing(0))
        };
        let gy = if self.dim == 1 {
            0.0
        } else {
            let ny = self.points[1];
            if j == 0 || j == ny - 1 {
                0.0
            } else {
                (f[idx + nx] - f[idx - nx]) / (2.0 * self.spacing(1))
            }
        };
        [gx, gy]
    }

    /// Gradient at vertex `idx`, centered inside and one-sided second order on the
    /// boundary.
    #[inline]
    pub fn gradient_one_sided(&self, f: &[f64], idx: usize) -> [f64; 2] {
        let nx = self.points[0];
        let (i, j) = (idx % nx, idx / nx);
        let gx = axis_derivative(f, idx, 1, i, nx, self.spacing(0));
        let gy = if self.dim == 1 {
            0.0
        } else {
            axis_derivative(f, idx, nx, j, self.points[1], self.spacing(1))
        };
        [gx, gy]
    }

    pub fn grad_sup_norm_raw(&self, f: &[f64]) -> f64 {
        (0..self.len())
            .map(|idx| {
                let [gx, gy] = self.gradient_one_sided(f, idx);
                (gx * gx + gy * gy).sqrt()
            })
            .fold(0.0, f64::max)
    }

    pub fn integrate_raw(&self, f: &[f64]) -> f64 {
        let nx = self.points[0];
        let hx = self.spacing(0);
        let line = |row: &[f64]| -> f64 {
            let inner: f64 = row[1..nx - 1].iter().sum();
            hx * (inner + 0.5 * (row[0] + row[nx - 1]))
        };
        if self.dim == 1 {
            return line(f);
        }
        let ny = self.points[1];
        let hy = self.spacing(1);
        let mut total = 0.0;
        for j in 0..ny {
            let w = if j == 0 || j == ny - 1 { 0.5 * hy } else { hy };
            total += w * line(&f[j * nx..(j + 1) * nx]);
        }
        total
    }
}

#[inline]
fn axis_derivative(f: &[f64], idx: usize, stride: usize, pos: usize, n: usize, h: f64) -> f64 {
    if pos == 0 {
        (-3.0 * f[idx] + 4.0 * f[idx + stride] - f[idx + 2 * stride]) / (2.0 * h)
    } else if pos == n - 1 {
        (3.0 * f[idx] - 4.0 * f[idx - stride] + f[idx - 2 * stride]) / (2.0 * h)
    } else {
        (f[idx + stride] - f[idx - stride]) / (2.0 * h)
    }
}

#[inline]
fn laplacian_line(f: &[f64], out: &mut [f64], ih2: f64) {
    let n = f.len();
    out[0] = 2.0 * ih2 * (f[1] - f[0]);
    for k in 1..n - 1 {
        out[k] = ih2 * (f[k - 1] - 2.0 * f[k] + f[k + 1]);
    }
    out[n - 1] = 2.0 * ih2 * (f[n - 2] - f[n - 1]);
}

/// Scalar values at every vertex of a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self, GridError> {
        if values.len() != grid.len() {
            return Err(GridError::Size {
                expected: grid.len(),
                got: values.len(),
            });
        }
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(GridError::NonFinite(bad));
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `max |f − c|`
    pub fn sup_dist_to(&self, c: f64) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max((v - c).abs()))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Field {
        debug_assert_eq!(self.grid, other.grid);
        Field {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    /// Discrete `L^p` norm under trapezoidal quadrature.
    pub fn lp_norm(&self, p: f64) -> f64 {
        if p.is_infinite() {
            return self.sup_norm();
        }
        integrate(&self.map(|v| v.abs().powf(p))).powf(1.0 / p)
    }

    /// One row per vertex: coordinates then value.
    pub fn to_csv(&self, column: &str) -> String {
        let mut out = String::new();
        if self.grid.dim == 1 {
            let _ = writeln!(out, "x,{column}");
        } else {
            let _ = writeln!(out, "x,y,{column}");
        }
        for (idx, v) in self.values.iter().enumerate() {
            let [x, y] = self.grid.coords(idx);
            if self.grid.dim == 1 {
                let _ = writeln!(out, "{x},{v}");
            } else {
                let _ = writeln!(out, "{x},{y},{v}");
            }
        }
        out
    }
}

pub fn laplacian_neumann(f: &Field) -> Field {
    let mut out = vec![0.0; f.values.len()];
    f.grid.laplacian_into(&f.values, &mut out);
    Field {
        grid: f.grid,
        values: out,
    }
}

/// Maximum over vertices of the Euclidean norm of the discrete gradient.
pub fn grad_sup_norm(f: &Field) -> f64 {
    f.grid.grad_sup_norm_raw(&f.values)
}

/// Trapezoidal quadrature, exact for affine fields.
pub fn integrate(f: &Field) -> f64 {
    f.grid.integrate_raw(&f.values)
}
