//! Numerical laboratory for the parabolic–elliptic chemotaxis system with
//! density-suppressed motility and logistic growth
//!
//! ```text
//! u_t = Δ(γ(v)u) + μu(1 − u),   −Δv + v = u,   Neumann boundaries,
//! ```
//!
//! together with the spatially constant comparison envelope `u̲(t) ≤ u ≤ ū(t)`
//! and monitors for the qualitative properties of the solution (positivity,
//! mass balance, `L^p` growth, envelope sandwich, convergence to `(1, 1)`).

pub mod comparison;
pub mod config;
pub mod diagnostics;
pub mod elliptic;
pub mod grid;
pub mod motility;
pub mod output;
pub mod pde;
pub mod pipeline;
