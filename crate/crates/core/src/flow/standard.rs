//! The standard (De Giorgi) flow on the finite-difference grid.
//!
//! These schemes carry the opposite sign of the chemical potential,
//! `w = εΔu - ε⁻¹W'(u)`, and evolve `∂_t u` without a factor ε.

use crate::energy::{bulk_energy, willmore_energy, ModelParams};
use crate::grid::{d_plus, integrate, laplacian, Field, SpectralSolver};
use crate::potential::{double_well, double_well_d1, double_well_d2};

/// `εΔ_h u - ε⁻¹W'(u)`, the negative chemical potential.
pub fn w_fd(u: &Field, p: &ModelParams) -> Field {
    let eps = p.eps;
    laplacian(u).zip_map(u, |lap, s| eps * lap - double_well_d1(s) / eps)
}

/// Nonlinear terms shared by both standard steps: `(ε⁻²W''(u) + γ) w + α`.
fn reaction_terms(u: &Field, w: &Field, p: &ModelParams) -> Field {
    let (eps, gamma, alpha) = (p.eps, p.gamma, p.alpha_bulk);
    u.zip_map(w, |s, w| (double_well_d2(s) / (eps * eps) + gamma) * w + alpha)
}

/// Right-hand side of the explicit scheme, `-Δ_h w + (ε⁻²W'' + γ) w + α`.
pub fn standard_explicit_rate(u: &Field, p: &ModelParams) -> Field {
    let w = w_fd(u, p);
    &reaction_terms(u, &w, p) - &laplacian(&w)
}

/// One forward Euler step.
pub fn step_standard_explicit(u: &Field, p: &ModelParams, dt: f64) -> Field {
    let rate = standard_explicit_rate(u, p);
    u.zip_map(&rate, |s, r| s + dt * r)
}

/// One semi-implicit step: the biharmonic part is implicit, solved spectrally.
pub fn step_standard_semiimplicit(u: &Field, p: &ModelParams, dt: f64) -> Field {
    step_semiimplicit_with(&SpectralSolver::new(u.grid()), u, p, dt)
}

pub(crate) fn step_semiimplicit_with(solver: &SpectralSolver, u: &Field, p: &ModelParams, dt: f64) -> Field {
    let eps = p.eps;
    let w = w_fd(u, p);
    let lap_wp = laplacian(&u.map(double_well_d1));
    let explicit = &lap_wp.scale(1.0 / eps) + &reaction_terms(u, &w, p);
    let rhs = u.zip_map(&explicit, |s, e| s + dt * e);
    solver.solve(&rhs, dt * eps)
}

/// Surface energy with forward differences, `∫ ε/2 Σ_a (D⁺_a u)² + ε⁻¹W(u)`.
/// Its discrete gradient is exactly the chemical potential, which makes
/// the explicit scheme a gradient descent.
pub(crate) fn surface_energy_forward(u: &Field, p: &ModelParams) -> f64 {
    let eps = p.eps;
    let mut density = u.map(|s| double_well(s) / eps);
    for axis in 0..u.grid().ndim() {
        density += &d_plus(u, axis).map(|g| 0.5 * eps * g * g);
    }
    integrate(&density)
}

/// `W_ε + γ H_ε - α∫u`, with the forward-difference surface energy.
pub fn standard_lyapunov(u: &Field, p: &ModelParams) -> f64 {
    let mut e = willmore_energy(u, p) + bulk_energy(u, p);
    if p.gamma != 0.0 {
        e += p.gamma * surface_energy_forward(u, p);
    }
    e
}
