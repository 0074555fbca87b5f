//! Bellettini's explicit scheme.
//!
//! For every choice `s` of one-sided differences per axis the scheme forms
//! `Du^s = √(|D^s u|² + δ)` and the curvature `K^s = Σ_a D^{-s_a}(D^{s_a}u / Du^s)`.
//! The update is
//!
//! ```text
//! (u⁺ - u)/dt = -(c Σ_s G^s + ½ A₃) + α
//! G^s = Σ_b D^{-s_b} ( Σ_a C^s_ab D^{s_a}(M K^s) ),  C^s = ((Du^s)² I - g⊗g)/(Du^s)³
//! A₃  = -ε/2 Σ_a [D⁻_a((K*² + γ) D⁺_a u) + D⁺_a((K*² + γ) D⁻_a u)] + (K*² + γ) W'(u)/ε
//! ```
//!
//! where `K*²` averages `(K^s)²` over the `2^d` sign choices and `M` is the
//! one-sided area density. With `c = 2^{-d}` the right-hand side (for α = 0)
//! equals `-½ ∇ Σ (K*² + γ) M`, so small steps decrease that sum.

use crate::energy::{diffuse_area_density, mean_curvature_sq, signed_stencils, ModelParams};
use crate::grid::{d_minus, d_plus, d_sided, pairwise_sum, Field};
use crate::potential::double_well_d1;

use super::BellettiniFactor;

/// The right-hand side `(u⁺ - u)/dt` of the scheme.
pub fn bellettini_rate(u: &Field, p: &ModelParams, factor: BellettiniFactor) -> Field {
    let grid = *u.grid();
    let ndim = grid.ndim();
    let eps = p.eps;
    let stencils = signed_stencils(u, p.delta);
    let m = diffuse_area_density(u, p);
    let weight = mean_curvature_sq(&stencils).map(|k2| k2 + p.gamma);

    let mut fourth = Field::zeros(&grid);
    for s in &stencils {
        let f = &m * &s.curvature;
        let df: Vec<Field> = (0..ndim).map(|a| d_sided(&f, a, s.forward[a])).collect();
        let cube = s.norm.map(|n| n * n * n);
        for b in 0..ndim {
            // flux_b = Σ_a C_ab D^{s_a} f
            let mut flux = Field::zeros(&grid);
            for (a, dfa) in df.iter().enumerate() {
                let c_ab = if a == b {
                    s.norm.zip_map(&(&s.grad[a] * &s.grad[b]), |n, gg| n * n - gg)
                } else {
                    (&s.grad[a] * &s.grad[b]).scale(-1.0)
                };
                flux += &(&c_ab * dfa);
            }
            let flux = flux.zip_map(&cube, |f, c| f / c);
            fourth += &d_sided(&flux, b, !s.forward[b]);
        }
    }

    let mut a3 = u.zip_map(&weight, |s, wgt| wgt * double_well_d1(s) / eps);
    for axis in 0..ndim {
        let inner = &d_minus(&(&weight * &d_plus(u, axis)), axis) + &d_plus(&(&weight * &d_minus(u, axis)), axis);
        a3 += &inner.scale(-0.5 * eps);
    }

    let c = factor.value(ndim);
    let alpha = p.alpha_bulk;
    fourth.zip_map(&a3, |g, a3| -(c * g + 0.5 * a3) + alpha)
}

/// One explicit step.
pub fn step_bellettini(u: &Field, p: &ModelParams, dt: f64, factor: BellettiniFactor) -> Field {
    let rate = bellettini_rate(u, p, factor);
    u.zip_map(&rate, |s, r| s + dt * r)
}

/// `Σ (K*² + γ) M - 2α Σ u`: the plain-sum discrete energy plus the matching
/// bulk term.
pub fn bellettini_lyapunov(u: &Field, p: &ModelParams) -> f64 {
    let k2 = mean_curvature_sq(&signed_stencils(u, p.delta));
    let m = diffuse_area_density(u, p);
    let gamma = p.gamma;
    let e = pairwise_sum(k2.zip_map(&m, |k2, m| (k2 + gamma) * m).values());
    if p.alpha_bulk != 0.0 {
        e - 2.0 * p.alpha_bulk * pairwise_sum(u.values())
    } else {
        e
    }
}
