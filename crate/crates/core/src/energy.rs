//! Diffuse-interface energies evaluated on a discrete phase field.
//!
//! All continuum-style energies use the centered gradient `(D⁺ + D⁻)/2` and
//! the midpoint rule. The one-sided stencils of the explicit Bellettini
//! stepper live here too ([`signed_stencils`]) because its discrete energy is
//! built from the same quantities.

use thiserror::Error;

use crate::grid::{
    d2_axis, d_centered, d_minus, d_plus, d_sided, grad_centered, integrate, laplacian, norm_sq,
    pairwise_sum, Field,
};
use crate::potential::{double_well, double_well_d1, sqrt_2w, sqrt_2w_d1};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParamError {
    #[error("{field} must be {requirement}, got {value}")]
    Invalid {
        field: &'static str,
        requirement: &'static str,
        value: f64,
    },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnergyError {
    #[error("{what} is only defined for 2D fields, got a {ndim}D field")]
    UnsupportedDimension { what: &'static str, ndim: usize },
}

/// Model parameters shared by all energies and flows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    /// Interface width ε.
    pub eps: f64,
    /// Perimeter weight γ.
    pub gamma: f64,
    /// Strength α of the expansive bulk energy `-α∫u`.
    pub alpha_bulk: f64,
    /// Exponent α in the `1/ε^{1+α}` prefactor of the collision penalties.
    pub alpha_pen: f64,
    /// Gradient regularization: `|∇u|` is replaced by `√(|∇u|² + δ)` in denominators.
    pub delta: f64,
    /// Regularization of `1/√(2W)` in the penalized flow.
    pub delta_w: f64,
}

impl ModelParams {
    pub fn new(eps: f64) -> Self {
        ModelParams {
            eps,
            gamma: 0.0,
            alpha_bulk: 0.0,
            alpha_pen: 0.0,
            delta: 0.1,
            delta_w: 0.01,
        }
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn with_alpha_bulk(mut self, alpha: f64) -> Self {
        self.alpha_bulk = alpha;
        self
    }

    pub fn with_alpha_pen(mut self, alpha: f64) -> Self {
        self.alpha_pen = alpha;
        self
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }

    pub fn with_delta_w(mut self, delta_w: f64) -> Self {
        self.delta_w = delta_w;
        self
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        let check = |field, ok: bool, requirement, value| {
            if ok && f64::is_finite(value) {
                Ok(())
            } else {
                Err(ParamError::Invalid {
                    field,
                    requirement,
                    value,
                })
            }
        };
        check("eps", self.eps > 0.0, "positive", self.eps)?;
        check("gamma", self.gamma >= 0.0, "non-negative", self.gamma)?;
        check("alpha_bulk", self.alpha_bulk >= 0.0, "non-negative", self.alpha_bulk)?;
        check(
            "alpha_pen",
            (0.0..=1.0).contains(&self.alpha_pen),
            "in [0, 1]",
            self.alpha_pen,
        )?;
        check("delta", self.delta > 0.0, "positive", self.delta)?;
        check("delta_w", self.delta_w >= 0.0, "non-negative", self.delta_w)?;
        Ok(())
    }

    /// `1 / ε^{1+α}`, the collision penalty prefactor (without the ½).
    pub fn penalty_scale(&self) -> f64 {
        self.eps.powf(-(1.0 + self.alpha_pen))
    }
}

/// Diffuse chemical potential `μ = -εΔ_h u + ε⁻¹W'(u)`.
pub fn chemical_potential(u: &Field, p: &ModelParams) -> Field {
    let eps = p.eps;
    laplacian(u).zip_map(u, |lap, s| -eps * lap + double_well_d1(s) / eps)
}

/// Surface-energy density `ε/2 |∇_c u|² + ε⁻¹W(u)`.
pub fn surface_density(u: &Field, p: &ModelParams) -> Field {
    let eps = p.eps;
    norm_sq(&grad_centered(u)).zip_map(u, |g2, s| 0.5 * eps * g2 + double_well(s) / eps)
}

/// Ginzburg–Landau surface energy; converges to the perimeter as ε → 0.
pub fn surface_energy(u: &Field, p: &ModelParams) -> f64 {
    integrate(&surface_density(u, p))
}

/// The one-sided discretization of the surface density used by the explicit
/// Bellettini stepper: `ε/4 Σ_a ((D⁺_a u)² + (D⁻_a u)²) + ε⁻¹W(u)`.
pub fn diffuse_area_density(u: &Field, p: &ModelParams) -> Field {
    let eps = p.eps;
    let mut grad_sq = Field::zeros(u.grid());
    for axis in 0..u.grid().ndim() {
        let fp = d_plus(u, axis);
        let fm = d_minus(u, axis);
        grad_sq += &fp.zip_map(&fm, |a, b| a * a + b * b);
    }
    grad_sq.zip_map(u, |g2, s| 0.25 * eps * g2 + double_well(s) / eps)
}

/// De Giorgi's diffuse Willmore energy `(1/2ε) ∫ μ²`.
pub fn willmore_energy(u: &Field, p: &ModelParams) -> f64 {
    let mu = chemical_potential(u, p);
    integrate(&mu.map(|m| m * m)) / (2.0 * p.eps)
}

/// Regularized level-set curvature `∇·(∇u / √(|∇u|² + δ))`, centered differences.
pub fn level_set_curvature(u: &Field, p: &ModelParams) -> Field {
    let grad = grad_centered(u);
    let denom = norm_sq(&grad).map(|g2| (g2 + p.delta).sqrt());
    let mut kappa = Field::zeros(u.grid());
    for (axis, g) in grad.iter().enumerate() {
        kappa += &d_centered(&g.zip_map(&denom, |a, d| a / d), axis);
    }
    kappa
}

/// `Σ_a D⁻_a( c_{i+½} D⁺_a f )` along one axis, with `c_{i+½}` the average of
/// the two adjacent cell values.
pub(crate) fn div_face_flux_axis(coef: &Field, f: &Field, axis: usize) -> Field {
    let face = coef.zip_map(&coef.shifted(axis, 1), |a, b| 0.5 * (a + b));
    d_minus(&(&face * &d_plus(f, axis)), axis)
}

/// `√(2W(u))` times the regularized level-set curvature, in the conservative
/// form `∇·(√(2W)/|∇u|_δ ∇u) - (√(2W))' |∇u|²/|∇u|_δ` with `|∇u|_δ = √(|∇u|²+δ)`.
pub fn weighted_curvature(u: &Field, p: &ModelParams) -> Field {
    let grad_sq = norm_sq(&grad_centered(u));
    let delta = p.delta;
    let coef = u.zip_map(&grad_sq, |s, g2| sqrt_2w(s) / (g2 + delta).sqrt());
    let mut v = Field::zeros(u.grid());
    for axis in 0..u.grid().ndim() {
        v += &div_face_flux_axis(&coef, u, axis);
    }
    let correction = u.zip_map(&grad_sq, |s, g2| sqrt_2w_d1(s) * g2 / (g2 + delta).sqrt());
    &v - &correction
}

/// Bellettini's energy, regularized: `½ ∫ (κ_δ² + γ)(ε/2|∇u|² + ε⁻¹W(u))`.
pub fn bellettini_energy(u: &Field, p: &ModelParams) -> f64 {
    let kappa = level_set_curvature(u, p);
    let gamma = p.gamma;
    let density = surface_density(u, p);
    0.5 * integrate(&kappa.zip_map(&density, |k, d| (k * k + gamma) * d))
}

/// One choice of forward/backward differences per axis, with the quantities
/// the explicit Bellettini scheme derives from it.
pub(crate) struct SignedStencil {
    /// `forward[a]` selects `D⁺` (true) or `D⁻` along axis `a`.
    pub forward: Vec<bool>,
    /// One-sided gradient components `D^{±}_a u`.
    pub grad: Vec<Field>,
    /// `√(|D^{±} u|² + δ)`.
    pub norm: Field,
    /// One-sided curvature `Σ_a D^{∓}_a (D^{±}_a u / norm)`.
    pub curvature: Field,
}

/// All `2^ndim` sign choices, ordered with axis 0 as the most significant bit
/// (`++`, `+-`, `-+`, `--` in 2D).
pub(crate) fn signed_stencils(u: &Field, delta: f64) -> Vec<SignedStencil> {
    let ndim = u.grid().ndim();
    let forward_diffs: Vec<Field> = (0..ndim).map(|a| d_plus(u, a)).collect();
    let backward_diffs: Vec<Field> = (0..ndim).map(|a| d_minus(u, a)).collect();
    (0..1usize << ndim)
        .map(|mask| {
            let forward: Vec<bool> = (0..ndim).map(|a| mask & (1 << (ndim - 1 - a)) == 0).collect();
            let grad: Vec<Field> = (0..ndim)
                .map(|a| {
                    if forward[a] {
                        forward_diffs[a].clone()
                    } else {
                        backward_diffs[a].clone()
                    }
                })
                .collect();
            let norm = norm_sq(&grad).map(|g2| (g2 + delta).sqrt());
            let mut curvature = Field::zeros(u.grid());
            for (a, g) in grad.iter().enumerate() {
                let unit = g.zip_map(&norm, |g, n| g / n);
                curvature += &d_sided(&unit, a, !forward[a]);
            }
            SignedStencil {
                forward,
                grad,
                norm,
                curvature,
            }
        })
        .collect()
}

pub(crate) fn mean_curvature_sq(stencils: &[SignedStencil]) -> Field {
    let weight = 1.0 / stencils.len() as f64;
    let mut acc = Field::zeros(stencils[0].curvature.grid());
    for s in stencils {
        acc += &s.curvature.map(|k| k * k);
    }
    acc.scale(weight)
}

/// Discrete squared curvature: the average of `(K^{s})²` over all sign choices.
pub fn discrete_curvature_sq(u: &Field, p: &ModelParams) -> Field {
    mean_curvature_sq(&signed_stencils(u, p.delta))
}

/// `Σ_cells (K*² + γ) M`: a plain sum, without the ½ and cell volume of
/// [`bellettini_energy`]. This is the quantity the explicit Bellettini
/// stepper decreases.
pub fn bellettini_energy_discrete(u: &Field, p: &ModelParams) -> f64 {
    let k2 = discrete_curvature_sq(u, p);
    let m = diffuse_area_density(u, p);
    let gamma = p.gamma;
    pairwise_sum(k2.zip_map(&m, |k2, m| (k2 + gamma) * m).values())
}

/// Mugnai's second-fundamental-form energy
/// `(1/2ε) ∫ |ε D²u - ε⁻¹W'(u) ν⊗ν|²`; planar fields only.
pub fn mugnai_energy(u: &Field, p: &ModelParams) -> Result<f64, EnergyError> {
    let ndim = u.grid().ndim();
    if ndim != 2 {
        return Err(EnergyError::UnsupportedDimension {
            what: "Mugnai's energy",
            ndim,
        });
    }
    let eps = p.eps;
    let grad = grad_centered(u);
    let denom = norm_sq(&grad).map(|g2| (g2 + p.delta).sqrt());
    let nu: Vec<Field> = grad.iter().map(|g| g.zip_map(&denom, |a, d| a / d)).collect();
    let reaction = u.map(|s| double_well_d1(s) / eps);
    let mut total = Field::zeros(u.grid());
    for a in 0..2 {
        for b in 0..2 {
            let hess = if a == b {
                d2_axis(u, a)
            } else {
                d_centered(&d_centered(u, b), a)
            };
            let nn = &nu[a] * &nu[b];
            let entry = hess.zip_map(&(&reaction * &nn), |h, r| eps * h - r);
            total += &entry.map(|e| e * e);
        }
    }
    Ok(integrate(&total) / (2.0 * eps))
}

/// The penalty `(1/2ε^{1+α}) ∫ (μ + (ε|∇u|√(2W))^{1/2} κ_δ)²`, with
/// `|∇u|` regularized to `√(|∇_c u|² + δ)`.
pub fn collision_penalty(u: &Field, p: &ModelParams) -> f64 {
    let mu = chemical_potential(u, p);
    let kappa = level_set_curvature(u, p);
    let grad_sq = norm_sq(&grad_centered(u));
    let (eps, delta) = (p.eps, p.delta);
    let weight = u.zip_map(&grad_sq, |s, g2| {
        (eps * (g2 + delta).sqrt() * sqrt_2w(s)).abs().max(0.0).sqrt()
    });
    let residual = &mu + &(&weight * &kappa);
    0.5 * p.penalty_scale() * integrate(&residual.map(|r| r * r))
}

/// The simplified penalty `(1/2ε^{1+α}) ∫ (μ + √(2W) κ_δ)²` that drives the
/// penalized flow, with `√(2W) κ_δ` from [`weighted_curvature`].
pub fn collision_penalty_simplified(u: &Field, p: &ModelParams) -> f64 {
    let residual = &chemical_potential(u, p) + &weighted_curvature(u, p);
    0.5 * p.penalty_scale() * integrate(&residual.map(|r| r * r))
}

/// Discrepancy density `ε/2 |∇u|² - ε⁻¹W(u)`.
pub fn discrepancy(u: &Field, p: &ModelParams) -> Field {
    let eps = p.eps;
    norm_sq(&grad_centered(u)).zip_map(u, |g2, s| 0.5 * eps * g2 - double_well(s) / eps)
}

/// Expansive bulk energy `-α ∫ u`.
pub fn bulk_energy(u: &Field, p: &ModelParams) -> f64 {
    -p.alpha_bulk * integrate(u)
}

/// Every energy of one state, evaluated together.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyReport {
    pub time: f64,
    pub h_eps: f64,
    pub w_eps: f64,
    pub bellettini: f64,
    /// `None` for 3D fields.
    pub mugnai: Option<f64>,
    pub pen_a: f64,
    pub pen_a_tilde: f64,
    pub bulk: f64,
    pub total_standard: f64,
    pub total_modified: f64,
    pub total_bellettini_discrete: f64,
}

impl EnergyReport {
    pub fn evaluate(u: &Field, p: &ModelParams, time: f64) -> Self {
        let h_eps = surface_energy(u, p);
        let w_eps = willmore_energy(u, p);
        let pen_a_tilde = collision_penalty_simplified(u, p);
        let bulk = bulk_energy(u, p);
        EnergyReport {
            time,
            h_eps,
            w_eps,
            bellettini: bellettini_energy(u, p),
            mugnai: mugnai_energy(u, p).ok(),
            pen_a: collision_penalty(u, p),
            pen_a_tilde,
            bulk,
            total_standard: w_eps + p.gamma * h_eps + bulk,
            total_modified: w_eps + pen_a_tilde + p.gamma * h_eps + bulk,
            total_bellettini_discrete: bellettini_energy_discrete(u, p),
        }
    }

    /// `(name, value)` pairs in a fixed order, for printing.
    pub fn entries(&self) -> Vec<(&'static str, f64)> {
        let mut out = vec![
            ("time", self.time),
            ("h_eps", self.h_eps),
            ("w_eps", self.w_eps),
            ("bellettini", self.bellettini),
        ];
        if let Some(m) = self.mugnai {
            out.push(("mugnai", m));
        }
        out.extend([
            ("pen_a", self.pen_a),
            ("pen_a_tilde", self.pen_a_tilde),
            ("bulk", self.bulk),
            ("total_standard", self.total_standard),
            ("total_modified", self.total_modified),
            ("total_bellettini_discrete", self.total_bellettini_discrete),
        ]);
        out
    }
}
