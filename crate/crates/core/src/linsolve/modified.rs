//! The coupled `(u, w)` system of one penalized-flow step.
//!
//! Unknowns are interleaved per cell: entry `2i` is `u_i`, entry `2i + 1` is
//! `w_i`. Row `2i` is the linearized chemical-potential equation
//!
//! ```text
//! -εΔu + ε⁻¹W''(uᵐ) u - w = ε⁻¹(W''(uᵐ) uᵐ - W'(uᵐ))
//! ```
//!
//! and row `2i + 1` the evolution equation
//!
//! ```text
//! (ε/Δt) u - Δw + ε⁻²W''w + γw + c(-εΔw + ε⁻¹W''w + g v w + ∇·(B∇w))
//!     = (ε/Δt) uᵐ - c(-εΔv + ε⁻¹W''v + g v² + ∇·(B∇v)) + α
//! ```
//!
//! with `c = ε^{-1-α_pen}`, `g = (√2W)'/(√2W + δ_W)` and
//! `B = √2W/|∇u|_δ (I - ν⊗ν)`, all frozen at `uᵐ`.

use crate::energy::{div_face_flux_axis, weighted_curvature, ModelParams};
use crate::grid::{d_centered, grad_centered, laplacian, norm_sq, Field, Grid};
use crate::potential::{double_well_d1, double_well_d2, sqrt_2w, sqrt_2w_d1};

use super::{CsrBuilder, CsrMatrix, SolveError};

/// Everything the step needs from `uᵐ`, evaluated once per step.
#[derive(Debug, Clone)]
pub struct ModifiedCoefficients {
    pub grid: Grid,
    pub eps: f64,
    pub dt: f64,
    pub gamma: f64,
    pub alpha_bulk: f64,
    /// `ε^{-1-α_pen}`
    pub penalty: f64,
    pub u_old: Field,
    /// `ε⁻¹W''(uᵐ)`
    pub reaction: Field,
    /// `(√2W)'/(√2W + δ_W)` at `uᵐ`
    pub log_weight: Field,
    /// `√(2W) κ_δ` at `uᵐ`
    pub v: Field,
    /// Symmetric tensor `B`, indexed `[a][b]`.
    pub b: Vec<Vec<Field>>,
}

impl ModifiedCoefficients {
    pub fn new(u_old: &Field, p: &ModelParams, dt: f64) -> Self {
        let grid = *u_old.grid();
        let ndim = grid.ndim();
        let eps = p.eps;
        let grad = grad_centered(u_old);
        let norm_reg = norm_sq(&grad).map(|g2| (g2 + p.delta).sqrt());
        let weight = u_old.zip_map(&norm_reg, |s, n| sqrt_2w(s) / n);
        let nu: Vec<Field> = grad.iter().map(|g| g.zip_map(&norm_reg, |g, n| g / n)).collect();
        let b = (0..ndim)
            .map(|a| {
                (0..ndim)
                    .map(|c| {
                        let id = if a == c { 1.0 } else { 0.0 };
                        weight.zip_map(&(&nu[a] * &nu[c]), |w, nn| w * (id - nn))
                    })
                    .collect()
            })
            .collect();
        let delta_w = p.delta_w;
        ModifiedCoefficients {
            grid,
            eps,
            dt,
            gamma: p.gamma,
            alpha_bulk: p.alpha_bulk,
            penalty: p.penalty_scale(),
            u_old: u_old.clone(),
            reaction: u_old.map(|s| double_well_d2(s) / eps),
            log_weight: u_old.map(|s| sqrt_2w_d1(s) / (sqrt_2w(s) + delta_w)),
            v: weighted_curvature(u_old, p),
            b,
        }
    }

    /// `∇·(B∇f)`: diagonal entries through face-averaged fluxes, mixed
    /// entries as centered differences of centered differences.
    pub fn div_b_grad(&self, f: &Field) -> Field {
        let ndim = self.grid.ndim();
        let mut out = Field::zeros(&self.grid);
        for a in 0..ndim {
            out += &div_face_flux_axis(&self.b[a][a], f, a);
            for c in 0..ndim {
                if c != a {
                    out += &d_centered(&(&self.b[a][c] * &d_centered(f, c)), a);
                }
            }
        }
        out
    }
}

/// The assembled matrix and right-hand side.
#[derive(Debug, Clone)]
pub struct ModifiedSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
}

/// Interleaves `(u, w)` into the solver's unknown ordering.
pub fn interleave(u: &Field, w: &Field) -> Vec<f64> {
    u.values().iter().zip(w.values()).flat_map(|(&a, &b)| [a, b]).collect()
}

/// Splits an interleaved vector into `(u, w)`.
pub fn deinterleave(grid: &Grid, x: &[f64]) -> (Field, Field) {
    let u = x.iter().step_by(2).copied().collect();
    let w = x.iter().skip(1).step_by(2).copied().collect();
    (
        Field::from_vec(grid, u).expect("length checked by caller"),
        Field::from_vec(grid, w).expect("length checked by caller"),
    )
}

/// Applies the system operator to `(u, w)` with field stencils, independently
/// of the assembled matrix. Returns the `(u-row, w-row)` residual fields.
pub fn apply_modified_operator(c: &ModifiedCoefficients, u: &Field, w: &Field) -> (Field, Field) {
    let eps = c.eps;
    let lap_u = laplacian(u);
    let row_u = {
        let t = lap_u.zip_map(&(&c.reaction * u), |lap, ru| -eps * lap + ru);
        &t - w
    };
    let lap_w = laplacian(w);
    let mut row_w = u.scale(eps / c.dt);
    row_w += &lap_w.scale(-(1.0 + c.penalty * eps));
    let diag = c
        .reaction
        .zip_map(&(&c.log_weight * &c.v), |r, gv| r / eps + c.gamma + c.penalty * (r + gv));
    row_w += &(&diag * w);
    row_w += &c.div_b_grad(w).scale(c.penalty);
    (row_u, row_w)
}

/// Assembles the interleaved `2N × 2N` system for one step from `uᵐ`.
pub fn assemble_modified_system(c: &ModifiedCoefficients) -> Result<ModifiedSystem, SolveError> {
    let grid = &c.grid;
    let ndim = grid.ndim();
    let n = grid.len();
    let eps = c.eps;
    let pen = c.penalty;
    let inv_h2: Vec<f64> = (0..ndim).map(|a| grid.spacing(a).powi(-2)).collect();
    let lap_diag: f64 = inv_h2.iter().map(|v| 2.0 * v).sum();

    let mut builder = CsrBuilder::new(2 * n, 2 * n);
    let mut row: Vec<(usize, f64)> = Vec::with_capacity(32);
    for i in 0..n {
        let coords = grid.coords(i);
        let at = |offsets: &[(usize, isize)]| {
            let mut cc: Vec<isize> = coords[..ndim].iter().map(|&v| v as isize).collect();
            for &(axis, d) in offsets {
                cc[axis] += d;
            }
            grid.index(&cc)
        };

        // u-row
        row.clear();
        row.push((2 * i, c.reaction.values()[i] + eps * lap_diag));
        for a in 0..ndim {
            for d in [-1, 1] {
                row.push((2 * at(&[(a, d)]), -eps * inv_h2[a]));
            }
        }
        row.push((2 * i + 1, -1.0));
        builder.push_row(row.clone())?;

        // w-row
        row.clear();
        row.push((2 * i, eps / c.dt));
        let r = c.reaction.values()[i];
        let gv = c.log_weight.values()[i] * c.v.values()[i];
        let w_diag = (1.0 + pen * eps) * lap_diag + r / eps + c.gamma + pen * (r + gv);
        row.push((2 * i + 1, w_diag));
        for a in 0..ndim {
            for d in [-1isize, 1] {
                let j = at(&[(a, d)]);
                let b_face = 0.5 * (c.b[a][a].values()[i] + c.b[a][a].values()[j]);
                row.push((2 * j + 1, -(1.0 + pen * eps) * inv_h2[a] + pen * b_face * inv_h2[a]));
                row.push((2 * i + 1, -pen * b_face * inv_h2[a]));
            }
            for b in 0..ndim {
                if b == a {
                    continue;
                }
                let scale = pen / (4.0 * grid.spacing(a) * grid.spacing(b));
                for da in [-1isize, 1] {
                    let bab = c.b[a][b].values()[at(&[(a, da)])];
                    for db in [-1isize, 1] {
                        let sign = (da * db) as f64;
                        row.push((2 * at(&[(a, da), (b, db)]) + 1, sign * scale * bab));
                    }
                }
            }
        }
        builder.push_row(row.clone())?;
    }
    let matrix = builder.finish();
    Ok(ModifiedSystem {
        matrix,
        rhs: modified_rhs(c),
    })
}

fn modified_rhs(c: &ModifiedCoefficients) -> Vec<f64> {
    let eps = c.eps;
    let rhs_u = c
        .u_old
        .zip_map(&c.reaction, |s, r| r * s - double_well_d1(s) / eps);
    let lap_v = laplacian(&c.v);
    let mut explicit = lap_v.scale(-eps);
    explicit += &(&c.reaction * &c.v);
    explicit += &(&c.log_weight * &c.v.map(|v| v * v));
    explicit += &c.div_b_grad(&c.v);
    let alpha = c.alpha_bulk;
    let rhs_w = c
        .u_old
        .zip_map(&explicit, |s, e| eps / c.dt * s + alpha - c.penalty * e);
    interleave(&rhs_u, &rhs_w)
}
