//! The penalized flow `ε∂_t u = -∇(W_ε + Ã_ε + γH_ε)`, linearized about the
//! current state and solved as one coupled `(u, w)` system per step.

use crate::energy::{
    bulk_energy, chemical_potential, collision_penalty_simplified, surface_energy, willmore_energy,
    ModelParams,
};
use crate::grid::Field;
use crate::linsolve::{
    assemble_modified_system, deinterleave, interleave, solve, LinearSolverParams, Preconditioner,
    ModifiedCoefficients, SolveError, SolveStats,
};

/// One step from `u`. `warm_w` seeds the Krylov iteration; without it the
/// chemical potential of `u` is used. Returns the new `u`, the new `w` and
/// the solver statistics.
pub fn step_modified(
    u: &Field,
    warm_w: Option<&Field>,
    p: &ModelParams,
    dt: f64,
    linear: &LinearSolverParams,
) -> Result<(Field, Field, SolveStats), SolveError> {
    let coeffs = ModifiedCoefficients::new(u, p, dt);
    let system = assemble_modified_system(&coeffs)?;
    let w0 = match warm_w {
        Some(w) => w.clone(),
        None => chemical_potential(u, p),
    };
    let x0 = interleave(u, &w0);
    let (x, stats) = match solve(&system.matrix, &system.rhs, &x0, linear) {
        Ok(done) => done,
        // Where |∇u| is small against √(2W)/ε the B-term makes the system
        // indefinite and Jacobi scaling stalls; retry with an incomplete LU.
        Err(SolveError::NotConverged { iterations, residual, best }) if linear.preconditioner == Preconditioner::Diagonal => {
            log::warn!("Jacobi-preconditioned solve stalled at residual {residual:.2e}; retrying with ILU(0)");
            let retry = LinearSolverParams {
                preconditioner: Preconditioner::Ilu0,
                ..*linear
            };
            let (x, mut stats) = solve(&system.matrix, &system.rhs, &best, &retry)?;
            stats.iterations += iterations;
            (x, stats)
        }
        Err(e) => return Err(e),
    };
    let (u_new, w_new) = deinterleave(u.grid(), &x);
    Ok((u_new, w_new, stats))
}

/// `W_ε + Ã_ε + γH_ε - α∫u`, the total the penalized flow decreases.
pub fn modified_lyapunov(u: &Field, p: &ModelParams) -> f64 {
    let mut e = willmore_energy(u, p) + collision_penalty_simplified(u, p) + bulk_energy(u, p);
    if p.gamma != 0.0 {
        e += p.gamma * surface_energy(u, p);
    }
    e
}
