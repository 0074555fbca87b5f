//! Phase-field approximations of Willmore flow on periodic finite-difference
//! grids: energies, time steppers for the standard, Bellettini and penalized
//! models, initial conditions and diagnostics.

pub mod analysis;
pub mod cli;
pub mod energy;
pub mod flow;
pub mod grid;
pub mod init;
pub mod io;
pub mod linsolve;
pub mod potential;
