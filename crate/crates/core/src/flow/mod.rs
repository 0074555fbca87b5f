//! Time steppers for the diffuse Willmore flows and the loop that drives them.
//!
//! Four schemes are available: the standard De Giorgi flow, explicitly or
//! with a spectral semi-implicit step, Bellettini's explicit finite-difference
//! scheme, and the penalized flow, split into a frozen-coefficient linear
//! solve per step. Each scheme reports the quantity it is designed to
//! decrease so that runs can be monitored for energy growth.

mod bellettini;
mod modified;
mod runner;
mod standard;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::energy::{ModelParams, ParamError};
use crate::grid::{Field, SpectralSolver};
use crate::linsolve::{LinearSolverParams, SolveError};

pub use bellettini::{bellettini_lyapunov, bellettini_rate, step_bellettini};
pub use modified::{modified_lyapunov, step_modified};
pub use runner::{
    adaptive_dt, probe_max_stable_dt, run, DtPolicy, ExitReason, NullObserver, ProbeSettings,
    RunObserver, RunSettings, RunSummary,
};
pub use standard::{
    standard_explicit_rate, standard_lyapunov, step_standard_explicit, step_standard_semiimplicit,
    w_fd,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    StandardExplicit,
    StandardSemiImplicit,
    BellettiniExplicit,
    ModifiedSplit,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [
        Scheme::StandardExplicit,
        Scheme::StandardSemiImplicit,
        Scheme::BellettiniExplicit,
        Scheme::ModifiedSplit,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::StandardExplicit => "standard-explicit",
            Scheme::StandardSemiImplicit => "standard-semiimplicit",
            Scheme::BellettiniExplicit => "bellettini",
            Scheme::ModifiedSplit => "modified",
        }
    }

    /// Explicit schemes have a hard stability bound on the time step.
    pub fn is_explicit(self) -> bool {
        matches!(self, Scheme::StandardExplicit | Scheme::BellettiniExplicit)
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("unknown scheme `{0}` (expected standard-explicit, standard-semiimplicit, bellettini or modified)")]
pub struct UnknownScheme(pub String);

impl FromStr for Scheme {
    type Err = UnknownScheme;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Scheme::ALL
            .into_iter()
            .find(|scheme| scheme.name() == s)
            .ok_or_else(|| UnknownScheme(s.to_string()))
    }
}

/// Weight of the summed fourth-order terms in Bellettini's update.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum BellettiniFactor {
    /// `1/2^d`: averages the sign variants like the squared curvature does.
    /// With this weight the update is exactly half the negative gradient of
    /// the discrete energy.
    #[default]
    Averaged,
    /// Weight one on each of the summed variants.
    Literal,
}

impl BellettiniFactor {
    pub fn value(self, ndim: usize) -> f64 {
        match self {
            BellettiniFactor::Averaged => 1.0 / (1u32 << ndim) as f64,
            BellettiniFactor::Literal => 1.0,
        }
    }

    /// Parses the numeric form used in config files (`0.25`, `0.125` or `1`).
    pub fn from_number(x: f64, ndim: usize) -> Option<Self> {
        if (x - 1.0).abs() < 1e-12 && ndim > 0 {
            Some(BellettiniFactor::Literal)
        } else if (x - BellettiniFactor::Averaged.value(ndim)).abs() < 1e-12 {
            Some(BellettiniFactor::Averaged)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowState {
    pub u: Field,
    pub t: f64,
    pub step: u64,
    pub dt: f64,
    pub scheme: Scheme,
}

impl FlowState {
    pub fn new(u: Field, scheme: Scheme, dt: f64) -> Self {
        FlowState {
            u,
            t: 0.0,
            step: 0,
            dt,
            scheme,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepDiagnostics {
    /// `max |u⁺ - u| / dt`.
    pub max_rate: f64,
    /// The scheme's own Lyapunov quantity before and after the step.
    pub energy_before: f64,
    pub energy_after: f64,
    /// Krylov iterations; modified flow only.
    pub solver_iters: Option<usize>,
    /// Set when the Lyapunov quantity grew beyond round-off.
    pub warning: Option<String>,
}

impl StepDiagnostics {
    pub fn relative_increase(&self) -> f64 {
        (self.energy_after - self.energy_before) / self.energy_before.abs().max(f64::MIN_POSITIVE)
    }
}

#[derive(Debug, Error)]
pub enum FlowError {
    #[error("non-finite values after step {step} (t = {t}, dt = {dt})")]
    BlowUp { step: u64, t: f64, dt: f64 },
    #[error("linear solve failed at step {step}: {source}")]
    Solver {
        step: u64,
        #[source]
        source: SolveError,
    },
    #[error("the {scheme} scheme does not support {ndim}D grids")]
    UnsupportedDimension { scheme: Scheme, ndim: usize },
    #[error("invalid time step {0}")]
    InvalidTimeStep(f64),
    #[error("stepper was built for {expected}, state uses {got}")]
    SchemeMismatch { expected: Scheme, got: Scheme },
    #[error(transparent)]
    Params(#[from] ParamError),
    #[error("output failed: {0}")]
    Output(#[from] std::io::Error),
}

/// Relative growth of the Lyapunov quantity tolerated before a step is
/// flagged.
pub const ENERGY_INCREASE_TOL: f64 = 1e-10;

/// Owns one scheme's parameters and the caches reused between steps.
#[derive(Debug)]
pub struct Stepper {
    scheme: Scheme,
    params: ModelParams,
    bellettini_factor: BellettiniFactor,
    linear: LinearSolverParams,
    spectral: Option<SpectralSolver>,
    /// Last `w` of the modified flow, used as the Krylov starting guess.
    warm_w: Option<Field>,
    /// Lyapunov value of the state produced by the previous step.
    cached_energy: Option<(u64, f64)>,
    monitor_energy: bool,
    /// Suppresses the energy-increase log line (diagnostics still carry it).
    quiet: bool,
}

impl Stepper {
    pub fn new(scheme: Scheme, params: ModelParams) -> Result<Self, FlowError> {
        params.validate()?;
        let mut params = params;
        if scheme == Scheme::ModifiedSplit && params.alpha_bulk != 0.0 {
            log::warn!("the modified flow runs without the bulk term; ignoring alpha_bulk = {}", params.alpha_bulk);
            params.alpha_bulk = 0.0;
        }
        Ok(Stepper {
            scheme,
            params,
            bellettini_factor: BellettiniFactor::default(),
            linear: LinearSolverParams::default(),
            spectral: None,
            warm_w: None,
            cached_energy: None,
            monitor_energy: true,
            quiet: false,
        })
    }

    pub fn with_bellettini_factor(mut self, factor: BellettiniFactor) -> Self {
        self.bellettini_factor = factor;
        self
    }

    pub fn with_linear_solver(mut self, linear: LinearSolverParams) -> Self {
        self.linear = linear;
        self
    }

    /// Turns off the per-step Lyapunov evaluation. Diagnostics then report
    /// NaN energies and never warn; useful for long runs that only track
    /// the geometry.
    pub fn with_energy_monitor(mut self, on: bool) -> Self {
        self.monitor_energy = on;
        self
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    /// Parameters as actually used by the scheme.
    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn bellettini_factor(&self) -> BellettiniFactor {
        self.bellettini_factor
    }

    /// The quantity this scheme decreases.
    pub fn lyapunov(&self, u: &Field) -> f64 {
        match self.scheme {
            Scheme::StandardExplicit | Scheme::StandardSemiImplicit => standard_lyapunov(u, &self.params),
            Scheme::BellettiniExplicit => bellettini_lyapunov(u, &self.params),
            Scheme::ModifiedSplit => modified_lyapunov(u, &self.params),
        }
    }

    /// Advances `state` by `state.dt`.
    pub fn step(&mut self, state: &FlowState) -> Result<(FlowState, StepDiagnostics), FlowError> {
        if state.scheme != self.scheme {
            return Err(FlowError::SchemeMismatch {
                expected: self.scheme,
                got: state.scheme,
            });
        }
        let dt = state.dt;
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(FlowError::InvalidTimeStep(dt));
        }
        let ndim = state.u.grid().ndim();
        let p = self.params;
        let mut solver_iters = None;
        let u_new = match self.scheme {
            Scheme::StandardExplicit => step_standard_explicit(&state.u, &p, dt),
            Scheme::StandardSemiImplicit => {
                let grid = *state.u.grid();
                let solver = match &self.spectral {
                    Some(s) if s.grid() == &grid => s,
                    _ => self.spectral.insert(SpectralSolver::new(&grid)),
                };
                standard::step_semiimplicit_with(solver, &state.u, &p, dt)
            }
            Scheme::BellettiniExplicit => step_bellettini(&state.u, &p, dt, self.bellettini_factor),
            Scheme::ModifiedSplit => {
                if ndim != 2 {
                    return Err(FlowError::UnsupportedDimension {
                        scheme: self.scheme,
                        ndim,
                    });
                }
                let warm = self.warm_w.as_ref().filter(|w| w.grid() == state.u.grid());
                let (u_new, w_new, stats) = step_modified(&state.u, warm, &p, dt, &self.linear)
                    .map_err(|source| FlowError::Solver {
                        step: state.step,
                        source,
                    })?;
                self.warm_w = Some(w_new);
                solver_iters = Some(stats.iterations);
                u_new
            }
        };
        if !u_new.is_finite() {
            return Err(FlowError::BlowUp {
                step: state.step,
                t: state.t,
                dt,
            });
        }
        let max_rate = (&u_new - &state.u).max_abs() / dt;
        let (energy_before, energy_after) = if self.monitor_energy {
            let before = match self.cached_energy {
                Some((step, e)) if step == state.step => e,
                _ => self.lyapunov(&state.u),
            };
            (before, self.lyapunov(&u_new))
        } else {
            (f64::NAN, f64::NAN)
        };
        let next = FlowState {
            u: u_new,
            t: state.t + dt,
            step: state.step + 1,
            dt,
            scheme: self.scheme,
        };
        self.cached_energy = Some((next.step, energy_after));
        let mut diag = StepDiagnostics {
            max_rate,
            energy_before,
            energy_after,
            solver_iters,
            warning: None,
        };
        if diag.relative_increase() > ENERGY_INCREASE_TOL {
            let msg = format!(
                "{} energy increased at step {} by {:.3e} (relative); dt = {:.3e} may be too large",
                self.scheme,
                next.step,
                diag.relative_increase(),
                dt
            );
            if !self.quiet {
                log::warn!("{msg}");
            }
            diag.warning = Some(msg);
        }
        Ok((next, diag))
    }

    /// Drops the per-run caches; call before reusing the stepper on a new state.
    pub fn reset(&mut self) {
        self.warm_w = None;
        self.cached_energy = None;
    }
}
