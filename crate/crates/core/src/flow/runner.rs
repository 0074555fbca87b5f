//! The simulation loop, time-step control and the stability probe.

use crate::grid::Field;

use super::{FlowError, FlowState, StepDiagnostics, Stepper, ENERGY_INCREASE_TOL};

/// `clamp(c_dt / max(max_rate, 1e-30), dt_min, dt_max)`: steps shrink where
/// the solution moves fast.
pub fn adaptive_dt(max_rate: f64, c_dt: f64, dt_min: f64, dt_max: f64) -> f64 {
    (c_dt / max_rate.max(1e-30)).clamp(dt_min, dt_max)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeSettings {
    /// First step size tried.
    pub dt_start: f64,
    /// Steps run per trial.
    pub steps: usize,
    /// Amplitude of the deterministic perturbation that seeds every mode.
    pub noise: f64,
    /// Log-scale bisection rounds after bracketing.
    pub bisections: usize,
}

impl ProbeSettings {
    /// A starting guess `h⁴/ε` for explicit fourth-order schemes.
    pub fn for_grid(min_spacing: f64, eps: f64) -> Self {
        ProbeSettings {
            dt_start: min_spacing.powi(4) / eps,
            steps: 200,
            noise: 1e-6,
            bisections: 6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DtPolicy {
    Fixed(f64),
    /// See [`adaptive_dt`]; the first step uses `dt_max`.
    Adaptive { c_dt: f64, dt_min: f64, dt_max: f64 },
    /// Probe the largest stable step at startup and run at `safety` times it.
    Probed { safety: f64, probe: ProbeSettings },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSettings {
    pub t_end: f64,
    pub dt: DtPolicy,
    /// A step with `max_rate` below this counts as stationary; 0 disables.
    pub tol_stationary: f64,
    /// Consecutive stationary steps required to stop.
    pub stationary_steps: usize,
    pub max_steps: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitReason {
    ReachedEnd,
    Stationary,
    MaxSteps,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub steps: u64,
    pub t_final: f64,
    pub exit: ExitReason,
    /// Steps whose Lyapunov quantity grew beyond round-off.
    pub warnings: u64,
    /// Largest relative per-step growth of the Lyapunov quantity (negative if
    /// it always decreased).
    pub max_relative_increase: f64,
    pub final_energy: f64,
}

/// Receives the state at the start and after every step.
pub trait RunObserver {
    fn start(&mut self, _state: &FlowState, _stepper: &Stepper) -> Result<(), FlowError> {
        Ok(())
    }

    fn step(&mut self, _state: &FlowState, _diag: &StepDiagnostics, _stepper: &Stepper) -> Result<(), FlowError> {
        Ok(())
    }

    fn finish(&mut self, _state: &FlowState, _summary: &RunSummary, _stepper: &Stepper) -> Result<(), FlowError> {
        Ok(())
    }
}

pub struct NullObserver;

impl RunObserver for NullObserver {}

/// Steps `state` until `t_end`, stationarity, or the step limit.
pub fn run(
    stepper: &mut Stepper,
    mut state: FlowState,
    settings: &RunSettings,
    observer: &mut dyn RunObserver,
) -> Result<(FlowState, RunSummary), FlowError> {
    stepper.reset();
    let mut dt = match settings.dt {
        DtPolicy::Fixed(dt) => dt,
        DtPolicy::Adaptive { dt_max, .. } => dt_max,
        DtPolicy::Probed { safety, probe } => {
            let stable = probe_max_stable_dt(stepper, &state.u, &probe)?;
            log::info!("probed stable dt {stable:.4e}; running at {:.4e}", safety * stable);
            safety * stable
        }
    };
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(FlowError::InvalidTimeStep(dt));
    }
    state.dt = dt;
    observer.start(&state, stepper)?;

    let end_slack = 1e-12 * settings.t_end.abs().max(f64::MIN_POSITIVE);
    let mut summary = RunSummary {
        steps: 0,
        t_final: state.t,
        exit: ExitReason::ReachedEnd,
        warnings: 0,
        max_relative_increase: f64::NEG_INFINITY,
        final_energy: f64::NAN,
    };
    let mut quiet = 0usize;
    while state.t < settings.t_end - end_slack {
        if settings.max_steps.is_some_and(|m| summary.steps >= m) {
            summary.exit = ExitReason::MaxSteps;
            break;
        }
        state.dt = dt.min(settings.t_end - state.t);
        let (next, diag) = stepper.step(&state)?;
        state = next;
        // restore the nominal step if the last one was clipped
        state.dt = dt;
        summary.steps += 1;
        summary.max_relative_increase = summary.max_relative_increase.max(diag.relative_increase());
        if diag.warning.is_some() {
            summary.warnings += 1;
        }
        summary.final_energy = diag.energy_after;
        observer.step(&state, &diag, stepper)?;

        if let DtPolicy::Adaptive { c_dt, dt_min, dt_max } = settings.dt {
            dt = adaptive_dt(diag.max_rate, c_dt, dt_min, dt_max);
        }
        if settings.tol_stationary > 0.0 && diag.max_rate < settings.tol_stationary {
            quiet += 1;
            if quiet >= settings.stationary_steps.max(1) {
                summary.exit = ExitReason::Stationary;
                break;
            }
        } else {
            quiet = 0;
        }
    }
    summary.t_final = state.t;
    if summary.steps == 0 {
        summary.final_energy = stepper.lyapunov(&state.u);
    }
    observer.finish(&state, &summary, stepper)?;
    Ok((state, summary))
}

/// Deterministic pseudo-random values in `[-½, ½)`, one per cell.
fn perturbation(n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(|i| {
        let x = ((i as f64 + 1.0) * 12.9898).sin() * 43758.5453;
        x - x.floor() - 0.5
    })
}

fn is_stable(stepper: &mut Stepper, u: &Field, dt: f64, probe: &ProbeSettings) -> bool {
    let mut seeded = u.clone();
    for (v, r) in seeded.values_mut().iter_mut().zip(perturbation(u.len())) {
        *v += probe.noise * r;
    }
    stepper.reset();
    // trial steps are expected to misbehave: keep the energy check on and quiet
    let saved = (stepper.monitor_energy, stepper.quiet);
    stepper.monitor_energy = true;
    stepper.quiet = true;
    let mut state = FlowState::new(seeded, stepper.scheme(), dt);
    let start_energy = stepper.lyapunov(&state.u);
    let mut stable = true;
    for _ in 0..probe.steps {
        match stepper.step(&state) {
            Ok((next, diag)) => {
                if diag.relative_increase() > ENERGY_INCREASE_TOL {
                    stable = false;
                    break;
                }
                state = next;
            }
            Err(_) => {
                stable = false;
                break;
            }
        }
    }
    stable = stable && stepper.lyapunov(&state.u) <= start_energy;
    stepper.reset();
    (stepper.monitor_energy, stepper.quiet) = saved;
    stable
}

/// Largest `dt` for which `probe.steps` steps from a slightly perturbed `u`
/// stay finite and decrease the scheme's Lyapunov quantity at every step.
/// Brackets by halving or doubling, then bisects on a log scale.
pub fn probe_max_stable_dt(stepper: &mut Stepper, u: &Field, probe: &ProbeSettings) -> Result<f64, FlowError> {
    let start = probe.dt_start;
    if !(start > 0.0 && start.is_finite()) {
        return Err(FlowError::InvalidTimeStep(start));
    }
    let (mut lo, mut hi);
    if is_stable(stepper, u, start, probe) {
        lo = start;
        hi = 2.0 * start;
        let mut tries = 0;
        while is_stable(stepper, u, hi, probe) {
            lo = hi;
            hi *= 2.0;
            tries += 1;
            if tries > 60 {
                return Ok(lo);
            }
        }
    } else {
        hi = start;
        lo = 0.5 * start;
        let mut tries = 0;
        while !is_stable(stepper, u, lo, probe) {
            hi = lo;
            lo *= 0.5;
            tries += 1;
            if tries > 60 {
                return Err(FlowError::InvalidTimeStep(lo));
            }
        }
    }
    for _ in 0..probe.bisections {
        let mid = (lo * hi).sqrt();
        if is_stable(stepper, u, mid, probe) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}
