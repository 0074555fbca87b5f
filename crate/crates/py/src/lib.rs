//! Python bindings: build initial conditions, step any of the flows and
//! read back fields, energies and topology.
//!
//! Fields cross the boundary as flat row-major lists of floats together
//! with their dims and extent.

use std::collections::BTreeMap;
use std::path::PathBuf;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use wflab::analysis::{measure_radius, TopologyReport};
use wflab::energy::{EnergyReport, ModelParams};
use wflab::flow::{FlowState, Scheme, Stepper};
use wflab::grid::{Field, Grid};
use wflab::init::{preset, PRESET_NAMES};
use wflab::io::{read_snapshot, write_snapshot};
use wflab::potential;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn make_grid(dims: &[usize], extent: &[(f64, f64)]) -> PyResult<Grid> {
    Grid::new(dims, extent).map_err(value_err)
}

fn make_field(values: Vec<f64>, dims: &[usize], extent: &[(f64, f64)]) -> PyResult<Field> {
    Field::from_vec(&make_grid(dims, extent)?, values).map_err(value_err)
}

fn extent_of(g: &Grid) -> Vec<(f64, f64)> {
    (0..g.ndim()).map(|a| (g.lo()[a], g.hi()[a])).collect()
}

/// The optimal profile q(r) = 1/(1 + exp(-6r)).
#[pyfunction]
fn profile(r: f64) -> f64 {
    potential::profile(r)
}

/// The double-well potential W(s) = 18 s^2 (1 - s)^2.
#[pyfunction]
fn double_well(s: f64) -> f64 {
    potential::double_well(s)
}

/// Names of the built-in initial conditions.
#[pyfunction]
fn preset_names() -> Vec<&'static str> {
    PRESET_NAMES.to_vec()
}

/// `(values, dims, extent, eps)` of a preset, optionally at `n` cells per axis.
#[pyfunction]
#[pyo3(signature = (name, n=None))]
fn preset_field(name: &str, n: Option<usize>) -> PyResult<(Vec<f64>, Vec<usize>, Vec<(f64, f64)>, f64)> {
    let p = preset(name).map_err(value_err)?;
    let dims = match n {
        Some(n) => vec![n; p.dims.len()],
        None => p.dims.clone(),
    };
    let grid = make_grid(&dims, &p.extent)?;
    let u = p.field_on(&grid).map_err(value_err)?;
    Ok((u.into_values(), dims, p.extent, p.params.eps))
}

fn params(eps: f64, gamma: f64, alpha: f64, delta: f64) -> PyResult<ModelParams> {
    let p = ModelParams::new(eps)
        .with_gamma(gamma)
        .with_alpha_bulk(alpha)
        .with_delta(delta);
    p.validate().map_err(value_err)?;
    Ok(p)
}

/// Every energy of a field, as a dict.
#[pyfunction]
#[pyo3(signature = (values, dims, extent, eps, gamma=0.0, alpha=0.0, delta=0.1))]
fn energies(
    values: Vec<f64>,
    dims: Vec<usize>,
    extent: Vec<(f64, f64)>,
    eps: f64,
    gamma: f64,
    alpha: f64,
    delta: f64,
) -> PyResult<BTreeMap<&'static str, f64>> {
    let u = make_field(values, &dims, &extent)?;
    let p = params(eps, gamma, alpha, delta)?;
    Ok(EnergyReport::evaluate(&u, &p, 0.0).entries().into_iter().collect())
}

/// Component counts of {u > 1/2} and its complement.
#[pyfunction]
#[pyo3(signature = (values, dims, extent, initial=None))]
fn topology(
    values: Vec<f64>,
    dims: Vec<usize>,
    extent: Vec<(f64, f64)>,
    initial: Option<usize>,
) -> PyResult<BTreeMap<&'static str, String>> {
    let u = make_field(values, &dims, &extent)?;
    let rep = TopologyReport::of(&u, initial);
    Ok(BTreeMap::from([
        ("inside_face", rep.inside_face.to_string()),
        ("inside_full", rep.inside_full.to_string()),
        ("outside_face", rep.outside_face.to_string()),
        ("outside_full", rep.outside_full.to_string()),
        ("classification", rep.classification.to_string()),
    ]))
}

#[pyfunction]
fn load_snapshot(path: PathBuf) -> PyResult<(Vec<f64>, Vec<usize>, Vec<(f64, f64)>, f64)> {
    let (u, t) = read_snapshot(&path).map_err(value_err)?;
    let g = *u.grid();
    Ok((u.into_values(), g.dims().to_vec(), extent_of(&g), t))
}

#[pyfunction]
fn save_snapshot(path: PathBuf, values: Vec<f64>, dims: Vec<usize>, extent: Vec<(f64, f64)>, t: f64) -> PyResult<()> {
    let u = make_field(values, &dims, &extent)?;
    write_snapshot(&u, t, &path).map_err(value_err)
}

/// A field evolving under one of the flows.
#[pyclass]
struct Simulation {
    stepper: Stepper,
    state: FlowState,
}

#[pymethods]
impl Simulation {
    #[new]
    #[pyo3(signature = (scheme, values, dims, extent, eps, gamma=0.0, alpha=0.0, delta=0.1, dt=1e-6))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        scheme: &str,
        values: Vec<f64>,
        dims: Vec<usize>,
        extent: Vec<(f64, f64)>,
        eps: f64,
        gamma: f64,
        alpha: f64,
        delta: f64,
        dt: f64,
    ) -> PyResult<Self> {
        let scheme: Scheme = scheme.parse().map_err(value_err)?;
        let u = make_field(values, &dims, &extent)?;
        let stepper = Stepper::new(scheme, params(eps, gamma, alpha, delta)?).map_err(value_err)?;
        Ok(Simulation { stepper, state: FlowState::new(u, scheme, dt) })
    }

    /// Takes `n` steps; returns the Lyapunov quantity after the last one.
    #[pyo3(signature = (n=1))]
    fn step(&mut self, n: usize) -> PyResult<f64> {
        let mut energy = self.stepper.lyapunov(&self.state.u);
        for _ in 0..n {
            let (next, diag) = self
                .stepper
                .step(&self.state)
                .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
            self.state = next;
            energy = diag.energy_after;
        }
        Ok(energy)
    }

    #[getter]
    fn t(&self) -> f64 {
        self.state.t
    }

    #[getter]
    fn steps(&self) -> u64 {
        self.state.step
    }

    #[getter]
    fn dt(&self) -> f64 {
        self.state.dt
    }

    #[setter]
    fn set_dt(&mut self, dt: f64) -> PyResult<()> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(PyValueError::new_err("dt must be positive"));
        }
        self.state.dt = dt;
        Ok(())
    }

    fn field(&self) -> Vec<f64> {
        self.state.u.values().to_vec()
    }

    fn energy(&self) -> f64 {
        self.stepper.lyapunov(&self.state.u)
    }

    fn radius(&self) -> PyResult<f64> {
        measure_radius(&self.state.u).map_err(value_err)
    }
}

#[pymodule]
fn pywflab(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(profile, m)?)?;
    m.add_function(wrap_pyfunction!(double_well, m)?)?;
    m.add_function(wrap_pyfunction!(preset_names, m)?)?;
    m.add_function(wrap_pyfunction!(preset_field, m)?)?;
    m.add_function(wrap_pyfunction!(energies, m)?)?;
    m.add_function(wrap_pyfunction!(topology, m)?)?;
    m.add_function(wrap_pyfunction!(load_snapshot, m)?)?;
    m.add_function(wrap_pyfunction!(save_snapshot, m)?)?;
    m.add_class::<Simulation>()?;
    Ok(())
}
