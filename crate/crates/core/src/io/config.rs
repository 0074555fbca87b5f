//! Plain-text run configuration.
//!
//! ```text
//! scheme = modified
//!
//! [grid]
//! dims = 128 128
//! extent = -1 1 -1 1
//!
//! [params]
//! eps = 0.1
//!
//! [ic]
//! shape = disk 0 0 0.1
//! ```
//!
//! `#` starts a comment. Keys outside a section belong to the top level.
//! A preset in `[ic]` supplies the domain, resolution, parameters and scheme
//! for anything not set explicitly. Unknown sections and keys are errors.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::energy::ModelParams;
use crate::flow::{BellettiniFactor, DtPolicy, ProbeSettings, RunSettings, Scheme};
use crate::grid::{Field, Grid};
use crate::init::{phase_from_scene, preset, Scene, Shape};
use crate::linsolve::{LinearSolverParams, Preconditioner};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("{at}: {msg}")]
    Syntax { at: String, msg: String },
    #[error("{at}: unknown section [{section}]")]
    UnknownSection { at: String, section: String },
    #[error("{at}: unknown key '{key}' in {section}")]
    UnknownKey { at: String, section: String, key: String },
    #[error("{at}: invalid value for {field}: {msg}")]
    Invalid { at: String, field: String, msg: String },
    #[error("missing required setting {0}")]
    Missing(String),
}

const KEYS: &[(&str, &[&str])] = &[
    ("", &["scheme"]),
    ("grid", &["dims", "extent"]),
    ("params", &["eps", "gamma", "alpha", "alpha_pen", "delta", "delta_w", "bellettini_factor"]),
    (
        "time",
        &[
            "t_end",
            "dt",
            "dt_min",
            "dt_max",
            "c_dt",
            "cfl_safety",
            "probe_steps",
            "tol_stationary",
            "stationary_steps",
            "max_steps",
        ],
    ),
    ("solver", &["rel_tol", "max_iters", "preconditioner"]),
    ("ic", &["preset", "shape"]),
    ("output", &["directory", "snapshot_every", "energy_every", "formats"]),
];

#[derive(Debug, Clone, PartialEq)]
pub struct TimeConfig {
    pub t_end: f64,
    /// Fixed step; takes precedence over the adaptive and probed policies.
    pub dt: Option<f64>,
    pub dt_min: f64,
    pub dt_max: Option<f64>,
    /// Turns on adaptive stepping `dt = c_dt / max_rate`.
    pub c_dt: Option<f64>,
    /// Fraction of the probed stable step to run at.
    pub cfl_safety: f64,
    pub probe_steps: usize,
    pub tol_stationary: f64,
    pub stationary_steps: usize,
    pub max_steps: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Formats {
    pub csv: bool,
    pub snapshot: bool,
    pub pgm: bool,
    pub contour: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub directory: PathBuf,
    /// Snapshot cadence in steps; 0 writes only the first and last state.
    pub snapshot_every: u64,
    pub energy_every: u64,
    pub formats: Formats,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub scheme: Scheme,
    pub grid: Grid,
    pub params: ModelParams,
    pub bellettini_factor: BellettiniFactor,
    pub linear: LinearSolverParams,
    pub time: TimeConfig,
    pub preset: Option<String>,
    pub scene: Scene,
    pub output: OutputConfig,
}

struct Entry {
    at: String,
    value: String,
}

#[derive(Default)]
struct Entries {
    single: HashMap<(String, String), Entry>,
    shapes: Vec<Entry>,
}

impl Entries {
    fn insert(&mut self, section: &str, key: &str, value: &str, at: String) -> Result<(), ConfigError> {
        let known = KEYS
            .iter()
            .find(|(s, _)| *s == section)
            .ok_or_else(|| ConfigError::UnknownSection { at: at.clone(), section: section.to_string() })?;
        if !known.1.contains(&key) {
            let section = if section.is_empty() { "the top level".to_string() } else { format!("[{section}]") };
            return Err(ConfigError::UnknownKey { at, section, key: key.to_string() });
        }
        let entry = Entry { at, value: value.to_string() };
        if section == "ic" && key == "shape" {
            self.shapes.push(entry);
        } else {
            self.single.insert((section.to_string(), key.to_string()), entry);
        }
        Ok(())
    }

    fn get(&self, section: &str, key: &str) -> Option<&Entry> {
        self.single.get(&(section.to_string(), key.to_string()))
    }

    fn parse<T: std::str::FromStr>(&self, section: &str, key: &str) -> Result<Option<T>, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        match self.get(section, key) {
            None => Ok(None),
            Some(e) => e.value.parse::<T>().map(Some).map_err(|err| invalid(e, section, key, &err.to_string())),
        }
    }

    fn list<T: std::str::FromStr>(&self, section: &str, key: &str) -> Result<Option<Vec<T>>, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        match self.get(section, key) {
            None => Ok(None),
            Some(e) => e
                .value
                .split_whitespace()
                .map(|w| w.parse::<T>().map_err(|err| invalid(e, section, key, &format!("'{w}': {err}"))))
                .collect::<Result<Vec<T>, _>>()
                .map(Some),
        }
    }
}

fn field_name(section: &str, key: &str) -> String {
    if section.is_empty() {
        key.to_string()
    } else {
        format!("{section}.{key}")
    }
}

fn invalid(e: &Entry, section: &str, key: &str, msg: &str) -> ConfigError {
    ConfigError::Invalid {
        at: e.at.clone(),
        field: field_name(section, key),
        msg: msg.to_string(),
    }
}

fn split_key_value(text: &str, at: &str) -> Result<(String, String), ConfigError> {
    let (k, v) = text.split_once('=').ok_or_else(|| ConfigError::Syntax {
        at: at.to_string(),
        msg: format!("expected 'key = value', got '{}'", text.trim()),
    })?;
    let (k, v) = (k.trim(), v.trim());
    if k.is_empty() {
        return Err(ConfigError::Syntax { at: at.to_string(), msg: "empty key".into() });
    }
    Ok((k.to_string(), v.to_string()))
}

impl SimConfig {
    /// Parses a config file's text, then applies `overrides` of the form
    /// `section.key=value` (or `key=value` for top-level keys).
    pub fn parse(text: &str, overrides: &[String]) -> Result<Self, ConfigError> {
        let mut entries = Entries::default();
        let mut section = String::new();
        for (no, raw) in text.lines().enumerate() {
            let at = format!("line {}", no + 1);
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest.strip_suffix(']').ok_or_else(|| ConfigError::Syntax {
                    at: at.clone(),
                    msg: format!("unterminated section header '{line}'"),
                })?;
                let name = name.trim();
                if name.is_empty() || !KEYS.iter().any(|(s, _)| *s == name) {
                    return Err(ConfigError::UnknownSection { at, section: name.to_string() });
                }
                section = name.to_string();
                continue;
            }
            let (k, v) = split_key_value(line, &at)?;
            entries.insert(&section, &k, &v, at)?;
        }
        for o in overrides {
            let at = format!("override '{o}'");
            let (k, v) = split_key_value(o, &at)?;
            let (s, k) = k.rsplit_once('.').unwrap_or(("", &k));
            entries.insert(s, k, &v, at.clone())?;
        }
        Self::from_entries(&entries)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self, super::IoError> {
        let text = fs::read_to_string(path)?;
        Ok(Self::parse(&text, overrides)?)
    }

    fn from_entries(e: &Entries) -> Result<Self, ConfigError> {
        let preset = match e.get("ic", "preset") {
            Some(entry) => Some(
                preset(&entry.value).map_err(|err| invalid(entry, "ic", "preset", &err.to_string()))?,
            ),
            None => None,
        };

        let scheme = match e.parse::<Scheme>("", "scheme")? {
            Some(s) => s,
            None => preset.as_ref().map(|p| p.scheme).ok_or_else(|| ConfigError::Missing("scheme".into()))?,
        };

        let dims: Vec<usize> = match e.list("grid", "dims")? {
            Some(d) => d,
            None => preset.as_ref().map(|p| p.dims.clone()).ok_or_else(|| ConfigError::Missing("grid.dims".into()))?,
        };
        let extent: Vec<(f64, f64)> = match e.list::<f64>("grid", "extent")? {
            Some(v) => {
                if v.len() != 2 * dims.len() {
                    let entry = e.get("grid", "extent").expect("present");
                    return Err(invalid(entry, "grid", "extent", &format!("expected {} numbers (lo hi per axis)", 2 * dims.len())));
                }
                v.chunks(2).map(|c| (c[0], c[1])).collect()
            }
            None => match &preset {
                Some(p) if p.extent.len() == dims.len() => p.extent.clone(),
                _ => vec![(0.0, 1.0); dims.len()],
            },
        };
        let grid = Grid::new(&dims, &extent).map_err(|err| ConfigError::Invalid {
            at: e.get("grid", "dims").map_or("preset".into(), |x| x.at.clone()),
            field: "grid".into(),
            msg: err.to_string(),
        })?;

        let base = preset.as_ref().map(|p| p.params);
        let eps = match e.parse::<f64>("params", "eps")? {
            Some(v) => v,
            None => base.map(|b| b.eps).ok_or_else(|| ConfigError::Missing("params.eps".into()))?,
        };
        let mut params = base.map_or_else(|| ModelParams::new(eps), |b| ModelParams { eps, ..b });
        if let Some(v) = e.parse("params", "gamma")? {
            params.gamma = v;
        }
        if let Some(v) = e.parse("params", "alpha")? {
            params.alpha_bulk = v;
        }
        if let Some(v) = e.parse("params", "alpha_pen")? {
            params.alpha_pen = v;
        }
        if let Some(v) = e.parse("params", "delta")? {
            params.delta = v;
        }
        if let Some(v) = e.parse("params", "delta_w")? {
            params.delta_w = v;
        }
        params.validate().map_err(|err| ConfigError::Invalid {
            at: "[params]".into(),
            field: "params".into(),
            msg: err.to_string(),
        })?;

        let bellettini_factor = match e.get("params", "bellettini_factor") {
            None => BellettiniFactor::default(),
            Some(entry) => match entry.value.as_str() {
                "averaged" => BellettiniFactor::Averaged,
                "literal" => BellettiniFactor::Literal,
                other => {
                    return Err(invalid(entry, "params", "bellettini_factor", &format!("'{other}' is not 'averaged' or 'literal'")))
                }
            },
        };

        let mut linear = LinearSolverParams::default();
        if let Some(v) = e.parse("solver", "rel_tol")? {
            linear.rel_tol = v;
        }
        if let Some(v) = e.parse("solver", "max_iters")? {
            linear.max_iters = v;
        }
        if let Some(entry) = e.get("solver", "preconditioner") {
            linear.preconditioner = match entry.value.as_str() {
                "none" => Preconditioner::None,
                "jacobi" | "diagonal" => Preconditioner::Diagonal,
                "ilu0" => Preconditioner::Ilu0,
                other => return Err(invalid(entry, "solver", "preconditioner", &format!("unknown preconditioner '{other}'"))),
            };
        }

        let time = TimeConfig {
            t_end: e.parse("time", "t_end")?.unwrap_or(1e-3),
            dt: e.parse("time", "dt")?,
            dt_min: e.parse("time", "dt_min")?.unwrap_or(1e-14),
            dt_max: e.parse("time", "dt_max")?,
            c_dt: e.parse("time", "c_dt")?,
            cfl_safety: e.parse("time", "cfl_safety")?.unwrap_or(0.5),
            probe_steps: e.parse("time", "probe_steps")?.unwrap_or(200),
            tol_stationary: e.parse("time", "tol_stationary")?.unwrap_or(1e-3),
            stationary_steps: e.parse("time", "stationary_steps")?.unwrap_or(10),
            max_steps: e.parse("time", "max_steps")?,
        };
        let positive = |v: f64| v > 0.0 && v.is_finite();
        let checks = [
            ("t_end", time.t_end >= 0.0 && time.t_end.is_finite()),
            ("dt", time.dt.map_or(true, positive)),
            ("dt_min", positive(time.dt_min)),
            ("dt_max", time.dt_max.map_or(true, |d| positive(d) && d >= time.dt_min)),
            ("c_dt", time.c_dt.map_or(true, positive)),
            ("cfl_safety", positive(time.cfl_safety)),
            ("probe_steps", time.probe_steps > 0),
            ("tol_stationary", time.tol_stationary >= 0.0),
        ];
        for (key, ok) in checks {
            if !ok {
                let at = e.get("time", key).map_or("defaults".into(), |x| x.at.clone());
                return Err(ConfigError::Invalid { at, field: format!("time.{key}"), msg: "out of range".into() });
            }
        }
        if time.c_dt.is_some() && time.dt.is_none() && time.dt_max.is_none() {
            return Err(ConfigError::Missing("time.dt_max (required with time.c_dt)".into()));
        }

        let mut scene = preset.as_ref().map(|p| p.scene.clone()).unwrap_or_default();
        if !e.shapes.is_empty() {
            scene.shapes = e
                .shapes
                .iter()
                .map(|s| s.value.parse::<Shape>().map_err(|err| invalid(s, "ic", "shape", &err.to_string())))
                .collect::<Result<_, _>>()?;
        }
        scene.check_dimension(grid.ndim()).map_err(|err| ConfigError::Invalid {
            at: "[ic]".into(),
            field: "ic.shape".into(),
            msg: err.to_string(),
        })?;

        let mut formats = Formats { csv: true, snapshot: true, ..Formats::default() };
        if let Some(entry) = e.get("output", "formats") {
            formats = Formats::default();
            for w in entry.value.split(|c: char| c == ',' || c.is_whitespace()).filter(|w| !w.is_empty()) {
                match w {
                    "csv" => formats.csv = true,
                    "snapshot" => formats.snapshot = true,
                    "pgm" => formats.pgm = true,
                    "contour" => formats.contour = true,
                    other => return Err(invalid(entry, "output", "formats", &format!("unknown format '{other}'"))),
                }
            }
        }
        let output = OutputConfig {
            directory: e.get("output", "directory").map_or_else(|| PathBuf::from("out"), |x| PathBuf::from(&x.value)),
            snapshot_every: e.parse("output", "snapshot_every")?.unwrap_or(0),
            energy_every: e.parse("output", "energy_every")?.unwrap_or(10),
            formats,
        };
        if output.energy_every == 0 {
            let entry = e.get("output", "energy_every").expect("only an explicit 0 fails");
            return Err(invalid(entry, "output", "energy_every", "must be at least 1"));
        }

        Ok(SimConfig {
            scheme,
            grid,
            params,
            bellettini_factor,
            linear,
            time,
            preset: preset.map(|p| p.name.to_string()),
            scene,
            output,
        })
    }

    /// Time-step policy: a fixed `dt` if given, adaptive if `c_dt` is given,
    /// a probed step for explicit schemes, otherwise a fixed `5e-6`.
    pub fn dt_policy(&self) -> DtPolicy {
        let t = &self.time;
        if let Some(dt) = t.dt {
            return DtPolicy::Fixed(dt);
        }
        if let Some(c_dt) = t.c_dt {
            return DtPolicy::Adaptive {
                c_dt,
                dt_min: t.dt_min,
                dt_max: t.dt_max.expect("validated"),
            };
        }
        if self.scheme.is_explicit() {
            let mut probe = ProbeSettings::for_grid(self.grid.min_spacing(), self.params.eps);
            probe.steps = t.probe_steps;
            DtPolicy::Probed { safety: t.cfl_safety, probe }
        } else {
            DtPolicy::Fixed(5e-6)
        }
    }

    pub fn run_settings(&self) -> RunSettings {
        RunSettings {
            t_end: self.time.t_end,
            dt: self.dt_policy(),
            tol_stationary: self.time.tol_stationary,
            stationary_steps: self.time.stationary_steps,
            max_steps: self.time.max_steps,
        }
    }

    pub fn initial_field(&self) -> Field {
        phase_from_scene(&self.scene, &self.grid, self.params.eps).expect("dimension checked on load")
    }
}
