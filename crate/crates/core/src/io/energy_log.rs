//! The per-run energy log.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::Path;

use super::IoError;
use crate::analysis::{count_components, Connectivity, PHASE_THRESHOLD};
use crate::energy::{
    bellettini_energy_discrete, bulk_energy, collision_penalty_simplified, surface_energy, willmore_energy,
};
use crate::flow::{FlowState, Stepper};

pub const ENERGY_CSV_HEADER: &str =
    "step,t,dt,h_eps,w_eps,pen_a_tilde,bellettini_discrete,bulk,total,max_rate,ncomp4,ncomp8";

/// One line of the energy log. `total` is the quantity the active scheme
/// decreases.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyRow {
    pub step: u64,
    pub t: f64,
    pub dt: f64,
    pub h_eps: f64,
    pub w_eps: f64,
    pub pen_a_tilde: f64,
    pub bellettini_discrete: f64,
    pub bulk: f64,
    pub total: f64,
    pub max_rate: f64,
    /// Face-connected components of `{u > 1/2}`.
    pub ncomp4: usize,
    /// Fully connected components of `{u > 1/2}`.
    pub ncomp8: usize,
}

impl EnergyRow {
    pub fn evaluate(state: &FlowState, max_rate: f64, stepper: &Stepper) -> Self {
        let (u, p) = (&state.u, stepper.params());
        EnergyRow {
            step: state.step,
            t: state.t,
            dt: state.dt,
            h_eps: surface_energy(u, p),
            w_eps: willmore_energy(u, p),
            pen_a_tilde: collision_penalty_simplified(u, p),
            bellettini_discrete: bellettini_energy_discrete(u, p),
            bulk: bulk_energy(u, p),
            total: stepper.lyapunov(u),
            max_rate,
            ncomp4: count_components(u, PHASE_THRESHOLD, true, Connectivity::Face),
            ncomp8: count_components(u, PHASE_THRESHOLD, true, Connectivity::Full),
        }
    }

    pub fn to_csv_line(&self) -> String {
        let mut s = format!("{}", self.step);
        for v in [
            self.t,
            self.dt,
            self.h_eps,
            self.w_eps,
            self.pen_a_tilde,
            self.bellettini_discrete,
            self.bulk,
            self.total,
            self.max_rate,
        ] {
            // 17 significant digits round-trip every f64
            let _ = write!(s, ",{v:.16e}");
        }
        let _ = write!(s, ",{},{}", self.ncomp4, self.ncomp8);
        s
    }

    pub fn parse_csv_line(line: &str) -> Result<Self, IoError> {
        let cols: Vec<&str> = line.trim().split(',').collect();
        if cols.len() != 12 {
            return Err(IoError::Format(format!("energy row has {} columns, expected 12", cols.len())));
        }
        let bad = |c: &str| IoError::Format(format!("bad energy value '{c}'"));
        let f = |i: usize| cols[i].parse::<f64>().map_err(|_| bad(cols[i]));
        let n = |i: usize| cols[i].parse::<u64>().map_err(|_| bad(cols[i]));
        Ok(EnergyRow {
            step: n(0)?,
            t: f(1)?,
            dt: f(2)?,
            h_eps: f(3)?,
            w_eps: f(4)?,
            pen_a_tilde: f(5)?,
            bellettini_discrete: f(6)?,
            bulk: f(7)?,
            total: f(8)?,
            max_rate: f(9)?,
            ncomp4: n(10)? as usize,
            ncomp8: n(11)? as usize,
        })
    }
}

pub fn energy_csv(rows: &[EnergyRow]) -> String {
    let mut s = String::from(ENERGY_CSV_HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&r.to_csv_line());
        s.push('\n');
    }
    s
}

pub fn write_energy_csv(rows: &[EnergyRow], path: &Path) -> Result<(), IoError> {
    fs::write(path, energy_csv(rows))?;
    Ok(())
}

pub fn read_energy_csv(path: &Path) -> Result<Vec<EnergyRow>, IoError> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    if lines.next() != Some(ENERGY_CSV_HEADER) {
        return Err(IoError::Format("energy log header mismatch".into()));
    }
    lines.filter(|l| !l.trim().is_empty()).map(EnergyRow::parse_csv_line).collect()
}

/// Appends rows to an open log as a run progresses.
pub struct EnergyLogWriter<W: Write> {
    out: W,
}

impl<W: Write> EnergyLogWriter<W> {
    pub fn new(mut out: W) -> Result<Self, IoError> {
        writeln!(out, "{ENERGY_CSV_HEADER}")?;
        Ok(EnergyLogWriter { out })
    }

    pub fn push(&mut self, row: &EnergyRow) -> Result<(), IoError> {
        writeln!(self.out, "{}", row.to_csv_line())?;
        Ok(())
    }

    pub fn flush(&mut self) -> Result<(), IoError> {
        self.out.flush()?;
        Ok(())
    }
}
