//! The `wflab` command line: run a configured simulation, evaluate the
//! energies of a snapshot, analyze its topology, list the presets.

use std::fmt::Write as _;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::analysis::{contours_to_csv, extract_contour, measure_radius, AnalysisError, TopologyReport, PHASE_THRESHOLD};
use crate::energy::{EnergyReport, ModelParams};
use crate::flow::{run, FlowError, FlowState, RunObserver, RunSummary, StepDiagnostics, Stepper};
use crate::init::{preset, InitError, PRESET_NAMES};
use crate::io::{
    read_snapshot, write_pgm, write_snapshot, EnergyLogWriter, EnergyRow, IoError, SimConfig,
};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Io(#[from] IoError),
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Init(#[from] InitError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error("invalid parameters: {0}")]
    Params(#[from] crate::energy::ParamError),
    #[error("{0}")]
    Usage(String),
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(IoError::Io(e))
    }
}

#[derive(Debug, Parser)]
#[command(name = "wflab", version, about = "Phase-field Willmore flow simulations")]
pub struct Cli {
    /// Worker threads (0 = all cores). Overrides WFLAB_THREADS.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the simulation described by a config file.
    Run {
        config: PathBuf,
        /// Override a setting, e.g. `--set params.eps=0.05`. Repeatable.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Output directory (overrides output.directory).
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Print every energy of a stored field.
    Energy {
        snapshot: PathBuf,
        #[command(flatten)]
        params: ParamArgs,
    },
    /// Print the radius and connected components of a stored field.
    Analyze {
        snapshot: PathBuf,
        /// Component count to classify against (default: the current count).
        #[arg(long)]
        initial: Option<usize>,
        /// Write the {u = 1/2} contour as CSV polylines (2D only).
        #[arg(long)]
        contour: Option<PathBuf>,
        /// Write a grayscale image.
        #[arg(long)]
        pgm: Option<PathBuf>,
    },
    /// List the named initial conditions.
    Presets,
}

#[derive(Debug, Args)]
pub struct ParamArgs {
    /// Interface width.
    #[arg(long)]
    pub eps: f64,
    #[arg(long, default_value_t = 0.0)]
    pub gamma: f64,
    /// Bulk expansion strength.
    #[arg(long, default_value_t = 0.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.0)]
    pub alpha_pen: f64,
    #[arg(long, default_value_t = 0.1)]
    pub delta: f64,
    #[arg(long, default_value_t = 0.01)]
    pub delta_w: f64,
}

impl ParamArgs {
    pub fn params(&self) -> ModelParams {
        ModelParams::new(self.eps)
            .with_gamma(self.gamma)
            .with_alpha_bulk(self.alpha)
            .with_alpha_pen(self.alpha_pen)
            .with_delta(self.delta)
            .with_delta_w(self.delta_w)
    }
}

/// Sizes the global thread pool from `--threads` or `WFLAB_THREADS`.
pub fn configure_threads(flag: Option<usize>) {
    let n = flag.or_else(|| std::env::var("WFLAB_THREADS").ok().and_then(|v| v.trim().parse().ok()));
    if let Some(n) = n.filter(|&n| n > 0) {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("thread pool already configured: {e}");
        }
    }
}

/// Runs a parsed command line, writing human-readable output to `out`.
pub fn execute(cli: Cli, out: &mut String) -> Result<(), CliError> {
    configure_threads(cli.threads);
    match cli.command {
        Command::Run { config, overrides, output } => {
            let mut cfg = SimConfig::load(&config, &overrides)?;
            if let Some(dir) = output {
                cfg.output.directory = dir;
            }
            let (state, summary) = run_config(&cfg)?;
            let _ = writeln!(out, "scheme      {}", cfg.scheme);
            let _ = writeln!(out, "steps       {}", summary.steps);
            let _ = writeln!(out, "t_final     {:.6e}", state.t);
            let _ = writeln!(out, "dt          {:.6e}", state.dt);
            let _ = writeln!(out, "exit        {:?}", summary.exit);
            let _ = writeln!(out, "energy      {:.10e}", summary.final_energy);
            let _ = writeln!(out, "warnings    {}", summary.warnings);
            let _ = writeln!(out, "output      {}", cfg.output.directory.display());
        }
        Command::Energy { snapshot, params } => {
            let (u, t) = read_snapshot(&snapshot)?;
            let p = params.params();
            p.validate()?;
            for (name, value) in EnergyReport::evaluate(&u, &p, t).entries() {
                let _ = writeln!(out, "{name:<26} {value:.10e}");
            }
        }
        Command::Analyze { snapshot, initial, contour, pgm } => {
            let (u, t) = read_snapshot(&snapshot)?;
            let rep = TopologyReport::of(&u, initial);
            let _ = writeln!(out, "time                  {t:.6e}");
            match measure_radius(&u) {
                Ok(r) => {
                    let _ = writeln!(out, "radius                {r:.10e}");
                }
                Err(e) => {
                    let _ = writeln!(out, "radius                undefined ({e})");
                }
            }
            let _ = writeln!(out, "components_inside     {} (face) {} (full)", rep.inside_face, rep.inside_full);
            let _ = writeln!(out, "components_outside    {} (face) {} (full)", rep.outside_face, rep.outside_full);
            let _ = writeln!(out, "classification        {}", rep.classification);
            if let Some(path) = contour {
                let lines = extract_contour(&u, PHASE_THRESHOLD)?;
                fs::write(&path, contours_to_csv(&lines))?;
                let _ = writeln!(out, "contours              {} -> {}", lines.len(), path.display());
            }
            if let Some(path) = pgm {
                for f in write_pgm(&u, &path)? {
                    let _ = writeln!(out, "image                 {}", f.display());
                }
            }
        }
        Command::Presets => {
            for name in PRESET_NAMES {
                let p = preset(name)?;
                let extent: Vec<String> = p.extent.iter().map(|(lo, hi)| format!("({lo},{hi})")).collect();
                let dims: Vec<String> = p.dims.iter().map(|d| d.to_string()).collect();
                let _ = writeln!(
                    out,
                    "{name:<22} {:<22} eps={:<5} gamma={:<5} alpha={:<4} {:<10} scheme={}\n    {}",
                    extent.join("x"),
                    p.params.eps,
                    p.params.gamma,
                    p.params.alpha_bulk,
                    dims.join("x"),
                    p.scheme,
                    p.description
                );
            }
        }
    }
    Ok(())
}

/// Writes the energy log, snapshots, images and contours of a run.
struct RunWriter<'a> {
    cfg: &'a SimConfig,
    log: Option<EnergyLogWriter<BufWriter<fs::File>>>,
    last_logged: Option<u64>,
    last_snapshot: Option<u64>,
    last_rate: f64,
}

impl RunWriter<'_> {
    fn log_row(&mut self, state: &FlowState, max_rate: f64, stepper: &Stepper) -> Result<(), FlowError> {
        if let Some(log) = self.log.as_mut() {
            log.push(&EnergyRow::evaluate(state, max_rate, stepper)).map_err(io_to_flow)?;
        }
        self.last_logged = Some(state.step);
        Ok(())
    }

    fn save(&mut self, state: &FlowState) -> Result<(), FlowError> {
        let dir = &self.cfg.output.directory;
        let f = &self.cfg.output.formats;
        let tag = format!("{:08}", state.step);
        if f.snapshot {
            write_snapshot(&state.u, state.t, &dir.join(format!("snap_{tag}.wfg"))).map_err(io_to_flow)?;
        }
        if f.pgm {
            write_pgm(&state.u, &dir.join(format!("u_{tag}.pgm"))).map_err(io_to_flow)?;
        }
        if f.contour && state.u.grid().ndim() == 2 {
            let lines = extract_contour(&state.u, PHASE_THRESHOLD).expect("2D field");
            fs::write(dir.join(format!("contour_{tag}.csv")), contours_to_csv(&lines))?;
        }
        self.last_snapshot = Some(state.step);
        Ok(())
    }
}

fn io_to_flow(e: IoError) -> FlowError {
    match e {
        IoError::Io(e) => FlowError::Output(e),
        other => FlowError::Output(std::io::Error::other(other.to_string())),
    }
}

impl RunObserver for RunWriter<'_> {
    fn start(&mut self, state: &FlowState, stepper: &Stepper) -> Result<(), FlowError> {
        // no step has been taken yet, so there is no rate to report
        self.log_row(state, f64::NAN, stepper)?;
        self.save(state)
    }

    fn step(&mut self, state: &FlowState, diag: &StepDiagnostics, stepper: &Stepper) -> Result<(), FlowError> {
        self.last_rate = diag.max_rate;
        if state.step % self.cfg.output.energy_every == 0 {
            self.log_row(state, diag.max_rate, stepper)?;
        }
        let every = self.cfg.output.snapshot_every;
        if every > 0 && state.step % every == 0 {
            self.save(state)?;
        }
        Ok(())
    }

    fn finish(&mut self, state: &FlowState, _summary: &RunSummary, stepper: &Stepper) -> Result<(), FlowError> {
        if self.last_logged != Some(state.step) {
            self.log_row(state, self.last_rate, stepper)?;
        }
        if self.last_snapshot != Some(state.step) {
            self.save(state)?;
        }
        if let Some(log) = self.log.as_mut() {
            log.flush().map_err(io_to_flow)?;
        }
        Ok(())
    }
}

/// Runs `cfg` from its initial condition and writes its outputs.
pub fn run_config(cfg: &SimConfig) -> Result<(FlowState, RunSummary), CliError> {
    let dir = &cfg.output.directory;
    fs::create_dir_all(dir)?;
    let mut stepper = Stepper::new(cfg.scheme, cfg.params)?
        .with_bellettini_factor(cfg.bellettini_factor)
        .with_linear_solver(cfg.linear);
    let log = if cfg.output.formats.csv {
        let file = fs::File::create(dir.join("energy.csv"))?;
        Some(EnergyLogWriter::new(BufWriter::new(file))?)
    } else {
        None
    };
    let mut writer = RunWriter { cfg, log, last_logged: None, last_snapshot: None, last_rate: f64::NAN };
    let state = FlowState::new(cfg.initial_field(), cfg.scheme, 0.0);
    Ok(run(&mut stepper, state, &cfg.run_settings(), &mut writer)?)
}

/// Parses `args` (including the program name) and runs the command.
pub fn main_with_args<I, T>(args: I) -> Result<String, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| CliError::Usage(e.to_string()))?;
    let mut out = String::new();
    execute(cli, &mut out)?;
    Ok(out)
}

/// The path of the snapshot a run writes at `step`.
pub fn snapshot_path(dir: &Path, step: u64) -> PathBuf {
    dir.join(format!("snap_{step:08}.wfg"))
}
