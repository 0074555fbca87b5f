//! File formats: run configuration, `wfgrid` snapshots, energy logs and
//! grayscale images.

mod config;
mod energy_log;
mod pgm;
mod snapshot;

use thiserror::Error;

pub use config::{ConfigError, Formats, OutputConfig, SimConfig, TimeConfig};
pub use energy_log::{
    energy_csv, read_energy_csv, write_energy_csv, EnergyLogWriter, EnergyRow, ENERGY_CSV_HEADER,
};
pub use pgm::{encode_pgm, mid_plane, write_pgm};
pub use snapshot::{decode_snapshot, encode_snapshot, read_snapshot, write_snapshot, SNAPSHOT_MAGIC, SNAPSHOT_VERSION};

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("malformed file: {0}")]
    Format(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
}

#[cfg(test)]
mod tests;
