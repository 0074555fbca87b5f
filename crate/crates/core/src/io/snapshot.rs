//! The `wfgrid v1` snapshot format: ASCII header lines, a blank line, then
//! the field as row-major little-endian `f64`.
//!
//! ```text
//! wfgrid v1
//! ndim 2
//! dims 256 256
//! extent -1 1 -1 1
//! time 0.001
//!
//! <payload>
//! ```

use std::fs;
use std::io::{BufRead, Read, Write};
use std::path::Path;

use super::IoError;
use crate::grid::{Field, Grid};

pub const SNAPSHOT_MAGIC: &str = "wfgrid";
pub const SNAPSHOT_VERSION: u32 = 1;

fn format_err(msg: impl Into<String>) -> IoError {
    IoError::Format(msg.into())
}

pub fn encode_snapshot(u: &Field, t: f64) -> Vec<u8> {
    let g = u.grid();
    let join = |v: Vec<String>| v.join(" ");
    let mut out = Vec::with_capacity(128 + 8 * u.len());
    let extent: Vec<String> = (0..g.ndim())
        .flat_map(|a| [format!("{:?}", g.lo()[a]), format!("{:?}", g.hi()[a])])
        .collect();
    // `{:?}` prints the shortest representation that parses back exactly
    let header = format!(
        "{SNAPSHOT_MAGIC} v{SNAPSHOT_VERSION}\nndim {}\ndims {}\nextent {}\ntime {:?}\n\n",
        g.ndim(),
        join(g.dims().iter().map(|d| d.to_string()).collect()),
        join(extent),
        t
    );
    out.extend_from_slice(header.as_bytes());
    for v in u.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_snapshot(bytes: &[u8]) -> Result<(Field, f64), IoError> {
    let mut reader = bytes;
    let mut lines = Vec::new();
    loop {
        let mut line = String::new();
        let n = reader
            .read_line(&mut line)
            .map_err(|_| format_err("header is not valid UTF-8"))?;
        if n == 0 {
            return Err(format_err("truncated header"));
        }
        let line = line.trim_end_matches('\n').to_string();
        if line.is_empty() {
            break;
        }
        lines.push(line);
        if lines.len() > 16 {
            return Err(format_err("header has no terminating blank line"));
        }
    }
    let magic = lines.first().ok_or_else(|| format_err("empty header"))?;
    let version = magic
        .strip_prefix(SNAPSHOT_MAGIC)
        .and_then(|rest| rest.trim().strip_prefix('v'))
        .ok_or_else(|| format_err(format!("bad magic '{magic}'")))?;
    if version != SNAPSHOT_VERSION.to_string() {
        return Err(format_err(format!("unsupported snapshot version '{version}'")));
    }
    let field = |key: &str| -> Result<Vec<&str>, IoError> {
        lines[1..]
            .iter()
            .find_map(|l| {
                let mut w = l.split_whitespace();
                (w.next() == Some(key)).then(|| w.collect())
            })
            .ok_or_else(|| format_err(format!("header lacks '{key}'")))
    };
    let number = |w: &str| w.parse::<f64>().map_err(|_| format_err(format!("bad number '{w}'")));
    let ndim: usize = field("ndim")?
        .first()
        .and_then(|w| w.parse().ok())
        .ok_or_else(|| format_err("bad ndim"))?;
    let dims = field("dims")?
        .iter()
        .map(|w| w.parse::<usize>().map_err(|_| format_err(format!("bad dimension '{w}'"))))
        .collect::<Result<Vec<_>, _>>()?;
    let ext = field("extent")?.iter().map(|w| number(w)).collect::<Result<Vec<_>, _>>()?;
    let time = number(field("time")?.first().ok_or_else(|| format_err("bad time"))?)?;
    if dims.len() != ndim || ext.len() != 2 * ndim {
        return Err(format_err("dims and extent disagree with ndim"));
    }
    let extent: Vec<(f64, f64)> = ext.chunks(2).map(|c| (c[0], c[1])).collect();
    let grid = Grid::new(&dims, &extent).map_err(|e| format_err(e.to_string()))?;

    let expected = 8 * grid.len();
    if reader.len() != expected {
        return Err(format_err(format!(
            "payload has {} bytes, expected {expected}",
            reader.len()
        )));
    }
    let mut values = Vec::with_capacity(grid.len());
    let mut buf = [0u8; 8];
    while reader.read_exact(&mut buf).is_ok() {
        values.push(f64::from_le_bytes(buf));
    }
    let u = Field::from_vec(&grid, values).map_err(|e| format_err(e.to_string()))?;
    Ok((u, time))
}

pub fn write_snapshot(u: &Field, t: f64, path: &Path) -> Result<(), IoError> {
    let mut f = fs::File::create(path)?;
    f.write_all(&encode_snapshot(u, t))?;
    Ok(())
}

pub fn read_snapshot(path: &Path) -> Result<(Field, f64), IoError> {
    decode_snapshot(&fs::read(path)?)
}
