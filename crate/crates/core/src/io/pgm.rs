//! Binary 8-bit grayscale images of phase fields.

use std::fs;
use std::path::{Path, PathBuf};

use super::IoError;
use crate::grid::Field;

/// `P5` image bytes of a 2D field: axis 0 runs down the rows, `u` is
/// clamped to `[0, 1]` and scaled to `0..=255`.
pub fn encode_pgm(u: &Field) -> Result<Vec<u8>, IoError> {
    let g = u.grid();
    if g.ndim() != 2 {
        return Err(IoError::Format(format!("PGM images need a 2D field, got {}D", g.ndim())));
    }
    let (rows, cols) = (g.dims()[0], g.dims()[1]);
    let mut out = format!("P5\n{cols} {rows}\n255\n").into_bytes();
    out.extend(u.values().iter().map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8));
    Ok(out)
}

/// Writes a 2D field to `path`. A 3D field is written as its three
/// mid-plane slices, `<stem>_x.pgm`, `<stem>_y.pgm` and `<stem>_z.pgm`.
/// Returns the files written.
pub fn write_pgm(u: &Field, path: &Path) -> Result<Vec<PathBuf>, IoError> {
    if u.grid().ndim() == 2 {
        fs::write(path, encode_pgm(u)?)?;
        return Ok(vec![path.to_path_buf()]);
    }
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("slice");
    let mut written = Vec::new();
    for (axis, name) in ["x", "y", "z"].iter().enumerate() {
        let slice = mid_plane(u, axis)?;
        let file = path.with_file_name(format!("{stem}_{name}.pgm"));
        fs::write(&file, encode_pgm(&slice)?)?;
        written.push(file);
    }
    Ok(written)
}

/// The 2D slice of a 3D field through the middle index of `axis`.
pub fn mid_plane(u: &Field, axis: usize) -> Result<Field, IoError> {
    let g = u.grid();
    let keep: Vec<usize> = (0..3).filter(|&a| a != axis).collect();
    let dims = [g.dims()[keep[0]], g.dims()[keep[1]]];
    let extent = [(g.lo()[keep[0]], g.hi()[keep[0]]), (g.lo()[keep[1]], g.hi()[keep[1]])];
    let plane = crate::grid::Grid::new(&dims, &extent).map_err(|e| IoError::Format(e.to_string()))?;
    let mid = (g.dims()[axis] / 2) as isize;
    let mut values = Vec::with_capacity(plane.len());
    for i in 0..dims[0] as isize {
        for j in 0..dims[1] as isize {
            let mut c = [0isize; 3];
            c[axis] = mid;
            c[keep[0]] = i;
            c[keep[1]] = j;
            values.push(u.values()[g.index(&c)]);
        }
    }
    Field::from_vec(&plane, values).map_err(|e| IoError::Format(e.to_string()))
}
