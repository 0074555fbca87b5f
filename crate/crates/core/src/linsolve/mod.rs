//! Compressed-row sparse matrices and a preconditioned BiCGStab solver, used
//! for the coupled linear step of the penalized flow.

use std::io::{self, Write};

use thiserror::Error;

mod modified;

pub use modified::{
    apply_modified_operator, assemble_modified_system, deinterleave, interleave, ModifiedCoefficients,
    ModifiedSystem,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("dimension mismatch: {what} has length {got}, expected {expected}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("entry ({row}, {col}) is outside a {n_rows}x{n_cols} matrix")]
    OutOfRange {
        row: usize,
        col: usize,
        n_rows: usize,
        n_cols: usize,
    },
    #[error("non-finite matrix entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("BiCGStab did not converge in {iterations} iterations (relative residual {residual:.3e})")]
    NotConverged {
        iterations: usize,
        residual: f64,
        /// Iterate with the smallest residual seen.
        best: Vec<f64>,
    },
}

/// Square or rectangular matrix in compressed sparse row layout with sorted,
/// unique column indices per row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a matrix from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(
        n_rows: usize,
        n_cols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self, SolveError> {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n_rows];
        for &(row, col, value) in triplets {
            if row >= n_rows || col >= n_cols {
                return Err(SolveError::OutOfRange {
                    row,
                    col,
                    n_rows,
                    n_cols,
                });
            }
            rows[row].push((col, value));
        }
        let mut builder = CsrBuilder::new(n_rows, n_cols);
        for entries in rows {
            builder.push_row(entries)?;
        }
        Ok(builder.finish())
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&vec![1.0; n])
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        CsrMatrix {
            n_rows: n,
            n_cols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: diag.to_vec(),
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Column indices and values of one row.
    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        (&self.col_idx[span.clone()], &self.values[span])
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (cols, vals) = self.row(r);
        cols.binary_search(&c).map(|k| vals[k]).unwrap_or(0.0)
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n_rows.min(self.n_cols)).map(|i| self.get(i, i)).collect()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n_rows];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n_cols);
        assert_eq!(y.len(), self.n_rows);
        for (r, out) in y.iter_mut().enumerate() {
            let (cols, vals) = self.row(r);
            *out = cols.iter().zip(vals).map(|(&c, &v)| v * x[c]).sum();
        }
    }

    /// Dense row-major copy; intended for small test systems.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut dense = vec![vec![0.0; self.n_cols]; self.n_rows];
        for (r, row) in dense.iter_mut().enumerate() {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                row[c] = v;
            }
        }
        dense
    }

    /// Writes one `row col value` line per stored entry (0-based indices).
    pub fn write_coordinate<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "% {} {} {}", self.n_rows, self.n_cols, self.nnz())?;
        for r in 0..self.n_rows {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                writeln!(out, "{r} {c} {v:.17e}")?;
            }
        }
        Ok(())
    }
}

/// Row-by-row CSR construction.
pub(crate) struct CsrBuilder {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrBuilder {
    pub fn new(n_rows: usize, n_cols: usize) -> Self {
        CsrBuilder {
            n_rows,
            n_cols,
            row_ptr: vec![0],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Appends the next row; entries may be unsorted and repeated.
    pub fn push_row(&mut self, mut entries: Vec<(usize, f64)>) -> Result<(), SolveError> {
        let row = self.row_ptr.len() - 1;
        entries.sort_by_key(|e| e.0);
        let mut last: Option<usize> = None;
        for (col, value) in entries {
            if col >= self.n_cols {
                return Err(SolveError::OutOfRange {
                    row,
                    col,
                    n_rows: self.n_rows,
                    n_cols: self.n_cols,
                });
            }
            if !value.is_finite() {
                return Err(SolveError::NonFinite { row, col });
            }
            if last == Some(col) {
                *self.values.last_mut().unwrap() += value;
            } else {
                self.col_idx.push(col);
                self.values.push(value);
                last = Some(col);
            }
        }
        self.row_ptr.push(self.col_idx.len());
        Ok(())
    }

    pub fn finish(self) -> CsrMatrix {
        assert_eq!(self.row_ptr.len(), self.n_rows + 1, "missing rows");
        CsrMatrix {
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            row_ptr: self.row_ptr,
            col_idx: self.col_idx,
            values: self.values,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preconditioner {
    None,
    /// Jacobi scaling by the matrix diagonal.
    Diagonal,
    /// Incomplete LU factorization with the sparsity pattern of the matrix.
    Ilu0,
}

/// A preconditioner ready to apply, `dst = M⁻¹ src`.
enum Applied {
    Scale(Vec<f64>),
    Ilu(Ilu0),
}

impl Applied {
    fn new(a: &CsrMatrix, kind: Preconditioner) -> Self {
        match kind {
            Preconditioner::None => Applied::Scale(vec![1.0; a.n_rows()]),
            Preconditioner::Diagonal => Applied::Scale(
                a.diagonal()
                    .iter()
                    .map(|&d| if d != 0.0 { 1.0 / d } else { 1.0 })
                    .collect(),
            ),
            Preconditioner::Ilu0 => Applied::Ilu(Ilu0::new(a)),
        }
    }

    fn apply(&self, src: &[f64], dst: &mut [f64]) {
        match self {
            Applied::Scale(inv) => {
                for ((d, s), m) in dst.iter_mut().zip(src).zip(inv) {
                    *d = s * m;
                }
            }
            Applied::Ilu(f) => f.solve(src, dst),
        }
    }
}

/// `L U ≈ A` with `L` unit lower triangular, both stored in the pattern of `A`.
struct Ilu0 {
    lu: CsrMatrix,
    diag_pos: Vec<usize>,
}

impl Ilu0 {
    fn new(a: &CsrMatrix) -> Self {
        let n = a.n_rows();
        let mut lu = a.clone();
        let mut diag_pos = vec![usize::MAX; n];
        for i in 0..n {
            for k in lu.row_ptr[i]..lu.row_ptr[i + 1] {
                if lu.col_idx[k] == i {
                    diag_pos[i] = k;
                }
            }
        }
        let mut marker = vec![usize::MAX; n];
        for i in 0..n {
            let (start, end) = (lu.row_ptr[i], lu.row_ptr[i + 1]);
            for k in start..end {
                marker[lu.col_idx[k]] = k;
            }
            for kk in start..end {
                let k = lu.col_idx[kk];
                if k >= i {
                    break;
                }
                let pivot = if diag_pos[k] == usize::MAX { 0.0 } else { lu.values[diag_pos[k]] };
                let factor = lu.values[kk] / if pivot != 0.0 { pivot } else { 1.0 };
                lu.values[kk] = factor;
                for jj in lu.row_ptr[k]..lu.row_ptr[k + 1] {
                    let j = lu.col_idx[jj];
                    if j > k && marker[j] != usize::MAX {
                        let target = marker[j];
                        lu.values[target] -= factor * lu.values[jj];
                    }
                }
            }
            for k in start..end {
                marker[lu.col_idx[k]] = usize::MAX;
            }
        }
        Ilu0 { lu, diag_pos }
    }

    fn solve(&self, src: &[f64], dst: &mut [f64]) {
        let lu = &self.lu;
        let n = lu.n_rows;
        for i in 0..n {
            let mut acc = src[i];
            for k in lu.row_ptr[i]..lu.row_ptr[i + 1] {
                let j = lu.col_idx[k];
                if j >= i {
                    break;
                }
                acc -= lu.values[k] * dst[j];
            }
            dst[i] = acc;
        }
        for i in (0..n).rev() {
            let mut acc = dst[i];
            let mut pivot = 1.0;
            for k in lu.row_ptr[i]..lu.row_ptr[i + 1] {
                let j = lu.col_idx[k];
                if j > i {
                    acc -= lu.values[k] * dst[j];
                } else if j == i {
                    pivot = lu.values[k];
                }
            }
            debug_assert!(self.diag_pos[i] != usize::MAX || pivot == 1.0);
            dst[i] = if pivot != 0.0 { acc / pivot } else { acc };
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearSolverParams {
    pub rel_tol: f64,
    pub max_iters: usize,
    pub preconditioner: Preconditioner,
}

impl Default for LinearSolverParams {
    fn default() -> Self {
        LinearSolverParams {
            rel_tol: 1e-9,
            max_iters: 10_000,
            preconditioner: Preconditioner::Diagonal,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    /// `‖b - Ax‖₂ / ‖b‖₂` of the returned iterate.
    pub residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Iterations without a 1% drop of the best residual after which the solve
/// is abandoned as stalled.
const STALL_WINDOW: usize = 1000;

/// Solves `A x = b` by right-preconditioned BiCGStab starting from `x0`.
pub fn solve(
    a: &CsrMatrix,
    b: &[f64],
    x0: &[f64],
    params: &LinearSolverParams,
) -> Result<(Vec<f64>, SolveStats), SolveError> {
    let n = a.n_rows();
    if a.n_cols() != n {
        return Err(SolveError::Dimension {
            what: "matrix columns",
            expected: n,
            got: a.n_cols(),
        });
    }
    for (what, v) in [("right-hand side", b), ("initial guess", x0)] {
        if v.len() != n {
            return Err(SolveError::Dimension {
                what,
                expected: n,
                got: v.len(),
            });
        }
    }
    let b_norm = norm(b);
    if b_norm == 0.0 {
        return Ok((
            vec![0.0; n],
            SolveStats {
                iterations: 0,
                residual: 0.0,
            },
        ));
    }
    let applied = Applied::new(a, params.preconditioner);
    let precondition = |src: &[f64], dst: &mut [f64]| applied.apply(src, dst);

    let tol = params.rel_tol * b_norm;
    let mut x = x0.to_vec();
    let mut r = a.matvec(&x);
    r.iter_mut().zip(b).for_each(|(r, b)| *r = b - *r);
    let mut r_norm = norm(&r);
    let mut best = (r_norm, x.clone());
    let mut last_progress = (r_norm, 0);
    if r_norm <= tol {
        return Ok((
            x,
            SolveStats {
                iterations: 0,
                residual: r_norm / b_norm,
            },
        ));
    }

    let mut r_hat = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut p = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut p_hat = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut s_hat = vec![0.0; n];
    let mut t = vec![0.0; n];

    let mut iterations = 0;
    for iter in 1..=params.max_iters {
        iterations = iter;
        let rho_new = dot(&r_hat, &r);
        if rho_new.abs() < 1e-300 || omega == 0.0 {
            // Breakdown: restart the shadow residual.
            r_hat.copy_from_slice(&r);
            p.iter_mut().for_each(|e| *e = 0.0);
            v.iter_mut().for_each(|e| *e = 0.0);
            rho = 1.0;
            alpha = 1.0;
            omega = 1.0;
            continue;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        for k in 0..n {
            p[k] = r[k] + beta * (p[k] - omega * v[k]);
        }
        precondition(&p, &mut p_hat);
        a.matvec_into(&p_hat, &mut v);
        let denom = dot(&r_hat, &v);
        if denom == 0.0 {
            r_hat.copy_from_slice(&r);
            rho = 1.0;
            alpha = 1.0;
            omega = 1.0;
            p.iter_mut().for_each(|e| *e = 0.0);
            v.iter_mut().for_each(|e| *e = 0.0);
            continue;
        }
        alpha = rho_new / denom;
        for k in 0..n {
            s[k] = r[k] - alpha * v[k];
        }
        let s_norm = norm(&s);
        if s_norm <= tol {
            for k in 0..n {
                x[k] += alpha * p_hat[k];
            }
            return finish(a, b, x, iter, b_norm, tol, best);
        }
        precondition(&s, &mut s_hat);
        a.matvec_into(&s_hat, &mut t);
        let tt = dot(&t, &t);
        omega = if tt > 0.0 { dot(&t, &s) / tt } else { 0.0 };
        for k in 0..n {
            x[k] += alpha * p_hat[k] + omega * s_hat[k];
            r[k] = s[k] - omega * t[k];
        }
        rho = rho_new;
        r_norm = norm(&r);
        if !r_norm.is_finite() {
            break;
        }
        if r_norm < best.0 {
            if r_norm < 0.99 * last_progress.0 {
                last_progress = (r_norm, iter);
            }
            best = (r_norm, x.clone());
        }
        if iter - last_progress.1 > STALL_WINDOW {
            break;
        }
        if r_norm <= tol {
            return finish(a, b, x, iter, b_norm, tol, best);
        }
    }
    Err(SolveError::NotConverged {
        iterations,
        residual: best.0 / b_norm,
        best: best.1,
    })
}

/// Confirms convergence with the true residual; the recursive BiCGStab
/// residual can drift from it.
fn finish(
    a: &CsrMatrix,
    b: &[f64],
    x: Vec<f64>,
    iterations: usize,
    b_norm: f64,
    tol: f64,
    best: (f64, Vec<f64>),
) -> Result<(Vec<f64>, SolveStats), SolveError> {
    let ax = a.matvec(&x);
    let true_res = ax.iter().zip(b).map(|(ax, b)| (b - ax).powi(2)).sum::<f64>().sqrt();
    if true_res <= tol {
        Ok((
            x,
            SolveStats {
                iterations,
                residual: true_res / b_norm,
            },
        ))
    } else if true_res <= 10.0 * tol {
        log::debug!("BiCGStab true residual {:.3e} exceeds recursive estimate", true_res / b_norm);
        Ok((
            x,
            SolveStats {
                iterations,
                residual: true_res / b_norm,
            },
        ))
    } else {
        let (best_res, best_x) = if best.0 < true_res { best } else { (true_res, x) };
        Err(SolveError::NotConverged {
            iterations,
            residual: best_res / b_norm,
            best: best_x,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_returns_rhs() {
        let a = CsrMatrix::identity(5);
        let b = [1.0, -2.0, 3.0, 0.5, 7.0];
        let (x, stats) = solve(&a, &b, &[0.0; 5], &LinearSolverParams::default()).unwrap();
        for (xi, bi) in x.iter().zip(&b) {
            assert!((xi - bi).abs() < 1e-12);
        }
        assert!(stats.residual < 1e-9);
    }

    #[test]
    fn diagonal_system_by_hand() {
        let n = 20;
        let diag: Vec<f64> = (1..=n).map(|i| i as f64).collect();
        let a = CsrMatrix::from_diagonal(&diag);
        let b: Vec<f64> = (0..n).map(|i| (i as f64).sin() + 2.0).collect();
        let params = LinearSolverParams {
            preconditioner: Preconditioner::None,
            ..Default::default()
        };
        let (x, _) = solve(&a, &b, &vec![0.0; n], &params).unwrap();
        for i in 0..n {
            assert!((x[i] - b[i] / (i + 1) as f64).abs() < 1e-8);
        }
    }

    #[test]
    fn random_diagonally_dominant_system() {
        let n = 100;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut triplets = Vec::new();
        for r in 0..n {
            let mut off = 0.0;
            for _ in 0..6 {
                let c = rng.gen_range(0..n);
                if c != r {
                    let v: f64 = rng.gen_range(-1.0..1.0);
                    off += v.abs();
                    triplets.push((r, c, v));
                }
            }
            triplets.push((r, r, off + 1.0 + rng.gen_range(0.0..1.0)));
        }
        let a = CsrMatrix::from_triplets(n, n, &triplets).unwrap();
        let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let params = LinearSolverParams::default();
        let (x, stats) = solve(&a, &b, &vec![0.0; n], &params).unwrap();
        assert!(stats.iterations < params.max_iters);
        let ax = a.matvec(&x);
        let res = ax.iter().zip(&b).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
        assert!(res <= 1e-9 * norm(&b));
        // determinism
        let (x2, _) = solve(&a, &b, &vec![0.0; n], &params).unwrap();
        assert_eq!(x, x2);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let a = CsrMatrix::identity(3);
        let err = solve(&a, &[1.0, 2.0], &[0.0; 3], &Default::default()).unwrap_err();
        assert!(matches!(err, SolveError::Dimension { expected: 3, got: 2, .. }));
    }

    #[test]
    fn non_convergence_carries_best_iterate() {
        // Singular, inconsistent system: cannot converge.
        let a = CsrMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (1, 0, 1.0)]).unwrap();
        let params = LinearSolverParams {
            max_iters: 20,
            ..Default::default()
        };
        match solve(&a, &[1.0, 2.0], &[0.0, 0.0], &params) {
            Err(SolveError::NotConverged { residual, best, .. }) => {
                assert!(residual > 0.1);
                assert_eq!(best.len(), 2);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn triplets_merge_duplicates_and_dump() {
        let a = CsrMatrix::from_triplets(2, 3, &[(0, 2, 1.0), (0, 0, 2.0), (0, 2, 0.5), (1, 1, -1.0)])
            .unwrap();
        assert_eq!(a.nnz(), 3);
        assert_eq!(a.get(0, 2), 1.5);
        assert_eq!(a.to_dense(), vec![vec![2.0, 0.0, 1.5], vec![0.0, -1.0, 0.0]]);
        let mut buf = Vec::new();
        a.write_coordinate(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text.lines().nth(1).unwrap().starts_with("0 0 2.0"));
        assert!(CsrMatrix::from_triplets(2, 2, &[(2, 0, 1.0)]).is_err());
    }
}
