//! Linear solves for the numeric engines.
//!
//! Systems are given as sparse rows. Small systems are factorized densely
//! (LU with partial pivoting); large ones, or ones the factorization cannot
//! handle, go through Gauss–Seidel.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// Largest system factorized densely.
pub const DENSE_LIMIT: usize = 1500;
pub const GAUSS_SEIDEL_TOL: f64 = 1e-10;
const GAUSS_SEIDEL_MAX_SWEEPS: usize = 1_000_000;

pub type SparseRow = Vec<(usize, f64)>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("singular system: {0}")]
    Singular(String),
    #[error("Gauss-Seidel did not converge after {sweeps} sweeps (last change {change:e})")]
    NoConvergence { sweeps: usize, change: f64 },
}

/// Solves `A x = b` where `rows[i]` holds the nonzeros of row `i`.
pub fn solve(rows: &[SparseRow], b: &[f64]) -> Result<Vec<f64>, LinalgError> {
    let n = rows.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    if n <= DENSE_LIMIT {
        if let Some(x) = solve_dense(rows, b) {
            return Ok(x);
        }
    }
    gauss_seidel(rows, b, None)
}

fn solve_dense(rows: &[SparseRow], b: &[f64]) -> Option<Vec<f64>> {
    let n = rows.len();
    let mut a = DMatrix::<f64>::zeros(n, n);
    for (i, row) in rows.iter().enumerate() {
        for &(j, v) in row {
            a[(i, j)] += v;
        }
    }
    let x = a.lu().solve(&DVector::from_column_slice(b))?;
    if x.iter().all(|v| v.is_finite()) {
        Some(x.iter().copied().collect())
    } else {
        None
    }
}

/// Gauss–Seidel sweeps until the largest update falls below the tolerance.
pub fn gauss_seidel(rows: &[SparseRow], b: &[f64], start: Option<&[f64]>) -> Result<Vec<f64>, LinalgError> {
    let n = rows.len();
    let mut diag = vec![0.0; n];
    for (i, row) in rows.iter().enumerate() {
        for &(j, v) in row {
            if j == i {
                diag[i] += v;
            }
        }
        if diag[i] == 0.0 {
            return Err(LinalgError::Singular(format!("zero diagonal in row {i}")));
        }
    }
    let mut x = start.map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; n]);
    let mut change = f64::INFINITY;
    for _ in 0..GAUSS_SEIDEL_MAX_SWEEPS {
        change = 0.0;
        for (i, row) in rows.iter().enumerate() {
            let mut acc = b[i];
            for &(j, v) in row {
                if j != i {
                    acc -= v * x[j];
                }
            }
            let new = acc / diag[i];
            let scale = new.abs().max(1.0);
            change = f64::max(change, (new - x[i]).abs() / scale);
            x[i] = new;
        }
        if !change.is_finite() {
            break;
        }
        if change < GAUSS_SEIDEL_TOL {
            return Ok(x);
        }
    }
    Err(LinalgError::NoConvergence { sweeps: GAUSS_SEIDEL_MAX_SWEEPS, change })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_and_iterative_agree() {
        // x = 0.8 + 0.05 x  =>  x = 16/19
        let rows = vec![vec![(0, 0.95)]];
        let x = solve(&rows, &[0.8]).unwrap();
        assert!((x[0] - 16.0 / 19.0).abs() < 1e-14);
        let rows = vec![vec![(0, 2.0), (1, -1.0)], vec![(0, -1.0), (1, 2.0)]];
        let d = solve(&rows, &[1.0, 1.0]).unwrap();
        let g = gauss_seidel(&rows, &[1.0, 1.0], None).unwrap();
        for k in 0..2 {
            assert!((d[k] - 1.0).abs() < 1e-12);
            assert!((g[k] - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn singular_dense_falls_back_and_reports() {
        let rows = vec![vec![(0, 1.0), (1, 1.0)], vec![(0, 1.0), (1, 1.0)]];
        assert!(solve(&rows, &[1.0, 2.0]).is_err());
        let rows = vec![vec![(1, 1.0)], vec![(0, 1.0)]];
        assert!(matches!(gauss_seidel(&rows, &[1.0, 1.0], None), Err(LinalgError::Singular(_))));
    }
}
