//! Direct sparse solves with an enforced residual contract.
//!
//! Factorization is delegated to the supernodal LU of `faer`. Every solve
//! measures `|b - Kx| / |b|` and applies iterative refinement until it
//! drops below [`RESIDUAL_TOLERANCE`]; a solve that cannot meet the bound is
//! reported as an error rather than returned.

use std::sync::{Arc, Mutex};

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMat, SparseRowMatRef, SymbolicSparseRowMatRef};
use faer::Mat;

use crate::error::{Error, Result};
use crate::sparse::{Pattern, SparseMatrix};

pub const RESIDUAL_TOLERANCE: f64 = 1e-12;
const MAX_REFINEMENTS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearSolveReport {
    /// `|b - Kx|_2 / |b|_2` of the returned solution (0 when `b = 0`).
    pub residual_norm: f64,
    pub refinement_steps: usize,
    pub dimension: usize,
    pub nnz: usize,
}

/// LU factorization of a sparse matrix that can serve any number of solves.
pub struct Factorization<'a> {
    matrix: &'a SparseMatrix,
    lu: Lu<usize, f64>,
}

impl<'a> Factorization<'a> {
    pub fn new(matrix: &'a SparseMatrix) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::LinearSolve(format!(
                "matrix is {}x{}, not square",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let csc = to_faer(matrix)?;
        let lu = csc
            .sp_lu()
            .map_err(|e| Error::LinearSolve(format!("LU factorization failed: {e:?}")))?;
        Ok(Factorization { matrix, lu })
    }

    /// Factorize reusing the fill-reducing ordering and elimination
    /// structure computed earlier for the same sparsity pattern.
    pub fn with_cache(matrix: &'a SparseMatrix, cache: &SymbolicCache) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Self::new(matrix);
        }
        let csc = to_faer(matrix)?;
        let symbolic = cache.get_or_analyze(matrix.pattern(), &csc)?;
        let lu = Lu::try_new_with_symbolic(symbolic, csc.as_ref())
            .map_err(|e| Error::LinearSolve(format!("LU factorization failed: {e:?}")))?;
        Ok(Factorization { matrix, lu })
    }

    fn apply_inverse(&self, b: &[f64]) -> Vec<f64> {
        let rhs = Mat::from_fn(b.len(), 1, |i, _| b[i]);
        let x = self.lu.solve(&rhs);
        (0..b.len()).map(|i| x[(i, 0)]).collect()
    }

    pub fn solve(&self, b: &[f64]) -> Result<(Vec<f64>, LinearSolveReport)> {
        let n = self.matrix.nrows();
        if b.len() != n {
            return Err(Error::LengthMismatch {
                what: "right-hand side",
                got: b.len(),
                expected: n,
            });
        }
        let bnorm = norm(b);
        let mut report = LinearSolveReport {
            residual_norm: 0.0,
            refinement_steps: 0,
            dimension: n,
            nnz: self.matrix.nnz(),
        };
        if bnorm == 0.0 {
            return Ok((vec![0.0; n], report));
        }
        let mut x = self.apply_inverse(b);
        if let Some(i) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::LinearSolve(format!(
                "numerically singular matrix: non-finite solution at row {i}"
            )));
        }
        let mut r = residual(self.matrix, &x, b);
        report.residual_norm = norm(&r) / bnorm;
        while report.residual_norm > RESIDUAL_TOLERANCE && report.refinement_steps < MAX_REFINEMENTS {
            let dx = self.apply_inverse(&r);
            for (xi, di) in x.iter_mut().zip(&dx) {
                *xi += di;
            }
            r = residual(self.matrix, &x, b);
            report.residual_norm = norm(&r) / bnorm;
            report.refinement_steps += 1;
        }
        if !(report.residual_norm <= RESIDUAL_TOLERANCE) {
            return Err(Error::ResidualNotAccepted {
                residual: report.residual_norm,
                tolerance: RESIDUAL_TOLERANCE,
            });
        }
        Ok((x, report))
    }
}

/// Symbolic LU analyses keyed by sparsity pattern.
///
/// Assembled operators on one mesh share a handful of pattern instances, so
/// a short list compared by pointer is enough.
#[derive(Default)]
pub struct SymbolicCache {
    entries: Mutex<Vec<(Arc<Pattern>, SymbolicLu<usize>)>>,
}

impl SymbolicCache {
    pub fn new() -> Self {
        Self::default()
    }

    fn get_or_analyze(
        &self,
        pattern: &Arc<Pattern>,
        csc: &SparseColMat<usize, f64>,
    ) -> Result<SymbolicLu<usize>> {
        let mut entries = self.entries.lock().unwrap_or_else(|e| e.into_inner());
        if let Some((_, s)) = entries.iter().find(|(p, _)| Arc::ptr_eq(p, pattern)) {
            return Ok(s.clone());
        }
        let symbolic = SymbolicLu::try_new(csc.symbolic())
            .map_err(|e| Error::LinearSolve(format!("symbolic LU analysis failed: {e:?}")))?;
        entries.push((pattern.clone(), symbolic.clone()));
        Ok(symbolic)
    }
}

/// Solve `K x = b`.
pub fn solve(k: &SparseMatrix, b: &[f64]) -> Result<(Vec<f64>, LinearSolveReport)> {
    Factorization::new(k)?.solve(b)
}

/// Solve `K x = b`, reusing cached symbolic analyses.
pub fn solve_cached(
    k: &SparseMatrix,
    b: &[f64],
    cache: &SymbolicCache,
) -> Result<(Vec<f64>, LinearSolveReport)> {
    Factorization::with_cache(k, cache)?.solve(b)
}

/// Solve `K x = b` for several right-hand sides with one factorization.
pub fn solve_multi<B: AsRef<[f64]>>(
    k: &SparseMatrix,
    rhs: &[B],
) -> Result<Vec<(Vec<f64>, LinearSolveReport)>> {
    let f = Factorization::new(k)?;
    rhs.iter().map(|b| f.solve(b.as_ref())).collect()
}

fn to_faer(m: &SparseMatrix) -> Result<SparseColMat<usize, f64>> {
    let p = m.pattern();
    let symbolic = SymbolicSparseRowMatRef::new_checked(m.nrows(), m.ncols(), p.row_ptr(), None, p.col_idx());
    SparseRowMatRef::new(symbolic, m.values())
        .to_col_major()
        .map_err(|e| Error::LinearSolve(format!("matrix conversion failed: {e:?}")))
}

fn residual(k: &SparseMatrix, x: &[f64], b: &[f64]) -> Vec<f64> {
    let mut r = k.matvec(x);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    r
}

/// Euclidean norm.
pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
