//! Triplet assembly and the sparse direct solve.

use std::sync::Once;

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use nalgebra::DMatrix;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum LinearSolveError {
    #[error("sparse factorization failed: {0}")]
    Factorization(String),
    #[error("linear solve produced non-finite values")]
    NonFinite,
}

/// Square matrix in coordinate form; duplicate entries are summed.
#[derive(Debug, Clone, Default)]
pub struct CooMatrix {
    pub n: usize,
    pub entries: Vec<(usize, usize, f64)>,
}

impl CooMatrix {
    pub fn new(n: usize) -> Self {
        CooMatrix { n, entries: Vec::new() }
    }

    #[inline]
    pub fn push(&mut self, i: usize, j: usize, v: f64) {
        self.entries.push((i, j, v));
    }

    pub fn extend(&mut self, other: &CooMatrix) {
        debug_assert_eq!(self.n, other.n);
        self.entries.extend_from_slice(&other.entries);
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for &(i, j, v) in &self.entries {
            m[(i, j)] += v;
        }
        m
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for &(i, j, v) in &self.entries {
            y[i] += v * x[j];
        }
        y
    }
}

static SEQUENTIAL: Once = Once::new();

/// Solve `K x = b` restricted to the DOFs with `map[dof] = Some(row)`.
pub fn solve_reduced(k: &CooMatrix, map: &[Option<usize>], n_free: usize, b: &[f64]) -> Result<Vec<f64>, LinearSolveError> {
    SEQUENTIAL.call_once(|| faer::set_global_parallelism(faer::Par::Seq));
    let triplets: Vec<Triplet<usize, usize, f64>> = k
        .entries
        .iter()
        .filter_map(|&(i, j, v)| match (map[i], map[j]) {
            (Some(r), Some(c)) => Some(Triplet::new(r, c, v)),
            _ => None,
        })
        .collect();
    let a = SparseColMat::<usize, f64>::try_new_from_triplets(n_free, n_free, &triplets)
        .map_err(|e| LinearSolveError::Factorization(format!("{e:?}")))?;
    let lu = a
        .sp_lu()
        .map_err(|e| LinearSolveError::Factorization(format!("{e:?}")))?;
    let rhs = faer::Col::<f64>::from_fn(n_free, |i| b[i]);
    let x = lu.solve(&rhs);
    let out: Vec<f64> = (0..n_free).map(|i| x[i]).collect();
    if out.iter().any(|v| !v.is_finite()) {
        return Err(LinearSolveError::NonFinite);
    }
    Ok(out)
}
