use super::OperatorPair;
use crate::error::{dim, param, Result};
use crate::scalar::Real;

/// Explicit row-major matrix with `B = Aᵀ`. Mostly useful as a test oracle.
#[derive(Debug, Clone, PartialEq)]
pub struct DensePair<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> DensePair<T> {
    pub fn new(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(dim(format!("{} entries for a {rows}x{cols} matrix", data.len())));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(param("matrix entries must be finite"));
        }
        Ok(DensePair { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != cols) {
            return Err(dim("ragged matrix rows"));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.cols + j]
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }
}

/// Wraps a matrix (given as rows) as a matched operator pair.
pub fn dense_pair<T: Real>(rows: &[Vec<T>]) -> Result<DensePair<T>> {
    DensePair::from_rows(rows)
}

impl<T: Real> OperatorPair<T> for DensePair<T> {
    fn domain_len(&self) -> usize {
        self.cols
    }

    fn range_len(&self) -> usize {
        self.rows
    }

    fn matched(&self) -> bool {
        true
    }

    fn forward_into(&self, x: &[T], y: &mut [T]) {
        assert_eq!(x.len(), self.cols);
        assert_eq!(y.len(), self.rows);
        for (yi, row) in y.iter_mut().zip(self.data.chunks_exact(self.cols.max(1))) {
            *yi = row.iter().zip(x).fold(T::zero(), |acc, (&a, &b)| acc + a * b);
        }
    }

    fn back_into(&self, y: &[T], x: &mut [T]) {
        assert_eq!(y.len(), self.rows);
        assert_eq!(x.len(), self.cols);
        x.iter_mut().for_each(|v| *v = T::zero());
        for (row, &yi) in self.data.chunks_exact(self.cols.max(1)).zip(y) {
            for (xj, &a) in x.iter_mut().zip(row) {
                *xj += a * yi;
            }
        }
    }
}
