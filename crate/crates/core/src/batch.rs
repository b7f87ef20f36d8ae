//! Batches of independent small matrices.
//!
//! A batch is processed with [`batch_apply`]: every entry is handed to the
//! per-matrix operation on exactly one worker, so results do not depend on
//! the size of the rayon pool.

use std::ops::Index;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MatrixBatch<T> {
    entries: Vec<Matrix<T>>,
}

impl<T: Scalar> MatrixBatch<T> {
    pub fn new(entries: Vec<Matrix<T>>) -> Self {
        Self { entries }
    }

    pub fn from_fn(count: usize, f: impl FnMut(usize) -> Matrix<T>) -> Self {
        Self {
            entries: (0..count).map(f).collect(),
        }
    }

    pub fn count(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn dims(&self) -> Vec<(usize, usize)> {
        self.entries.iter().map(Matrix::shape).collect()
    }

    /// True when every entry has the same shape (vacuously true when empty).
    pub fn is_homogeneous(&self) -> bool {
        self.entries
            .windows(2)
            .all(|w| w[0].shape() == w[1].shape())
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Matrix<T>> {
        self.entries.iter()
    }

    pub fn entries(&self) -> &[Matrix<T>] {
        &self.entries
    }

    pub fn into_entries(self) -> Vec<Matrix<T>> {
        self.entries
    }
}

impl<T> Index<usize> for MatrixBatch<T> {
    type Output = Matrix<T>;

    fn index(&self, i: usize) -> &Matrix<T> {
        &self.entries[i]
    }
}

impl<T: Scalar> FromIterator<Matrix<T>> for MatrixBatch<T> {
    fn from_iter<I: IntoIterator<Item = Matrix<T>>>(iter: I) -> Self {
        Self::new(iter.into_iter().collect())
    }
}

/// Runs `op` on every entry, possibly in parallel.
///
/// The closure receives the entry index alongside the matrix. If any entry
/// fails, the error with the lowest index is returned wrapped in
/// [`Error::Batch`].
pub fn batch_apply<T, R, F>(batch: &MatrixBatch<T>, op: F) -> Result<Vec<R>>
where
    T: Scalar,
    R: Send,
    F: Fn(usize, &Matrix<T>) -> Result<R> + Sync,
{
    let results: Vec<Result<R>> = batch
        .entries
        .par_iter()
        .enumerate()
        .map(|(i, a)| op(i, a))
        .collect();
    results
        .into_iter()
        .enumerate()
        .map(|(index, r)| {
            r.map_err(|e| Error::Batch {
                index,
                source: Box::new(e),
            })
        })
        .collect()
}
