//! Test matrices with a prescribed singular spectrum.
//!
//! `A = P diag(sigma) Q^T` with random orthonormal `P` and `Q`, assembled in
//! double precision. The spectrum used is returned next to the matrix so
//! tests can compare against it without a second SVD.

use crate::error::{Error, Result};
use crate::matrix::{multiply, Matrix, Op};
use crate::qr::{qr, DEFAULT_PANEL_WIDTH};
use crate::rsvd::gaussian_matrix;
use crate::scalar::Scalar;

/// Seed offset for the right orthonormal factor.
const RIGHT_SEED_MIX: u64 = 0x9E37_79B9_7F4A_7C15;

#[derive(Debug, Clone, PartialEq)]
pub enum SpectrumMode {
    /// `sigma_i = cond^(-i / (rank - 1))`
    Geometric,
    /// Evenly spaced from 1 down to `1 / cond`.
    Arithmetic,
    /// Values used verbatim; `cond` and `rank` are ignored.
    Explicit(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumSpec {
    pub n: usize,
    pub mode: SpectrumMode,
    pub cond: f64,
    /// Number of nonzero values; the remaining `n - rank` are exactly 0.
    pub rank: usize,
}

impl SpectrumSpec {
    pub fn geometric(n: usize, cond: f64) -> Self {
        Self {
            n,
            mode: SpectrumMode::Geometric,
            cond,
            rank: n,
        }
    }

    pub fn arithmetic(n: usize, cond: f64) -> Self {
        Self {
            mode: SpectrumMode::Arithmetic,
            ..Self::geometric(n, cond)
        }
    }

    pub fn explicit(values: Vec<f64>) -> Self {
        Self {
            n: values.len(),
            rank: values.len(),
            cond: 1.0,
            mode: SpectrumMode::Explicit(values),
        }
    }

    pub fn with_rank(mut self, rank: usize) -> Self {
        self.rank = rank;
        self
    }

    pub fn sigma(&self) -> Result<Vec<f64>> {
        if let SpectrumMode::Explicit(values) = &self.mode {
            if values.len() != self.n {
                return Err(Error::InvalidArgument(format!(
                    "explicit spectrum has {} values for n = {}",
                    values.len(),
                    self.n
                )));
            }
            if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(Error::InvalidArgument(
                    "explicit spectrum must be finite and non-negative".into(),
                ));
            }
            if values.windows(2).any(|w| w[0] < w[1]) {
                return Err(Error::InvalidArgument(
                    "explicit spectrum must be descending".into(),
                ));
            }
            return Ok(values.clone());
        }
        if !(self.cond >= 1.0 && self.cond.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "condition number must be finite and >= 1, got {}",
                self.cond
            )));
        }
        if self.rank == 0 || self.rank > self.n {
            return Err(Error::InvalidArgument(format!(
                "rank must be in 1..={}, got {}",
                self.n, self.rank
            )));
        }
        let r = self.rank;
        let mut sigma = vec![0.0; self.n];
        for (i, s) in sigma.iter_mut().take(r).enumerate() {
            *s = if r == 1 {
                1.0
            } else {
                let t = i as f64 / (r - 1) as f64;
                match self.mode {
                    SpectrumMode::Geometric => self.cond.powf(-t),
                    SpectrumMode::Arithmetic => 1.0 - t * (1.0 - 1.0 / self.cond),
                    SpectrumMode::Explicit(_) => unreachable!(),
                }
            };
        }
        // Pin the end point exactly; powf may be off in the last bit.
        if r > 1 {
            sigma[r - 1] = 1.0 / self.cond;
        }
        Ok(sigma)
    }
}

/// `m x n` matrix with orthonormal columns, the `Q` factor of a Gaussian
/// matrix with signs fixed so that `R` has a positive diagonal.
pub fn random_orthonormal<T: Scalar>(m: usize, n: usize, seed: u64) -> Result<Matrix<T>> {
    if m < n {
        return Err(Error::Shape(format!(
            "orthonormal columns need rows >= cols, got {m}x{n}"
        )));
    }
    let f = qr(&gaussian_matrix::<T>(m, n, seed), DEFAULT_PANEL_WIDTH)?;
    let mut q = f.q;
    for j in 0..n {
        if f.r[(j, j)] < T::zero() {
            q.col_mut(j).iter_mut().for_each(|x| *x = -*x);
        }
    }
    Ok(q)
}

/// Returns `(A, sigma)` where `sigma` is the exact spectrum `A` was built
/// from (before rounding to `T`).
pub fn make_matrix<T: Scalar>(
    m: usize,
    spec: &SpectrumSpec,
    seed: u64,
) -> Result<(Matrix<T>, Vec<f64>)> {
    let n = spec.n;
    if m < n {
        return Err(Error::Shape(format!(
            "make_matrix needs m >= n, got {m} < {n}"
        )));
    }
    let sigma = spec.sigma()?;
    let mut p = random_orthonormal::<f64>(m, n, seed)?;
    let q = random_orthonormal::<f64>(n, n, seed ^ RIGHT_SEED_MIX)?;
    for (j, &s) in sigma.iter().enumerate() {
        p.col_mut(j).iter_mut().for_each(|x| *x *= s);
    }
    let a = multiply(&p, Op::NoTrans, &q, Op::Trans)?;
    Ok((a.cast(), sigma))
}
