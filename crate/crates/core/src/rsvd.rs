//! Randomized truncated SVD.
//!
//! The range of `A` is sampled with a Gaussian test matrix, orthonormalized,
//! and the small projected problem is solved with the Jacobi SVD.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::batch::{batch_apply, MatrixBatch};
use crate::error::{Error, Result};
use crate::jacobi::{svd, JacobiOptions};
use crate::matrix::{multiply, Matrix, Op};
use crate::qr::{qr, DEFAULT_PANEL_WIDTH};
use crate::scalar::Scalar;

/// Matrix of i.i.d. standard normal entries, filled column by column.
///
/// Samples are drawn in double precision from a ChaCha8 stream and then
/// rounded, so `f32` and `f64` requests with the same seed agree up to
/// rounding.
pub fn gaussian_matrix<T: Scalar>(rows: usize, cols: usize, seed: u64) -> Matrix<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data: Vec<T> = (0..rows * cols)
        .map(|_| {
            let x: f64 = StandardNormal.sample(&mut rng);
            T::from_f64(x)
        })
        .collect();
    Matrix::from_col_major(rows, cols, data).expect("length matches")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RsvdOptions {
    pub k: usize,
    pub p: usize,
    pub seed: u64,
    /// Reserved for power iterations; only 0 is accepted.
    pub q_iterations: usize,
}

impl RsvdOptions {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            p: 8,
            seed: 0,
            q_iterations: 0,
        }
    }

    pub fn with_oversampling(mut self, p: usize) -> Self {
        self.p = p;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Total number of samples `k + p`.
    pub fn samples(&self) -> usize {
        self.k + self.p
    }

    fn validate(&self, m: usize, n: usize) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidArgument(
                "rsvd target rank k must be >= 1".into(),
            ));
        }
        if self.q_iterations != 0 {
            return Err(Error::InvalidArgument(
                "power iterations are not supported".into(),
            ));
        }
        if self.samples() > m.min(n) {
            return Err(Error::Shape(format!(
                "k + p = {} exceeds min({m}, {n})",
                self.samples()
            )));
        }
        Ok(())
    }
}

/// `A ~ U diag(s) V^T` with `k + p` columns in `U` and `V`.
#[derive(Debug, Clone)]
pub struct TruncatedSvd<T> {
    pub u: Matrix<T>,
    pub s: Vec<T>,
    pub v: Matrix<T>,
    /// Convergence flag of the inner Jacobi SVD.
    pub converged: bool,
}

pub fn rsvd<T: Scalar>(a: &Matrix<T>, opts: &RsvdOptions) -> Result<TruncatedSvd<T>> {
    let (m, n) = a.shape();
    opts.validate(m, n)?;
    let l = opts.samples();

    let omega = gaussian_matrix::<T>(n, l, opts.seed);
    let y = multiply(a, Op::NoTrans, &omega, Op::NoTrans)?;
    let q = qr(&y, DEFAULT_PANEL_WIDTH)?.q;
    let b = multiply(&q, Op::Trans, a, Op::NoTrans)?;
    let qb = qr(&b.transpose(), DEFAULT_PANEL_WIDTH)?;
    let inner = svd(&qb.r.transpose(), &JacobiOptions::default().with_v(true))?;

    let u = multiply(&q, Op::NoTrans, &inner.u, Op::NoTrans)?;
    let v_r = inner.v.expect("accumulated");
    let v = multiply(&qb.q, Op::NoTrans, &v_r, Op::NoTrans)?;
    Ok(TruncatedSvd {
        u,
        s: inner.sigma,
        v,
        converged: inner.converged,
    })
}

/// Entry `i` is sampled with seed `opts.seed ^ i`.
pub fn batch_rsvd<T: Scalar>(
    batch: &MatrixBatch<T>,
    opts: &RsvdOptions,
) -> Result<Vec<TruncatedSvd<T>>> {
    batch_apply(batch, |i, a| rsvd(a, &opts.with_seed(opts.seed ^ i as u64)))
}
