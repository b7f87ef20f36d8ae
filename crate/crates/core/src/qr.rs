//! Householder QR, organized in panels.
//!
//! A panel of `panel_width` columns is factored reflector by reflector, then
//! the panel's reflectors are applied in vector form to the trailing
//! columns before moving to the next panel. `Q` is accumulated explicitly in
//! reduced (`m x n`) form.

use crate::batch::{batch_apply, MatrixBatch};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::{axpy, dot, norm2, Scalar};

pub const DEFAULT_PANEL_WIDTH: usize = 16;

/// Elementary reflector `H = I - tau * v * v^T` with `v[0] = 1`.
///
/// `H x = (beta, 0, ..., 0)`; `beta` has the opposite sign of `x[0]` unless
/// `x[1..]` is already zero, in which case `tau = 0` and `beta = x[0]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Householder<T> {
    pub v: Vec<T>,
    pub tau: T,
    pub beta: T,
}

#[derive(Debug, Clone)]
pub struct QrResult<T> {
    /// `m x n`, orthonormal columns.
    pub q: Matrix<T>,
    /// `n x n`, upper triangular with exact zeros below the diagonal.
    pub r: Matrix<T>,
}

pub fn householder_vector<T: Scalar>(x: &[T]) -> Householder<T> {
    assert!(!x.is_empty(), "householder_vector of an empty vector");
    let alpha = x[0];
    let tail_norm = norm2(&x[1..]);
    let mut v = vec![T::zero(); x.len()];
    v[0] = T::one();
    if tail_norm == T::zero() {
        return Householder {
            v,
            tau: T::zero(),
            beta: alpha,
        };
    }
    let mut beta = alpha.hypot(tail_norm);
    if alpha >= T::zero() {
        beta = -beta;
    }
    let tau = (beta - alpha) / beta;
    let scale = T::one() / (alpha - beta);
    for (vi, &xi) in v[1..].iter_mut().zip(&x[1..]) {
        *vi = xi * scale;
    }
    Householder { v, tau, beta }
}

/// Applies `I - tau [1; v_tail] [1; v_tail]^T` to `target` (same length as
/// the full reflector).
#[inline]
fn apply_reflector<T: Scalar>(v_tail: &[T], tau: T, target: &mut [T]) {
    if tau == T::zero() {
        return;
    }
    let (head, tail) = target.split_first_mut().expect("non-empty target");
    let w = *head + dot(v_tail, tail);
    let tw = tau * w;
    *head -= tw;
    axpy(-tw, v_tail, tail);
}

pub fn qr<T: Scalar>(a: &Matrix<T>, panel_width: usize) -> Result<QrResult<T>> {
    let (m, n) = a.shape();
    if m < n {
        return Err(Error::Shape(format!(
            "qr needs rows >= cols, got {m}x{n}; factor the transpose instead"
        )));
    }
    if panel_width == 0 {
        return Err(Error::InvalidArgument("panel width must be >= 1".into()));
    }

    // Reflectors are stored below the diagonal of `work` (LAPACK layout).
    let mut work = a.clone();
    let mut taus = vec![T::zero(); n];

    let mut p0 = 0;
    while p0 < n {
        let p1 = (p0 + panel_width).min(n);
        for j in p0..p1 {
            let h = householder_vector(&work.col(j)[j..]);
            {
                let col = work.col_mut(j);
                col[j] = h.beta;
                col[j + 1..].copy_from_slice(&h.v[1..]);
            }
            taus[j] = h.tau;
            for c in j + 1..p1 {
                let (vj, tc) = work.col_pair_mut(j, c);
                apply_reflector(&vj[j + 1..], h.tau, &mut tc[j..]);
            }
        }
        for c in p1..n {
            for j in p0..p1 {
                let (vj, tc) = work.col_pair_mut(j, c);
                apply_reflector(&vj[j + 1..], taus[j], &mut tc[j..]);
            }
        }
        p0 = p1;
    }

    let mut q = Matrix::eye(m, n);
    for j in (0..n).rev() {
        let v_tail = &work.col(j)[j + 1..];
        for c in j..n {
            apply_reflector(v_tail, taus[j], &mut q.col_mut(c)[j..]);
        }
    }

    let mut r = Matrix::zeros(n, n);
    for j in 0..n {
        r.col_mut(j)[..=j].copy_from_slice(&work.col(j)[..=j]);
    }
    Ok(QrResult { q, r })
}

pub fn batch_qr<T: Scalar>(batch: &MatrixBatch<T>, panel_width: usize) -> Result<Vec<QrResult<T>>> {
    batch_apply(batch, |_, a| qr(a, panel_width))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::{frobenius, matmul, orthogonality_error};
    use crate::rsvd::gaussian_matrix;
    use proptest::prelude::*;

    fn residual(a: &Matrix<f64>, f: &QrResult<f64>) -> f64 {
        let qr = matmul(&f.q, &f.r).unwrap();
        let mut d = a.clone();
        d.as_mut_slice()
            .iter_mut()
            .zip(qr.as_slice())
            .for_each(|(x, y)| *x -= y);
        frobenius(&d) / frobenius(a)
    }

    #[test]
    fn reflector_of_collinear_vector() {
        let h = householder_vector(&[5.0f64, 0.0, 0.0]);
        assert_eq!(h.tau, 0.0);
        assert_eq!(h.beta.abs(), 5.0);
    }

    #[test]
    fn reflector_three_four() {
        let x = [3.0f64, 4.0];
        let h = householder_vector(&x);
        assert!((h.beta + 5.0).abs() < 1e-15);
        let mut y = x;
        apply_reflector(&h.v[1..], h.tau, &mut y);
        assert!((y[0] + 5.0).abs() < 1e-15);
        assert!(y[1].abs() < 1e-15);
    }

    #[test]
    fn reflector_of_zero_vector() {
        let h = householder_vector(&[0.0f64, 0.0]);
        assert_eq!(h.tau, 0.0);
        assert_eq!(h.beta, 0.0);
    }

    #[test]
    fn identity_factors_to_identity() {
        for pw in [1, 2, 3, 16] {
            let f = qr(&Matrix::<f64>::identity(4), pw).unwrap();
            assert_eq!(f.q, Matrix::identity(4));
            assert_eq!(f.r, Matrix::identity(4));
        }
    }

    #[test]
    fn single_column() {
        let a = Matrix::from_rows(&[&[3.0f64], &[4.0]]);
        let f = qr(&a, 16).unwrap();
        assert!((f.r[(0, 0)].abs() - 5.0).abs() < 1e-15);
        let sign = f.r[(0, 0)].signum();
        assert!((f.q[(0, 0)] * sign - 0.6).abs() < 1e-15);
        assert!((f.q[(1, 0)] * sign - 0.8).abs() < 1e-15);
    }

    #[test]
    fn random_tall_with_panels() {
        let a = gaussian_matrix::<f64>(64, 32, 7);
        for pw in [1, 5, 16, 32, 40] {
            let f = qr(&a, pw).unwrap();
            assert!(residual(&a, &f) <= 1e-14, "pw={pw}");
            assert!(orthogonality_error(&f.q) <= 1e-14, "pw={pw}");
        }
    }

    #[test]
    fn subdiagonal_is_exactly_zero() {
        let a = gaussian_matrix::<f64>(20, 12, 3);
        let f = qr(&a, 4).unwrap();
        for j in 0..12 {
            for i in j + 1..12 {
                assert_eq!(f.r[(i, j)], 0.0);
            }
        }
    }

    #[test]
    fn zero_column_is_tolerated() {
        let mut a = gaussian_matrix::<f64>(10, 4, 11);
        a.col_mut(1).iter_mut().for_each(|x| *x = 0.0);
        let f = qr(&a, 2).unwrap();
        assert!(residual(&a, &f) <= 1e-14);
        assert!(orthogonality_error(&f.q) <= 1e-14);
        assert_eq!(f.r[(1, 1)], 0.0);
    }

    #[test]
    fn wide_matrix_is_rejected() {
        let err = qr(&Matrix::<f64>::zeros(2, 3), 16).unwrap_err();
        assert!(matches!(err, Error::Shape(_)));
        assert!(qr(&Matrix::<f64>::zeros(3, 3), 0).is_err());
    }

    #[test]
    fn batch_of_identities_and_empty() {
        let batch = MatrixBatch::from_fn(3, |_| Matrix::<f64>::identity(5));
        for f in batch_qr(&batch, DEFAULT_PANEL_WIDTH).unwrap() {
            assert_eq!(f.q, Matrix::identity(5));
            assert_eq!(f.r, Matrix::identity(5));
        }
        assert!(batch_qr(&MatrixBatch::<f64>::default(), 16)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn single_precision() {
        let a = gaussian_matrix::<f32>(48, 24, 5);
        let f = qr(&a, 16).unwrap();
        assert!(orthogonality_error(&f.q) <= 1e-5);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn backward_stable(m in 1usize..40, dn in 0usize..40, pw in 1usize..20, seed in any::<u64>()) {
            let n = m.saturating_sub(dn).max(1);
            let a = gaussian_matrix::<f64>(m, n, seed);
            let f = qr(&a, pw).unwrap();
            let eps = f64::EPSILON;
            prop_assert!(residual(&a, &f) <= 100.0 * n as f64 * eps);
            prop_assert!(orthogonality_error(&f.q) <= 100.0 * n as f64 * eps);
        }
    }
}
