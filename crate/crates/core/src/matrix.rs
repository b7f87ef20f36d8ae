//! Dense column-major matrices and the Level-3 kernels built on them.
//!
//! Element `(i, j)` of an `r x c` matrix lives at `data[j * r + i]`, so a
//! column is a contiguous slice. The Jacobi and Householder kernels work
//! column by column and rely on this layout.
//!
//! The text format used by the CLI is a `rows cols` header line followed by
//! one line per matrix row with whitespace-separated values.

use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::ops::{Index, IndexMut, Range};

use crate::error::{Error, Result};
use crate::scalar::{axpy, dot, Scalar};

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

/// Transposition flag for [`gemm`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Op {
    NoTrans,
    Trans,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::eye(n, n)
    }

    /// `rows x cols` matrix with ones on the main diagonal.
    pub fn eye(rows: usize, cols: usize) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows.min(cols) {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_col_major(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::mismatch(
                "from_col_major",
                format!("{} values for a {rows}x{cols} matrix", data.len()),
            ));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from row-major values (the natural order for literals).
    pub fn from_row_major(rows: usize, cols: usize, values: &[T]) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::mismatch(
                "from_row_major",
                format!("{} values for a {rows}x{cols} matrix", values.len()),
            ));
        }
        Ok(Self::from_fn(rows, cols, |i, j| values[i * cols + j]))
    }

    /// Convenience constructor from nested rows; panics on ragged input.
    pub fn from_rows(rows: &[&[T]]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        Self::from_fn(r, c, |i, j| rows[i][j])
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for j in 0..cols {
            for i in 0..rows {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn diag(values: &[T]) -> Self {
        let n = values.len();
        let mut m = Self::zeros(n, n);
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn col(&self, j: usize) -> &[T] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    #[inline]
    pub fn col_mut(&mut self, j: usize) -> &mut [T] {
        let r = self.rows;
        &mut self.data[j * r..(j + 1) * r]
    }

    /// Mutable access to two distinct columns at once.
    pub fn col_pair_mut(&mut self, p: usize, q: usize) -> (&mut [T], &mut [T]) {
        assert!(p != q, "column pair must be distinct");
        let r = self.rows;
        if p < q {
            let (lo, hi) = self.data.split_at_mut(q * r);
            (&mut lo[p * r..(p + 1) * r], &mut hi[..r])
        } else {
            let (lo, hi) = self.data.split_at_mut(p * r);
            let (qcol, pcol) = (&mut lo[q * r..(q + 1) * r], &mut hi[..r]);
            (pcol, qcol)
        }
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    /// Copy of the columns in `range`.
    pub fn columns(&self, range: Range<usize>) -> Self {
        assert!(range.end <= self.cols);
        let r = self.rows;
        Self {
            rows: r,
            cols: range.len(),
            data: self.data[range.start * r..range.end * r].to_vec(),
        }
    }

    /// Copy of the rows in `range`.
    pub fn row_block(&self, range: Range<usize>) -> Self {
        assert!(range.end <= self.rows);
        let start = range.start;
        Self::from_fn(range.len(), self.cols, |i, j| self[(start + i, j)])
    }

    /// Copy of the columns listed in `idx`, in that order.
    pub fn select_columns(&self, idx: &[usize]) -> Self {
        let mut out = Self::zeros(self.rows, idx.len());
        for (k, &j) in idx.iter().enumerate() {
            out.col_mut(k).copy_from_slice(self.col(j));
        }
        out
    }

    /// Overwrites columns `start..start + src.cols()` with `src`.
    pub fn set_columns(&mut self, start: usize, src: &Matrix<T>) {
        assert_eq!(self.rows, src.rows);
        assert!(start + src.cols <= self.cols);
        let r = self.rows;
        self.data[start * r..(start + src.cols) * r].copy_from_slice(&src.data);
    }

    /// Vertical concatenation.
    pub fn vstack(blocks: &[&Matrix<T>]) -> Result<Self> {
        let cols = blocks.first().map_or(0, |b| b.cols);
        if blocks.iter().any(|b| b.cols != cols) {
            return Err(Error::mismatch("vstack", "blocks differ in column count"));
        }
        let rows = blocks.iter().map(|b| b.rows).sum();
        let mut out = Self::zeros(rows, cols);
        for j in 0..cols {
            let mut off = 0;
            let dst = out.col_mut(j);
            for b in blocks {
                dst[off..off + b.rows].copy_from_slice(b.col(j));
                off += b.rows;
            }
        }
        Ok(out)
    }

    pub fn scale(&mut self, alpha: T) {
        for x in &mut self.data {
            *x *= alpha;
        }
    }

    pub fn frobenius(&self) -> T {
        frobenius(self)
    }

    pub fn cast<U: Scalar>(&self) -> Matrix<U> {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| U::from_f64(x.to_f64())).collect(),
        }
    }

    /// `y = A x`
    pub fn matvec(&self, x: &[T]) -> Result<Vec<T>> {
        if x.len() != self.cols {
            return Err(Error::mismatch(
                "matvec",
                format!(
                    "{}x{} matrix with vector of length {}",
                    self.rows,
                    self.cols,
                    x.len()
                ),
            ));
        }
        let mut y = vec![T::zero(); self.rows];
        for (j, &xj) in x.iter().enumerate() {
            if xj != T::zero() {
                axpy(xj, self.col(j), &mut y);
            }
        }
        Ok(y)
    }

    /// `y = A^T x`
    pub fn matvec_t(&self, x: &[T]) -> Result<Vec<T>> {
        if x.len() != self.rows {
            return Err(Error::mismatch(
                "matvec_t",
                format!(
                    "{}x{} matrix with vector of length {}",
                    self.rows,
                    self.cols,
                    x.len()
                ),
            ));
        }
        Ok((0..self.cols).map(|j| dot(self.col(j), x)).collect())
    }

    pub fn max_abs_diff(&self, other: &Matrix<T>) -> T {
        assert_eq!(self.shape(), other.shape());
        self.data
            .iter()
            .zip(&other.data)
            .fold(T::zero(), |m, (a, b)| m.max((*a - *b).abs()))
    }

    /// Writes the `rows cols` header followed by row-major values.
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{} {}", self.rows, self.cols)?;
        let mut line = String::new();
        for i in 0..self.rows {
            line.clear();
            for j in 0..self.cols {
                if j > 0 {
                    line.push(' ');
                }
                let _ = write!(line, "{}", self[(i, j)]);
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(r: R) -> Result<Self> {
        let mut tokens = Vec::new();
        for line in r.lines() {
            let line = line?;
            tokens.extend(line.split_whitespace().map(str::to_owned));
        }
        let mut it = tokens.into_iter();
        let mut header = |what: &str| -> Result<usize> {
            it.next()
                .ok_or_else(|| Error::Parse(format!("missing {what} in header")))?
                .parse::<usize>()
                .map_err(|e| Error::Parse(format!("bad {what}: {e}")))
        };
        let rows = header("rows")?;
        let cols = header("cols")?;
        let values = it
            .map(|t| {
                t.parse::<f64>()
                    .map(T::from_f64)
                    .map_err(|e| Error::Parse(format!("bad value {t:?}: {e}")))
            })
            .collect::<Result<Vec<T>>>()?;
        if values.len() != rows * cols {
            return Err(Error::Parse(format!(
                "expected {} values, found {}",
                rows * cols,
                values.len()
            )));
        }
        Self::from_row_major(rows, cols, &values)
    }
}

impl<T> Index<(usize, usize)> for Matrix<T> {
    type Output = T;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[j * self.rows + i]
    }
}

impl<T> IndexMut<(usize, usize)> for Matrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[j * self.rows + i]
    }
}

fn op_shape<T: Scalar>(m: &Matrix<T>, op: Op) -> (usize, usize) {
    match op {
        Op::NoTrans => (m.rows, m.cols),
        Op::Trans => (m.cols, m.rows),
    }
}

/// `C <- alpha * op(A) * op(B) + beta * C`.
///
/// When `beta` is zero `C` is overwritten without being read.
pub fn gemm<T: Scalar>(
    alpha: T,
    a: &Matrix<T>,
    op_a: Op,
    b: &Matrix<T>,
    op_b: Op,
    beta: T,
    c: &mut Matrix<T>,
) -> Result<()> {
    let (m, ka) = op_shape(a, op_a);
    let (kb, n) = op_shape(b, op_b);
    if ka != kb || c.rows != m || c.cols != n {
        return Err(Error::mismatch(
            "gemm",
            format!(
                "op(A) is {m}x{ka}, op(B) is {kb}x{n}, C is {}x{}",
                c.rows, c.cols
            ),
        ));
    }
    let bt;
    let b = match op_b {
        Op::NoTrans => b,
        Op::Trans => {
            bt = b.transpose();
            &bt
        }
    };
    let mut tmp = vec![T::zero(); m];
    for j in 0..n {
        let bj = b.col(j);
        tmp.iter_mut().for_each(|t| *t = T::zero());
        match op_a {
            Op::NoTrans => {
                for (k, &bkj) in bj.iter().enumerate() {
                    if bkj != T::zero() {
                        axpy(bkj, a.col(k), &mut tmp);
                    }
                }
            }
            Op::Trans => {
                for (i, t) in tmp.iter_mut().enumerate() {
                    *t = dot(a.col(i), bj);
                }
            }
        }
        let cj = c.col_mut(j);
        if beta == T::zero() {
            for (ci, &t) in cj.iter_mut().zip(&tmp) {
                *ci = alpha * t;
            }
        } else {
            for (ci, &t) in cj.iter_mut().zip(&tmp) {
                *ci = alpha * t + beta * *ci;
            }
        }
    }
    Ok(())
}

/// `op(A) * op(B)` into a fresh matrix.
pub fn multiply<T: Scalar>(a: &Matrix<T>, op_a: Op, b: &Matrix<T>, op_b: Op) -> Result<Matrix<T>> {
    let (m, _) = op_shape(a, op_a);
    let (_, n) = op_shape(b, op_b);
    let mut c = Matrix::zeros(m, n);
    gemm(T::one(), a, op_a, b, op_b, T::zero(), &mut c)?;
    Ok(c)
}

/// `A * B`
pub fn matmul<T: Scalar>(a: &Matrix<T>, b: &Matrix<T>) -> Result<Matrix<T>> {
    multiply(a, Op::NoTrans, b, Op::NoTrans)
}

/// Gram matrix `A^T A`. The upper triangle is computed and mirrored, so the
/// result is exactly symmetric.
pub fn syrk<T: Scalar>(a: &Matrix<T>) -> Matrix<T> {
    let n = a.cols;
    let mut g = Matrix::zeros(n, n);
    for j in 0..n {
        for i in 0..=j {
            let v = dot(a.col(i), a.col(j));
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    g
}

pub fn frobenius<T: Scalar>(a: &Matrix<T>) -> T {
    // Scaled accumulation keeps huge/tiny entries from over/underflowing.
    let amax = a.data.iter().fold(T::zero(), |m, x| m.max(x.abs()));
    if amax == T::zero() || !amax.is_finite() {
        return amax;
    }
    let s: T = a.data.iter().map(|&x| (x / amax) * (x / amax)).sum();
    amax * s.sqrt()
}

/// `||A^T A - I||_F` for a matrix with (supposedly) orthonormal columns.
pub fn orthogonality_error<T: Scalar>(q: &Matrix<T>) -> T {
    let mut g = syrk(q);
    for i in 0..g.cols {
        g[(i, i)] -= T::one();
    }
    frobenius(&g)
}

/// `||A - U diag(s) V^T||_F / ||A||_F`.
pub fn reconstruction_error<T: Scalar>(
    a: &Matrix<T>,
    u: &Matrix<T>,
    s: &[T],
    v: &Matrix<T>,
) -> Result<T> {
    let mut us = u.clone();
    for (j, &sj) in s.iter().enumerate() {
        us.col_mut(j).iter_mut().for_each(|x| *x *= sj);
    }
    let mut r = a.clone();
    gemm(-T::one(), &us, Op::NoTrans, v, Op::Trans, T::one(), &mut r)?;
    let na = frobenius(a);
    let nr = frobenius(&r);
    Ok(if na == T::zero() { nr } else { nr / na })
}
