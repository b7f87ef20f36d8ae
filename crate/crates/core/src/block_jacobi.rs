//! One-sided block Jacobi SVD.
//!
//! Columns are grouped into blocks of `k`; each sweep visits every pair of
//! blocks in round-robin order and orthogonalizes the `m x 2k` pair either
//! through its Gram matrix or through a QR factorization followed by the SVD
//! of the triangular factor.
//!
//! Input is padded with zero columns to a multiple of `2k` (and with zero
//! rows when `m < 2k`); the padding is stripped from the result.

use rayon::prelude::*;

use crate::batch::MatrixBatch;
use crate::error::{Error, Result};
use crate::jacobi::{extract_svd, orthogonalize, round_robin_schedule, JacobiOptions, SvdResult};
use crate::matrix::{multiply, syrk, Matrix, Op};
use crate::qr::{qr, DEFAULT_PANEL_WIDTH};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BlockMethod {
    Gram,
    #[default]
    Direct,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockJacobiOptions<T> {
    pub block_width: usize,
    pub method: BlockMethod,
    /// Convergence threshold on the largest per-pair estimate of a sweep.
    pub tolerance: T,
    pub max_sweeps: usize,
    pub accumulate_v: bool,
}

impl<T: Scalar> Default for BlockJacobiOptions<T> {
    fn default() -> Self {
        Self {
            block_width: 32,
            method: BlockMethod::Direct,
            tolerance: T::block_tolerance(),
            max_sweeps: 30,
            accumulate_v: false,
        }
    }
}

impl<T: Scalar> BlockJacobiOptions<T> {
    pub fn with_method(mut self, method: BlockMethod) -> Self {
        self.method = method;
        self
    }

    pub fn with_block_width(mut self, k: usize) -> Self {
        self.block_width = k;
        self
    }

    pub fn with_v(mut self, accumulate_v: bool) -> Self {
        self.accumulate_v = accumulate_v;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.block_width == 0 {
            return Err(Error::InvalidArgument("block width must be >= 1".into()));
        }
        if !(self.tolerance > T::zero()) {
            return Err(Error::InvalidArgument("tolerance must be positive".into()));
        }
        if self.max_sweeps == 0 {
            return Err(Error::InvalidArgument("max_sweeps must be >= 1".into()));
        }
        Ok(())
    }
}

/// Largest off-diagonal entry scaled by its diagonal,
/// `max_{i != j} |G_ij| / sqrt(|G_ii G_jj|)`.
///
/// An off-diagonal zero over a zero diagonal counts as 0; a nonzero one
/// counts as infinity.
pub fn scaled_offdiag<T: Scalar>(g: &Matrix<T>) -> Result<T> {
    if !g.is_square() {
        return Err(Error::Shape(format!(
            "scaled_offdiag needs a square matrix, got {}x{}",
            g.rows(),
            g.cols()
        )));
    }
    let n = g.rows();
    let d: Vec<T> = (0..n).map(|i| g[(i, i)].abs().sqrt()).collect();
    let mut worst = T::zero();
    for j in 0..n {
        for i in 0..n {
            if i == j {
                continue;
            }
            let x = g[(i, j)].abs();
            if x == T::zero() {
                continue;
            }
            let scale = d[i] * d[j];
            if scale == T::zero() {
                return Ok(T::infinity());
            }
            worst = worst.max(x / scale);
        }
    }
    Ok(worst)
}

/// Block SVD together with the per-sweep convergence estimates.
#[derive(Debug, Clone)]
pub struct BlockSvd<T> {
    pub svd: SvdResult<T>,
    /// `e = max_l e_l` for every sweep performed.
    pub sweep_errors: Vec<T>,
}

/// Iteration state of one matrix; exposed so batches can advance entries
/// sweep by sweep.
#[derive(Debug, Clone)]
pub struct BlockJacobiState<T> {
    opts: BlockJacobiOptions<T>,
    m: usize,
    n: usize,
    k: usize,
    work: Matrix<T>,
    v: Option<Matrix<T>>,
    pairs: Vec<(usize, usize)>,
    sweep_errors: Vec<T>,
    rotations: usize,
    converged: bool,
}

impl<T: Scalar> BlockJacobiState<T> {
    pub fn new(a: &Matrix<T>, opts: &BlockJacobiOptions<T>) -> Result<Self> {
        opts.validate()?;
        let (m, n) = a.shape();
        if m < n {
            return Err(Error::Shape(format!(
                "block Jacobi SVD needs rows >= cols, got {m}x{n}"
            )));
        }
        // A block wider than half the matrix only adds padding.
        let k = opts.block_width.min(n.div_ceil(2)).max(1);
        let npad = n.div_ceil(2 * k).max(1) * 2 * k;
        let mpad = m.max(2 * k);
        let mut work = Matrix::zeros(mpad, npad);
        for j in 0..n {
            work.col_mut(j)[..m].copy_from_slice(a.col(j));
        }
        let blocks = npad / k;
        let pairs = round_robin_schedule(blocks)?.pairs().collect();
        Ok(Self {
            opts: *opts,
            m,
            n,
            k,
            work,
            v: opts.accumulate_v.then(|| Matrix::identity(npad)),
            pairs,
            sweep_errors: Vec::new(),
            rotations: 0,
            converged: false,
        })
    }

    pub fn is_converged(&self) -> bool {
        self.converged
    }

    /// True once the state has converged or used up its sweeps.
    pub fn is_done(&self) -> bool {
        self.converged || self.sweep_errors.len() >= self.opts.max_sweeps
    }

    pub fn sweep_errors(&self) -> &[T] {
        &self.sweep_errors
    }

    /// Effective block width after clamping to the matrix size.
    pub fn block_width(&self) -> usize {
        self.k
    }

    /// Current (padded) working matrix.
    pub fn work(&self) -> &Matrix<T> {
        &self.work
    }

    /// Runs one sweep over all block pairs and returns its estimate `e`.
    pub fn sweep(&mut self) -> Result<T> {
        let mut e = T::zero();
        for idx in 0..self.pairs.len() {
            let (bi, bj) = self.pairs[idx];
            let el = self.update_pair(bi, bj)?;
            e = e.max(el);
        }
        self.sweep_errors.push(e);
        if e < self.opts.tolerance {
            self.converged = true;
        }
        Ok(e)
    }

    fn pair_columns(&self, bi: usize, bj: usize) -> [usize; 2] {
        [bi * self.k, bj * self.k]
    }

    fn gather(&self, src: &Matrix<T>, bi: usize, bj: usize) -> Matrix<T> {
        let k = self.k;
        let mut out = Matrix::zeros(src.rows(), 2 * k);
        for (slot, start) in self.pair_columns(bi, bj).into_iter().enumerate() {
            for c in 0..k {
                out.col_mut(slot * k + c)
                    .copy_from_slice(src.col(start + c));
            }
        }
        out
    }

    fn scatter(k: usize, starts: [usize; 2], dst: &mut Matrix<T>, src: &Matrix<T>) {
        for (slot, start) in starts.into_iter().enumerate() {
            for c in 0..k {
                dst.col_mut(start + c)
                    .copy_from_slice(src.col(slot * k + c));
            }
        }
    }

    /// Orthogonalizes one block pair unless it already meets the tolerance;
    /// returns the pair estimate `e_l`.
    fn update_pair(&mut self, bi: usize, bj: usize) -> Result<T> {
        let aij = self.gather(&self.work, bi, bj);
        let inner = JacobiOptions::<T>::default().with_v(true);
        let two_k = 2 * self.k;
        let (new_a, rot, el) = match self.opts.method {
            BlockMethod::Gram => {
                let g = syrk(&aij);
                let el = scaled_offdiag(&g)?;
                if el < self.opts.tolerance {
                    return Ok(el);
                }
                // G is symmetric positive semidefinite, so its accumulated
                // right rotations are its eigenvectors.
                let mut w = g;
                let mut vg = Matrix::identity(two_k);
                orthogonalize(&mut w, Some(&mut vg), &inner);
                let vg = sorted_by_norm(&w, &vg);
                (multiply(&aij, Op::NoTrans, &vg, Op::NoTrans)?, vg, el)
            }
            BlockMethod::Direct => {
                let f = qr(&aij, DEFAULT_PANEL_WIDTH)?;
                // Measured on R^T R: column cosines are invariant under Q and
                // carry no eps * sqrt(cond) floor, unlike R's own entries.
                let el = scaled_offdiag(&syrk(&f.r))?;
                if el < self.opts.tolerance {
                    return Ok(el);
                }
                let mut w = f.r;
                let mut vr = Matrix::identity(two_k);
                orthogonalize(&mut w, Some(&mut vr), &inner);
                // w = R V_R = U_R diag(S)
                let order = descending_norm_order(&w);
                let (w, vr) = (w.select_columns(&order), vr.select_columns(&order));
                (multiply(&f.q, Op::NoTrans, &w, Op::NoTrans)?, vr, el)
            }
        };
        let starts = self.pair_columns(bi, bj);
        Self::scatter(self.k, starts, &mut self.work, &new_a);
        if let Some(v) = self.v.as_mut() {
            let vij = {
                let k = self.k;
                let mut out = Matrix::zeros(v.rows(), 2 * k);
                for (slot, start) in starts.into_iter().enumerate() {
                    for c in 0..k {
                        out.col_mut(slot * k + c).copy_from_slice(v.col(start + c));
                    }
                }
                out
            };
            let updated = multiply(&vij, Op::NoTrans, &rot, Op::NoTrans)?;
            Self::scatter(self.k, starts, v, &updated);
        }
        self.rotations += 1;
        Ok(el)
    }

    pub fn finish(self) -> BlockSvd<T> {
        let trimmed = self.work.row_block(0..self.m);
        let (u, sigma, v) = extract_svd(&trimmed, self.v, self.n, self.n);
        BlockSvd {
            svd: SvdResult {
                u,
                sigma,
                v,
                converged: self.converged,
                sweeps: self.sweep_errors.len(),
                rotations: self.rotations,
            },
            sweep_errors: self.sweep_errors,
        }
    }
}

/// Column indices of `w` by descending norm (stable).
fn descending_norm_order<T: Scalar>(w: &Matrix<T>) -> Vec<usize> {
    let norms: Vec<T> = (0..w.cols())
        .map(|j| w.col(j).iter().map(|&x| x * x).sum())
        .collect();
    let mut order: Vec<usize> = (0..w.cols()).collect();
    order.sort_by(|&i, &j| {
        norms[j]
            .partial_cmp(&norms[i])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    order
}

/// Columns of `v` reordered so that the matching columns of `w` descend in
/// norm; larger singular directions end up in the first block of a pair.
fn sorted_by_norm<T: Scalar>(w: &Matrix<T>, v: &Matrix<T>) -> Matrix<T> {
    v.select_columns(&descending_norm_order(w))
}

pub fn block_svd<T: Scalar>(a: &Matrix<T>, opts: &BlockJacobiOptions<T>) -> Result<BlockSvd<T>> {
    let mut state = BlockJacobiState::new(a, opts)?;
    while !state.is_done() {
        state.sweep()?;
    }
    Ok(state.finish())
}

/// Sweeps all entries in lockstep; an entry that has converged (or run out
/// of sweeps) is skipped in later rounds.
pub fn batch_block_svd<T: Scalar>(
    batch: &MatrixBatch<T>,
    opts: &BlockJacobiOptions<T>,
) -> Result<Vec<BlockSvd<T>>> {
    let mut states = batch
        .iter()
        .enumerate()
        .map(|(index, a)| {
            BlockJacobiState::new(a, opts).map_err(|e| Error::Batch {
                index,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut active: Vec<bool> = states.iter().map(|s| !s.is_done()).collect();
    while active.iter().any(|&a| a) {
        let results: Vec<Result<()>> = states
            .par_iter_mut()
            .zip(active.par_iter_mut())
            .map(|(state, act)| {
                if *act {
                    state.sweep()?;
                    *act = !state.is_done();
                }
                Ok(())
            })
            .collect();
        for (index, r) in results.into_iter().enumerate() {
            r.map_err(|e| Error::Batch {
                index,
                source: Box::new(e),
            })?;
        }
    }
    Ok(states.into_iter().map(BlockJacobiState::finish).collect())
}
