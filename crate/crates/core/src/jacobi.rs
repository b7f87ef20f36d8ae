//! One-sided Jacobi SVD.
//!
//! Column pairs of a working copy of `A` are rotated until every pair is
//! orthogonal to within the tolerance; the column norms are then the
//! singular values and the normalized columns the left singular vectors.
//!
//! Two visiting orders are provided. [`PairOrdering::Serial`] walks the
//! pairs `i < j` in a nested loop. [`PairOrdering::RoundRobin`] follows a
//! [`PairSchedule`], where every step is a perfect matching of the columns
//! whose pairs could be processed concurrently. Both variants run on one
//! thread; the ordering only fixes the rotation sequence.

use crate::batch::{batch_apply, MatrixBatch};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::{dot, norm2, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PairOrdering {
    #[default]
    Serial,
    RoundRobin,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JacobiOptions<T> {
    /// A pair with `|a_p . a_q| <= tolerance * |a_p| |a_q|` is left alone.
    pub tolerance: T,
    pub max_sweeps: usize,
    pub ordering: PairOrdering,
    pub accumulate_v: bool,
}

impl<T: Scalar> Default for JacobiOptions<T> {
    fn default() -> Self {
        Self {
            tolerance: T::jacobi_tolerance(),
            max_sweeps: 30,
            ordering: PairOrdering::Serial,
            accumulate_v: false,
        }
    }
}

impl<T: Scalar> JacobiOptions<T> {
    pub fn with_ordering(mut self, ordering: PairOrdering) -> Self {
        self.ordering = ordering;
        self
    }

    pub fn with_v(mut self, accumulate_v: bool) -> Self {
        self.accumulate_v = accumulate_v;
        self
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if !(self.tolerance > T::zero()) {
            return Err(Error::InvalidArgument("tolerance must be positive".into()));
        }
        if self.max_sweeps == 0 {
            return Err(Error::InvalidArgument("max_sweeps must be >= 1".into()));
        }
        Ok(())
    }
}

/// Reduced SVD `A = U diag(sigma) V^T`.
#[derive(Debug, Clone)]
pub struct SvdResult<T> {
    pub u: Matrix<T>,
    /// Descending, non-negative.
    pub sigma: Vec<T>,
    pub v: Option<Matrix<T>>,
    pub converged: bool,
    pub sweeps: usize,
    pub rotations: usize,
}

/// Round-robin pairing of `n` columns: `n - 1` steps of `n / 2` disjoint
/// pairs, covering every unordered pair exactly once.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairSchedule {
    n: usize,
    steps: Vec<Vec<(usize, usize)>>,
}

impl PairSchedule {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn steps(&self) -> &[Vec<(usize, usize)>] {
        &self.steps
    }

    /// All pairs in visiting order.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.steps.iter().flatten().copied()
    }
}

/// Circle-method schedule: index 0 stays put while `1..n` rotate one
/// position per step.
pub fn round_robin_schedule(n: usize) -> Result<PairSchedule> {
    if n < 2 || !n.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!(
            "round-robin schedule needs an even n >= 2, got {n}"
        )));
    }
    let mut pos: Vec<usize> = (0..n).collect();
    let mut steps = Vec::with_capacity(n - 1);
    for _ in 0..n - 1 {
        let step = (0..n / 2)
            .map(|i| {
                let (a, b) = (pos[i], pos[n - 1 - i]);
                (a.min(b), a.max(b))
            })
            .collect();
        steps.push(step);
        pos[1..].rotate_right(1);
    }
    Ok(PairSchedule { n, steps })
}

/// Rotation `[[c, s], [-s, c]]` that diagonalizes the symmetric 2x2 Gram
/// block `[[g_pp, g_pq], [g_pq, g_qq]]`.
pub fn jacobi_rotation<T: Scalar>(g_pp: T, g_pq: T, g_qq: T) -> (T, T) {
    if g_pq == T::zero() {
        return (T::one(), T::zero());
    }
    let two = T::one() + T::one();
    let zeta = (g_qq - g_pp) / (two * g_pq);
    let sign = if zeta < T::zero() {
        -T::one()
    } else {
        T::one()
    };
    // hypot keeps 1 + zeta^2 from overflowing; zeta = inf gives t = 0.
    let t = sign / (zeta.abs() + T::one().hypot(zeta));
    let c = T::one() / (T::one() + t * t).sqrt();
    (c, c * t)
}

/// Largest pairwise column cosine `|a_i . a_j| / (|a_i| |a_j|)`; pairs with
/// a zero column contribute 0.
pub fn off_orthogonality<T: Scalar>(a: &Matrix<T>) -> T {
    let n = a.cols();
    let norms: Vec<T> = (0..n).map(|j| norm2(a.col(j))).collect();
    let mut worst = T::zero();
    for i in 0..n {
        if norms[i] == T::zero() {
            continue;
        }
        for j in i + 1..n {
            if norms[j] == T::zero() {
                continue;
            }
            let c = dot(a.col(i), a.col(j)).abs() / (norms[i] * norms[j]);
            worst = worst.max(c);
        }
    }
    worst
}

/// `(x.x, y.y, x.y)` in one pass.
#[inline]
fn gram3<T: Scalar>(x: &[T], y: &[T]) -> (T, T, T) {
    let mut xx = [T::zero(); 4];
    let mut yy = [T::zero(); 4];
    let mut xy = [T::zero(); 4];
    let xc = x.chunks_exact(4);
    let yc = y.chunks_exact(4);
    let (xr, yr) = (xc.remainder(), yc.remainder());
    for (a, b) in xc.zip(yc) {
        for k in 0..4 {
            xx[k] += a[k] * a[k];
            yy[k] += b[k] * b[k];
            xy[k] += a[k] * b[k];
        }
    }
    let (mut txx, mut tyy, mut txy) = (T::zero(), T::zero(), T::zero());
    for (&a, &b) in xr.iter().zip(yr) {
        txx += a * a;
        tyy += b * b;
        txy += a * b;
    }
    let sum = |v: [T; 4], t: T| (v[0] + v[1]) + (v[2] + v[3]) + t;
    (sum(xx, txx), sum(yy, tyy), sum(xy, txy))
}

#[inline]
fn rotate<T: Scalar>(x: &mut [T], y: &mut [T], c: T, s: T) {
    for (xi, yi) in x.iter_mut().zip(y.iter_mut()) {
        let (a, b) = (*xi, *yi);
        *xi = c * a - s * b;
        *yi = s * a + c * b;
    }
}

/// Orthogonalizes columns `p` and `q` if they fail the tolerance test.
/// Returns whether a rotation was applied.
#[inline]
fn rotate_pair<T: Scalar>(
    a: &mut Matrix<T>,
    v: Option<&mut Matrix<T>>,
    p: usize,
    q: usize,
    tol: T,
) -> bool {
    let (ap, aq) = a.col_pair_mut(p, q);
    let (alpha, beta, gamma) = gram3(ap, aq);
    if alpha == T::zero() || beta == T::zero() {
        return false;
    }
    if gamma.abs() <= tol * alpha.sqrt() * beta.sqrt() {
        return false;
    }
    let (c, s) = jacobi_rotation(alpha, gamma, beta);
    rotate(ap, aq, c, s);
    if let Some(v) = v {
        let (vp, vq) = v.col_pair_mut(p, q);
        rotate(vp, vq, c, s);
    }
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct SweepReport {
    pub sweeps: usize,
    pub rotations: usize,
    pub converged: bool,
}

fn visiting_order(n: usize, ordering: PairOrdering) -> Vec<(usize, usize)> {
    match ordering {
        PairOrdering::Serial => (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .collect(),
        PairOrdering::RoundRobin => {
            if n < 2 {
                return Vec::new();
            }
            // An odd column count is padded with a virtual zero column;
            // pairs touching it would never rotate, so they are dropped.
            let padded = n + n % 2;
            round_robin_schedule(padded)
                .expect("padded count is even")
                .pairs()
                .filter(|&(_, q)| q < n)
                .collect()
        }
    }
}

/// Runs Jacobi sweeps on `a` in place, applying the same rotations to `v`.
///
/// Stops after the first sweep that performs no rotation, or after
/// `max_sweeps`; in the latter case convergence is decided by a final
/// [`off_orthogonality`] check.
pub(crate) fn orthogonalize<T: Scalar>(
    a: &mut Matrix<T>,
    mut v: Option<&mut Matrix<T>>,
    opts: &JacobiOptions<T>,
) -> SweepReport {
    let pairs = visiting_order(a.cols(), opts.ordering);
    let mut report = SweepReport {
        sweeps: 0,
        rotations: 0,
        converged: false,
    };
    while report.sweeps < opts.max_sweeps {
        report.sweeps += 1;
        let mut rotated = 0;
        for &(p, q) in &pairs {
            if rotate_pair(a, v.as_deref_mut(), p, q, opts.tolerance) {
                rotated += 1;
            }
        }
        report.rotations += rotated;
        if rotated == 0 {
            report.converged = true;
            return report;
        }
    }
    report.converged = off_orthogonality(a) < opts.tolerance;
    report
}

/// Turns an orthogonalized working matrix into `(U, sigma, V)`.
///
/// Columns are stably sorted by norm, the first `keep` are retained, and
/// `V` is cut to its first `v_rows` rows (dropping internal padding).
pub(crate) fn extract_svd<T: Scalar>(
    work: &Matrix<T>,
    v: Option<Matrix<T>>,
    keep: usize,
    v_rows: usize,
) -> (Matrix<T>, Vec<T>, Option<Matrix<T>>) {
    let m = work.rows();
    let norms: Vec<T> = (0..work.cols()).map(|j| norm2(work.col(j))).collect();
    let mut order: Vec<usize> = (0..work.cols()).collect();
    order.sort_by(|&i, &j| {
        norms[j]
            .partial_cmp(&norms[i])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    order.truncate(keep);

    let sigma: Vec<T> = order.iter().map(|&j| norms[j]).collect();
    let mut u = Matrix::zeros(m, keep);
    let mut missing = Vec::new();
    for (k, &j) in order.iter().enumerate() {
        if norms[j] > T::zero() {
            let inv = norms[j];
            for (dst, &src) in u.col_mut(k).iter_mut().zip(work.col(j)) {
                *dst = src / inv;
            }
        } else {
            missing.push(k);
        }
    }
    if !missing.is_empty() {
        complete_basis(&mut u, &missing);
    }

    let v = v.map(|v| {
        let mut out = Matrix::zeros(v_rows, keep);
        for (k, &j) in order.iter().enumerate() {
            out.col_mut(k).copy_from_slice(&v.col(j)[..v_rows]);
        }
        out
    });
    (u, sigma, v)
}

/// Fills the listed (zero) columns of `u` with unit vectors orthogonal to
/// every other column, drawn from the canonical basis by Gram-Schmidt.
fn complete_basis<T: Scalar>(u: &mut Matrix<T>, missing: &[usize]) {
    let m = u.rows();
    let mut filled: Vec<usize> = (0..u.cols()).filter(|k| !missing.contains(k)).collect();
    let mut next_e = 0;
    for &k in missing {
        while next_e < m {
            let mut cand = vec![T::zero(); m];
            cand[next_e] = T::one();
            next_e += 1;
            for _ in 0..2 {
                for &f in &filled {
                    let col = u.col(f);
                    let proj = dot(col, &cand);
                    for (c, &x) in cand.iter_mut().zip(col) {
                        *c -= proj * x;
                    }
                }
            }
            let nrm = norm2(&cand);
            if nrm > T::from_f64(0.5) {
                for (dst, c) in u.col_mut(k).iter_mut().zip(&cand) {
                    *dst = *c / nrm;
                }
                filled.push(k);
                break;
            }
        }
    }
}

pub fn svd<T: Scalar>(a: &Matrix<T>, opts: &JacobiOptions<T>) -> Result<SvdResult<T>> {
    opts.validate()?;
    let (m, n) = a.shape();
    if m < n {
        return Err(Error::Shape(format!(
            "Jacobi SVD needs rows >= cols, got {m}x{n}"
        )));
    }
    let mut work = a.clone();
    let mut v = opts.accumulate_v.then(|| Matrix::identity(n));
    let report = orthogonalize(&mut work, v.as_mut(), opts);
    let (u, sigma, v) = extract_svd(&work, v, n, n);
    Ok(SvdResult {
        u,
        sigma,
        v,
        converged: report.converged,
        sweeps: report.sweeps,
        rotations: report.rotations,
    })
}

pub fn batch_svd<T: Scalar>(
    batch: &MatrixBatch<T>,
    opts: &JacobiOptions<T>,
) -> Result<Vec<SvdResult<T>>> {
    batch_apply(batch, |_, a| svd(a, opts))
}
