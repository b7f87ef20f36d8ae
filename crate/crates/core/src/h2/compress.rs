//! Algebraic recompression of an H² matrix.
//!
//! The truncation phase replaces the basis tree level by level, from the
//! leaves up, with truncated left singular vectors and records projection
//! matrices `T_i = new_U_i^T U_i`. The projection phase rewrites every
//! coupling matrix as `T_t S T_s^T`. Dense blocks are carried over as is.

use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::jacobi::{svd, JacobiOptions};
use crate::matrix::{frobenius, multiply, orthogonality_error, Matrix, Op};
use crate::rsvd::{gaussian_matrix, rsvd, RsvdOptions};
use crate::scalar::{norm2, Scalar};

use super::build::{BasisTree, Block, BlockData, H2Matrix, MatrixTree};
use super::memory::{memory_report, MemoryReport};

/// SVD used on each node during truncation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SvdMode {
    Full,
    /// Randomized SVD with this many Gaussian samples per node and seed
    /// `seed ^ node`. Nodes whose smaller dimension does not exceed
    /// `samples` fall back to the full SVD.
    Randomized {
        samples: usize,
        seed: u64,
    },
}

/// Projection matrix `T_i` (new rank x old rank) for every node.
#[derive(Debug, Clone)]
pub struct ProjectionTree<T> {
    pub(crate) t: Vec<Matrix<T>>,
}

impl<T: Scalar> ProjectionTree<T> {
    pub fn get(&self, node: usize) -> &Matrix<T> {
        &self.t[node]
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }
}

/// Left singular vectors and values of `m`, any shape.
fn left_svd<T: Scalar>(m: &Matrix<T>, mode: SvdMode, node: usize) -> Result<(Matrix<T>, Vec<T>)> {
    if let SvdMode::Randomized { samples, seed } = mode {
        if samples > 0 && samples < m.rows().min(m.cols()) {
            let opts = RsvdOptions::new(samples)
                .with_oversampling(0)
                .with_seed(seed ^ node as u64);
            let r = rsvd(m, &opts)?;
            return Ok((r.u, r.s));
        }
    }
    if m.rows() >= m.cols() {
        let r = svd(m, &JacobiOptions::default())?;
        Ok((r.u, r.sigma))
    } else {
        let r = svd(&m.transpose(), &JacobiOptions::default().with_v(true))?;
        Ok((r.v.expect("accumulated"), r.sigma))
    }
}

/// Number of values with `sigma_i >= eps * sigma_1`, at least 1.
fn truncated_rank<T: Scalar>(sigma: &[T], eps: T) -> usize {
    let Some(&s1) = sigma.first() else {
        return 1;
    };
    sigma.iter().take_while(|&&s| s >= eps * s1).count().max(1)
}

enum NodeUpdate<T> {
    Leaf { u: Matrix<T>, t: Matrix<T> },
    Inner { e: [Matrix<T>; 2], t: Matrix<T> },
}

/// Truncates the basis of `h` to relative accuracy `eps` per node.
pub fn truncate_basis<T: Scalar>(
    h: &H2Matrix<T>,
    eps: T,
    mode: SvdMode,
) -> Result<(BasisTree<T>, ProjectionTree<T>)> {
    if !(eps > T::zero()) {
        return Err(Error::InvalidArgument(
            "compression threshold must be positive".into(),
        ));
    }
    let tree = h.tree();
    let count = tree.nodes().len();
    let basis = h.basis();
    let mut new_leaf: Vec<Option<Matrix<T>>> = vec![None; count];
    let mut new_transfer: Vec<Option<Matrix<T>>> = vec![None; count];
    let mut proj: Vec<Option<Matrix<T>>> = vec![None; count];

    for level in tree.levels().iter().rev() {
        let updates: Vec<(usize, NodeUpdate<T>)> = level
            .par_iter()
            .map(|&i| -> Result<(usize, NodeUpdate<T>)> {
                match tree.node(i).children {
                    None => {
                        let u = basis.leaf_basis(i).expect("leaf basis");
                        let (q, sigma) = left_svd(u, mode, i)?;
                        let k = truncated_rank(&sigma, eps).min(q.cols());
                        let q = q.columns(0..k);
                        let t = multiply(&q, Op::Trans, u, Op::NoTrans)?;
                        Ok((i, NodeUpdate::Leaf { u: q, t }))
                    }
                    Some([a, b]) => {
                        let part = |c: usize| {
                            let tc = proj[c].as_ref().expect("children first");
                            let e = basis.transfer(c).expect("transfer");
                            multiply(tc, Op::NoTrans, e, Op::NoTrans)
                        };
                        let (ta, tb) = (part(a)?, part(b)?);
                        let ka = ta.rows();
                        let te = Matrix::vstack(&[&ta, &tb])?;
                        let (q, sigma) = left_svd(&te, mode, i)?;
                        let k = truncated_rank(&sigma, eps).min(q.cols());
                        let q = q.columns(0..k);
                        let t = multiply(&q, Op::Trans, &te, Op::NoTrans)?;
                        let ea = q.row_block(0..ka);
                        let eb = q.row_block(ka..q.rows());
                        Ok((i, NodeUpdate::Inner { e: [ea, eb], t }))
                    }
                }
            })
            .collect::<Result<_>>()?;
        for (i, up) in updates {
            match up {
                NodeUpdate::Leaf { u, t } => {
                    new_leaf[i] = Some(u);
                    proj[i] = Some(t);
                }
                NodeUpdate::Inner { e: [ea, eb], t } => {
                    let [a, b] = tree.node(i).children.expect("inner");
                    new_transfer[a] = Some(ea);
                    new_transfer[b] = Some(eb);
                    proj[i] = Some(t);
                }
            }
        }
    }
    let new_basis = BasisTree::from_parts(tree, new_leaf, new_transfer)?;
    let t = proj
        .into_iter()
        .map(|t| t.expect("every node visited"))
        .collect();
    Ok((new_basis, ProjectionTree { t }))
}

/// Coupling matrices rewritten in the truncated basis, `T_t S T_s^T`.
pub fn project_coupling<T: Scalar>(
    h: &H2Matrix<T>,
    proj: &ProjectionTree<T>,
) -> Result<MatrixTree<T>> {
    if proj.len() != h.tree().nodes().len() {
        return Err(Error::Structure(
            "projection tree does not match the cluster tree".into(),
        ));
    }
    let blocks = h
        .matrix_tree()
        .blocks()
        .par_iter()
        .map(|b| -> Result<Block<T>> {
            let data = match &b.data {
                BlockData::Dense(d) => BlockData::Dense(d.clone()),
                BlockData::LowRank(s) => {
                    let (tt, ts) = (proj.get(b.row), proj.get(b.col));
                    if tt.cols() != s.rows() || ts.cols() != s.cols() {
                        return Err(Error::Structure(format!(
                            "projection ranks {}x{} and {}x{} do not fit coupling {}x{}",
                            tt.rows(),
                            tt.cols(),
                            ts.rows(),
                            ts.cols(),
                            s.rows(),
                            s.cols()
                        )));
                    }
                    let ts_ = multiply(s, Op::NoTrans, ts, Op::Trans)?;
                    BlockData::LowRank(multiply(tt, Op::NoTrans, &ts_, Op::NoTrans)?)
                }
            };
            Ok(Block {
                row: b.row,
                col: b.col,
                data,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MatrixTree::new(blocks))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompressReport {
    /// Largest node rank per level, root first.
    pub ranks_before: Vec<usize>,
    pub ranks_after: Vec<usize>,
    pub memory_before: MemoryReport,
    pub memory_after: MemoryReport,
    pub truncation_seconds: f64,
    pub projection_seconds: f64,
}

/// Compressed H² matrix together with the projection tree that produced it.
#[derive(Debug, Clone)]
pub struct Compressed<T> {
    pub matrix: H2Matrix<T>,
    pub projection: ProjectionTree<T>,
    pub report: CompressReport,
}

pub fn compress<T: Scalar>(h: &H2Matrix<T>, eps: T, mode: SvdMode) -> Result<Compressed<T>> {
    let start = Instant::now();
    let (basis, projection) = truncate_basis(h, eps, mode)?;
    let truncation_seconds = start.elapsed().as_secs_f64();
    let start = Instant::now();
    let matrix = project_coupling(h, &projection)?;
    let projection_seconds = start.elapsed().as_secs_f64();
    let out = H2Matrix::from_parts(h.shared_tree(), basis, matrix)?;
    let report = CompressReport {
        ranks_before: h.level_ranks(),
        ranks_after: out.level_ranks(),
        memory_before: memory_report(h),
        memory_after: memory_report(&out),
        truncation_seconds,
        projection_seconds,
    };
    Ok(Compressed {
        matrix: out,
        projection,
        report,
    })
}

/// Checks the truncated nested basis against the original one. For every
/// node the explicit new basis `W_i` (assembled through the new transfer
/// matrices) must be orthonormal and satisfy `W_i^T U_i = T_i`. Returns the
/// largest of `||W^T W - I||_F` and `||W^T U - T||_F / ||U||_F`.
pub fn nested_basis_residual<T: Scalar>(
    original: &H2Matrix<T>,
    compressed: &H2Matrix<T>,
    proj: &ProjectionTree<T>,
) -> Result<T> {
    let tree = original.tree();
    let old = original.basis().explicit_bases(tree);
    let new = compressed.basis().explicit_bases(compressed.tree());
    if old.len() != new.len() || proj.len() != old.len() {
        return Err(Error::Structure("trees do not match".into()));
    }
    let per_node: Vec<T> = (0..old.len())
        .into_par_iter()
        .map(|i| -> Result<T> {
            let orth = orthogonality_error(&new[i]);
            let mut wtu = multiply(&new[i], Op::Trans, &old[i], Op::NoTrans)?;
            let t = proj.get(i);
            if wtu.shape() != t.shape() {
                return Err(Error::Structure(format!(
                    "projection of node {i} has wrong shape"
                )));
            }
            wtu.as_mut_slice()
                .iter_mut()
                .zip(t.as_slice())
                .for_each(|(a, b)| *a -= *b);
            let scale = frobenius(&old[i]);
            let ident = if scale > T::zero() {
                frobenius(&wtu) / scale
            } else {
                frobenius(&wtu)
            };
            Ok(orth.max(ident))
        })
        .collect::<Result<_>>()?;
    Ok(per_node.into_iter().fold(T::zero(), T::max))
}

/// Stochastic estimate of `||A - B||_F / ||A||_F` from `samples` Gaussian
/// probes: `sqrt(sum |(A - B) x|^2 / sum |A x|^2)`.
pub fn estimate_relative_error<T: Scalar>(
    a: &H2Matrix<T>,
    b: &H2Matrix<T>,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    if a.n() != b.n() {
        return Err(Error::Shape(format!(
            "sizes differ: {} vs {}",
            a.n(),
            b.n()
        )));
    }
    if samples == 0 {
        return Err(Error::InvalidArgument(
            "need at least one probe vector".into(),
        ));
    }
    let probes = gaussian_matrix::<T>(a.n(), samples, seed);
    let sums: Vec<(f64, f64)> = (0..samples)
        .into_par_iter()
        .map(|k| {
            let x = probes.col(k);
            let ya = a.matvec(x)?;
            let yb = b.matvec(x)?;
            let diff: Vec<T> = ya.iter().zip(&yb).map(|(p, q)| *p - *q).collect();
            Ok((norm2(&diff).to_f64().powi(2), norm2(&ya).to_f64().powi(2)))
        })
        .collect::<Result<_>>()?;
    let (num, den) = sums
        .iter()
        .fold((0.0, 0.0), |(n, d), (a, b)| (n + a, d + b));
    Ok(if den > 0.0 {
        (num / den).sqrt()
    } else {
        num.sqrt()
    })
}
