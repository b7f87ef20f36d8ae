//! H² representation and its construction from a kernel by Chebyshev
//! interpolation.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matrix::{multiply, Matrix, Op};
use crate::scalar::Scalar;

use super::chebyshev::TensorGrid;
use super::cluster::{build_cluster_tree, BBox, ClusterTree};
use super::points::{exp_kernel, Point, PointSet};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct H2Params {
    pub ell: f64,
    pub cheb_order: usize,
    pub eta: f64,
    pub leaf_size: usize,
}

/// Admissibility parameter giving a construction error below 1e-7 on the
/// unit-square exponential-kernel fixtures with `cheb_order` 8 (measured
/// 1.6e-9 at n = 1024).
pub const DEFAULT_ETA: f64 = 1.0;

impl Default for H2Params {
    fn default() -> Self {
        Self {
            ell: 0.1,
            cheb_order: 8,
            eta: DEFAULT_ETA,
            leaf_size: 64,
        }
    }
}

impl H2Params {
    fn validate(&self) -> Result<()> {
        if !(self.ell > 0.0) || !(self.eta > 0.0) || self.cheb_order == 0 || self.leaf_size == 0 {
            return Err(Error::InvalidArgument(format!(
                "H2 parameters must be positive: {self:?}"
            )));
        }
        Ok(())
    }
}

/// `max(diam t, diam s) <= eta * dist(t, s)` with a strictly positive
/// distance.
pub fn admissible(t: &BBox, s: &BBox, eta: f64) -> bool {
    let d = t.dist(s);
    d > 0.0 && t.diam().max(s.diam()) <= eta * d
}

/// Nested basis: explicit matrices at the leaves, transfer matrices
/// `E_c` (child rank x parent rank) stored at every non-root node.
#[derive(Debug, Clone)]
pub struct BasisTree<T> {
    pub(crate) leaf: Vec<Option<Matrix<T>>>,
    pub(crate) transfer: Vec<Option<Matrix<T>>>,
    pub(crate) ranks: Vec<usize>,
}

impl<T: Scalar> BasisTree<T> {
    /// Checks shapes against the cluster tree and derives node ranks.
    pub fn from_parts(
        tree: &ClusterTree,
        leaf: Vec<Option<Matrix<T>>>,
        transfer: Vec<Option<Matrix<T>>>,
    ) -> Result<Self> {
        let count = tree.nodes().len();
        if leaf.len() != count || transfer.len() != count {
            return Err(Error::Structure(
                "basis tree does not match the cluster tree".into(),
            ));
        }
        let mut ranks = vec![0; count];
        for i in (0..count).rev() {
            let node = tree.node(i);
            ranks[i] = match node.children {
                None => {
                    let u = leaf[i]
                        .as_ref()
                        .ok_or_else(|| Error::Structure(format!("leaf {i} has no basis")))?;
                    if u.rows() != node.len() {
                        return Err(Error::Structure(format!(
                            "leaf {i} basis has {} rows for {} points",
                            u.rows(),
                            node.len()
                        )));
                    }
                    u.cols()
                }
                Some([a, _]) => {
                    let e = transfer[a]
                        .as_ref()
                        .ok_or_else(|| Error::Structure(format!("node {a} has no transfer")))?;
                    e.cols()
                }
            };
        }
        for i in 0..count {
            if let Some(p) = tree.node(i).parent {
                let e = transfer[i]
                    .as_ref()
                    .ok_or_else(|| Error::Structure(format!("node {i} has no transfer")))?;
                if e.shape() != (ranks[i], ranks[p]) {
                    return Err(Error::Structure(format!(
                        "transfer of node {i} is {}x{}, expected {}x{}",
                        e.rows(),
                        e.cols(),
                        ranks[i],
                        ranks[p]
                    )));
                }
            }
        }
        Ok(Self {
            leaf,
            transfer,
            ranks,
        })
    }

    pub fn rank(&self, node: usize) -> usize {
        self.ranks[node]
    }

    pub fn ranks(&self) -> &[usize] {
        &self.ranks
    }

    pub fn leaf_basis(&self, node: usize) -> Option<&Matrix<T>> {
        self.leaf[node].as_ref()
    }

    pub fn transfer(&self, node: usize) -> Option<&Matrix<T>> {
        self.transfer[node].as_ref()
    }

    /// Largest node rank on each level of the tree.
    pub fn level_ranks(&self, tree: &ClusterTree) -> Vec<usize> {
        tree.levels()
            .iter()
            .map(|lvl| lvl.iter().map(|&i| self.ranks[i]).max().unwrap_or(0))
            .collect()
    }

    /// Explicit basis of every node, `U_i = [U_c1 E_c1; U_c2 E_c2]` for
    /// inner nodes.
    pub fn explicit_bases(&self, tree: &ClusterTree) -> Vec<Matrix<T>> {
        let count = tree.nodes().len();
        let mut out: Vec<Option<Matrix<T>>> = vec![None; count];
        for i in (0..count).rev() {
            let u = match tree.node(i).children {
                None => self.leaf[i].clone().expect("validated leaf"),
                Some(children) => {
                    let parts: Vec<Matrix<T>> = children
                        .iter()
                        .map(|&c| {
                            let uc = out[c].as_ref().expect("children first");
                            let e = self.transfer[c].as_ref().expect("validated transfer");
                            multiply(uc, Op::NoTrans, e, Op::NoTrans).expect("ranks agree")
                        })
                        .collect();
                    Matrix::vstack(&[&parts[0], &parts[1]]).expect("same width")
                }
            };
            out[i] = Some(u);
        }
        out.into_iter().map(|u| u.expect("filled")).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BlockData<T> {
    /// Kernel values of the block, `|t| x |s|`.
    Dense(Matrix<T>),
    /// Coupling matrix `S`, `rank(t) x rank(s)`.
    LowRank(Matrix<T>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Block<T> {
    pub row: usize,
    pub col: usize,
    pub data: BlockData<T>,
}

impl<T> Block<T> {
    pub fn is_low_rank(&self) -> bool {
        matches!(self.data, BlockData::LowRank(_))
    }
}

/// Leaves of the block quadtree produced by the dual traversal.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixTree<T> {
    pub(crate) blocks: Vec<Block<T>>,
}

impl<T: Scalar> MatrixTree<T> {
    pub fn new(blocks: Vec<Block<T>>) -> Self {
        Self { blocks }
    }

    pub fn blocks(&self) -> &[Block<T>] {
        &self.blocks
    }

    pub fn dense_count(&self) -> usize {
        self.blocks.iter().filter(|b| !b.is_low_rank()).count()
    }

    pub fn low_rank_count(&self) -> usize {
        self.blocks.iter().filter(|b| b.is_low_rank()).count()
    }
}

#[derive(Debug, Clone)]
pub struct H2Matrix<T> {
    pub(crate) tree: Arc<ClusterTree>,
    pub(crate) basis: BasisTree<T>,
    pub(crate) matrix: MatrixTree<T>,
}

impl<T: Scalar> H2Matrix<T> {
    /// Assembles an H² matrix from parts, checking that blocks tile the
    /// index space and that all shapes agree.
    pub fn from_parts(
        tree: Arc<ClusterTree>,
        basis: BasisTree<T>,
        matrix: MatrixTree<T>,
    ) -> Result<Self> {
        let n = tree.n();
        let mut area = 0usize;
        for b in matrix.blocks() {
            let (t, s) = (tree.node(b.row), tree.node(b.col));
            area += t.len() * s.len();
            let expected = match &b.data {
                BlockData::Dense(d) => (d.shape(), (t.len(), s.len())),
                BlockData::LowRank(c) => (c.shape(), (basis.rank(b.row), basis.rank(b.col))),
            };
            if expected.0 != expected.1 {
                return Err(Error::Structure(format!(
                    "block ({}, {}) is {:?}, expected {:?}",
                    b.row, b.col, expected.0, expected.1
                )));
            }
        }
        if area != n * n {
            return Err(Error::Structure(format!(
                "blocks cover {area} entries of {}",
                n * n
            )));
        }
        if basis.ranks.len() != tree.nodes().len() {
            return Err(Error::Structure(
                "basis tree does not match the cluster tree".into(),
            ));
        }
        Ok(Self {
            tree,
            basis,
            matrix,
        })
    }

    pub fn n(&self) -> usize {
        self.tree.n()
    }

    pub fn tree(&self) -> &ClusterTree {
        &self.tree
    }

    pub fn shared_tree(&self) -> Arc<ClusterTree> {
        Arc::clone(&self.tree)
    }

    pub fn basis(&self) -> &BasisTree<T> {
        &self.basis
    }

    pub fn matrix_tree(&self) -> &MatrixTree<T> {
        &self.matrix
    }

    pub fn level_ranks(&self) -> Vec<usize> {
        self.basis.level_ranks(&self.tree)
    }
}

/// Block pairs `(t, s, admissible)` from the dual traversal of the tree
/// with itself.
pub fn dual_traversal(tree: &ClusterTree, eta: f64) -> Vec<(usize, usize, bool)> {
    fn go(tree: &ClusterTree, t: usize, s: usize, eta: f64, out: &mut Vec<(usize, usize, bool)>) {
        let (nt, ns) = (tree.node(t), tree.node(s));
        if admissible(&nt.bbox, &ns.bbox, eta) {
            out.push((t, s, true));
            return;
        }
        match (nt.children, ns.children) {
            (None, None) => out.push((t, s, false)),
            (None, Some(cs)) => cs.iter().for_each(|&c| go(tree, t, c, eta, out)),
            (Some(ct), None) => ct.iter().for_each(|&c| go(tree, c, s, eta, out)),
            (Some(ct), Some(cs)) => {
                for &a in &ct {
                    for &b in &cs {
                        go(tree, a, b, eta, out);
                    }
                }
            }
        }
    }
    let mut out = Vec::new();
    if tree.n() > 0 {
        go(tree, 0, 0, eta, &mut out);
    }
    out
}

fn kernel_block<T: Scalar>(rows: &[Point], cols: &[Point], ell: f64) -> Matrix<T> {
    Matrix::from_fn(rows.len(), cols.len(), |i, j| {
        T::from_f64(exp_kernel(&rows[i], &cols[j], ell))
    })
}

/// Builds the interpolation-based H² approximation of the exponential
/// covariance matrix of `pts`.
pub fn build_h2<T: Scalar>(pts: &PointSet, params: &H2Params) -> Result<H2Matrix<T>> {
    params.validate()?;
    let tree = Arc::new(build_cluster_tree(pts, params.leaf_size)?);
    let count = tree.nodes().len();
    let order = params.cheb_order;
    let r = order * order;
    let grids: Vec<TensorGrid> = tree
        .nodes()
        .iter()
        .map(|n| TensorGrid::new(&n.bbox, order))
        .collect();
    let grid_points: Vec<Vec<Point>> = grids.iter().map(TensorGrid::points).collect();

    let leaf: Vec<Option<Matrix<T>>> = (0..count)
        .into_par_iter()
        .map(|i| {
            if !tree.node(i).is_leaf() {
                return None;
            }
            let pts = tree.node_points(i);
            let mut u = Matrix::zeros(pts.len(), r);
            let mut row = vec![0.0; r];
            for (k, p) in pts.iter().enumerate() {
                grids[i].eval(p, &mut row);
                for (j, &v) in row.iter().enumerate() {
                    u[(k, j)] = T::from_f64(v);
                }
            }
            Some(u)
        })
        .collect();

    let transfer: Vec<Option<Matrix<T>>> = (0..count)
        .into_par_iter()
        .map(|c| {
            let p = tree.node(c).parent?;
            let mut e = Matrix::zeros(r, r);
            let mut row = vec![0.0; r];
            for (k, q) in grid_points[c].iter().enumerate() {
                grids[p].eval(q, &mut row);
                for (j, &v) in row.iter().enumerate() {
                    e[(k, j)] = T::from_f64(v);
                }
            }
            Some(e)
        })
        .collect();

    let basis = BasisTree::from_parts(&tree, leaf, transfer)?;
    let blocks = dual_traversal(&tree, params.eta)
        .into_par_iter()
        .map(|(t, s, low)| {
            let data = if low {
                BlockData::LowRank(kernel_block(&grid_points[t], &grid_points[s], params.ell))
            } else {
                BlockData::Dense(kernel_block(
                    tree.node_points(t),
                    tree.node_points(s),
                    params.ell,
                ))
            };
            Block {
                row: t,
                col: s,
                data,
            }
        })
        .collect();
    H2Matrix::from_parts(tree, basis, MatrixTree::new(blocks))
}

/// Dense kernel matrix in the original point order.
pub fn dense_kernel_matrix<T: Scalar>(pts: &PointSet, ell: f64) -> Matrix<T> {
    kernel_block(pts.as_slice(), pts.as_slice(), ell)
}
