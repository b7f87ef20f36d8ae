//! Storage accounting for H² matrices.

use std::mem::size_of;

use crate::scalar::Scalar;

use super::build::{BlockData, H2Matrix};

/// Bytes of matrix data held by an H² matrix, split by kind. Basis storage
/// only counts nodes whose basis is actually used, i.e. nodes that take
/// part in a low-rank block or lie below one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct MemoryReport {
    pub dense_bytes: usize,
    pub basis_bytes: usize,
    pub coupling_bytes: usize,
}

impl MemoryReport {
    pub fn low_rank_bytes(&self) -> usize {
        self.basis_bytes + self.coupling_bytes
    }

    pub fn total_bytes(&self) -> usize {
        self.dense_bytes + self.low_rank_bytes()
    }
}

pub fn memory_report<T: Scalar>(h: &H2Matrix<T>) -> MemoryReport {
    let word = size_of::<T>();
    let tree = h.tree();
    let mut referenced = vec![false; tree.nodes().len()];
    let mut report = MemoryReport::default();
    for b in h.matrix_tree().blocks() {
        match &b.data {
            BlockData::Dense(d) => report.dense_bytes += d.rows() * d.cols() * word,
            BlockData::LowRank(s) => {
                report.coupling_bytes += s.rows() * s.cols() * word;
                referenced[b.row] = true;
                referenced[b.col] = true;
            }
        }
    }
    // parents precede children, so one forward pass closes over subtrees
    for i in 0..referenced.len() {
        if let Some(p) = tree.node(i).parent {
            referenced[i] |= referenced[p];
        }
    }
    let basis = h.basis();
    for (i, _) in referenced.iter().enumerate().filter(|(_, &r)| r) {
        let node = tree.node(i);
        if let Some(u) = basis.leaf_basis(i).filter(|_| node.is_leaf()) {
            report.basis_bytes += u.rows() * u.cols() * word;
        }
        if let Some(p) = node.parent {
            if referenced[p] {
                report.basis_bytes += basis.rank(i) * basis.rank(p) * word;
            }
        }
    }
    report
}
