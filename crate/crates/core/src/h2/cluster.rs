//! KD-tree clustering with mean splits.

use crate::error::{Error, Result};

use super::points::{Point, PointSet};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

impl BBox {
    /// Bounding box of a non-empty slice; an empty slice gives a degenerate
    /// box at the origin.
    pub fn of(points: &[Point]) -> Self {
        if points.is_empty() {
            return Self {
                min: [0.0; 2],
                max: [0.0; 2],
            };
        }
        let mut b = Self {
            min: [f64::INFINITY; 2],
            max: [f64::NEG_INFINITY; 2],
        };
        for p in points {
            for axis in 0..2 {
                b.min[axis] = b.min[axis].min(p.coord(axis));
                b.max[axis] = b.max[axis].max(p.coord(axis));
            }
        }
        b
    }

    pub fn extent(&self, axis: usize) -> f64 {
        self.max[axis] - self.min[axis]
    }

    pub fn diam(&self) -> f64 {
        self.extent(0).hypot(self.extent(1))
    }

    /// Euclidean distance between the boxes (0 when they touch or overlap).
    pub fn dist(&self, other: &BBox) -> f64 {
        let gap = |axis: usize| {
            (self.min[axis] - other.max[axis])
                .max(other.min[axis] - self.max[axis])
                .max(0.0)
        };
        gap(0).hypot(gap(1))
    }

    pub fn contains(&self, p: &Point) -> bool {
        (0..2).all(|a| self.min[a] <= p.coord(a) && p.coord(a) <= self.max[a])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterNode {
    pub begin: usize,
    pub end: usize,
    pub bbox: BBox,
    pub level: usize,
    pub parent: Option<usize>,
    pub children: Option<[usize; 2]>,
}

impl ClusterNode {
    pub fn len(&self) -> usize {
        self.end - self.begin
    }

    pub fn is_empty(&self) -> bool {
        self.begin == self.end
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_none()
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.begin..self.end
    }
}

/// Binary cluster tree. Nodes are stored in pre-order (root first, every
/// child after its parent); points are reordered so that each node owns a
/// contiguous index range.
#[derive(Debug, Clone)]
pub struct ClusterTree {
    nodes: Vec<ClusterNode>,
    /// `perm[i]` is the original index of the `i`-th reordered point.
    perm: Vec<usize>,
    points: Vec<Point>,
    leaf_size: usize,
    levels: Vec<Vec<usize>>,
}

impl ClusterTree {
    pub fn n(&self) -> usize {
        self.points.len()
    }

    pub fn nodes(&self) -> &[ClusterNode] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> &ClusterNode {
        &self.nodes[i]
    }

    pub fn leaf_size(&self) -> usize {
        self.leaf_size
    }

    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    /// Points in tree order.
    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn node_points(&self, i: usize) -> &[Point] {
        &self.points[self.nodes[i].range()]
    }

    /// Node indices grouped by depth, root level first.
    pub fn levels(&self) -> &[Vec<usize>] {
        &self.levels
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    pub fn leaves(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.nodes.len()).filter(|&i| self.nodes[i].is_leaf())
    }

    /// Reorders a vector given in original point order into tree order.
    pub fn to_tree_order<T: Copy>(&self, x: &[T]) -> Vec<T> {
        self.perm.iter().map(|&p| x[p]).collect()
    }

    /// Inverse of [`ClusterTree::to_tree_order`].
    pub fn from_tree_order<T: Copy + Default>(&self, y: &[T]) -> Vec<T> {
        let mut out = vec![T::default(); y.len()];
        for (i, &p) in self.perm.iter().enumerate() {
            out[p] = y[i];
        }
        out
    }
}

/// Splits `idx` into two non-empty halves, returning the split position.
fn split(idx: &mut [usize], pts: &[Point], bbox: &BBox) -> usize {
    let axis = if bbox.extent(0) >= bbox.extent(1) {
        0
    } else {
        1
    };
    let mean = idx.iter().map(|&i| pts[i].coord(axis)).sum::<f64>() / idx.len() as f64;
    let (mut left, mut right): (Vec<usize>, Vec<usize>) =
        idx.iter().partition(|&&i| pts[i].coord(axis) < mean);
    if left.is_empty() || right.is_empty() {
        // Degenerate coordinates: fall back to a median split, which for
        // identical points halves the range by index.
        left.clear();
        right.clear();
        idx.sort_by(|&a, &b| {
            pts[a]
                .coord(axis)
                .total_cmp(&pts[b].coord(axis))
                .then(a.cmp(&b))
        });
        return idx.len() / 2;
    }
    let mid = left.len();
    left.append(&mut right);
    idx.copy_from_slice(&left);
    mid
}

pub fn build_cluster_tree(pts: &PointSet, leaf_size: usize) -> Result<ClusterTree> {
    if leaf_size == 0 {
        return Err(Error::InvalidArgument("leaf size must be >= 1".into()));
    }
    let src = pts.as_slice();
    let mut idx: Vec<usize> = (0..src.len()).collect();
    let mut nodes: Vec<ClusterNode> = Vec::new();

    fn recurse(
        idx: &mut [usize],
        offset: usize,
        level: usize,
        parent: Option<usize>,
        src: &[Point],
        leaf_size: usize,
        nodes: &mut Vec<ClusterNode>,
    ) -> usize {
        let sub: Vec<Point> = idx.iter().map(|&i| src[i]).collect();
        let bbox = BBox::of(&sub);
        let me = nodes.len();
        nodes.push(ClusterNode {
            begin: offset,
            end: offset + idx.len(),
            bbox,
            level,
            parent,
            children: None,
        });
        if idx.len() > leaf_size {
            let mid = split(idx, src, &bbox);
            let (l, r) = idx.split_at_mut(mid);
            let a = recurse(l, offset, level + 1, Some(me), src, leaf_size, nodes);
            let b = recurse(r, offset + mid, level + 1, Some(me), src, leaf_size, nodes);
            nodes[me].children = Some([a, b]);
        }
        me
    }

    recurse(&mut idx, 0, 0, None, src, leaf_size, &mut nodes);
    let depth = nodes.iter().map(|n| n.level).max().unwrap_or(0) + 1;
    let mut levels = vec![Vec::new(); depth];
    for (i, n) in nodes.iter().enumerate() {
        levels[n.level].push(i);
    }
    let points = idx.iter().map(|&i| src[i]).collect();
    Ok(ClusterTree {
        nodes,
        perm: idx,
        points,
        leaf_size,
        levels,
    })
}
