//! H² matrices for kernel matrices on 2-D point sets: construction by
//! Chebyshev interpolation, fast products and algebraic recompression.

pub mod build;
pub mod chebyshev;
pub mod cluster;
pub mod compress;
mod matvec;
pub mod memory;
pub mod points;

pub use build::{
    admissible, build_h2, dense_kernel_matrix, dual_traversal, BasisTree, Block, BlockData,
    H2Matrix, H2Params, MatrixTree, DEFAULT_ETA,
};
pub use chebyshev::chebyshev_grid;
pub use cluster::{build_cluster_tree, BBox, ClusterNode, ClusterTree};
pub use compress::{
    compress, estimate_relative_error, nested_basis_residual, project_coupling, truncate_basis,
    CompressReport, Compressed, ProjectionTree, SvdMode,
};
pub use memory::{memory_report, MemoryReport};
pub use points::{exp_kernel, perturbed_grid, Point, PointSet};
