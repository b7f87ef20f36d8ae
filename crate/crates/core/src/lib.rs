//! Batched dense factorizations for many small matrices: Householder QR,
//! one-sided Jacobi SVD (pairwise and blocked), randomized SVD, and their
//! use in compressing H² covariance matrices.

pub mod batch;
pub mod block_jacobi;
pub mod error;
pub mod h2;
pub mod jacobi;
pub mod matrix;
pub mod qr;
pub mod rsvd;
pub mod scalar;
pub mod testmat;

pub use batch::{batch_apply, MatrixBatch};
pub use block_jacobi::{
    batch_block_svd, block_svd, scaled_offdiag, BlockJacobiOptions, BlockJacobiState, BlockMethod,
    BlockSvd,
};
pub use error::{Error, Result};
pub use h2::{build_h2, compress, H2Matrix, H2Params, SvdMode};
pub use jacobi::{
    batch_svd, jacobi_rotation, off_orthogonality, round_robin_schedule, svd, JacobiOptions,
    PairOrdering, PairSchedule, SvdResult,
};
pub use matrix::{
    frobenius, gemm, matmul, multiply, orthogonality_error, reconstruction_error, syrk, Matrix, Op,
};
pub use qr::{batch_qr, householder_vector, qr, Householder, QrResult, DEFAULT_PANEL_WIDTH};
pub use rsvd::{batch_rsvd, gaussian_matrix, rsvd, RsvdOptions, TruncatedSvd};
pub use scalar::Scalar;
pub use testmat::{make_matrix, random_orthonormal, SpectrumMode, SpectrumSpec};
