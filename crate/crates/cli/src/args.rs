use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Parser, Debug)]
#[command(
    name = "batchfact",
    version,
    about = "Batched QR/SVD benchmarks and H² compression"
)]
#[command(arg_required_else_help = true)]
pub struct Cli {
    /// Worker threads for batch operations.
    #[arg(long, global = true, env = "BATCHFACT_THREADS")]
    pub threads: Option<usize>,

    /// Exit with status 2 when any factorization fails to converge.
    #[arg(long, global = true)]
    pub strict: bool,

    /// Write JSON lines to this file instead of stdout.
    #[arg(long, global = true)]
    pub report: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a test matrix with a prescribed spectrum.
    Gen(GenArgs),
    /// Benchmark a batched factorization.
    #[command(subcommand)]
    Bench(Bench),
    /// Build an H² covariance matrix and compress it.
    Compress(CompressArgs),
}

#[derive(Subcommand, Debug)]
pub enum Bench {
    Qr(QrArgs),
    Svd(SvdArgs),
    BlockSvd(BlockSvdArgs),
    Rsvd(RsvdArgs),
}

#[derive(ValueEnum, Serialize, Debug, Clone, Copy, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    F32,
    F64,
}

#[derive(ValueEnum, Serialize, Debug, Clone, Copy, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum Ordering {
    Serial,
    RoundRobin,
}

#[derive(ValueEnum, Serialize, Debug, Clone, Copy, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Gram,
    Direct,
}

#[derive(ValueEnum, Serialize, Debug, Clone, Copy, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum Spectrum {
    Geometric,
    Arithmetic,
}

#[derive(ValueEnum, Serialize, Debug, Clone, Copy, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum SvdKind {
    Full,
    Rsvd,
}

#[derive(Args, Serialize, Debug, Clone)]
pub struct Common {
    #[arg(long, value_enum, default_value_t = Precision::F64)]
    pub precision: Precision,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Serialize, Debug, Clone)]
pub struct GenArgs {
    #[arg(long)]
    pub m: usize,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 1e4)]
    pub cond: f64,
    #[arg(long, value_enum, default_value_t = Spectrum::Geometric)]
    pub spectrum: Spectrum,
    /// Number of nonzero singular values (defaults to n).
    #[arg(long)]
    pub rank: Option<usize>,
    /// Output file in the plain-text matrix format.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Args, Serialize, Debug, Clone)]
pub struct QrArgs {
    #[arg(long, default_value_t = 32)]
    pub m: usize,
    #[arg(long, default_value_t = 32)]
    pub n: usize,
    #[arg(long, default_value_t = 100)]
    pub batch: usize,
    #[arg(long, default_value_t = batchfact::DEFAULT_PANEL_WIDTH)]
    pub panel_width: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Args, Serialize, Debug, Clone)]
pub struct SvdArgs {
    #[arg(long, default_value_t = 32)]
    pub m: usize,
    #[arg(long, default_value_t = 32)]
    pub n: usize,
    #[arg(long, default_value_t = 100)]
    pub batch: usize,
    #[arg(long, default_value_t = 1e4)]
    pub cond: f64,
    #[arg(long, value_enum, default_value_t = Ordering::Serial)]
    pub ordering: Ordering,
    #[arg(long, default_value_t = 30)]
    pub max_sweeps: usize,
    /// Factor this matrix file instead of generated ones.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Args, Serialize, Debug, Clone)]
pub struct BlockSvdArgs {
    /// Rows; defaults to n.
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long, default_value_t = 256)]
    pub n: usize,
    #[arg(long, default_value_t = 10)]
    pub batch: usize,
    #[arg(long, default_value_t = 1e7)]
    pub cond: f64,
    #[arg(long, value_enum, default_value_t = Method::Direct)]
    pub method: Method,
    #[arg(long, default_value_t = 32)]
    pub block_width: usize,
    /// Convergence threshold; defaults to the precision's standard value.
    #[arg(long)]
    pub tolerance: Option<f64>,
    #[arg(long, default_value_t = 30)]
    pub max_sweeps: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Args, Serialize, Debug, Clone)]
pub struct RsvdArgs {
    #[arg(long, default_value_t = 256)]
    pub m: usize,
    #[arg(long, default_value_t = 256)]
    pub n: usize,
    #[arg(long, default_value_t = 10)]
    pub batch: usize,
    #[arg(long, default_value_t = 64)]
    pub k: usize,
    #[arg(long, default_value_t = 8)]
    pub p: usize,
    /// Rank of the generated matrices; defaults to n (full rank).
    #[arg(long)]
    pub rank: Option<usize>,
    #[arg(long, default_value_t = 1e4)]
    pub cond: f64,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Args, Serialize, Debug, Clone)]
pub struct CompressArgs {
    #[arg(long, default_value_t = 4096)]
    pub n: usize,
    #[arg(long, default_value_t = 0.1)]
    pub ell: f64,
    #[arg(long, default_value_t = 8)]
    pub cheb_order: usize,
    #[arg(long, default_value_t = 64)]
    pub leaf_size: usize,
    #[arg(long, default_value_t = batchfact::h2::DEFAULT_ETA)]
    pub eta: f64,
    #[arg(long, default_value_t = 1e-7)]
    pub eps: f64,
    #[arg(long, value_enum, default_value_t = SvdKind::Full)]
    pub svd: SvdKind,
    /// Gaussian samples per node for `--svd rsvd`.
    #[arg(long, default_value_t = 32)]
    pub samples: usize,
    /// Probe vectors for the error estimate.
    #[arg(long, default_value_t = 30)]
    pub probes: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}
