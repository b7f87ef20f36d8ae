use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::time::Instant;

use batchfact::h2::{
    build_h2, compress, estimate_relative_error, nested_basis_residual, perturbed_grid,
    CompressReport, H2Params, MemoryReport, SvdMode,
};
use batchfact::{
    batch_block_svd, batch_qr, batch_rsvd, batch_svd, gaussian_matrix, make_matrix, multiply,
    orthogonality_error, reconstruction_error, BlockJacobiOptions, BlockMethod, Error,
    JacobiOptions, Matrix, MatrixBatch, Op, PairOrdering, Result, RsvdOptions, Scalar,
    SpectrumSpec, SvdResult,
};
use serde_json::{json, Value};

use crate::args::{
    BlockSvdArgs, CompressArgs, GenArgs, Method, Ordering, Precision, QrArgs, RsvdArgs, Spectrum,
    SvdArgs, SvdKind,
};

/// Records produced by one command, and whether every factorization in it
/// converged.
pub struct Outcome {
    pub records: Vec<Value>,
    pub converged: bool,
}

impl Outcome {
    fn one(record: Value, converged: bool) -> Self {
        Self {
            records: vec![record],
            converged,
        }
    }
}

/// Probe vectors for the compression error estimate use their own stream.
const PROBE_SEED_MIX: u64 = 0x5DEE_CE66_D1CE_4E5B;

fn f64_of<T: Scalar>(x: T) -> f64 {
    Scalar::to_f64(x)
}

fn entry_seed(seed: u64, i: usize) -> u64 {
    seed ^ i as u64
}

fn record(command: &str, config: impl serde::Serialize, metrics: Value, seconds: f64) -> Value {
    json!({
        "command": command,
        "config": config,
        "metrics": metrics,
        "runtime": {
            "threads": rayon::current_num_threads(),
            "wall_seconds": seconds,
        },
    })
}

fn spectrum(n: usize, cond: f64, rank: Option<usize>, kind: Spectrum) -> SpectrumSpec {
    let spec = match kind {
        Spectrum::Geometric => SpectrumSpec::geometric(n, cond),
        Spectrum::Arithmetic => SpectrumSpec::arithmetic(n, cond),
    };
    spec.with_rank(rank.unwrap_or(n))
}

fn generated<T: Scalar>(
    count: usize,
    m: usize,
    spec: &SpectrumSpec,
    seed: u64,
) -> Result<(MatrixBatch<T>, Vec<Vec<f64>>)> {
    let mut entries = Vec::with_capacity(count);
    let mut spectra = Vec::with_capacity(count);
    for i in 0..count {
        let (a, s) = make_matrix::<T>(m, spec, entry_seed(seed, i))?;
        entries.push(a);
        spectra.push(s);
    }
    Ok((MatrixBatch::new(entries), spectra))
}

fn max_of(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(0.0, f64::max)
}

/// Largest relative error over the nonzero reference values.
fn sigma_error<T: Scalar>(computed: &[T], reference: &[f64]) -> f64 {
    max_of(
        computed
            .iter()
            .zip(reference)
            .filter(|(_, r)| **r > 0.0)
            .map(|(c, r)| (f64_of(*c) - r).abs() / r),
    )
}

fn svd_metrics<T: Scalar>(
    batch: &MatrixBatch<T>,
    results: &[SvdResult<T>],
    spectra: Option<&[Vec<f64>]>,
) -> Result<Value> {
    let mut residual = 0.0f64;
    let mut orth_u = 0.0f64;
    let mut orth_v = 0.0f64;
    for (a, r) in batch.iter().zip(results) {
        let v = r.v.as_ref().expect("V requested");
        residual = residual.max(f64_of(reconstruction_error(a, &r.u, &r.sigma, v)?));
        orth_u = orth_u.max(f64_of(orthogonality_error(&r.u)));
        orth_v = orth_v.max(f64_of(orthogonality_error(v)));
    }
    let sigma_err =
        spectra.map(|s| max_of(results.iter().zip(s).map(|(r, s)| sigma_error(&r.sigma, s))));
    Ok(json!({
        "residual": residual,
        "orthogonality_u": orth_u,
        "orthogonality_v": orth_v,
        "sigma_error": sigma_err,
        "sweeps": results.iter().map(|r| r.sweeps).collect::<Vec<_>>(),
        "rotations": results.iter().map(|r| r.rotations).collect::<Vec<_>>(),
        "converged": results.iter().all(|r| r.converged),
    }))
}

pub fn gen(args: &GenArgs) -> Result<Outcome> {
    match args.common.precision {
        Precision::F32 => gen_t::<f32>(args),
        Precision::F64 => gen_t::<f64>(args),
    }
}

fn gen_t<T: Scalar>(args: &GenArgs) -> Result<Outcome> {
    let start = Instant::now();
    let spec = spectrum(args.n, args.cond, args.rank, args.spectrum);
    let (a, sigma) = make_matrix::<T>(args.m, &spec, args.common.seed)?;
    let mut config = args.clone();
    config.rank = Some(spec.rank);
    a.write_text(BufWriter::new(File::create(&args.out)?))?;
    let metrics = json!({
        "sigma": sigma,
        "frobenius": f64_of(batchfact::frobenius(&a)),
    });
    Ok(Outcome::one(
        record("gen", config, metrics, start.elapsed().as_secs_f64()),
        true,
    ))
}

pub fn bench_qr(args: &QrArgs) -> Result<Outcome> {
    match args.common.precision {
        Precision::F32 => bench_qr_t::<f32>(args),
        Precision::F64 => bench_qr_t::<f64>(args),
    }
}

fn bench_qr_t<T: Scalar>(args: &QrArgs) -> Result<Outcome> {
    let batch = MatrixBatch::from_fn(args.batch, |i| {
        gaussian_matrix::<T>(args.m, args.n, entry_seed(args.common.seed, i))
    });
    let start = Instant::now();
    let results = batch_qr(&batch, args.panel_width)?;
    let seconds = start.elapsed().as_secs_f64();
    let mut residual = 0.0f64;
    let mut orth = 0.0f64;
    for (a, f) in batch.iter().zip(&results) {
        let mut d = multiply(&f.q, Op::NoTrans, &f.r, Op::NoTrans)?;
        d.as_mut_slice()
            .iter_mut()
            .zip(a.as_slice())
            .for_each(|(x, y)| *x -= *y);
        let scale = f64_of(batchfact::frobenius(a));
        let err = f64_of(batchfact::frobenius(&d));
        residual = residual.max(if scale > 0.0 { err / scale } else { err });
        orth = orth.max(f64_of(orthogonality_error(&f.q)));
    }
    let metrics = json!({ "residual": residual, "orthogonality": orth });
    Ok(Outcome::one(
        record("bench qr", args, metrics, seconds),
        true,
    ))
}

pub fn bench_svd(args: &SvdArgs) -> Result<Outcome> {
    match args.common.precision {
        Precision::F32 => bench_svd_t::<f32>(args),
        Precision::F64 => bench_svd_t::<f64>(args),
    }
}

fn bench_svd_t<T: Scalar>(args: &SvdArgs) -> Result<Outcome> {
    let (batch, spectra) = match &args.input {
        Some(path) => {
            let a = Matrix::<T>::read_text(BufReader::new(File::open(path)?))?;
            (MatrixBatch::new(vec![a]), None)
        }
        None => {
            let spec = SpectrumSpec::geometric(args.n, args.cond);
            let (b, s) = generated::<T>(args.batch, args.m, &spec, args.common.seed)?;
            (b, Some(s))
        }
    };
    let mut opts = JacobiOptions::<T>::default()
        .with_ordering(match args.ordering {
            Ordering::Serial => PairOrdering::Serial,
            Ordering::RoundRobin => PairOrdering::RoundRobin,
        })
        .with_v(true);
    opts.max_sweeps = args.max_sweeps;
    let start = Instant::now();
    let results = batch_svd(&batch, &opts)?;
    let seconds = start.elapsed().as_secs_f64();
    let metrics = svd_metrics(&batch, &results, spectra.as_deref())?;
    let converged = results.iter().all(|r| r.converged);
    Ok(Outcome::one(
        record("bench svd", args, metrics, seconds),
        converged,
    ))
}

pub fn bench_block_svd(args: &BlockSvdArgs) -> Result<Outcome> {
    match args.common.precision {
        Precision::F32 => bench_block_svd_t::<f32>(args),
        Precision::F64 => bench_block_svd_t::<f64>(args),
    }
}

fn bench_block_svd_t<T: Scalar>(args: &BlockSvdArgs) -> Result<Outcome> {
    let m = args.m.unwrap_or(args.n);
    let spec = SpectrumSpec::geometric(args.n, args.cond);
    let (batch, spectra) = generated::<T>(args.batch, m, &spec, args.common.seed)?;
    let mut opts = BlockJacobiOptions::<T>::default()
        .with_method(match args.method {
            Method::Gram => BlockMethod::Gram,
            Method::Direct => BlockMethod::Direct,
        })
        .with_block_width(args.block_width)
        .with_v(true);
    opts.max_sweeps = args.max_sweeps;
    if let Some(tol) = args.tolerance {
        opts.tolerance = T::from_f64(tol);
    }
    let mut config = args.clone();
    config.m = Some(m);
    config.tolerance = Some(f64_of(opts.tolerance));
    let start = Instant::now();
    let results = batch_block_svd(&batch, &opts)?;
    let seconds = start.elapsed().as_secs_f64();
    let sweep_errors: Vec<Vec<f64>> = results
        .iter()
        .map(|r| r.sweep_errors.iter().map(|e| f64_of(*e)).collect())
        .collect();
    let svds: Vec<SvdResult<T>> = results.into_iter().map(|r| r.svd).collect();
    let mut metrics = svd_metrics(&batch, &svds, Some(&spectra))?;
    metrics["sweep_errors"] = json!(sweep_errors);
    let converged = svds.iter().all(|r| r.converged);
    Ok(Outcome::one(
        record("bench block-svd", config, metrics, seconds),
        converged,
    ))
}

pub fn bench_rsvd(args: &RsvdArgs) -> Result<Outcome> {
    match args.common.precision {
        Precision::F32 => bench_rsvd_t::<f32>(args),
        Precision::F64 => bench_rsvd_t::<f64>(args),
    }
}

fn bench_rsvd_t<T: Scalar>(args: &RsvdArgs) -> Result<Outcome> {
    let spec = spectrum(args.n, args.cond, args.rank, Spectrum::Geometric);
    let (batch, spectra) = generated::<T>(args.batch, args.m, &spec, args.common.seed)?;
    let mut config = args.clone();
    config.rank = Some(spec.rank);
    let opts = RsvdOptions::new(args.k)
        .with_oversampling(args.p)
        .with_seed(args.common.seed);
    let start = Instant::now();
    let results = batch_rsvd(&batch, &opts)?;
    let seconds = start.elapsed().as_secs_f64();
    let k = args.k;
    let mut errors = Vec::with_capacity(results.len());
    let mut optimal = Vec::with_capacity(results.len());
    for ((a, r), sigma) in batch.iter().zip(&results).zip(&spectra) {
        let e = reconstruction_error(a, &r.u.columns(0..k), &r.s[..k], &r.v.columns(0..k))?;
        errors.push(f64_of(e));
        let total: f64 = sigma.iter().map(|s| s * s).sum();
        let tail: f64 = sigma[k.min(sigma.len())..].iter().map(|s| s * s).sum();
        optimal.push((tail / total).sqrt());
    }
    let ratio = max_of(
        errors
            .iter()
            .zip(&optimal)
            .filter(|(_, o)| **o > 0.0)
            .map(|(e, o)| e / o),
    );
    let metrics = json!({
        "rank_k_error": errors,
        "optimal_error": optimal,
        "max_error": max_of(errors.iter().copied()),
        "max_ratio_to_optimal": ratio,
        "converged": results.iter().all(|r| r.converged),
    });
    let converged = results.iter().all(|r| r.converged);
    Ok(Outcome::one(
        record("bench rsvd", config, metrics, seconds),
        converged,
    ))
}

fn memory_json(m: &MemoryReport) -> Value {
    json!({
        "dense_bytes": m.dense_bytes,
        "basis_bytes": m.basis_bytes,
        "coupling_bytes": m.coupling_bytes,
        "low_rank_bytes": m.low_rank_bytes(),
        "total_bytes": m.total_bytes(),
    })
}

pub fn compress_cmd(args: &CompressArgs) -> Result<Outcome> {
    match args.common.precision {
        Precision::F32 => compress_t::<f32>(args),
        Precision::F64 => compress_t::<f64>(args),
    }
}

fn compress_t<T: Scalar>(args: &CompressArgs) -> Result<Outcome> {
    if !(args.eps > 0.0) {
        return Err(Error::InvalidArgument("--eps must be positive".into()));
    }
    let seed = args.common.seed;
    let params = H2Params {
        ell: args.ell,
        cheb_order: args.cheb_order,
        eta: args.eta,
        leaf_size: args.leaf_size,
    };
    let mode = match args.svd {
        SvdKind::Full => SvdMode::Full,
        SvdKind::Rsvd => SvdMode::Randomized {
            samples: args.samples,
            seed,
        },
    };
    let start = Instant::now();
    let pts = perturbed_grid(args.n, seed);
    let h = build_h2::<T>(&pts, &params)?;
    let build_seconds = start.elapsed().as_secs_f64();
    let c = compress(&h, T::from_f64(args.eps), mode)?;
    let start = Instant::now();
    let error = estimate_relative_error(&h, &c.matrix, args.probes, seed ^ PROBE_SEED_MIX)?;
    let residual = f64_of(nested_basis_residual(&h, &c.matrix, &c.projection)?);
    let check_seconds = start.elapsed().as_secs_f64();
    let CompressReport {
        ranks_before,
        ranks_after,
        memory_before,
        memory_after,
        truncation_seconds,
        projection_seconds,
    } = c.report;
    let metrics = json!({
        "nodes": h.tree().nodes().len(),
        "depth": h.tree().depth(),
        "dense_blocks": h.matrix_tree().dense_count(),
        "low_rank_blocks": h.matrix_tree().low_rank_count(),
        "ranks_before": ranks_before,
        "ranks_after": ranks_after,
        "memory_before": memory_json(&memory_before),
        "memory_after": memory_json(&memory_after),
        "error_estimate": error,
        "nested_basis_residual": residual,
    });
    let mut rec = record(
        "compress",
        args,
        metrics,
        build_seconds + truncation_seconds + projection_seconds,
    );
    rec["runtime"]["build_seconds"] = json!(build_seconds);
    rec["runtime"]["truncation_seconds"] = json!(truncation_seconds);
    rec["runtime"]["projection_seconds"] = json!(projection_seconds);
    rec["runtime"]["check_seconds"] = json!(check_seconds);
    Ok(Outcome::one(rec, true))
}
