use batchfact::{
    batch_svd, make_matrix, svd, Error, JacobiOptions, Matrix, MatrixBatch, PairOrdering,
    SpectrumSpec,
};

// Largest sweep counts over seeds 0..1000, measured once and frozen. The
// count includes the final sweep that performs no rotation.
const SERIAL_SWEEP_BOUND: usize = 15;
const ROUND_ROBIN_SWEEP_BOUND: usize = 16;

#[test]
fn sweep_count_regression_32x32_cond_1e4() {
    for seed in 0..1000u64 {
        let (a, sigma) = make_matrix::<f64>(32, &SpectrumSpec::geometric(32, 1e4), seed).unwrap();
        for (ordering, bound) in [
            (PairOrdering::Serial, SERIAL_SWEEP_BOUND),
            (PairOrdering::RoundRobin, ROUND_ROBIN_SWEEP_BOUND),
        ] {
            let r = svd(&a, &JacobiOptions::default().with_ordering(ordering)).unwrap();
            assert!(r.converged, "seed {seed} {ordering:?}");
            assert!(
                r.sweeps <= bound,
                "seed {seed} {ordering:?}: {} sweeps",
                r.sweeps
            );
            let err = r
                .sigma
                .iter()
                .zip(&sigma)
                .map(|(s, o)| (s - o).abs() / o)
                .fold(0.0, f64::max);
            assert!(err <= 1e-11 * 1e4, "seed {seed}: {err}");
        }
    }
}

#[test]
fn batch_reports_lowest_failing_index() {
    let batch = MatrixBatch::new(vec![
        Matrix::<f64>::identity(3),
        Matrix::zeros(2, 3),
        Matrix::identity(2),
        Matrix::zeros(1, 4),
    ]);
    match batch_svd(&batch, &JacobiOptions::default()) {
        Err(Error::Batch { index, source }) => {
            assert_eq!(index, 1);
            assert!(matches!(*source, Error::Shape(_)));
        }
        other => panic!("expected a batch error, got {other:?}"),
    }
}

#[test]
fn batch_matches_single_calls() {
    let batch = MatrixBatch::from_fn(12, |i| {
        make_matrix::<f64>(20, &SpectrumSpec::geometric(12, 1e3), i as u64)
            .unwrap()
            .0
    });
    let opts = JacobiOptions::default().with_v(true);
    let all = batch_svd(&batch, &opts).unwrap();
    for (a, r) in batch.iter().zip(&all) {
        let single = svd(a, &opts).unwrap();
        assert_eq!(single.sigma, r.sigma);
        assert_eq!(single.u, r.u);
        assert_eq!(single.v, r.v);
    }
}

#[test]
fn single_precision_tracks_double() {
    let (a, sigma) = make_matrix::<f32>(24, &SpectrumSpec::geometric(16, 1e2), 3).unwrap();
    let r = svd(&a, &JacobiOptions::default()).unwrap();
    assert!(r.converged);
    for (s, o) in r.sigma.iter().zip(&sigma) {
        assert!((*s as f64 - o).abs() / o <= 1e-4);
    }
}
