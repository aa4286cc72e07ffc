use std::io::Write;
use std::path::PathBuf;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use sparsebench::datagen::*;
use sparsebench::rng;
use sparsebench::Error;

fn diabetes_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/diabetes.csv")
}

fn column_cov(x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.nrows() as f64;
    let means = DVector::from_fn(x.ncols(), |j, _| x.column(j).mean());
    let mut centered = x.clone();
    for j in 0..x.ncols() {
        centered.column_mut(j).add_scalar_mut(-means[j]);
    }
    centered.transpose() * &centered / (n - 1.0)
}

#[test]
fn covariance_examples() {
    let t = build_covariance(&CovarianceSpec::new(Design::Toeplitz, 3, 0.5).unwrap()).unwrap();
    let expected = DMatrix::from_row_slice(3, 3, &[1.0, 0.5, 0.25, 0.5, 1.0, 0.5, 0.25, 0.5, 1.0]);
    assert_eq!(t, expected);

    let i = build_covariance(&CovarianceSpec::new(Design::Independent, 4, 0.0).unwrap()).unwrap();
    assert_eq!(i, DMatrix::identity(4, 4));

    let b = build_covariance(&CovarianceSpec::new(Design::Block, 7, 0.3).unwrap()).unwrap();
    // zero-based: (0,1) and (1,4) sit inside the first block, (4,5) straddles the boundary
    assert_eq!(b[(0, 1)], 0.3);
    assert_eq!(b[(1, 4)], 0.3);
    assert_eq!(b[(4, 5)], 0.0);
    assert_eq!(b[(5, 6)], 0.3);
    assert!((0..7).all(|k| b[(k, k)] == 1.0));
}

#[test]
fn covariance_rejects_bad_inputs() {
    for rho in [-0.1, 1.0, 1.5, f64::NAN] {
        assert!(CovarianceSpec::new(Design::Toeplitz, 5, rho).is_err(), "rho {rho}");
    }
    assert!(CovarianceSpec::new(Design::Block, 0, 0.3).is_err());
}

#[test]
fn cholesky_reconstructs_every_grid_covariance() {
    for design in [Design::Independent, Design::Block, Design::Toeplitz] {
        for rho in [0.0, 0.3, 0.6, 0.9] {
            for p in [20, 50, 100] {
                let cov = build_covariance(&CovarianceSpec::new(design, p, rho).unwrap()).unwrap();
                let l = cholesky_factor(&cov).unwrap();
                let err = (&l * l.transpose() - &cov).amax();
                assert!(err < 1e-10, "{design} rho {rho} p {p}: {err}");
            }
        }
    }
}

#[test]
fn non_pd_covariance_is_rejected() {
    let cov = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
    assert!(matches!(cholesky_factor(&cov), Err(Error::NotPositiveDefinite)));
}

#[test]
fn identity_design_has_identity_covariance() {
    let cov = DMatrix::identity(5, 5);
    let x = sample_design(&cov, 100_000, &mut rng::seeded(1)).unwrap();
    let dev = (column_cov(&x) - cov).amax();
    assert!(dev < 0.05, "{dev}");
}

#[test]
fn toeplitz_design_adjacent_correlation() {
    let cov = build_covariance(&CovarianceSpec::new(Design::Toeplitz, 6, 0.9).unwrap()).unwrap();
    let x = sample_design(&cov, 100_000, &mut rng::seeded(2)).unwrap();
    let c = column_cov(&x);
    for j in 0..5 {
        let r = c[(j, j + 1)] / (c[(j, j)] * c[(j + 1, j + 1)]).sqrt();
        assert!((r - 0.9).abs() < 0.02, "columns {j},{}: {r}", j + 1);
    }
}

#[test]
fn design_is_deterministic() {
    let cov = DMatrix::identity(4, 4);
    let a = sample_design(&cov, 1, &mut rng::seeded(9)).unwrap();
    let b = sample_design(&cov, 1, &mut rng::seeded(9)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn support_cardinality() {
    for (p, s) in [(20, 4), (50, 10), (100, 20)] {
        let (beta, support) = sample_sparse_beta(p, &mut rng::seeded(p as u64)).unwrap();
        assert_eq!(support.len(), s);
        assert_eq!(beta.iter().filter(|b| **b != 0.0).count(), s);
        for j in (0..p).filter(|j| !support.contains(j)) {
            assert_eq!(beta[j].to_bits(), 0.0f64.to_bits());
        }
    }
    assert!(sample_sparse_beta(4, &mut rng::seeded(0)).is_err());
}

#[test]
fn sparse_coefficients_have_sd_three() {
    let mut r = rng::seeded(3);
    let mut values = Vec::new();
    for _ in 0..2000 {
        let (beta, support) = sample_sparse_beta(50, &mut r).unwrap();
        values.extend(support.iter().map(|&j| beta[j]));
    }
    let n = values.len() as f64;
    let var = values.iter().map(|v| v * v).sum::<f64>() / n;
    assert!((var - 9.0).abs() < 0.3, "{var}");
}

#[test]
fn noise_calibration_examples() {
    // population variance 4
    let signal = DVector::from_vec(vec![-2.0, 2.0, -2.0, 2.0]);
    assert_eq!(calibrate_noise(&signal, 1.0).unwrap(), 2.0);
    assert_eq!(calibrate_noise(&signal, 4.0).unwrap(), 1.0);
    assert!(matches!(
        calibrate_noise(&DVector::from_element(5, 1.3), 1.0),
        Err(Error::DegenerateSignal)
    ));
    assert!(calibrate_noise(&signal, 0.0).is_err());
}

#[test]
fn empirical_snr_matches_request() {
    for (design, rho, snr) in [(Design::Toeplitz, 0.6, 0.5), (Design::Block, 0.9, 2.0), (Design::Independent, 0.0, 5.0)] {
        let spec = CovarianceSpec::new(design, 20, rho).unwrap();
        let data = generate_with_sizes(&spec, snr, 11, 100_000, 0).unwrap();
        let truth = data.truth.unwrap();
        let cov = build_covariance(&spec).unwrap();
        // population signal variance b' S b
        let signal_var = (truth.beta_star.transpose() * &cov * &truth.beta_star)[0];
        let got = signal_var / truth.sigma.powi(2);
        assert!((got / snr - 1.0).abs() < 0.05, "{design} {rho} {snr}: {got}");
    }
}

#[test]
fn dataset_sizes() {
    for (p, n) in [(20, 50), (50, 75), (100, 150)] {
        let spec = CovarianceSpec::new(Design::Block, p, 0.3).unwrap();
        let data = generate_dataset(&spec, 1.0, 42).unwrap();
        assert_eq!(data.n_train(), n);
        assert_eq!(data.n_test(), 200);
        assert_eq!(data.p(), p);
        assert!(data.x_train.iter().chain(data.y_test.iter()).all(|v| v.is_finite()));
    }
}

#[test]
fn dataset_is_deterministic() {
    let spec = CovarianceSpec::new(Design::Toeplitz, 20, 0.6).unwrap();
    let a = generate_dataset(&spec, 0.5, 123).unwrap();
    let b = generate_dataset(&spec, 0.5, 123).unwrap();
    assert_eq!(a, b);
    let c = generate_dataset(&spec, 0.5, 124).unwrap();
    assert_ne!(a.y_train, c.y_train);
}

#[test]
fn diabetes_split_and_standardization() {
    let data = load_diabetes(&diabetes_path(), 42).unwrap();
    assert_eq!((data.n_train(), data.n_test(), data.p()), (354, 88, 10));
    assert!(data.truth.is_none());
    let n = data.n_train() as f64;
    let mean = data.y_train.mean();
    let var = data.y_train.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    assert!(mean.abs() < 1e-10);
    assert!((var - 1.0).abs() < 1e-10);
    for j in 0..10 {
        assert!(data.x_train.column(j).mean().abs() < 1e-10);
    }
    assert_ne!(load_diabetes(&diabetes_path(), 43).unwrap().y_test, data.y_test);
}

fn write_temp(text: &str) -> tempfile::NamedTempFile {
    let mut f = tempfile::NamedTempFile::new().unwrap();
    f.write_all(text.as_bytes()).unwrap();
    f
}

fn numeric_rows(rows: usize, cols: usize) -> String {
    (0..rows)
        .map(|i| (0..cols).map(|j| format!("{}", (i * 7 + j * 3) % 11 + j)).collect::<Vec<_>>().join(","))
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn diabetes_wrong_column_count_names_schema() {
    let f = write_temp(&numeric_rows(20, 9));
    let err = read_diabetes_table(f.path()).unwrap_err();
    assert!(matches!(err, Error::Schema { .. }));
    let msg = err.to_string();
    assert!(msg.contains("expected 11 columns") && msg.contains("bmi"), "{msg}");
}

#[test]
fn diabetes_bad_cell_reports_position() {
    let mut text = numeric_rows(20, 11);
    text = text.replacen('\n', "\n1,2,3,oops,5,6,7,8,9,10,11\n", 1);
    let f = write_temp(&text);
    match read_diabetes_table(f.path()).unwrap_err() {
        Error::Parse { row, column, .. } => assert_eq!((row, column), (2, 4)),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn diabetes_header_is_optional() {
    let body = numeric_rows(30, 11);
    let headerless = read_diabetes_table(write_temp(&body).path()).unwrap();
    let headered = read_diabetes_table(write_temp(&format!("a,b,c,d,e,f,g,h,i,j,k\n{body}")).path()).unwrap();
    assert_eq!(headerless.features, headered.features);
    assert_eq!(headerless.target.len(), 30);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn covariance_is_symmetric_unit_diagonal(p in 1usize..40, rho in 0.0f64..0.99, d in 0usize..3) {
        let design = [Design::Independent, Design::Block, Design::Toeplitz][d];
        let cov = build_covariance(&CovarianceSpec::new(design, p, rho).unwrap()).unwrap();
        prop_assert_eq!(&cov, &cov.transpose());
        prop_assert!((0..p).all(|k| cov[(k, k)] == 1.0));
    }

    #[test]
    fn support_is_sorted_distinct_in_range(p in 5usize..200, seed in any::<u64>()) {
        let (beta, support) = sample_sparse_beta(p, &mut rng::seeded(seed)).unwrap();
        prop_assert_eq!(support.len(), p / 5);
        prop_assert!(support.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(support.iter().all(|&j| j < p && beta[j] != 0.0));
    }

    #[test]
    fn generation_is_pure(seed in any::<u64>(), snr in 0.1f64..10.0) {
        let spec = CovarianceSpec::new(Design::Block, 10, 0.5).unwrap();
        let a = generate_with_sizes(&spec, snr, seed, 20, 5).unwrap();
        let b = generate_with_sizes(&spec, snr, seed, 20, 5).unwrap();
        prop_assert_eq!(a, b);
    }
}
