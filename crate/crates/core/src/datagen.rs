//! Synthetic regression problems and the Diabetes loader.
//!
//! Synthetic data follow `y = X beta* + eps` with rows of `X` drawn from
//! `N(0, Sigma)`, a sparse `beta*` with `floor(0.2 p)` nonzero entries drawn
//! from `N(0, 9)`, and noise scaled so that `Var(X beta*) / sigma^2` equals
//! the requested SNR.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{Error, Result};
use crate::rng;

pub const BLOCK_SIZE: usize = 5;
pub const N_TEST: usize = 200;
pub const DIABETES_FEATURES: [&str; 10] = [
    "age", "sex", "bmi", "bp", "s1", "s2", "s3", "s4", "s5", "s6",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Design {
    Independent,
    Block,
    Toeplitz,
}

impl Design {
    pub fn name(self) -> &'static str {
        match self {
            Design::Independent => "independent",
            Design::Block => "block",
            Design::Toeplitz => "toeplitz",
        }
    }
}

impl fmt::Display for Design {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Design {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "independent" => Ok(Design::Independent),
            "block" => Ok(Design::Block),
            "toeplitz" => Ok(Design::Toeplitz),
            other => Err(Error::invalid(format!("unknown design '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovarianceSpec {
    pub design: Design,
    pub p: usize,
    pub rho: f64,
    pub block_size: usize,
}

impl CovarianceSpec {
    /// Validated spec. The independent design ignores `rho` and stores 0.
    pub fn new(design: Design, p: usize, rho: f64) -> Result<Self> {
        if p < 1 {
            return Err(Error::invalid("covariance dimension p must be at least 1"));
        }
        if !(0.0..1.0).contains(&rho) {
            return Err(Error::invalid(format!("rho must lie in [0, 1), got {rho}")));
        }
        let rho = if design == Design::Independent { 0.0 } else { rho };
        Ok(Self {
            design,
            p,
            rho,
            block_size: BLOCK_SIZE,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub beta_star: DVector<f64>,
    /// Sorted indices of the nonzero entries of `beta_star`.
    pub support: Vec<usize>,
    pub sigma: f64,
    pub snr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub x_train: DMatrix<f64>,
    pub y_train: DVector<f64>,
    pub x_test: DMatrix<f64>,
    pub y_test: DVector<f64>,
    pub truth: Option<GroundTruth>,
}

impl Dataset {
    pub fn p(&self) -> usize {
        self.x_train.ncols()
    }

    pub fn n_train(&self) -> usize {
        self.x_train.nrows()
    }

    pub fn n_test(&self) -> usize {
        self.x_test.nrows()
    }
}

pub fn n_train_for(p: usize) -> usize {
    (3 * p / 2).max(50)
}

pub fn support_size(p: usize) -> usize {
    p / 5
}

pub fn build_covariance(spec: &CovarianceSpec) -> Result<DMatrix<f64>> {
    let CovarianceSpec {
        design,
        p,
        rho,
        block_size,
    } = *spec;
    if p < 1 {
        return Err(Error::invalid("covariance dimension p must be at least 1"));
    }
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::invalid(format!("rho must lie in [0, 1), got {rho}")));
    }
    if block_size < 1 {
        return Err(Error::invalid("block size must be at least 1"));
    }
    let cov = DMatrix::from_fn(p, p, |i, j| {
        if i == j {
            return 1.0;
        }
        match design {
            Design::Independent => 0.0,
            Design::Block if i / block_size == j / block_size => rho,
            Design::Block => 0.0,
            Design::Toeplitz => rho.powi(i.abs_diff(j) as i32),
        }
    });
    Ok(cov)
}

/// Lower Cholesky factor, or [`Error::NotPositiveDefinite`].
pub fn cholesky_factor(cov: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !cov.is_square() {
        return Err(Error::invalid("covariance must be square"));
    }
    cov.clone()
        .cholesky()
        .map(|c| c.l())
        .ok_or(Error::NotPositiveDefinite)
}

/// Draws `n` rows from `N(0, cov)` as `Z L^T` where `L L^T = cov`.
///
/// Standard normals are consumed row by row, so the first rows of a larger
/// draw coincide with a smaller draw from the same stream.
pub fn sample_design<R: Rng + ?Sized>(
    cov: &DMatrix<f64>,
    n: usize,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    let l = cholesky_factor(cov)?;
    let p = cov.nrows();
    let mut z = DMatrix::<f64>::zeros(n, p);
    for i in 0..n {
        for j in 0..p {
            z[(i, j)] = StandardNormal.sample(rng);
        }
    }
    Ok(z * l.transpose())
}

/// Sparse coefficient vector with `floor(0.2 p)` nonzero `N(0, 9)` entries.
///
/// Positions come from a partial Fisher-Yates shuffle of `0..p`.
pub fn sample_sparse_beta<R: Rng + ?Sized>(
    p: usize,
    rng: &mut R,
) -> Result<(DVector<f64>, Vec<usize>)> {
    let s = support_size(p);
    if s == 0 {
        return Err(Error::invalid(format!(
            "p = {p} leaves an empty support; need p >= 5"
        )));
    }
    let mut positions: Vec<usize> = (0..p).collect();
    let (chosen, _) = positions.partial_shuffle(rng, s);
    let chosen = chosen.to_vec();
    let coef = Normal::new(0.0, 3.0).expect("valid normal");
    let mut beta = DVector::zeros(p);
    for &j in &chosen {
        beta[j] = coef.sample(rng);
    }
    let mut support = chosen;
    support.sort_unstable();
    Ok((beta, support))
}

/// `sqrt(Var(signal) / snr)` with the population variance of `signal`.
pub fn calibrate_noise(signal: &DVector<f64>, snr: f64) -> Result<f64> {
    if !(snr > 0.0 && snr.is_finite()) {
        return Err(Error::invalid(format!("snr must be positive, got {snr}")));
    }
    if signal.is_empty() {
        return Err(Error::DegenerateSignal);
    }
    let var = population_variance(signal.as_slice());
    if var <= 0.0 || !var.is_finite() {
        return Err(Error::DegenerateSignal);
    }
    Ok((var / snr).sqrt())
}

pub(crate) fn population_variance(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n
}

/// Generates one synthetic replicate.
///
/// Draw order on the seeded stream: all `n_train + 200` design rows, then
/// the sparse coefficients, then the noise. `sigma` is calibrated on the
/// combined train+test signal.
pub fn generate_dataset(spec: &CovarianceSpec, snr: f64, seed: u64) -> Result<Dataset> {
    generate_with_sizes(spec, snr, seed, n_train_for(spec.p), N_TEST)
}

/// Same protocol as [`generate_dataset`] with explicit partition sizes.
pub fn generate_with_sizes(
    spec: &CovarianceSpec,
    snr: f64,
    seed: u64,
    n_train: usize,
    n_test: usize,
) -> Result<Dataset> {
    let mut rng = rng::seeded(seed);
    let cov = build_covariance(spec)?;
    let n = n_train + n_test;
    let x = sample_design(&cov, n, &mut rng)?;
    let (beta_star, support) = sample_sparse_beta(spec.p, &mut rng)?;
    let signal = &x * &beta_star;
    let sigma = calibrate_noise(&signal, snr)?;
    let y = DVector::from_fn(n, |i, _| {
        let eps: f64 = StandardNormal.sample(&mut rng);
        signal[i] + sigma * eps
    });

    Ok(Dataset {
        name: format!("{}_rho{}_snr{}_p{}", spec.design, spec.rho, snr, spec.p),
        x_train: x.rows(0, n_train).into_owned(),
        y_train: y.rows(0, n_train).into_owned(),
        x_test: x.rows(n_train, n_test).into_owned(),
        y_test: y.rows(n_train, n_test).into_owned(),
        truth: Some(GroundTruth {
            beta_star,
            support,
            sigma,
            snr,
        }),
    })
}

/// Raw Diabetes table: 10 feature columns and the target.
#[derive(Debug, Clone)]
pub struct DiabetesTable {
    pub features: DMatrix<f64>,
    pub target: DVector<f64>,
}

/// Parses an 11-column numeric CSV. A first row that does not parse as
/// numbers is treated as a header.
pub fn read_diabetes_table(path: &Path) -> Result<DiabetesTable> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let expected_cols = DIABETES_FEATURES.len() + 1;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let record = record.map_err(|source| Error::Csv {
            path: path.to_path_buf(),
            source,
        })?;
        let line = idx + 1;
        if record.iter().all(|c| c.is_empty()) {
            continue;
        }
        if record.len() != expected_cols {
            return Err(Error::Schema {
                path: path.to_path_buf(),
                message: format!(
                    "row {line}: expected {expected_cols} columns ({}, target), found {}",
                    DIABETES_FEATURES.join(", "),
                    record.len()
                ),
            });
        }
        let parsed: Vec<std::result::Result<f64, _>> =
            record.iter().map(|c| c.parse::<f64>()).collect();
        if idx == 0 && parsed.iter().any(|v| v.is_err()) {
            continue;
        }
        let mut row = Vec::with_capacity(expected_cols);
        for (col, value) in parsed.into_iter().enumerate() {
            match value {
                Ok(v) if v.is_finite() => row.push(v),
                _ => {
                    return Err(Error::Parse {
                        path: path.to_path_buf(),
                        row: line,
                        column: col + 1,
                        message: format!("non-numeric cell '{}'", &record[col]),
                    })
                }
            }
        }
        rows.push(row);
    }
    if rows.len() < 10 {
        return Err(Error::Schema {
            path: path.to_path_buf(),
            message: format!("expected 442 data rows, found {}", rows.len()),
        });
    }
    let n = rows.len();
    let p = DIABETES_FEATURES.len();
    Ok(DiabetesTable {
        features: DMatrix::from_fn(n, p, |i, j| rows[i][j]),
        target: DVector::from_fn(n, |i, _| rows[i][p]),
    })
}

/// Loads the Diabetes data with a seeded 80/20 split.
///
/// Row indices are shuffled with `split_seed`; the last `floor(0.2 n)` rows
/// (88 of 442) form the test fold. Features and target are standardized
/// with training-fold mean and population standard deviation.
pub fn load_diabetes(path: &Path, split_seed: u64) -> Result<Dataset> {
    let table = read_diabetes_table(path)?;
    split_standardize(&table, split_seed)
}

pub fn split_standardize(table: &DiabetesTable, split_seed: u64) -> Result<Dataset> {
    let n = table.features.nrows();
    let p = table.features.ncols();
    let n_test = n / 5;
    let n_train = n - n_test;

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::seeded(split_seed));
    let (train_idx, test_idx) = order.split_at(n_train);

    let mut x_train = table.features.select_rows(train_idx);
    let mut x_test = table.features.select_rows(test_idx);
    let mut y_train = table.target.select_rows(train_idx);
    let mut y_test = table.target.select_rows(test_idx);

    for j in 0..p {
        let (mean, sd) = mean_sd(x_train.column(j).as_slice())?;
        x_train.column_mut(j).apply(|v| *v = (*v - mean) / sd);
        x_test.column_mut(j).apply(|v| *v = (*v - mean) / sd);
    }
    let (mean, sd) = mean_sd(y_train.as_slice())?;
    y_train.apply(|v| *v = (*v - mean) / sd);
    y_test.apply(|v| *v = (*v - mean) / sd);

    Ok(Dataset {
        name: "diabetes".to_string(),
        x_train,
        y_train,
        x_test,
        y_test,
        truth: None,
    })
}

fn mean_sd(values: &[f64]) -> Result<(f64, f64)> {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = population_variance(values).sqrt();
    if sd <= 0.0 || !sd.is_finite() {
        return Err(Error::invalid("constant column cannot be standardized"));
    }
    Ok((mean, sd))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn toeplitz_small() {
        let spec = CovarianceSpec::new(Design::Toeplitz, 3, 0.5).unwrap();
        let cov = build_covariance(&spec).unwrap();
        let expected =
            DMatrix::from_row_slice(3, 3, &[1.0, 0.5, 0.25, 0.5, 1.0, 0.5, 0.25, 0.5, 1.0]);
        assert_eq!(cov, expected);
    }

    #[test]
    fn independent_is_identity() {
        let spec = CovarianceSpec::new(Design::Independent, 4, 0.6).unwrap();
        assert_eq!(spec.rho, 0.0);
        assert_eq!(build_covariance(&spec).unwrap(), DMatrix::identity(4, 4));
    }

    #[test]
    fn block_boundary() {
        let spec = CovarianceSpec::new(Design::Block, 7, 0.3).unwrap();
        let cov = build_covariance(&spec).unwrap();
        // one-based (1,2) and (2,5) share the first block; (5,6) straddles it
        assert_eq!(cov[(0, 1)], 0.3);
        assert_eq!(cov[(1, 4)], 0.3);
        assert_eq!(cov[(4, 5)], 0.0);
        assert_eq!(cov[(5, 6)], 0.3);
        for i in 0..7 {
            assert_eq!(cov[(i, i)], 1.0);
        }
    }

    #[test]
    fn rejects_bad_rho_and_p() {
        assert!(CovarianceSpec::new(Design::Block, 5, 1.0).is_err());
        assert!(CovarianceSpec::new(Design::Toeplitz, 5, -0.1).is_err());
        assert!(CovarianceSpec::new(Design::Toeplitz, 0, 0.5).is_err());
        let raw = CovarianceSpec {
            design: Design::Toeplitz,
            p: 3,
            rho: 1.5,
            block_size: 5,
        };
        assert!(build_covariance(&raw).is_err());
    }

    #[test]
    fn grid_covariances_factor() {
        for design in [Design::Independent, Design::Block, Design::Toeplitz] {
            for rho in [0.0, 0.3, 0.6, 0.9] {
                for p in [20, 50, 100] {
                    let cov = build_covariance(&CovarianceSpec::new(design, p, rho).unwrap())
                        .unwrap();
                    assert_eq!(cov, cov.transpose());
                    let l = cholesky_factor(&cov).unwrap();
                    let err = (&l * l.transpose() - &cov).abs().max();
                    assert!(err < 1e-10, "{design} rho={rho} p={p}: {err}");
                }
            }
        }
    }

    #[test]
    fn non_pd_covariance_is_rejected() {
        let cov = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        let err = sample_design(&cov, 3, &mut rng::seeded(1)).unwrap_err();
        assert!(matches!(err, Error::NotPositiveDefinite));
    }

    #[test]
    fn single_row_is_deterministic() {
        let cov = DMatrix::identity(3, 3);
        let a = sample_design(&cov, 1, &mut rng::seeded(9)).unwrap();
        let b = sample_design(&cov, 1, &mut rng::seeded(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sparse_beta_cardinality() {
        for (p, s) in [(20, 4), (50, 10), (100, 20)] {
            let (beta, support) = sample_sparse_beta(p, &mut rng::seeded(p as u64)).unwrap();
            assert_eq!(support.len(), s);
            for j in 0..p {
                if support.binary_search(&j).is_err() {
                    assert_eq!(beta[j].to_bits(), 0.0f64.to_bits());
                } else {
                    assert_ne!(beta[j], 0.0);
                }
            }
        }
        assert!(sample_sparse_beta(4, &mut rng::seeded(0)).is_err());
    }

    #[test]
    fn noise_calibration() {
        // population variance 4
        let signal = DVector::from_vec(vec![-2.0, 2.0, -2.0, 2.0]);
        assert_eq!(calibrate_noise(&signal, 1.0).unwrap(), 2.0);
        assert_eq!(calibrate_noise(&signal, 4.0).unwrap(), 1.0);
        let flat = DVector::from_element(6, 3.5);
        assert!(matches!(
            calibrate_noise(&flat, 1.0),
            Err(Error::DegenerateSignal)
        ));
        assert!(calibrate_noise(&signal, 0.0).is_err());
    }

    #[test]
    fn dataset_sizes_and_determinism() {
        let spec = CovarianceSpec::new(Design::Toeplitz, 20, 0.6).unwrap();
        let a = generate_dataset(&spec, 2.0, 42).unwrap();
        assert_eq!(a.n_train(), 50);
        assert_eq!(a.n_test(), 200);
        let b = generate_dataset(&spec, 2.0, 42).unwrap();
        assert_eq!(a, b);
        let c = generate_dataset(&spec, 2.0, 43).unwrap();
        assert_ne!(a.x_train, c.x_train);

        assert_eq!(n_train_for(20), 50);
        assert_eq!(n_train_for(50), 75);
        assert_eq!(n_train_for(100), 150);
    }

    fn write_tmp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn diabetes_rejects_wrong_width() {
        let mut body = String::new();
        for i in 0..20 {
            body.push_str(&format!("{i},1,2,3,4,5,6,7,8\n"));
        }
        let f = write_tmp(&body);
        let err = load_diabetes(f.path(), 1).unwrap_err();
        let msg = err.to_string();
        assert!(matches!(err, Error::Schema { .. }));
        assert!(msg.contains("expected 11 columns"), "{msg}");
        assert!(msg.contains("age, sex, bmi"), "{msg}");
    }

    #[test]
    fn diabetes_reports_bad_cell_position() {
        let mut body = String::from("age,sex,bmi,bp,s1,s2,s3,s4,s5,s6,target\n");
        for i in 0..20 {
            if i == 3 {
                body.push_str("1,2,3,4,5,x,7,8,9,10,11\n");
            } else {
                body.push_str(&format!("{i},1,2,3,4,5,6,7,8,9,{}\n", i * 2));
            }
        }
        let f = write_tmp(&body);
        match load_diabetes(f.path(), 1).unwrap_err() {
            Error::Parse { row, column, .. } => {
                assert_eq!(row, 5);
                assert_eq!(column, 6);
            }
            other => panic!("unexpected error {other}"),
        }
    }
}
