//! Grouped mean/std summaries of result rows and the report CSV files.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use super::{DatasetKind, ModelKind, ResultRow};
use crate::error::{Error, Result};

/// Names of the five always-written report files, in write order. A sixth
/// file, `diabetes.csv`, is added when the input has Diabetes rows.
pub const REPORT_FILES: [&str; 5] = [
    "summary_by_model.csv",
    "calibration.csv",
    "mse_by_rho.csv",
    "f1_by_snr.csv",
    "time_by_p.csv",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Dataset,
    Model,
    Rho,
    Snr,
    P,
    Seed,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::Dataset => "dataset",
            Axis::Model => "model",
            Axis::Rho => "rho",
            Axis::Snr => "snr",
            Axis::P => "p",
            Axis::Seed => "seed",
        }
    }

    fn key(self, row: &ResultRow) -> Key {
        match self {
            Axis::Dataset => Key::Dataset(row.dataset),
            Axis::Model => Key::Model(row.model),
            Axis::Rho => Key::Num(row.rho),
            Axis::Snr => Key::Num(row.snr),
            Axis::P => Key::Num(row.p as f64),
            Axis::Seed => Key::Num(row.seed as f64),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    TestMse,
    TestRmse,
    CoefL2,
    CoefMse,
    Precision,
    Recall,
    F1,
    Coverage,
    IntervalWidth,
    Divergences,
    FitTime,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::TestMse => "test_mse",
            Metric::TestRmse => "test_rmse",
            Metric::CoefL2 => "coef_l2",
            Metric::CoefMse => "coef_mse",
            Metric::Precision => "precision",
            Metric::Recall => "recall",
            Metric::F1 => "f1",
            Metric::Coverage => "coverage",
            Metric::IntervalWidth => "interval_width",
            Metric::Divergences => "divergences",
            Metric::FitTime => "fit_time_s",
        }
    }

    pub fn value(self, row: &ResultRow) -> Option<f64> {
        match self {
            Metric::TestMse => row.test_mse,
            Metric::TestRmse => row.test_rmse,
            Metric::CoefL2 => row.coef_l2,
            Metric::CoefMse => row.coef_mse,
            Metric::Precision => row.precision,
            Metric::Recall => row.recall,
            Metric::F1 => row.f1,
            Metric::Coverage => row.coverage,
            Metric::IntervalWidth => row.interval_width,
            Metric::Divergences => row.divergences.map(|d| d as f64),
            Metric::FitTime => row.fit_time_s,
        }
    }
}

/// Group key component. Numbers order by `total_cmp`.
#[derive(Debug, Clone, Copy)]
enum Key {
    Dataset(DatasetKind),
    Model(ModelKind),
    Num(f64),
}

impl PartialEq for Key {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Key {}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Key::Dataset(a), Key::Dataset(b)) => a.cmp(b),
            (Key::Model(a), Key::Model(b)) => a.cmp(b),
            (Key::Num(a), Key::Num(b)) => a.total_cmp(b),
            _ => self.rank().cmp(&other.rank()),
        }
    }
}

impl Key {
    fn rank(&self) -> u8 {
        match self {
            Key::Dataset(_) => 0,
            Key::Model(_) => 1,
            Key::Num(_) => 2,
        }
    }
}

impl fmt::Display for Key {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Key::Dataset(d) => write!(f, "{d}"),
            Key::Model(m) => write!(f, "{m}"),
            Key::Num(v) => write!(f, "{v}"),
        }
    }
}

/// Sample mean and standard deviation (N-1 denominator; 0 for one value).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

impl Stat {
    /// Values are sorted before summation so the result does not depend on
    /// input order. Returns `None` for an empty slice.
    pub fn from_values(values: &[f64]) -> Option<Stat> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        let mean = v.iter().sum::<f64>() / n as f64;
        let std = if n < 2 {
            0.0
        } else {
            let mut sq: Vec<f64> = v.iter().map(|x| (x - mean).powi(2)).collect();
            sq.sort_by(f64::total_cmp);
            (sq.iter().sum::<f64>() / (n - 1) as f64).sqrt()
        };
        Some(Stat { mean, std, n })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    /// Rendered group values, one per axis.
    pub keys: Vec<String>,
    pub runs: usize,
    /// One entry per metric; `None` when no row in the cell has a value.
    pub stats: Vec<Option<Stat>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryTable {
    pub axes: Vec<Axis>,
    pub metrics: Vec<Metric>,
    pub rows: Vec<SummaryRow>,
}

impl SummaryTable {
    pub fn header(&self) -> Vec<String> {
        let mut h: Vec<String> = self.axes.iter().map(|a| a.name().to_string()).collect();
        h.push("runs".into());
        for m in &self.metrics {
            h.push(format!("{}_mean", m.name()));
            h.push(format!("{}_std", m.name()));
        }
        h
    }

    /// Looks up the cell whose rendered keys equal `keys`.
    pub fn cell(&self, keys: &[&str], metric: Metric) -> Option<Stat> {
        let col = self.metrics.iter().position(|m| *m == metric)?;
        self.rows
            .iter()
            .find(|r| r.keys.iter().map(String::as_str).eq(keys.iter().copied()))
            .and_then(|r| r.stats[col])
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let io = |source| Error::Io {
            path: path.to_path_buf(),
            source,
        };
        let mut out = BufWriter::new(File::create(path).map_err(io)?);
        {
            let mut w = csv::Writer::from_writer(&mut out);
            let csv = |source| Error::Csv {
                path: path.to_path_buf(),
                source,
            };
            w.write_record(self.header()).map_err(csv)?;
            for row in &self.rows {
                let mut rec = row.keys.clone();
                rec.push(row.runs.to_string());
                for s in &row.stats {
                    match s {
                        Some(s) => {
                            rec.push(s.mean.to_string());
                            rec.push(s.std.to_string());
                        }
                        None => rec.extend([String::new(), String::new()]),
                    }
                }
                w.write_record(&rec).map_err(csv)?;
            }
            w.flush().map_err(io)?;
        }
        out.flush().map_err(io)
    }
}

/// Groups `rows` by `axes` and summarizes each metric per cell. Cells are
/// ordered by axis values (enum order for names, numeric for numbers).
pub fn aggregate(rows: &[ResultRow], axes: &[Axis], metrics: &[Metric]) -> SummaryTable {
    let mut groups: BTreeMap<Vec<Key>, Vec<&ResultRow>> = BTreeMap::new();
    for row in rows {
        let key = axes.iter().map(|a| a.key(row)).collect();
        groups.entry(key).or_default().push(row);
    }
    let rows = groups
        .into_iter()
        .map(|(key, members)| SummaryRow {
            keys: key.iter().map(Key::to_string).collect(),
            runs: members.len(),
            stats: metrics
                .iter()
                .map(|m| {
                    let values: Vec<f64> = members.iter().filter_map(|r| m.value(r)).collect();
                    Stat::from_values(&values)
                })
                .collect(),
        })
        .collect();
    SummaryTable {
        axes: axes.to_vec(),
        metrics: metrics.to_vec(),
        rows,
    }
}

/// Writes the report tables into `out_dir` (created if needed) and returns
/// the written paths. Synthetic-data tables ignore Diabetes rows.
pub fn write_reports(rows: &[ResultRow], out_dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir).map_err(|source| Error::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let synthetic: Vec<ResultRow> = rows.iter().filter(|r| r.dataset.is_synthetic()).cloned().collect();
    let bayesian: Vec<ResultRow> = synthetic.iter().filter(|r| r.model.is_bayesian()).cloned().collect();
    let diabetes: Vec<ResultRow> = rows.iter().filter(|r| !r.dataset.is_synthetic()).cloned().collect();

    use Metric::*;
    let mut tables = vec![
        (
            REPORT_FILES[0],
            aggregate(
                &synthetic,
                &[Axis::Model],
                &[TestMse, TestRmse, CoefL2, CoefMse, Precision, Recall, F1, FitTime],
            ),
        ),
        (
            REPORT_FILES[1],
            aggregate(&bayesian, &[Axis::Model], &[Coverage, IntervalWidth, Divergences]),
        ),
        (REPORT_FILES[2], aggregate(&synthetic, &[Axis::Model, Axis::Rho], &[TestMse])),
        (REPORT_FILES[3], aggregate(&synthetic, &[Axis::Model, Axis::Snr], &[F1])),
        (REPORT_FILES[4], aggregate(&synthetic, &[Axis::Model, Axis::P], &[FitTime])),
    ];
    if !diabetes.is_empty() {
        tables.push(("diabetes.csv", aggregate(&diabetes, &[Axis::Model], &[TestMse, TestRmse, FitTime])));
    }

    let mut written = Vec::with_capacity(tables.len());
    for (name, table) in tables {
        let path = out_dir.join(name);
        table.write_csv(&path)?;
        written.push(path);
    }
    Ok(written)
}
