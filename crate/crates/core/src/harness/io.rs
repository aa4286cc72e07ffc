use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::ResultRow;
use crate::error::{Error, Result};

pub const CSV_HEADER: &str = "dataset,model,rho,snr,p,seed,test_mse,test_rmse,coef_l2,coef_mse,precision,recall,f1,coverage,interval_width,chosen_lambda,chosen_alpha,divergences,fit_time_s,error";

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> Error + '_ {
    move |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes rows in the given order. `None` fields become empty cells; an
/// empty slice still produces the header line.
pub fn persist(rows: &[ResultRow], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut out = BufWriter::new(file);
    writeln!(out, "{CSV_HEADER}").map_err(io_err(path))?;
    {
        let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(&mut out);
        for row in rows {
            writer.serialize(row).map_err(csv_err(path))?;
        }
        writer.flush().map_err(io_err(path))?;
    }
    out.flush().map_err(io_err(path))
}

pub fn load(path: &Path) -> Result<Vec<ResultRow>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(csv_err(path))?;
    let header = reader.headers().map_err(csv_err(path))?.iter().collect::<Vec<_>>().join(",");
    if header != CSV_HEADER {
        return Err(Error::Schema {
            path: path.to_path_buf(),
            message: format!("unexpected header '{header}'"),
        });
    }
    reader
        .deserialize()
        .collect::<std::result::Result<Vec<ResultRow>, _>>()
        .map_err(csv_err(path))
}
