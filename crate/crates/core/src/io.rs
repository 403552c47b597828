//! Headerless CSV matrices and vectors, support lists, and number formatting.
//!
//! Matrices are row-major, comma separated, one row per line. Values are written with
//! 17 significant digits so they round-trip exactly.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::{Error, Matrix, Result, Vector};

/// Fixed-width scientific notation with 17 significant digits.
pub fn format_number(v: f64) -> String {
    format!("{v:.16e}")
}

/// Parses a headerless CSV document into a dense matrix.
pub fn parse_matrix_csv(data: &[u8]) -> Result<Matrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(false)
        .from_reader(data);
    let mut values = Vec::new();
    let mut cols = 0;
    let mut rows = 0;
    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Parse {
            record: r + 1,
            message: e.to_string(),
        })?;
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        if rows == 0 {
            cols = record.len();
        }
        for field in record.iter() {
            let v: f64 = field.parse().map_err(|_| Error::Parse {
                record: r + 1,
                message: format!("not a number: {field:?}"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    record: r + 1,
                    message: format!("non-finite value {field:?}"),
                });
            }
            values.push(v);
        }
        rows += 1;
    }
    if rows == 0 || cols == 0 {
        return Err(Error::Parse {
            record: 0,
            message: "empty matrix".into(),
        });
    }
    Ok(Matrix::from_row_slice(rows, cols, &values))
}

/// Parses a vector stored either as one column or as one row.
pub fn parse_vector_csv(data: &[u8]) -> Result<Vector> {
    let m = parse_matrix_csv(data)?;
    if m.ncols() == 1 {
        Ok(m.column(0).into_owned())
    } else if m.nrows() == 1 {
        Ok(m.row(0).transpose())
    } else {
        Err(Error::Parse {
            record: 0,
            message: format!("expected a single row or column, got {}x{}", m.nrows(), m.ncols()),
        })
    }
}

pub fn read_matrix_csv(path: &Path) -> Result<Matrix> {
    parse_matrix_csv(&fs::read(path)?)
}

pub fn read_vector_csv(path: &Path) -> Result<Vector> {
    parse_vector_csv(&fs::read(path)?)
}

pub fn matrix_to_csv(m: &Matrix) -> String {
    let mut out = String::new();
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format_number(m[(i, j)])).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// One value per line.
pub fn vector_to_csv(v: &Vector) -> String {
    v.iter().map(|x| format_number(*x) + "\n").collect()
}

pub fn write_matrix_csv(path: &Path, m: &Matrix) -> Result<()> {
    fs::File::create(path)?.write_all(matrix_to_csv(m).as_bytes())?;
    Ok(())
}

pub fn write_vector_csv(path: &Path, v: &Vector) -> Result<()> {
    fs::File::create(path)?.write_all(vector_to_csv(v).as_bytes())?;
    Ok(())
}

/// Parses a one-based index list such as `"1, 4, 7"` or `"2-5,9"` into sorted zero-based indices.
pub fn parse_support(text: &str) -> Result<Vec<usize>> {
    let bad = |message: String| Error::InvalidSupport(message);
    let parse_index = |tok: &str| -> Result<usize> {
        let idx: usize = tok
            .trim()
            .parse()
            .map_err(|_| bad(format!("not an index: {tok:?}")))?;
        if idx == 0 {
            return Err(bad("indices are one-based".into()));
        }
        Ok(idx - 1)
    };
    let mut out = Vec::new();
    for part in text.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        if let Some((lo, hi)) = part.split_once('-') {
            let (lo, hi) = (parse_index(lo)?, parse_index(hi)?);
            if lo > hi {
                return Err(bad(format!("empty range {part:?}")));
            }
            if hi - lo > 1 << 20 {
                return Err(bad(format!("range too large {part:?}")));
            }
            out.extend(lo..=hi);
        } else {
            out.push(parse_index(part)?);
        }
    }
    if out.is_empty() {
        return Err(bad("no indices given".into()));
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}
