//! Sample files.
//!
//! Coefficient CSV: one row per observation, `p` columns, no header.
//! Curve CSV: one row per observation, one column per grid point, with an
//! optional first row `t=<point>,t=<point>,...`; without it the grid is
//! uniform on `[0, 1]`. Floats are written in shortest round-trip form, so a
//! written file reads back bit-identically.

use std::io::{Read, Write};

use nalgebra::DMatrix;

use crate::hilbert::{uniform_grid, BasisDescriptor, FunctionalSample, Projector};
use crate::{Error, Result};

fn parse_err(line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(input)
}

fn parse_number(field: &str, line: u64, column: usize) -> Result<f64> {
    let v: f64 = field.parse().map_err(|_| {
        parse_err(
            line,
            format!("column {}: '{field}' is not a number", column + 1),
        )
    })?;
    if !v.is_finite() {
        return Err(parse_err(
            line,
            format!("column {}: non-finite value", column + 1),
        ));
    }
    Ok(v)
}

struct Table {
    header: Option<Vec<String>>,
    rows: Vec<Vec<f64>>,
}

fn read_table<R: Read>(input: R, allow_header: bool) -> Result<Table> {
    let mut header = None;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for (idx, record) in reader(input).records().enumerate() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map_or(idx as u64 + 1, |p| p.line());
        if record.iter().all(str::is_empty) {
            continue;
        }
        if allow_header
            && header.is_none()
            && rows.is_empty()
            && record.iter().any(|f| f.starts_with("t="))
        {
            header = Some(record.iter().map(str::to_owned).collect());
            width = Some(record.len());
            continue;
        }
        let row = record
            .iter()
            .enumerate()
            .map(|(c, f)| parse_number(f, line, c))
            .collect::<Result<Vec<f64>>>()?;
        match width {
            Some(w) if w != row.len() => {
                return Err(parse_err(
                    line,
                    format!("expected {w} columns, found {}", row.len()),
                ))
            }
            None => width = Some(row.len()),
            _ => {}
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(parse_err(0, "no observations"));
    }
    Ok(Table { header, rows })
}

fn to_matrix(rows: &[Vec<f64>]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), rows[0].len(), |i, j| rows[i][j])
}

/// Reads a coefficient CSV as a sample in the Fourier basis of matching size.
pub fn read_coefficients<R: Read>(input: R) -> Result<FunctionalSample> {
    let table = read_table(input, false)?;
    let p = table.rows[0].len();
    FunctionalSample::new(to_matrix(&table.rows), BasisDescriptor::fourier(p)?)
}

pub fn write_coefficients<W: Write>(sample: &FunctionalSample, out: W) -> Result<()> {
    write_rows(sample.coeffs(), None, out)
}

/// Grid and `n x m` values of a curve CSV.
pub fn read_curves<R: Read>(input: R) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let table = read_table(input, true)?;
    let m = table.rows[0].len();
    let grid = match &table.header {
        Some(fields) => fields
            .iter()
            .enumerate()
            .map(|(c, f)| {
                let raw = f.strip_prefix("t=").ok_or_else(|| {
                    parse_err(1, format!("column {}: header must read t=<point>", c + 1))
                })?;
                parse_number(raw, 1, c)
            })
            .collect::<Result<Vec<f64>>>()?,
        None => uniform_grid(m),
    };
    Ok((grid, to_matrix(&table.rows)))
}

/// Reads a curve CSV and projects it onto `basis`.
pub fn read_curves_projected<R: Read>(
    input: R,
    basis: BasisDescriptor,
) -> Result<FunctionalSample> {
    let (grid, values) = read_curves(input)?;
    Projector::new(basis, &grid)?.project_rows(&values)
}

pub fn write_curves<W: Write>(grid: &[f64], values: &DMatrix<f64>, out: W) -> Result<()> {
    if grid.len() != values.ncols() {
        return Err(Error::Dimension {
            expected: grid.len(),
            got: values.ncols(),
        });
    }
    let header: Vec<String> = grid.iter().map(|t| format!("t={t}")).collect();
    write_rows(values, Some(header), out)
}

/// Evaluates every observation of `sample` on `grid`.
pub fn sample_on_grid(sample: &FunctionalSample, grid: &[f64]) -> DMatrix<f64> {
    sample.coeffs() * sample.basis().evaluation_matrix(grid).transpose()
}

fn write_rows<W: Write>(values: &DMatrix<f64>, header: Option<Vec<String>>, out: W) -> Result<()> {
    let mut writer = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(out);
    if let Some(h) = header {
        writer.write_record(&h)?;
    }
    for row in values.row_iter() {
        writer.write_record(row.iter().map(|v| v.to_string()))?;
    }
    writer.flush()?;
    Ok(())
}
