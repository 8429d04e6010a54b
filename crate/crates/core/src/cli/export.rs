//! CSV series. Every float is written with 17 significant digits so files
//! parse back to the exact in-memory values.

use std::path::Path;

use super::json::fmt17;
use crate::oracle::{scalar_alpha, scalar_tau, ScalarInstance};
use crate::solvers::{CurveKind, ValueCurve, ValuePoint};

pub const CURVE_HEADER: [&str; 6] = [
    "param",
    "value",
    "bracket_lo",
    "bracket_hi",
    "oracle_value",
    "iterations",
];

#[derive(Debug, thiserror::Error)]
pub enum ExportError {
    #[error("{path}: {source}")]
    Csv { path: String, source: csv::Error },
    #[error("{path}: {message}")]
    Format { path: String, message: String },
}

/// One line of an exported value curve.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveRow {
    pub param: f64,
    pub value: f64,
    pub bracket_lo: f64,
    pub bracket_hi: f64,
    /// Closed-form value, when an oracle applies to the instance.
    pub oracle_value: Option<f64>,
    pub iterations: usize,
}

impl CurveRow {
    pub fn from_point(p: &ValuePoint, oracle_value: Option<f64>) -> Self {
        Self {
            param: p.parameter,
            value: p.value,
            bracket_lo: p.diagnostics.bracket_lo,
            bracket_hi: p.diagnostics.bracket_hi,
            oracle_value,
            iterations: p.diagnostics.iterations,
        }
    }
}

/// Rows of `curve`, with the scalar closed form attached when `oracle` is
/// given and defined at the parameter.
pub fn curve_rows(curve: &ValueCurve, oracle: Option<&ScalarInstance>) -> Vec<CurveRow> {
    curve
        .points
        .iter()
        .map(|p| {
            let exact = oracle.and_then(|inst| match curve.kind {
                CurveKind::Tau => Some(scalar_tau(inst, p.parameter)),
                CurveKind::Alpha => scalar_alpha(inst, p.parameter).ok(),
            });
            CurveRow::from_point(p, exact)
        })
        .collect()
}

pub fn export_curve(
    curve: &ValueCurve,
    oracle: Option<&ScalarInstance>,
    path: &Path,
) -> Result<Vec<CurveRow>, ExportError> {
    let rows = curve_rows(curve, oracle);
    write_curve_rows(&rows, path)?;
    Ok(rows)
}

pub fn write_curve_rows(rows: &[CurveRow], path: &Path) -> Result<(), ExportError> {
    write_table(
        path,
        &CURVE_HEADER,
        rows.iter().map(|r| {
            vec![
                fmt17(r.param),
                fmt17(r.value),
                fmt17(r.bracket_lo),
                fmt17(r.bracket_hi),
                r.oracle_value.map(fmt17).unwrap_or_default(),
                r.iterations.to_string(),
            ]
        }),
    )
}

pub fn parse_curve(path: &Path) -> Result<Vec<CurveRow>, ExportError> {
    let name = path.display().to_string();
    let csv_err = |source| ExportError::Csv {
        path: name.clone(),
        source,
    };
    let bad = |message: String| ExportError::Format {
        path: name.clone(),
        message,
    };
    let mut reader = csv::Reader::from_path(path).map_err(csv_err)?;
    let header = reader.headers().map_err(csv_err)?.clone();
    if header.iter().ne(CURVE_HEADER) {
        return Err(bad(format!("unexpected header {header:?}")));
    }
    let mut rows = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(csv_err)?;
        let float = |i: usize| -> Result<f64, ExportError> {
            record[i].parse().map_err(|_| {
                bad(format!(
                    "row {}: bad {} {:?}",
                    line + 1,
                    CURVE_HEADER[i],
                    &record[i]
                ))
            })
        };
        rows.push(CurveRow {
            param: float(0)?,
            value: float(1)?,
            bracket_lo: float(2)?,
            bracket_hi: float(3)?,
            oracle_value: if record[4].is_empty() {
                None
            } else {
                Some(float(4)?)
            },
            iterations: record[5]
                .parse()
                .map_err(|_| bad(format!("row {}: bad iterations {:?}", line + 1, &record[5])))?,
        });
    }
    Ok(rows)
}

/// Writes a header and pre-formatted rows.
pub fn write_table<I>(path: &Path, header: &[&str], rows: I) -> Result<(), ExportError>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let csv_err = |source| ExportError::Csv {
        path: path.display().to_string(),
        source,
    };
    let mut writer = csv::Writer::from_path(path).map_err(csv_err)?;
    writer.write_record(header).map_err(csv_err)?;
    for row in rows {
        writer.write_record(&row).map_err(csv_err)?;
    }
    writer.flush().map_err(|e| csv_err(e.into()))
}
