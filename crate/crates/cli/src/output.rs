//! CSV and JSON writers.
//!
//! Numbers are written with 17 significant digits so they read back to the
//! same double; undefined values are written as `nan`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use csv::Writer;
use econflow_core::hydro::{FluidState, MomentSet};
use econflow_core::kinetic::TransactionRecord;
use econflow_core::reduced::{ReducedState, TimeSeries};
use serde::Serialize;

use crate::error::CliError;

pub fn number(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{x:.16e}")
    }
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => CliError::io(path, io),
        other => CliError::Input {
            path: path.to_path_buf(),
            message: format!("{other:?}"),
        },
    }
}

/// Header-first CSV writer over string fields.
pub struct Table {
    writer: Writer<File>,
    path: std::path::PathBuf,
}

impl Table {
    pub fn create(path: &Path, header: &[String]) -> Result<Self, CliError> {
        let mut writer = Writer::from_path(path).map_err(|e| csv_error(path, e))?;
        writer.write_record(header).map_err(|e| csv_error(path, e))?;
        Ok(Self {
            writer,
            path: path.to_path_buf(),
        })
    }

    pub fn row(&mut self, values: impl IntoIterator<Item = f64>) -> Result<(), CliError> {
        let fields: Vec<String> = values.into_iter().map(number).collect();
        self.writer.write_record(&fields).map_err(|e| csv_error(&self.path, e))
    }

    pub fn raw_row(&mut self, fields: &[String]) -> Result<(), CliError> {
        self.writer.write_record(fields).map_err(|e| csv_error(&self.path, e))
    }

    pub fn finish(mut self) -> Result<(), CliError> {
        self.writer.flush().map_err(|e| CliError::io(&self.path, e))
    }
}

/// `time, C, LR, MC, ML` and the twelve per-axis moments.
pub fn reduced_header(n: usize) -> Vec<String> {
    let mut h = vec!["time".to_string()];
    h.extend(ReducedState::labels(n));
    h
}

/// [`reduced_header`] followed by mean risks and the hydro diagnostics.
pub fn moment_header(n: usize) -> Vec<String> {
    let mut h = reduced_header(n);
    h.extend((1..=n).map(|i| format!("X_C_{i}")));
    h.extend((1..=n).map(|i| format!("X_L_{i}")));
    h.extend(["boundary_flux", "min_CL", "closure_drift"].map(String::from));
    h
}

pub fn reduced_row(s: &ReducedState) -> Vec<f64> {
    let mut r = vec![s.time];
    r.extend(s.to_vector());
    r
}

pub fn moment_row(m: &MomentSet) -> Vec<f64> {
    let n = m.axes.len();
    let mut r = vec![m.time, m.credit, m.repayment, m.cum_credit, m.cum_repayment];
    for a in &m.axes {
        r.extend(a.to_array());
    }
    let risk = |v: &Option<Vec<f64>>| v.clone().unwrap_or_else(|| vec![f64::NAN; n]);
    r.extend(risk(&m.credit_mean_risk));
    r.extend(risk(&m.loan_mean_risk));
    r.extend([m.boundary_flux, m.min_credit, m.closure_drift]);
    r
}

pub fn write_moments(path: &Path, n: usize, rows: &[MomentSet]) -> Result<(), CliError> {
    let mut t = Table::create(path, &moment_header(n))?;
    for m in rows {
        t.row(moment_row(m))?;
    }
    t.finish()
}

pub fn write_reduced(path: &Path, n: usize, rows: &[ReducedState]) -> Result<(), CliError> {
    let mut t = Table::create(path, &reduced_header(n))?;
    for s in rows {
        t.row(reduced_row(s))?;
    }
    t.finish()
}

/// One row per cell: index, pair-space coordinates and every field value.
pub fn write_snapshot(path: &Path, state: &FluidState) -> Result<(), CliError> {
    let grid = state.grid();
    let n = grid.risks();
    let side = |prefix: &str| -> Vec<String> {
        (1..=n)
            .map(|i| format!("{prefix}x{i}"))
            .chain((1..=n).map(|i| format!("{prefix}y{i}")))
            .collect()
    };
    let mut header = vec!["cell".to_string()];
    header.extend(side(""));
    header.extend(["CL", "LR"].map(String::from));
    for p in ["P_", "D_", "EC_", "ER_"] {
        header.extend(side(p));
    }
    let mut t = Table::create(path, &header)?;
    let vectors = [
        &state.credit_impulse,
        &state.repayment_impulse,
        &state.credit_energy,
        &state.repayment_energy,
    ];
    for c in 0..grid.cell_count() {
        let mut fields = vec![c.to_string()];
        let mut vals: Vec<f64> = (0..grid.axes()).map(|a| grid.coordinate(c, a)).collect();
        vals.push(state.credit.values()[c]);
        vals.push(state.repayment.values()[c]);
        for v in vectors {
            vals.extend(v.components().iter().map(|f| f.values()[c]));
        }
        fields.extend(vals.into_iter().map(number));
        t.raw_row(&fields)?;
    }
    t.finish()
}

pub fn write_transactions<'a>(
    path: &Path,
    records: impl IntoIterator<Item = &'a TransactionRecord>,
) -> Result<(), CliError> {
    let header = ["time", "creditor_id", "borrower_id", "amount"].map(String::from);
    let mut t = Table::create(path, &header)?;
    for r in records {
        t.raw_row(&[
            number(r.time),
            r.creditor_id.to_string(),
            r.borrower_id.to_string(),
            number(r.amount),
        ])?;
    }
    t.finish()
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| CliError::Input {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    w.write_all(b"\n")
        .and_then(|_| w.flush())
        .map_err(|e| CliError::io(path, e))
}

/// Reads the `time` column and `column` from a CSV with a header row.
pub fn read_series(path: &Path, column: &str) -> Result<TimeSeries, CliError> {
    let input = |message: String| CliError::Input {
        path: path.to_path_buf(),
        message,
    };
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| input(format!("no column named `{name}`")))
    };
    let (ti, vi) = (find("time")?, find(column)?);
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (row, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let parse = |i: usize| -> Result<f64, CliError> {
            let s = rec.get(i).unwrap_or("").trim();
            s.parse::<f64>()
                .map_err(|_| input(format!("data row {}: `{s}` is not a number", row + 1)))
        };
        times.push(parse(ti)?);
        values.push(parse(vi)?);
    }
    TimeSeries::new(times, values).map_err(|e| input(e.to_string()))
}
