use std::collections::HashMap;
use std::io::{Read, Write};

use super::{SimError, Trajectory};

/// Writes `t, <id>.x<k>.., <id>.u<k>.., <id>.rho, <id>.lower, <id>.upper`
/// with 17 significant digits and LF line endings.
///
/// `stride` keeps every `stride`-th grid row (the last row is always kept).
pub fn write_csv<W: Write>(traj: &Trajectory, out: W, stride: usize) -> Result<(), SimError> {
    let stride = stride.max(1);
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    let mut header = vec!["t".to_string()];
    for (k, id) in traj.ids().iter().enumerate() {
        let (n, m) = traj.dims(k);
        header.extend((0..n).map(|i| format!("{id}.x{i}")));
        header.extend((0..m).map(|i| format!("{id}.u{i}")));
        header.extend(["rho", "lower", "upper"].map(|c| format!("{id}.{c}")));
    }
    w.write_record(&header)?;

    let last = traj.len() - 1;
    let rows = (0..traj.len()).filter(|s| s % stride == 0 || *s == last);
    let mut record: Vec<String> = Vec::with_capacity(header.len());
    for step in rows {
        record.clear();
        record.push(format!("{:.16e}", traj.times()[step]));
        for k in 0..traj.ids().len() {
            let (lower, upper) = traj.envelope(k, step);
            let tail = [traj.rho(k).values()[step], lower, upper];
            let values = traj
                .state(k, step)
                .iter()
                .chain(traj.input(k, step))
                .chain(&tail);
            record.extend(values.map(|v| format!("{v:.16e}")));
        }
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

/// Column-oriented numeric CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    headers: Vec<String>,
    columns: Vec<Vec<f64>>,
    lookup: HashMap<String, usize>,
}

impl CsvTable {
    pub fn headers(&self) -> &[String] {
        &self.headers
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.lookup.get(name).map(|&k| self.columns[k].as_slice())
    }

    pub fn rows(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }
}

pub fn read_csv<R: Read>(input: R) -> Result<CsvTable, SimError> {
    let mut r = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(input);
    let headers: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if headers.iter().all(String::is_empty) {
        return Err(SimError::Csv("empty file".into()));
    }
    let mut columns = vec![Vec::new(); headers.len()];
    for (row, record) in r.records().enumerate() {
        let record = record?;
        for (col, (cell, column)) in record.iter().zip(&mut columns).enumerate() {
            let v: f64 = cell.parse().map_err(|_| {
                SimError::Csv(format!("row {}: column {col}: bad number `{cell}`", row + 2))
            })?;
            column.push(v);
        }
    }
    let lookup = headers.iter().enumerate().map(|(k, h)| (h.clone(), k)).collect();
    Ok(CsvTable {
        headers,
        columns,
        lookup,
    })
}
