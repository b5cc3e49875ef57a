use std::fs::{File, OpenOptions};
use std::path::Path;

use crate::schemes::SchemeId;
use crate::wmmse::SolveReport;
use crate::{Error, Result};

use super::SweepAxis;

pub const CSV_HEADER: [&str; 12] = [
    "seed",
    "scheme",
    "axis",
    "axis_value",
    "sum_rate_nats",
    "sum_rate_bits",
    "user_rates_nats",
    "it_margins",
    "iterations",
    "feasible",
    "failed",
    "error",
];

/// One CSV row. List-valued fields are `;`-separated. Interference margins
/// are `1 - IT_p/γ_p`, non-negative when the constraint holds.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRecord {
    pub seed: u64,
    pub scheme: SchemeId,
    pub axis: SweepAxis,
    pub axis_value: f64,
    pub sum_rate_nats: f64,
    pub sum_rate_bits: f64,
    pub user_rates_nats: Vec<f64>,
    pub it_margins: Vec<f64>,
    pub iterations: usize,
    pub feasible: bool,
    pub failed: bool,
    pub error: String,
}

impl ResultRecord {
    pub fn from_report(seed: u64, scheme: SchemeId, axis: SweepAxis, axis_value: f64, rep: &SolveReport) -> Self {
        Self {
            seed,
            scheme,
            axis,
            axis_value,
            sum_rate_nats: rep.sum_rate(),
            sum_rate_bits: rep.sum_rate() / std::f64::consts::LN_2,
            user_rates_nats: rep.rates.rates.clone(),
            it_margins: rep.it_margins.clone(),
            iterations: rep.iterations,
            feasible: rep.feasibility.is_feasible(),
            failed: false,
            error: String::new(),
        }
    }

    pub fn failure(seed: u64, scheme: SchemeId, axis: SweepAxis, axis_value: f64, err: &Error) -> Self {
        Self {
            seed,
            scheme,
            axis,
            axis_value,
            sum_rate_nats: f64::NAN,
            sum_rate_bits: f64::NAN,
            user_rates_nats: Vec::new(),
            it_margins: Vec::new(),
            iterations: 0,
            feasible: false,
            failed: true,
            error: err.to_string(),
        }
    }

    fn to_row(&self) -> Vec<String> {
        vec![
            self.seed.to_string(),
            self.scheme.to_string(),
            self.axis.to_string(),
            self.axis_value.to_string(),
            self.sum_rate_nats.to_string(),
            self.sum_rate_bits.to_string(),
            join(&self.user_rates_nats),
            join(&self.it_margins),
            self.iterations.to_string(),
            self.feasible.to_string(),
            self.failed.to_string(),
            self.error.clone(),
        ]
    }

    fn from_row(row: &csv::StringRecord) -> Result<Self> {
        if row.len() != CSV_HEADER.len() {
            return Err(Error::Parse(format!("expected {} columns, got {}", CSV_HEADER.len(), row.len())));
        }
        let num = |i: usize| -> Result<f64> {
            row[i]
                .parse()
                .map_err(|_| Error::Parse(format!("column {}: `{}` is not a number", CSV_HEADER[i], &row[i])))
        };
        let flag = |i: usize| -> Result<bool> {
            row[i]
                .parse()
                .map_err(|_| Error::Parse(format!("column {}: `{}` is not a boolean", CSV_HEADER[i], &row[i])))
        };
        Ok(Self {
            seed: row[0].parse().map_err(|_| Error::Parse(format!("bad seed `{}`", &row[0])))?,
            scheme: row[1].parse()?,
            axis: row[2].parse()?,
            axis_value: num(3)?,
            sum_rate_nats: num(4)?,
            sum_rate_bits: num(5)?,
            user_rates_nats: split(&row[6])?,
            it_margins: split(&row[7])?,
            iterations: row[8]
                .parse()
                .map_err(|_| Error::Parse(format!("bad iteration count `{}`", &row[8])))?,
            feasible: flag(9)?,
            failed: flag(10)?,
            error: row[11].to_string(),
        })
    }
}

fn join(v: &[f64]) -> String {
    v.iter().map(f64::to_string).collect::<Vec<_>>().join(";")
}

fn split(s: &str) -> Result<Vec<f64>> {
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(';')
        .map(|t| t.parse().map_err(|_| Error::Parse(format!("`{t}` is not a number"))))
        .collect()
}

/// Appends `records` to `path`, writing the header first if the file is new
/// or empty. The file is flushed before returning.
pub fn write_results(path: &Path, records: &[ResultRecord]) -> Result<()> {
    let file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    let fresh = file.metadata().map_err(|e| Error::io(path, e))?.len() == 0;
    let mut w = csv::Writer::from_writer(file);
    let csv_err = |e: csv::Error| Error::Parse(format!("{}: {e}", path.display()));
    if fresh {
        w.write_record(CSV_HEADER).map_err(csv_err)?;
    }
    for r in records {
        w.write_record(r.to_row()).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_results(path: &Path) -> Result<Vec<ResultRecord>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::Reader::from_reader(file);
    let header = r
        .headers()
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    if header.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(Error::Parse(format!("{}: unexpected CSV header", path.display())));
    }
    r.records()
        .map(|row| {
            let row = row.map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
            ResultRecord::from_row(&row)
        })
        .collect()
}
