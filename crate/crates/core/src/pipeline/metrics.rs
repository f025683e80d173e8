use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::run::PipelineReport;
use crate::error::{Error, Result};

pub const METRICS_HEADER: [&str; 10] = [
    "id",
    "accuracy",
    "gap",
    "infeas_rate",
    "time_factor",
    "status",
    "fixed_accuracy",
    "fixed",
    "repairs",
    "fallbacks",
];

/// Columns that depend on wall-clock time.
pub const TIMING_COLUMNS: [&str; 1] = ["time_factor"];

/// One CSV row per instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub id: u64,
    pub accuracy: f64,
    pub gap: Option<f64>,
    /// 1 when the rounded prediction had no feasible completion.
    pub infeas_rate: f64,
    pub time_factor: f64,
    pub status: String,
    pub fixed_accuracy: Option<f64>,
    pub fixed: usize,
    pub repairs: usize,
    pub fallbacks: usize,
}

impl From<&PipelineReport> for MetricsRow {
    fn from(r: &PipelineReport) -> Self {
        Self {
            id: r.id,
            accuracy: r.accuracy,
            gap: r.gap,
            infeas_rate: f64::from(u8::from(r.infeasible_before_repair)),
            time_factor: r.time_factor(),
            status: r.status.as_str().to_string(),
            fixed_accuracy: r.fixed_accuracy,
            fixed: r.fixed,
            repairs: r.repairs,
            fallbacks: r.fallbacks,
        }
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Format(format!("metrics csv: {e}"))
}

/// Rows sorted by id; missing values are empty cells.
pub fn metrics_to_csv(rows: &[MetricsRow]) -> Result<String> {
    let mut sorted = rows.to_vec();
    sorted.sort_by_key(|r| r.id);
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in &sorted {
        w.serialize(r).map_err(csv_err)?;
    }
    if sorted.is_empty() {
        w.write_record(METRICS_HEADER).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Format(e.to_string()))
}

pub fn metrics_from_csv(text: &str) -> Result<Vec<MetricsRow>> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let header = rdr.headers().map_err(csv_err)?.clone();
    if header.iter().ne(METRICS_HEADER) {
        return Err(Error::Format(format!(
            "metrics header must be {}",
            METRICS_HEADER.join(",")
        )));
    }
    rdr.deserialize().map(|r| r.map_err(csv_err)).collect()
}

/// The CSV with the timing columns removed, for reproducibility checks.
pub fn strip_timing(text: &str) -> Result<String> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let header = rdr.headers().map_err(csv_err)?.clone();
    let keep: Vec<usize> = (0..header.len())
        .filter(|&k| !TIMING_COLUMNS.contains(&&header[k]))
        .collect();
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(keep.iter().map(|&k| &header[k])).map_err(csv_err)?;
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        w.write_record(keep.iter().map(|&k| &rec[k])).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Format(e.to_string()))
}

/// Median of the values, averaging the middle pair for even counts.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { (v[m - 1] + v[m]) / 2.0 })
}

fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub accuracy: Option<f64>,
    pub gap: Option<f64>,
    pub infeas_rate: Option<f64>,
    pub fixed_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingStats {
    pub median_time_factor: Option<f64>,
    pub mean_time_factor: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub count: usize,
    pub status: BTreeMap<String, usize>,
    pub median: Stats,
    pub mean: Stats,
    /// Kept apart from the rest because it depends on wall-clock time.
    pub timing: TimingStats,
}

pub fn summarize(rows: &[MetricsRow]) -> Summary {
    let col = |f: &dyn Fn(&MetricsRow) -> Option<f64>| -> Vec<f64> { rows.iter().filter_map(f).collect() };
    let acc = col(&|r| Some(r.accuracy));
    let gap = col(&|r| r.gap);
    let inf = col(&|r| Some(r.infeas_rate));
    let fixed = col(&|r| r.fixed_accuracy);
    let tf = col(&|r| Some(r.time_factor));
    let mut status = BTreeMap::new();
    for r in rows {
        *status.entry(r.status.clone()).or_insert(0) += 1;
    }
    let stats = |f: fn(&[f64]) -> Option<f64>| Stats {
        accuracy: f(&acc),
        gap: f(&gap),
        infeas_rate: f(&inf),
        fixed_accuracy: f(&fixed),
    };
    Summary {
        count: rows.len(),
        status,
        median: stats(median),
        mean: stats(mean),
        timing: TimingStats {
            median_time_factor: median(&tf),
            mean_time_factor: mean(&tf),
        },
    }
}
