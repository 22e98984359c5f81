//! CSV tables and the JSON metadata sidecar.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::ml_costs::Method;

use super::config::RunConfig;
use super::CliError;

pub const RESULT_COLUMNS: [&str; 10] =
    ["method", "snr_db", "p_res_pred", "p_res_err", "p_res_emp", "ci_lo", "ci_hi", "mse_pred", "mse_emp", "L_minima"];

/// One `(method, SNR)` line of a result table; absent quantities are empty cells.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub method: Method,
    pub snr_db: f64,
    pub p_res_pred: Option<f64>,
    pub p_res_err: Option<f64>,
    pub p_res_emp: Option<f64>,
    pub ci_lo: Option<f64>,
    pub ci_hi: Option<f64>,
    pub mse_pred: Option<f64>,
    pub mse_emp: Option<f64>,
    #[serde(rename = "L_minima")]
    pub l_minima: Option<usize>,
}

impl ResultRow {
    pub fn empty(method: Method, snr_db: f64) -> Self {
        Self {
            method,
            snr_db,
            p_res_pred: None,
            p_res_err: None,
            p_res_emp: None,
            ci_lo: None,
            ci_hi: None,
            mse_pred: None,
            mse_emp: None,
            l_minima: None,
        }
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

/// Floats are written in shortest round-trip form, so re-reading is exact.
pub fn write_results_csv(path: &Path, rows: &[ResultRow]) -> Result<(), CliError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path).map_err(|e| io_err(path, e))?;
    w.write_record(RESULT_COLUMNS).map_err(|e| io_err(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

pub fn read_results_csv(path: &Path) -> Result<Vec<ResultRow>, CliError> {
    let mut rd = csv::Reader::from_path(path).map_err(|e| io_err(path, e))?;
    let headers = rd.headers().map_err(|e| io_err(path, e))?.clone();
    if headers.iter().ne(RESULT_COLUMNS) {
        return Err(io_err(path, format!("unexpected header {headers:?}")));
    }
    rd.deserialize().collect::<Result<Vec<ResultRow>, _>>().map_err(|e| io_err(path, e))
}

/// One local minimum of the deterministic cost surface.
#[derive(Clone, Debug, PartialEq)]
pub struct MinimaRow {
    pub method: Method,
    pub snr_db: f64,
    pub rank: usize,
    pub cost: f64,
    pub is_truth: bool,
    pub theta: Vec<f64>,
}

pub fn write_minima_csv(path: &Path, k: usize, rows: &[MinimaRow]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    let mut header: Vec<String> = ["method", "snr_db", "rank", "cost", "is_truth"].map(String::from).to_vec();
    header.extend((1..=k).map(|i| format!("theta_{i}")));
    w.write_record(&header).map_err(|e| io_err(path, e))?;
    for r in rows {
        let mut rec = vec![r.method.to_string(), r.snr_db.to_string(), r.rank.to_string(), r.cost.to_string()];
        rec.push(r.is_truth.to_string());
        rec.extend(r.theta.iter().map(f64::to_string));
        w.write_record(&rec).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RowTiming {
    pub label: String,
    pub seconds: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Metadata {
    pub command: String,
    pub version: String,
    pub seed: u64,
    pub threads: usize,
    pub config: RunConfig,
    pub total_seconds: f64,
    pub timings: Vec<RowTiming>,
}

impl Metadata {
    pub fn new(command: &str, seed: u64, config: &RunConfig) -> Self {
        Self {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            threads: rayon::current_num_threads(),
            config: config.clone(),
            total_seconds: 0.0,
            timings: Vec::new(),
        }
    }
}

pub fn write_metadata(path: &Path, meta: &Metadata) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(meta).map_err(|e| io_err(path, e))?;
    std::fs::write(path, text + "\n").map_err(|e| io_err(path, e))
}

/// `<dir>/<command>.csv` and `<dir>/<command>.meta.json`.
pub fn output_paths(dir: &Path, command: &str) -> (PathBuf, PathBuf) {
    (dir.join(format!("{command}.csv")), dir.join(format!("{command}.meta.json")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn csv_round_trip_is_exact(
            snr in -50.0f64..50.0,
            p in 0.0f64..1.0,
            err in proptest::option::of(1e-12f64..1e-2),
            mse in proptest::option::of(1e-9f64..1e3),
            l in proptest::option::of(0usize..40),
        ) {
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("t.csv");
            let row = ResultRow {
                p_res_pred: Some(p),
                p_res_err: err,
                mse_emp: mse,
                ci_lo: Some(p / 3.0),
                l_minima: l,
                ..ResultRow::empty(Method::Uml, snr)
            };
            write_results_csv(&path, std::slice::from_ref(&row)).unwrap();
            let back = read_results_csv(&path).unwrap();
            prop_assert_eq!(back, vec![row]);
        }
    }

    #[test]
    fn header_matches_schema() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        write_results_csv(&path, &[ResultRow::empty(Method::Cml, 0.0)]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), RESULT_COLUMNS.join(","));
        assert_eq!(lines.next().unwrap(), "CML,0.0,,,,,,,,");
    }

    #[test]
    fn empty_table_still_has_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        write_results_csv(&path, &[]).unwrap();
        assert!(read_results_csv(&path).unwrap().is_empty());
    }
}
