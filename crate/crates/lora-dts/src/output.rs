//! Result tables: CSV (stable schema) and JSON.
//!
//! CSV columns, in order:
//!
//! | column | meaning |
//! |---|---|
//! | `sf`, `ldro`, `bandwidth_hz` | modem |
//! | `estimator` | `none`, `genie`, `point`, `linear`, `midamble-point`, `midamble-linear` |
//! | `t_start_s` | pass time of the frame start, 0 at zenith |
//! | `esn0_db`, `snr_db` | noise level, empty when noiseless |
//! | `payload_bits`, `cr`, `n_up`, `n_dw`, `n_int` | frame layout |
//! | `trials`, `seed` | frames simulated, master seed |
//! | `errors`, `total` | data symbol errors and data symbols, midambles excluded |
//! | `ser`, `ci_lo`, `ci_hi` | error rate and Wilson 95% interval |
//! | `status` | `ok`, or the error that stopped the cell |
//!
//! Count and rate columns are empty for failed cells. JSON rows carry the
//! same fields plus `wall_time_s`, which is kept out of the CSV so that
//! repeated runs produce identical files.

use std::io::{Read, Write};

use lora_dts_core::{EstimatorKind, ScenarioConfig};
use serde::{Deserialize, Serialize};

use crate::sweep::CellResult;

pub const CSV_COLUMNS: [&str; 20] = [
    "sf",
    "ldro",
    "bandwidth_hz",
    "estimator",
    "t_start_s",
    "esn0_db",
    "snr_db",
    "payload_bits",
    "cr",
    "n_up",
    "n_dw",
    "n_int",
    "trials",
    "seed",
    "errors",
    "total",
    "ser",
    "ci_lo",
    "ci_hi",
    "status",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub sf: u8,
    pub ldro: bool,
    pub bandwidth_hz: f64,
    pub estimator: EstimatorKind,
    pub t_start_s: f64,
    pub esn0_db: Option<f64>,
    pub snr_db: Option<f64>,
    pub payload_bits: usize,
    pub cr: u8,
    pub n_up: usize,
    pub n_dw: usize,
    pub n_int: usize,
    pub trials: u64,
    pub seed: u64,
    pub errors: Option<u64>,
    pub total: Option<u64>,
    pub ser: Option<f64>,
    pub ci_lo: Option<f64>,
    pub ci_hi: Option<f64>,
    pub status: String,
}

impl ResultRow {
    pub fn from_scenario(sc: &ScenarioConfig) -> Self {
        Self {
            sf: sc.modem.sf(),
            ldro: sc.modem.ldro(),
            bandwidth_hz: sc.modem.bandwidth_hz(),
            estimator: sc.estimator,
            t_start_s: sc.t_start_s,
            esn0_db: sc.noise.esn0_db(&sc.modem),
            snr_db: sc.noise.snr_db(&sc.modem),
            payload_bits: sc.payload_bits,
            cr: sc.cr,
            n_up: sc.n_up,
            n_dw: sc.n_dw,
            n_int: sc.n_int,
            trials: sc.trials,
            seed: sc.master_seed,
            errors: None,
            total: None,
            ser: None,
            ci_lo: None,
            ci_hi: None,
            status: String::new(),
        }
    }

    pub fn from_cell(cell: &CellResult) -> Self {
        let row = Self::from_scenario(&cell.scenario);
        match &cell.result {
            Ok(p) => Self {
                errors: Some(p.symbol_errors),
                total: Some(p.symbols_total),
                ser: Some(p.ser),
                ci_lo: Some(p.ci_lo),
                ci_hi: Some(p.ci_hi),
                status: "ok".into(),
                ..row
            },
            Err(e) => Self {
                status: format!("error: {e}"),
                ..row
            },
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct JsonRow {
    #[serde(flatten)]
    pub row: ResultRow,
    pub wall_time_s: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct JsonReport<'a> {
    pub generator: &'static str,
    pub version: &'static str,
    pub columns: &'static [&'static str],
    pub cells: Vec<JsonRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config: Option<&'a str>,
}

pub fn rows(results: &[CellResult]) -> Vec<ResultRow> {
    results.iter().map(ResultRow::from_cell).collect()
}

pub fn write_csv<W: Write>(out: W, rows: &[ResultRow]) -> Result<(), csv::Error> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<ResultRow>, csv::Error> {
    let mut r = csv::Reader::from_reader(input);
    let headers = r.headers()?.clone();
    if headers.iter().ne(CSV_COLUMNS.iter().copied()) {
        return Err(csv::Error::from(std::io::Error::new(
            std::io::ErrorKind::InvalidData,
            format!("unexpected CSV header: {}", headers.iter().collect::<Vec<_>>().join(",")),
        )));
    }
    r.deserialize().collect()
}

/// `config` is echoed verbatim when given.
pub fn write_json<W: Write>(out: W, results: &[CellResult], config: Option<&str>) -> serde_json::Result<()> {
    let report = JsonReport {
        generator: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        columns: &CSV_COLUMNS,
        cells: results
            .iter()
            .map(|c| JsonRow {
                row: ResultRow::from_cell(c),
                wall_time_s: c.result.as_ref().ok().map(|p| p.wall_time_s),
            })
            .collect(),
        config,
    };
    serde_json::to_writer_pretty(out, &report)
}
