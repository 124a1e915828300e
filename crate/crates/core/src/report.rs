//! Tabular experiment output with CSV and JSON emitters.

use std::fmt::Write as _;

use serde::Serialize;

use crate::numerics::{DecayFit, LogReal};

/// One row: parameters, computed and reference values (natural logs of
/// magnitudes) and the log of their difference.
#[derive(Clone, Debug, Serialize)]
pub struct ReportRow {
    pub params: Vec<f64>,
    pub computed_log: f64,
    pub reference_log: f64,
    pub log_error: f64,
    /// Which oracle produced the reference column.
    pub oracle: String,
}

impl ReportRow {
    pub fn new(params: Vec<f64>, computed: &LogReal, reference: &LogReal, error: &LogReal, oracle: &str) -> Self {
        ReportRow {
            params,
            computed_log: computed.ln_abs_f64(),
            reference_log: reference.ln_abs_f64(),
            log_error: error.ln_abs_f64(),
            oracle: oracle.to_string(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub param_names: Vec<String>,
    pub rows: Vec<ReportRow>,
    pub fit: Option<DecayFit>,
    pub notes: Vec<String>,
}

fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.17e}")
    }
}

impl ExperimentReport {
    pub fn new(experiment: &str, param_names: &[&str]) -> Self {
        ExperimentReport {
            experiment: experiment.to_string(),
            param_names: param_names.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
            fit: None,
            notes: Vec::new(),
        }
    }

    pub fn push(&mut self, row: ReportRow) {
        debug_assert_eq!(row.params.len(), self.param_names.len());
        self.rows.push(row);
    }

    /// Largest `log_error` over all rows.
    pub fn max_log_error(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| r.log_error)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// CSV with a header row; non-finite logs are written as `-inf`/`inf`/`nan`.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for name in &self.param_names {
            out.push_str(name);
            out.push(',');
        }
        out.push_str("computed_log,reference_log,log_error,oracle\n");
        for row in &self.rows {
            for p in &row.params {
                let _ = write!(out, "{},", fmt_f64(*p));
            }
            let _ = writeln!(
                out,
                "{},{},{},{}",
                fmt_f64(row.computed_log),
                fmt_f64(row.reference_log),
                fmt_f64(row.log_error),
                row.oracle
            );
        }
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("report serializes")
    }
}
