//! Report documents: the run configuration, the experiment tables and a
//! SHA-256 over both, written as CSV or JSON next to a gnuplot script.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use bergman_core::report::ExperimentReport;
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::{Format, RunConfig};
use crate::error::{CliError, Result};

/// Everything a report file contains.
#[derive(Clone, Debug, Serialize)]
pub struct Document {
    pub tool: String,
    pub version: String,
    pub config: RunConfig,
    pub experiments: Vec<ExperimentReport>,
    /// Command-specific results that are not tables.
    pub summary: Value,
}

impl Document {
    pub fn new(config: &RunConfig, experiments: Vec<ExperimentReport>, summary: Value) -> Self {
        Document {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config: config.clone(),
            experiments,
            summary,
        }
    }

    /// Hex SHA-256 of the compact JSON serialization with sorted keys.
    pub fn content_hash(&self) -> String {
        let value = serde_json::to_value(self).expect("document serializes");
        let bytes = serde_json::to_vec(&value).expect("value serializes");
        format!("{:x}", Sha256::digest(&bytes))
    }

    pub fn to_json(&self) -> String {
        let mut v = serde_json::to_value(self).expect("document serializes");
        v["sha256"] = json!(self.content_hash());
        let mut s = serde_json::to_string_pretty(&v).expect("value serializes");
        s.push('\n');
        s
    }

    /// Comment header with config and hash, then one table per experiment
    /// with its fit and notes as comments.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# {} {}", self.tool, self.version);
        let _ = writeln!(out, "# config {}", serde_json::to_string(&self.config).expect("config serializes"));
        let _ = writeln!(out, "# sha256 {}", self.content_hash());
        if !self.summary.is_null() {
            let _ = writeln!(out, "# summary {}", self.summary);
        }
        for e in &self.experiments {
            let _ = writeln!(out, "# experiment {}", e.experiment);
            if let Some(fit) = &e.fit {
                let _ = writeln!(
                    out,
                    "# fit slope={} intercept={} r_squared={}",
                    fit.slope, fit.intercept, fit.r_squared
                );
            }
            for note in &e.notes {
                let _ = writeln!(out, "# note {note}");
            }
            out.push_str(&e.to_csv());
        }
        out
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => self.to_csv(),
            Format::Json => self.to_json(),
        }
    }
}

/// Writes `contents` to a temporary file in the target directory and
/// renames it into place.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let io = |source| CliError::Io {
        path: path.display().to_string(),
        source,
    };
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(io)?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("report");
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    let result = (|| {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(contents.as_bytes())?;
        f.sync_all()?;
        std::fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = std::fs::remove_file(&tmp);
    }
    result.map_err(io)
}

/// Log-error against the first parameter, with the fitted line when
/// there is one. Data is inlined so the script stands alone.
pub fn gnuplot_script(doc: &Document, stem: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "set terminal pngcairo size 900,600");
    let _ = writeln!(s, "set output '{stem}.png'");
    let _ = writeln!(s, "set key top right");
    let _ = writeln!(s, "set grid");
    let mut plots = Vec::new();
    for (i, e) in doc.experiments.iter().enumerate() {
        let xlabel = e.param_names.first().map(String::as_str).unwrap_or("x");
        if i == 0 {
            let _ = writeln!(s, "set xlabel '{xlabel}'");
            let _ = writeln!(s, "set ylabel 'ln |error|'");
        }
        let _ = writeln!(s, "$d{i} << EOD");
        for row in &e.rows {
            if row.log_error.is_finite() {
                let _ = writeln!(s, "{} {}", row.params.first().copied().unwrap_or(0.0), row.log_error);
            }
        }
        let _ = writeln!(s, "EOD");
        plots.push(format!("$d{i} using 1:2 with linespoints title '{}'", e.experiment));
        if let Some(fit) = &e.fit {
            let _ = writeln!(s, "f{i}(x) = {} - {} * x", fit.intercept, fit.slope);
            plots.push(format!("f{i}(x) title 'fit, slope {:.4}'", fit.slope));
        }
    }
    if plots.is_empty() {
        plots.push("0 notitle".into());
    }
    let _ = writeln!(s, "plot {}", plots.join(", \\\n     "));
    s
}

/// Writes `<out>/<stem>.<csv|json>` and `<out>/<stem>.gp`; returns the
/// report path.
pub fn emit(doc: &Document, stem: &str, format: Format) -> Result<PathBuf> {
    let ext = match format {
        Format::Csv => "csv",
        Format::Json => "json",
    };
    let path = doc.config.out.join(format!("{stem}.{ext}"));
    write_atomic(&path, &doc.render(format))?;
    write_atomic(&doc.config.out.join(format!("{stem}.gp")), &gnuplot_script(doc, stem))?;
    Ok(path)
}
