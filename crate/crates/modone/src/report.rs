//! Report serialization: deterministic CSV and JSON artifacts written
//! atomically (temp file + rename). Floats are printed with 17 significant
//! digits so that reruns are byte-comparable.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::stats::TestReport;

/// 17 significant digits, enough to round-trip any f64.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Write `bytes` to `path` via a temporary file in the same directory and an
/// atomic rename, so concurrent readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    if let Some(dir) = dir {
        fs::create_dir_all(dir)?;
    }
    let mut tmp = tempfile::NamedTempFile::new_in(dir.unwrap_or(Path::new(".")))?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// One CSV row per test report. Details are flattened `key=value` pairs in
/// deterministic (sorted) order.
pub fn reports_to_csv(reports: &[TestReport]) -> String {
    let mut out = String::from("name,statistic,threshold,n,pass,details\n");
    for r in reports {
        let details = r
            .details
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(";");
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.name,
            format_float(r.statistic),
            format_float(r.threshold),
            r.n,
            r.pass,
            details
        ));
    }
    out
}

/// Generic numeric table: fixed header, rows of 17-digit floats.
pub fn table_to_csv(header: &[&str], rows: &[Vec<f64>]) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        let line = row
            .iter()
            .map(|&v| format_float(v))
            .collect::<Vec<_>>()
            .join(",");
        out.push_str(&line);
        out.push('\n');
    }
    out
}

/// Everything needed to reproduce a run: the echoed configuration, the
/// effective seed (after any environment override), versions, and the list
/// of files the run produced.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub experiment: String,
    pub seed: u64,
    pub seed_overridden: bool,
    pub version: String,
    pub config: serde_json::Value,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(
        experiment: &str,
        seed: u64,
        seed_overridden: bool,
        config: serde_json::Value,
    ) -> Self {
        RunManifest {
            experiment: experiment.to_string(),
            seed,
            seed_overridden,
            version: env!("CARGO_PKG_VERSION").to_string(),
            config,
            outputs: Vec::new(),
        }
    }

    pub fn record_output(&mut self, path: &Path) {
        self.outputs.push(path.display().to_string());
        self.outputs.sort();
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut doc = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Contract(format!("manifest serialization: {e}")))?;
        doc.push('\n');
        write_atomic(path, doc.as_bytes())
    }
}

/// Summary document: all test reports of a run plus the overall verdict.
#[derive(Debug, Serialize)]
pub struct RunSummary {
    pub experiment: String,
    pub seed: u64,
    pub all_pass: bool,
    pub reports: Vec<TestReport>,
}

impl RunSummary {
    pub fn new(experiment: &str, seed: u64, reports: Vec<TestReport>) -> Self {
        RunSummary {
            experiment: experiment.to_string(),
            seed,
            all_pass: reports.iter().all(|r| r.pass),
            reports,
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut doc = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Contract(format!("summary serialization: {e}")))?;
        doc.push('\n');
        write_atomic(path, doc.as_bytes())
    }
}

/// Resolve an output file path inside the run directory.
pub fn out_path(dir: &Path, name: &str) -> PathBuf {
    dir.join(name)
}
