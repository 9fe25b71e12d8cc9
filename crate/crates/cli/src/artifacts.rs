//! CSV tables, report files and the run manifest.

use std::path::{Path, PathBuf};

use gradlat_core::diagnostics::{DiagnosticReport, Verdict};
use serde::Serialize;

use crate::config::RunConfig;

/// An in-memory CSV table whose rows start with the config hash and seed.
#[derive(Clone, Debug)]
pub struct Table {
    pub name: String,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        let mut header = vec!["config_hash".to_string(), "seed".to_string()];
        header.extend(columns.iter().map(|c| c.to_string()));
        Self {
            name: name.to_string(),
            header,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, cfg: &RunConfig, fields: Vec<String>) {
        assert_eq!(fields.len() + 2, self.header.len(), "column count of {}", self.name);
        let mut row = vec![cfg.hash(), cfg.seed.to_string()];
        row.extend(fields);
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r).expect("in-memory write");
        }
        w.into_inner().expect("in-memory flush")
    }
}

/// Shortest round-trip formatting, switching to exponent form for very
/// small or large magnitudes.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}

/// The shared report table: `(name, alpha, beta, epsilon, N, estimate,
/// std_error, target_or_bound, verdict)`.
pub fn report_table(cfg: &RunConfig, reports: &[(usize, DiagnosticReport)]) -> Table {
    let mut t = Table::new(
        &format!("{}_reports", cfg.experiment.name().replace('-', "_")),
        &["name", "alpha", "beta", "epsilon", "N", "estimate", "std_error", "target_or_bound", "verdict"],
    );
    for (side, r) in reports {
        t.push(
            cfg,
            vec![
                r.name.clone(),
                num(cfg.model.alpha),
                num(cfg.model.beta),
                num(cfg.model.epsilon),
                side.to_string(),
                num(r.estimate),
                num(r.std_error),
                num(r.bound_or_target),
                r.verdict.as_str().to_string(),
            ],
        );
    }
    t
}

#[derive(Serialize)]
pub struct ReportEntry {
    pub name: String,
    pub side: usize,
    pub estimate: f64,
    pub std_error: f64,
    pub target_or_bound: f64,
    pub verdict: String,
    pub metadata: serde_json::Map<String, serde_json::Value>,
}

impl ReportEntry {
    pub fn new(side: usize, r: &DiagnosticReport) -> Self {
        let metadata = r.metadata.iter().map(|(k, v)| (k.clone(), json_num(*v))).collect();
        Self {
            name: r.name.clone(),
            side,
            estimate: r.estimate,
            std_error: r.std_error,
            target_or_bound: r.bound_or_target,
            verdict: r.verdict.as_str().to_string(),
            metadata,
        }
    }
}

fn json_num(x: f64) -> serde_json::Value {
    serde_json::Number::from_f64(x)
        .map(serde_json::Value::Number)
        .unwrap_or_else(|| serde_json::Value::String(num(x)))
}

#[derive(Serialize)]
pub struct Manifest<'a> {
    pub experiment: &'a str,
    pub seed: u64,
    pub config_hash: String,
    pub config: &'a RunConfig,
    pub versions: serde_json::Value,
    pub wall_time_seconds: f64,
    pub artifacts: Vec<String>,
    pub checkpoints: Vec<String>,
    pub resumed_from: Option<String>,
    pub provenance: serde_json::Value,
    pub reports: Vec<ReportEntry>,
    pub verdict: &'a str,
    pub exit_status: i32,
}

pub fn versions() -> serde_json::Value {
    serde_json::json!({
        "gradlat": env!("CARGO_PKG_VERSION"),
        "checkpoint_format": crate::checkpoint::FORMAT_VERSION,
    })
}

/// `0` if every verdict passes, `2` if any is inconclusive and none fail,
/// `1` otherwise.
pub fn exit_status(verdict: Verdict) -> i32 {
    match verdict {
        Verdict::Pass => 0,
        Verdict::Inconclusive => 2,
        Verdict::Fail => 1,
    }
}

pub fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> std::io::Result<PathBuf> {
    let path = dir.join(name);
    crate::checkpoint::write_atomic(&path, bytes)?;
    Ok(path)
}
