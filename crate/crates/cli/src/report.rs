//! JSON report written by every run command.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::RunConfig;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub name: String,
    pub source: String,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub tool: String,
    pub tool_version: String,
    pub command: String,
    /// RFC 3339, UTC. The only field that differs between identical runs.
    pub generated_at: String,
    pub seed: u64,
    pub config: RunConfig,
    pub dataset: Option<DatasetInfo>,
    /// "ok" or "numerical_failure".
    pub status: String,
    pub errors: Vec<String>,
    pub warnings: Vec<String>,
    pub result: Value,
}

impl Report {
    pub fn new(config: &RunConfig, dataset: Option<DatasetInfo>, result: Value) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            tool: "bayes-mhd".into(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            command: config.command.name().into(),
            generated_at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            seed: config.seed,
            config: config.clone(),
            dataset,
            status: "ok".into(),
            errors: Vec::new(),
            warnings: Vec::new(),
            result,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// The report with `generated_at` removed, for reproducibility checks.
    pub fn canonical(json: &str) -> serde_json::Result<Value> {
        let mut v: Value = serde_json::from_str(json)?;
        if let Some(m) = v.as_object_mut() {
            m.remove("generated_at");
        }
        Ok(v)
    }
}

/// Serializes rows to RFC 4180 CSV.
pub fn to_csv<S: Serialize>(rows: &[S]) -> Result<String, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}
