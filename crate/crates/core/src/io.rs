//! Dataset loading.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Newcomb's 1882 passage-time measurements, coded as deviations from
/// 24800 ns. Two values (-44 and -2) are the well-known gross outliers.
pub const NEWCOMB: [f64; 66] = [
    28.0, 26.0, 33.0, 24.0, 34.0, -44.0, 27.0, 16.0, 40.0, -2.0, 29.0, 22.0, 24.0, 21.0, 25.0, 30.0, 23.0, 29.0, 31.0, 19.0, 24.0, 20.0,
    36.0, 32.0, 36.0, 28.0, 25.0, 21.0, 28.0, 29.0, 37.0, 25.0, 28.0, 26.0, 30.0, 32.0, 36.0, 26.0, 30.0, 22.0, 36.0, 23.0, 27.0, 27.0,
    28.0, 27.0, 31.0, 27.0, 26.0, 33.0, 26.0, 32.0, 32.0, 24.0, 39.0, 28.0, 24.0, 25.0, 32.0, 25.0, 29.0, 27.0, 28.0, 29.0, 16.0, 23.0,
];

pub const NEWCOMB_SOURCE: &str = "bundled:newcomb";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub name: String,
    pub source: String,
    pub values: Vec<f64>,
}

impl Dataset {
    pub fn newcomb() -> Self {
        Self {
            name: "newcomb".into(),
            source: NEWCOMB_SOURCE.into(),
            values: NEWCOMB.to_vec(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Loads `bundled:<name>` or a CSV file holding one value per line.
pub fn load_dataset(source: &str) -> Result<Dataset> {
    if let Some(name) = source.strip_prefix("bundled:") {
        return match name {
            "newcomb" => Ok(Dataset::newcomb()),
            other => Err(Error::InvalidInput(format!("unknown bundled dataset '{other}'"))),
        };
    }
    let path = Path::new(source);
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{source}: {e}")))?;
    let values = parse_values(&text)?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| source.to_string());
    Ok(Dataset {
        name,
        source: source.to_string(),
        values,
    })
}

/// Parses one value per record (first column). A non-numeric first record
/// is taken as a header; any later non-numeric record is an error citing
/// its 1-based line number.
pub fn parse_values(text: &str) -> Result<Vec<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut values = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map(|p| p.line() as usize).unwrap_or(i + 1),
            message: e.to_string(),
        })?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(i + 1);
        let field = record.get(0).unwrap_or("");
        if field.is_empty() && record.len() <= 1 {
            continue;
        }
        match field.parse::<f64>() {
            Ok(v) if v.is_finite() => values.push(v),
            Ok(v) => {
                return Err(Error::Parse {
                    line,
                    message: format!("non-finite value {v}"),
                })
            }
            Err(_) if i == 0 => continue,
            Err(_) => {
                return Err(Error::Parse {
                    line,
                    message: format!("cannot parse '{field}' as a number"),
                })
            }
        }
    }
    if values.is_empty() {
        return Err(Error::InvalidInput("dataset contains no values".into()));
    }
    Ok(values)
}
