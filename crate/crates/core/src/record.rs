//! Persisted run output: a manifest, a diagnostic series and geometry snapshots.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Collapse,
    Equator,
    PoleMargin,
    MaxTime,
    Blowup,
    ConvexityLost,
    /// The run could not start or aborted with an error.
    Failed,
}

impl StopReason {
    /// Clean stops exit with status zero.
    pub fn is_clean(self) -> bool {
        !matches!(self, StopReason::Blowup | StopReason::Failed)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub series_schema: Vec<String>,
    pub kind: String,
    pub crate_version: String,
    pub config: Value,
    pub stop_reason: StopReason,
    pub stop_detail: Option<String>,
    pub steps: usize,
    pub final_time: f64,
    pub wall_time_seconds: f64,
    pub flags: Vec<String>,
    pub notes: BTreeMap<String, Value>,
}

impl Manifest {
    pub fn new(kind: &str, config: Value) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            series_schema: Vec::new(),
            kind: kind.to_string(),
            crate_version: env!("CARGO_PKG_VERSION").to_string(),
            config,
            stop_reason: StopReason::MaxTime,
            stop_detail: None,
            steps: 0,
            final_time: 0.0,
            wall_time_seconds: 0.0,
            flags: Vec::new(),
            notes: BTreeMap::new(),
        }
    }

    pub fn flag(&mut self, flag: &str) {
        if !self.flags.iter().any(|f| f == flag) {
            self.flags.push(flag.to_string());
        }
    }
}

/// Rows of diagnostics; the first column is always `t`. Missing entries are
/// `None` and are written as empty CSV fields.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
}

impl Series {
    pub fn new(columns: Vec<String>) -> Self {
        Self {
            columns,
            rows: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn push(&mut self, row: Vec<Option<f64>>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn column(&self, name: &str) -> Option<Vec<Option<f64>>> {
        let i = self.index(name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    /// Column with missing entries dropped, paired with `t`.
    pub fn pairs(&self, name: &str) -> Vec<(f64, f64)> {
        let Some(i) = self.index(name) else {
            return Vec::new();
        };
        self.rows
            .iter()
            .filter_map(|r| Some((r[0]?, r[i]?)))
            .collect()
    }

    pub fn times(&self) -> Vec<f64> {
        self.rows.iter().filter_map(|r| r[0]).collect()
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|v| v.map(fmt_full).unwrap_or_default()))?;
        }
        w.into_inner()
            .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))
    }

    pub fn from_csv(bytes: &[u8]) -> Result<Self> {
        let mut r = csv::Reader::from_reader(bytes);
        let columns: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            rows.push(
                rec.iter()
                    .map(|s| if s.is_empty() { None } else { s.parse().ok() })
                    .collect(),
            );
        }
        Ok(Self { columns, rows })
    }
}

/// Full-precision scientific notation: 17 significant digits.
pub fn fmt_full(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub name: String,
    pub t: f64,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Snapshot {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|&v| fmt_full(v)))?;
        }
        w.into_inner()
            .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub manifest: Manifest,
    pub series: Series,
    pub snapshots: Vec<Snapshot>,
}

impl RunRecord {
    pub fn new(manifest: Manifest, series: Series) -> Self {
        Self {
            manifest,
            series,
            snapshots: Vec::new(),
        }
    }

    pub fn snapshot(&self, name: &str) -> Option<&Snapshot> {
        self.snapshots.iter().find(|s| s.name == name)
    }

    /// Writes `manifest.json`, `series.csv` and `snapshots/*.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir.join("snapshots"))?;
        fs::write(
            dir.join("manifest.json"),
            serde_json::to_vec_pretty(&self.manifest)?,
        )?;
        fs::write(dir.join("series.csv"), self.series.to_csv()?)?;
        for snap in &self.snapshots {
            fs::write(
                dir.join("snapshots").join(format!("{}.csv", snap.name)),
                snap.to_csv()?,
            )?;
        }
        Ok(())
    }
}
