//! Output directories and curve files.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use sphereflow::record::{fmt_full, Snapshot};

pub const OUT_ENV: &str = "SPHEREFLOW_OUT";
pub const DEFAULT_ROOT: &str = "sphereflow-out";

/// The explicit root, else `SPHEREFLOW_OUT`, else `./sphereflow-out`.
pub fn output_root(explicit: Option<&Path>) -> PathBuf {
    if let Some(p) = explicit {
        return p.to_path_buf();
    }
    match std::env::var_os(OUT_ENV) {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => PathBuf::from(DEFAULT_ROOT),
    }
}

/// Creates `<root>/<timestamp>-<kind>`, adding a counter on collisions.
pub fn create_run_dir(root: &Path, kind: &str) -> Result<PathBuf> {
    fs::create_dir_all(root).with_context(|| format!("creating {}", root.display()))?;
    let stamp = chrono::Local::now().format("%Y%m%d-%H%M%S-%3f");
    for k in 0..1000 {
        let name = if k == 0 {
            format!("{stamp}-{kind}")
        } else {
            format!("{stamp}-{kind}-{k}")
        };
        let dir = root.join(name);
        match fs::create_dir(&dir) {
            Ok(()) => return Ok(dir),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(e).with_context(|| format!("creating {}", dir.display())),
        }
    }
    bail!("could not find a free run directory under {}", root.display())
}

/// A curve file: a header and rows of numbers, the first column an angle on
/// a uniform periodic grid starting at zero.
pub struct CurveFile {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl CurveFile {
    pub fn read(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
        let columns: Vec<String> = r.headers()?.iter().map(|s| s.trim().to_string()).collect();
        if columns.len() < 2 {
            bail!("{}: need at least two columns", path.display());
        }
        let mut rows = Vec::new();
        for (line, rec) in r.records().enumerate() {
            let rec = rec?;
            let row = rec
                .iter()
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<f64>, _>>()
                .with_context(|| format!("{}: row {}", path.display(), line + 1))?;
            if row.len() != columns.len() {
                bail!("{}: row {} has {} fields", path.display(), line + 1, row.len());
            }
            rows.push(row);
        }
        if rows.len() < 8 {
            bail!("{}: need at least 8 rows, got {}", path.display(), rows.len());
        }
        Ok(Self { columns, rows })
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    /// Values of `name`, or of the second column when `name` is absent,
    /// after checking that the first column is the uniform grid
    /// `k * span / m`, with `m = rows` (periodic) or `rows - 1` (closed).
    pub fn values_on_grid(&self, name: &str, span: f64, closed: bool) -> Result<Vec<f64>> {
        let m = self.rows.len() - usize::from(closed);
        for (k, row) in self.rows.iter().enumerate() {
            let want = span * k as f64 / m as f64;
            if (row[0] - want).abs() > 1e-9 * span {
                bail!(
                    "first column must be the uniform grid {}, row {k} has {} instead of {want}",
                    self.columns[0],
                    row[0]
                );
            }
        }
        Ok(self
            .column(name)
            .unwrap_or_else(|| self.rows.iter().map(|r| r[1]).collect()))
    }
}

pub fn write_table(path: &Path, columns: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    w.write_record(columns)?;
    for row in rows {
        w.write_record(row.iter().map(|&v| fmt_full(v)))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_snapshot(path: &Path, snap: &Snapshot) -> Result<()> {
    fs::write(path, snap.to_csv()?).with_context(|| format!("writing {}", path.display()))
}
