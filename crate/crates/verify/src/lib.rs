//! Acceptance suite: each criterion runs the simulator at a fixed scale and
//! compares measured values with pinned thresholds.

mod criteria;
pub mod oracle;

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

pub use criteria::CRITERIA;

pub const FULL_WALL_BUDGET: f64 = 1200.0;
pub const FAST_WALL_BUDGET: f64 = 120.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Fast,
    Full,
}

impl Suite {
    /// Grid size for this suite: halved in the fast suite.
    pub fn res(self, full: usize) -> usize {
        match self {
            Suite::Full => full,
            Suite::Fast => full / 2,
        }
    }

    /// Tolerance for this suite: doubled in the fast suite.
    pub fn tol(self, full: f64) -> f64 {
        match self {
            Suite::Full => full,
            Suite::Fast => 2.0 * full,
        }
    }
}

/// One measured value and the bound it is held to.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    /// `"<"`, `"<="`, `">"`, `">="` or `"=="` (for booleans encoded as 0/1).
    pub relation: String,
    pub bound: f64,
    pub passed: bool,
}

impl Check {
    pub fn new(name: &str, measured: f64, relation: &str, bound: f64) -> Self {
        let passed = match relation {
            "<" => measured < bound,
            "<=" => measured <= bound,
            ">" => measured > bound,
            ">=" => measured >= bound,
            "==" => measured == bound,
            _ => false,
        };
        Self {
            name: name.to_string(),
            measured,
            relation: relation.to_string(),
            bound,
            passed,
        }
    }

    pub fn flag(name: &str, ok: bool) -> Self {
        Self::new(name, if ok { 1.0 } else { 0.0 }, "==", 1.0)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub checks: Vec<Check>,
    pub info: BTreeMap<String, Value>,
    /// Series CSV files produced by the criterion, by name.
    #[serde(skip)]
    pub series: BTreeMap<String, Vec<u8>>,
    pub error: Option<String>,
}

impl Outcome {
    pub fn check(&mut self, c: Check) {
        self.checks.push(c);
    }

    pub fn info(&mut self, key: &str, v: impl Into<Value>) {
        self.info.insert(key.to_string(), v.into());
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriterionReport {
    pub id: String,
    pub title: String,
    pub passed: bool,
    pub checks: Vec<Check>,
    pub info: BTreeMap<String, Value>,
    pub series_sha256: BTreeMap<String, String>,
    pub runtime_seconds: f64,
    pub budget_seconds: f64,
    pub error: Option<String>,
}

impl CriterionReport {
    /// One line: `PASS c04 ...` or `FAIL c04 ...`, with every check.
    pub fn line(&self) -> String {
        let mut s = format!(
            "{} {} {} ({:.2}s, budget {}s)",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.title,
            self.runtime_seconds,
            self.budget_seconds
        );
        for c in &self.checks {
            s.push_str(&format!(
                "; {} = {:.6e} {} {:.1e}{}",
                c.name,
                c.measured,
                c.relation,
                c.bound,
                if c.passed { "" } else { " [x]" }
            ));
        }
        if let Some(e) = &self.error {
            s.push_str(&format!("; error: {e}"));
        }
        s
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub suite: Suite,
    pub passed: bool,
    pub criteria: Vec<CriterionReport>,
    pub wall_time_seconds: f64,
    pub crate_version: String,
}

pub struct Criterion {
    pub id: &'static str,
    pub title: &'static str,
    pub budget_seconds: f64,
    pub run: fn(Suite) -> Outcome,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Runs one criterion. Series files are written under `out/<id>/` when given.
pub fn run_criterion(c: &Criterion, suite: Suite, out: Option<&Path>) -> CriterionReport {
    let started = Instant::now();
    let outcome = (c.run)(suite);
    let runtime = started.elapsed().as_secs_f64();
    let mut checks = outcome.checks;
    checks.push(Check::new("runtime_seconds", runtime, "<", c.budget_seconds));
    let series_sha256 = outcome
        .series
        .iter()
        .map(|(k, v)| (k.clone(), sha256_hex(v)))
        .collect();
    if let Some(dir) = out {
        let dir = dir.join(c.id);
        if std::fs::create_dir_all(&dir).is_ok() {
            for (name, bytes) in &outcome.series {
                let _ = std::fs::write(dir.join(format!("{name}.csv")), bytes);
            }
        }
    }
    let passed = outcome.error.is_none() && checks.iter().all(|c| c.passed);
    CriterionReport {
        id: c.id.to_string(),
        title: c.title.to_string(),
        passed,
        checks,
        info: outcome.info,
        series_sha256,
        runtime_seconds: runtime,
        budget_seconds: c.budget_seconds,
        error: outcome.error,
    }
}

/// Runs the selected criteria in order (all when `only` is empty).
pub fn run_suite(suite: Suite, only: &[String], out: Option<&Path>) -> Report {
    let started = Instant::now();
    let mut criteria = Vec::new();
    for c in CRITERIA {
        if only.is_empty() || only.iter().any(|o| o == c.id) {
            criteria.push(run_criterion(c, suite, out));
        }
    }
    if let Some(c12) = criteria.iter_mut().find(|c| c.id == "c12") {
        let total = started.elapsed().as_secs_f64();
        let budget = match suite {
            Suite::Full => FULL_WALL_BUDGET,
            Suite::Fast => FAST_WALL_BUDGET,
        };
        let check = Check::new("suite_wall_seconds", total, "<", budget);
        c12.passed &= check.passed;
        c12.checks.push(check);
    }
    let report = Report {
        suite,
        passed: criteria.iter().all(|c| c.passed),
        criteria,
        wall_time_seconds: started.elapsed().as_secs_f64(),
        crate_version: env!("CARGO_PKG_VERSION").to_string(),
    };
    if let Some(dir) = out {
        if let Ok(json) = serde_json::to_vec_pretty(&report) {
            let _ = std::fs::write(dir.join("report.json"), json);
        }
    }
    report
}
