//! Verification studies. Each returns a [`StudyReport`] carrying its
//! configuration, metrics, pass/fail assertions and CSV tables.

pub mod berry_esseen;
pub mod concentration;
pub mod convergence;
pub mod diffusion;
pub mod fluctuation;
pub mod kolmogorov;
pub mod local_lp;
pub mod reversal;
pub mod stats;

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::config::StudyConfig;
use crate::error::Result;

pub use berry_esseen::{berry_esseen_check, berry_esseen_study, BerryEsseen};
pub use concentration::{concentration_check, concentration_study, freedman_bound, freedman_one_sided, TailReport};
pub use convergence::{convergence_study, ConvergenceRow, ConvergenceTable};
pub use diffusion::diffusion_study;
pub use fluctuation::{fluctuation_study, one_step_variance};
pub use kolmogorov::verify_kolmogorov;
pub use local_lp::local_lp_study;
pub use reversal::{path_ratio_check, reversal_study};

/// One checked claim.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Assertion {
    pub name: String,
    pub measured: f64,
    pub bound: f64,
    pub passed: bool,
    pub detail: String,
}

impl Assertion {
    /// Passes when `measured <= bound`.
    pub fn at_most(name: impl Into<String>, measured: f64, bound: f64, detail: impl Into<String>) -> Self {
        Assertion { name: name.into(), measured, bound, passed: measured <= bound, detail: detail.into() }
    }

    /// Passes when `measured < bound`.
    pub fn below(name: impl Into<String>, measured: f64, bound: f64, detail: impl Into<String>) -> Self {
        Assertion { name: name.into(), measured, bound, passed: measured < bound, detail: detail.into() }
    }

    pub fn flag(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        let v = if passed { 1.0 } else { 0.0 };
        Assertion { name: name.into(), measured: v, bound: 1.0, passed, detail: detail.into() }
    }
}

/// A numeric table emitted as CSV.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Table { name: name.to_string(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for r in &self.rows {
            let cells: Vec<String> = r.iter().map(|v| format!("{v}")).collect();
            let _ = writeln!(out, "{}", cells.join(","));
        }
        out
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StudyReport {
    pub study: String,
    pub config: StudyConfig,
    pub metrics: serde_json::Value,
    pub assertions: Vec<Assertion>,
    #[serde(skip)]
    pub tables: Vec<Table>,
}

impl StudyReport {
    pub fn new(study: &str, config: &StudyConfig) -> Self {
        StudyReport {
            study: study.to_string(),
            config: config.clone(),
            metrics: serde_json::json!({}),
            assertions: Vec::new(),
            tables: Vec::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.assertions.iter().all(|a| a.passed)
    }

    pub fn failures(&self) -> Vec<&Assertion> {
        self.assertions.iter().filter(|a| !a.passed).collect()
    }

    pub fn metric(&mut self, key: &str, value: impl Serialize) {
        self.metrics[key] = serde_json::to_value(value).expect("metric serializes");
    }

    pub fn to_json(&self) -> String {
        let mut v = serde_json::to_value(self).expect("report serializes");
        v["passed"] = serde_json::Value::Bool(self.passed());
        serde_json::to_string_pretty(&v).expect("json")
    }

    /// Writes `<study>.json` and one `<study>_<table>.csv` per table into `dir`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        let stem = self.study.replace('-', "_");
        std::fs::write(dir.join(format!("{stem}.json")), self.to_json())?;
        for t in &self.tables {
            std::fs::write(dir.join(format!("{stem}_{}.csv", t.name)), t.to_csv())?;
        }
        Ok(())
    }
}

/// `max / first` over a sweep (the growth factor used for boundedness).
pub fn growth_factor(values: &[f64]) -> f64 {
    let first = values.first().copied().unwrap_or(0.0);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if first > 0.0 {
        max / first
    } else if max <= 0.0 {
        1.0
    } else {
        f64::INFINITY
    }
}

/// `max / min` over a sweep.
pub fn spread_factor(values: &[f64]) -> f64 {
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if min > 0.0 {
        max / min
    } else if max <= 0.0 {
        1.0
    } else {
        f64::INFINITY
    }
}
