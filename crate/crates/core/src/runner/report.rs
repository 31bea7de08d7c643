use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::Result;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckRecord {
    pub name: String,
    pub closed_form: Option<f64>,
    pub estimate: Option<f64>,
    pub std_err: Option<f64>,
    pub bound: Option<f64>,
    pub pass: bool,
    pub note: String,
}

impl CheckRecord {
    pub fn new(name: impl Into<String>, pass: bool) -> Self {
        CheckRecord {
            name: name.into(),
            closed_form: None,
            estimate: None,
            std_err: None,
            bound: None,
            pass,
            note: String::new(),
        }
    }

    pub fn closed_form(mut self, v: f64) -> Self {
        self.closed_form = Some(v);
        self
    }

    pub fn estimate(mut self, v: f64) -> Self {
        self.estimate = Some(v);
        self
    }

    pub fn std_err(mut self, v: f64) -> Self {
        self.std_err = Some(v);
        self
    }

    pub fn bound(mut self, v: f64) -> Self {
        self.bound = Some(v);
        self
    }

    pub fn note(mut self, v: impl Into<String>) -> Self {
        self.note = v.into();
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub seed: u64,
    pub pass: bool,
    pub records: Vec<CheckRecord>,
}

pub const RECORD_COLUMNS: [&str; 8] = ["suite", "name", "closed_form", "estimate", "std_err", "bound", "pass", "note"];

fn cell(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.17e}")).unwrap_or_default()
}

impl SuiteReport {
    pub fn new(suite: impl Into<String>, seed: u64, records: Vec<CheckRecord>) -> Self {
        let pass = records.iter().all(|r| r.pass);
        SuiteReport {
            suite: suite.into(),
            seed,
            pass,
            records,
        }
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckRecord> {
        self.records.iter().filter(|r| !r.pass)
    }

    /// Floats in `{:.17e}`, empty cells for absent values; commas in notes become `;`.
    pub fn to_csv(&self) -> String {
        let mut out = RECORD_COLUMNS.join(",");
        out.push('\n');
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                self.suite,
                r.name,
                cell(r.closed_form),
                cell(r.estimate),
                cell(r.std_err),
                cell(r.bound),
                r.pass,
                r.note.replace([',', '\n'], ";")
            );
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Writes `<suite>.report.json` and `<suite>.records.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let json = dir.join(format!("{}.report.json", self.suite));
        let csv = dir.join(format!("{}.records.csv", self.suite));
        std::fs::write(&json, self.to_json()?)?;
        std::fs::write(&csv, self.to_csv())?;
        Ok(vec![json, csv])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overall_status_and_csv() {
        let r = SuiteReport::new(
            "minima",
            3,
            vec![
                CheckRecord::new("a", true).closed_form(0.5),
                CheckRecord::new("b", false).estimate(1.0).note("x, y"),
            ],
        );
        assert!(!r.pass);
        assert_eq!(r.failures().count(), 1);
        let csv = r.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[1], "minima,a,5.00000000000000000e-1,,,,true,");
        assert_eq!(lines[2], "minima,b,,1.00000000000000000e0,,,false,x; y");
        assert!(SuiteReport::new("x", 0, vec![]).pass);
    }
}
