//! Report files: one CSV of pair records per spec and level, plus a JSON
//! summary. Output depends only on the inputs, so identical runs give
//! identical bytes.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::estimates::{EstimateRecord, EstimateReport};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const SUMMARY_FILE: &str = "summary.json";
pub const CSV_HEADER: &str = "x,y,d_x,d_y,sep,region,lhs,rhs,ratio";

/// Non-finite values become `null`.
fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecLevel {
    pub h: f64,
    pub pairs: usize,
    pub sup: Option<f64>,
    pub sup_by_region: BTreeMap<String, Option<f64>>,
    pub csv: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecSummary {
    pub name: String,
    pub passed: bool,
    pub finite: bool,
    pub stable: bool,
    pub max_change: Option<f64>,
    pub constant: Option<f64>,
    pub levels: Vec<SpecLevel>,
}

/// Verdict of a check that has no pair records (decay, Hardy, ...).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckSummary {
    pub name: String,
    pub passed: bool,
    pub details: Value,
}

impl CheckSummary {
    pub fn new<T: Serialize>(name: impl Into<String>, passed: bool, details: &T) -> Result<Self> {
        Ok(CheckSummary {
            name: name.into(),
            passed,
            details: serde_json::to_value(details)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub version: String,
    pub command: String,
    pub passed: bool,
    pub levels: Vec<f64>,
    pub specs: Vec<SpecSummary>,
    #[serde(default)]
    pub checks: Vec<CheckSummary>,
    #[serde(default)]
    pub warnings: Vec<String>,
    pub config: Value,
}

impl Summary {
    pub fn new(command: impl Into<String>, config: Value) -> Self {
        Summary {
            version: VERSION.to_string(),
            command: command.into(),
            passed: true,
            levels: Vec::new(),
            specs: Vec::new(),
            checks: Vec::new(),
            warnings: Vec::new(),
            config,
        }
    }

    pub fn push_check(&mut self, check: CheckSummary) {
        self.passed &= check.passed;
        self.checks.push(check);
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("summary serializes");
        s.push('\n');
        s
    }

    pub fn read(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        fs::create_dir_all(dir)?;
        let path = dir.join(SUMMARY_FILE);
        fs::write(&path, self.to_json())?;
        Ok(path)
    }
}

pub fn csv_name(spec: &str, level: usize) -> String {
    let clean: String = spec
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' || c == '-' { c } else { '_' })
        .collect();
    format!("{clean}_level{level}.csv")
}

fn joined(x: &[f64]) -> String {
    x.iter().map(|v| format!("{v:.16e}")).collect::<Vec<_>>().join(" ")
}

/// Records as CSV; coordinates are space-separated inside their column.
pub fn write_records<W: Write>(mut w: W, records: &[EstimateRecord]) -> Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in records {
        let p = &r.pair;
        writeln!(
            w,
            "{},{},{:.16e},{:.16e},{:.16e},{},{:.16e},{:.16e},{:.16e}",
            joined(&p.x),
            joined(&p.y),
            p.d_x,
            p.d_y,
            p.sep,
            r.region.label(),
            r.lhs,
            r.rhs,
            r.ratio
        )?;
    }
    Ok(())
}

/// Folds the reports into `summary` without writing anything; `csv` names
/// the file `write_reports` would create.
pub fn add_reports(reports: &[EstimateReport], summary: &mut Summary) {
    for rep in reports {
        let levels = rep
            .levels
            .iter()
            .enumerate()
            .map(|(k, lvl)| SpecLevel {
                h: lvl.h,
                pairs: lvl.records.len(),
                sup: finite(lvl.sup),
                sup_by_region: lvl
                    .sup_by_region
                    .iter()
                    .map(|(r, v)| (r.label().to_string(), finite(*v)))
                    .collect(),
                csv: csv_name(&rep.name, k),
            })
            .collect::<Vec<_>>();
        for l in &levels {
            if !summary.levels.contains(&l.h) {
                summary.levels.push(l.h);
            }
        }
        summary.passed &= rep.passed();
        summary.specs.push(SpecSummary {
            name: rep.name.clone(),
            passed: rep.passed(),
            finite: rep.finite,
            stable: rep.stable,
            max_change: finite(rep.max_change),
            constant: finite(rep.constant()),
            levels,
        });
    }
    summary.levels.sort_by(|a, b| b.total_cmp(a));
}

/// Writes one CSV per spec and level into `dir` and folds the reports into
/// `summary`, which the caller writes once all checks are in.
pub fn write_reports(dir: &Path, reports: &[EstimateReport], summary: &mut Summary) -> Result<()> {
    fs::create_dir_all(dir)?;
    for rep in reports {
        for (k, lvl) in rep.levels.iter().enumerate() {
            let mut w = BufWriter::new(fs::File::create(dir.join(csv_name(&rep.name, k)))?);
            write_records(&mut w, &lvl.records)?;
            w.flush()?;
        }
    }
    add_reports(reports, summary);
    Ok(())
}

/// One summary for several runs. Spec and check names get the run's
/// command as prefix; CSV paths are made relative to the merged location
/// by the caller.
pub fn merge_summaries(runs: &[Summary]) -> Result<Summary> {
    if runs.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut out = Summary::new("report", Value::Array(runs.iter().map(|r| r.config.clone()).collect()));
    for run in runs {
        out.passed &= run.passed;
        for h in &run.levels {
            if !out.levels.contains(h) {
                out.levels.push(*h);
            }
        }
        for s in &run.specs {
            let mut s = s.clone();
            s.name = format!("{}/{}", run.command, s.name);
            out.specs.push(s);
        }
        for c in &run.checks {
            let mut c = c.clone();
            c.name = format!("{}/{}", run.command, c.name);
            out.checks.push(c);
        }
        out.warnings.extend(run.warnings.iter().cloned());
    }
    out.levels.sort_by(|a, b| b.total_cmp(a));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimates::ratio_statistics;
    use crate::geometry::{Domain, Region, SamplePair};

    fn report(name: &str) -> EstimateReport {
        let d = Domain::unit_ball(2);
        let rec = |h: f64, x: f64| {
            let pair = SamplePair::new(&d, vec![x, 0.0], vec![0.0, 0.1]).unwrap();
            EstimateRecord::new(pair, Region::CaseIII, 1.0 + h, 3.0)
        };
        ratio_statistics(name, vec![(0.1, vec![rec(0.1, 0.3)]), (0.05, vec![rec(0.05, 0.3), rec(0.05, -0.2)])]).unwrap()
    }

    #[test]
    fn empty_report_list() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = Summary::new("verify-green", Value::Null);
        write_reports(dir.path(), &[], &mut s).unwrap();
        s.write(dir.path()).unwrap();
        let names: Vec<_> = fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
        assert_eq!(names, vec![SUMMARY_FILE]);
        let back = Summary::read(&dir.path().join(SUMMARY_FILE)).unwrap();
        assert!(back.specs.is_empty() && back.passed);
    }

    #[test]
    fn two_levels_give_two_csvs_and_stable_bytes() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        for dir in [&a, &b] {
            let mut s = Summary::new("verify-green", Value::Null);
            write_reports(dir.path(), &[report("Gr3_i0_j0")], &mut s).unwrap();
            s.write(dir.path()).unwrap();
        }
        let mut files: Vec<_> = fs::read_dir(a.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
        files.sort();
        assert_eq!(files.len(), 3);
        for f in &files {
            assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap());
        }
        let csv = fs::read_to_string(a.path().join(csv_name("Gr3_i0_j0", 1))).unwrap();
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("2.9999999999999999e-1 0.0000000000000000e0,"), "{}", lines[1]);
        assert_eq!(lines[1].split(',').nth(5), Some("III"));
    }

    #[test]
    fn merging_keeps_every_verdict() {
        let mut a = Summary::new("verify-green", Value::Null);
        a.specs.push(SpecSummary {
            name: "Gr1_i0_j0".into(),
            passed: true,
            finite: true,
            stable: true,
            max_change: Some(1.1),
            constant: Some(0.3),
            levels: vec![],
        });
        let mut b = Summary::new("hardy", Value::Null);
        b.push_check(CheckSummary::new("hardy", false, &1.0).unwrap());
        let m = merge_summaries(&[a, b]).unwrap();
        assert!(!m.passed);
        assert_eq!(m.specs[0].name, "verify-green/Gr1_i0_j0");
        assert_eq!(m.checks[0].name, "hardy/hardy");
        assert!(merge_summaries(&[]).is_err());
    }
}
