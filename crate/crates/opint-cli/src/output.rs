//! Report and CSV emission. Field order is fixed by the struct layout and
//! maps are sorted, so identical runs serialize to identical bytes; the
//! wall-time field is the single exception and sits on its own line at the
//! end for easy stripping.

use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;

use crate::CliError;

#[derive(Debug, Clone, Serialize)]
pub struct TrialRecord {
    pub index: usize,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ratio: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub constant: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl TrialRecord {
    pub fn new(index: usize) -> Self {
        Self { index, pass: true, residual: None, ratio: None, constant: None, detail: None }
    }

    /// Attaches a residual and folds `residual <= tol` into the verdict.
    pub fn check_residual(mut self, residual: f64, tol: f64) -> Self {
        self.residual = sanitize(self.residual.map_or(residual, |r| r.max(residual)));
        if !(residual <= tol) {
            self.pass = false;
            self.note(format!("residual {residual:.3e} exceeds {tol:.1e}"));
        }
        self
    }

    pub fn require(mut self, ok: bool, what: &str) -> Self {
        if !ok {
            self.pass = false;
            self.note(what.to_string());
        }
        self
    }

    pub fn note(&mut self, msg: String) {
        match &mut self.detail {
            Some(d) => {
                d.push_str("; ");
                d.push_str(&msg);
            }
            None => self.detail = Some(msg),
        }
    }
}

/// Suite-level checks that look across trials (monotonicity of a sweep,
/// stability of a constant). Kept apart from the per-trial records so the
/// record count always equals the trial count.
#[derive(Debug, Clone, Serialize)]
pub struct SuiteAssertion {
    pub name: String,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl SuiteAssertion {
    pub fn new(name: &str, pass: bool, detail: impl Into<String>) -> Self {
        let d: String = detail.into();
        Self { name: name.into(), pass, detail: if d.is_empty() { None } else { Some(d) } }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Aggregate {
    pub passed: usize,
    pub failed: usize,
    pub assertions_failed: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_ratio: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_constant: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_constant: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub config: BTreeMap<String, String>,
    pub trials: Vec<TrialRecord>,
    pub assertions: Vec<SuiteAssertion>,
    pub aggregate: Aggregate,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub extra: BTreeMap<String, String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub wall_time_ms: f64,
}

impl SuiteReport {
    pub fn assemble(
        suite: String,
        config: BTreeMap<String, String>,
        trials: Vec<TrialRecord>,
        assertions: Vec<SuiteAssertion>,
        extra: BTreeMap<String, String>,
        error: Option<String>,
        wall_time_ms: f64,
    ) -> Self {
        let passed = trials.iter().filter(|t| t.pass).count();
        let failed = trials.len() - passed;
        let assertions_failed = assertions.iter().filter(|a| !a.pass).count();
        let fold = |pick: fn(&TrialRecord) -> Option<f64>, max: bool| -> Option<f64> {
            let mut out: Option<f64> = None;
            for t in &trials {
                if let Some(v) = pick(t) {
                    out = Some(match out {
                        None => v,
                        Some(o) => {
                            if max {
                                o.max(v)
                            } else {
                                o.min(v)
                            }
                        }
                    });
                }
            }
            out.and_then(sanitize_opt)
        };
        let aggregate = Aggregate {
            passed,
            failed,
            assertions_failed,
            max_residual: fold(|t| t.residual, true),
            max_ratio: fold(|t| t.ratio, true),
            min_constant: fold(|t| t.constant, false),
            max_constant: fold(|t| t.constant, true),
        };
        Self { suite, config, trials, assertions, aggregate, extra, error, wall_time_ms }
    }

    /// Exit contract: zero status only when everything held and no trial was
    /// lost to an error.
    pub fn all_passed(&self) -> bool {
        self.error.is_none()
            && self.aggregate.failed == 0
            && self.aggregate.assertions_failed == 0
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

/// JSON cannot carry non-finite numbers; a non-finite statistic is dropped
/// and the trial that produced it has already been marked failing.
fn sanitize(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

fn sanitize_opt(x: f64) -> Option<f64> {
    sanitize(x)
}

/// Drops the wall-time line so two runs of the same config can be compared
/// byte for byte.
pub fn strip_wall_time(json: &str) -> String {
    json.lines().filter(|l| !l.contains("\"wall_time_ms\"")).collect::<Vec<_>>().join("\n")
}

/// A small CSV table; the counterexample sweep overrides the default
/// per-trial shape with its own columns.
#[derive(Debug, Clone)]
pub struct CsvTable {
    pub header: String,
    pub rows: Vec<String>,
}

impl CsvTable {
    pub fn from_trials(trials: &[TrialRecord]) -> Self {
        let rows = trials
            .iter()
            .map(|t| {
                let cell = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:.17e}"));
                format!(
                    "{},{},{},{},{}",
                    t.index,
                    if t.pass { "pass" } else { "fail" },
                    cell(t.residual),
                    cell(t.ratio),
                    cell(t.constant)
                )
            })
            .collect();
        Self { header: "trial,status,residual,ratio,constant".into(), rows }
    }

    pub fn write_to(&self, path: &std::path::Path) -> Result<(), CliError> {
        let mut f = std::fs::File::create(path)?;
        writeln!(f, "{}", self.header)?;
        for row in &self.rows {
            writeln!(f, "{row}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_report(wall: f64) -> SuiteReport {
        let mut t = TrialRecord::new(0);
        t.residual = Some(1e-12);
        SuiteReport::assemble(
            "demo".into(),
            BTreeMap::new(),
            vec![t],
            vec![],
            BTreeMap::new(),
            None,
            wall,
        )
    }

    #[test]
    fn wall_time_is_the_only_difference() {
        let a = tiny_report(1.0).to_json();
        let b = tiny_report(2.0).to_json();
        assert_ne!(a, b);
        assert_eq!(strip_wall_time(&a), strip_wall_time(&b));
    }

    #[test]
    fn aggregates_follow_records() {
        let mut t0 = TrialRecord::new(0).check_residual(1e-9, 1e-8);
        let t1 = TrialRecord::new(1).check_residual(1.0, 1e-8);
        t0.ratio = Some(2.0);
        let r = SuiteReport::assemble(
            "demo".into(),
            BTreeMap::new(),
            vec![t0, t1],
            vec![SuiteAssertion::new("monotone", false, "broke")],
            BTreeMap::new(),
            None,
            0.0,
        );
        assert_eq!(r.aggregate.passed, 1);
        assert_eq!(r.aggregate.failed, 1);
        assert_eq!(r.aggregate.assertions_failed, 1);
        assert_eq!(r.aggregate.max_residual, Some(1.0));
        assert_eq!(r.aggregate.max_ratio, Some(2.0));
        assert!(!r.all_passed());
    }
}
