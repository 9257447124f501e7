//! Machine (JSON) and human (markdown) renderings of check results.
//!
//! The JSON form is byte-stable for identical inputs: every collection is a
//! vector in computation order and wall-clock times only appear when asked
//! for.

use std::fmt::Write as _;

use serde::Serialize;

use crate::analysis::{Verdict, VerdictReport};
use crate::catalog::EntryOutcome;
use crate::numeric::NumericReport;

pub const SCHEMA_VERSION: u32 = 1;
pub const ENGINE_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Serialize)]
pub struct Engine {
    pub name: &'static str,
    pub version: &'static str,
}

#[derive(Debug, Clone, Serialize)]
pub struct Pair {
    pub name: String,
    pub value: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ResidualEntry {
    pub component: String,
    /// Monomial in the high parametric jets, `1` for a plain coefficient.
    pub monomial: String,
    pub coefficient: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Metrics {
    pub peak_terms: usize,
    pub residual_terms: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub elapsed_ms: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckEntry {
    pub check: String,
    pub subject: String,
    pub verdict: Verdict,
    pub assumptions: Vec<Pair>,
    pub outputs: Vec<Pair>,
    pub residuals: Vec<ResidualEntry>,
    pub notes: Vec<String>,
    pub metrics: Metrics,
}

impl CheckEntry {
    pub fn from_report(r: &VerdictReport) -> CheckEntry {
        CheckEntry {
            check: r.check.clone(),
            subject: r.subject.clone(),
            verdict: r.verdict,
            assumptions: r.assumptions.iter().map(|(k, v)| Pair { name: k.clone(), value: v.clone() }).collect(),
            outputs: r.outputs.iter().map(|(k, e)| Pair { name: k.clone(), value: r.render(e) }).collect(),
            residuals: r
                .residuals
                .iter()
                .map(|x| ResidualEntry {
                    component: x.component.clone(),
                    monomial: r.render_monomial(&x.monomial),
                    coefficient: r.render(&x.coefficient),
                })
                .collect(),
            notes: r.notes.clone(),
            metrics: Metrics {
                peak_terms: r.stats.peak_terms,
                residual_terms: r.stats.residual_terms,
                elapsed_ms: r.stats.elapsed_ms,
            },
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ExpectationRow {
    pub entry: String,
    pub check: String,
    pub expected: String,
    pub actual: String,
    pub met: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

pub fn expectation_rows(outcomes: &[EntryOutcome]) -> Vec<ExpectationRow> {
    let mut rows = Vec::new();
    for o in outcomes {
        if let Some(e) = &o.error {
            rows.push(ExpectationRow {
                entry: o.name.clone(),
                check: "load".into(),
                expected: "ok".into(),
                actual: "error".into(),
                met: false,
                error: Some(e.clone()),
            });
        }
        for x in &o.expectations {
            rows.push(ExpectationRow {
                entry: o.name.clone(),
                check: x.check.to_string(),
                expected: x.expected.clone(),
                actual: x.actual.clone(),
                met: x.met(),
                error: x.error.clone(),
            });
        }
    }
    rows
}

#[derive(Debug, Clone, Serialize)]
pub struct CatalogItem {
    pub name: String,
    pub note: String,
    pub expectations: Vec<Pair>,
}

/// What a command produced; exactly one field besides the header is set.
#[derive(Debug, Clone, Serialize)]
pub struct ReportDocument {
    pub schema_version: u32,
    pub engine: Engine,
    pub command: String,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub checks: Vec<CheckEntry>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub expectations: Vec<ExpectationRow>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub catalog: Vec<CatalogItem>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub numeric: Option<NumericReport>,
}

impl ReportDocument {
    pub fn new(command: &str) -> Self {
        ReportDocument {
            schema_version: SCHEMA_VERSION,
            engine: Engine { name: "ewcheck", version: ENGINE_VERSION },
            command: command.to_string(),
            checks: Vec::new(),
            expectations: Vec::new(),
            catalog: Vec::new(),
            numeric: None,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            check_markdown(&mut out, c);
        }
        if !self.expectations.is_empty() {
            let met = self.expectations.iter().filter(|r| r.met).count();
            let _ = writeln!(out, "# Catalog run: {met}/{} expectations met\n", self.expectations.len());
            out.push_str("| entry | check | expected | actual | |\n|---|---|---|---|---|\n");
            for r in &self.expectations {
                let mark = if r.met { "ok" } else { "MISMATCH" };
                let _ = writeln!(out, "| {} | {} | {} | {} | {mark} |", r.entry, r.check, r.expected, r.actual);
            }
            for r in self.expectations.iter().filter(|r| r.error.is_some()) {
                let _ = writeln!(out, "\n- {} / {}: {}", r.entry, r.check, r.error.as_deref().unwrap_or(""));
            }
            out.push('\n');
        }
        if !self.catalog.is_empty() {
            out.push_str("| entry | expectations | note |\n|---|---|---|\n");
            for c in &self.catalog {
                let ex: Vec<String> = c.expectations.iter().map(|p| format!("{} = {}", p.name, p.value)).collect();
                let _ = writeln!(out, "| {} | {} | {} |", c.name, ex.join(", "), c.note);
            }
            out.push('\n');
        }
        if let Some(n) = &self.numeric {
            numeric_markdown(&mut out, n);
        }
        let _ = writeln!(out, "_ewcheck {}, report schema {}_", self.engine.version, self.schema_version);
        out
    }
}

fn check_markdown(out: &mut String, c: &CheckEntry) {
    let _ = writeln!(out, "# {} `{}`: **{}**\n", c.check, c.subject, c.verdict.as_str());
    if !c.assumptions.is_empty() {
        out.push_str("Assumptions:\n\n");
        for a in &c.assumptions {
            let _ = writeln!(out, "- {}: {}", a.name, a.value);
        }
        out.push('\n');
    }
    if !c.outputs.is_empty() {
        out.push_str("Outputs:\n\n");
        for a in &c.outputs {
            let _ = writeln!(out, "- `{}` = `{}`", a.name, a.value);
        }
        out.push('\n');
    }
    if !c.residuals.is_empty() {
        let _ = writeln!(out, "Residuals ({}):\n", c.residuals.len());
        for r in &c.residuals {
            let _ = writeln!(out, "- {} [{}]: `{}`", r.component, r.monomial, r.coefficient);
        }
        out.push('\n');
    }
    for n in &c.notes {
        let _ = writeln!(out, "> {n}\n");
    }
    let _ = write!(out, "peak terms {}, residual terms {}", c.metrics.peak_terms, c.metrics.residual_terms);
    if let Some(ms) = c.metrics.elapsed_ms {
        let _ = write!(out, ", {ms:.1} ms");
    }
    out.push_str("\n\n");
}

fn numeric_markdown(out: &mut String, n: &NumericReport) {
    let _ = writeln!(out, "# numeric `{}` ({}) on `{}`\n", n.entry, n.which.as_str(), n.solution);
    let _ = writeln!(out, "- grid: {} (h = {})", n.grid, n.h);
    let _ = writeln!(
        out,
        "- residual: {:.3e} (threshold {:.3e}), refined: {:.3e}",
        n.residual, n.threshold, n.residual_refined
    );
    match n.ratio {
        Some(r) => {
            let _ = writeln!(out, "- Richardson ratio: {r:.3}");
        }
        None => out.push_str("- Richardson ratio: indeterminate (both residuals at rounding level)\n"),
    }
    let _ = writeln!(out, "- tensor vanishes numerically: {}", n.vanishes);
    let _ = writeln!(out, "- covector discrepancy: {:.3e}", n.omega_discrepancy);
    let bad = n.agreement.comparisons.iter().filter(|c| !c.agrees).count();
    let _ = writeln!(
        out,
        "- symbolic vs finite differences: {} points, {} comparisons, {} outside the truncation estimate\n",
        n.agreement.points,
        n.agreement.comparisons.len(),
        bad
    );
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::CheckOptions;
    use crate::catalog;
    use crate::runner::{self, CheckKind};

    fn dkp_ew() -> ReportDocument {
        let p = catalog::get("dkp").unwrap();
        let rep = runner::run_check(&p, CheckKind::Ew, &p.check_options()).unwrap();
        let mut d = ReportDocument::new("check-ew");
        d.checks.push(CheckEntry::from_report(&rep));
        d
    }

    #[test]
    fn json_is_stable_and_versioned() {
        let a = dkp_ew().to_json();
        let b = dkp_ew().to_json();
        assert_eq!(a, b);
        let v: serde_json::Value = serde_json::from_str(&a).unwrap();
        assert_eq!(v["schema_version"], SCHEMA_VERSION);
        assert_eq!(v["engine"]["version"], ENGINE_VERSION);
        assert_eq!(v["checks"][0]["verdict"], "pass");
        assert!(v["checks"][0]["metrics"].get("elapsed_ms").is_none());
    }

    #[test]
    fn markdown_lists_the_covector() {
        let md = dkp_ew().to_markdown();
        assert!(md.contains("**pass**"));
        assert!(md.contains("`omega[0]`"));
    }

    #[test]
    fn timings_are_opt_in() {
        let p = catalog::get("dkp").unwrap();
        let opts = CheckOptions { timings: true, ..p.check_options() };
        let rep = runner::run_check(&p, CheckKind::Flat, &opts).unwrap();
        assert!(CheckEntry::from_report(&rep).metrics.elapsed_ms.is_some());
    }
}
