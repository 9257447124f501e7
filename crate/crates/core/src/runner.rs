//! Runs the checks a compiled document asks for.

use std::fmt;
use std::str::FromStr;

use rustc_hash::FxHashMap;
use serde::Serialize;

use crate::analysis::{self, AnalysisError, CheckOptions, Mode, Residual, Verdict, VerdictReport};
use crate::atom::{self, AtomId, AtomKind};
use crate::calculus;
use crate::dsl::Problem;
use crate::expr::Expr;
use crate::poly::Monomial;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckKind {
    Flat,
    Ew,
    Lax,
    Nullgeo,
    Omega,
    Constraints,
    Gt,
}

impl CheckKind {
    pub const ALL: [CheckKind; 7] = [
        CheckKind::Flat,
        CheckKind::Ew,
        CheckKind::Lax,
        CheckKind::Nullgeo,
        CheckKind::Omega,
        CheckKind::Constraints,
        CheckKind::Gt,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CheckKind::Flat => "flat",
            CheckKind::Ew => "ew",
            CheckKind::Lax => "lax",
            CheckKind::Nullgeo => "nullgeo",
            CheckKind::Omega => "omega",
            CheckKind::Constraints => "constraints",
            CheckKind::Gt => "gt",
        }
    }
}

impl fmt::Display for CheckKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CheckKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        CheckKind::ALL.into_iter().find(|k| k.as_str() == s).ok_or_else(|| format!("unknown check '{s}'"))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    /// The document lacks what the check needs.
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
}

impl RunError {
    pub fn is_limit(&self) -> bool {
        matches!(self, RunError::Analysis(AnalysisError::Limit(_)))
    }
}

fn need<'a, T>(x: Option<&'a T>, what: &str, p: &Problem) -> Result<&'a T, RunError> {
    x.ok_or_else(|| RunError::Input(format!("'{}' has no {what}", p.name())))
}

/// Runs one check with explicit options (normally `p.check_options()`
/// adjusted by the caller).
pub fn run_check(p: &Problem, kind: CheckKind, opts: &CheckOptions) -> Result<VerdictReport, RunError> {
    let eq = || p.equation().map_err(RunError::Input);
    Ok(match kind {
        CheckKind::Flat => analysis::check_cotton_flat(eq()?, opts)?,
        CheckKind::Ew => analysis::check_einstein_weyl(eq()?, opts)?,
        CheckKind::Lax => analysis::check_lax(eq()?, need(p.lax.as_ref(), "Lax pair", p)?, opts)?,
        CheckKind::Nullgeo => analysis::check_null_geodesic(eq()?, need(p.lax.as_ref(), "Lax pair", p)?, opts)?,
        CheckKind::Omega => check_omega(p, opts)?,
        CheckKind::Constraints => check_constraints(p, opts)?,
        CheckKind::Gt => analysis::gt_residual_check(p.name(), need(p.gt.as_ref(), "gt data", p)?)?,
    })
}

/// Compares the printed covector with the universal formula applied to the
/// document's metric. Passes when they agree modulo the equation.
pub fn check_omega(p: &Problem, opts: &CheckOptions) -> Result<VerdictReport, RunError> {
    let eq = p.equation().map_err(RunError::Input)?;
    let printed = need(p.omega.as_ref(), "printed covector", p)?;
    let mut o = opts.clone();
    o.omega_override = None;
    let c = analysis::weyl_data(eq, &o)?;
    let formula = c.omega.clone().unwrap_or_default();
    let mut rep = blank_report("check-omega", p);
    rep.assumptions.push(("representative".into(), c.representative.as_str().into()));
    if let Some(pk) = &o.pack {
        rep.assumptions.push(("rewrite_pack".into(), pk.name.clone()));
    }
    for (k, (f, w)) in formula.iter().zip(printed).enumerate() {
        rep.outputs.push((format!("omega[{k}]"), f.clone()));
        let mut d = eq.reduce_mod(&(f - w));
        if let Some(pk) = o.pack.as_ref().filter(|pk| !pk.is_empty()) {
            d = eq.reduce_mod(&pk.apply(&d).map_err(AnalysisError::from)?);
        }
        if !d.is_zero() {
            rep.residuals.push(Residual {
                component: format!("omega[{k}]"),
                monomial: Monomial::one(),
                coefficient: d,
            });
        }
    }
    rep.verdict = if rep.residuals.is_empty() { Verdict::Pass } else { Verdict::Fail };
    if p.omega_is_override() {
        rep.notes.push("the document marks its covector as an override of the formula".into());
    }
    Ok(rep)
}

fn blank_report(check: &str, p: &Problem) -> VerdictReport {
    let vars = p.equation.as_ref().map(|e| e.vars.clone()).unwrap_or_default();
    VerdictReport {
        check: check.into(),
        subject: p.name().into(),
        verdict: Verdict::Pass,
        residuals: Vec::new(),
        assumptions: Vec::new(),
        outputs: Vec::new(),
        notes: Vec::new(),
        stats: Default::default(),
        vars,
    }
}

/// Replaces every function atom's arguments by slot placeholders, so
/// conditions derived on an equation compare with conditions written on the
/// bare functions.
pub fn slot_form(e: &Expr) -> Expr {
    let mut rules: FxHashMap<AtomId, Expr> = FxHashMap::default();
    for a in e.atoms_deep() {
        if let AtomKind::Func { name, orders, args } = atom::kind(a) {
            let slots = (0..args.len()).map(|k| Expr::atom(calculus::slot(k))).collect();
            rules.insert(a, Expr::atom(atom::func(&name, &orders, slots)));
        }
    }
    calculus::substitute(e, &rules)
}

fn func_order(a: AtomId) -> Option<usize> {
    match atom::kind(a) {
        AtomKind::Func { orders, .. } => Some(orders.iter().map(|&o| o as usize).sum()),
        _ => None,
    }
}

/// Coefficients of `e` as an affine form in `unknowns`, constant term first.
fn affine_coefficients(e: &Expr, unknowns: &[AtomId]) -> Option<Vec<Expr>> {
    let parts = e.collect(|a| unknowns.contains(&a))?;
    let mut v = vec![Expr::zero(); unknowns.len() + 1];
    for (m, c) in parts {
        match m.vars() {
            [] => v[0] = &v[0] + &c,
            [(a, 1)] => {
                let k = unknowns.iter().position(|u| u == a)? + 1;
                v[k] = &v[k] + &c;
            }
            _ => return None,
        }
    }
    Some(v)
}

/// Checks the document's constraint system. With an equation, the
/// constraints are derived from the flatness (or Einstein-Weyl) residuals and
/// compared by mutual reduction; otherwise each candidate is substituted.
pub fn check_constraints(p: &Problem, opts: &CheckOptions) -> Result<VerdictReport, RunError> {
    if p.constraints.is_empty() {
        return Err(RunError::Input(format!("'{}' has no constraints", p.name())));
    }
    match &p.equation {
        Some(eq) => {
            let mode = if p.doc.expectation("ew").is_some() && p.doc.expectation("flat").is_none() {
                Mode::Ew
            } else {
                Mode::Flat
            };
            let mut rep = analysis::derive_constraints(eq, mode, opts)?;
            let derived: Vec<Expr> = rep.residuals.iter().map(|r| slot_form(&r.coefficient)).collect();
            compare_spans(&mut rep, &derived, &p.constraints);
            Ok(rep)
        }
        None => Ok(check_candidates(p)),
    }
}

/// Mutual reduction of two sets of conditions, each affine in the
/// highest-order function derivatives they contain.
fn compare_spans(rep: &mut VerdictReport, derived: &[Expr], given: &[(String, Expr)]) {
    let top = given
        .iter()
        .map(|(_, e)| e)
        .chain(derived)
        .flat_map(|e| e.atoms_deep())
        .filter_map(func_order)
        .max()
        .unwrap_or(0);
    let mut unknowns: Vec<AtomId> = given
        .iter()
        .map(|(_, e)| e)
        .chain(derived)
        .flat_map(|e| e.atoms_deep())
        .filter(|&a| func_order(a) == Some(top))
        .collect();
    unknowns.sort_by(|&a, &b| atom::structural_cmp(a, b));
    unknowns.dedup();
    let to_vecs =
        |es: Vec<&Expr>| es.into_iter().map(|e| affine_coefficients(e, &unknowns)).collect::<Option<Vec<_>>>();
    let (dv, gv) = match (to_vecs(derived.iter().collect()), to_vecs(given.iter().map(|(_, e)| e).collect())) {
        (Some(d), Some(g)) => (d, g),
        _ => {
            rep.notes.push("conditions are not affine in their highest derivatives".into());
            rep.verdict = Verdict::Fail;
            return;
        }
    };
    let sd = analysis::LinearSpan::new(&dv);
    let sg = analysis::LinearSpan::new(&gv);
    rep.assumptions.push(("derived_rank".into(), sd.rank().to_string()));
    rep.assumptions.push(("given_rank".into(), sg.rank().to_string()));
    let mut missing = Vec::new();
    for (label, v) in given.iter().map(|(l, _)| l).zip(&gv) {
        if !sd.contains(v) {
            missing.push(Residual {
                component: format!("given {label} not implied"),
                monomial: Monomial::one(),
                coefficient: given.iter().find(|(l, _)| l == label).unwrap().1.clone(),
            });
        }
    }
    for (k, (e, v)) in derived.iter().zip(&dv).enumerate() {
        if !sg.contains(v) {
            missing.push(Residual {
                component: format!("derived #{k} not implied"),
                monomial: Monomial::one(),
                coefficient: e.clone(),
            });
        }
    }
    rep.notes.push(format!("{} derived coefficients against {} given conditions", derived.len(), given.len()));
    rep.residuals = missing;
    rep.verdict = if rep.residuals.is_empty() { Verdict::Pass } else { Verdict::Fail };
    rep.check = "check-constraints".into();
}

fn check_candidates(p: &Problem) -> VerdictReport {
    let vars = Vec::new();
    let mut rep = blank_report("check-constraints", p);
    for (i, c) in p.candidates.iter().enumerate() {
        let r = analysis::check_constraint_system(p.name(), &p.constraints, &c.assignments, &vars);
        let want = if c.expect_pass { "pass" } else { "fail" };
        rep.notes.push(format!("candidate {} ({}): {} (expected {want})", i + 1, c.text, r.verdict.as_str()));
        if r.passed() != c.expect_pass {
            let mut rs = r.residuals;
            for x in rs.iter_mut() {
                x.component = format!("candidate {}: {}", i + 1, x.component);
            }
            if rs.is_empty() {
                rs.push(Residual {
                    component: format!("candidate {}: unexpectedly passes", i + 1),
                    monomial: Monomial::one(),
                    coefficient: Expr::zero(),
                });
            }
            rep.residuals.extend(rs);
        }
    }
    rep.verdict = if rep.residuals.is_empty() { Verdict::Pass } else { Verdict::Fail };
    rep
}

/// Outcome of one expectation written in a document.
#[derive(Debug)]
pub struct Expectation {
    pub check: CheckKind,
    pub expected: String,
    /// Verdict name, or `error` when the check could not run.
    pub actual: String,
    pub report: Option<VerdictReport>,
    pub error: Option<String>,
}

impl Expectation {
    pub fn met(&self) -> bool {
        self.expected == self.actual
    }
}

fn actual_for(kind: CheckKind, v: Verdict) -> &'static str {
    match (kind, v) {
        (CheckKind::Omega, Verdict::Pass) => "formula",
        (CheckKind::Omega, _) => "override",
        (_, v) => v.as_str(),
    }
}

/// Runs every expectation in document order.
pub fn run_expectations(p: &Problem, opts: &CheckOptions) -> Vec<Expectation> {
    let mut out = Vec::new();
    for s in &p.doc.expect {
        let kind: CheckKind = match s.key.parse() {
            Ok(k) => k,
            Err(_) => continue,
        };
        let e = match run_check(p, kind, opts) {
            Ok(r) => Expectation {
                check: kind,
                expected: s.value.clone(),
                actual: actual_for(kind, r.verdict).into(),
                report: Some(r),
                error: None,
            },
            Err(err) => Expectation {
                check: kind,
                expected: s.value.clone(),
                actual: "error".into(),
                report: None,
                error: Some(err.to_string()),
            },
        };
        out.push(e);
    }
    out
}
