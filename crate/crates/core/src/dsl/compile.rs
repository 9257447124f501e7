//! Evaluation of documents into engine objects.

use rustc_hash::{FxHashMap, FxHashSet};

use crate::analysis::{self, CheckOptions, GtData, LaxPair};
use crate::atom::{self, AtomId, AtomKind, MultiIndex};
use crate::calculus::{self, FuncRule, RewritePack};
use crate::elementary;
use crate::equation::{self, EquationKind, EquationSpec, Relation};
use crate::expr::Expr;
use crate::geometry::{self, Matrix, Representative};

use super::ast::{Ast, AstKind, BinOp, Deriv};
use super::lexer::Pos;
use super::{CmpOp, Diagnostic, ProblemDocument};

pub const KINDS: &[&str] = &["scalar", "hydrodynamic", "system", "scalar4d"];

const BUILTINS: &[&str] = &["exp", "ln", "log", "sin", "cos", "tan", "arctan", "atan", "sqrt", "D", "diff"];

const OPTION_KEYS: &[&str] = &["representative", "base_order", "leading", "omega", "max_size", "witness"];
const EXPECT_KEYS: &[&str] = &["flat", "ew", "lax", "nullgeo", "omega", "constraints", "gt"];

#[derive(Debug, Clone)]
pub struct Condition {
    pub lhs: Expr,
    pub op: CmpOp,
    pub rhs: Expr,
}

/// Explicit solution: one expression in the independent variables per
/// unknown, valid where every condition holds.
#[derive(Debug, Clone)]
pub struct Solution {
    pub values: Vec<Expr>,
    pub domain: Vec<Condition>,
    pub text: String,
}

#[derive(Debug, Clone)]
pub struct Candidate {
    pub expect_pass: bool,
    /// Function name and body over `calculus::slot` placeholders.
    pub assignments: Vec<(String, Expr)>,
    pub text: String,
}

/// A compiled document.
#[derive(Debug, Clone)]
pub struct Problem {
    pub doc: ProblemDocument,
    pub equation: Option<EquationSpec>,
    pub metric: Option<Matrix>,
    pub omega: Option<Vec<Expr>>,
    pub lax: Option<LaxPair>,
    /// Closures that involve the equation's coefficient functions.
    pub pack: Option<RewritePack>,
    pub solutions: Vec<Solution>,
    pub constraints: Vec<(String, Expr)>,
    pub candidates: Vec<Candidate>,
    pub gt: Option<GtData>,
    pub constants: Vec<AtomId>,
}

impl Problem {
    pub fn name(&self) -> &str {
        &self.doc.name
    }

    pub fn equation(&self) -> Result<&EquationSpec, String> {
        self.equation.as_ref().ok_or_else(|| format!("'{}' has no equation", self.doc.name))
    }

    /// Whether the printed covector is an override rather than the formula.
    pub fn omega_is_override(&self) -> bool {
        self.doc.option("omega") == Some("override")
    }

    /// Check options implied by the document.
    pub fn check_options(&self) -> CheckOptions {
        let rep = self.doc.option("representative").and_then(|r| r.parse::<Representative>().ok());
        let pinned = match rep {
            Some(Representative::Pinned) | None => self.metric.clone(),
            _ => None,
        };
        CheckOptions {
            representative: rep.or(if pinned.is_some() { Some(Representative::Pinned) } else { None }),
            pinned_g: pinned,
            omega_override: if self.omega_is_override() { self.omega.clone() } else { None },
            base_order: self.doc.option("base_order").and_then(|v| v.parse().ok()),
            pack: self.pack.clone(),
            max_size: self.doc.option("max_size").and_then(|v| v.parse().ok()),
            timings: false,
            leading: self.doc.option("leading") == Some("true"),
            witness: self.doc.option("witness") == Some("true"),
        }
    }
}

fn err(pos: Pos, msg: impl Into<String>) -> Diagnostic {
    Diagnostic::new(pos, msg)
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Markers {
    None,
    /// `dx` for a variable `x`.
    Differentials,
    /// `d_x` for a variable `x` and `d_lambda` for the spectral parameter.
    Fields,
}

struct Scope<'a> {
    doc: &'a ProblemDocument,
    vars: Vec<String>,
    unknowns: Vec<String>,
    constants: FxHashMap<String, Expr>,
    functions: FxHashMap<String, usize>,
    lets: FxHashMap<String, usize>,
    locals: Vec<FxHashMap<String, Expr>>,
    /// Arity for bare function references (closures): `eta''` means
    /// `eta''(slot0)`.
    slots: Option<usize>,
    markers: Markers,
    free: Option<EquationSpec>,
    depth: usize,
}

impl<'a> Scope<'a> {
    fn dim(&self) -> usize {
        self.vars.len()
    }

    fn lookup_local(&self, name: &str) -> Option<Expr> {
        self.locals.iter().rev().find_map(|m| m.get(name).cloned())
    }

    fn jet_suffix(&self, name: &str) -> Option<(usize, Vec<u8>)> {
        let (u, letters) = name.split_once('_')?;
        let k = self.unknowns.iter().position(|x| x == u)?;
        if letters.is_empty() || !self.vars.iter().all(|v| v.chars().count() == 1) {
            return None;
        }
        let mut mi = vec![0u8; self.dim()];
        for ch in letters.chars() {
            let j = self.vars.iter().position(|v| v.starts_with(ch))?;
            mi[j] += 1;
        }
        Some((k, mi))
    }

    fn jet(&self, k: usize, mi: &[u8]) -> Expr {
        Expr::atom(atom::jet(&self.unknowns[k], mi))
    }

    fn slot_args(&self, arity: usize) -> Vec<Expr> {
        (0..arity).map(|k| Expr::atom(calculus::slot(k))).collect()
    }

    fn orders(&self, pos: Pos, name: &str, arity: usize, d: &Deriv) -> Result<Vec<u8>, Diagnostic> {
        match d {
            Deriv::None => Ok(vec![0; arity]),
            Deriv::Primes(k) if arity == 1 => Ok(vec![*k]),
            Deriv::Primes(_) => {
                Err(err(pos, format!("'{name}' takes {arity} arguments: use {name}[..] for derivatives")))
            }
            Deriv::Orders(o) if o.len() == arity => Ok(o.clone()),
            Deriv::Orders(o) => {
                Err(err(pos, format!("'{name}' has arity {arity} but {} derivative orders were given", o.len())))
            }
        }
    }

    fn resolve(&mut self, a: &Ast, name: &str, deriv: &Deriv) -> Result<Expr, Diagnostic> {
        let pos = a.pos;
        if *deriv == Deriv::None {
            if let Some(e) = self.lookup_local(name) {
                return Ok(e);
            }
            if let Some(e) = self.constants.get(name) {
                return Ok(e.clone());
            }
            if self.doc.spectral.as_deref() == Some(name) {
                return Ok(Expr::atom(atom::constant(name)));
            }
            if self.vars.iter().any(|v| v == name) {
                return Ok(Expr::atom(atom::var(name)));
            }
            if let Some(k) = self.unknowns.iter().position(|u| u == name) {
                return Ok(self.jet(k, &vec![0; self.dim()]));
            }
            if let Some(&i) = self.lets.get(name) {
                let l = &self.doc.lets[i];
                if !l.params.is_empty() {
                    return Err(err(pos, format!("'{name}' takes {} arguments", l.params.len())));
                }
                return self.expand_let(pos, i, Vec::new());
            }
            match self.markers {
                Markers::Differentials => {
                    if let Some(v) = name.strip_prefix('d') {
                        if self.vars.iter().any(|x| x == v) {
                            return Ok(Expr::atom(atom::marker(name)));
                        }
                    }
                }
                Markers::Fields => {
                    if let Some(v) = name.strip_prefix("d_") {
                        if self.vars.iter().any(|x| x == v) || self.doc.spectral.as_deref() == Some(v) {
                            return Ok(Expr::atom(atom::marker(name)));
                        }
                    }
                }
                Markers::None => {}
            }
            if let Some((k, mi)) = self.jet_suffix(name) {
                return Ok(self.jet(k, &mi));
            }
        }
        if let Some(&arity) = self.functions.get(name) {
            return match self.slots {
                Some(_) => {
                    let o = self.orders(pos, name, arity, deriv)?;
                    Ok(elementary::func(name, &o, self.slot_args(arity)))
                }
                None => Err(err(pos, format!("function '{name}' needs arguments"))),
            };
        }
        if let Deriv::Orders(o) = deriv {
            if let Some(k) = self.unknowns.iter().position(|u| u == name) {
                if o.len() != self.dim() {
                    return Err(err(pos, format!("jet of '{name}' needs {} indices", self.dim())));
                }
                return Ok(self.jet(k, o));
            }
        }
        if BUILTINS.contains(&name) {
            return Err(err(pos, format!("'{name}' needs arguments")));
        }
        Err(err(pos, format!("undeclared identifier '{name}'")))
    }

    fn expand_let(&mut self, pos: Pos, i: usize, args: Vec<Expr>) -> Result<Expr, Diagnostic> {
        if self.depth > 32 {
            return Err(err(pos, "definitions nest too deeply (recursive 'let'?)"));
        }
        let l = &self.doc.lets[i];
        let frame: FxHashMap<String, Expr> = l.params.iter().cloned().zip(args).collect();
        self.locals.push(frame);
        self.depth += 1;
        let out = self.eval(&l.body);
        self.depth -= 1;
        self.locals.pop();
        out
    }

    fn call(&mut self, a: &Ast, name: &str, deriv: &Deriv, args: &[Ast]) -> Result<Expr, Diagnostic> {
        let pos = a.pos;
        if let Some(&arity) = self.functions.get(name) {
            if args.len() != arity {
                return Err(err(pos, format!("'{name}' takes {arity} arguments, got {}", args.len())));
            }
            let o = self.orders(pos, name, arity, deriv)?;
            let vals = args.iter().map(|x| self.eval(x)).collect::<Result<Vec<_>, _>>()?;
            return Ok(elementary::func(name, &o, vals));
        }
        if *deriv != Deriv::None {
            return Err(err(pos, format!("'{name}' is not a declared function")));
        }
        if let Some(&i) = self.lets.get(name) {
            let want = self.doc.lets[i].params.len();
            if args.len() != want {
                return Err(err(pos, format!("'{name}' takes {want} arguments, got {}", args.len())));
            }
            let vals = args.iter().map(|x| self.eval(x)).collect::<Result<Vec<_>, _>>()?;
            return self.expand_let(pos, i, vals);
        }
        let one = |s: &mut Self| -> Result<Expr, Diagnostic> {
            if args.len() != 1 {
                return Err(err(pos, format!("'{name}' takes one argument")));
            }
            s.eval(&args[0])
        };
        match name {
            "exp" => Ok(elementary::exp(&one(self)?)),
            "ln" | "log" => {
                let x = one(self)?;
                if x.is_zero() {
                    return Err(err(pos, "logarithm of zero"));
                }
                Ok(elementary::ln(&x))
            }
            "sin" => Ok(elementary::sin(&one(self)?)),
            "cos" => Ok(elementary::cos(&one(self)?)),
            "tan" => Ok(elementary::tan(&one(self)?)),
            "arctan" | "atan" => Ok(elementary::atan(&one(self)?)),
            "sqrt" => Ok(elementary::sqrt(&one(self)?)),
            "D" => {
                if args.len() != 2 {
                    return Err(err(pos, "D takes an expression and a variable"));
                }
                let e = self.eval(&args[0])?;
                let v = args[1].ident().ok_or_else(|| err(args[1].pos, "expected a variable name"))?;
                let k = self
                    .vars
                    .iter()
                    .position(|x| x == v)
                    .ok_or_else(|| err(args[1].pos, format!("'{v}' is not an independent variable")))?;
                let free = self.free.get_or_insert_with(|| {
                    let vs: Vec<&str> = self.vars.iter().map(|s| s.as_str()).collect();
                    let us: Vec<&str> = self.unknowns.iter().map(|s| s.as_str()).collect();
                    EquationSpec::free(&vs, &us)
                });
                Ok(free.total_derivative_free(&e, k))
            }
            "diff" => {
                let e = match args.first() {
                    Some(x) => self.eval(x)?,
                    None => return Err(err(pos, "diff takes an expression and an optional atom")),
                };
                let by = match args.len() {
                    1 => {
                        if self.slots != Some(1) {
                            return Err(err(
                                pos,
                                "diff(e) needs a closure of a one-argument function; name the atom instead",
                            ));
                        }
                        calculus::slot(0)
                    }
                    2 => {
                        let x = self.eval(&args[1])?;
                        x.as_atom().ok_or_else(|| err(args[1].pos, "expected a single atom to differentiate by"))?
                    }
                    _ => return Err(err(pos, "diff takes an expression and an optional atom")),
                };
                Ok(calculus::partial(&e, by))
            }
            _ => Err(err(pos, format!("unknown function '{name}'"))
                .expecting(vec!["a declared function".into(), "a builtin such as exp, ln, sqrt, D".into()])),
        }
    }

    fn eval(&mut self, a: &Ast) -> Result<Expr, Diagnostic> {
        match &a.kind {
            AstKind::Num(q) => Ok(Expr::rational(q.clone())),
            AstKind::Ref { name, deriv } => self.resolve(a, name, deriv),
            AstKind::Call { name, deriv, args } => self.call(a, name, deriv, args),
            AstKind::Neg(x) => Ok(-self.eval(x)?),
            AstKind::Bin(op, x, y) => {
                let l = self.eval(x)?;
                let r = self.eval(y)?;
                Ok(match op {
                    BinOp::Add => l + r,
                    BinOp::Sub => l - r,
                    BinOp::Mul => l * r,
                    BinOp::Div => {
                        if r.is_zero() {
                            return Err(err(a.pos, "division by zero"));
                        }
                        l.try_div(&r).map_err(|e| err(a.pos, e.to_string()))?
                    }
                })
            }
            AstKind::Pow(x, y) => {
                let b = self.eval(x)?;
                let e = self.eval(y)?;
                if b.is_zero() {
                    if let Some(k) = e.as_constant() {
                        if k.is_negative() || k.is_zero() {
                            return Err(err(a.pos, "zero raised to a non-positive power"));
                        }
                        return Ok(Expr::zero());
                    }
                }
                if let Some(k) = e.as_constant() {
                    if let Some((n, d)) = k.as_small() {
                        if (d == 1 || d == 2) && n.abs() <= 64 {
                            return Ok(elementary::pow(&b, &e));
                        }
                    }
                    return Err(err(a.pos, format!("unsupported constant exponent {k}")));
                }
                Ok(elementary::pow(&b, &e))
            }
        }
    }

    fn eval_with(&mut self, a: &Ast, markers: Markers) -> Result<Expr, Diagnostic> {
        let prev = self.markers;
        self.markers = markers;
        let out = self.eval(a);
        self.markers = prev;
        out
    }

    fn eval_bound(&mut self, a: &Ast, frame: FxHashMap<String, Expr>) -> Result<Expr, Diagnostic> {
        self.locals.push(frame);
        let out = self.eval(a);
        self.locals.pop();
        out
    }
}

fn check_ident(pos: Pos, name: &str, taken: &mut FxHashSet<String>) -> Result<(), Diagnostic> {
    if BUILTINS.contains(&name) {
        return Err(err(pos, format!("'{name}' is a builtin and cannot be redeclared")));
    }
    if !taken.insert(name.to_string()) {
        return Err(err(pos, format!("'{name}' is declared twice")));
    }
    Ok(())
}

fn kind_of(doc: &ProblemDocument, scope: &Scope<'_>, principals: &[(usize, MultiIndex)]) -> EquationKind {
    match doc.kind.as_deref() {
        Some("scalar") => return EquationKind::ScalarSecondOrder,
        Some("hydrodynamic") => return EquationKind::HydrodynamicSystem,
        Some("system") => return EquationKind::SecondOrderSystem,
        Some("scalar4d") => return EquationKind::Scalar4d,
        _ => {}
    }
    if scope.dim() == 4 {
        EquationKind::Scalar4d
    } else if scope.unknowns.len() == 1 {
        EquationKind::ScalarSecondOrder
    } else if principals.iter().all(|(_, mi)| mi.iter().map(|&k| k as usize).sum::<usize>() == 1) {
        EquationKind::HydrodynamicSystem
    } else {
        EquationKind::SecondOrderSystem
    }
}

fn func_names(e: &Expr) -> FxHashSet<String> {
    e.atoms_deep()
        .into_iter()
        .filter_map(|a| match atom::kind(a) {
            AtomKind::Func { name, .. } => Some(name.to_string()),
            _ => None,
        })
        .collect()
}

/// Evaluates a parsed document.
pub fn compile(doc: &ProblemDocument) -> Result<Problem, Diagnostic> {
    let top = Pos { line: 1, col: 1 };
    let mut taken: FxHashSet<String> = FxHashSet::default();
    if !doc.variables.is_empty() && !(3..=4).contains(&doc.variables.len()) {
        return Err(err(top, "documents need three or four independent variables"));
    }
    for v in doc.variables.iter().chain(&doc.unknowns) {
        check_ident(top, v, &mut taken)?;
    }
    if let Some(s) = &doc.spectral {
        check_ident(top, s, &mut taken)?;
    }
    let mut scope = Scope {
        doc,
        vars: doc.variables.clone(),
        unknowns: doc.unknowns.clone(),
        constants: FxHashMap::default(),
        functions: FxHashMap::default(),
        lets: FxHashMap::default(),
        locals: Vec::new(),
        slots: None,
        markers: Markers::None,
        free: None,
        depth: 0,
    };
    let mut constants = Vec::new();
    for c in &doc.constants {
        check_ident(c.pos, &c.name, &mut taken)?;
        let a = atom::constant(&c.name);
        constants.push(a);
        scope.constants.insert(c.name.clone(), Expr::atom(a));
    }
    for f in &doc.functions {
        check_ident(f.pos, &f.name, &mut taken)?;
        scope.functions.insert(f.name.clone(), f.arity as usize);
    }
    for (i, l) in doc.lets.iter().enumerate() {
        check_ident(l.pos, &l.name, &mut taken)?;
        scope.lets.insert(l.name.clone(), i);
    }
    // Constant relations, in declaration order.
    let defined: Vec<AtomId> =
        doc.constants.iter().filter(|c| c.value.is_some()).map(|c| atom::constant(&c.name)).collect();
    for c in &doc.constants {
        if let Some(v) = &c.value {
            let e = scope.eval(v)?;
            if e.atoms_deep().iter().any(|a| defined.contains(a)) {
                return Err(err(v.pos, format!("relation for '{}' refers to another defined constant", c.name)));
            }
            if e.atoms_deep().iter().any(|&a| atom::jet_order(a) > 0 || atom::is_jet(a)) {
                return Err(err(v.pos, format!("constant '{}' cannot depend on the unknowns", c.name)));
            }
            scope.constants.insert(c.name.clone(), e);
        }
    }

    // Closures.
    let mut rules = Vec::new();
    for c in &doc.closures {
        let (name, deriv) = match &c.head.kind {
            AstKind::Ref { name, deriv } => (name.clone(), deriv.clone()),
            _ => return Err(err(c.pos, "closure must start with a function derivative")),
        };
        let arity = *scope
            .functions
            .get(&name)
            .ok_or_else(|| err(c.head.pos, format!("'{name}' is not a declared function")))?;
        if deriv == Deriv::None {
            return Err(err(c.head.pos, "closure left-hand side must be a derivative such as eta'''"));
        }
        let orders = scope.orders(c.head.pos, &name, arity, &deriv)?;
        let mut frame = FxHashMap::default();
        if let Some(ps) = &c.params {
            if ps.len() != arity {
                return Err(err(c.head.pos, format!("'{name}' takes {arity} arguments")));
            }
            for (k, p) in ps.iter().enumerate() {
                frame.insert(p.clone(), Expr::atom(calculus::slot(k)));
            }
        }
        scope.slots = Some(arity);
        let rhs = scope.eval_bound(&c.rhs, frame);
        scope.slots = None;
        let rhs = rhs?;
        let lhs_atom = atom::func(&name, &orders, scope.slot_args(arity));
        if rhs.atoms_deep().iter().any(|&a| {
            matches!(atom::kind(a), AtomKind::Func { name: n, orders: o, .. }
                if *n == *name && o.iter().zip(&orders).all(|(x, y)| x >= y))
        }) {
            return Err(err(
                c.rhs.pos,
                format!("closure for {} uses a derivative it should eliminate", atom::render_atom(lhs_atom)),
            ));
        }
        rules.push(FuncRule { name, orders, rhs });
    }
    let pack = if rules.is_empty() {
        None
    } else {
        Some(RewritePack { name: doc.pack.clone().unwrap_or_else(|| "closures".into()), rules })
    };

    // Equation.
    let mut equation = None;
    if !doc.equation.is_empty() {
        if doc.variables.is_empty() || doc.unknowns.is_empty() {
            return Err(err(doc.equation[0].pos, "an equation needs 'variables:' and 'unknowns:'"));
        }
        let mut rels: Vec<(usize, MultiIndex, Expr, Pos)> = Vec::new();
        for r in &doc.equation {
            let (principal, rhs) = match &r.solve_for {
                Some(j) => {
                    let p = scope.eval(j)?;
                    let a = p
                        .as_atom()
                        .filter(|&a| atom::is_jet(a))
                        .ok_or_else(|| err(j.pos, "expected a jet coordinate"))?;
                    let f = scope.eval(&r.lhs)? - scope.eval(&r.rhs)?;
                    let rhs = equation::solve_linear(&f, a).map_err(|e| err(r.pos, e.to_string()))?;
                    (a, rhs)
                }
                None => {
                    let p = scope.eval(&r.lhs)?;
                    let a = p.as_atom().filter(|&a| atom::is_jet(a)).ok_or_else(|| {
                        err(r.lhs.pos, "left-hand side must be a single jet; write 'solve <jet>: lhs = rhs' otherwise")
                    })?;
                    let rhs = scope.eval(&r.rhs)?;
                    if rhs.atoms_deep().contains(&a) {
                        return Err(err(r.rhs.pos, "right-hand side contains the principal jet"));
                    }
                    (a, rhs)
                }
            };
            let (unknown, mi) = match atom::kind(principal) {
                AtomKind::Jet { unknown, mi } => (scope.unknowns.iter().position(|u| **u == *unknown).unwrap(), mi),
                _ => unreachable!(),
            };
            if rels.iter().any(|(u, m, _, _)| *u == unknown && *m == mi) {
                return Err(err(r.pos, "two relations share a principal jet"));
            }
            rels.push((unknown, mi, rhs, r.pos));
        }
        let principals: Vec<(usize, MultiIndex)> = rels.iter().map(|(u, m, _, _)| (*u, m.clone())).collect();
        let kind = kind_of(doc, &scope, &principals);
        let first = rels[0].3;
        let relations =
            rels.into_iter().map(|(unknown, principal, rhs, _)| Relation { unknown, principal, rhs }).collect();
        let vs: Vec<&str> = doc.variables.iter().map(|s| s.as_str()).collect();
        let us: Vec<&str> = doc.unknowns.iter().map(|s| s.as_str()).collect();
        let eq = EquationSpec::new(&doc.name, &vs, &us, relations, kind).map_err(|e| err(first, e.to_string()))?;
        equation = Some(eq);
    }

    // Which checks the closures belong to.
    let (eq_pack, lax_pack) = match (&pack, &equation) {
        (Some(p), Some(eq)) => {
            let names: FxHashSet<String> = p.rules.iter().map(|r| r.name.clone()).collect();
            let used = eq.relations.iter().any(|r| func_names(&r.rhs).iter().any(|n| names.contains(n)));
            if used {
                (Some(p.clone()), None)
            } else {
                (None, Some(p.clone()))
            }
        }
        (Some(p), None) => (None, Some(p.clone())),
        _ => (None, None),
    };

    let diffs: Vec<AtomId> = doc.variables.iter().map(|v| atom::marker(&format!("d{v}"))).collect();
    let metric = match &doc.metric {
        Some(m) => {
            let q = scope.eval_with(m, Markers::Differentials)?;
            Some(geometry::quadratic_form_matrix(&q, &diffs).map_err(|e| err(m.pos, format!("metric: {e}")))?)
        }
        None => None,
    };
    let omega = match &doc.omega {
        Some(o) => {
            let w = scope.eval_with(o, Markers::Differentials)?;
            Some(
                analysis::linear_coefficients(&w, &diffs)
                    .ok_or_else(|| err(o.pos, "covector must be linear in the differentials"))?,
            )
        }
        None => None,
    };

    let lax = if doc.lax.is_empty() {
        None
    } else {
        let lam = doc.spectral.as_deref().ok_or_else(|| err(doc.lax[0].1.pos, "a Lax pair needs 'spectral:'"))?;
        let mut fields: Vec<AtomId> = doc.variables.iter().map(|v| atom::marker(&format!("d_{v}"))).collect();
        fields.push(atom::marker(&format!("d_{lam}")));
        let mut x = None;
        let mut y = None;
        for (name, e) in &doc.lax {
            let v = scope.eval_with(e, Markers::Fields)?;
            let c = analysis::linear_coefficients(&v, &fields)
                .ok_or_else(|| err(e.pos, "vector field must be linear in d_x, d_y, ..."))?;
            let slot = if name == "X" { &mut x } else { &mut y };
            if slot.is_some() {
                return Err(err(e.pos, format!("field {name} given twice")));
            }
            *slot = Some(c);
        }
        match (x, y) {
            (Some(x), Some(y)) => {
                let mut l = LaxPair::new(atom::constant(lam), x, y);
                l.pack = lax_pack;
                Some(l)
            }
            _ => return Err(err(doc.lax[0].1.pos, "a Lax pair needs both X and Y")),
        }
    };

    let mut solutions = Vec::new();
    for s in &doc.solutions {
        let mut values = vec![Expr::zero(); doc.unknowns.len()];
        let mut seen = vec![false; doc.unknowns.len()];
        for (name, e) in &s.values {
            let k = doc
                .unknowns
                .iter()
                .position(|u| u == name)
                .ok_or_else(|| err(s.pos, format!("'{name}' is not an unknown")))?;
            let v = scope.eval(e)?;
            if v.atoms_deep().iter().any(|&a| atom::is_jet(a)) {
                return Err(err(e.pos, "a solution must be an expression in the independent variables"));
            }
            values[k] = v;
            seen[k] = true;
        }
        if let Some(k) = seen.iter().position(|s| !s) {
            return Err(err(s.pos, format!("solution does not give '{}'", doc.unknowns[k])));
        }
        let domain = s
            .domain
            .iter()
            .map(|c| Ok(Condition { lhs: scope.eval(&c.lhs)?, op: c.op, rhs: scope.eval(&c.rhs)? }))
            .collect::<Result<Vec<_>, Diagnostic>>()?;
        let text = super::render_solution(s);
        solutions.push(Solution { values, domain, text });
    }

    // Constraints are differential conditions on the declared functions, so
    // bare references like f[1,0] stand for derivatives at the slot arguments.
    let mut constraints = Vec::new();
    scope.slots = scope.functions.values().copied().max();
    for (i, c) in doc.constraints.iter().enumerate() {
        let e = scope.eval(&c.lhs).and_then(|l| Ok(l - scope.eval(&c.rhs)?));
        let e = match e {
            Ok(e) => e,
            Err(d) => {
                scope.slots = None;
                return Err(d);
            }
        };
        constraints.push((c.label.clone().unwrap_or_else(|| format!("c{}", i + 1)), e));
    }
    scope.slots = None;
    let mut candidates = Vec::new();
    for c in &doc.candidates {
        let mut assignments = Vec::new();
        for a in &c.assignments {
            let arity = *scope
                .functions
                .get(&a.name)
                .ok_or_else(|| err(c.pos, format!("'{}' is not a declared function", a.name)))?;
            if a.params.len() != arity {
                return Err(err(c.pos, format!("'{}' takes {arity} arguments", a.name)));
            }
            let frame = a.params.iter().enumerate().map(|(k, p)| (p.clone(), Expr::atom(calculus::slot(k)))).collect();
            assignments.push((a.name.clone(), scope.eval_bound(&a.body, frame)?));
        }
        candidates.push(Candidate { expect_pass: c.expect_pass, assignments, text: super::render_candidate(c) });
    }

    let gt = if doc.gt.is_empty() { None } else { Some(compile_gt(doc, &mut scope)?) };

    for s in &doc.options {
        if !OPTION_KEYS.contains(&s.key.as_str()) {
            return Err(err(s.pos, format!("unknown option '{}'", s.key))
                .expecting(OPTION_KEYS.iter().map(|k| k.to_string()).collect()));
        }
        let ok = match s.key.as_str() {
            "representative" => s.value.parse::<Representative>().is_ok(),
            "base_order" | "max_size" => s.value.parse::<usize>().is_ok(),
            "leading" | "witness" => s.value == "true" || s.value == "false",
            "omega" => s.value == "formula" || s.value == "override",
            _ => true,
        };
        if !ok {
            return Err(err(s.pos, format!("invalid value '{}' for option '{}'", s.value, s.key)));
        }
    }
    for s in &doc.expect {
        if !EXPECT_KEYS.contains(&s.key.as_str()) {
            return Err(err(s.pos, format!("unknown expectation '{}'", s.key))
                .expecting(EXPECT_KEYS.iter().map(|k| k.to_string()).collect()));
        }
        let ok = match s.key.as_str() {
            "omega" => s.value == "formula" || s.value == "override",
            _ => matches!(s.value.as_str(), "pass" | "fail" | "degenerate"),
        };
        if !ok {
            return Err(err(s.pos, format!("invalid expectation '{}' for '{}'", s.value, s.key)));
        }
    }
    if doc.option("omega") == Some("override") && omega.is_none() {
        return Err(err(top, "option 'omega = override' needs an 'omega:' section"));
    }

    Ok(Problem {
        doc: doc.clone(),
        equation,
        metric,
        omega,
        lax,
        pack: eq_pack,
        solutions,
        constraints,
        candidates,
        gt,
        constants,
    })
}

fn compile_gt(doc: &ProblemDocument, scope: &mut Scope<'_>) -> Result<GtData, Diagnostic> {
    let get = |k: &str| doc.gt.iter().find(|(n, _)| n == k).map(|(_, v)| v);
    for (n, v) in &doc.gt {
        if !["invariants", "mu", "u", "lambda", "w"].contains(&n.as_str()) {
            return Err(err(v[0].pos, format!("unknown entry '{n}'")).expecting(vec![
                "invariants".into(),
                "mu".into(),
                "u".into(),
                "lambda".into(),
                "w".into(),
            ]));
        }
    }
    let inv = get("invariants").ok_or_else(|| err(Pos { line: 1, col: 1 }, "gt data needs 'invariants = ...'"))?;
    let mut frame = FxHashMap::default();
    let mut invariants = Vec::new();
    for a in inv {
        let n = a.ident().ok_or_else(|| err(a.pos, "expected a name"))?;
        let id = atom::var(n);
        invariants.push(id);
        frame.insert(n.to_string(), Expr::atom(id));
    }
    let mut list = |k: &str| -> Result<Option<Vec<Expr>>, Diagnostic> {
        match get(k) {
            None => Ok(None),
            Some(v) => v.iter().map(|a| scope.eval_bound(a, frame.clone())).collect::<Result<Vec<_>, _>>().map(Some),
        }
    };
    let mu = list("mu")?.ok_or_else(|| err(inv[0].pos, "gt data needs 'mu = ...'"))?;
    let u = list("u")?.ok_or_else(|| err(inv[0].pos, "gt data needs 'u = ...'"))?;
    let lambda = list("lambda")?;
    let w = list("w")?;
    if u.len() != 1 || w.as_ref().map(|w| w.len() != 1).unwrap_or(false) {
        return Err(err(inv[0].pos, "'u' and 'w' take a single expression"));
    }
    Ok(GtData { invariants, mu, u: u[0].clone(), lambda, w: w.map(|w| w[0].clone()) })
}

/// Substitutes an explicit solution into every jet of `e`.
pub fn on_solution(eq: &EquationSpec, sol: &Solution, e: &Expr) -> Expr {
    let mut rules: FxHashMap<AtomId, Expr> = FxHashMap::default();
    for a in e.atoms_deep() {
        if let Some((u, mi)) = eq.jet_of(a) {
            let mut d = sol.values[u].clone();
            for (k, &m) in mi.iter().enumerate() {
                for _ in 0..m {
                    d = calculus::partial(&d, eq.var_atoms[k]);
                }
            }
            rules.insert(a, d);
        }
    }
    calculus::substitute(e, &rules)
}

/// Every relation vanishes on the solution.
pub fn solution_satisfies(eq: &EquationSpec, sol: &Solution) -> bool {
    (0..eq.relations.len()).all(|i| on_solution(eq, sol, &eq.relation_lhs(i)).is_zero())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse;

    fn problem(src: &str) -> Result<Problem, Diagnostic> {
        compile(&parse(src).map_err(|e| {
            panic!("parse: {e}");
        })?)
    }

    #[test]
    fn dkp_document() {
        let p = problem(
            "name: dkp\nvariables: x, y, t\nunknowns: u\nequation:\n    u_xt = u*u_xx + u_x^2 + u_yy\nmetric: 4*dx*dt - dy^2 + 4*u*dt^2\nomega: -4*u_x*dt\nsolutions:\n    u = -x/t where t != 0\n",
        )
        .unwrap();
        let eq = p.equation.as_ref().unwrap();
        assert_eq!(eq.kind, EquationKind::ScalarSecondOrder);
        let g = p.metric.as_ref().unwrap();
        assert!(g[0][2].same(&Expr::int(2)));
        assert!(g[1][1].same(&Expr::int(-1)));
        assert!(solution_satisfies(eq, &p.solutions[0]));
    }

    #[test]
    fn bracket_and_suffix_jets_agree() {
        let p =
            problem("name: a\nvariables: x, y, t\nunknowns: u\nequation:\n    u[0,0,2] = u_xx + u[0,2,0]\n").unwrap();
        let eq = p.equation.unwrap();
        assert_eq!(eq.relations[0].principal.as_slice(), &[0, 0, 2]);
    }

    #[test]
    fn closures_and_functions() {
        let p = problem(
            "name: chazy\nvariables: x, y, t\nunknowns: u\nfunctions: eta(1)\npack: chazy\nclosures:\n    eta''' = 3*eta'^2 - 2*eta*eta''\nequation:\n    u_tt = u_xy/u_xt + (1/6)*eta(u_xx)*u_xt^2\n",
        )
        .unwrap();
        let pack = p.pack.unwrap();
        assert_eq!(pack.name, "chazy");
        assert_eq!(pack.rules[0].orders, vec![3]);
    }

    #[test]
    fn implicit_relation_is_solved() {
        let p = problem("name: bf\nvariables: x, y, t\nunknowns: u\nequation:\n    solve u_tt: u_xx + u_yy - D(D(exp(u), t), t) = 0\n").unwrap();
        let eq = p.equation.unwrap();
        let u = |mi: &[u8]| Expr::atom(atom::jet("u", mi));
        let want = elementary::exp(&-u(&[0, 0, 0])) * (u(&[2, 0, 0]) + u(&[0, 2, 0])) - u(&[0, 0, 1]).powi(2);
        assert!(eq.relations[0].rhs.same(&want));
    }

    #[test]
    fn semantic_errors_are_located() {
        let e = problem("name: a\nvariables: x, y, t\nunknowns: u\nequation:\n    u_tt = u_xx + q\n").unwrap_err();
        assert!(e.message.contains("undeclared identifier 'q'"));
        assert_eq!((e.pos.line, e.pos.col), (5, 19));
        let e = problem("name: a\nvariables: x, y, t\nunknowns: u\nfunctions: f(2)\nequation:\n    u_tt = f(u_xx)\n")
            .unwrap_err();
        assert!(e.message.contains("takes 2 arguments"));
        let e = problem("name: a\nvariables: x, y, t\nunknowns: u\nequation:\n    u_tt*u_xx = u_yy\n").unwrap_err();
        assert!(e.message.contains("single jet"));
    }

    #[test]
    fn constant_relations_substitute() {
        let p = problem("name: a\nconstants: beta, gamma, alpha = -beta - gamma\nvariables: x, y, t\nunknowns: u\nequation:\n    u_tt = alpha*u_xx + beta*u_yy + gamma*u_xy\n").unwrap();
        let rhs = &p.equation.unwrap().relations[0].rhs;
        let b = Expr::atom(atom::constant("beta"));
        let g = Expr::atom(atom::constant("gamma"));
        let u = |mi: &[u8]| Expr::atom(atom::jet("u", mi));
        let want = -(&b + &g) * u(&[2, 0, 0]) + &b * u(&[0, 2, 0]) + &g * u(&[1, 1, 0]);
        assert!(rhs.same(&want));
    }
}
