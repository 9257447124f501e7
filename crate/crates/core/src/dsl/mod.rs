//! Problem documents: a plain-text, line-oriented key/block format.
//!
//! A document is a sequence of sections. A section header starts in column
//! one as `key:` and either carries its value on the same line or is
//! followed by indented statement lines. `#` starts a comment. A statement
//! continues onto the next line while brackets are open, when the line ends
//! with a binary operator, or when the next line is indented deeper than the
//! statement's first line. See `docs/format.md` for the grammar.

pub mod ast;
pub mod compile;
pub mod lexer;

use std::fmt;

use self::ast::{Ast, Cursor};
use self::lexer::{depth_change, lex_line, Pos, Tok, Token};

pub use self::compile::{compile, Problem};

/// A located parse or semantic error.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub pos: Pos,
    pub message: String,
    pub expected: Vec<String>,
}

impl Diagnostic {
    pub fn new(pos: Pos, message: impl Into<String>) -> Self {
        Diagnostic { pos, message: message.into(), expected: Vec::new() }
    }

    pub fn expecting(mut self, e: Vec<String>) -> Self {
        self.expected = e;
        self
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}, column {}: {}", self.pos.line, self.pos.col, self.message)?;
        if !self.expected.is_empty() {
            write!(f, " (expected {})", self.expected.join(" or "))?;
        }
        Ok(())
    }
}

impl std::error::Error for Diagnostic {}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstDecl {
    pub name: String,
    pub value: Option<Ast>,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FuncDecl {
    pub name: String,
    pub arity: u8,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LetDecl {
    pub name: String,
    pub params: Vec<String>,
    pub body: Ast,
    pub pos: Pos,
}

/// `eta''' = ...` or `phi[1,0](s, l) = ...`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosureDecl {
    pub head: Ast,
    pub params: Option<Vec<String>>,
    pub rhs: Ast,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelationDecl {
    /// Principal jet when the relation is given implicitly.
    pub solve_for: Option<Ast>,
    pub lhs: Ast,
    pub rhs: Ast,
    pub pos: Pos,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Condition {
    pub lhs: Ast,
    pub op: CmpOp,
    pub rhs: Ast,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolutionDecl {
    pub values: Vec<(String, Ast)>,
    pub domain: Vec<Condition>,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub name: String,
    pub params: Vec<String>,
    pub body: Ast,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateDecl {
    pub expect_pass: bool,
    pub assignments: Vec<Assignment>,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintDecl {
    pub label: Option<String>,
    pub lhs: Ast,
    pub rhs: Ast,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Setting {
    pub key: String,
    pub value: String,
    pub pos: Pos,
}

/// Parsed but not yet evaluated document.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ProblemDocument {
    pub name: String,
    pub aliases: Vec<String>,
    pub note: Option<String>,
    pub kind: Option<String>,
    pub variables: Vec<String>,
    pub unknowns: Vec<String>,
    pub spectral: Option<String>,
    pub constants: Vec<ConstDecl>,
    pub functions: Vec<FuncDecl>,
    pub lets: Vec<LetDecl>,
    pub pack: Option<String>,
    pub closures: Vec<ClosureDecl>,
    pub equation: Vec<RelationDecl>,
    pub metric: Option<Ast>,
    pub omega: Option<Ast>,
    pub lax: Vec<(String, Ast)>,
    pub solutions: Vec<SolutionDecl>,
    pub constraints: Vec<ConstraintDecl>,
    pub candidates: Vec<CandidateDecl>,
    pub gt: Vec<(String, Vec<Ast>)>,
    pub options: Vec<Setting>,
    pub expect: Vec<Setting>,
}

impl ProblemDocument {
    pub fn option(&self, key: &str) -> Option<&str> {
        self.options.iter().find(|s| s.key == key).map(|s| s.value.as_str())
    }

    pub fn expectation(&self, key: &str) -> Option<&str> {
        self.expect.iter().find(|s| s.key == key).map(|s| s.value.as_str())
    }
}

pub const SECTIONS: &[&str] = &[
    "name",
    "aliases",
    "note",
    "kind",
    "variables",
    "unknowns",
    "spectral",
    "constants",
    "functions",
    "let",
    "pack",
    "closures",
    "equation",
    "metric",
    "omega",
    "lax",
    "solutions",
    "constraints",
    "candidates",
    "gt",
    "options",
    "expect",
];

/// Sections whose value is kept as raw text.
const RAW: &[&str] = &["name", "aliases", "note", "kind", "pack"];

struct Line {
    num: usize,
    indent: usize,
    text: String,
}

/// A statement: tokens from one or more physical lines.
struct Stmt {
    toks: Vec<Token>,
    start: Pos,
    end: Pos,
}

impl Stmt {
    fn cursor(&self) -> Cursor<'_> {
        Cursor::new(&self.toks, self.end)
    }
}

fn lex_err(e: lexer::LexError) -> Diagnostic {
    Diagnostic::new(e.pos, format!("unexpected character '{}'", e.ch))
}

fn physical_lines(src: &str) -> Vec<Line> {
    src.lines()
        .enumerate()
        .map(|(i, raw)| {
            let text = match raw.find('#') {
                Some(k) => &raw[..k],
                None => raw,
            };
            let indent = text.chars().take_while(|c| *c == ' ' || *c == '\t').count();
            Line { num: i + 1, indent, text: text.trim_end().to_string() }
        })
        .collect()
}

/// Splits a run of lines into statements, joining continuation lines.
/// `header` is the line number of the section header when its value starts
/// on the same line; that statement counts as starting in column one.
fn statements(lines: &[(usize, usize, String)], header: Option<usize>) -> Result<Vec<Stmt>, Diagnostic> {
    let mut out: Vec<Stmt> = Vec::new();
    let lead = |s: &Stmt| if Some(s.start.line) == header { 1 } else { s.start.col };
    let mut open: Option<(Vec<Token>, i64)> = None;
    for (num, col0, text) in lines {
        let toks = lex_line(text, *num, *col0).map_err(lex_err)?;
        let end = Pos { line: *num, col: col0 + text.chars().count() };
        if toks.is_empty() {
            continue;
        }
        // A line indented deeper than the statement it follows continues it.
        if open.is_none() && out.last().map(|s| *col0 > lead(s)).unwrap_or(false) {
            let prev = out.pop().unwrap();
            open = Some((prev.toks, 0));
        }
        let (mut acc, mut depth) = open.take().unwrap_or_default();
        depth += depth_change(&toks);
        acc.extend(toks);
        let trailing = acc.last().map(|t| t.tok.continues()).unwrap_or(false);
        if depth > 0 || trailing {
            open = Some((acc, depth));
            continue;
        }
        let start = acc[0].pos;
        out.push(Stmt { toks: acc, start, end });
    }
    if let Some((acc, _)) = open {
        // Unterminated: point at the dangling token.
        let end = acc.last().unwrap().pos;
        let start = acc[0].pos;
        out.push(Stmt { toks: acc, start, end });
    }
    Ok(out)
}

/// Parses a document.
pub fn parse(src: &str) -> Result<ProblemDocument, Diagnostic> {
    let lines = physical_lines(src);
    let mut doc = ProblemDocument::default();
    let mut seen: Vec<String> = Vec::new();
    let mut i = 0;
    while i < lines.len() {
        let l = &lines[i];
        if l.text.trim().is_empty() {
            i += 1;
            continue;
        }
        let pos = Pos { line: l.num, col: l.indent + 1 };
        if l.indent > 0 {
            return Err(
                Diagnostic::new(pos, "indented line outside a section").expecting(vec!["section header".into()])
            );
        }
        let (key, rest) = match l.text.split_once(':') {
            Some((k, r)) if !k.is_empty() && k.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') => {
                (k.to_string(), r)
            }
            _ => return Err(Diagnostic::new(pos, "expected a section header").expecting(vec!["'key:'".into()])),
        };
        if !SECTIONS.contains(&key.as_str()) {
            return Err(Diagnostic::new(pos, format!("unknown section '{key}'"))
                .expecting(SECTIONS.iter().map(|s| s.to_string()).collect()));
        }
        if seen.contains(&key) {
            return Err(Diagnostic::new(pos, format!("section '{key}' appears twice")));
        }
        seen.push(key.clone());
        let rest_col = key.len() + 2;
        let mut body: Vec<(usize, usize, String)> = Vec::new();
        if !rest.trim().is_empty() {
            body.push((l.num, rest_col, rest.to_string()));
        }
        i += 1;
        while i < lines.len() && (lines[i].indent > 0 || lines[i].text.trim().is_empty()) {
            if !lines[i].text.trim().is_empty() {
                let ln = &lines[i];
                body.push((ln.num, ln.indent + 1, ln.text[ln.indent..].to_string()));
            }
            i += 1;
        }
        if body.is_empty() {
            return Err(Diagnostic::new(Pos { line: l.num, col: rest_col }, format!("section '{key}' is empty")));
        }
        if RAW.contains(&key.as_str()) {
            raw_section(&mut doc, &key, &body)?;
        } else {
            let header = if rest.trim().is_empty() { None } else { Some(l.num) };
            let stmts = statements(&body, header)?;
            token_section(&mut doc, &key, &stmts)?;
        }
    }
    if doc.name.is_empty() {
        return Err(Diagnostic::new(Pos { line: 1, col: 1 }, "document has no 'name:' section"));
    }
    Ok(doc)
}

fn valid_name(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

fn raw_section(doc: &mut ProblemDocument, key: &str, body: &[(usize, usize, String)]) -> Result<(), Diagnostic> {
    let first = Pos { line: body[0].0, col: body[0].1 };
    let single = |what: &str| -> Result<String, Diagnostic> {
        if body.len() > 1 {
            return Err(Diagnostic::new(
                Pos { line: body[1].0, col: body[1].1 },
                format!("'{what}' takes a single line"),
            ));
        }
        Ok(body[0].2.trim().to_string())
    };
    match key {
        "name" => {
            let v = single("name")?;
            if !valid_name(&v) {
                return Err(Diagnostic::new(first, format!("invalid name '{v}'"))
                    .expecting(vec!["letters, digits, '-' or '_'".into()]));
            }
            doc.name = v;
        }
        "aliases" => {
            for (num, col, text) in body {
                for a in text.split(',') {
                    let a = a.trim();
                    if !valid_name(a) {
                        return Err(Diagnostic::new(Pos { line: *num, col: *col }, format!("invalid alias '{a}'")));
                    }
                    doc.aliases.push(a.to_string());
                }
            }
        }
        "note" => {
            let lines: Vec<&str> = body.iter().map(|(_, _, t)| t.trim()).collect();
            doc.note = Some(lines.join("\n"));
        }
        "kind" => {
            let v = single("kind")?;
            if !compile::KINDS.contains(&v.as_str()) {
                return Err(Diagnostic::new(first, format!("unknown kind '{v}'"))
                    .expecting(compile::KINDS.iter().map(|s| s.to_string()).collect()));
            }
            doc.kind = Some(v);
        }
        "pack" => {
            let v = single("pack")?;
            if !valid_name(&v) {
                return Err(Diagnostic::new(first, format!("invalid pack name '{v}'")));
            }
            doc.pack = Some(v);
        }
        _ => unreachable!(),
    }
    Ok(())
}

fn ident_list(c: &mut Cursor<'_>) -> Result<Vec<String>, Diagnostic> {
    let mut out = vec![c.ident()?.0];
    while c.eat(&Tok::Comma) {
        out.push(c.ident()?.0);
    }
    Ok(out)
}

fn params(c: &mut Cursor<'_>) -> Result<Vec<String>, Diagnostic> {
    c.expect(&Tok::LParen)?;
    let out = ident_list(c)?;
    c.expect(&Tok::RParen)?;
    Ok(out)
}

fn only_one(key: &str, stmts: &[Stmt]) -> Result<(), Diagnostic> {
    if stmts.len() > 1 {
        return Err(Diagnostic::new(stmts[1].start, format!("section '{key}' takes a single statement")));
    }
    Ok(())
}

fn setting(c: &mut Cursor<'_>) -> Result<Setting, Diagnostic> {
    let (key, pos) = c.ident()?;
    c.expect(&Tok::Eq)?;
    let vpos = c.pos();
    let value = match c.bump() {
        Tok::Ident(s) | Tok::Number(s) => s,
        _ => {
            return Err(Diagnostic::new(vpos, "expected a value").expecting(vec!["identifier".into(), "number".into()]))
        }
    };
    Ok(Setting { key, value, pos })
}

fn assignment(c: &mut Cursor<'_>) -> Result<Assignment, Diagnostic> {
    let (name, _) = c.ident()?;
    let ps = if c.peek() == &Tok::LParen { params(c)? } else { Vec::new() };
    c.expect(&Tok::Eq)?;
    let body = c.expr()?;
    Ok(Assignment { name, params: ps, body })
}

fn comparison(c: &mut Cursor<'_>) -> Result<Condition, Diagnostic> {
    let lhs = c.expr()?;
    let op = match c.peek() {
        Tok::Ne => CmpOp::Ne,
        Tok::Lt => CmpOp::Lt,
        Tok::Le => CmpOp::Le,
        Tok::Gt => CmpOp::Gt,
        Tok::Ge => CmpOp::Ge,
        _ => return Err(c.unexpected(&["'!='", "'<'", "'<='", "'>'", "'>='"])),
    };
    c.bump();
    let rhs = c.expr()?;
    Ok(Condition { lhs, op, rhs })
}

fn token_section(doc: &mut ProblemDocument, key: &str, stmts: &[Stmt]) -> Result<(), Diagnostic> {
    for st in stmts {
        let mut c = st.cursor();
        let pos = st.start;
        match key {
            "variables" => doc.variables.extend(ident_list(&mut c)?),
            "unknowns" => doc.unknowns.extend(ident_list(&mut c)?),
            "spectral" => {
                only_one(key, stmts)?;
                doc.spectral = Some(c.ident()?.0);
            }
            "constants" => loop {
                let (name, p) = c.ident()?;
                let value = if c.eat(&Tok::Eq) { Some(c.expr()?) } else { None };
                doc.constants.push(ConstDecl { name, value, pos: p });
                if !c.eat(&Tok::Comma) {
                    break;
                }
            },
            "functions" => loop {
                let (name, p) = c.ident()?;
                c.expect(&Tok::LParen)?;
                let arity = c.small_int()?;
                if arity == 0 {
                    return Err(Diagnostic::new(p, "function arity must be positive"));
                }
                c.expect(&Tok::RParen)?;
                doc.functions.push(FuncDecl { name, arity, pos: p });
                if !c.eat(&Tok::Comma) {
                    break;
                }
            },
            "let" => {
                let (name, _) = c.ident()?;
                let ps = if c.peek() == &Tok::LParen { params(&mut c)? } else { Vec::new() };
                c.expect(&Tok::Eq)?;
                let body = c.expr()?;
                doc.lets.push(LetDecl { name, params: ps, body, pos });
            }
            "closures" => {
                let head = c.expr_head()?;
                let ps = if c.peek() == &Tok::LParen { Some(params(&mut c)?) } else { None };
                c.expect(&Tok::Eq)?;
                let rhs = c.expr()?;
                doc.closures.push(ClosureDecl { head, params: ps, rhs, pos });
            }
            "equation" => {
                let solve_for = if matches!(c.peek(), Tok::Ident(s) if s == "solve") && c.peek_at(1) != &Tok::Eq {
                    c.bump();
                    let j = c.expr_head()?;
                    c.expect(&Tok::Colon)?;
                    Some(j)
                } else {
                    None
                };
                let lhs = c.expr()?;
                c.expect(&Tok::Eq)?;
                let rhs = c.expr()?;
                doc.equation.push(RelationDecl { solve_for, lhs, rhs, pos });
            }
            "metric" => {
                only_one(key, stmts)?;
                doc.metric = Some(c.expr()?);
            }
            "omega" => {
                only_one(key, stmts)?;
                doc.omega = Some(c.expr()?);
            }
            "lax" => {
                let (name, p) = c.ident()?;
                if name != "X" && name != "Y" {
                    return Err(Diagnostic::new(p, format!("unexpected field name '{name}'"))
                        .expecting(vec!["X".into(), "Y".into()]));
                }
                c.expect(&Tok::Eq)?;
                doc.lax.push((name, c.expr()?));
            }
            "solutions" => {
                let mut values = Vec::new();
                loop {
                    let (name, _) = c.ident()?;
                    c.expect(&Tok::Eq)?;
                    values.push((name, c.expr()?));
                    if !c.eat(&Tok::Comma) {
                        break;
                    }
                }
                let mut domain = Vec::new();
                if matches!(c.peek(), Tok::Ident(s) if s == "where") {
                    c.bump();
                    domain.push(comparison(&mut c)?);
                    while matches!(c.peek(), Tok::Ident(s) if s == "and") {
                        c.bump();
                        domain.push(comparison(&mut c)?);
                    }
                }
                doc.solutions.push(SolutionDecl { values, domain, pos });
            }
            "constraints" => {
                let label = if matches!(c.peek(), Tok::Ident(_)) && c.peek_at(1) == &Tok::Colon {
                    let l = c.ident()?.0;
                    c.bump();
                    Some(l)
                } else {
                    None
                };
                let lhs = c.expr()?;
                c.expect(&Tok::Eq)?;
                let rhs = c.expr()?;
                doc.constraints.push(ConstraintDecl { label, lhs, rhs, pos });
            }
            "candidates" => {
                let (v, p) = c.ident()?;
                let expect_pass = match v.as_str() {
                    "pass" => true,
                    "fail" => false,
                    _ => {
                        return Err(Diagnostic::new(p, format!("unexpected '{v}'"))
                            .expecting(vec!["pass".into(), "fail".into()]))
                    }
                };
                c.expect(&Tok::Colon)?;
                let mut assignments = vec![assignment(&mut c)?];
                while c.eat(&Tok::Comma) {
                    assignments.push(assignment(&mut c)?);
                }
                doc.candidates.push(CandidateDecl { expect_pass, assignments, pos });
            }
            "gt" => {
                let (name, _) = c.ident()?;
                c.expect(&Tok::Eq)?;
                let mut vals = vec![c.expr()?];
                while c.eat(&Tok::Comma) {
                    vals.push(c.expr()?);
                }
                doc.gt.push((name, vals));
            }
            "options" | "expect" => loop {
                let s = setting(&mut c)?;
                if key == "options" {
                    doc.options.push(s);
                } else {
                    doc.expect.push(s);
                }
                if !c.eat(&Tok::Comma) {
                    break;
                }
            },
            _ => unreachable!(),
        }
        c.finish()?;
    }
    Ok(())
}

fn join<T: fmt::Display>(xs: &[T]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
}

pub fn render_solution(s: &SolutionDecl) -> String {
    let mut t = s.values.iter().map(|(n, e)| format!("{n} = {e}")).collect::<Vec<_>>().join(", ");
    for (k, c) in s.domain.iter().enumerate() {
        t.push_str(if k == 0 { " where " } else { " and " });
        t.push_str(&format!("{} {} {}", c.lhs, c.op.symbol(), c.rhs));
    }
    t
}

pub fn render_candidate(c: &CandidateDecl) -> String {
    let a: Vec<String> = c
        .assignments
        .iter()
        .map(|a| {
            if a.params.is_empty() {
                format!("{} = {}", a.name, a.body)
            } else {
                format!("{}({}) = {}", a.name, a.params.join(", "), a.body)
            }
        })
        .collect();
    format!("{}: {}", if c.expect_pass { "pass" } else { "fail" }, a.join(", "))
}

/// Canonical text of a document; `parse(render(d)) == d`.
pub fn render(doc: &ProblemDocument) -> String {
    let mut out = String::new();
    let mut line = |s: String| {
        out.push_str(&s);
        out.push('\n');
    };
    line(format!("name: {}", doc.name));
    if !doc.aliases.is_empty() {
        line(format!("aliases: {}", doc.aliases.join(", ")));
    }
    if let Some(n) = &doc.note {
        if n.contains('\n') {
            line("note:".into());
            for l in n.lines() {
                line(format!("    {l}"));
            }
        } else {
            line(format!("note: {n}"));
        }
    }
    if let Some(k) = &doc.kind {
        line(format!("kind: {k}"));
    }
    if !doc.variables.is_empty() {
        line(format!("variables: {}", doc.variables.join(", ")));
    }
    if !doc.unknowns.is_empty() {
        line(format!("unknowns: {}", doc.unknowns.join(", ")));
    }
    if let Some(s) = &doc.spectral {
        line(format!("spectral: {s}"));
    }
    let block = |line: &mut dyn FnMut(String), key: &str, items: Vec<String>| {
        if items.is_empty() {
            return;
        }
        line(format!("{key}:"));
        for it in items {
            line(format!("    {it}"));
        }
    };
    block(
        &mut line,
        "constants",
        doc.constants
            .iter()
            .map(|c| match &c.value {
                Some(v) => format!("{} = {v}", c.name),
                None => c.name.clone(),
            })
            .collect(),
    );
    block(&mut line, "functions", doc.functions.iter().map(|f| format!("{}({})", f.name, f.arity)).collect());
    block(
        &mut line,
        "let",
        doc.lets
            .iter()
            .map(|l| {
                if l.params.is_empty() {
                    format!("{} = {}", l.name, l.body)
                } else {
                    format!("{}({}) = {}", l.name, l.params.join(", "), l.body)
                }
            })
            .collect(),
    );
    if let Some(p) = &doc.pack {
        line(format!("pack: {p}"));
    }
    block(
        &mut line,
        "closures",
        doc.closures
            .iter()
            .map(|c| match &c.params {
                Some(ps) => format!("{}({}) = {}", c.head, ps.join(", "), c.rhs),
                None => format!("{} = {}", c.head, c.rhs),
            })
            .collect(),
    );
    block(
        &mut line,
        "equation",
        doc.equation
            .iter()
            .map(|r| match &r.solve_for {
                Some(j) => format!("solve {j}: {} = {}", r.lhs, r.rhs),
                None => format!("{} = {}", r.lhs, r.rhs),
            })
            .collect(),
    );
    if let Some(m) = &doc.metric {
        line(format!("metric: {m}"));
    }
    if let Some(o) = &doc.omega {
        line(format!("omega: {o}"));
    }
    block(&mut line, "lax", doc.lax.iter().map(|(n, e)| format!("{n} = {e}")).collect());
    block(&mut line, "solutions", doc.solutions.iter().map(render_solution).collect());
    block(
        &mut line,
        "constraints",
        doc.constraints
            .iter()
            .map(|c| match &c.label {
                Some(l) => format!("{l}: {} = {}", c.lhs, c.rhs),
                None => format!("{} = {}", c.lhs, c.rhs),
            })
            .collect(),
    );
    block(&mut line, "candidates", doc.candidates.iter().map(render_candidate).collect());
    block(&mut line, "gt", doc.gt.iter().map(|(n, v)| format!("{n} = {}", join(v))).collect());
    block(&mut line, "options", doc.options.iter().map(|s| format!("{} = {}", s.key, s.value)).collect());
    block(&mut line, "expect", doc.expect.iter().map(|s| format!("{} = {}", s.key, s.value)).collect());
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const DKP: &str = "\
# comment line
name: dkp
kind: scalar
variables: x, y, t
unknowns: u
spectral: lambda
equation:
    u_xt = u*u_xx + u_x^2 +
        u_yy
metric: 4*dx*dt - dy^2 + 4*u*dt^2
lax:
    X = d_y - lambda*d_x + u_x*d_lambda
    Y = d_t - (lambda^2 + u)*d_x + (u_x*lambda + u_y)*d_lambda
solutions:
    u = -x/t where t != 0
expect: ew = pass, flat = fail
";

    #[test]
    fn parses_sections_and_continuations() {
        let d = parse(DKP).unwrap();
        assert_eq!(d.name, "dkp");
        assert_eq!(d.variables, ["x", "y", "t"]);
        assert_eq!(d.equation.len(), 1);
        assert_eq!(d.equation[0].rhs.to_string(), "u*u_xx + u_x^2 + u_yy");
        assert_eq!(d.lax.len(), 2);
        assert_eq!(d.solutions[0].domain.len(), 1);
        assert_eq!(d.expectation("flat"), Some("fail"));
    }

    // Expression nodes already compare without positions; declarations don't.
    fn without_positions(mut d: ProblemDocument) -> ProblemDocument {
        let z = Pos::default();
        d.constants.iter_mut().for_each(|x| x.pos = z);
        d.functions.iter_mut().for_each(|x| x.pos = z);
        d.lets.iter_mut().for_each(|x| x.pos = z);
        d.closures.iter_mut().for_each(|x| x.pos = z);
        d.equation.iter_mut().for_each(|x| x.pos = z);
        d.solutions.iter_mut().for_each(|x| x.pos = z);
        d.constraints.iter_mut().for_each(|x| x.pos = z);
        d.candidates.iter_mut().for_each(|x| x.pos = z);
        d.options.iter_mut().for_each(|x| x.pos = z);
        d.expect.iter_mut().for_each(|x| x.pos = z);
        d
    }

    #[test]
    fn render_round_trips() {
        let d = parse(DKP).unwrap();
        let text = render(&d);
        let again = parse(&text).unwrap();
        assert_eq!(without_positions(d), without_positions(again.clone()));
        assert_eq!(render(&again), text);
    }

    #[test]
    fn diagnostics_are_located() {
        let e = parse("name: a\nequation:\n    u_tt = u_xx +\n").unwrap_err();
        assert_eq!(e.pos.line, 3);
        let e = parse("name: a\nbogus: 1\n").unwrap_err();
        assert!(e.message.contains("unknown section"));
        assert_eq!(e.pos.line, 2);
        let e = parse("name: a\nvariables: x y\n").unwrap_err();
        assert_eq!((e.pos.line, e.pos.col), (2, 14));
        let e = parse("equation:\n  u = ").unwrap_err();
        assert_eq!(e.pos.line, 2);
    }
}
