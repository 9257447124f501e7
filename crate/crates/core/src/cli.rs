//! Command-line front end. `run` returns the process exit code:
//! 0 pass, 1 fail or degenerate, 2 input error, 3 expression-size limit.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::analysis::{self, AnalysisError, CheckOptions, Mode, Verdict};
use crate::budget::DEFAULT_MAX_SIZE;
use crate::catalog;
use crate::dsl::{self, Problem};
use crate::geometry::Representative;
use crate::numeric::{self, GridSpec, NumericOptions, Which};
use crate::report::{self, CatalogItem, CheckEntry, Pair, ReportDocument};
use crate::runner::{self, CheckKind, RunError};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_LIMIT: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "ewcheck", version, about = "Conformal-geometry checks for dispersionless PDEs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone, Default)]
pub struct Source {
    /// Problem document to read.
    #[arg(long, short = 'i', value_name = "FILE")]
    pub input: Option<PathBuf>,
    /// Built-in catalog entry (name or alias).
    #[arg(long, short = 'c', value_name = "NAME")]
    pub catalog: Option<String>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct Output {
    /// Machine-readable JSON report.
    #[arg(long, conflicts_with = "markdown")]
    pub json: bool,
    /// Markdown report (the default).
    #[arg(long)]
    pub markdown: bool,
    /// Include wall-clock times (makes the report non-reproducible).
    #[arg(long)]
    pub timings: bool,
    /// Write the report here instead of standard output.
    #[arg(long, short = 'o', value_name = "FILE")]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct Engine {
    /// Conformal representative: adjugate, inverse or pinned.
    #[arg(long)]
    pub representative: Option<Representative>,
    /// Residuals are split along parametric jets above this order.
    #[arg(long, value_name = "N")]
    pub base_order: Option<usize>,
    /// Abort with exit code 3 once a polynomial exceeds this many terms.
    #[arg(long, value_name = "TERMS")]
    pub max_size: Option<usize>,
    /// Flatness: keep only the coefficients at the highest jets.
    #[arg(long)]
    pub leading: bool,
    /// Flatness: look for a nonzero Cotton value at random jet points first.
    #[arg(long)]
    pub witness: bool,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Conformal flatness (Cotton tensor) on every solution.
    CheckFlat {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        engine: Engine,
        #[command(flatten)]
        output: Output,
    },
    /// Einstein-Weyl property of the metric and covector.
    CheckEw {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        engine: Engine,
        #[command(flatten)]
        output: Output,
    },
    /// Commutation of the Lax pair modulo the equation.
    CheckLax {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        engine: Engine,
        #[command(flatten)]
        output: Output,
    },
    /// Null totally geodesic surfaces from the Lax pair.
    CheckNullgeo {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        engine: Engine,
        #[command(flatten)]
        output: Output,
    },
    /// Constraints on the coefficient functions of a family.
    Derive {
        #[command(flatten)]
        source: Source,
        /// flat or ew; defaults to what the document expects.
        #[arg(long)]
        mode: Option<String>,
        #[command(flatten)]
        engine: Engine,
        #[command(flatten)]
        output: Output,
    },
    /// Lists the built-in entries.
    CatalogList {
        #[command(flatten)]
        output: Output,
    },
    /// Runs the expectations of catalog entries (all when none are named).
    CatalogRun {
        names: Vec<String>,
        #[command(flatten)]
        engine: Engine,
        #[command(flatten)]
        output: Output,
    },
    /// Finite-difference cross-check on an explicit solution.
    Numeric {
        #[command(flatten)]
        source: Source,
        /// cotton or ew.
        #[arg(long, default_value = "ew")]
        mode: Which,
        /// Index of the sample solution.
        #[arg(long, default_value_t = 0)]
        solution: usize,
        /// lo:hi:points, once for all axes or per axis separated by commas.
        #[arg(long, default_value = "1:2:17")]
        grid: GridSpec,
        /// Zero threshold constant C in C*h^2.
        #[arg(long, default_value_t = 10.0)]
        tol: f64,
        /// Random nodes for the symbolic comparison.
        #[arg(long, default_value_t = 20)]
        points: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Also write per-node residuals of the coarse grid as CSV.
        #[arg(long, value_name = "FILE")]
        csv: Option<PathBuf>,
        #[command(flatten)]
        engine: Engine,
        #[command(flatten)]
        output: Output,
    },
}

struct Failure {
    code: i32,
    message: String,
}

fn input_error(message: impl Into<String>) -> Failure {
    Failure { code: EXIT_INPUT, message: message.into() }
}

impl From<RunError> for Failure {
    fn from(e: RunError) -> Self {
        Failure { code: if e.is_limit() { EXIT_LIMIT } else { EXIT_INPUT }, message: e.to_string() }
    }
}

impl From<AnalysisError> for Failure {
    fn from(e: AnalysisError) -> Self {
        RunError::Analysis(e).into()
    }
}

fn load(source: &Source) -> Result<Problem, Failure> {
    match (&source.input, &source.catalog) {
        (Some(path), None) => {
            let text = fs::read_to_string(path).map_err(|e| input_error(format!("{}: {e}", path.display())))?;
            let doc = dsl::parse(&text).map_err(|d| input_error(format!("{}: {d}", path.display())))?;
            dsl::compile(&doc).map_err(|d| input_error(format!("{}: {d}", path.display())))
        }
        (None, Some(name)) => catalog::get(name).map_err(|e| input_error(e.to_string())),
        _ => Err(input_error("give exactly one of --input FILE or --catalog NAME")),
    }
}

fn options(p: &Problem, engine: &Engine, timings: bool) -> CheckOptions {
    let mut o = p.check_options();
    tweak(&mut o, engine, timings);
    o
}

fn tweak(o: &mut CheckOptions, engine: &Engine, timings: bool) {
    if let Some(r) = engine.representative {
        o.representative = Some(r);
        if r != Representative::Pinned {
            o.pinned_g = None;
        }
    }
    if engine.base_order.is_some() {
        o.base_order = engine.base_order;
    }
    o.max_size = Some(engine.max_size.or(o.max_size).unwrap_or(DEFAULT_MAX_SIZE));
    o.leading |= engine.leading;
    o.witness |= engine.witness;
    o.timings |= timings;
}

fn emit(doc: &ReportDocument, output: &Output, out: &mut dyn Write) -> Result<(), Failure> {
    let text = if output.json { doc.to_json() } else { doc.to_markdown() };
    match &output.output {
        Some(path) => fs::write(path, text).map_err(|e| input_error(format!("{}: {e}", path.display()))),
        None => out.write_all(text.as_bytes()).map_err(|e| input_error(e.to_string())),
    }
}

fn verdict_code(v: Verdict) -> i32 {
    match v {
        Verdict::Pass => EXIT_PASS,
        Verdict::Fail | Verdict::Degenerate => EXIT_FAIL,
    }
}

fn single_check(
    name: &str,
    kind: CheckKind,
    source: &Source,
    engine: &Engine,
    output: &Output,
    out: &mut dyn Write,
) -> Result<i32, Failure> {
    let p = load(source)?;
    let rep = runner::run_check(&p, kind, &options(&p, engine, output.timings))?;
    let mut doc = ReportDocument::new(name);
    doc.checks.push(CheckEntry::from_report(&rep));
    emit(&doc, output, out)?;
    Ok(verdict_code(rep.verdict))
}

fn dispatch(cmd: Command, out: &mut dyn Write) -> Result<i32, Failure> {
    match cmd {
        Command::CheckFlat { source, engine, output } => {
            single_check("check-flat", CheckKind::Flat, &source, &engine, &output, out)
        }
        Command::CheckEw { source, engine, output } => {
            single_check("check-ew", CheckKind::Ew, &source, &engine, &output, out)
        }
        Command::CheckLax { source, engine, output } => {
            single_check("check-lax", CheckKind::Lax, &source, &engine, &output, out)
        }
        Command::CheckNullgeo { source, engine, output } => {
            single_check("check-nullgeo", CheckKind::Nullgeo, &source, &engine, &output, out)
        }
        Command::Derive { source, mode, engine, output } => {
            let p = load(&source)?;
            let opts = options(&p, &engine, output.timings);
            let mut doc = ReportDocument::new("derive");
            let code = if p.equation.is_none() && p.gt.is_some() {
                let rep = runner::run_check(&p, CheckKind::Gt, &opts)?;
                doc.checks.push(CheckEntry::from_report(&rep));
                verdict_code(rep.verdict)
            } else if p.equation.is_none() || (!p.constraints.is_empty() && mode.is_none()) {
                // A document with a printed constraint system: compare with it.
                let rep = runner::check_constraints(&p, &opts)?;
                doc.checks.push(CheckEntry::from_report(&rep));
                verdict_code(rep.verdict)
            } else {
                let mode = match mode.as_deref() {
                    Some("flat") => Mode::Flat,
                    Some("ew") => Mode::Ew,
                    Some(m) => return Err(input_error(format!("unknown mode '{m}' (expected flat or ew)"))),
                    None if p.doc.expectation("flat").is_some() => Mode::Flat,
                    None => Mode::Ew,
                };
                let rep = analysis::derive_constraints(p.equation().map_err(input_error)?, mode, &opts)?;
                doc.checks.push(CheckEntry::from_report(&rep));
                // Deriving succeeds whenever it runs; the residuals are the result.
                EXIT_PASS
            };
            emit(&doc, &output, out)?;
            Ok(code)
        }
        Command::CatalogList { output } => {
            let mut doc = ReportDocument::new("catalog-list");
            for name in catalog::list() {
                let p = catalog::get(name).map_err(|e| input_error(e.to_string()))?;
                doc.catalog.push(CatalogItem {
                    name: name.to_string(),
                    note: p.doc.note.clone().unwrap_or_default(),
                    expectations: p
                        .doc
                        .expect
                        .iter()
                        .map(|s| Pair { name: s.key.clone(), value: s.value.clone() })
                        .collect(),
                });
            }
            emit(&doc, &output, out)?;
            Ok(EXIT_PASS)
        }
        Command::CatalogRun { names, engine, output } => {
            let all = catalog::list();
            let names: Vec<&str> = if names.is_empty() { all } else { names.iter().map(String::as_str).collect() };
            for n in &names {
                if catalog::source(n).is_none() {
                    return Err(input_error(format!("no catalog entry named '{n}'")));
                }
            }
            let timings = output.timings;
            let outcomes = catalog::run_many(&names, &|o: &mut CheckOptions| tweak(o, &engine, timings));
            let mut doc = ReportDocument::new("catalog-run");
            doc.expectations = report::expectation_rows(&outcomes);
            emit(&doc, &output, out)?;
            Ok(if outcomes.iter().all(|o| o.ok()) { EXIT_PASS } else { EXIT_FAIL })
        }
        Command::Numeric { source, mode, solution, grid, tol, points, seed, csv, engine, output } => {
            let p = load(&source)?;
            let opts = options(&p, &engine, false);
            let nopts = NumericOptions { c: tol, points, seed };
            let rep = numeric::validate(&p, solution, mode, &grid, &nopts, &opts).map_err(numeric_failure)?;
            if let Some(path) = csv {
                let s = numeric::sample(&p, solution, &grid, &opts).map_err(numeric_failure)?;
                let r = numeric::fd_residual(&s, mode).map_err(numeric_failure)?;
                let f = fs::File::create(&path).map_err(|e| input_error(format!("{}: {e}", path.display())))?;
                numeric::write_csv(&r, &s.vars, std::io::BufWriter::new(f))
                    .map_err(|e| input_error(format!("{}: {e}", path.display())))?;
            }
            let code = if rep.vanishes && rep.agreement.all_agree { EXIT_PASS } else { EXIT_FAIL };
            let mut doc = ReportDocument::new("numeric");
            doc.numeric = Some(rep);
            emit(&doc, &output, out)?;
            Ok(code)
        }
    }
}

fn numeric_failure(e: numeric::NumericError) -> Failure {
    match e {
        numeric::NumericError::Analysis(a) => a.into(),
        e => input_error(e.to_string()),
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_PASS };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { err.write_all(text.as_bytes()) } else { out.write_all(text.as_bytes()) };
            return code;
        }
    };
    match dispatch(cli.command, out) {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}
