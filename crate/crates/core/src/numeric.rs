//! Floating-point cross-check of the symbolic verdicts: metrics evaluated on
//! explicit solutions over a grid, curvature by central differences.
//!
//! Every derivative is a second-order central difference, so a tensor that
//! vanishes identically shows residuals of size `O(h^2)` and halving the
//! spacing divides them by about four. Each difference consumes one layer of
//! nodes at the boundary; nodes that are not covered are NaN.

use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustc_hash::FxHashMap;
use serde::Serialize;

use crate::analysis::{self, AnalysisError, CheckOptions};
use crate::atom::{self, AtomId};
use crate::calculus;
use crate::dsl::compile::{Condition, Solution};
use crate::dsl::{CmpOp, Problem};
use crate::equation::EquationSpec;
use crate::evaluate::{eval_f64, EvalError};
use crate::expr::Expr;
use crate::fieldgeom::{self, Field, FieldError, Mat};
use crate::geometry;

#[derive(Debug, thiserror::Error)]
pub enum NumericError {
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error("'{0}' has no sample solution")]
    NoSolution(String),
    #[error("solution {0} does not exist")]
    SolutionIndex(usize),
    #[error("grid node {0:?} lies outside the solution's domain")]
    Domain(Vec<f64>),
    #[error("metric determinant below the floor at node {0:?}")]
    DetFloor(Vec<f64>),
    #[error("evaluation at node {node:?}: {err}")]
    Eval { node: Vec<f64>, err: EvalError },
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl Axis {
    pub fn h(&self) -> f64 {
        (self.hi - self.lo) / (self.points - 1) as f64
    }

    fn coord(&self, i: usize) -> f64 {
        self.lo + (self.hi - self.lo) * i as f64 / (self.points - 1) as f64
    }
}

/// Tensor-product grid. Nodes excluded by the solution's domain conditions
/// are an error rather than silently dropped.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridSpec {
    pub axes: Vec<Axis>,
}

pub const MIN_POINTS: usize = 9;

impl GridSpec {
    pub fn cube(lo: f64, hi: f64, points: usize, dim: usize) -> Result<GridSpec, NumericError> {
        GridSpec::new(vec![Axis { lo, hi, points }; dim])
    }

    pub fn new(axes: Vec<Axis>) -> Result<GridSpec, NumericError> {
        for a in &axes {
            if a.points < MIN_POINTS {
                return Err(NumericError::Grid(format!("at least {MIN_POINTS} points per axis are needed")));
            }
            if !a.lo.is_finite() || !a.hi.is_finite() || a.hi <= a.lo {
                return Err(NumericError::Grid(format!("empty range {}..{}", a.lo, a.hi)));
            }
        }
        Ok(GridSpec { axes })
    }

    /// Same box with half the spacing.
    pub fn refined(&self) -> GridSpec {
        GridSpec { axes: self.axes.iter().map(|a| Axis { points: 2 * a.points - 1, ..a.clone() }).collect() }
    }

    pub fn h(&self) -> f64 {
        self.axes.iter().map(Axis::h).fold(0.0, f64::max)
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.points).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn index(&self, node: usize) -> Vec<usize> {
        let mut rest = node;
        let mut out = vec![0; self.axes.len()];
        for k in (0..self.axes.len()).rev() {
            out[k] = rest % self.axes[k].points;
            rest /= self.axes[k].points;
        }
        out
    }

    fn node(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.axes).fold(0, |acc, (&i, a)| acc * a.points + i)
    }

    pub fn coords(&self, node: usize) -> Vec<f64> {
        self.index(node).iter().zip(&self.axes).map(|(&i, a)| a.coord(i)).collect()
    }

    /// Nodes at least `margin` layers away from every face.
    fn interior(&self, margin: usize) -> Vec<usize> {
        (0..self.len())
            .filter(|&n| self.index(n).iter().zip(&self.axes).all(|(&i, a)| i >= margin && i + margin < a.points))
            .collect()
    }
}

/// `lo:hi:points`, either once for every axis or comma-separated per axis.
impl FromStr for GridSpec {
    type Err = NumericError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let axis = |t: &str| -> Result<Axis, NumericError> {
            let parts: Vec<&str> = t.trim().split(':').collect();
            let bad = || NumericError::Grid(format!("expected lo:hi:points, got '{t}'"));
            if parts.len() != 3 {
                return Err(bad());
            }
            Ok(Axis {
                lo: parts[0].parse().map_err(|_| bad())?,
                hi: parts[1].parse().map_err(|_| bad())?,
                points: parts[2].parse().map_err(|_| bad())?,
            })
        };
        let axes = s.split(',').map(axis).collect::<Result<Vec<_>, _>>()?;
        GridSpec::new(if axes.len() == 1 { vec![axes[0].clone(); 3] } else { axes })
    }
}

impl fmt::Display for GridSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.axes.iter().map(|a| format!("{}:{}:{}", a.lo, a.hi, a.points)).collect();
        f.write_str(&parts.join(","))
    }
}

#[derive(Debug)]
struct Shape {
    grid: GridSpec,
    strides: Vec<usize>,
}

/// Values at every node of a grid; derivatives are central differences.
#[derive(Clone, Debug)]
pub struct GridField {
    shape: Arc<Shape>,
    data: Vec<f64>,
}

impl GridField {
    fn zip(&self, o: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        GridField { shape: self.shape.clone(), data: self.data.iter().zip(&o.data).map(|(&a, &b)| f(a, b)).collect() }
    }

    fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        GridField { shape: self.shape.clone(), data: self.data.iter().map(|&a| f(a)).collect() }
    }

    pub fn at(&self, node: usize) -> f64 {
        self.data[node]
    }
}

impl Field for GridField {
    fn add(&self, o: &Self) -> Self {
        self.zip(o, |a, b| a + b)
    }
    fn sub(&self, o: &Self) -> Self {
        self.zip(o, |a, b| a - b)
    }
    fn mul(&self, o: &Self) -> Self {
        self.zip(o, |a, b| a * b)
    }
    fn recip(&self) -> Option<Self> {
        if self.data.contains(&0.0) {
            return None;
        }
        Some(self.map(|a| 1.0 / a))
    }
    fn scale(&self, num: i64, den: i64) -> Self {
        let c = num as f64 / den as f64;
        self.map(|a| a * c)
    }
    fn deriv(&self, k: usize) -> Self {
        let sh = &self.shape;
        let axis = &sh.grid.axes[k];
        let (stride, inv) = (sh.strides[k], 0.5 / axis.h());
        let data = (0..self.data.len())
            .map(|n| {
                let i = (n / stride) % axis.points;
                if i == 0 || i + 1 == axis.points {
                    f64::NAN
                } else {
                    (self.data[n + stride] - self.data[n - stride]) * inv
                }
            })
            .collect();
        GridField { shape: self.shape.clone(), data }
    }
}

/// Metric and covector sampled at every grid node.
#[derive(Debug, Clone)]
pub struct FieldSample {
    pub grid: GridSpec,
    pub vars: Vec<String>,
    pub g: Mat<GridField>,
    pub omega: Vec<GridField>,
}

/// Jet values of an explicit solution at a point.
struct SolutionJets<'a> {
    eq: &'a EquationSpec,
    sol: &'a Solution,
    derivs: FxHashMap<AtomId, Expr>,
}

impl<'a> SolutionJets<'a> {
    fn new(eq: &'a EquationSpec, sol: &'a Solution) -> Self {
        SolutionJets { eq, sol, derivs: FxHashMap::default() }
    }

    fn derivative(&mut self, a: AtomId) -> Option<Expr> {
        if let Some(e) = self.derivs.get(&a) {
            return Some(e.clone());
        }
        let (u, mi) = self.eq.jet_of(a)?;
        let mut d = self.sol.values[u].clone();
        for (k, &m) in mi.iter().enumerate() {
            for _ in 0..m {
                d = calculus::partial(&d, self.eq.var_atoms[k]);
            }
        }
        self.derivs.insert(a, d.clone());
        Some(d)
    }

    /// Value of `e` at `x`, with jets taken from the solution.
    fn eval(&mut self, e: &Expr, x: &[f64]) -> Result<f64, EvalError> {
        let vars = self.eq.var_atoms.clone();
        let mut jets: FxHashMap<AtomId, Expr> = FxHashMap::default();
        for a in e.atoms_deep() {
            if let Some(d) = self.derivative(a) {
                jets.insert(a, d);
            }
        }
        let mut base = |a: AtomId| -> Result<f64, EvalError> {
            if let Some(k) = vars.iter().position(|&v| v == a) {
                return Ok(x[k]);
            }
            Err(EvalError::Unbound(atom::render_atom(a)))
        };
        let mut lookup = |a: AtomId| -> Result<f64, EvalError> {
            match jets.get(&a) {
                Some(d) => eval_f64(d, &mut base),
                None => base(a),
            }
        };
        eval_f64(e, &mut lookup)
    }
}

fn violates(c: &Condition, l: f64, r: f64) -> bool {
    let scale = 1e-12 * (1.0 + l.abs().max(r.abs()));
    match c.op {
        CmpOp::Ne => (l - r).abs() <= scale,
        CmpOp::Lt => l >= r,
        CmpOp::Le => l > r,
        CmpOp::Gt => l <= r,
        CmpOp::Ge => l < r,
    }
}

pub const DET_FLOOR: f64 = 1e-10;

/// Evaluates `g` and the covector of `p` on solution `index` at every node.
pub fn sample(p: &Problem, index: usize, grid: &GridSpec, opts: &CheckOptions) -> Result<FieldSample, NumericError> {
    let eq = p.equation().map_err(|_| NumericError::NoSolution(p.name().to_string()))?;
    if p.solutions.is_empty() {
        return Err(NumericError::NoSolution(p.name().to_string()));
    }
    let sol = p.solutions.get(index).ok_or(NumericError::SolutionIndex(index))?;
    if grid.axes.len() != eq.dim() {
        return Err(NumericError::Grid(format!("the equation has {} variables", eq.dim())));
    }
    let c = analysis::weyl_data(eq, opts)?;
    let om = c.omega.clone().expect("weyl data carries a covector");
    let n = eq.dim();
    let shape = Arc::new(Shape {
        grid: grid.clone(),
        strides: (0..n).map(|k| grid.axes[k + 1..].iter().map(|a| a.points).product()).collect(),
    });
    let mut exprs: Vec<Expr> = Vec::new();
    for i in 0..n {
        for j in 0..n {
            exprs.push(c.g[i][j].clone());
        }
    }
    exprs.extend(om);
    let nodes = grid.len();
    let values = parallel_nodes(nodes, |node| {
        let x = grid.coords(node);
        let mut jets = SolutionJets::new(eq, sol);
        for cond in &sol.domain {
            let l = jets.eval(&cond.lhs, &x).map_err(|err| NumericError::Eval { node: x.clone(), err })?;
            let r = jets.eval(&cond.rhs, &x).map_err(|err| NumericError::Eval { node: x.clone(), err })?;
            if violates(cond, l, r) {
                return Err(NumericError::Domain(x));
            }
        }
        let v = exprs
            .iter()
            .map(|e| jets.eval(e, &x))
            .collect::<Result<Vec<f64>, _>>()
            .map_err(|err| NumericError::Eval { node: x.clone(), err })?;
        let gm: Mat<f64> = (0..n).map(|i| v[i * n..(i + 1) * n].to_vec()).collect();
        if fieldgeom::det(&gm).abs() < DET_FLOOR {
            return Err(NumericError::DetFloor(x));
        }
        Ok(v)
    })?;
    let field = |k: usize| GridField { shape: shape.clone(), data: values.iter().map(|v| v[k]).collect() };
    Ok(FieldSample {
        grid: grid.clone(),
        vars: eq.vars.iter().map(|v| v.to_string()).collect(),
        g: (0..n).map(|i| (0..n).map(|j| field(i * n + j)).collect()).collect(),
        omega: (0..n).map(|k| field(n * n + k)).collect(),
    })
}

/// Runs `f` on every node, split across the available cores; the output is
/// in node order whatever the split.
fn parallel_nodes<T: Send>(
    nodes: usize,
    f: impl Fn(usize) -> Result<T, NumericError> + Sync,
) -> Result<Vec<T>, NumericError> {
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(nodes.max(1));
    if workers <= 1 {
        return (0..nodes).map(&f).collect();
    }
    let chunk = nodes.div_ceil(workers);
    let f = &f;
    std::thread::scope(|s| {
        let handles: Vec<_> = (0..workers)
            .map(|w| s.spawn(move || (w * chunk..((w + 1) * chunk).min(nodes)).map(f).collect::<Result<Vec<T>, _>>()))
            .collect();
        let mut out = Vec::with_capacity(nodes);
        for h in handles {
            out.extend(h.join().expect("worker panicked")?);
        }
        Ok(out)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Which {
    Cotton,
    Ew,
}

impl Which {
    pub fn as_str(self) -> &'static str {
        match self {
            Which::Cotton => "cotton",
            Which::Ew => "ew",
        }
    }

    /// Boundary layers lost to the nested differences.
    fn margin(self) -> usize {
        match self {
            Which::Cotton => 3,
            Which::Ew => 2,
        }
    }
}

impl FromStr for Which {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "cotton" | "flat" => Ok(Which::Cotton),
            "ew" => Ok(Which::Ew),
            _ => Err(format!("unknown tensor '{s}' (expected cotton or ew)")),
        }
    }
}

/// Independent components with labels matching the symbolic reports.
pub fn fd_tensor(s: &FieldSample, which: Which) -> Result<Vec<(String, GridField)>, NumericError> {
    let n = s.g.len();
    let mut out = Vec::new();
    match which {
        Which::Cotton => {
            let c = fieldgeom::cotton(&s.g)?;
            for p in 0..n {
                for q in 0..n {
                    for r in (q + 1)..n {
                        out.push((format!("C[{p}][{q}][{r}]"), c[p][q][r].clone()));
                    }
                }
            }
        }
        Which::Ew => {
            let e = fieldgeom::ew_tensor(&s.g, &s.omega)?;
            for i in 0..n {
                for j in i..n {
                    out.push((format!("E[{i}][{j}]"), e[i][j].clone()));
                }
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct NodeResidual {
    pub coords: Vec<f64>,
    pub value: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FdResidual {
    pub which: Which,
    pub h: f64,
    /// Largest normalized residual over the interior nodes.
    pub max: f64,
    /// Largest Ricci component over the same nodes (the normalization).
    pub ricci_scale: f64,
    #[serde(skip)]
    pub nodes: Vec<NodeResidual>,
}

pub const RICCI_FLOOR: f64 = 1e-12;

/// Max-norm residual over the interior nodes, normalized by the largest
/// Ricci component (or by one when the metric is nearly flat).
pub fn fd_residual(s: &FieldSample, which: Which) -> Result<FdResidual, NumericError> {
    let interior = s.grid.interior(which.margin());
    fd_residual_at(s, which, &interior)
}

fn fd_residual_at(s: &FieldSample, which: Which, nodes: &[usize]) -> Result<FdResidual, NumericError> {
    let comps = fd_tensor(s, which)?;
    let ricci = fieldgeom::ricci_of_metric(&s.g)?;
    let ricci_scale =
        nodes.iter().flat_map(|&n| ricci.iter().flatten().map(move |f| f.at(n).abs())).fold(0.0, f64::max);
    let norm = if ricci_scale < RICCI_FLOOR { 1.0 } else { ricci_scale };
    let per: Vec<NodeResidual> = nodes
        .iter()
        .map(|&n| NodeResidual {
            coords: s.grid.coords(n),
            value: comps.iter().map(|(_, f)| f.at(n).abs()).fold(0.0, f64::max) / norm,
        })
        .collect();
    let max = per.iter().map(|r| r.value).fold(0.0, f64::max);
    Ok(FdResidual { which, h: s.grid.h(), max, ricci_scale, nodes: per })
}

/// Interior nodes of `coarse` and the matching nodes of its refinement.
fn matched_nodes(coarse: &GridSpec, fine: &GridSpec, margin: usize) -> (Vec<usize>, Vec<usize>) {
    let c = coarse.interior(margin);
    let f = c.iter().map(|&n| fine.node(&coarse.index(n).iter().map(|i| 2 * i).collect::<Vec<_>>())).collect();
    (c, f)
}

#[derive(Debug, Clone, Serialize)]
pub struct Convergence {
    pub coarse: FdResidual,
    pub fine: FdResidual,
    /// `coarse / fine`; `None` when both residuals are at rounding level.
    pub ratio: Option<f64>,
}

pub const ROUNDING_FLOOR: f64 = 1e-11;

/// Residuals on `grid` and on its refinement, compared on the same nodes.
pub fn convergence_check(
    p: &Problem,
    index: usize,
    which: Which,
    grid: &GridSpec,
    opts: &CheckOptions,
) -> Result<Convergence, NumericError> {
    let fine_grid = grid.refined();
    let (cn, fnodes) = matched_nodes(grid, &fine_grid, which.margin());
    let coarse = fd_residual_at(&sample(p, index, grid, opts)?, which, &cn)?;
    let fine = fd_residual_at(&sample(p, index, &fine_grid, opts)?, which, &fnodes)?;
    let ratio = (coarse.max > ROUNDING_FLOOR || fine.max > ROUNDING_FLOOR).then(|| coarse.max / fine.max);
    Ok(Convergence { coarse, fine, ratio })
}

#[derive(Debug, Clone, Serialize)]
pub struct PointComparison {
    pub coords: Vec<f64>,
    pub component: String,
    pub symbolic: f64,
    pub fd: f64,
    /// Truncation error estimate of `fd` from the refined grid.
    pub estimate: f64,
    pub agrees: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Agreement {
    pub points: usize,
    pub comparisons: Vec<PointComparison>,
    pub all_agree: bool,
}

/// Safety factor on the Richardson truncation estimate.
pub const ESTIMATE_FACTOR: f64 = 2.0;

/// The symbolic tensor of the engine, evaluated on the solution at `points`
/// random interior nodes, against the finite-difference tensor there.
pub fn symbolic_agreement(
    p: &Problem,
    index: usize,
    which: Which,
    grid: &GridSpec,
    points: usize,
    seed: u64,
    opts: &CheckOptions,
) -> Result<Agreement, NumericError> {
    let eq = p.equation().map_err(|_| NumericError::NoSolution(p.name().to_string()))?;
    let sol = p.solutions.get(index).ok_or(NumericError::SolutionIndex(index))?;
    let symbolic = symbolic_components(eq, which, opts)?;
    let fine_grid = grid.refined();
    let coarse = fd_tensor(&sample(p, index, grid, opts)?, which)?;
    let fine = fd_tensor(&sample(p, index, &fine_grid, opts)?, which)?;
    let (cn, fnodes) = matched_nodes(grid, &fine_grid, which.margin());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut jets = SolutionJets::new(eq, sol);
    let mut comparisons = Vec::new();
    for _ in 0..points {
        let k = rng.gen_range(0..cn.len());
        let x = grid.coords(cn[k]);
        for ((label, e), ((_, fc), (_, ff))) in symbolic.iter().zip(coarse.iter().zip(&fine)) {
            let sym = jets.eval(e, &x).map_err(|err| NumericError::Eval { node: x.clone(), err })?;
            let (a, b) = (fc.at(cn[k]), ff.at(fnodes[k]));
            let estimate = (a - b).abs() * 4.0 / 3.0;
            let tol = ESTIMATE_FACTOR * estimate + 1e-9 * (1.0 + sym.abs());
            comparisons.push(PointComparison {
                coords: x.clone(),
                component: label.clone(),
                symbolic: sym,
                fd: a,
                estimate,
                agrees: (sym - a).abs() <= tol,
            });
        }
    }
    let all_agree = comparisons.iter().all(|c| c.agrees);
    Ok(Agreement { points, comparisons, all_agree })
}

fn symbolic_components(
    eq: &EquationSpec,
    which: Which,
    opts: &CheckOptions,
) -> Result<Vec<(String, Expr)>, NumericError> {
    let n = eq.dim();
    let mut out = Vec::new();
    match which {
        Which::Cotton => {
            let c = analysis::conformal_data(eq, opts)?;
            let t = geometry::cotton(&c, eq).map_err(AnalysisError::from)?;
            for p in 0..n {
                for q in 0..n {
                    for r in (q + 1)..n {
                        out.push((format!("C[{p}][{q}][{r}]"), t[p][q][r].clone()));
                    }
                }
            }
        }
        Which::Ew => {
            let c = analysis::weyl_data(eq, opts)?;
            let w = geometry::weyl_connection(&c, eq).map_err(AnalysisError::from)?;
            let t = geometry::ew_tensor(&w, &c, eq).map_err(AnalysisError::from)?;
            for i in 0..n {
                for j in i..n {
                    out.push((format!("E[{i}][{j}]"), t[i][j].clone()));
                }
            }
        }
    }
    Ok(out)
}

/// Largest difference between the sampled covector and the covector formula
/// applied to the sampled metric with difference quotients.
pub fn omega_discrepancy(s: &FieldSample) -> Result<f64, NumericError> {
    let om = fieldgeom::omega(&s.g)?;
    let nodes = s.grid.interior(1);
    Ok(nodes
        .iter()
        .flat_map(|&n| om.iter().zip(&s.omega).map(move |(a, b)| (a.at(n) - b.at(n)).abs()))
        .fold(0.0, f64::max))
}

#[derive(Debug, Clone, Serialize)]
pub struct NumericOptions {
    /// Zero threshold is `c * h^2`.
    pub c: f64,
    pub points: usize,
    pub seed: u64,
}

impl Default for NumericOptions {
    fn default() -> Self {
        NumericOptions { c: 10.0, points: 20, seed: 1 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct NumericReport {
    pub entry: String,
    pub solution: String,
    pub which: Which,
    pub grid: String,
    pub h: f64,
    pub residual: f64,
    pub residual_refined: f64,
    pub ratio: Option<f64>,
    pub threshold: f64,
    /// The residual is below `c * h^2`, i.e. the tensor looks like zero.
    pub vanishes: bool,
    pub omega_discrepancy: f64,
    pub agreement: Agreement,
}

/// Residual, convergence, covector and symbolic comparison in one report.
pub fn validate(
    p: &Problem,
    index: usize,
    which: Which,
    grid: &GridSpec,
    nopts: &NumericOptions,
    opts: &CheckOptions,
) -> Result<NumericReport, NumericError> {
    let conv = convergence_check(p, index, which, grid, opts)?;
    let s = sample(p, index, grid, opts)?;
    let threshold = nopts.c * grid.h() * grid.h();
    Ok(NumericReport {
        entry: p.name().to_string(),
        solution: p.solutions[index].text.clone(),
        which,
        grid: grid.to_string(),
        h: grid.h(),
        residual: conv.coarse.max,
        residual_refined: conv.fine.max,
        ratio: conv.ratio,
        threshold,
        vanishes: conv.coarse.max < threshold,
        omega_discrepancy: omega_discrepancy(&s)?,
        agreement: symbolic_agreement(p, index, which, grid, nopts.points, nopts.seed, opts)?,
    })
}

/// Per-node residuals as CSV: one column per variable, then the residual.
pub fn write_csv(r: &FdResidual, vars: &[String], mut w: impl Write) -> io::Result<()> {
    writeln!(w, "{},residual", vars.join(","))?;
    for n in &r.nodes {
        let xs: Vec<String> = n.coords.iter().map(|x| format!("{x}")).collect();
        writeln!(w, "{},{:e}", xs.join(","), n.value)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_parsing_and_refinement() {
        let g: GridSpec = "1:2:9".parse().unwrap();
        assert_eq!(g.axes.len(), 3);
        assert_eq!(g.h(), 0.125);
        assert_eq!(g.refined().axes[0].points, 17);
        assert!("1:2:5".parse::<GridSpec>().is_err());
        assert!("1:2".parse::<GridSpec>().is_err());
        let g: GridSpec = "0:1:9,0:2:9,1:2:11".parse().unwrap();
        assert_eq!(g.to_string(), "0:1:9,0:2:9,1:2:11");
    }

    #[test]
    fn node_indexing_round_trips() {
        let g: GridSpec = "0:1:9,0:1:10,0:1:11".parse().unwrap();
        for n in [0, 1, 57, g.len() - 1] {
            assert_eq!(g.node(&g.index(n)), n);
        }
        assert_eq!(g.interior(3).len(), 3 * 4 * 5);
    }

    fn field(g: &GridSpec, f: impl Fn(&[f64]) -> f64) -> GridField {
        let strides = (0..3).map(|k| g.axes[k + 1..].iter().map(|a| a.points).product()).collect();
        let shape = Arc::new(Shape { grid: g.clone(), strides });
        GridField { shape, data: (0..g.len()).map(|n| f(&g.coords(n))).collect() }
    }

    #[test]
    fn central_differences_are_exact_on_quadratics() {
        let g: GridSpec = "0:1:9".parse().unwrap();
        let f = field(&g, |x| x[0] * x[0] + 3.0 * x[1] * x[2]);
        let n = g.node(&[4, 4, 4]);
        assert!((f.deriv(0).at(n) - 1.0).abs() < 1e-12);
        assert!((f.deriv(2).at(n) - 1.5).abs() < 1e-12);
        assert!(f.deriv(0).at(g.node(&[0, 4, 4])).is_nan());
    }

    #[test]
    fn constant_metric_has_zero_residual() {
        let g: GridSpec = "0:1:9".parse().unwrap();
        let c = |v: f64| field(&g, move |_| v);
        let s = FieldSample {
            grid: g.clone(),
            vars: vec!["x".into(), "y".into(), "t".into()],
            g: vec![vec![c(0.0), c(0.0), c(2.0)], vec![c(0.0), c(-1.0), c(0.0)], vec![c(2.0), c(0.0), c(0.0)]],
            omega: vec![c(0.0), c(0.0), c(0.0)],
        };
        for w in [Which::Cotton, Which::Ew] {
            let r = fd_residual(&s, w).unwrap();
            assert_eq!(r.max, 0.0);
            assert_eq!(r.ricci_scale, 0.0);
        }
        assert_eq!(omega_discrepancy(&s).unwrap(), 0.0);
    }
}
