//! Conformal structure of the linearization and its curvature.
//!
//! All tensors are dense `Vec`s of [`Expr`]; partial derivatives are total
//! derivatives reduced modulo the equation. Conventions:
//! `R^i_{jkl} = d_k G^i_{lj} - d_l G^i_{kj} + G^i_{km} G^m_{lj} - G^i_{lm} G^m_{kj}`,
//! `R_{jl} = R^i_{jil}`.

use serde::Serialize;

use crate::atom::{self, AtomId};
use crate::calculus;
use crate::equation::{EquationKind, EquationSpec};
use crate::expr::Expr;
use crate::rational::Q;

pub type Matrix = Vec<Vec<Expr>>;
pub type Tensor3 = Vec<Vec<Vec<Expr>>>;
pub type Tensor4 = Vec<Vec<Vec<Vec<Expr>>>>;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GeometryError {
    #[error("degenerate symbol: determinant vanishes modulo the equation")]
    DegenerateSymbol,
    #[error("the symbols of the system are not proportional: {0}")]
    IncompatibleSystem(String),
    #[error("not a quasilinear first-order system: {0}")]
    NotQuasilinear(String),
    #[error("{0} requires dimension {1}")]
    Dimension(&'static str, usize),
    #[error("covector is not set")]
    MissingOmega,
    #[error("Weyl connection check failed: D g - omega g has a nonzero entry ({0},{1},{2})")]
    WeylCheck(usize, usize, usize),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Representative {
    Adjugate,
    Inverse,
    Pinned,
}

impl Representative {
    pub fn as_str(self) -> &'static str {
        match self {
            Representative::Adjugate => "adjugate",
            Representative::Inverse => "inverse",
            Representative::Pinned => "pinned",
        }
    }
}

impl std::str::FromStr for Representative {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "adjugate" => Ok(Representative::Adjugate),
            "inverse" => Ok(Representative::Inverse),
            "pinned" => Ok(Representative::Pinned),
            _ => Err(format!("unknown representative '{s}'")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ConformalData {
    pub g: Matrix,
    pub g_inv: Matrix,
    pub omega: Option<Vec<Expr>>,
    pub representative: Representative,
}

#[derive(Debug, Clone)]
pub struct Curvature {
    /// `dg[k][i][j] = D_k g_ij`
    pub dg: Tensor3,
    /// `gamma[i][j][k] = G^i_{jk}`
    pub gamma: Tensor3,
    pub ricci: Matrix,
    pub scalar: Expr,
}

#[derive(Debug, Clone)]
pub struct WeylConnection {
    pub gamma: Tensor3,
}

pub fn zeros(n: usize) -> Matrix {
    vec![vec![Expr::zero(); n]; n]
}

fn zeros3(n: usize) -> Tensor3 {
    vec![zeros(n); n]
}

pub fn identity(n: usize) -> Matrix {
    let mut m = zeros(n);
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = Expr::one();
    }
    m
}

fn minor(m: &Matrix, row: usize, col: usize) -> Matrix {
    m.iter()
        .enumerate()
        .filter(|(i, _)| *i != row)
        .map(|(_, r)| r.iter().enumerate().filter(|(j, _)| *j != col).map(|(_, e)| e.clone()).collect())
        .collect()
}

pub fn det(m: &Matrix) -> Expr {
    match m.len() {
        0 => Expr::one(),
        1 => m[0][0].clone(),
        2 => &m[0][0] * &m[1][1] - &m[0][1] * &m[1][0],
        n => {
            let mut acc = Expr::zero();
            for j in 0..n {
                if m[0][j].is_zero() {
                    continue;
                }
                let t = &m[0][j] * &det(&minor(m, 0, j));
                acc = if j % 2 == 0 { acc + t } else { acc - t };
            }
            acc
        }
    }
}

pub fn adjugate(m: &Matrix) -> Matrix {
    let n = m.len();
    let mut out = zeros(n);
    for i in 0..n {
        for j in 0..n {
            let c = det(&minor(m, j, i));
            out[i][j] = if (i + j) % 2 == 0 { c } else { -c };
        }
    }
    out
}

pub fn mat_mul(a: &Matrix, b: &Matrix) -> Matrix {
    let n = a.len();
    let mut out = zeros(n);
    for i in 0..n {
        for j in 0..n {
            let mut acc = Expr::zero();
            for k in 0..n {
                if !a[i][k].is_zero() && !b[k][j].is_zero() {
                    acc = acc + &a[i][k] * &b[k][j];
                }
            }
            out[i][j] = acc;
        }
    }
    out
}

pub fn mat_scale(a: &Matrix, c: &Expr) -> Matrix {
    a.iter().map(|r| r.iter().map(|e| e * c).collect()).collect()
}

pub fn inverse(m: &Matrix) -> Result<Matrix, GeometryError> {
    let d = det(m);
    if d.is_zero() {
        return Err(GeometryError::DegenerateSymbol);
    }
    let inv = d.recip().map_err(|_| GeometryError::DegenerateSymbol)?;
    Ok(mat_scale(&adjugate(m), &inv))
}

/// Symmetric matrix of a quadratic form in the atoms `xi`.
pub fn quadratic_form_matrix(q: &Expr, xi: &[AtomId]) -> Result<Matrix, GeometryError> {
    let n = xi.len();
    let mut m = zeros(n);
    for i in 0..n {
        let di = calculus::partial(q, xi[i]);
        for j in i..n {
            let dij = calculus::partial(&di, xi[j]);
            if dij.atoms_deep().iter().any(|a| xi.contains(a)) {
                return Err(GeometryError::Invalid("form is not quadratic".into()));
            }
            let v = dij.scale(&Q::new(1, 2));
            m[i][j] = v.clone();
            m[j][i] = v;
        }
    }
    // Check homogeneity: q must equal its own polarization.
    let back = quadratic_form(&m, &xi.iter().map(|&a| Expr::atom(a)).collect::<Vec<_>>());
    if !back.same(q) {
        return Err(GeometryError::Invalid("form is not a homogeneous quadratic".into()));
    }
    Ok(m)
}

pub fn quadratic_form(m: &Matrix, v: &[Expr]) -> Expr {
    let mut acc = Expr::zero();
    for (i, row) in m.iter().enumerate() {
        for (j, e) in row.iter().enumerate() {
            if !e.is_zero() {
                acc = acc + e * &v[i] * &v[j];
            }
        }
    }
    acc
}

fn second_order_mi(n: usize, i: usize, j: usize) -> Vec<u8> {
    let mut mi = vec![0u8; n];
    mi[i] += 1;
    mi[j] += 1;
    mi
}

/// `Q[i][j]` such that `xi^T Q xi` is the principal symbol of `f` in the
/// unknown `b`.
fn symbol_of(eq: &EquationSpec, f: &Expr, b: usize) -> Matrix {
    let n = eq.dim();
    let mut m = zeros(n);
    for i in 0..n {
        for j in i..n {
            let a = eq.jet_atom(b, &second_order_mi(n, i, j));
            let d = eq.reduce_mod(&calculus::partial(f, a));
            let d = if i == j { d } else { d.scale(&Q::new(1, 2)) };
            m[i][j] = d.clone();
            m[j][i] = d;
        }
    }
    m
}

fn is_zero_matrix(m: &Matrix) -> bool {
    m.iter().all(|r| r.iter().all(|e| e.is_zero()))
}

/// The upper-index conformal structure `g#` of the linearization.
pub fn symbol_matrix(eq: &EquationSpec) -> Result<Matrix, GeometryError> {
    let s = match eq.kind {
        EquationKind::HydrodynamicSystem => return dispersion_matrix(eq),
        EquationKind::ScalarSecondOrder | EquationKind::Scalar4d => {
            if eq.relations.len() != 1 {
                return Err(GeometryError::Invalid("scalar equation needs exactly one relation".into()));
            }
            symbol_of(eq, &eq.relation_lhs(0), eq.relations[0].unknown)
        }
        EquationKind::SecondOrderSystem => system_symbol(eq)?,
    };
    if eq.reduce_mod(&det(&s)).is_zero() {
        return Err(GeometryError::DegenerateSymbol);
    }
    Ok(s)
}

/// Second-order systems whose matrix symbol is triangular with proportional
/// diagonal entries; the common quadratic form is returned.
fn system_symbol(eq: &EquationSpec) -> Result<Matrix, GeometryError> {
    let m = eq.unknowns.len();
    if eq.relations.len() != m {
        return Err(GeometryError::IncompatibleSystem("need one relation per unknown".into()));
    }
    let blocks: Vec<Vec<Matrix>> =
        (0..m).map(|a| (0..m).map(|b| symbol_of(eq, &eq.relation_lhs(a), b)).collect()).collect();
    let lower = (0..m).all(|a| (a + 1..m).all(|b| is_zero_matrix(&blocks[a][b])));
    let upper = (0..m).all(|a| (0..a).all(|b| is_zero_matrix(&blocks[a][b])));
    if !lower && !upper {
        return Err(GeometryError::IncompatibleSystem("symbol is not triangular".into()));
    }
    let base = &blocks[0][0];
    let n = eq.dim();
    let pivot = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .find(|&(i, j)| !base[i][j].is_zero())
        .ok_or(GeometryError::DegenerateSymbol)?;
    for (a, row) in blocks.iter().enumerate().skip(1) {
        let other = &row[a];
        let c =
            other[pivot.0][pivot.1].try_div(&base[pivot.0][pivot.1]).map_err(|_| GeometryError::DegenerateSymbol)?;
        for i in 0..n {
            for j in 0..n {
                if !eq.reduce_mod(&(&other[i][j] - &(&base[i][j] * &c))).is_zero() {
                    return Err(GeometryError::IncompatibleSystem(format!(
                        "diagonal symbol {a} is not proportional to symbol 0"
                    )));
                }
            }
        }
    }
    Ok(base.clone())
}

/// Dispersion matrix of a two-component quasilinear first-order system:
/// `xi^T D xi = det(sum_k xi_k A_k)`.
pub fn dispersion_matrix(eq: &EquationSpec) -> Result<Matrix, GeometryError> {
    let n = eq.dim();
    let m = eq.unknowns.len();
    if m != 2 || eq.relations.len() != 2 {
        return Err(GeometryError::NotQuasilinear("dispersion matrix needs a two-component system".into()));
    }
    let xi: Vec<AtomId> = (0..n).map(|k| atom::marker(&format!("xi{k}"))).collect();
    let mut pencil = zeros(2);
    for (a, row) in pencil.iter_mut().enumerate() {
        let f = eq.relation_lhs(a);
        for (b, cell) in row.iter_mut().enumerate() {
            let mut acc = Expr::zero();
            for k in 0..n {
                let mut mi = vec![0u8; n];
                mi[k] = 1;
                let c = calculus::partial(&f, eq.jet_atom(b, &mi));
                if c.atoms_deep().iter().any(|&x| eq.jet_of(x).is_some() && atom::jet_order(x) > 0) {
                    return Err(GeometryError::NotQuasilinear(format!(
                        "coefficient {} depends on derivatives",
                        eq.render(&c)
                    )));
                }
                acc = acc + c * Expr::atom(xi[k]);
            }
            *cell = acc;
        }
    }
    let d = det(&pencil);
    if d.is_zero() {
        return Err(GeometryError::DegenerateSymbol);
    }
    quadratic_form_matrix(&d, &xi).map_err(|e| GeometryError::NotQuasilinear(e.to_string()))
}

/// `g` from the symbol with the chosen representative.
pub fn conformal_metric(s: &Matrix, rep: Representative) -> Result<ConformalData, GeometryError> {
    let d = det(s);
    if d.is_zero() {
        return Err(GeometryError::DegenerateSymbol);
    }
    let inv_d = d.recip().map_err(|_| GeometryError::DegenerateSymbol)?;
    let (g, g_inv) = match rep {
        Representative::Adjugate => (adjugate(s), mat_scale(s, &inv_d)),
        Representative::Inverse => (mat_scale(&adjugate(s), &inv_d), s.clone()),
        Representative::Pinned => {
            return Err(GeometryError::Invalid("a pinned representative needs an explicit metric".into()))
        }
    };
    Ok(ConformalData { g, g_inv, omega: None, representative: rep })
}

impl ConformalData {
    /// Explicit lower-index metric.
    pub fn pinned(g: Matrix) -> Result<ConformalData, GeometryError> {
        let g_inv = inverse(&g)?;
        Ok(ConformalData { g, g_inv, omega: None, representative: Representative::Pinned })
    }

    pub fn dim(&self) -> usize {
        self.g.len()
    }

    /// `lambda * g` with the matching inverse.
    pub fn rescaled(&self, lambda: &Expr) -> Result<ConformalData, GeometryError> {
        let inv = lambda.recip().map_err(|_| GeometryError::Invalid("zero conformal factor".into()))?;
        Ok(ConformalData {
            g: mat_scale(&self.g, lambda),
            g_inv: mat_scale(&self.g_inv, &inv),
            omega: None,
            representative: self.representative,
        })
    }

    pub fn with_omega(mut self, omega: Vec<Expr>) -> ConformalData {
        self.omega = Some(omega);
        self
    }

    /// The metric as a quadratic form in the given differentials.
    pub fn as_form(&self, d: &[Expr]) -> Expr {
        quadratic_form(&self.g, d)
    }
}

/// Covector `w_k = 2 g_kj D_s(g^js) + D_k ln det g`.
pub fn omega(c: &ConformalData, eq: &EquationSpec) -> Vec<Expr> {
    let n = c.dim();
    let div: Vec<Expr> = (0..n)
        .map(|j| {
            let mut acc = Expr::zero();
            for s in 0..n {
                acc = acc + eq.total_derivative(&c.g_inv[j][s], s);
            }
            acc
        })
        .collect();
    let d = eq.reduce_mod(&det(&c.g));
    let inv_d = d.recip().expect("metric is nondegenerate");
    (0..n)
        .map(|k| {
            let mut acc = eq.total_derivative(&d, k) * &inv_d;
            for j in 0..n {
                if !c.g[k][j].is_zero() && !div[j].is_zero() {
                    acc = acc + (&c.g[k][j] * &div[j]).scale(&Q::int(2));
                }
            }
            acc
        })
        .collect()
}

pub fn metric_derivatives(c: &ConformalData, eq: &EquationSpec) -> Tensor3 {
    let n = c.dim();
    let mut dg = zeros3(n);
    for (k, dk) in dg.iter_mut().enumerate() {
        for i in 0..n {
            for j in i..n {
                let v = eq.total_derivative(&c.g[i][j], k);
                dk[i][j] = v.clone();
                dk[j][i] = v;
            }
        }
    }
    dg
}

/// Levi-Civita symbols `G^i_{jk}` from the metric derivatives.
pub fn christoffel(c: &ConformalData, dg: &Tensor3) -> Tensor3 {
    let n = c.dim();
    let half = Q::new(1, 2);
    let mut lower = zeros3(n);
    for l in 0..n {
        for j in 0..n {
            for k in j..n {
                let v = (&dg[j][l][k] + &dg[k][l][j] - &dg[l][j][k]).scale(&half);
                lower[l][j][k] = v.clone();
                lower[l][k][j] = v;
            }
        }
    }
    raise_first(&c.g_inv, &lower)
}

fn raise_first(g_inv: &Matrix, lower: &Tensor3) -> Tensor3 {
    let n = g_inv.len();
    let mut up = zeros3(n);
    for i in 0..n {
        for j in 0..n {
            for k in j..n {
                let mut acc = Expr::zero();
                for l in 0..n {
                    if !g_inv[i][l].is_zero() && !lower[l][j][k].is_zero() {
                        acc = acc + &g_inv[i][l] * &lower[l][j][k];
                    }
                }
                up[i][j][k] = acc.clone();
                up[i][k][j] = acc;
            }
        }
    }
    up
}

fn nz_mul(a: &Expr, b: &Expr) -> Option<Expr> {
    if a.is_zero() || b.is_zero() {
        None
    } else {
        Some(a * b)
    }
}

/// Ricci tensor `R_jl = R^i_{jil}` of a (not necessarily metric) connection.
/// `symmetric` skips the `j > l` entries and mirrors them.
pub fn ricci_of(gamma: &Tensor3, eq: &EquationSpec, symmetric: bool) -> Matrix {
    let n = gamma.len();
    // trace[j] = G^i_{ij}
    let trace: Vec<Expr> = (0..n).map(|j| (0..n).fold(Expr::zero(), |acc, i| acc + &gamma[i][i][j])).collect();
    let mut r = zeros(n);
    for j in 0..n {
        for l in 0..n {
            if symmetric && l < j {
                r[j][l] = r[l][j].clone();
                continue;
            }
            let mut acc = Expr::zero();
            for i in 0..n {
                if !gamma[i][l][j].is_zero() {
                    acc = acc + eq.total_derivative(&gamma[i][l][j], i);
                }
            }
            if !trace[j].is_zero() {
                acc = acc - eq.total_derivative(&trace[j], l);
            }
            for m in 0..n {
                if let Some(t) = nz_mul(&trace[m], &gamma[m][l][j]) {
                    acc = acc + t;
                }
                for i in 0..n {
                    if let Some(t) = nz_mul(&gamma[i][l][m], &gamma[m][i][j]) {
                        acc = acc - t;
                    }
                }
            }
            r[j][l] = acc;
        }
    }
    r
}

pub fn curvature(c: &ConformalData, eq: &EquationSpec) -> Curvature {
    let dg = metric_derivatives(c, eq);
    let gamma = christoffel(c, &dg);
    let ricci = ricci_of(&gamma, eq, true);
    let n = c.dim();
    let mut scalar = Expr::zero();
    for j in 0..n {
        for l in 0..n {
            if let Some(t) = nz_mul(&c.g_inv[j][l], &ricci[j][l]) {
                scalar = scalar + t;
            }
        }
    }
    Curvature { dg, gamma, ricci, scalar }
}

/// Full Riemann tensor `R^i_{jkl}` of a connection.
pub fn riemann(gamma: &Tensor3, eq: &EquationSpec) -> Tensor4 {
    let n = gamma.len();
    let mut r = vec![vec![zeros(n); n]; n];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in (k + 1)..n {
                    let mut acc = eq.total_derivative(&gamma[i][l][j], k) - eq.total_derivative(&gamma[i][k][j], l);
                    for m in 0..n {
                        if let Some(t) = nz_mul(&gamma[i][k][m], &gamma[m][l][j]) {
                            acc = acc + t;
                        }
                        if let Some(t) = nz_mul(&gamma[i][l][m], &gamma[m][k][j]) {
                            acc = acc - t;
                        }
                    }
                    r[i][j][l][k] = -acc.clone();
                    r[i][j][k][l] = acc;
                }
            }
        }
    }
    r
}

/// `nabla_r S_pq` for a symmetric `S`, indexed `[r][p][q]`.
pub fn covariant_derivative_sym(s: &Matrix, gamma: &Tensor3, eq: &EquationSpec) -> Tensor3 {
    let n = s.len();
    let mut out = zeros3(n);
    for (r, out_r) in out.iter_mut().enumerate() {
        for p in 0..n {
            for q in p..n {
                let mut acc = eq.total_derivative(&s[p][q], r);
                for m in 0..n {
                    if let Some(t) = nz_mul(&gamma[m][r][p], &s[m][q]) {
                        acc = acc - t;
                    }
                    if let Some(t) = nz_mul(&gamma[m][r][q], &s[p][m]) {
                        acc = acc - t;
                    }
                }
                out_r[p][q] = acc.clone();
                out_r[q][p] = acc;
            }
        }
    }
    out
}

/// Cotton tensor `C_pqr = nabla_r S_pq - nabla_q S_pr`, `S = Ric - R g / 4`.
pub fn cotton(c: &ConformalData, eq: &EquationSpec) -> Result<Tensor3, GeometryError> {
    let curv = curvature(c, eq);
    Ok(cotton_from(c, &curv, eq))
}

pub fn cotton_from(c: &ConformalData, curv: &Curvature, eq: &EquationSpec) -> Tensor3 {
    let n = c.dim();
    let quarter = curv.scalar.scale(&Q::new(1, 4));
    let s: Matrix = (0..n).map(|p| (0..n).map(|q| &curv.ricci[p][q] - &(&quarter * &c.g[p][q])).collect()).collect();
    let ds = covariant_derivative_sym(&s, &curv.gamma, eq);
    let mut out = zeros3(n);
    for p in 0..n {
        for q in 0..n {
            for r in (q + 1)..n {
                let v = &ds[r][p][q] - &ds[q][p][r];
                out[p][r][q] = -v.clone();
                out[p][q][r] = v;
            }
        }
    }
    out
}

/// Weyl connection of `(g, omega)`, checked against `D g = omega g`.
pub fn weyl_connection(c: &ConformalData, eq: &EquationSpec) -> Result<WeylConnection, GeometryError> {
    let dg = metric_derivatives(c, eq);
    weyl_from(c, &dg, eq)
}

pub fn weyl_from(c: &ConformalData, dg: &Tensor3, eq: &EquationSpec) -> Result<WeylConnection, GeometryError> {
    let om = c.omega.as_ref().ok_or(GeometryError::MissingOmega)?;
    let n = c.dim();
    let levi = christoffel(c, dg);
    let up: Vec<Expr> = (0..n).map(|i| (0..n).fold(Expr::zero(), |acc, l| acc + &c.g_inv[i][l] * &om[l])).collect();
    let half = Q::new(1, 2);
    let mut gamma = levi;
    for (i, gi) in gamma.iter_mut().enumerate() {
        for j in 0..n {
            for k in 0..n {
                let mut corr = &up[i] * &c.g[j][k];
                if i == k {
                    corr = corr - &om[j];
                }
                if i == j {
                    corr = corr - &om[k];
                }
                gi[j][k] = &gi[j][k] + &corr.scale(&half);
            }
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in i..n {
                let mut v = &dg[k][i][j] - &(&om[k] * &c.g[i][j]);
                for m in 0..n {
                    if let Some(t) = nz_mul(&gamma[m][k][i], &c.g[m][j]) {
                        v = v - t;
                    }
                    if let Some(t) = nz_mul(&gamma[m][k][j], &c.g[i][m]) {
                        v = v - t;
                    }
                }
                if !eq.reduce_mod(&v).is_zero() {
                    return Err(GeometryError::WeylCheck(k, i, j));
                }
            }
        }
    }
    Ok(WeylConnection { gamma })
}

/// Trace-free part of the symmetrized Ricci tensor of the Weyl connection.
pub fn ew_tensor(w: &WeylConnection, c: &ConformalData, eq: &EquationSpec) -> Result<Matrix, GeometryError> {
    let n = c.dim();
    if n != 3 {
        return Err(GeometryError::Dimension("ew_tensor", 3));
    }
    let r = ricci_of(&w.gamma, eq, false);
    let half = Q::new(1, 2);
    let sym: Matrix = (0..n).map(|i| (0..n).map(|j| (&r[i][j] + &r[j][i]).scale(&half)).collect()).collect();
    let mut tr = Expr::zero();
    for p in 0..n {
        for q in 0..n {
            if let Some(t) = nz_mul(&c.g_inv[p][q], &sym[p][q]) {
                tr = tr + t;
            }
        }
    }
    let third = tr.scale(&Q::new(1, 3));
    Ok((0..n).map(|i| (0..n).map(|j| &sym[i][j] - &(&third * &c.g[i][j])).collect()).collect())
}

/// Leading-order calculus for metrics and equations that only involve jets of
/// order at most `base`. Jets above `base` then carry weight `order - base`,
/// total derivatives raise the weight by one, and the reduction preserves it,
/// so the part of a curvature quantity linear in the top jets can be
/// computed without ever forming the lower-weight terms.
pub struct Leading<'a> {
    eq: &'a EquationSpec,
    base: usize,
    cache: std::cell::RefCell<rustc_hash::FxHashMap<AtomId, Expr>>,
}

impl<'a> Leading<'a> {
    pub fn new(eq: &'a EquationSpec, base: usize) -> Self {
        Leading { eq, base, cache: Default::default() }
    }

    fn high(&self, a: AtomId) -> bool {
        self.eq.jet_of(a).is_some() && atom::jet_order(a) > self.base
    }

    /// Top-weight part of the normal form of a jet.
    pub fn nf(&self, a: AtomId) -> Expr {
        if atom::jet_order(a) <= self.base + 1 {
            return self.eq.normal_form(a);
        }
        if let Some(e) = self.cache.borrow().get(&a) {
            return e.clone();
        }
        let (u, mi) = self.eq.jet_of(a).expect("jet");
        let out = match self.eq.reducing_relation(u, &mi) {
            None => Expr::atom(a),
            Some(ri) => {
                let p = &self.eq.relations[ri].principal;
                let k = mi.iter().zip(p).position(|(s, q)| s > q).unwrap();
                let mut lower = mi.to_vec();
                lower[k] -= 1;
                self.d(&self.nf(self.eq.jet_atom(u, &lower)), k)
            }
        };
        self.cache.borrow_mut().insert(a, out.clone());
        out
    }

    /// Top-weight part of `D_k e`, for `e` of weight 0 or linear in high jets.
    pub fn d(&self, e: &Expr, k: usize) -> Expr {
        let high: Vec<AtomId> = e.atoms().into_iter().filter(|&a| self.high(a)).collect();
        if high.is_empty() {
            return self.eq.total_derivative(e, k);
        }
        let mut acc = Expr::zero();
        for a in high {
            let (u, mi) = self.eq.jet_of(a).unwrap();
            let mut up = mi.to_vec();
            up[k] += 1;
            acc = acc + calculus::partial(e, a) * self.nf(self.eq.jet_atom(u, &up));
        }
        acc
    }
}

fn max_jet_order(eq: &EquationSpec, e: &Expr) -> usize {
    e.atoms_deep().into_iter().filter(|&a| eq.jet_of(a).is_some()).map(atom::jet_order).max().unwrap_or(0)
}

/// Order bound `base` for which [`Leading`] applies to `(c, eq)`.
pub fn leading_base(c: &ConformalData, eq: &EquationSpec) -> usize {
    let mut b = 0;
    for r in &eq.relations {
        b = b.max(r.principal.iter().map(|&x| x as usize).sum());
        b = b.max(max_jet_order(eq, &r.rhs));
    }
    for e in c.g.iter().flatten() {
        b = b.max(max_jet_order(eq, e));
    }
    b
}

/// Part of the Cotton tensor linear in jets of order `base + 3`, where
/// `base = leading_base(c, eq)`. These are exactly the Cotton coefficients
/// at the highest jets that occur.
pub fn leading_cotton(c: &ConformalData, eq: &EquationSpec) -> Tensor3 {
    let n = c.dim();
    let lead = Leading::new(eq, leading_base(c, eq));
    let dg = metric_derivatives(c, eq);
    let gamma = christoffel(c, &dg);
    let trace: Vec<Expr> = (0..n).map(|j| (0..n).fold(Expr::zero(), |acc, i| acc + &gamma[i][i][j])).collect();
    let mut ric = zeros(n);
    for j in 0..n {
        for l in j..n {
            let mut acc = Expr::zero();
            for i in 0..n {
                if !gamma[i][l][j].is_zero() {
                    acc = acc + lead.d(&gamma[i][l][j], i);
                }
            }
            acc = acc - lead.d(&trace[j], l);
            ric[j][l] = acc.clone();
            ric[l][j] = acc;
        }
    }
    let mut scalar = Expr::zero();
    for j in 0..n {
        for l in 0..n {
            if let Some(t) = nz_mul(&c.g_inv[j][l], &ric[j][l]) {
                scalar = scalar + t;
            }
        }
    }
    let quarter = scalar.scale(&Q::new(1, 4));
    let s: Matrix = (0..n).map(|p| (0..n).map(|q| &ric[p][q] - &(&quarter * &c.g[p][q])).collect()).collect();
    let mut out = zeros3(n);
    for p in 0..n {
        for q in 0..n {
            for r in (q + 1)..n {
                let v = lead.d(&s[p][q], r) - lead.d(&s[p][r], q);
                out[p][r][q] = -v.clone();
                out[p][q][r] = v;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::atom::MultiIndex;
    use crate::elementary::exp;
    use crate::equation::Relation;

    fn e(n: i64) -> Expr {
        Expr::int(n)
    }

    fn dkp() -> EquationSpec {
        let u = |mi: &[u8]| Expr::atom(atom::jet("u", mi));
        let rhs = u(&[0, 0, 0]) * u(&[2, 0, 0]) + u(&[1, 0, 0]).powi(2) + u(&[0, 2, 0]);
        EquationSpec::new(
            "dkp",
            &["x", "y", "t"],
            &["u"],
            vec![Relation { unknown: 0, principal: MultiIndex::from_slice(&[1, 0, 1]), rhs }],
            EquationKind::ScalarSecondOrder,
        )
        .unwrap()
    }

    #[test]
    fn dkp_symbol_and_metric() {
        let eq = dkp();
        let s = symbol_matrix(&eq).unwrap();
        let u = eq.jet(0, &[0, 0, 0]);
        assert!(s[0][0].same(&-&u));
        assert!(s[1][1].same(&e(-1)));
        assert!(s[0][2].same(&Expr::frac(1, 2)));
        let c = conformal_metric(&s, Representative::Adjugate).unwrap();
        // adj = -(1/4) * (4 dx dt - dy^2 + 4 u dt^2)
        // adj = (4 dx dt - dy^2 + 4 u dt^2) / 4
        let want = [[e(0), e(0), e(2)], [e(0), e(-1), e(0)], [e(2), e(0), u.scale(&Q::int(4))]];
        for i in 0..3 {
            for j in 0..3 {
                assert!(c.g[i][j].scale(&Q::int(4)).same(&want[i][j]), "{i}{j}");
            }
        }
        let id = mat_mul(&c.g, &c.g_inv);
        assert!((0..3).all(|i| (0..3).all(|j| id[i][j].same(&identity(3)[i][j]))));
    }

    #[test]
    fn dkp_omega_and_einstein_weyl() {
        let eq = dkp();
        let s = symbol_matrix(&eq).unwrap();
        let c = conformal_metric(&s, Representative::Adjugate).unwrap();
        let om = omega(&c, &eq);
        let ux = eq.jet(0, &[1, 0, 0]);
        assert!(om[0].is_zero() && om[1].is_zero());
        assert!(om[2].same(&ux.scale(&Q::int(-4))));
        let c = c.with_omega(om);
        let w = weyl_connection(&c, &eq).unwrap();
        let t = ew_tensor(&w, &c, &eq).unwrap();
        assert!(t.iter().all(|r| r.iter().all(|x| x.is_zero())));
        // dKP is not conformally flat.
        let ct = cotton(&c, &eq).unwrap();
        assert!(ct.iter().flatten().flatten().any(|x| !x.is_zero()));
    }

    #[test]
    fn wave_equation_is_flat() {
        let u = |mi: &[u8]| Expr::atom(atom::jet("u", mi));
        let eq = EquationSpec::new(
            "wave",
            &["x", "y", "t"],
            &["u"],
            vec![Relation {
                unknown: 0,
                principal: MultiIndex::from_slice(&[0, 0, 2]),
                rhs: u(&[2, 0, 0]) + u(&[0, 2, 0]),
            }],
            EquationKind::ScalarSecondOrder,
        )
        .unwrap();
        let s = symbol_matrix(&eq).unwrap();
        assert!(s[2][2].same(&e(1)) && s[0][0].same(&e(-1)));
        let c = conformal_metric(&s, Representative::Adjugate).unwrap();
        assert!(omega(&c, &eq).iter().all(|x| x.is_zero()));
        let ct = cotton(&c, &eq).unwrap();
        assert!(ct.iter().flatten().flatten().all(|x| x.is_zero()));
    }

    #[test]
    fn round_sphere_has_positive_curvature() {
        // g = 4 (dx^2 + dy^2 + dt^2) / (1 + r^2)^2 has scalar curvature 6.
        let eq = EquationSpec::free(&["x", "y", "t"], &["u"]);
        let r2 = (0..3).fold(Expr::zero(), |a, k| a + eq.var(k).powi(2));
        let f = e(4).try_div(&(e(1) + r2).powi(2)).unwrap();
        let c = ConformalData::pinned(mat_scale(&identity(3), &f)).unwrap();
        let curv = curvature(&c, &eq);
        assert!(curv.scalar.same(&e(6)), "{}", curv.scalar);
    }

    #[test]
    fn boyer_finley_metric_is_einstein_weyl() {
        let u = |mi: &[u8]| Expr::atom(atom::jet("u", mi));
        let eq = EquationSpec::new(
            "bf",
            &["x", "y", "t"],
            &["u"],
            vec![Relation {
                unknown: 0,
                principal: MultiIndex::from_slice(&[0, 0, 2]),
                rhs: (u(&[2, 0, 0]) + u(&[0, 2, 0])) * exp(&-u(&[0, 0, 0])) - u(&[0, 0, 1]).powi(2),
            }],
            EquationKind::ScalarSecondOrder,
        )
        .unwrap();
        // The inverse symbol is -e^u times the printed metric, so its
        // covector differs by du.
        let s = symbol_matrix(&eq).unwrap();
        let inv = conformal_metric(&s, Representative::Inverse).unwrap();
        let shifted = omega(&inv, &eq);
        assert!(shifted[0].is_zero() && shifted[2].same(&u(&[0, 0, 1]).scale(&Q::int(2))));
        let mut g = identity(3);
        g[2][2] = -exp(&-u(&[0, 0, 0]));
        let c = ConformalData::pinned(g).unwrap();
        let om = omega(&c, &eq);
        let want = [-u(&[1, 0, 0]), -u(&[0, 1, 0]), u(&[0, 0, 1])];
        for k in 0..3 {
            assert!(om[k].same(&want[k]), "{k}: {}", om[k]);
        }
        let c = c.with_omega(om);
        let w = weyl_connection(&c, &eq).unwrap();
        let t = ew_tensor(&w, &c, &eq).unwrap();
        assert!(t.iter().flatten().all(|x| x.is_zero()));
    }
}
