//! Randomized identities shared by the property suite and the acceptance gate.
#![allow(dead_code, clippy::needless_range_loop)]

use ewcheck::catalog;
use ewcheck::dsl;
use ewcheck::elementary;
use ewcheck::equation::EquationSpec;
use ewcheck::expr::Expr;
use ewcheck::geometry::{self, ConformalData, Matrix};
use proptest::prelude::*;

pub const CASES: u32 = 100;

fn free() -> EquationSpec {
    EquationSpec::free(&["x", "y", "t"], &["u"])
}

#[derive(Debug, Clone)]
pub enum Tree {
    Leaf(usize),
    Int(i64),
    Add(Box<Tree>, Box<Tree>),
    Sub(Box<Tree>, Box<Tree>),
    Mul(Box<Tree>, Box<Tree>),
    Div(Box<Tree>, Box<Tree>),
    Exp(Box<Tree>),
    Ln(Box<Tree>),
    Sin(Box<Tree>),
}

const LEAVES: usize = 7;

fn leaf(eq: &EquationSpec, k: usize) -> Expr {
    match k {
        0..=2 => eq.var(k),
        3 => eq.jet(0, &[0, 0, 0]),
        4 => eq.jet(0, &[1, 0, 0]),
        5 => eq.jet(0, &[0, 1, 0]),
        _ => eq.jet(0, &[1, 1, 0]),
    }
}

pub fn tree(transcendental: bool) -> impl Strategy<Value = Tree> {
    let base = prop_oneof![(0..LEAVES).prop_map(Tree::Leaf), (-3i64..=3).prop_map(Tree::Int)];
    base.prop_recursive(4, 24, 2, move |inner| {
        let b = |t| Box::new(t);
        let mut ops = vec![
            (inner.clone(), inner.clone()).prop_map(move |(a, c)| Tree::Add(b(a), b(c))).boxed(),
            (inner.clone(), inner.clone()).prop_map(move |(a, c)| Tree::Sub(b(a), b(c))).boxed(),
            (inner.clone(), inner.clone()).prop_map(move |(a, c)| Tree::Mul(b(a), b(c))).boxed(),
            (inner.clone(), inner.clone()).prop_map(move |(a, c)| Tree::Div(b(a), b(c))).boxed(),
        ];
        if transcendental {
            ops.push(inner.clone().prop_map(move |a| Tree::Exp(b(a))).boxed());
            ops.push(inner.clone().prop_map(move |a| Tree::Ln(b(a))).boxed());
            ops.push(inner.prop_map(move |a| Tree::Sin(b(a))).boxed());
        }
        proptest::strategy::Union::new(ops)
    })
}

fn build(eq: &EquationSpec, t: &Tree) -> Expr {
    match t {
        Tree::Leaf(k) => leaf(eq, *k),
        Tree::Int(n) => Expr::int(*n),
        Tree::Add(a, b) => build(eq, a) + build(eq, b),
        Tree::Sub(a, b) => build(eq, a) - build(eq, b),
        Tree::Mul(a, b) => build(eq, a) * build(eq, b),
        Tree::Div(a, b) => {
            let (a, b) = (build(eq, a), build(eq, b));
            a.try_div(&b).unwrap_or(a)
        }
        Tree::Exp(a) => elementary::exp(&build(eq, a)),
        Tree::Ln(a) => {
            let a = build(eq, a);
            if a.is_zero() {
                a
            } else {
                elementary::ln(&a)
            }
        }
        Tree::Sin(a) => elementary::sin(&build(eq, a)),
    }
}

/// Affine entries `c0 + c1 x + c2 y + c3 t`; the diagonal constants are
/// nonzero and the off-diagonal ones zero so the determinant is nonzero.
pub fn metric_coeffs() -> impl Strategy<Value = Vec<[i64; 4]>> {
    proptest::collection::vec((-2i64..=2, -1i64..=1, -1i64..=1, -1i64..=1), 6).prop_flat_map(|v| {
        (prop::collection::vec(prop_oneof![Just(-2i64), Just(-1), Just(1), Just(2)], 3), Just(v)).prop_map(
            |(diag, v)| {
                v.iter()
                    .enumerate()
                    .map(|(k, &(_, a, b, c))| {
                        // Entries 0, 3, 5 sit on the diagonal in row-major upper order.
                        let c0 = match k {
                            0 => diag[0],
                            3 => diag[1],
                            5 => diag[2],
                            _ => 0,
                        };
                        [c0, a, b, c]
                    })
                    .collect()
            },
        )
    })
}

/// Affine covector coefficients, four per component.
pub fn covector() -> impl Strategy<Value = Vec<i64>> {
    proptest::collection::vec(-2i64..=2, 12)
}

/// Affine exponent or base of a conformal factor.
pub fn factor() -> impl Strategy<Value = Vec<i64>> {
    proptest::collection::vec(-2i64..=2, 4)
}

fn affine(eq: &EquationSpec, c: &[i64; 4]) -> Expr {
    let mut e = Expr::int(c[0]);
    for k in 0..3 {
        e = e + Expr::int(c[k + 1]) * eq.var(k);
    }
    e
}

fn metric(eq: &EquationSpec, coeffs: &[[i64; 4]]) -> Option<ConformalData> {
    let mut g: Matrix = geometry::zeros(3);
    let mut k = 0;
    for i in 0..3 {
        for j in i..3 {
            let e = affine(eq, &coeffs[k]);
            g[i][j] = e.clone();
            g[j][i] = e;
            k += 1;
        }
    }
    ConformalData::pinned(g).ok()
}

fn zero(e: &Expr) -> bool {
    e.is_zero() || e.normalize().is_zero()
}

pub fn normalize_is_idempotent(t: &Tree) -> Result<(), TestCaseError> {
    let eq = free();
    let e = build(&eq, t);
    let n1 = e.normalize();
    let n2 = n1.normalize();
    prop_assert_eq!(&n1, &n2);
    prop_assert!(n1.same(&e));
    Ok(())
}

pub fn total_derivatives_commute(t: &Tree) -> Result<(), TestCaseError> {
    let eq = free();
    let e = build(&eq, t);
    let xy = eq.total_derivative(&eq.total_derivative(&e, 0), 1);
    let yx = eq.total_derivative(&eq.total_derivative(&e, 1), 0);
    prop_assert!(xy.same(&yx), "{} vs {}", xy, yx);
    Ok(())
}

pub fn total_derivatives_commute_on_an_equation(t: &Tree, i: usize, j: usize) -> Result<(), TestCaseError> {
    let p = catalog::get("dkp").unwrap();
    let eq = p.equation().unwrap();
    let e = build(eq, t);
    let a = eq.total_derivative(&eq.total_derivative(&e, i), j);
    let b = eq.total_derivative(&eq.total_derivative(&e, j), i);
    prop_assert!(eq.reduce_mod(&(a - b)).is_zero());
    Ok(())
}

pub fn curvature_symmetries_and_bianchi(coeffs: &[[i64; 4]]) -> Result<(), TestCaseError> {
    let eq = free();
    let Some(c) = metric(&eq, coeffs) else {
        return Ok(());
    };
    let curv = geometry::curvature(&c, &eq);
    let n = 3;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                prop_assert!(curv.gamma[i][j][k].same(&curv.gamma[i][k][j]));
            }
        }
    }
    let r = geometry::riemann(&curv.gamma, &eq);
    // Lowered: R_ijkl = g_im R^m_jkl.
    let low = |i: usize, j: usize, k: usize, l: usize| -> Expr {
        (0..n).fold(Expr::zero(), |acc, m| acc + &c.g[i][m] * &r[m][j][k][l])
    };
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    prop_assert!(zero(&(&r[i][j][k][l] + &r[i][j][l][k])));
                    prop_assert!(zero(&(low(i, j, k, l) + low(j, i, k, l))), "R_{}{}{}{}", i, j, k, l);
                    prop_assert!(low(i, j, k, l).same(&low(k, l, i, j)));
                    let cyc = &r[i][j][k][l] + &r[i][k][l][j] + &r[i][l][j][k];
                    prop_assert!(zero(&cyc), "first Bianchi at {}{}{}{}", i, j, k, l);
                }
            }
        }
    }
    // Ricci is the contraction R^i_{jil} and is symmetric.
    let unsym = geometry::ricci_of(&curv.gamma, &eq, false);
    for j in 0..n {
        for l in 0..n {
            let contracted = (0..n).fold(Expr::zero(), |acc, i| acc + &r[i][j][i][l]);
            prop_assert!(contracted.same(&curv.ricci[j][l]));
            prop_assert!(unsym[j][l].same(&unsym[l][j]));
        }
    }
    // Contracted Bianchi: g^{jk} nabla_k G_ij = 0 with G = Ric - R g / 2.
    let half = curv.scalar.scale(&ewcheck::rational::Q::new(1, 2));
    let gt: Matrix = (0..n).map(|a| (0..n).map(|b| &curv.ricci[a][b] - &(&half * &c.g[a][b])).collect()).collect();
    let dg = geometry::covariant_derivative_sym(&gt, &curv.gamma, &eq);
    for i in 0..n {
        let mut div = Expr::zero();
        for j in 0..n {
            for k in 0..n {
                div = div + &c.g_inv[j][k] * &dg[k][i][j];
            }
        }
        prop_assert!(zero(&div), "divergence of the Einstein tensor, component {}", i);
    }
    Ok(())
}

pub fn cotton_is_trace_free_and_antisymmetric(coeffs: &[[i64; 4]]) -> Result<(), TestCaseError> {
    let eq = free();
    let Some(c) = metric(&eq, coeffs) else {
        return Ok(());
    };
    let ct = geometry::cotton(&c, &eq).unwrap();
    for p in 0..3 {
        for q in 0..3 {
            for r in 0..3 {
                prop_assert!(zero(&(&ct[p][q][r] + &ct[p][r][q])));
                let cyc = &ct[p][q][r] + &ct[q][r][p] + &ct[r][p][q];
                prop_assert!(zero(&cyc), "cyclic sum at {}{}{}", p, q, r);
            }
        }
    }
    for r in 0..3 {
        let mut tr = Expr::zero();
        for p in 0..3 {
            for q in 0..3 {
                tr = tr + &c.g_inv[p][q] * &ct[p][q][r];
            }
        }
        prop_assert!(zero(&tr), "trace in the first pair, index {}", r);
    }
    Ok(())
}

pub fn weyl_connection_satisfies_its_construction(coeffs: &[[i64; 4]], w: &[i64]) -> Result<(), TestCaseError> {
    let eq = free();
    let Some(c) = metric(&eq, coeffs) else {
        return Ok(());
    };
    let om: Vec<Expr> = (0..3).map(|k| affine(&eq, &[w[4 * k], w[4 * k + 1], w[4 * k + 2], w[4 * k + 3]])).collect();
    let c = c.with_omega(om.clone());
    let wc = geometry::weyl_connection(&c, &eq).unwrap();
    // Checked again here from the definition: D_k g_ij = omega_k g_ij, torsion free.
    for k in 0..3 {
        for i in 0..3 {
            for j in 0..3 {
                prop_assert!(wc.gamma[k][i][j].same(&wc.gamma[k][j][i]));
                let mut v = eq.total_derivative(&c.g[i][j], k) - &om[k] * &c.g[i][j];
                for m in 0..3 {
                    v = v - &wc.gamma[m][k][i] * &c.g[m][j] - &wc.gamma[m][k][j] * &c.g[i][m];
                }
                prop_assert!(zero(&v), "D_{} g_{}{}", k, i, j);
            }
        }
    }
    Ok(())
}

pub fn covector_gauge_law(coeffs: &[[i64; 4]], l: &[i64], use_exp: bool) -> Result<(), TestCaseError> {
    let eq = free();
    let Some(c) = metric(&eq, coeffs) else {
        return Ok(());
    };
    let lin = affine(&eq, &[l[0], l[1], l[2], l[3]]);
    // A nonvanishing conformal factor: exp of an affine function, or 1 + lin^2.
    let lambda = if use_exp { elementary::exp(&lin) } else { Expr::one() + &lin * &lin };
    let scaled = c.rescaled(&lambda).unwrap();
    let before = geometry::omega(&c, &eq);
    let after = geometry::omega(&scaled, &eq);
    let ln = elementary::ln(&lambda);
    for k in 0..3 {
        let want = &before[k] + &eq.total_derivative(&ln, k);
        prop_assert!(after[k].same(&want), "component {}: {} vs {}", k, after[k], want);
    }
    Ok(())
}

pub fn expressions_survive_a_document_round_trip(t: &Tree) -> Result<(), TestCaseError> {
    let eq = free();
    let e = build(&eq, t);
    let text = e.render();
    let src = format!("name: rt\nvariables: x, y, t\nunknowns: u\nomega: ({text})*dx\n");
    let doc = dsl::parse(&src).unwrap();
    let again = dsl::parse(&dsl::render(&doc)).unwrap();
    prop_assert_eq!(&doc, &again);
    let p = dsl::compile(&doc).unwrap();
    let back = p.omega.unwrap()[0].clone();
    prop_assert!(back.same(&e), "{} became {}", text, back);
    Ok(())
}
