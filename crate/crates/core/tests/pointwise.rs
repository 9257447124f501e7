//! Tensors evaluated at a point of the equation manifold must agree with the
//! symbolic tensors evaluated at the same point.

use ewcheck::analysis::{self, CheckOptions};
use ewcheck::catalog;
use ewcheck::expr::Expr;
use ewcheck::fieldgeom;
use ewcheck::geometry::{self, Representative};
use ewcheck::jetpoint::{self, JetPoint};
use ewcheck::rational::Q;

fn metric(name: &str) -> (ewcheck::equation::EquationSpec, geometry::ConformalData) {
    let p = catalog::get(name).unwrap();
    let eq = p.equation().unwrap().clone();
    let s = geometry::symbol_matrix(&eq).unwrap();
    let c = geometry::conformal_metric(&s, Representative::Adjugate).unwrap();
    (eq, c)
}

fn cotton_agrees(name: &str) {
    let (eq, c) = metric(name);
    let sym = geometry::cotton(&c, &eq).unwrap();
    for seed in 0..3 {
        let mut pt = JetPoint::new(&eq, 6, seed);
        let gs = pt.expand_matrix(&c.g, 3).unwrap();
        let num = fieldgeom::cotton(&gs).unwrap();
        let mut nonzero = 0;
        for p in 0..3 {
            for q in 0..3 {
                for r in 0..3 {
                    let want = pt.expand(&sym[p][q][r], 0).unwrap().value().clone();
                    assert_eq!(num[p][q][r].value(), &want, "{name} C[{p}][{q}][{r}] seed {seed}");
                    nonzero += usize::from(!want.is_zero());
                }
            }
        }
        assert!(nonzero > 0, "{name}: expected a nonzero Cotton tensor");
    }
}

#[test]
fn cotton_at_a_point_matches_symbolic_dkp() {
    cotton_agrees("dkp");
}

#[test]
fn cotton_at_a_point_matches_symbolic_minimal_hypersurface() {
    cotton_agrees("minimal-hypersurface");
}

#[test]
fn einstein_weyl_at_a_point_matches_symbolic() {
    let (eq, c) = metric("dkp");
    let formula = geometry::omega(&c, &eq);
    for (omega, zero) in [(formula.clone(), true), (vec![Expr::zero(); 3], false)] {
        let cw = c.clone().with_omega(omega.clone());
        let sym = geometry::ew_tensor(&geometry::weyl_connection(&cw, &eq).unwrap(), &cw, &eq).unwrap();
        let mut pt = JetPoint::new(&eq, 6, 3);
        let gs = pt.expand_matrix(&c.g, 2).unwrap();
        let om: Vec<_> = omega.iter().map(|w| pt.expand(w, 1).unwrap()).collect();
        let num = fieldgeom::ew_tensor(&gs, &om).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let want = pt.expand(&sym[i][j], 0).unwrap();
                assert_eq!(num[i][j].value(), want.value(), "E[{i}][{j}]");
            }
        }
        let at = jetpoint::ew_at_point(&eq, &c.g, &omega, 3).unwrap();
        assert_eq!(at.iter().all(|(_, v)| v.is_zero()), zero);
    }
}

#[test]
fn omega_at_a_point_matches_formula() {
    let (eq, c) = metric("dkp");
    let sym = geometry::omega(&c, &eq);
    let mut pt = JetPoint::new(&eq, 6, 11);
    let gs = pt.expand_matrix(&c.g, 1).unwrap();
    let num = fieldgeom::omega(&gs).unwrap();
    for k in 0..3 {
        assert_eq!(num[k].value(), pt.expand(&sym[k], 0).unwrap().value());
    }
}

#[test]
fn flat_metrics_have_no_witness() {
    let (eq, c) = metric("linear-wave");
    assert!(jetpoint::cotton_witness(&eq, &c.g, 0, 3).unwrap().is_none());
}

#[test]
fn witness_decides_monge_ampere_forms() {
    for name in ["monge-ampere-elliptic", "monge-ampere-hyperbolic", "monge-ampere-affine"] {
        let p = catalog::get(name).unwrap();
        let opts = CheckOptions { witness: true, ..p.check_options() };
        let rep = analysis::check_cotton_flat(p.equation().unwrap(), &opts).unwrap();
        assert_eq!(rep.verdict, analysis::Verdict::Fail, "{name}");
        assert!(rep.residuals[0].coefficient.num().as_constant().is_some_and(|q| q != Q::ZERO));
    }
}
