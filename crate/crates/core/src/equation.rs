//! Equations in solved form, prolongation and reduction modulo the equation.

use std::sync::Arc;

use parking_lot::RwLock;
use rustc_hash::FxHashMap;
use serde::Serialize;

use crate::atom::{self, AtomId, AtomKind, MultiIndex, Sym};
use crate::calculus::{self, Derivation, Leaf};
use crate::expr::{Expr, FactorId};
use crate::poly::Monomial;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EquationKind {
    ScalarSecondOrder,
    HydrodynamicSystem,
    SecondOrderSystem,
    Scalar4d,
}

impl EquationKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EquationKind::ScalarSecondOrder => "scalar-second-order",
            EquationKind::HydrodynamicSystem => "hydrodynamic-system",
            EquationKind::SecondOrderSystem => "second-order-system",
            EquationKind::Scalar4d => "scalar-4d",
        }
    }

    pub fn default_base_order(self) -> usize {
        match self {
            EquationKind::HydrodynamicSystem => 0,
            _ => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EquationError {
    #[error("right-hand side of {0} contains the reducible jet {1}")]
    ReducibleRhs(String, String),
    #[error("{0} is not reducible modulo the equation")]
    NotReducible(String),
    #[error("expression is not polynomial in {0}")]
    NotPolynomial(String),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone)]
pub struct Relation {
    pub unknown: usize,
    pub principal: MultiIndex,
    pub rhs: Expr,
}

struct Caches {
    normal: RwLock<FxHashMap<AtomId, Expr>>,
    atom_d: Vec<RwLock<FxHashMap<AtomId, Expr>>>,
    factor_d: Vec<RwLock<FxHashMap<FactorId, Expr>>>,
}

/// A PDE or system in solved form. Cloning is cheap and shares the
/// reduction table.
#[derive(Clone)]
pub struct EquationSpec {
    pub name: String,
    pub vars: Vec<Sym>,
    pub var_atoms: Vec<AtomId>,
    pub unknowns: Vec<Sym>,
    pub relations: Vec<Relation>,
    pub kind: EquationKind,
    caches: Arc<Caches>,
}

impl std::fmt::Debug for EquationSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EquationSpec").field("name", &self.name).field("kind", &self.kind).finish()
    }
}

fn dominates(sigma: &[u8], p: &[u8]) -> bool {
    sigma.len() == p.len() && sigma.iter().zip(p).all(|(a, b)| a >= b)
}

impl EquationSpec {
    pub fn new(
        name: &str,
        vars: &[&str],
        unknowns: &[&str],
        relations: Vec<Relation>,
        kind: EquationKind,
    ) -> Result<EquationSpec, EquationError> {
        let vars: Vec<Sym> = vars.iter().map(|v| atom::sym(v)).collect();
        let n = vars.len();
        let spec = EquationSpec {
            name: name.to_string(),
            var_atoms: vars.iter().map(|v| atom::var(v)).collect(),
            vars,
            unknowns: unknowns.iter().map(|u| atom::sym(u)).collect(),
            relations,
            kind,
            caches: Arc::new(Caches {
                normal: RwLock::new(FxHashMap::default()),
                atom_d: (0..n).map(|_| RwLock::new(FxHashMap::default())).collect(),
                factor_d: (0..n).map(|_| RwLock::new(FxHashMap::default())).collect(),
            }),
        };
        for r in &spec.relations {
            if r.principal.len() != n {
                return Err(EquationError::Invalid("principal multi-index has the wrong length".into()));
            }
            for a in r.rhs.atoms_deep() {
                if let Some((u, mi)) = spec.jet_of(a) {
                    if spec.reducing_relation(u, &mi).is_some() {
                        let p = spec.jet_atom(r.unknown, &r.principal);
                        return Err(EquationError::ReducibleRhs(spec.render_atom(p), spec.render_atom(a)));
                    }
                }
            }
        }
        Ok(spec)
    }

    /// An empty equation: total derivatives without any reduction.
    pub fn free(vars: &[&str], unknowns: &[&str]) -> EquationSpec {
        EquationSpec::new("free", vars, unknowns, Vec::new(), EquationKind::ScalarSecondOrder).expect("no relations")
    }

    pub fn dim(&self) -> usize {
        self.vars.len()
    }

    pub fn jet_atom(&self, unknown: usize, mi: &[u8]) -> AtomId {
        atom::jet(&self.unknowns[unknown], mi)
    }

    pub fn jet(&self, unknown: usize, mi: &[u8]) -> Expr {
        Expr::atom(self.jet_atom(unknown, mi))
    }

    /// Jet of `unknowns[0]` by a string of variable letters, e.g. `"xt"`.
    pub fn jet_by_name(&self, unknown: usize, letters: &[usize]) -> Expr {
        let mut mi = vec![0u8; self.dim()];
        for &k in letters {
            mi[k] += 1;
        }
        self.jet(unknown, &mi)
    }

    pub fn var(&self, k: usize) -> Expr {
        Expr::atom(self.var_atoms[k])
    }

    /// `(unknown index, multi-index)` if `a` is a jet of a declared unknown.
    pub fn jet_of(&self, a: AtomId) -> Option<(usize, MultiIndex)> {
        match &atom::info(a).kind {
            AtomKind::Jet { unknown, mi } => {
                let u = self.unknowns.iter().position(|s| s == unknown)?;
                if mi.len() == self.dim() {
                    Some((u, mi.clone()))
                } else {
                    None
                }
            }
            _ => None,
        }
    }

    pub fn reducing_relation(&self, unknown: usize, mi: &[u8]) -> Option<usize> {
        self.relations.iter().position(|r| r.unknown == unknown && dominates(mi, &r.principal))
    }

    pub fn is_parametric(&self, a: AtomId) -> bool {
        match self.jet_of(a) {
            Some((u, mi)) => self.reducing_relation(u, &mi).is_none(),
            None => false,
        }
    }

    pub fn render_atom(&self, a: AtomId) -> String {
        atom::with_render_vars(&self.vars, || atom::render_atom(a))
    }

    pub fn render(&self, e: &Expr) -> String {
        atom::with_render_vars(&self.vars, || e.render())
    }

    /// Normal form of a jet coordinate (the jet itself when parametric).
    pub fn normal_form(&self, a: AtomId) -> Expr {
        let (u, mi) = match self.jet_of(a) {
            Some(x) => x,
            None => return Expr::atom(a),
        };
        let ri = match self.reducing_relation(u, &mi) {
            Some(r) => r,
            None => return Expr::atom(a),
        };
        if let Some(e) = self.caches.normal.read().get(&a) {
            return e.clone();
        }
        let rel = &self.relations[ri];
        let out = if mi.as_slice() == rel.principal.as_slice() {
            rel.rhs.clone()
        } else {
            let k = mi.iter().zip(&rel.principal).position(|(s, p)| s > p).unwrap();
            let mut lower = mi.clone();
            lower[k] -= 1;
            let base = self.normal_form(self.jet_atom(u, &lower));
            self.total_derivative(&base, k)
        };
        self.caches.normal.write().insert(a, out.clone());
        out
    }

    /// Normal form of a reducible jet; error if `target` is parametric.
    pub fn prolong(&self, target: AtomId) -> Result<Expr, EquationError> {
        match self.jet_of(target) {
            Some((u, mi)) if self.reducing_relation(u, &mi).is_some() => Ok(self.normal_form(target)),
            _ => Err(EquationError::NotReducible(self.render_atom(target))),
        }
    }

    /// Total derivative in direction `k`, reduced modulo the equation. The
    /// input may contain reducible jets; they are reduced first.
    pub fn total_derivative(&self, e: &Expr, k: usize) -> Expr {
        let e = self.reduce_mod(e);
        let mut d = Derivation::new(TotalLeaf { eq: self, k });
        d.expr(&e)
    }

    /// Plain total derivative without reduction.
    pub fn total_derivative_free(&self, e: &Expr, k: usize) -> Expr {
        let vars = self.var_atoms.clone();
        let me = self;
        let mut d = Derivation::new(move |a: AtomId| {
            if let Some((u, mi)) = me.jet_of(a) {
                let mut m = mi.to_vec();
                m[k] += 1;
                return me.jet(u, &m);
            }
            if vars[k] == a {
                Expr::one()
            } else {
                Expr::zero()
            }
        });
        d.expr(e)
    }

    /// Replaces every reducible jet by its normal form.
    pub fn reduce_mod(&self, e: &Expr) -> Expr {
        let mut rules: FxHashMap<AtomId, Expr> = FxHashMap::default();
        for a in e.atoms_deep() {
            if let Some((u, mi)) = self.jet_of(a) {
                if self.reducing_relation(u, &mi).is_some() {
                    rules.insert(a, self.normal_form(a));
                }
            }
        }
        if rules.is_empty() {
            return e.clone();
        }
        calculus::substitute(e, &rules)
    }

    /// Coefficients of `e` with respect to parametric jets of order above
    /// `base_order`. Zero coefficients are omitted.
    pub fn residual_split(&self, e: &Expr, base_order: usize) -> Result<Vec<(Monomial, Expr)>, EquationError> {
        let high = |a: AtomId| self.jet_of(a).is_some() && atom::jet_order(a) > base_order;
        for a in e.atoms() {
            if high(a) {
                continue;
            }
            if let Some(b) = atom::info(a).base_deps.iter().copied().find(|&b| high(b)) {
                return Err(EquationError::NotPolynomial(self.render_atom(b)));
            }
        }
        match e.collect(high) {
            Some(parts) => Ok(parts.into_iter().filter(|(_, c)| !c.is_zero()).collect()),
            None => {
                let bad = e.atoms().into_iter().find(|&a| high(a)).unwrap();
                Err(EquationError::NotPolynomial(self.render_atom(bad)))
            }
        }
    }

    /// Left-hand side `principal - rhs` of relation `i`.
    pub fn relation_lhs(&self, i: usize) -> Expr {
        let r = &self.relations[i];
        self.jet(r.unknown, &r.principal) - &r.rhs
    }
}

struct TotalLeaf<'a> {
    eq: &'a EquationSpec,
    k: usize,
}

impl Leaf for TotalLeaf<'_> {
    fn leaf(&mut self, a: AtomId) -> Expr {
        if let Some((u, mi)) = self.eq.jet_of(a) {
            let mut m = mi.to_vec();
            m[self.k] += 1;
            return self.eq.normal_form(self.eq.jet_atom(u, &m));
        }
        if self.eq.var_atoms[self.k] == a {
            Expr::one()
        } else {
            Expr::zero()
        }
    }

    fn cached_atom(&mut self, a: AtomId) -> Option<Expr> {
        self.eq.caches.atom_d[self.k].read().get(&a).cloned()
    }

    fn store_atom(&mut self, a: AtomId, e: &Expr) {
        self.eq.caches.atom_d[self.k].write().insert(a, e.clone());
    }

    fn cached_factor(&mut self, f: FactorId) -> Option<Expr> {
        self.eq.caches.factor_d[self.k].read().get(&f).cloned()
    }

    fn store_factor(&mut self, f: FactorId, e: &Expr) {
        self.eq.caches.factor_d[self.k].write().insert(f, e.clone());
    }
}

/// Builds a relation from an implicit equation `f = 0` linear in `principal`.
pub fn solve_linear(f: &Expr, principal: AtomId) -> Result<Expr, EquationError> {
    let a = calculus::partial(f, principal);
    if a.is_zero() {
        return Err(EquationError::Invalid(format!("equation does not contain {}", atom::render_atom(principal))));
    }
    if a.contains_atom(principal) || a.atoms_deep().contains(&principal) {
        return Err(EquationError::Invalid(format!("equation is not linear in {}", atom::render_atom(principal))));
    }
    let mut zero = FxHashMap::default();
    zero.insert(principal, Expr::zero());
    let b = calculus::substitute(f, &zero);
    (-b).try_div(&a).map_err(|e| EquationError::Invalid(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elementary::exp;

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
    fn dkp_reduces_its_own_relation() {
        let eq = dkp();
        let lhs = eq.relation_lhs(0);
        assert!(eq.reduce_mod(&lhs).is_zero());
        let uyy = eq.jet(0, &[0, 2, 0]);
        assert!(eq.reduce_mod(&uyy).same(&uyy));
    }

    #[test]
    fn prolongation_is_consistent() {
        let eq = dkp();
        // u_xxt two ways: D_x of the principal entry, and the cached entry.
        let e = eq.prolong(eq.jet_atom(0, &[2, 0, 1])).unwrap();
        let d = eq.total_derivative(&eq.jet(0, &[1, 0, 1]), 0);
        assert!(e.same(&d));
        // u_xtt via D_t(u_xt) equals D_x(u_tt)? u_tt is parametric for dKP,
        // so compare D_t(entry(u_xt)) with entry(u_xtt).
        let a = eq.prolong(eq.jet_atom(0, &[1, 0, 2])).unwrap();
        let b = eq.total_derivative(&eq.normal_form(eq.jet_atom(0, &[1, 0, 1])), 2);
        assert!(a.same(&b));
        assert!(eq.prolong(eq.jet_atom(0, &[0, 2, 0])).is_err());
    }

    #[test]
    fn exponential_rhs_prolongs_by_chain_rule() {
        let u = |mi: &[u8]| Expr::atom(atom::jet("u", mi));
        let eq = EquationSpec::new(
            "e",
            &["x", "y", "t"],
            &["u"],
            vec![Relation { unknown: 0, principal: MultiIndex::from_slice(&[0, 0, 2]), rhs: exp(&u(&[0, 0, 0])) }],
            EquationKind::ScalarSecondOrder,
        )
        .unwrap();
        let r = eq.reduce_mod(&u(&[0, 0, 3]));
        assert!(r.same(&(exp(&u(&[0, 0, 0])) * u(&[0, 0, 1]))));
    }

    #[test]
    fn residual_split_collects_high_jets() {
        let eq = dkp();
        let a = Expr::atom(atom::func("a", &[1], vec![eq.jet(0, &[0, 0, 0])]));
        let e = (a - Expr::one()) * eq.jet(0, &[3, 0, 0]);
        let parts = eq.residual_split(&e, 2).unwrap();
        assert_eq!(parts.len(), 1);
        assert!(eq.residual_split(&Expr::zero(), 2).unwrap().is_empty());
    }

    #[test]
    fn reducible_rhs_rejected() {
        let u = |mi: &[u8]| Expr::atom(atom::jet("u", mi));
        let r = EquationSpec::new(
            "bad",
            &["x", "y", "t"],
            &["u"],
            vec![Relation { unknown: 0, principal: MultiIndex::from_slice(&[0, 0, 2]), rhs: u(&[0, 0, 3]) }],
            EquationKind::ScalarSecondOrder,
        );
        assert!(r.is_err());
    }
}
