//! Derivations and substitution.
//!
//! A derivation is fixed by its value on leaf atoms (jets, variables,
//! constants); composite atoms are handled by the chain rule. Partial
//! derivatives, total derivatives and derivatives along vector fields are all
//! instances.

use rustc_hash::FxHashMap;

use crate::atom::{self, AtomId, AtomKind, EXP_DEN};
use crate::elementary;
use crate::expr::{Expr, FactorId};
use crate::poly::{Monomial, Poly};
use crate::rational::Q;

/// Values of a derivation on leaf atoms.
pub trait Leaf {
    fn leaf(&mut self, a: AtomId) -> Expr;

    /// Shared cache lookups, for derivations that outlive one call.
    fn cached_atom(&mut self, _a: AtomId) -> Option<Expr> {
        None
    }
    fn store_atom(&mut self, _a: AtomId, _e: &Expr) {}
    fn cached_factor(&mut self, _f: FactorId) -> Option<Expr> {
        None
    }
    fn store_factor(&mut self, _f: FactorId, _e: &Expr) {}
}

impl<F: FnMut(AtomId) -> Expr> Leaf for F {
    fn leaf(&mut self, a: AtomId) -> Expr {
        self(a)
    }
}

/// A derivation with memoized atom and denominator-factor images.
pub struct Derivation<L: Leaf> {
    pub leaf: L,
    atoms: FxHashMap<AtomId, Expr>,
    factors: FxHashMap<FactorId, Expr>,
}

impl<L: Leaf> Derivation<L> {
    pub fn new(leaf: L) -> Self {
        Derivation { leaf, atoms: FxHashMap::default(), factors: FxHashMap::default() }
    }

    pub fn atom(&mut self, a: AtomId) -> Expr {
        if let Some(e) = self.atoms.get(&a) {
            return e.clone();
        }
        if let Some(e) = self.leaf.cached_atom(a) {
            self.atoms.insert(a, e.clone());
            return e;
        }
        let inf = atom::info(a);
        let d = match &inf.kind {
            AtomKind::Jet { .. } | AtomKind::Var(_) | AtomKind::Const(_) | AtomKind::Marker(_) => self.leaf.leaf(a),
            _ if inf.base_deps.is_empty() => Expr::zero(),
            AtomKind::Func { name, orders, args } => {
                let mut acc = Expr::zero();
                for (k, arg) in args.iter().enumerate() {
                    let da = self.expr(arg);
                    if da.is_zero() {
                        continue;
                    }
                    let mut o = orders.clone();
                    o[k] += 1;
                    acc = acc + elementary::func(name, &o, args.clone()) * da;
                }
                acc
            }
            AtomKind::Exp(b) => {
                let db = self.expr(b);
                (Expr::atom(a) * db).scale(&Q::new(1, EXP_DEN as i64))
            }
            AtomKind::Ln(arg) => {
                let d = self.expr(arg);
                d.try_div(arg).expect("logarithm of zero")
            }
            AtomKind::Sin(b) => elementary::cos(b) * self.expr(b),
            AtomKind::Cos(b) => -(elementary::sin(b) * self.expr(b)),
            AtomKind::Atan(b) => {
                let d = self.expr(b);
                d.try_div(&(Expr::one() + b.powi(2))).expect("1 + x^2 is nonzero")
            }
            AtomKind::Sqrt(p) => {
                let d = self.expr(p);
                (Expr::atom(a) * d).try_div(&p.scale(&Q::int(2))).expect("sqrt of zero")
            }
        };
        self.leaf.store_atom(a, &d);
        self.atoms.insert(a, d.clone());
        d
    }

    pub fn poly(&mut self, p: &Poly) -> Expr {
        let mut poly_acc = Poly::zero();
        let mut rat_acc = Expr::zero();
        for a in p.atoms() {
            let da = self.atom(a);
            if da.is_zero() {
                continue;
            }
            let pa = p.partial_formal(a);
            if da.is_polynomial() {
                poly_acc = poly_acc.add(&pa.mul(da.num()));
            } else {
                rat_acc = rat_acc + Expr::from_poly(pa) * da;
            }
        }
        Expr::from_poly(poly_acc) + rat_acc
    }

    fn factor(&mut self, id: FactorId) -> Expr {
        if let Some(e) = self.factors.get(&id) {
            return e.clone();
        }
        if let Some(e) = self.leaf.cached_factor(id) {
            self.factors.insert(id, e.clone());
            return e;
        }
        let f = crate::expr::factor_poly(id);
        let d = self.poly(&f);
        self.leaf.store_factor(id, &d);
        self.factors.insert(id, d.clone());
        d
    }

    pub fn expr(&mut self, e: &Expr) -> Expr {
        if e.is_zero() {
            return Expr::zero();
        }
        let dnum = self.poly(e.num());
        if e.is_polynomial() {
            return dnum;
        }
        // d(n / prod f^k) = (dn - n * sum k df/f) / prod f^k
        let mut s = Expr::zero();
        for &(id, k) in e.den() {
            let df = self.factor(id);
            if df.is_zero() {
                continue;
            }
            let f = Expr::from_poly((*crate::expr::factor_poly(id)).clone());
            s = s + (df * Expr::int(k as i64)).try_div(&f).expect("registered factors are nonzero");
        }
        let n = Expr::from_poly(e.num().clone());
        let top = dnum - n * s;
        let inv_den = Expr::from_fraction(Poly::one(), e.den_poly()).expect("nonzero denominator");
        top * inv_den
    }
}

/// Formal partial derivative with respect to atom `a`.
pub fn partial(e: &Expr, a: AtomId) -> Expr {
    let mut d = Derivation::new(move |b: AtomId| if b == a { Expr::one() } else { Expr::zero() });
    // Composite atoms act as independent coordinates when differentiated by
    // themselves.
    if !matches!(atom::kind(a), AtomKind::Jet { .. } | AtomKind::Var(_) | AtomKind::Const(_) | AtomKind::Marker(_)) {
        d.atoms.insert(a, Expr::one());
    }
    d.expr(e)
}

/// Derivative along `sum_k coeffs[k] * d/d(atoms[k])` (partial derivatives).
pub fn directional(e: &Expr, field: &[(AtomId, Expr)]) -> Expr {
    let mut acc = Expr::zero();
    for (a, c) in field {
        if c.is_zero() {
            continue;
        }
        acc = acc + c * &partial(e, *a);
    }
    acc
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RewriteError {
    #[error("rewrite rules do not terminate (cyclic rule set)")]
    Cyclic,
}

/// Simultaneous substitution of atoms by expressions. Composite atoms whose
/// arguments mention a replaced atom are rebuilt.
pub struct Substitution<'a> {
    rules: &'a FxHashMap<AtomId, Expr>,
    touch: FxHashMap<AtomId, bool>,
    images: FxHashMap<(AtomId, i32), Expr>,
    factors: FxHashMap<FactorId, Expr>,
}

impl<'a> Substitution<'a> {
    pub fn new(rules: &'a FxHashMap<AtomId, Expr>) -> Self {
        Substitution { rules, touch: FxHashMap::default(), images: FxHashMap::default(), factors: FxHashMap::default() }
    }

    fn touches(&mut self, a: AtomId) -> bool {
        if let Some(&t) = self.touch.get(&a) {
            return t;
        }
        let t = if self.rules.contains_key(&a) {
            true
        } else {
            let inf = atom::info(a);
            match &inf.kind {
                AtomKind::Jet { .. } | AtomKind::Var(_) | AtomKind::Const(_) | AtomKind::Marker(_) => false,
                AtomKind::Func { args, .. } => {
                    let args = args.clone();
                    args.iter().any(|e| e.atoms().into_iter().any(|b| self.touches(b)))
                }
                AtomKind::Exp(e)
                | AtomKind::Ln(e)
                | AtomKind::Sin(e)
                | AtomKind::Cos(e)
                | AtomKind::Atan(e)
                | AtomKind::Sqrt(e) => {
                    let e = e.clone();
                    e.atoms().into_iter().any(|b| self.touches(b))
                }
            }
        };
        self.touch.insert(a, t);
        t
    }

    /// Image of `a^e`.
    fn image(&mut self, a: AtomId, e: i32) -> Expr {
        if let Some(x) = self.images.get(&(a, e)) {
            return x.clone();
        }
        let img = if let Some(r) = self.rules.get(&a) {
            r.powi(e)
        } else {
            match atom::kind(a) {
                AtomKind::Exp(b) => elementary::exp(&self.expr(&b).scale(&Q::new(e as i64, EXP_DEN as i64))),
                kind => {
                    let base = match kind {
                        AtomKind::Func { name, orders, args } => {
                            let args: Vec<Expr> = args.iter().map(|x| self.expr(x)).collect();
                            let f = elementary::func(&name, &orders, args);
                            // The rebuilt atom may itself be a rule target.
                            match f.as_atom().and_then(|id| self.rules.get(&id)) {
                                Some(r) => r.clone(),
                                None => f,
                            }
                        }
                        AtomKind::Ln(x) => elementary::ln(&self.expr(&x)),
                        AtomKind::Sin(x) => elementary::sin(&self.expr(&x)),
                        AtomKind::Cos(x) => elementary::cos(&self.expr(&x)),
                        AtomKind::Atan(x) => elementary::atan(&self.expr(&x)),
                        AtomKind::Sqrt(x) => elementary::sqrt(&self.expr(&x)),
                        _ => Expr::atom(a),
                    };
                    base.powi(e)
                }
            }
        };
        self.images.insert((a, e), img.clone());
        img
    }

    fn poly(&mut self, p: &Poly) -> Expr {
        let atoms = p.atoms();
        let touched: Vec<AtomId> = atoms.into_iter().filter(|&a| self.touches(a)).collect();
        if touched.is_empty() {
            return Expr::from_poly(p.clone());
        }
        let parts = p.collect(|a| touched.binary_search(&a).is_ok());
        let mut acc = Expr::zero();
        for (m, coeff) in parts {
            let mut t = Expr::from_poly(coeff);
            for &(a, e) in m.vars() {
                t = t * self.image(a, e);
            }
            acc = acc + t;
        }
        acc
    }

    pub fn expr(&mut self, e: &Expr) -> Expr {
        let num = self.poly(e.num());
        if e.is_polynomial() {
            return num;
        }
        let mut den = Expr::one();
        for &(id, k) in e.den() {
            let img = match self.factors.get(&id) {
                Some(x) => x.clone(),
                None => {
                    let f = crate::expr::factor_poly(id);
                    let x = self.poly(&f);
                    self.factors.insert(id, x.clone());
                    x
                }
            };
            den = den * img.powi(k as i32);
        }
        num.try_div(&den).expect("substitution made a denominator vanish")
    }
}

pub fn substitute(e: &Expr, rules: &FxHashMap<AtomId, Expr>) -> Expr {
    if rules.is_empty() {
        return e.clone();
    }
    Substitution::new(rules).expr(e)
}

/// One rule of a rewrite pack: `name^(orders)(args) -> rhs`, where `rhs`
/// refers to the arguments through the placeholder atoms `slot(0..arity)`.
#[derive(Clone, Debug)]
pub struct FuncRule {
    pub name: String,
    pub orders: Vec<u8>,
    pub rhs: Expr,
}

/// Placeholder variable standing for the `k`-th function argument in rule
/// right-hand sides.
pub fn slot(k: usize) -> AtomId {
    atom::var(&format!("#{k}"))
}

/// A set of function-symbol rewrite rules ("closure" rules). Any derivative
/// at or above a rule's order is rewritten by differentiating the rule.
#[derive(Clone, Debug, Default)]
pub struct RewritePack {
    pub name: String,
    pub rules: Vec<FuncRule>,
}

impl RewritePack {
    fn rule_for(&self, name: &str, orders: &[u8]) -> Option<&FuncRule> {
        self.rules.iter().find(|r| {
            r.name == name && r.orders.len() == orders.len() && r.orders.iter().zip(orders).all(|(a, b)| a <= b)
        })
    }

    /// Right-hand side for `name^(orders)` in slot placeholders.
    fn rewrite_slots(
        &self,
        name: &str,
        orders: &[u8],
        memo: &mut FxHashMap<(String, Vec<u8>), Expr>,
        depth: usize,
    ) -> Result<Option<Expr>, RewriteError> {
        if depth > 64 {
            return Err(RewriteError::Cyclic);
        }
        let key = (name.to_string(), orders.to_vec());
        if let Some(e) = memo.get(&key) {
            return Ok(Some(e.clone()));
        }
        let rule = match self.rule_for(name, orders) {
            Some(r) => r.clone(),
            None => return Ok(None),
        };
        let out = if rule.orders.as_slice() == orders {
            rule.rhs.clone()
        } else {
            // Lower one order in the first slot that exceeds the rule and
            // differentiate that expression with respect to the slot.
            let k = orders.iter().zip(&rule.orders).position(|(a, b)| a > b).unwrap();
            let mut lower = orders.to_vec();
            lower[k] -= 1;
            let base = self.rewrite_slots(name, &lower, memo, depth + 1)?.expect("rule applies to lower order");
            let d = partial(&base, slot(k));
            self.apply_slots(&d, memo, depth + 1)?
        };
        memo.insert(key, out.clone());
        Ok(Some(out))
    }

    /// Rewrites every function atom in an expression written over slots.
    fn apply_slots(
        &self,
        e: &Expr,
        memo: &mut FxHashMap<(String, Vec<u8>), Expr>,
        depth: usize,
    ) -> Result<Expr, RewriteError> {
        let mut rules: FxHashMap<AtomId, Expr> = FxHashMap::default();
        for a in e.atoms_deep() {
            if let AtomKind::Func { name, orders, args } = atom::kind(a) {
                if let Some(rhs) = self.rewrite_slots(&name, &orders, memo, depth)? {
                    let mut sub: FxHashMap<AtomId, Expr> = FxHashMap::default();
                    for (k, arg) in args.iter().enumerate() {
                        sub.insert(slot(k), arg.clone());
                    }
                    rules.insert(a, substitute(&rhs, &sub));
                }
            }
        }
        if rules.is_empty() {
            return Ok(e.clone());
        }
        Ok(substitute(e, &rules))
    }

    /// Applies the pack to an expression.
    pub fn apply(&self, e: &Expr) -> Result<Expr, RewriteError> {
        let mut memo = FxHashMap::default();
        self.apply_slots(e, &mut memo, 0)
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }
}

/// Applies `rules` repeatedly until no rule target remains.
pub fn rewrite_fixpoint(e: &Expr, rules: &FxHashMap<AtomId, Expr>) -> Result<Expr, RewriteError> {
    let mut cur = e.clone();
    for _ in 0..64 {
        let atoms = cur.atoms_deep();
        if !atoms.iter().any(|a| rules.contains_key(a)) {
            return Ok(cur);
        }
        cur = substitute(&cur, rules);
    }
    Err(RewriteError::Cyclic)
}

/// Coefficients of `e` with respect to the atoms selected by `pick`.
pub fn collect(e: &Expr, pick: impl Fn(AtomId) -> bool) -> Option<Vec<(Monomial, Expr)>> {
    e.collect(pick)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elementary::{exp, func, ln};

    fn j(mi: &[u8]) -> Expr {
        Expr::atom(atom::jet("u", mi))
    }

    #[test]
    fn partial_product_rule() {
        let ux = atom::jet("u", &[1, 0, 0]);
        let e = j(&[1, 0, 0]) * j(&[0, 1, 0]) * j(&[0, 0, 1]);
        assert!(partial(&e, ux).same(&(j(&[0, 1, 0]) * j(&[0, 0, 1]))));
    }

    #[test]
    fn partial_chain_rules() {
        let uxx = atom::jet("u", &[2, 0, 0]);
        let eta = func("eta", &[0], vec![j(&[2, 0, 0])]);
        let d = partial(&eta, uxx);
        assert!(d.same(&func("eta", &[1], vec![j(&[2, 0, 0])])));
        let utt = atom::jet("u", &[0, 0, 2]);
        let e = exp(&j(&[0, 0, 2]));
        assert!(partial(&e, utt).same(&e));
    }

    #[test]
    fn partial_through_quotients() {
        let x = atom::var("px");
        let xe = Expr::atom(x);
        let e = Expr::one() / (&xe + &Expr::one());
        let d = partial(&e, x);
        assert!(d.same(&(-(Expr::one() / (&xe + &Expr::one()).powi(2)))));
        let l = ln(&(xe.powi(2) + Expr::one()));
        assert!(partial(&l, x).same(&(xe.scale(&Q::int(2)) / (xe.powi(2) + Expr::one()))));
    }

    #[test]
    fn substitution_rebuilds_composites() {
        let u = atom::jet("u", &[0, 0, 0]);
        let x = Expr::atom(atom::var("x"));
        let mut rules = FxHashMap::default();
        rules.insert(u, ln(&x));
        let e = exp(&j(&[0, 0, 0]).scale(&Q::int(2)));
        assert!(substitute(&e, &rules).same(&x.powi(2)));
    }

    #[test]
    fn chazy_pack_rewrites_higher_derivatives() {
        let s = Expr::atom(slot(0));
        let e0 = func("eta", &[0], vec![s.clone()]);
        let e1 = func("eta", &[1], vec![s.clone()]);
        let e2 = func("eta", &[2], vec![s.clone()]);
        let pack = RewritePack {
            name: "chazy".into(),
            rules: vec![FuncRule {
                name: "eta".into(),
                orders: vec![3],
                rhs: e1.powi(2).scale(&Q::int(3)) - (e0 * e2).scale(&Q::int(2)),
            }],
        };
        let a = j(&[2, 0, 0]);
        let eta3 = func("eta", &[3], vec![a.clone()]);
        let r = pack.apply(&eta3).unwrap();
        let expect = func("eta", &[1], vec![a.clone()]).powi(2).scale(&Q::int(3))
            - (func("eta", &[0], vec![a.clone()]) * func("eta", &[2], vec![a.clone()])).scale(&Q::int(2));
        assert!(r.same(&expect));
        // eta'''' = D(3 eta'^2 - 2 eta eta'') with eta''' rewritten again.
        let eta4 = pack.apply(&func("eta", &[4], vec![a.clone()])).unwrap();
        assert!(!eta4
            .atoms_deep()
            .iter()
            .any(|&b| matches!(atom::kind(b), AtomKind::Func { ref orders, .. } if orders[0] >= 3)));
    }
}
