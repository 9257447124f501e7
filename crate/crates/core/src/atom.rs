//! Atoms are the indeterminates of the polynomial layer: jet coordinates,
//! independent variables, named constants, function-symbol derivatives and
//! elementary-function applications.
//!
//! Atoms are interned process-wide. Ids are assigned in creation order and
//! carry two flag bits so that hot loops can classify an atom without a
//! table lookup: `ALGEBRAIC_BIT` marks atoms satisfying a quadratic relation
//! (square roots, cosines) and `UNIT_BIT` marks exponentials, which are
//! units and may carry negative or fractional exponents.

use std::cmp::Ordering;
use std::fmt;
use std::hash::Hash;
use std::sync::{Arc, OnceLock};

use parking_lot::RwLock;
use rustc_hash::FxHashMap;
use smallvec::SmallVec;

use crate::expr::Expr;

pub type AtomId = u32;
pub type Sym = Arc<str>;
pub type MultiIndex = SmallVec<[u8; 4]>;

pub const ALGEBRAIC_BIT: u32 = 1 << 31;
pub const UNIT_BIT: u32 = 1 << 30;
const INDEX_MASK: u32 = !(ALGEBRAIC_BIT | UNIT_BIT);

/// Exponents of exponential atoms are stored in units of `1/EXP_DEN`, which
/// lets `exp(u/2)` and `exp(u)` share one atom.
pub const EXP_DEN: i32 = 60;

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub enum AtomKind {
    /// Jet coordinate `u_σ`; an empty derivative count is the unknown itself.
    Jet {
        unknown: Sym,
        mi: MultiIndex,
    },
    /// Independent variable.
    Var(Sym),
    /// Named constant or the spectral parameter.
    Const(Sym),
    /// Formal derivative of an unspecified function applied to arguments.
    Func {
        name: Sym,
        orders: SmallVec<[u8; 6]>,
        args: Vec<Expr>,
    },
    /// `exp(b)`; monomial exponents count multiples of `1/EXP_DEN`.
    Exp(Expr),
    Ln(Expr),
    Sin(Expr),
    /// Algebraic over the matching `Sin`: `cos² = 1 - sin²`.
    Cos(Expr),
    Atan(Expr),
    /// Algebraic: `sqrt(p)² = p`. The argument is a polynomial expression.
    Sqrt(Expr),
    /// Parser placeholders for differentials `dx` and vector fields `d_x`.
    Marker(Sym),
}

pub fn sym(s: &str) -> Sym {
    Arc::from(s)
}

#[derive(Debug)]
pub struct AtomInfo {
    pub kind: AtomKind,
    /// Every jet, variable or constant atom this atom depends on, sorted.
    pub base_deps: Vec<AtomId>,
}

struct Interner {
    infos: Vec<Arc<AtomInfo>>,
    ids: FxHashMap<AtomKind, AtomId>,
}

fn interner() -> &'static RwLock<Interner> {
    static I: OnceLock<RwLock<Interner>> = OnceLock::new();
    I.get_or_init(|| RwLock::new(Interner { infos: Vec::new(), ids: FxHashMap::default() }))
}

pub fn is_algebraic(a: AtomId) -> bool {
    a & ALGEBRAIC_BIT != 0
}

pub fn is_unit(a: AtomId) -> bool {
    a & UNIT_BIT != 0
}

pub fn intern(kind: AtomKind) -> AtomId {
    if let Some(&id) = interner().read().ids.get(&kind) {
        return id;
    }
    let base_deps = compute_deps(&kind);
    let mut w = interner().write();
    if let Some(&id) = w.ids.get(&kind) {
        return id;
    }
    let idx = w.infos.len() as u32;
    assert!(idx < INDEX_MASK, "atom table exhausted");
    let flags = match &kind {
        AtomKind::Sqrt(_) | AtomKind::Cos(_) => ALGEBRAIC_BIT,
        AtomKind::Exp(_) => UNIT_BIT,
        _ => 0,
    };
    let id = idx | flags;
    w.infos.push(Arc::new(AtomInfo { kind: kind.clone(), base_deps }));
    w.ids.insert(kind, id);
    id
}

pub fn info(a: AtomId) -> Arc<AtomInfo> {
    interner().read().infos[(a & INDEX_MASK) as usize].clone()
}

pub fn kind(a: AtomId) -> AtomKind {
    info(a).kind.clone()
}

fn compute_deps(kind: &AtomKind) -> Vec<AtomId> {
    let mut out: Vec<AtomId> = Vec::new();
    let push_expr = |e: &Expr, out: &mut Vec<AtomId>| {
        for a in e.atoms() {
            let inf = info(a);
            match inf.kind {
                AtomKind::Jet { .. } | AtomKind::Var(_) | AtomKind::Const(_) | AtomKind::Marker(_) => out.push(a),
                _ => out.extend(inf.base_deps.iter().copied()),
            }
        }
    };
    match kind {
        AtomKind::Jet { .. } | AtomKind::Var(_) | AtomKind::Const(_) | AtomKind::Marker(_) => {}
        AtomKind::Func { args, .. } => {
            for e in args {
                push_expr(e, &mut out);
            }
        }
        AtomKind::Exp(e)
        | AtomKind::Ln(e)
        | AtomKind::Sin(e)
        | AtomKind::Cos(e)
        | AtomKind::Atan(e)
        | AtomKind::Sqrt(e) => push_expr(e, &mut out),
    }
    out.sort_unstable();
    out.dedup();
    out
}

// Convenience constructors.

pub fn jet(unknown: &str, mi: &[u8]) -> AtomId {
    intern(AtomKind::Jet { unknown: sym(unknown), mi: MultiIndex::from_slice(mi) })
}

pub fn var(name: &str) -> AtomId {
    intern(AtomKind::Var(sym(name)))
}

pub fn constant(name: &str) -> AtomId {
    intern(AtomKind::Const(sym(name)))
}

pub fn marker(name: &str) -> AtomId {
    intern(AtomKind::Marker(sym(name)))
}

pub fn func(name: &str, orders: &[u8], args: Vec<Expr>) -> AtomId {
    assert_eq!(orders.len(), args.len(), "function derivative orders must match arity");
    intern(AtomKind::Func { name: sym(name), orders: SmallVec::from_slice(orders), args })
}

/// Jet order of an atom (0 for anything that is not a jet coordinate).
pub fn jet_order(a: AtomId) -> usize {
    match &info(a).kind {
        AtomKind::Jet { mi, .. } => mi.iter().map(|&k| k as usize).sum(),
        _ => 0,
    }
}

pub fn is_jet(a: AtomId) -> bool {
    matches!(info(a).kind, AtomKind::Jet { .. })
}

fn rank(k: &AtomKind) -> u8 {
    match k {
        AtomKind::Jet { .. } => 0,
        AtomKind::Var(_) => 1,
        AtomKind::Const(_) => 2,
        AtomKind::Func { .. } => 3,
        AtomKind::Exp(_) => 4,
        AtomKind::Ln(_) => 5,
        AtomKind::Sin(_) => 6,
        AtomKind::Cos(_) => 7,
        AtomKind::Atan(_) => 8,
        AtomKind::Sqrt(_) => 9,
        AtomKind::Marker(_) => 10,
    }
}

/// Deterministic structural order, independent of interning order:
/// jets first (by jet order, unknown name, then multi-index), then variables,
/// constants, function symbols and elementary atoms.
pub fn structural_cmp(a: AtomId, b: AtomId) -> Ordering {
    if a == b {
        return Ordering::Equal;
    }
    let ia = info(a);
    let ib = info(b);
    let (ka, kb) = (&ia.kind, &ib.kind);
    rank(ka).cmp(&rank(kb)).then_with(|| match (ka, kb) {
        (AtomKind::Jet { unknown: ua, mi: ma }, AtomKind::Jet { unknown: ub, mi: mb }) => {
            let oa: u32 = ma.iter().map(|&k| k as u32).sum();
            let ob: u32 = mb.iter().map(|&k| k as u32).sum();
            oa.cmp(&ob).then_with(|| ua.cmp(ub)).then_with(|| mb.cmp(ma))
        }
        (AtomKind::Var(x), AtomKind::Var(y))
        | (AtomKind::Const(x), AtomKind::Const(y))
        | (AtomKind::Marker(x), AtomKind::Marker(y)) => x.cmp(y),
        (AtomKind::Func { name: na, orders: oa, args: aa }, AtomKind::Func { name: nb, orders: ob, args: ab }) => na
            .cmp(nb)
            .then_with(|| {
                let sa: u32 = oa.iter().map(|&k| k as u32).sum();
                let sb: u32 = ob.iter().map(|&k| k as u32).sum();
                sa.cmp(&sb)
            })
            .then_with(|| ob.cmp(oa))
            .then_with(|| cmp_expr_lists(aa, ab)),
        (AtomKind::Exp(x), AtomKind::Exp(y))
        | (AtomKind::Ln(x), AtomKind::Ln(y))
        | (AtomKind::Sin(x), AtomKind::Sin(y))
        | (AtomKind::Cos(x), AtomKind::Cos(y))
        | (AtomKind::Atan(x), AtomKind::Atan(y))
        | (AtomKind::Sqrt(x), AtomKind::Sqrt(y)) => x.structural_cmp(y),
        _ => Ordering::Equal,
    })
}

fn cmp_expr_lists(a: &[Expr], b: &[Expr]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        let c = x.structural_cmp(y);
        if c != Ordering::Equal {
            return c;
        }
    }
    a.len().cmp(&b.len())
}

/// Name of an unknown's jet in suffix notation when every variable name is
/// a single character, bracket notation otherwise.
pub fn jet_name(unknown: &str, mi: &[u8], vars: Option<&[Sym]>) -> String {
    if mi.iter().all(|&k| k == 0) {
        return unknown.to_string();
    }
    if let Some(vs) = vars {
        if vs.len() == mi.len() && vs.iter().all(|v| v.chars().count() == 1) {
            let mut s = format!("{unknown}_");
            for (v, &k) in vs.iter().zip(mi) {
                for _ in 0..k {
                    s.push_str(v);
                }
            }
            return s;
        }
    }
    let idx: Vec<String> = mi.iter().map(|k| k.to_string()).collect();
    format!("{unknown}[{}]", idx.join(","))
}

thread_local! {
    static RENDER_VARS: std::cell::RefCell<Option<Vec<Sym>>> = const { std::cell::RefCell::new(None) };
}

/// Runs `f` with the variable names used for suffix-form jet rendering.
pub fn with_render_vars<R>(vars: &[Sym], f: impl FnOnce() -> R) -> R {
    let prev = RENDER_VARS.with(|r| r.replace(Some(vars.to_vec())));
    let out = f();
    RENDER_VARS.with(|r| *r.borrow_mut() = prev);
    out
}

pub fn render_atom(a: AtomId) -> String {
    let inf = info(a);
    match &inf.kind {
        AtomKind::Jet { unknown, mi } => RENDER_VARS.with(|r| jet_name(unknown, mi, r.borrow().as_deref())),
        AtomKind::Var(s) | AtomKind::Const(s) | AtomKind::Marker(s) => s.to_string(),
        AtomKind::Func { name, orders, args } => {
            let a: Vec<String> = args.iter().map(|e| e.to_string()).collect();
            if orders.iter().all(|&k| k == 0) {
                format!("{name}({})", a.join(", "))
            } else if orders.len() == 1 && orders[0] <= 4 {
                format!("{name}{}({})", "'".repeat(orders[0] as usize), a.join(", "))
            } else {
                let o: Vec<String> = orders.iter().map(|k| k.to_string()).collect();
                format!("{name}[{}]({})", o.join(","), a.join(", "))
            }
        }
        AtomKind::Exp(e) => format!("exp({e})"),
        AtomKind::Ln(e) => format!("ln({e})"),
        AtomKind::Sin(e) => format!("sin({e})"),
        AtomKind::Cos(e) => format!("cos({e})"),
        AtomKind::Atan(e) => format!("arctan({e})"),
        AtomKind::Sqrt(e) => format!("sqrt({e})"),
    }
}

pub struct AtomDisplay(pub AtomId);

impl fmt::Display for AtomDisplay {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render_atom(self.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interning_is_idempotent() {
        let a = jet("u", &[1, 0, 1]);
        let b = jet("u", &[1, 0, 1]);
        assert_eq!(a, b);
        assert_ne!(a, jet("u", &[0, 1, 1]));
        assert!(!is_algebraic(a) && !is_unit(a));
    }

    #[test]
    fn jet_names_follow_variable_names() {
        let vars = [sym("x"), sym("y"), sym("t")];
        assert_eq!(jet_name("u", &[1, 0, 1], Some(&vars)), "u_xt");
        assert_eq!(jet_name("u", &[0, 0, 0], Some(&vars)), "u");
        let long = [sym("x1"), sym("x2")];
        assert_eq!(jet_name("u", &[2, 1], Some(&long)), "u[2,1]");
    }

    #[test]
    fn structural_order_puts_low_jets_first() {
        let u = jet("u", &[0, 0, 0]);
        let ux = jet("u", &[1, 0, 0]);
        let x = var("x");
        assert_eq!(structural_cmp(u, ux), Ordering::Less);
        assert_eq!(structural_cmp(ux, x), Ordering::Less);
    }
}
