//! Canonical rational expressions.
//!
//! An [`Expr`] is a Laurent polynomial numerator over a product of powers of
//! registered denominator factors. Factors are primitive, free of monomial
//! content and algebraic atoms, square-free and pairwise coprime; the
//! registry refines itself (splitting a factor when a new denominator shares
//! part of it) so the basis stays coprime. Numerators are kept reduced
//! modulo the algebraic relations `sqrt(p)^2 = p` and `cos^2 = 1 - sin^2`.
//!
//! Zero has the unique representation "empty numerator", which is what all
//! identity checks rely on.

use std::cmp::Ordering;
use std::fmt;
use std::hash::Hash;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::{Arc, OnceLock};

use parking_lot::{Mutex, RwLock};
use rustc_hash::FxHashMap;
use smallvec::SmallVec;

use crate::atom::{self, AtomId, AtomKind, EXP_DEN};
use crate::gcd;
use crate::poly::{Monomial, Poly};
use crate::rational::Q;

pub type FactorId = u32;
pub type Den = SmallVec<[(FactorId, u32); 2]>;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum KernelError {
    #[error("division by an identically zero expression")]
    DivisionByZero,
}

// ---------------------------------------------------------------------------
// Factor registry

struct Registry {
    polys: Vec<Arc<Poly>>,
    split: Vec<Option<Vec<(FactorId, u32)>>>,
    basis: Vec<FactorId>,
    ids: FxHashMap<Poly, FactorId>,
    cache: FxHashMap<Poly, Vec<(FactorId, u32)>>,
    pows: FxHashMap<(FactorId, u32), Arc<Poly>>,
}

fn registry() -> &'static RwLock<Registry> {
    static R: OnceLock<RwLock<Registry>> = OnceLock::new();
    R.get_or_init(|| {
        RwLock::new(Registry {
            polys: Vec::new(),
            split: Vec::new(),
            basis: Vec::new(),
            ids: FxHashMap::default(),
            cache: FxHashMap::default(),
            pows: FxHashMap::default(),
        })
    })
}

fn reg_lock() -> &'static Mutex<()> {
    static L: OnceLock<Mutex<()>> = OnceLock::new();
    L.get_or_init(|| Mutex::new(()))
}

pub fn factor_poly(id: FactorId) -> Arc<Poly> {
    registry().read().polys[id as usize].clone()
}

/// Number of registered denominator factors.
pub fn factor_count() -> usize {
    registry().read().polys.len()
}

fn factor_pow(id: FactorId, k: u32) -> Arc<Poly> {
    if k == 1 {
        return factor_poly(id);
    }
    if let Some(p) = registry().read().pows.get(&(id, k)) {
        return p.clone();
    }
    let f = factor_poly(id);
    let p = Arc::new(f.pow(k));
    registry().write().pows.insert((id, k), p.clone());
    p
}

fn push_den(out: &mut Vec<(FactorId, u32)>, id: FactorId, k: u32) {
    match out.iter_mut().find(|p| p.0 == id) {
        Some(p) => p.1 += k,
        None => out.push((id, k)),
    }
}

/// Expands split factors into the current basis.
fn resolve_into(out: &mut Vec<(FactorId, u32)>, id: FactorId, k: u32, reg: &Registry) {
    match &reg.split[id as usize] {
        None => push_den(out, id, k),
        Some(parts) => {
            for &(p, e) in parts {
                resolve_into(out, p, e * k, reg);
            }
        }
    }
}

fn resolve(den: &[(FactorId, u32)]) -> Den {
    let reg = registry().read();
    if den.iter().all(|&(id, _)| reg.split[id as usize].is_none()) {
        return Den::from_slice(den);
    }
    let mut out = Vec::new();
    for &(id, k) in den {
        resolve_into(&mut out, id, k, &reg);
    }
    out.sort_unstable();
    Den::from_vec(out)
}

fn new_basis(reg: &mut Registry, p: Poly) -> FactorId {
    if let Some(&id) = reg.ids.get(&p) {
        return id;
    }
    let id = reg.polys.len() as FactorId;
    reg.polys.push(Arc::new(p.clone()));
    reg.split.push(None);
    reg.basis.push(id);
    reg.ids.insert(p, id);
    id
}

/// Decomposes a non-zero, algebraic-free polynomial as `c * m * prod f^k`.
pub fn decompose(p: &Poly) -> (Q, Monomial, Vec<(FactorId, u32)>) {
    let (c, m, q) = gcd::split_content(p);
    if q.as_constant().is_some() {
        return (c, m, Vec::new());
    }
    if let Some(d) = registry().read().cache.get(&q) {
        let d = d.clone();
        return (c, m, resolve(&d).to_vec());
    }
    let _guard = reg_lock().lock();
    let d = decompose_locked(&q);
    (c, m, d)
}

fn decompose_locked(q: &Poly) -> Vec<(FactorId, u32)> {
    if q.as_constant().is_some() {
        return Vec::new();
    }
    if let Some(d) = registry().read().cache.get(q) {
        let d = d.clone();
        return resolve(&d).to_vec();
    }
    'restart: loop {
        let basis: Vec<(FactorId, Arc<Poly>)> = {
            let reg = registry().read();
            reg.basis
                .iter()
                .filter(|&&id| reg.split[id as usize].is_none())
                .map(|&id| (id, reg.polys[id as usize].clone()))
                .collect()
        };
        let mut rest = q.clone();
        let mut out: Vec<(FactorId, u32)> = Vec::new();
        for (id, f) in &basis {
            if !f.is_empty() && !f.atoms().iter().all(|a| rest.contains_atom(*a)) {
                continue;
            }
            while gcd::maybe_divides(&rest, f) {
                match rest.div_exact(f) {
                    Some(qq) => {
                        rest = gcd::split_content(&qq).2;
                        push_den(&mut out, *id, 1);
                    }
                    None => break,
                }
            }
            if rest.as_constant().is_some() {
                break;
            }
        }
        if rest.as_constant().is_none() {
            for (id, f) in &basis {
                if gcd::certainly_coprime(&rest, f) {
                    continue;
                }
                let g = gcd::gcd(&rest, f);
                if g.as_constant().is_some() || &g == f.as_ref() {
                    continue;
                }
                let h = gcd::split_content(&f.div_exact(&g).expect("gcd divides")).2;
                let mut reg = registry().write();
                let gi = new_basis(&mut reg, g);
                let hi = new_basis(&mut reg, h);
                reg.split[*id as usize] = Some(vec![(gi, 1), (hi, 1)]);
                reg.basis.retain(|b| b != id);
                drop(reg);
                continue 'restart;
            }
            // Square-free refinement.
            for x in rest.atoms() {
                let d = rest.partial_formal(x);
                if d.is_zero() || gcd::certainly_coprime(&rest, &d) {
                    continue;
                }
                let g = gcd::gcd(&rest, &d);
                if g.as_constant().is_some() {
                    continue;
                }
                let h = gcd::split_content(&rest.div_exact(&g).expect("gcd divides")).2;
                let mut parts = decompose_locked(&g);
                for (id, k) in decompose_locked(&h) {
                    push_den(&mut parts, id, k);
                }
                for (id, k) in parts {
                    push_den(&mut out, id, k);
                }
                rest = Poly::one();
                break;
            }
            if rest.as_constant().is_none() {
                let mut reg = registry().write();
                let id = new_basis(&mut reg, rest);
                push_den(&mut out, id, 1);
            }
        }
        // Splits registered while decomposing sub-parts may apply to `out`.
        let mut res = resolve(&out).to_vec();
        res.sort_unstable();
        registry().write().cache.insert(q.clone(), res.clone());
        return res;
    }
}

// ---------------------------------------------------------------------------
// Algebraic atoms

fn relation_cache() -> &'static RwLock<FxHashMap<AtomId, Arc<Poly>>> {
    static C: OnceLock<RwLock<FxHashMap<AtomId, Arc<Poly>>>> = OnceLock::new();
    C.get_or_init(|| RwLock::new(FxHashMap::default()))
}

/// The polynomial value of `a^2` for an algebraic atom.
pub fn square_value(a: AtomId) -> Arc<Poly> {
    if let Some(p) = relation_cache().read().get(&a) {
        return p.clone();
    }
    let p = match atom::kind(a) {
        AtomKind::Sqrt(arg) => {
            assert!(arg.is_polynomial(), "sqrt arguments are kept polynomial");
            arg.num().clone()
        }
        AtomKind::Cos(b) => {
            let s = atom::intern(AtomKind::Sin(b));
            Poly::one().sub(&Poly::monomial(Monomial::atom(s, 2), Q::ONE))
        }
        _ => panic!("not an algebraic atom"),
    };
    let p = Arc::new(p);
    relation_cache().write().insert(a, p.clone());
    p
}

/// Reduces every algebraic exponent into {0, 1}.
pub fn reduce_algebraic(p: Poly) -> Poly {
    if !p.has_algebraic() {
        return p;
    }
    let mut plain: Vec<(Monomial, Q)> = Vec::new();
    let mut acc = Poly::zero();
    for (m, c) in p.terms() {
        let high: Vec<(AtomId, i32)> =
            m.vars().iter().copied().filter(|&(a, e)| atom::is_algebraic(a) && e >= 2).collect();
        if high.is_empty() {
            plain.push((m.clone(), c.clone()));
            continue;
        }
        let mut rest = m.clone();
        let mut t = Poly::one();
        for (a, e) in high {
            rest = rest.without(a);
            if e % 2 == 1 {
                rest = rest.mul(&Monomial::atom(a, 1));
            }
            t = t.mul(&square_value(a).pow((e / 2) as u32));
        }
        acc = acc.add(&t.mul_monomial(&rest).scale(c));
    }
    let out = Poly::from_terms(plain).add(&acc);
    if out.terms().iter().any(|(m, _)| m.vars().iter().any(|&(a, e)| atom::is_algebraic(a) && e >= 2)) {
        reduce_algebraic(out)
    } else {
        out
    }
}

fn first_algebraic(p: &Poly) -> Option<AtomId> {
    p.terms().iter().flat_map(|(m, _)| m.vars().iter()).map(|&(a, _)| a).find(|&a| atom::is_algebraic(a))
}

// ---------------------------------------------------------------------------
// Expressions

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Expr(Arc<Inner>);

#[derive(PartialEq, Eq, Hash)]
struct Inner {
    num: Poly,
    den: Den,
}

impl Default for Expr {
    fn default() -> Self {
        Expr::zero()
    }
}

fn cancel(mut num: Poly, den: &[(FactorId, u32)]) -> (Poly, Den) {
    let den = resolve(den);
    let mut out = Den::new();
    if num.is_zero() {
        return (num, out);
    }
    for &(id, k) in den.iter() {
        let mut k = k;
        let f = factor_poly(id);
        while k > 0 && gcd::maybe_divides(&num, &f) {
            match num.div_exact(&f) {
                Some(q) => {
                    num = q;
                    k -= 1;
                }
                None => break,
            }
        }
        if k > 0 {
            out.push((id, k));
        }
    }
    (num, out)
}

fn merge_max(a: &[(FactorId, u32)], b: &[(FactorId, u32)]) -> Den {
    let mut out = Den::new();
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        match (a.get(i), b.get(j)) {
            (Some(&x), Some(&y)) if x.0 == y.0 => {
                out.push((x.0, x.1.max(y.1)));
                i += 1;
                j += 1;
            }
            (Some(&x), Some(&y)) if x.0 < y.0 => {
                out.push(x);
                i += 1;
            }
            (Some(_), Some(&y)) => {
                out.push(y);
                j += 1;
            }
            (Some(&x), None) => {
                out.push(x);
                i += 1;
            }
            (None, Some(&y)) => {
                out.push(y);
                j += 1;
            }
            (None, None) => break,
        }
    }
    out
}

fn merge_sum(a: &[(FactorId, u32)], b: &[(FactorId, u32)]) -> Den {
    let mut v: Vec<(FactorId, u32)> = a.to_vec();
    for &(id, k) in b {
        push_den(&mut v, id, k);
    }
    v.sort_unstable();
    Den::from_vec(v)
}

/// `prod f^(l_f - a_f)` for `a` dividing `l`.
fn cofactor(l: &[(FactorId, u32)], a: &[(FactorId, u32)]) -> Poly {
    let mut p = Poly::one();
    for &(id, k) in l {
        let ka = a.iter().find(|x| x.0 == id).map(|x| x.1).unwrap_or(0);
        if k > ka {
            p = p.mul(&factor_pow(id, k - ka));
        }
    }
    p
}

impl Expr {
    fn raw(num: Poly, den: Den) -> Expr {
        crate::budget::check_size(num.len());
        Expr(Arc::new(Inner { num, den }))
    }

    pub fn zero() -> Expr {
        Expr::raw(Poly::zero(), Den::new())
    }

    pub fn one() -> Expr {
        Expr::raw(Poly::one(), Den::new())
    }

    pub fn int(n: i64) -> Expr {
        Expr::raw(Poly::constant(Q::int(n)), Den::new())
    }

    pub fn rational(q: Q) -> Expr {
        Expr::raw(Poly::constant(q), Den::new())
    }

    pub fn frac(n: i64, d: i64) -> Expr {
        Expr::rational(Q::new(n, d))
    }

    pub fn atom(a: AtomId) -> Expr {
        Expr::raw(Poly::atom(a), Den::new())
    }

    pub fn atom_pow(a: AtomId, e: i32) -> Expr {
        if atom::is_algebraic(a) && !(0..=1).contains(&e) {
            return Expr::atom(a).powi(e);
        }
        Expr::raw(Poly::monomial(Monomial::atom(a, e), Q::ONE), Den::new())
    }

    pub fn from_poly(p: Poly) -> Expr {
        Expr::raw(reduce_algebraic(p), Den::new())
    }

    /// `num / den` for polynomials; fails if `den` is zero.
    pub fn from_fraction(num: Poly, den: Poly) -> Result<Expr, KernelError> {
        if den.is_zero() {
            return Err(KernelError::DivisionByZero);
        }
        let mut num = reduce_algebraic(num);
        let mut den = reduce_algebraic(den);
        while let Some(a) = first_algebraic(&den) {
            let conj = den.conjugate(a);
            num = reduce_algebraic(num.mul(&conj));
            den = reduce_algebraic(den.mul(&conj));
            if den.is_zero() {
                return Err(KernelError::DivisionByZero);
            }
        }
        if num.is_zero() {
            return Ok(Expr::zero());
        }
        let (c, m, d) = decompose(&den);
        let num = num.scale(&c.recip()).div_monomial(&m);
        let (num, den) = cancel(num, &d);
        Ok(Expr::raw(num, den))
    }

    pub fn num(&self) -> &Poly {
        &self.0.num
    }

    pub fn den(&self) -> &[(FactorId, u32)] {
        &self.0.den
    }

    /// Expanded denominator polynomial.
    pub fn den_poly(&self) -> Poly {
        let mut p = Poly::one();
        for &(id, k) in self.den() {
            p = p.mul(&factor_pow(id, k));
        }
        p
    }

    pub fn is_zero(&self) -> bool {
        self.0.num.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.0.den.is_empty() && self.0.num.is_one()
    }

    pub fn is_polynomial(&self) -> bool {
        self.0.den.is_empty()
    }

    pub fn as_constant(&self) -> Option<Q> {
        if self.0.den.is_empty() {
            self.0.num.as_constant()
        } else {
            None
        }
    }

    pub fn as_atom(&self) -> Option<AtomId> {
        if !self.0.den.is_empty() || self.0.num.len() != 1 {
            return None;
        }
        let (m, c) = &self.0.num.terms()[0];
        if c.is_one() && m.vars().len() == 1 && m.vars()[0].1 == 1 {
            Some(m.vars()[0].0)
        } else {
            None
        }
    }

    /// Number of numerator terms plus expanded-free denominator factor count.
    pub fn size(&self) -> usize {
        self.0.num.len() + self.0.den.len()
    }

    /// Every atom occurring in numerator or denominator, sorted by id.
    pub fn atoms(&self) -> Vec<AtomId> {
        let mut v = self.0.num.atoms();
        for &(id, _) in self.den() {
            v.extend(factor_poly(id).atoms());
        }
        v.sort_unstable();
        v.dedup();
        v
    }

    /// Atoms together with every atom nested inside composite atoms.
    pub fn atoms_deep(&self) -> Vec<AtomId> {
        let mut out = Vec::new();
        for a in self.atoms() {
            out.push(a);
            out.extend(atom::info(a).base_deps.iter().copied());
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    pub fn contains_atom(&self, a: AtomId) -> bool {
        self.0.num.contains_atom(a) || self.den().iter().any(|&(id, _)| factor_poly(id).contains_atom(a))
    }

    fn add_impl(&self, o: &Expr) -> Expr {
        if o.is_zero() {
            return self.clone();
        }
        if self.is_zero() {
            return o.clone();
        }
        if self.den() == o.den() {
            let num = self.num().add(o.num());
            if self.den().is_empty() {
                return Expr::raw(num, Den::new());
            }
            let (num, den) = cancel(num, self.den());
            return Expr::raw(num, den);
        }
        let a = resolve(self.den());
        let b = resolve(o.den());
        let l = merge_max(&a, &b);
        let na = if a.as_slice() == l.as_slice() { self.num().clone() } else { self.num().mul(&cofactor(&l, &a)) };
        let nb = if b.as_slice() == l.as_slice() { o.num().clone() } else { o.num().mul(&cofactor(&l, &b)) };
        let (num, den) = cancel(na.add(&nb), &l);
        Expr::raw(num, den)
    }

    fn sub_impl(&self, o: &Expr) -> Expr {
        self.add_impl(&o.neg_impl())
    }

    fn neg_impl(&self) -> Expr {
        Expr::raw(self.num().neg(), self.0.den.clone())
    }

    pub fn scale(&self, c: &Q) -> Expr {
        if c.is_zero() {
            return Expr::zero();
        }
        Expr::raw(self.num().scale(c), self.0.den.clone())
    }

    fn mul_impl(&self, o: &Expr) -> Expr {
        if self.is_zero() || o.is_zero() {
            return Expr::zero();
        }
        if let Some(c) = self.as_constant() {
            return o.scale(&c);
        }
        if let Some(c) = o.as_constant() {
            return self.scale(&c);
        }
        let (na, da) = cancel(self.num().clone(), &resolve(o.den()));
        let (nb, db) = cancel(o.num().clone(), &resolve(self.den()));
        let prod = na.mul(&nb);
        let had_alg = prod.has_algebraic();
        let num = reduce_algebraic(prod);
        let den = merge_sum(&da, &db);
        if had_alg && !den.is_empty() {
            let (num, den) = cancel(num, &den);
            return Expr::raw(num, den);
        }
        Expr::raw(num, den)
    }

    pub fn recip(&self) -> Result<Expr, KernelError> {
        if self.is_zero() {
            return Err(KernelError::DivisionByZero);
        }
        Expr::from_fraction(self.den_poly(), self.num().clone())
    }

    pub fn try_div(&self, o: &Expr) -> Result<Expr, KernelError> {
        if o.is_zero() {
            return Err(KernelError::DivisionByZero);
        }
        if self.is_zero() {
            return Ok(Expr::zero());
        }
        if let Some(c) = o.as_constant() {
            return Ok(self.scale(&c.recip()));
        }
        if o.num().len() == 1 && !o.num().has_algebraic() {
            // Monomial divisor: invert directly.
            let (m, c) = &o.num().terms()[0];
            let inv = Expr::raw(Poly::monomial(m.inverse(), c.recip()), Den::new());
            let top = self.mul_impl(&inv);
            let den_part = Expr::raw(o.den_poly(), Den::new());
            return Ok(top.mul(&den_part));
        }
        Ok(self.mul_impl(&o.recip()?))
    }

    /// Integer power; negative exponents invert.
    pub fn powi(&self, n: i32) -> Expr {
        if n < 0 {
            return self.recip().expect("power of zero with negative exponent").powi(-n);
        }
        if n == 0 {
            return Expr::one();
        }
        if self.0.num.len() == 1 && !self.0.num.has_algebraic() {
            let (m, c) = &self.0.num.terms()[0];
            let mut mm = Monomial::one();
            for _ in 0..n {
                mm = mm.mul(m);
            }
            let num = Poly::monomial(mm, c.pow(n));
            let den: Den = self.den().iter().map(|&(id, k)| (id, k * n as u32)).collect();
            return Expr::raw(num, den);
        }
        let mut acc = Expr::one();
        let mut base = self.clone();
        let mut k = n;
        while k > 0 {
            if k & 1 == 1 {
                acc = acc.mul_impl(&base);
            }
            k >>= 1;
            if k > 0 {
                base = &base * &base;
            }
        }
        acc
    }

    /// Semantic equality: the difference normalizes to zero.
    pub fn same(&self, o: &Expr) -> bool {
        self == o || self.sub_impl(o).is_zero()
    }

    /// Re-runs cancellation against the current factor basis. Returns an
    /// equal expression; idempotent.
    pub fn normalize(&self) -> Expr {
        if self.den().is_empty() {
            return self.clone();
        }
        let (num, den) = cancel(self.num().clone(), self.den());
        Expr::raw(num, den)
    }

    /// Splits the numerator by monomials in the atoms chosen by `pick`; the
    /// denominator must not involve them.
    pub fn collect(&self, pick: impl Fn(AtomId) -> bool) -> Option<Vec<(Monomial, Expr)>> {
        for &(id, _) in self.den() {
            if factor_poly(id).atoms().into_iter().any(&pick) {
                return None;
            }
        }
        let parts = self.num().collect(&pick);
        Some(
            parts
                .into_iter()
                .map(|(m, c)| {
                    let (n, d) = cancel(c, self.den());
                    (m, Expr::raw(n, d))
                })
                .collect(),
        )
    }

    /// Multiplies by a monomial.
    pub fn mul_monomial(&self, m: &Monomial) -> Expr {
        Expr::from_poly(Poly::monomial(m.clone(), Q::ONE)).mul_impl(self)
    }

    /// Renders with the denominator made monic under the structural order.
    pub fn render(&self) -> String {
        if self.is_zero() {
            return "0".into();
        }
        if self.den().is_empty() {
            return render_poly(self.num());
        }
        let den = self.den_poly();
        let lc = den.structural_leading().unwrap().1.clone();
        let inv = lc.recip();
        let n = render_poly(&self.num().scale(&inv));
        let d = render_poly(&den.scale(&inv));
        let n = if self.num().len() > 1 { format!("({n})") } else { n };
        let d = if den.len() > 1 || d.contains('*') || d.contains('/') { format!("({d})") } else { d };
        format!("{n}/{d}")
    }

    pub fn structural_cmp(&self, o: &Expr) -> Ordering {
        if self == o {
            return Ordering::Equal;
        }
        let cmp_poly = |a: &Poly, b: &Poly| -> Ordering {
            let ta = a.structural_terms();
            let tb = b.structural_terms();
            for (x, y) in ta.iter().zip(tb.iter()) {
                let c = x.0.structural_cmp(&y.0).then_with(|| x.1.cmp(&y.1));
                if c != Ordering::Equal {
                    return c;
                }
            }
            ta.len().cmp(&tb.len())
        };
        cmp_poly(self.num(), o.num()).then_with(|| cmp_poly(&self.den_poly(), &o.den_poly()))
    }
}

fn needs_parens(s: &str) -> bool {
    let mut depth = 0i32;
    for (i, ch) in s.char_indices() {
        match ch {
            '(' | '[' => depth += 1,
            ')' | ']' => depth -= 1,
            '+' | '-' | '*' | '/' if depth == 0 && i > 0 => return true,
            '-' if depth == 0 => return true,
            _ => {}
        }
    }
    false
}

fn render_power(base: String, e: i32) -> String {
    if e == 1 {
        base
    } else {
        format!("{base}^{e}")
    }
}

fn render_monomial_part(vars: &[(AtomId, i32)]) -> String {
    let parts: Vec<String> = vars.iter().map(|&(a, e)| render_atom_power(a, e)).collect();
    parts.join("*")
}

fn render_atom_power(a: AtomId, e: i32) -> String {
    if atom::is_unit(a) {
        if let AtomKind::Exp(b) = atom::kind(a) {
            let r = Q::new(e as i64, EXP_DEN as i64);
            let inner = b.render();
            return if r.is_one() {
                format!("exp({inner})")
            } else if needs_parens(&inner) {
                format!("exp({r}*({inner}))")
            } else if r == Q::int(-1) {
                format!("exp(-{inner})")
            } else {
                format!("exp({r}*{inner})")
            };
        }
    }
    render_power(atom::render_atom(a), e)
}

fn render_poly(p: &Poly) -> String {
    if p.is_zero() {
        return "0".into();
    }
    let mut out = String::new();
    for (i, (m, c)) in p.structural_terms().iter().enumerate() {
        let mut sorted: Vec<(AtomId, i32)> = m.vars().to_vec();
        sorted.sort_by(|x, y| atom::structural_cmp(x.0, y.0));
        // Exponentials are units: keep them in the numerator with their sign.
        let pos: Vec<(AtomId, i32)> = sorted.iter().copied().filter(|&(a, e)| e > 0 || atom::is_unit(a)).collect();
        let neg: Vec<(AtomId, i32)> =
            sorted.iter().copied().filter(|&(a, e)| e < 0 && !atom::is_unit(a)).map(|(a, e)| (a, -e)).collect();
        let neg_c = c.is_negative();
        let ca = c.abs();
        let (cn, cd) = (ca.numer_big(), ca.denom_big());
        let mut body = String::new();
        let one = num_bigint::BigInt::from(1);
        if pos.is_empty() || cn != one {
            body.push_str(&cn.to_string());
        }
        if !pos.is_empty() {
            if !body.is_empty() {
                body.push('*');
            }
            body.push_str(&render_monomial_part(&pos));
        }
        let mut den = String::new();
        if cd != one {
            den.push_str(&cd.to_string());
        }
        if !neg.is_empty() {
            if !den.is_empty() {
                den.push('*');
            }
            den.push_str(&render_monomial_part(&neg));
        }
        if !den.is_empty() {
            body.push('/');
            if den.contains('*') {
                body.push_str(&format!("({den})"));
            } else {
                body.push_str(&den);
            }
        }
        if i == 0 {
            if neg_c {
                out.push('-');
            }
        } else {
            out.push_str(if neg_c { " - " } else { " + " });
        }
        out.push_str(&body);
    }
    out
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expr({})", self.render())
    }
}

impl From<i64> for Expr {
    fn from(n: i64) -> Expr {
        Expr::int(n)
    }
}

impl From<Q> for Expr {
    fn from(q: Q) -> Expr {
        Expr::rational(q)
    }
}

macro_rules! expr_ops {
    ($tr:ident, $m:ident, $body:expr) => {
        impl<'a> $tr<&'a Expr> for &'a Expr {
            type Output = Expr;
            fn $m(self, rhs: &Expr) -> Expr {
                let f: fn(&Expr, &Expr) -> Expr = $body;
                f(self, rhs)
            }
        }
        impl $tr<Expr> for Expr {
            type Output = Expr;
            fn $m(self, rhs: Expr) -> Expr {
                let f: fn(&Expr, &Expr) -> Expr = $body;
                f(&self, &rhs)
            }
        }
        impl<'a> $tr<&'a Expr> for Expr {
            type Output = Expr;
            fn $m(self, rhs: &Expr) -> Expr {
                let f: fn(&Expr, &Expr) -> Expr = $body;
                f(&self, rhs)
            }
        }
        impl<'a> $tr<Expr> for &'a Expr {
            type Output = Expr;
            fn $m(self, rhs: Expr) -> Expr {
                let f: fn(&Expr, &Expr) -> Expr = $body;
                f(self, &rhs)
            }
        }
    };
}

expr_ops!(Add, add, |a, b| a.add_impl(b));
expr_ops!(Sub, sub, |a, b| a.sub_impl(b));
expr_ops!(Mul, mul, |a, b| a.mul_impl(b));
expr_ops!(Div, div, |a, b| a.try_div(b).expect("division by zero expression"));

impl Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        self.neg_impl()
    }
}

impl Neg for &Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        self.neg_impl()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(n: &str) -> Expr {
        Expr::atom(atom::var(n))
    }

    #[test]
    fn binomial_identity_is_zero() {
        let ux = Expr::atom(atom::jet("u", &[1, 0, 0]));
        let uy = Expr::atom(atom::jet("u", &[0, 1, 0]));
        let s = (&ux + &uy).powi(2);
        let e = s - ux.powi(2) - Expr::int(2) * &ux * &uy - uy.powi(2);
        assert!(e.is_zero());
    }

    #[test]
    fn fractions_cancel() {
        let (x, y) = (v("ex"), v("ey"));
        let a = (&x + &y) / (&x - &y);
        let b = (&x - &y) / (&x + &y);
        assert!((&a * &b).is_one());
        let c = &a - &(Expr::int(2) * &y / (&x - &y));
        assert!(c.is_one(), "got {c}");
    }

    #[test]
    fn shared_factors_split_registry() {
        let (x, y, z) = (v("sx"), v("sy"), v("sz"));
        let f = (&x + &y) * (&y + &z);
        let a = Expr::one() / f;
        let b = Expr::one() / (&x + &y);
        let c = &a / &b;
        assert!((&c * &(&y + &z)).is_one(), "got {c}");
    }

    #[test]
    fn squares_in_denominator() {
        let (x, y) = (v("qx"), v("qy"));
        let s = (&x + &y).powi(2);
        let a = Expr::one() / &s;
        let b = (&x + &y) * a;
        assert!((b * (&x + &y)).is_one());
        let d = Expr::one() / (x.powi(2) + Expr::int(2) * &x * &y + y.powi(2));
        assert!((d * (&x + &y).powi(2)).is_one());
    }

    #[test]
    fn monomial_denominators_are_laurent() {
        let x = v("lx");
        let e = Expr::one() / &x;
        assert!(e.is_polynomial());
        assert!((e * x).is_one());
    }

    #[test]
    fn zero_division_is_error() {
        let x = v("zx");
        assert_eq!((&x - &x).recip(), Err(KernelError::DivisionByZero));
    }
}
