//! Sparse multivariate polynomials over `Q` with atoms as indeterminates.
//!
//! Terms are kept sorted in descending graded-lexicographic order (lower atom
//! id means higher precedence). Exponents may be negative (Laurent
//! polynomials), except on algebraic atoms which stay in {0, 1} after
//! reduction.

use std::cmp::Ordering;
use std::hash::{Hash, Hasher};

use rustc_hash::{FxHashMap, FxHashSet};
use smallvec::SmallVec;

use crate::atom::{self, AtomId};
use crate::rational::{q_gcd, Q};

#[derive(Clone, PartialEq, Eq, Hash, Debug, Default)]
pub struct Monomial {
    deg: i32,
    vars: SmallVec<[(AtomId, i32); 4]>,
}

impl Monomial {
    pub fn one() -> Monomial {
        Monomial::default()
    }

    pub fn atom(a: AtomId, e: i32) -> Monomial {
        if e == 0 {
            return Monomial::one();
        }
        let mut vars = SmallVec::new();
        vars.push((a, e));
        Monomial { deg: e, vars }
    }

    pub fn from_pairs(mut pairs: Vec<(AtomId, i32)>) -> Monomial {
        pairs.sort_unstable_by_key(|p| p.0);
        let mut vars: SmallVec<[(AtomId, i32); 4]> = SmallVec::new();
        for (a, e) in pairs {
            if let Some(last) = vars.last_mut() {
                if last.0 == a {
                    last.1 += e;
                    continue;
                }
            }
            vars.push((a, e));
        }
        vars.retain(|p| p.1 != 0);
        let deg = vars.iter().map(|p| p.1).sum();
        Monomial { deg, vars }
    }

    pub fn is_one(&self) -> bool {
        self.vars.is_empty()
    }

    pub fn vars(&self) -> &[(AtomId, i32)] {
        &self.vars
    }

    pub fn degree(&self) -> i32 {
        self.deg
    }

    pub fn exponent(&self, a: AtomId) -> i32 {
        match self.vars.binary_search_by_key(&a, |p| p.0) {
            Ok(i) => self.vars[i].1,
            Err(_) => 0,
        }
    }

    pub fn mul(&self, o: &Monomial) -> Monomial {
        if o.is_one() {
            return self.clone();
        }
        if self.is_one() {
            return o.clone();
        }
        let mut vars: SmallVec<[(AtomId, i32); 4]> = SmallVec::with_capacity(self.vars.len() + o.vars.len());
        let (mut i, mut j) = (0, 0);
        let (a, b) = (&self.vars, &o.vars);
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                Ordering::Less => {
                    vars.push(a[i]);
                    i += 1;
                }
                Ordering::Greater => {
                    vars.push(b[j]);
                    j += 1;
                }
                Ordering::Equal => {
                    let e = a[i].1 + b[j].1;
                    if e != 0 {
                        vars.push((a[i].0, e));
                    }
                    i += 1;
                    j += 1;
                }
            }
        }
        vars.extend_from_slice(&a[i..]);
        vars.extend_from_slice(&b[j..]);
        Monomial { deg: self.deg + o.deg, vars }
    }

    pub fn inverse(&self) -> Monomial {
        Monomial { deg: -self.deg, vars: self.vars.iter().map(|&(a, e)| (a, -e)).collect() }
    }

    /// Quotient if it has no negative exponent.
    pub fn div_strict(&self, o: &Monomial) -> Option<Monomial> {
        let q = self.mul(&o.inverse());
        if q.vars.iter().any(|&(_, e)| e < 0) {
            None
        } else {
            Some(q)
        }
    }

    pub fn without(&self, a: AtomId) -> Monomial {
        let vars: SmallVec<[(AtomId, i32); 4]> = self.vars.iter().copied().filter(|p| p.0 != a).collect();
        let deg = vars.iter().map(|p| p.1).sum();
        Monomial { deg, vars }
    }

    /// Splits into the part over atoms in `set` and the rest.
    pub fn split(&self, keep: impl Fn(AtomId) -> bool) -> (Monomial, Monomial) {
        let mut a = SmallVec::new();
        let mut b = SmallVec::new();
        for &p in &self.vars {
            if keep(p.0) {
                a.push(p);
            } else {
                b.push(p);
            }
        }
        let da = a.iter().map(|p: &(AtomId, i32)| p.1).sum();
        let db = b.iter().map(|p: &(AtomId, i32)| p.1).sum();
        (Monomial { deg: da, vars: a }, Monomial { deg: db, vars: b })
    }

    /// Term order: graded, then lexicographic with lower ids dominating.
    pub fn term_cmp(&self, o: &Monomial) -> Ordering {
        match self.deg.cmp(&o.deg) {
            Ordering::Equal => {}
            c => return c,
        }
        let (a, b) = (&self.vars, &o.vars);
        let (mut i, mut j) = (0, 0);
        loop {
            match (a.get(i), b.get(j)) {
                (None, None) => return Ordering::Equal,
                (Some(&(_, e)), None) => return e.cmp(&0),
                (None, Some(&(_, e))) => return 0.cmp(&e),
                (Some(&(x, ex)), Some(&(y, ey))) => {
                    if x == y {
                        if ex != ey {
                            return ex.cmp(&ey);
                        }
                        i += 1;
                        j += 1;
                    } else if x < y {
                        return ex.cmp(&0);
                    } else {
                        return 0.cmp(&ey);
                    }
                }
            }
        }
    }

    /// Order independent of interning: graded, then lexicographic with the
    /// structurally smaller atom dominating.
    pub fn structural_cmp(&self, o: &Monomial) -> Ordering {
        match self.deg.cmp(&o.deg) {
            Ordering::Equal => {}
            c => return c,
        }
        let mut a: Vec<(AtomId, i32)> = self.vars.to_vec();
        let mut b: Vec<(AtomId, i32)> = o.vars.to_vec();
        a.sort_by(|x, y| atom::structural_cmp(x.0, y.0));
        b.sort_by(|x, y| atom::structural_cmp(x.0, y.0));
        let (mut i, mut j) = (0, 0);
        loop {
            match (a.get(i), b.get(j)) {
                (None, None) => return Ordering::Equal,
                (Some(&(_, e)), None) => return e.cmp(&0),
                (None, Some(&(_, e))) => return 0.cmp(&e),
                (Some(&(x, ex)), Some(&(y, ey))) => match atom::structural_cmp(x, y) {
                    Ordering::Equal => {
                        if ex != ey {
                            return ex.cmp(&ey);
                        }
                        i += 1;
                        j += 1;
                    }
                    Ordering::Less => return ex.cmp(&0),
                    Ordering::Greater => return 0.cmp(&ey),
                },
            }
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct Poly {
    terms: Vec<(Monomial, Q)>,
}

impl PartialEq for Poly {
    fn eq(&self, o: &Poly) -> bool {
        self.terms == o.terms
    }
}
impl Eq for Poly {}

impl Hash for Poly {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.terms.len().hash(state);
        for (m, c) in &self.terms {
            m.hash(state);
            c.hash(state);
        }
    }
}

fn sort_terms(v: &mut [(Monomial, Q)]) {
    v.sort_unstable_by(|a, b| b.0.term_cmp(&a.0));
}

impl Poly {
    pub fn zero() -> Poly {
        Poly { terms: Vec::new() }
    }

    pub fn constant(c: Q) -> Poly {
        if c.is_zero() {
            Poly::zero()
        } else {
            Poly { terms: vec![(Monomial::one(), c)] }
        }
    }

    pub fn one() -> Poly {
        Poly::constant(Q::ONE)
    }

    pub fn atom(a: AtomId) -> Poly {
        Poly { terms: vec![(Monomial::atom(a, 1), Q::ONE)] }
    }

    pub fn monomial(m: Monomial, c: Q) -> Poly {
        if c.is_zero() {
            Poly::zero()
        } else {
            Poly { terms: vec![(m, c)] }
        }
    }

    /// Builds from arbitrary terms, merging duplicates.
    pub fn from_terms(terms: Vec<(Monomial, Q)>) -> Poly {
        let mut map: FxHashMap<Monomial, Q> = FxHashMap::default();
        for (m, c) in terms {
            if c.is_zero() {
                continue;
            }
            match map.get_mut(&m) {
                Some(e) => *e = &*e + &c,
                None => {
                    map.insert(m, c);
                }
            }
        }
        let mut v: Vec<(Monomial, Q)> = map.into_iter().filter(|(_, c)| !c.is_zero()).collect();
        sort_terms(&mut v);
        Poly { terms: v }
    }

    /// Builds from terms already sorted and duplicate-free.
    pub fn from_sorted(terms: Vec<(Monomial, Q)>) -> Poly {
        debug_assert!(terms.windows(2).all(|w| w[0].0.term_cmp(&w[1].0) == Ordering::Greater));
        Poly { terms }
    }

    pub fn terms(&self) -> &[(Monomial, Q)] {
        &self.terms
    }

    pub fn into_terms(self) -> Vec<(Monomial, Q)> {
        self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn as_constant(&self) -> Option<Q> {
        match self.terms.len() {
            0 => Some(Q::ZERO),
            1 if self.terms[0].0.is_one() => Some(self.terms[0].1.clone()),
            _ => None,
        }
    }

    pub fn is_one(&self) -> bool {
        self.terms.len() == 1 && self.terms[0].0.is_one() && self.terms[0].1.is_one()
    }

    pub fn leading(&self) -> Option<&(Monomial, Q)> {
        self.terms.first()
    }

    pub fn atoms(&self) -> Vec<AtomId> {
        let mut s: FxHashSet<AtomId> = FxHashSet::default();
        for (m, _) in &self.terms {
            for &(a, _) in m.vars() {
                s.insert(a);
            }
        }
        let mut v: Vec<AtomId> = s.into_iter().collect();
        v.sort_unstable();
        v
    }

    pub fn contains_atom(&self, a: AtomId) -> bool {
        self.terms.iter().any(|(m, _)| m.exponent(a) != 0)
    }

    pub fn has_algebraic(&self) -> bool {
        self.terms.iter().any(|(m, _)| m.vars().iter().any(|&(a, _)| atom::is_algebraic(a)))
    }

    pub fn has_units(&self) -> bool {
        self.terms.iter().any(|(m, _)| m.vars().iter().any(|&(a, _)| atom::is_unit(a)))
    }

    pub fn degree_in(&self, a: AtomId) -> i32 {
        self.terms.iter().map(|(m, _)| m.exponent(a)).max().unwrap_or(0)
    }

    pub fn neg(&self) -> Poly {
        Poly { terms: self.terms.iter().map(|(m, c)| (m.clone(), -c.clone())).collect() }
    }

    pub fn scale(&self, c: &Q) -> Poly {
        if c.is_zero() {
            return Poly::zero();
        }
        if c.is_one() {
            return self.clone();
        }
        Poly { terms: self.terms.iter().map(|(m, k)| (m.clone(), k * c)).collect() }
    }

    pub fn mul_monomial(&self, m: &Monomial) -> Poly {
        if m.is_one() {
            return self.clone();
        }
        Poly { terms: self.terms.iter().map(|(t, c)| (t.mul(m), c.clone())).collect() }
    }

    pub fn add(&self, o: &Poly) -> Poly {
        if o.is_zero() {
            return self.clone();
        }
        if self.is_zero() {
            return o.clone();
        }
        let (a, b) = (&self.terms, &o.terms);
        let mut out = Vec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            match a[i].0.term_cmp(&b[j].0) {
                Ordering::Greater => {
                    out.push(a[i].clone());
                    i += 1;
                }
                Ordering::Less => {
                    out.push(b[j].clone());
                    j += 1;
                }
                Ordering::Equal => {
                    let c = &a[i].1 + &b[j].1;
                    if !c.is_zero() {
                        out.push((a[i].0.clone(), c));
                    }
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&a[i..]);
        out.extend_from_slice(&b[j..]);
        Poly { terms: out }
    }

    pub fn sub(&self, o: &Poly) -> Poly {
        self.add(&o.neg())
    }

    pub fn mul(&self, o: &Poly) -> Poly {
        if self.is_zero() || o.is_zero() {
            return Poly::zero();
        }
        if self.terms.len() == 1 {
            let (m, c) = &self.terms[0];
            return o.mul_monomial(m).scale(c);
        }
        if o.terms.len() == 1 {
            let (m, c) = &o.terms[0];
            return self.mul_monomial(m).scale(c);
        }
        let mut map: FxHashMap<Monomial, Q> =
            FxHashMap::with_capacity_and_hasher(self.terms.len() + o.terms.len(), Default::default());
        for (ma, ca) in &self.terms {
            for (mb, cb) in &o.terms {
                let m = ma.mul(mb);
                let c = ca * cb;
                match map.get_mut(&m) {
                    Some(e) => *e = &*e + &c,
                    None => {
                        map.insert(m, c);
                    }
                }
            }
        }
        let mut v: Vec<(Monomial, Q)> = map.into_iter().filter(|(_, c)| !c.is_zero()).collect();
        crate::budget::check_size(v.len());
        sort_terms(&mut v);
        Poly { terms: v }
    }

    pub fn pow(&self, n: u32) -> Poly {
        let mut acc = Poly::one();
        let mut base = self.clone();
        let mut n = n;
        while n > 0 {
            if n & 1 == 1 {
                acc = acc.mul(&base);
            }
            n >>= 1;
            if n > 0 {
                base = base.mul(&base);
            }
        }
        acc
    }

    /// Positive gcd of all coefficients (zero for the zero polynomial).
    pub fn content(&self) -> Q {
        let mut g = Q::ZERO;
        for (_, c) in &self.terms {
            g = q_gcd(&g, c);
            if g.is_one() {
                break;
            }
        }
        g
    }

    /// Per-atom minimum exponent across all terms.
    pub fn monomial_content(&self) -> Monomial {
        let mut it = self.terms.iter();
        let first = match it.next() {
            Some(t) => t,
            None => return Monomial::one(),
        };
        let mut mins: FxHashMap<AtomId, i32> = first.0.vars().iter().copied().collect();
        let mut count = 1usize;
        let mut seen: FxHashMap<AtomId, usize> = mins.keys().map(|&a| (a, 1)).collect();
        for (m, _) in it {
            count += 1;
            for &(a, e) in m.vars() {
                let entry = mins.entry(a).or_insert(e);
                if e < *entry {
                    *entry = e;
                }
                *seen.entry(a).or_insert(0) += 1;
            }
        }
        // Atoms missing from some term have minimum exponent zero there.
        let pairs: Vec<(AtomId, i32)> = mins
            .into_iter()
            .map(|(a, e)| if seen[&a] < count { (a, e.min(0)) } else { (a, e) })
            .filter(|p| p.1 != 0)
            .collect();
        Monomial::from_pairs(pairs)
    }

    /// Divides every term by a monomial (exponents may go negative).
    pub fn div_monomial(&self, m: &Monomial) -> Poly {
        self.mul_monomial(&m.inverse())
    }

    /// Exact quotient `self / f`, or `None` if `f` does not divide `self`.
    ///
    /// Both sides are shifted to non-negative exponents first, so this is
    /// divisibility in the Laurent ring when `f` has trivial monomial content.
    pub fn div_exact(&self, f: &Poly) -> Option<Poly> {
        if f.is_zero() {
            return None;
        }
        if self.is_zero() {
            return Some(Poly::zero());
        }
        if let Some(c) = f.as_constant() {
            return Some(self.scale(&c.recip()));
        }
        let shift_n = neg_shift(self);
        let shift_f = neg_shift(f);
        let num = self.mul_monomial(&shift_n);
        let den = f.mul_monomial(&shift_f);
        let (lm, lc) = den.terms[0].clone();
        // Cheap rejection: every atom of the divisor's leading monomial must
        // appear in the dividend's leading monomial with enough degree.
        num.terms[0].0.div_strict(&lm)?;
        let lc_inv = lc.recip();
        let mut rem: std::collections::BTreeMap<OrdMono, Q> =
            num.terms.into_iter().map(|(m, c)| (OrdMono(m), c)).collect();
        let mut quot: Vec<(Monomial, Q)> = Vec::new();
        let tail: Vec<(Monomial, Q)> = den.terms[1..].to_vec();
        let mut steps = 0usize;
        while let Some((m, c)) = rem.pop_last() {
            let qm = m.0.div_strict(&lm)?;
            let qc = &c * &lc_inv;
            for (tm, tc) in &tail {
                let key = OrdMono(tm.mul(&qm));
                let delta = -(tc * &qc);
                match rem.get_mut(&key) {
                    Some(v) => {
                        let nv = &*v + &delta;
                        if nv.is_zero() {
                            rem.remove(&key);
                        } else {
                            *v = nv;
                        }
                    }
                    None => {
                        rem.insert(key, delta);
                    }
                }
            }
            quot.push((qm, qc));
            steps += 1;
            if steps.is_multiple_of(4096) {
                crate::budget::check_size(rem.len());
            }
        }
        let q = Poly { terms: quot };
        // Undo the unit shifts: self*sn = q*f*sf  =>  self/f = q*sf/sn.
        Some(q.mul_monomial(&shift_f.mul(&shift_n.inverse())))
    }

    /// Formal partial derivative with respect to an atom, treating it as an
    /// ordinary (Laurent) variable.
    pub fn partial_formal(&self, a: AtomId) -> Poly {
        let mut out = Vec::new();
        for (m, c) in &self.terms {
            let e = m.exponent(a);
            if e != 0 {
                out.push((m.mul(&Monomial::atom(a, -1)), c * &Q::int(e as i64)));
            }
        }
        Poly::from_terms(out)
    }

    /// Negates the terms whose exponent of `a` is odd (the conjugate
    /// under `a -> -a`).
    pub fn conjugate(&self, a: AtomId) -> Poly {
        Poly {
            terms: self
                .terms
                .iter()
                .map(|(m, c)| if m.exponent(a) % 2 != 0 { (m.clone(), -c.clone()) } else { (m.clone(), c.clone()) })
                .collect(),
        }
    }

    /// Evaluates modulo `p`, with atom values from `val`.
    pub fn eval_mod(&self, p: u64, val: &mut impl FnMut(AtomId) -> u64) -> Option<u64> {
        use crate::modp;
        let mut acc = 0u64;
        for (m, c) in &self.terms {
            let mut t = c.mod_p(p)?;
            for &(a, e) in m.vars() {
                let v = val(a);
                if e >= 0 {
                    t = modp::mul(t, modp::pow(v, e as u64, p), p);
                } else {
                    if v == 0 {
                        return None;
                    }
                    t = modp::mul(t, modp::pow(modp::inv(v, p), (-e) as u64, p), p);
                }
            }
            acc = modp::add(acc, t, p);
        }
        Some(acc)
    }

    /// Coefficients with respect to the atoms selected by `pick`.
    pub fn collect(&self, pick: impl Fn(AtomId) -> bool) -> Vec<(Monomial, Poly)> {
        let mut groups: FxHashMap<Monomial, Vec<(Monomial, Q)>> = FxHashMap::default();
        let mut order: Vec<Monomial> = Vec::new();
        for (m, c) in &self.terms {
            let (key, rest) = m.split(&pick);
            let g = groups.entry(key.clone()).or_insert_with(|| {
                order.push(key);
                Vec::new()
            });
            g.push((rest, c.clone()));
        }
        order.sort_by(|a, b| b.term_cmp(a));
        order
            .into_iter()
            .map(|k| {
                let v = groups.remove(&k).unwrap();
                (k, Poly::from_terms(v))
            })
            .collect()
    }

    /// Leading coefficient sign under the structural (interning-independent) order.
    pub fn structural_leading(&self) -> Option<&(Monomial, Q)> {
        self.terms.iter().max_by(|a, b| a.0.structural_cmp(&b.0))
    }

    /// Terms sorted by the structural order, descending.
    pub fn structural_terms(&self) -> Vec<(Monomial, Q)> {
        let mut v = self.terms.clone();
        v.sort_by(|a, b| b.0.structural_cmp(&a.0));
        v
    }
}

/// Monomial wrapper ordered by the term order, for BTreeMap-based division.
#[derive(Clone, PartialEq, Eq)]
struct OrdMono(Monomial);

impl PartialOrd for OrdMono {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for OrdMono {
    fn cmp(&self, o: &Self) -> Ordering {
        self.0.term_cmp(&o.0)
    }
}

/// Monomial that lifts all exponents of `p` to be non-negative.
pub fn neg_shift(p: &Poly) -> Monomial {
    let mut mins: FxHashMap<AtomId, i32> = FxHashMap::default();
    for (m, _) in p.terms() {
        for &(a, e) in m.vars() {
            if e < 0 {
                let v = mins.entry(a).or_insert(0);
                if e < *v {
                    *v = e;
                }
            }
        }
    }
    Monomial::from_pairs(mins.into_iter().map(|(a, e)| (a, -e)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::atom;

    fn p(a: AtomId) -> Poly {
        Poly::atom(a)
    }

    #[test]
    fn binomial_square_cancels() {
        let x = p(atom::jet("u", &[1, 0, 0]));
        let y = p(atom::jet("u", &[0, 1, 0]));
        let s = x.add(&y);
        let sq = s.mul(&s);
        let two = Q::int(2);
        let expect = x.mul(&x).add(&x.mul(&y).scale(&two)).add(&y.mul(&y));
        assert!(sq.sub(&expect).is_zero());
    }

    #[test]
    fn exact_division_and_rejection() {
        let x = p(atom::var("x"));
        let y = p(atom::var("y"));
        let a = x.add(&y);
        let b = x.sub(&y);
        let prod = a.mul(&b);
        assert_eq!(prod.div_exact(&a).unwrap(), b);
        assert!(prod.add(&Poly::one()).div_exact(&a).is_none());
    }

    #[test]
    fn division_with_unit_atoms() {
        let z = atom::intern(atom::AtomKind::Exp(crate::expr::Expr::atom(atom::var("x"))));
        let zp = Poly::monomial(Monomial::atom(z, atom::EXP_DEN), Q::ONE);
        let f = zp.sub(&Poly::one()); // e^x - 1
        let zinv = Poly::monomial(Monomial::atom(z, -atom::EXP_DEN), Q::ONE);
        let g = Poly::one().sub(&zinv); // 1 - e^-x = e^-x (e^x - 1)
        let q = g.div_exact(&f).unwrap();
        assert_eq!(q, zinv);
    }

    #[test]
    fn monomial_content_handles_missing_atoms() {
        let x = p(atom::var("x"));
        let y = p(atom::var("y"));
        let e = x.mul(&x).mul(&y).add(&x.mul(&y).mul(&y));
        let mc = e.monomial_content();
        assert_eq!(mc, Monomial::from_pairs(vec![(atom::var("x"), 1), (atom::var("y"), 1)]));
        let f = x.add(&y);
        assert!(f.monomial_content().is_one());
    }

    #[test]
    fn collect_reassembles() {
        let x = atom::var("x");
        let a = atom::constant("a");
        let e = p(x).mul(&p(x)).mul(&p(a)).add(&p(x)).add(&p(a));
        let parts = e.collect(|v| v == x);
        let mut back = Poly::zero();
        for (m, c) in parts {
            back = back.add(&c.mul_monomial(&m));
        }
        assert_eq!(back, e);
    }
}
