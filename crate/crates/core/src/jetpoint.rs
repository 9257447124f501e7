//! Exact evaluation at a random point of the equation manifold.
//!
//! Parametric jets get random rational values; every other jet follows from
//! the equation by expanding the right-hand sides as truncated Taylor series,
//! so the resulting point is the jet of a formal solution. A tensor that is
//! nonzero there is nonzero modulo the equation, which makes a nonzero value
//! a proof of failure. A zero value proves nothing.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustc_hash::{FxHashMap, FxHashSet};

use crate::atom::{self, AtomId, AtomKind, MultiIndex};
use crate::equation::EquationSpec;
use crate::evaluate::{self, EvalError, Lift};
use crate::expr::Expr;
use crate::fieldgeom::{self, Field, FieldError};
use crate::geometry::Matrix;
use crate::rational::Q;

/// Monomials of degree at most `order` in `n` variables, graded.
#[derive(Debug)]
pub struct Layout {
    n: usize,
    order: usize,
    idx: Vec<MultiIndex>,
    pos: FxHashMap<MultiIndex, usize>,
    /// Number of monomials of degree at most `k`.
    upto: Vec<usize>,
    /// `(i, j, r)` with `idx[i] + idx[j] = idx[r]`, sorted by degree of `r`.
    mul: Vec<(u32, u32, u32)>,
    mul_upto: Vec<usize>,
    /// `shift[k][i]` is the position of `idx[i] + e_k`.
    shift: Vec<Vec<Option<u32>>>,
    fact: Vec<Q>,
}

fn degree(m: &[u8]) -> usize {
    m.iter().map(|&x| x as usize).sum()
}

impl Layout {
    pub fn new(n: usize, order: usize) -> Arc<Layout> {
        let mut idx: Vec<MultiIndex> = vec![std::iter::repeat_n(0, n).collect()];
        let mut upto = vec![1];
        let mut last: Vec<MultiIndex> = idx.clone();
        for _ in 0..order {
            let mut next: Vec<MultiIndex> = Vec::new();
            for m in &last {
                for k in 0..n {
                    let mut c = m.clone();
                    c[k] += 1;
                    if !next.contains(&c) {
                        next.push(c);
                    }
                }
            }
            next.sort_unstable_by(|a, b| b.cmp(a));
            idx.extend(next.iter().cloned());
            upto.push(idx.len());
            last = next;
        }
        let pos: FxHashMap<MultiIndex, usize> = idx.iter().enumerate().map(|(i, m)| (m.clone(), i)).collect();
        let mut mul = Vec::new();
        for (i, a) in idx.iter().enumerate() {
            for (j, b) in idx.iter().enumerate() {
                let s: MultiIndex = a.iter().zip(b).map(|(x, y)| x + y).collect();
                if let Some(&r) = pos.get(&s) {
                    mul.push((i as u32, j as u32, r as u32));
                }
            }
        }
        mul.sort_by_key(|&(_, _, r)| (degree(&idx[r as usize]), r));
        let mul_upto = (0..=order).map(|k| mul.partition_point(|&(_, _, r)| degree(&idx[r as usize]) <= k)).collect();
        let shift = (0..n)
            .map(|k| {
                idx.iter()
                    .map(|m| {
                        let mut c = m.clone();
                        c[k] += 1;
                        pos.get(&c).map(|&p| p as u32)
                    })
                    .collect()
            })
            .collect();
        let fact = idx
            .iter()
            .map(|m| m.iter().fold(Q::ONE, |acc, &x| (1..=x as i64).fold(acc, |a, f| &a * &Q::int(f))))
            .collect();
        Arc::new(Layout { n, order, idx, pos, upto, mul, mul_upto, shift, fact })
    }
}

/// Truncated Taylor series `sum c_a x^a` with exact coefficients.
#[derive(Clone, Debug)]
pub struct Series {
    lay: Arc<Layout>,
    order: usize,
    c: Vec<Q>,
}

impl Series {
    pub fn constant(lay: &Arc<Layout>, order: usize, v: Q) -> Series {
        let mut c = vec![Q::ZERO; lay.upto[order]];
        c[0] = v;
        Series { lay: lay.clone(), order, c }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Value at the expansion point.
    pub fn value(&self) -> &Q {
        &self.c[0]
    }

    /// Coefficient of `x^m`.
    pub fn coeff(&self, m: &[u8]) -> Option<&Q> {
        self.lay.pos.get(m).and_then(|&p| self.c.get(p))
    }

    fn truncated(&self, order: usize) -> &[Q] {
        &self.c[..self.lay.upto[order]]
    }
}

impl Field for Series {
    fn add(&self, o: &Self) -> Self {
        let order = self.order.min(o.order);
        let c = self.truncated(order).iter().zip(o.truncated(order)).map(|(a, b)| a + b).collect();
        Series { lay: self.lay.clone(), order, c }
    }

    fn sub(&self, o: &Self) -> Self {
        let order = self.order.min(o.order);
        let c = self.truncated(order).iter().zip(o.truncated(order)).map(|(a, b)| a - b).collect();
        Series { lay: self.lay.clone(), order, c }
    }

    fn mul(&self, o: &Self) -> Self {
        let order = self.order.min(o.order);
        let mut c = vec![Q::ZERO; self.lay.upto[order]];
        for &(i, j, r) in &self.lay.mul[..self.lay.mul_upto[order]] {
            let (a, b) = (&self.c[i as usize], &o.c[j as usize]);
            if !a.is_zero() && !b.is_zero() {
                c[r as usize] = &c[r as usize] + &(a * b);
            }
        }
        Series { lay: self.lay.clone(), order, c }
    }

    fn recip(&self) -> Option<Self> {
        if self.c[0].is_zero() {
            return None;
        }
        let lay = &self.lay;
        let inv0 = self.c[0].recip();
        let mut b = vec![Q::ZERO; lay.upto[self.order]];
        b[0] = inv0.clone();
        let mut acc = vec![Q::ZERO; b.len()];
        for d in 1..=self.order {
            for &(i, j, r) in &lay.mul[lay.mul_upto[d - 1]..lay.mul_upto[d]] {
                if i == 0 {
                    continue;
                }
                let (x, y) = (&self.c[i as usize], &b[j as usize]);
                if !x.is_zero() && !y.is_zero() {
                    acc[r as usize] = &acc[r as usize] + &(x * y);
                }
            }
            for r in lay.upto[d - 1]..lay.upto[d] {
                b[r] = -(&acc[r] * &inv0);
            }
        }
        Some(Series { lay: lay.clone(), order: self.order, c: b })
    }

    fn scale(&self, num: i64, den: i64) -> Self {
        let q = Q::new(num, den);
        Series { lay: self.lay.clone(), order: self.order, c: self.c.iter().map(|a| a * &q).collect() }
    }

    fn deriv(&self, k: usize) -> Self {
        assert!(self.order > 0, "derivative of a series truncated at order zero");
        let order = self.order - 1;
        let c = (0..self.lay.upto[order])
            .map(|i| {
                let s = self.lay.shift[k][i].expect("within layout") as usize;
                &self.c[s] * &Q::int(self.lay.idx[i][k] as i64 + 1)
            })
            .collect();
        Series { lay: self.lay.clone(), order, c }
    }
}

impl Lift for Series {
    fn lift(&self, q: &Q) -> Self {
        Series::constant(&self.lay, self.order, q.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PointError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("the equation does not determine '{0}' without a cycle")]
    Cycle(String),
    #[error("series order {0} exceeds the working order")]
    Order(usize),
}

/// A random point on the equation manifold, extended on demand.
pub struct JetPoint<'a> {
    eq: &'a EquationSpec,
    lay: Arc<Layout>,
    rng: ChaCha8Rng,
    values: FxHashMap<AtomId, Q>,
    busy: FxHashSet<AtomId>,
    series: FxHashMap<(AtomId, usize, Option<MultiIndex>), Series>,
}

impl<'a> JetPoint<'a> {
    pub fn new(eq: &'a EquationSpec, max_order: usize, seed: u64) -> Self {
        JetPoint {
            eq,
            lay: Layout::new(eq.dim(), max_order),
            rng: ChaCha8Rng::seed_from_u64(seed),
            values: FxHashMap::default(),
            busy: FxHashSet::default(),
            series: FxHashMap::default(),
        }
    }

    fn random(&mut self) -> Q {
        let n: i64 = self.rng.gen_range(1..=7);
        let d: i64 = self.rng.gen_range(1..=3);
        Q::new(if self.rng.gen_bool(0.5) { n } else { -n }, d)
    }

    /// Value of a jet, variable or constant at the point.
    pub fn value(&mut self, a: AtomId) -> Result<Q, PointError> {
        if let Some(v) = self.values.get(&a) {
            return Ok(v.clone());
        }
        let v = match self.eq.jet_of(a) {
            Some((u, mi)) => match self.eq.reducing_relation(u, &mi) {
                None => self.random(),
                Some(ri) => {
                    if !self.busy.insert(a) {
                        return Err(PointError::Cycle(self.eq.render_atom(a)));
                    }
                    let rel = &self.eq.relations[ri];
                    let beta: MultiIndex = mi.iter().zip(&rel.principal).map(|(s, p)| s - p).collect();
                    let rhs = rel.rhs.clone();
                    // Only monomials dividing x^beta feed its coefficient.
                    let s = self.expand_in(&rhs, degree(&beta), Some(&beta))?;
                    self.busy.remove(&a);
                    let p = self.lay.pos[&beta];
                    &s.c[p] * &self.lay.fact[p]
                }
            },
            None => match atom::kind(a) {
                AtomKind::Var(_) | AtomKind::Const(_) => self.random(),
                _ => return Err(EvalError::Unsupported(self.eq.render_atom(a)).into()),
            },
        };
        self.values.insert(a, v.clone());
        Ok(v)
    }

    fn atom_series(&mut self, a: AtomId, order: usize, within: Option<&MultiIndex>) -> Result<Series, PointError> {
        let key = (a, order, within.cloned());
        if let Some(s) = self.series.get(&key) {
            return Ok(s.clone());
        }
        let lay = self.lay.clone();
        let mut s = Series::constant(&lay, order, self.value(a)?);
        if let Some((u, mi)) = self.eq.jet_of(a) {
            for p in 1..lay.upto[order] {
                if within.is_some_and(|b| lay.idx[p].iter().zip(b).any(|(x, y)| x > y)) {
                    continue;
                }
                let m: MultiIndex = mi.iter().zip(&lay.idx[p]).map(|(x, y)| x + y).collect();
                let v = self.value(self.eq.jet_atom(u, &m))?;
                s.c[p] = &v / &lay.fact[p];
            }
        } else if let Some(k) = self.eq.var_atoms.iter().position(|&v| v == a) {
            if order > 0 {
                let mut e: MultiIndex = std::iter::repeat_n(0, lay.n).collect();
                e[k] = 1;
                s.c[lay.pos[&e]] = Q::ONE;
            }
        }
        self.series.insert(key, s.clone());
        Ok(s)
    }

    /// Taylor expansion of `e` to `order` along the formal solution.
    pub fn expand(&mut self, e: &Expr, order: usize) -> Result<Series, PointError> {
        self.expand_in(e, order, None)
    }

    /// Like [`Self::expand`], but only the coefficients of monomials dividing
    /// `within` are meaningful.
    fn expand_in(&mut self, e: &Expr, order: usize, within: Option<&MultiIndex>) -> Result<Series, PointError> {
        if order > self.lay.order {
            return Err(PointError::Order(order));
        }
        let one = Series::constant(&self.lay, order, Q::ONE);
        let mut fail = None;
        let out = {
            let mut f = |a: AtomId, k: i32| -> Result<Series, EvalError> {
                match self.atom_series(a, order, within) {
                    Ok(s) => evaluate::powi(&s, k),
                    Err(PointError::Eval(e)) => Err(e),
                    Err(e) => {
                        fail = Some(e);
                        Err(EvalError::Unsupported(String::new()))
                    }
                }
            };
            evaluate::eval(e, &one, &mut f)
        };
        match (out, fail) {
            (_, Some(e)) => Err(e),
            (r, None) => Ok(r?),
        }
    }

    pub fn expand_matrix(&mut self, m: &Matrix, order: usize) -> Result<Vec<Vec<Series>>, PointError> {
        m.iter().map(|r| r.iter().map(|e| self.expand(e, order)).collect()).collect()
    }

    /// Values assigned so far, rendered, in a stable order.
    pub fn assignments(&self) -> Vec<(String, Q)> {
        let mut v: Vec<(String, Q)> = self.values.iter().map(|(&a, q)| (self.eq.render_atom(a), q.clone())).collect();
        v.sort();
        v
    }
}

/// A nonzero tensor component at a point of the equation manifold.
#[derive(Debug, Clone)]
pub struct Witness {
    pub component: String,
    pub value: Q,
    pub seed: u64,
}

fn max_jet_order(m: &Matrix) -> usize {
    m.iter().flatten().flat_map(|e| e.atoms_deep()).map(atom::jet_order).max().unwrap_or(0)
}

/// Searches `attempts` random points for a nonzero Cotton component of `g`.
/// `Ok(None)` means every sampled value vanished.
pub fn cotton_witness(eq: &EquationSpec, g: &Matrix, seed: u64, attempts: u64) -> Result<Option<Witness>, PointError> {
    let work = max_jet_order(g) + 3;
    let n = g.len();
    for s in seed..seed + attempts {
        let mut pt = JetPoint::new(eq, work, s);
        let gs = match pt.expand_matrix(g, 3) {
            Err(PointError::Eval(EvalError::DivisionByZero)) => continue,
            r => r?,
        };
        let c = match fieldgeom::cotton(&gs) {
            Err(FieldError::Singular) => continue,
            Ok(c) => c,
        };
        for p in 0..n {
            for q in 0..n {
                for r in (q + 1)..n {
                    let v = c[p][q][r].value();
                    if !v.is_zero() {
                        return Ok(Some(Witness { component: format!("C[{p}][{q}][{r}]"), value: v.clone(), seed: s }));
                    }
                }
            }
        }
    }
    Ok(None)
}

/// Einstein-Weyl tensor of `(g, omega)` at one point, upper triangle.
pub fn ew_at_point(eq: &EquationSpec, g: &Matrix, omega: &[Expr], seed: u64) -> Result<Vec<(String, Q)>, PointError> {
    let work = max_jet_order(g).max(max_jet_order(&vec![omega.to_vec()])) + 2;
    let mut pt = JetPoint::new(eq, work, seed);
    let gs = pt.expand_matrix(g, 2)?;
    let om = omega.iter().map(|w| pt.expand(w, 1)).collect::<Result<Vec<_>, _>>()?;
    let t = fieldgeom::ew_tensor(&gs, &om)?;
    let n = g.len();
    Ok((0..n)
        .flat_map(|i| (i..n).map(move |j| (i, j)))
        .map(|(i, j)| (format!("E[{i}][{j}]"), t[i][j].value().clone()))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equation::{EquationKind, Relation};

    fn lay() -> Arc<Layout> {
        Layout::new(2, 4)
    }

    #[test]
    fn layout_counts_monomials() {
        let l = Layout::new(3, 4);
        assert_eq!(l.upto, vec![1, 4, 10, 20, 35]);
    }

    #[test]
    fn reciprocal_inverts() {
        let l = lay();
        let mut s = Series::constant(&l, 4, Q::int(2));
        s.c[1] = Q::int(3);
        s.c[2] = Q::new(-1, 2);
        s.c[5] = Q::int(7);
        let p = s.mul(&s.recip().unwrap());
        assert_eq!(p.c[0], Q::ONE);
        assert!(p.c[1..].iter().all(Q::is_zero));
    }

    #[test]
    fn derivative_lowers_order() {
        let l = lay();
        // x^2 y
        let mut s = Series::constant(&l, 4, Q::ZERO);
        s.c[l.pos[&MultiIndex::from_slice(&[2, 1])]] = Q::ONE;
        let d = s.deriv(0);
        assert_eq!(d.order(), 3);
        assert_eq!(d.coeff(&[1, 1]), Some(&Q::int(2)));
    }

    #[test]
    fn heat_equation_point_is_consistent() {
        // u_t = u_xx
        let rel = Relation {
            unknown: 0,
            principal: MultiIndex::from_slice(&[0, 1]),
            rhs: Expr::atom(atom::jet("u", &[2, 0])),
        };
        let eq = EquationSpec::new("heat", &["x", "t"], &["u"], vec![rel], EquationKind::ScalarSecondOrder).unwrap();
        let mut pt = JetPoint::new(&eq, 6, 1);
        let utt = pt.value(atom::jet("u", &[0, 2])).unwrap();
        let uxxxx = pt.value(atom::jet("u", &[4, 0])).unwrap();
        assert_eq!(utt, uxxxx);
        let uxt = pt.value(atom::jet("u", &[1, 1])).unwrap();
        let uxxx = pt.value(atom::jet("u", &[3, 0])).unwrap();
        assert_eq!(uxt, uxxx);
    }
}
