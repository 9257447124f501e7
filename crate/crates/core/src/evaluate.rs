//! Evaluation of expressions into concrete value types.

use crate::atom::{self, AtomId, AtomKind, EXP_DEN};
use crate::expr::{factor_poly, Expr};
use crate::fieldgeom::Field;
use crate::poly::Poly;
use crate::rational::Q;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("cannot evaluate '{0}' numerically")]
    Unsupported(String),
    #[error("division by zero during evaluation")]
    DivisionByZero,
    #[error("no value for '{0}'")]
    Unbound(String),
}

/// A [`Field`] that can embed rational constants.
pub trait Lift: Field {
    fn lift(&self, q: &Q) -> Self;
}

/// `x^e` for a nonzero exponent.
pub fn powi<F: Field>(x: &F, e: i32) -> Result<F, EvalError> {
    debug_assert!(e != 0);
    let base = if e < 0 { x.recip().ok_or(EvalError::DivisionByZero)? } else { x.clone() };
    let mut out = base.clone();
    for _ in 1..e.unsigned_abs() {
        out = out.mul(&base);
    }
    Ok(out)
}

/// Evaluates `e`; `atom(a, k)` supplies `a^k` (for exponential atoms `k`
/// counts multiples of `1/EXP_DEN`).
pub fn eval<F: Lift>(
    e: &Expr,
    one: &F,
    atom: &mut dyn FnMut(AtomId, i32) -> Result<F, EvalError>,
) -> Result<F, EvalError> {
    let num = eval_poly(e.num(), one, atom)?;
    if e.den().is_empty() {
        return Ok(num);
    }
    let mut den = one.clone();
    for &(id, k) in e.den() {
        let p = eval_poly(&factor_poly(id), one, atom)?;
        for _ in 0..k {
            den = den.mul(&p);
        }
    }
    Ok(num.mul(&den.recip().ok_or(EvalError::DivisionByZero)?))
}

fn eval_poly<F: Lift>(
    p: &Poly,
    one: &F,
    atom: &mut dyn FnMut(AtomId, i32) -> Result<F, EvalError>,
) -> Result<F, EvalError> {
    let mut acc = one.lift(&Q::ZERO);
    for (m, c) in p.terms() {
        let mut t = one.lift(c);
        for &(a, k) in m.vars() {
            t = t.mul(&atom(a, k)?);
        }
        acc = acc.add(&t);
    }
    Ok(acc)
}

impl Field for f64 {
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn recip(&self) -> Option<Self> {
        (*self != 0.0).then(|| 1.0 / self)
    }
    fn scale(&self, num: i64, den: i64) -> Self {
        self * num as f64 / den as f64
    }
    /// Plain numbers are constants.
    fn deriv(&self, _k: usize) -> Self {
        0.0
    }
}

impl Lift for f64 {
    fn lift(&self, q: &Q) -> Self {
        q.to_f64()
    }
}

/// Floating-point value of `e`. `base` supplies jets, variables, constants
/// and function symbols; elementary functions are applied here.
pub fn eval_f64(e: &Expr, base: &mut dyn FnMut(AtomId) -> Result<f64, EvalError>) -> Result<f64, EvalError> {
    let mut f = |a: AtomId, k: i32| -> Result<f64, EvalError> { atom_f64(a, k, base) };
    let v = eval(e, &1.0f64, &mut f)?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(EvalError::DivisionByZero)
    }
}

fn atom_f64(a: AtomId, k: i32, base: &mut dyn FnMut(AtomId) -> Result<f64, EvalError>) -> Result<f64, EvalError> {
    let mut arg = |x: &Expr| eval_f64(x, base);
    let v = match atom::kind(a) {
        AtomKind::Exp(x) => return Ok((arg(&x)? * k as f64 / EXP_DEN as f64).exp()),
        AtomKind::Ln(x) => arg(&x)?.ln(),
        AtomKind::Sin(x) => arg(&x)?.sin(),
        AtomKind::Cos(x) => arg(&x)?.cos(),
        AtomKind::Atan(x) => arg(&x)?.atan(),
        AtomKind::Sqrt(x) => arg(&x)?.sqrt(),
        AtomKind::Marker(_) => return Err(EvalError::Unsupported(atom::render_atom(a))),
        _ => base(a)?,
    };
    Ok(v.powi(k))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evaluates_rational_and_elementary_atoms() {
        let x = atom::var("x");
        let ex = Expr::atom(x);
        let e = (&ex * &ex + Expr::one()) * crate::elementary::exp(&ex).recip().unwrap() + crate::elementary::sin(&ex);
        let v = eval_f64(&e, &mut |a| if a == x { Ok(0.5) } else { Err(EvalError::Unbound(atom::render_atom(a))) })
            .unwrap();
        let want = 1.25 * (-0.5f64).exp() + 0.5f64.sin();
        assert!((v - want).abs() < 1e-12, "{v} vs {want}");
    }

    #[test]
    fn division_by_zero_is_reported() {
        let x = atom::var("x");
        let e = Expr::atom(x).recip().unwrap();
        assert_eq!(eval_f64(&e, &mut |_| Ok(0.0)), Err(EvalError::DivisionByZero));
    }
}
