//! Canonicalizing constructors for elementary functions and function
//! symbols.
//!
//! `exp` of a polynomial splits into one exponential atom per monomial (so
//! `e^u e^{-u}` cancels and `e^{u/2}` shares the atom of `e^u`), `ln` expands
//! over products and cancels exponentials, `sqrt` pulls out perfect-square
//! constants and even powers, and `tan` is rewritten as `sin/cos`.

use crate::atom::{self, AtomId, AtomKind, EXP_DEN};
use crate::expr::Expr;
use crate::gcd;
use crate::poly::{Monomial, Poly};
use crate::rational::Q;

fn unit_pow(a: AtomId, e: i32) -> Expr {
    Expr::atom_pow(a, e)
}

/// `exp(e)`.
pub fn exp(e: &Expr) -> Expr {
    if e.is_zero() {
        return Expr::one();
    }
    if !e.is_polynomial() {
        return unit_pow(atom::intern(AtomKind::Exp(e.clone())), EXP_DEN);
    }
    let sixty = Q::int(EXP_DEN as i64);
    let mut acc = Expr::one();
    for (m, c) in e.num().terms() {
        // exp(c ln A) = A^c
        if m.vars().len() == 1 && m.vars()[0].1 == 1 {
            if let AtomKind::Ln(arg) = atom::kind(m.vars()[0].0) {
                if c.is_integer() {
                    acc = acc * arg.powi(c.to_f64() as i32);
                    continue;
                }
                let twice = c * &Q::int(2);
                if twice.is_integer() {
                    acc = acc * sqrt(&arg).powi(twice.to_f64() as i32);
                    continue;
                }
            }
        }
        let k = c * &sixty;
        let mono = Expr::from_poly(Poly::monomial(m.clone(), Q::ONE));
        if k.is_integer() {
            if let Some((n, 1)) = k.as_small() {
                let a = atom::intern(AtomKind::Exp(mono));
                acc = acc * unit_pow(a, n as i32);
                continue;
            }
        }
        let a = atom::intern(AtomKind::Exp(mono.scale(c)));
        acc = acc * unit_pow(a, EXP_DEN);
    }
    acc
}

fn ln_atom(e: Expr) -> Expr {
    Expr::atom(atom::intern(AtomKind::Ln(e)))
}

fn ln_poly(p: &Poly) -> Expr {
    let (c, m, q) = gcd::split_content(p);
    let mut acc = Expr::zero();
    if !c.is_one() {
        acc = acc + ln_atom(Expr::rational(c));
    }
    for &(a, e) in m.vars() {
        let k = Expr::int(e as i64);
        let term = match atom::kind(a) {
            AtomKind::Exp(b) => b.scale(&Q::new(e as i64, EXP_DEN as i64)),
            AtomKind::Sqrt(arg) => ln(&arg).scale(&Q::new(e as i64, 2)),
            _ => ln_atom(Expr::atom(a)) * k,
        };
        acc = acc + term;
    }
    if q.as_constant().is_none() {
        acc = acc + ln_atom(Expr::from_poly(q));
    }
    acc
}

/// `ln(e)`, expanded over products and quotients.
pub fn ln(e: &Expr) -> Expr {
    assert!(!e.is_zero(), "logarithm of zero");
    let mut acc = ln_poly(e.num());
    for &(id, k) in e.den() {
        let f = crate::expr::factor_poly(id);
        acc = acc - ln_poly(&f).scale(&Q::int(k as i64));
    }
    acc
}

pub fn sin(e: &Expr) -> Expr {
    if e.is_zero() {
        return Expr::zero();
    }
    Expr::atom(atom::intern(AtomKind::Sin(e.clone())))
}

pub fn cos(e: &Expr) -> Expr {
    if e.is_zero() {
        return Expr::one();
    }
    atom::intern(AtomKind::Sin(e.clone()));
    Expr::atom(atom::intern(AtomKind::Cos(e.clone())))
}

pub fn tan(e: &Expr) -> Expr {
    sin(e).try_div(&cos(e)).expect("cos is not identically zero")
}

pub fn atan(e: &Expr) -> Expr {
    if e.is_zero() {
        return Expr::zero();
    }
    Expr::atom(atom::intern(AtomKind::Atan(e.clone())))
}

/// `sqrt(e)`: formal square root (branch chosen so that `sqrt(a^2) = a`).
pub fn sqrt(e: &Expr) -> Expr {
    if e.is_zero() {
        return Expr::zero();
    }
    if !e.is_polynomial() {
        let d = e.den_poly();
        let top = sqrt_poly(&e.num().mul(&d));
        return top.try_div(&Expr::from_poly(d)).expect("nonzero denominator");
    }
    sqrt_poly(e.num())
}

fn sqrt_poly(p: &Poly) -> Expr {
    let (c, m, q) = gcd::split_content(p);
    let mut out = Expr::one();
    let mut rad_c = Q::ONE;
    if let Some(r) = c.sqrt_exact() {
        out = out.scale(&r);
    } else if let Some(r) = (-c.clone()).sqrt_exact() {
        out = out.scale(&r);
        rad_c = Q::int(-1);
    } else {
        rad_c = c;
    }
    let mut rad_m: Vec<(AtomId, i32)> = Vec::new();
    let mut half: Vec<(AtomId, i32)> = Vec::new();
    for &(a, e) in m.vars() {
        if atom::is_algebraic(a) {
            rad_m.push((a, e));
            continue;
        }
        half.push((a, e.div_euclid(2)));
        if e.rem_euclid(2) == 1 {
            rad_m.push((a, 1));
        }
    }
    out = out * Expr::from_poly(Poly::monomial(Monomial::from_pairs(half), Q::ONE));
    let rad = q.mul_monomial(&Monomial::from_pairs(rad_m)).scale(&rad_c);
    if let Some(k) = rad.as_constant() {
        if k.is_one() {
            return out;
        }
    }
    let rad = Expr::from_poly(rad);
    out * Expr::atom(atom::intern(AtomKind::Sqrt(rad)))
}

/// `base^e` for a general exponent.
pub fn pow(base: &Expr, e: &Expr) -> Expr {
    if let Some(k) = e.as_constant() {
        if k.is_integer() {
            if let Some((n, 1)) = k.as_small() {
                return base.powi(n as i32);
            }
        }
        let twice = &k * &Q::int(2);
        if let Some((n, 1)) = twice.as_small() {
            return sqrt(base).powi(n as i32);
        }
    }
    exp(&(e * &ln(base)))
}

/// Formal derivative of an unspecified function symbol.
pub fn func(name: &str, orders: &[u8], args: Vec<Expr>) -> Expr {
    Expr::atom(atom::func(name, orders, args))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn u() -> Expr {
        Expr::atom(atom::jet("u", &[0, 0, 0]))
    }

    #[test]
    fn exponentials_combine() {
        let e = exp(&u()) * exp(&-u());
        assert!(e.is_one());
        let h = exp(&u().scale(&Q::new(1, 2)));
        assert!(h.powi(2).same(&exp(&u())));
    }

    #[test]
    fn log_of_exp_and_exp_of_log() {
        assert!(ln(&exp(&u())).same(&u()));
        let x = Expr::atom(atom::var("x"));
        assert!(exp(&ln(&x)).same(&x));
    }

    #[test]
    fn trig_pythagoras() {
        let l = Expr::atom(atom::constant("lambda"));
        let e = sin(&l).powi(2) + cos(&l).powi(2) - Expr::one();
        assert!(e.is_zero());
    }

    #[test]
    fn sqrt_pulls_out_exponential() {
        let eu = exp(&u());
        let a = sqrt(&(Expr::one() - exp(&-u())));
        let b = sqrt(&(&eu - &Expr::one())) * exp(&u().scale(&Q::new(-1, 2)));
        assert!(a.same(&b), "{a} vs {b}");
        let s = sqrt(&(&eu - &Expr::one()));
        assert!(s.powi(2).same(&(&eu - &Expr::one())));
        let inv = Expr::one().try_div(&s).unwrap();
        assert!((inv * s).is_one());
    }

    #[test]
    fn general_power_of_symbolic_exponent() {
        let m = Expr::atom(atom::jet("m", &[0, 0, 1]));
        let rho = Expr::atom(atom::constant("rho"));
        let a = pow(&m, &(rho.clone() + Expr::one()));
        let b = pow(&m, &rho) * &m;
        assert!(a.same(&b));
    }
}
