//! Polynomial gcd and divisibility tests.
//!
//! The fast path is a modular certificate: all atoms but one are evaluated
//! at fixed pseudo-random points mod a 62-bit prime and the resulting
//! univariate images are compared. Only when the certificate cannot rule
//! out a common factor does [`gcd`] fall back to a recursive primitive
//! pseudo-remainder sequence.

use rustc_hash::FxHashMap;

use crate::atom::AtomId;
use crate::modp::{self, PRIME};
use crate::poly::{neg_shift, Monomial, Poly};
use crate::rational::Q;

fn point(a: AtomId, salt: u64) -> u64 {
    // splitmix64
    let mut z = (a as u64) ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    z % (PRIME - 2) + 2
}

/// Dense univariate image of `p` in `x`, with every other atom evaluated.
/// Exponents of `x` are divided by `step` after shifting the minimum to 0.
/// Returns `None` if a coefficient has a vanishing denominator mod p.
fn image(p: &Poly, x: AtomId, step: i32, shift: i32, salt: u64) -> Option<Vec<u64>> {
    let mut out: Vec<u64> = Vec::new();
    for (m, c) in p.terms() {
        let mut v = c.mod_p(PRIME)?;
        let mut ex = 0;
        for &(a, e) in m.vars() {
            if a == x {
                ex = e;
                continue;
            }
            let pt = point(a, salt);
            let f = if e >= 0 {
                modp::pow(pt, e as u64, PRIME)
            } else {
                modp::pow(modp::inv(pt, PRIME), (-e) as u64, PRIME)
            };
            v = modp::mul(v, f, PRIME);
        }
        let idx = ((ex - shift) / step) as usize;
        if out.len() <= idx {
            out.resize(idx + 1, 0);
        }
        out[idx] = modp::add(out[idx], v, PRIME);
    }
    modp::trim(&mut out);
    // Powers of x are units in the Laurent ring.
    let lead_zero = out.iter().take_while(|&&c| c == 0).count();
    out.drain(..lead_zero);
    Some(out)
}

fn exponent_frame(polys: &[&Poly], x: AtomId) -> (i32, Vec<i32>) {
    let mut step = 0i32;
    let mut shifts = Vec::new();
    for p in polys {
        let mn = p.terms().iter().map(|(m, _)| m.exponent(x)).min().unwrap_or(0);
        shifts.push(mn);
        for (m, _) in p.terms() {
            step = num_integer::gcd(step, m.exponent(x) - mn);
        }
    }
    (step.max(1), shifts)
}

/// `false` means `f` certainly does not divide `num` (in the Laurent ring).
pub fn maybe_divides(num: &Poly, f: &Poly) -> bool {
    let x = match f.leading().and_then(|(m, _)| m.vars().first().map(|p| p.0)) {
        Some(x) => x,
        None => return true,
    };
    let (step, sh) = exponent_frame(&[num, f], x);
    let (a, b) = match (image(num, x, step, sh[0], 1), image(f, x, step, sh[1], 1)) {
        (Some(a), Some(b)) => (a, b),
        _ => return true,
    };
    if b.is_empty() {
        return true;
    }
    if a.is_empty() {
        return true;
    }
    if b.len() > a.len() {
        return false;
    }
    let g = modp::gcd_dense(&a, &b, PRIME);
    g.len() == b.len()
}

/// `true` means `a` and `b` certainly share no non-monomial factor.
pub fn certainly_coprime(a: &Poly, b: &Poly) -> bool {
    let aa = a.atoms();
    let bb = b.atoms();
    let common: Vec<AtomId> = aa.iter().copied().filter(|x| bb.binary_search(x).is_ok()).collect();
    if common.is_empty() {
        return true;
    }
    for &x in &common {
        let (step, sh) = exponent_frame(&[a, b], x);
        let ia = image(a, x, step, sh[0], 7);
        let ib = image(b, x, step, sh[1], 7);
        match (ia, ib) {
            (Some(ia), Some(ib)) => {
                if ia.len() <= 1 || ib.len() <= 1 {
                    // x drops out of an image; another atom has to decide.
                    if a.degree_in(x) > 0 && b.degree_in(x) > 0 && (ia.is_empty() || ib.is_empty()) {
                        return false;
                    }
                    continue;
                }
                if modp::gcd_dense(&ia, &ib, PRIME).len() > 1 {
                    return false;
                }
            }
            _ => return false,
        }
    }
    true
}

/// Normalized form `p = c * m * q` with `q` primitive, free of monomial
/// content, and positive leading coefficient.
pub fn split_content(p: &Poly) -> (Q, Monomial, Poly) {
    if p.is_zero() {
        return (Q::ZERO, Monomial::one(), Poly::zero());
    }
    let m = p.monomial_content();
    let q = p.div_monomial(&m);
    let mut c = q.content();
    if q.leading().unwrap().1.is_negative() {
        c = -c;
    }
    let q = q.scale(&c.recip());
    (c, m, q)
}

fn primitive(p: &Poly) -> Poly {
    split_content(p).2
}

/// Coefficients of `p` as a polynomial in `x` (index = exponent after shift).
fn coeffs_in(p: &Poly, x: AtomId) -> Vec<Poly> {
    let mn = p.terms().iter().map(|(m, _)| m.exponent(x)).min().unwrap_or(0);
    let mut buckets: FxHashMap<i32, Vec<(Monomial, Q)>> = FxHashMap::default();
    for (m, c) in p.terms() {
        let e = m.exponent(x);
        buckets.entry(e - mn).or_default().push((m.without(x), c.clone()));
    }
    let deg = buckets.keys().copied().max().unwrap_or(0) as usize;
    let mut out = vec![Poly::zero(); deg + 1];
    for (e, ts) in buckets {
        out[e as usize] = Poly::from_terms(ts);
    }
    out
}

fn from_coeffs(cs: &[Poly], x: AtomId) -> Poly {
    let mut acc = Poly::zero();
    for (i, c) in cs.iter().enumerate() {
        if !c.is_zero() {
            acc = acc.add(&c.mul_monomial(&Monomial::atom(x, i as i32)));
        }
    }
    acc
}

fn trim(v: &mut Vec<Poly>) {
    while v.len() > 1 && v.last().map(|p| p.is_zero()).unwrap_or(false) {
        v.pop();
    }
}

fn prem(a: &[Poly], b: &[Poly]) -> Vec<Poly> {
    let mut r = a.to_vec();
    let db = b.len() - 1;
    let lb = &b[db];
    while r.len() > db && !(r.len() == 1 && r[0].is_zero()) {
        let dr = r.len() - 1;
        let lr = r[dr].clone();
        if lr.is_zero() {
            r.pop();
            continue;
        }
        for c in r.iter_mut() {
            *c = c.mul(lb);
        }
        let shift = dr - db;
        for (i, bc) in b.iter().enumerate() {
            r[shift + i] = r[shift + i].sub(&bc.mul(&lr));
        }
        r.pop();
        if r.is_empty() {
            r.push(Poly::zero());
        }
    }
    trim(&mut r);
    r
}

fn content_list(cs: &[Poly]) -> Poly {
    let mut g = Poly::zero();
    for c in cs {
        if c.is_zero() {
            continue;
        }
        g = if g.is_zero() { primitive(c) } else { gcd(&g, c) };
        if g.as_constant().is_some() {
            return Poly::one();
        }
    }
    if g.is_zero() {
        Poly::one()
    } else {
        g
    }
}

/// Greatest common divisor up to constants and monomials: the result is
/// primitive, has no monomial content and a positive leading coefficient.
pub fn gcd(a: &Poly, b: &Poly) -> Poly {
    if a.is_zero() {
        return primitive(b);
    }
    if b.is_zero() {
        return primitive(a);
    }
    let a = primitive(a);
    let b = primitive(b);
    if a.as_constant().is_some() || b.as_constant().is_some() {
        return Poly::one();
    }
    if a == b {
        return a;
    }
    if certainly_coprime(&a, &b) {
        return Poly::one();
    }
    let a = a.mul_monomial(&neg_shift(&a));
    let b = b.mul_monomial(&neg_shift(&b));
    let aa = a.atoms();
    let bb = b.atoms();
    let x = match aa.iter().copied().find(|x| bb.binary_search(x).is_ok()) {
        Some(x) => x,
        None => return Poly::one(),
    };
    let ca_list = coeffs_in(&a, x);
    let cb_list = coeffs_in(&b, x);
    let ca = content_list(&ca_list);
    let cb = content_list(&cb_list);
    let gc = gcd(&ca, &cb);
    let pa = a.div_exact(&ca).expect("content divides");
    let pb = b.div_exact(&cb).expect("content divides");
    let mut fa = coeffs_in(&pa, x);
    let mut fb = coeffs_in(&pb, x);
    if fa.len() < fb.len() {
        std::mem::swap(&mut fa, &mut fb);
    }
    let g = loop {
        if fb.len() == 1 {
            if fb[0].is_zero() {
                break from_coeffs(&fa, x);
            }
            break Poly::one();
        }
        let r = prem(&fa, &fb);
        if r.len() == 1 && r[0].is_zero() {
            break from_coeffs(&fb, x);
        }
        let rc = content_list(&r);
        let r: Vec<Poly> = r.iter().map(|c| c.div_exact(&rc).expect("content divides")).collect();
        fa = fb;
        fb = r;
    };
    let g = primitive(&g);
    let g = if g.as_constant().is_some() {
        g
    } else {
        // primitive part with respect to x, times the content gcd
        let cl = coeffs_in(&g, x);
        let c = content_list(&cl);
        g.div_exact(&c).expect("content divides")
    };
    primitive(&g.mul(&gc))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::atom;

    fn v(n: &str) -> Poly {
        Poly::atom(atom::var(n))
    }

    #[test]
    fn gcd_finds_shared_factor() {
        let (x, y, z) = (v("gx"), v("gy"), v("gz"));
        let f = x.add(&y.mul(&z)).add(&Poly::one());
        let a = f.mul(&x.sub(&y));
        let b = f.mul(&z.add(&x.mul(&x)));
        assert!(!certainly_coprime(&a, &b));
        assert_eq!(gcd(&a, &b), primitive(&f));
    }

    #[test]
    fn coprime_polys_certified() {
        let (x, y) = (v("gx"), v("gy"));
        let a = x.add(&y);
        let b = x.sub(&y).add(&Poly::one());
        assert!(certainly_coprime(&a, &b));
        assert!(gcd(&a, &b).is_one());
    }

    #[test]
    fn divisibility_precheck() {
        let (x, y) = (v("gx"), v("gy"));
        let f = x.add(&y);
        let n = f.mul(&x.sub(&y));
        assert!(maybe_divides(&n, &f));
        assert!(!maybe_divides(&n.add(&x), &f));
    }
}
