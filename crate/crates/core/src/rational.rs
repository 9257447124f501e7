//! Exact rational coefficients with an `i64` fast path.

use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// A rational number. Small values stay unboxed; anything that overflows an
/// `i64` numerator or denominator is promoted to a `BigRational`.
///
/// Invariant: the small form is always reduced with a positive denominator,
/// and a big value that fits into the small form is demoted.
#[derive(Clone)]
pub enum Q {
    Small(i64, i64),
    Big(Box<BigRational>),
}

impl Q {
    pub const ZERO: Q = Q::Small(0, 1);
    pub const ONE: Q = Q::Small(1, 1);

    pub fn int(n: i64) -> Q {
        Q::Small(n, 1)
    }

    pub fn new(n: i64, d: i64) -> Q {
        assert!(d != 0, "zero denominator");
        Q::from_i128(n as i128, d as i128)
    }

    fn from_i128(mut n: i128, mut d: i128) -> Q {
        if d < 0 {
            n = -n;
            d = -d;
        }
        let g = n.gcd(&d);
        if g > 1 {
            n /= g;
            d /= g;
        }
        match (i64::try_from(n), i64::try_from(d)) {
            (Ok(n), Ok(d)) => Q::Small(n, d),
            _ => Q::Big(Box::new(BigRational::new_raw(BigInt::from(n), BigInt::from(d)))),
        }
    }

    pub fn from_big(r: BigRational) -> Q {
        if let (Some(n), Some(d)) = (r.numer().to_i64(), r.denom().to_i64()) {
            Q::Small(n, d)
        } else {
            Q::Big(Box::new(r))
        }
    }

    /// Parses a string of decimal digits.
    pub fn parse_int(s: &str) -> Q {
        let n: BigInt = s.parse().expect("decimal digits");
        Q::from_big(BigRational::from_integer(n))
    }

    pub fn to_big(&self) -> BigRational {
        match self {
            Q::Small(n, d) => BigRational::new_raw(BigInt::from(*n), BigInt::from(*d)),
            Q::Big(b) => (**b).clone(),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Q::Small(0, _))
    }

    pub fn is_one(&self) -> bool {
        matches!(self, Q::Small(1, 1))
    }

    pub fn is_integer(&self) -> bool {
        match self {
            Q::Small(_, d) => *d == 1,
            Q::Big(b) => b.is_integer(),
        }
    }

    pub fn is_negative(&self) -> bool {
        match self {
            Q::Small(n, _) => *n < 0,
            Q::Big(b) => b.is_negative(),
        }
    }

    pub fn signum(&self) -> i32 {
        match self {
            Q::Small(n, _) => n.signum() as i32,
            Q::Big(b) => {
                if b.is_negative() {
                    -1
                } else if b.is_zero() {
                    0
                } else {
                    1
                }
            }
        }
    }

    pub fn abs(&self) -> Q {
        if self.is_negative() {
            -self.clone()
        } else {
            self.clone()
        }
    }

    pub fn recip(&self) -> Q {
        match self {
            Q::Small(n, d) => {
                assert!(*n != 0, "division by zero rational");
                Q::from_i128(*d as i128, *n as i128)
            }
            Q::Big(b) => Q::from_big(b.recip()),
        }
    }

    pub fn numer_big(&self) -> BigInt {
        match self {
            Q::Small(n, _) => BigInt::from(*n),
            Q::Big(b) => b.numer().clone(),
        }
    }

    pub fn denom_big(&self) -> BigInt {
        match self {
            Q::Small(_, d) => BigInt::from(*d),
            Q::Big(b) => b.denom().clone(),
        }
    }

    /// Small numerator/denominator if both fit.
    pub fn as_small(&self) -> Option<(i64, i64)> {
        match self {
            Q::Small(n, d) => Some((*n, *d)),
            Q::Big(_) => None,
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Q::Small(n, d) => *n as f64 / *d as f64,
            Q::Big(b) => b.to_f64().unwrap_or(f64::NAN),
        }
    }

    pub fn pow(&self, e: i32) -> Q {
        if e < 0 {
            return self.recip().pow(-e);
        }
        let mut acc = Q::ONE;
        for _ in 0..e {
            acc = &acc * self;
        }
        acc
    }

    /// Residue modulo the prime `p`, or `None` if the denominator vanishes there.
    pub fn mod_p(&self, p: u64) -> Option<u64> {
        match self {
            Q::Small(n, d) => {
                let nm = (*n as i128).rem_euclid(p as i128) as u64;
                let dm = (*d as i128).rem_euclid(p as i128) as u64;
                if dm == 0 {
                    return None;
                }
                Some(crate::modp::mul(nm, crate::modp::inv(dm, p), p))
            }
            Q::Big(b) => {
                let pb = BigInt::from(p);
                let nm = b.numer().mod_floor(&pb).to_u64().unwrap();
                let dm = b.denom().mod_floor(&pb).to_u64().unwrap();
                if dm == 0 {
                    return None;
                }
                Some(crate::modp::mul(nm, crate::modp::inv(dm, p), p))
            }
        }
    }

    /// Exact integer square root of a non-negative rational, if it exists.
    pub fn sqrt_exact(&self) -> Option<Q> {
        if self.is_negative() {
            return None;
        }
        let n = self.numer_big();
        let d = self.denom_big();
        let sn = n.sqrt();
        let sd = d.sqrt();
        if &sn * &sn == n && &sd * &sd == d {
            Some(Q::from_big(BigRational::new(sn, sd)))
        } else {
            None
        }
    }
}

impl From<i64> for Q {
    fn from(n: i64) -> Q {
        Q::int(n)
    }
}

impl PartialEq for Q {
    fn eq(&self, other: &Q) -> bool {
        match (self, other) {
            (Q::Small(a, b), Q::Small(c, d)) => a == c && b == d,
            (Q::Big(a), Q::Big(b)) => a == b,
            _ => false,
        }
    }
}
impl Eq for Q {}

impl Hash for Q {
    fn hash<H: Hasher>(&self, state: &mut H) {
        match self {
            Q::Small(n, d) => {
                0u8.hash(state);
                n.hash(state);
                d.hash(state);
            }
            Q::Big(b) => {
                1u8.hash(state);
                b.numer().hash(state);
                b.denom().hash(state);
            }
        }
    }
}

impl PartialOrd for Q {
    fn partial_cmp(&self, other: &Q) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Q {
    fn cmp(&self, other: &Q) -> Ordering {
        match (self, other) {
            (Q::Small(a, b), Q::Small(c, d)) => (*a as i128 * *d as i128).cmp(&(*c as i128 * *b as i128)),
            _ => self.to_big().cmp(&other.to_big()),
        }
    }
}

impl<'a> Add<&'a Q> for &'a Q {
    type Output = Q;
    fn add(self, rhs: &Q) -> Q {
        match (self, rhs) {
            (Q::Small(a, b), Q::Small(c, d)) => {
                if b == d {
                    if let Some(s) = a.checked_add(*c) {
                        return Q::from_i128(s as i128, *b as i128);
                    }
                }
                let n = *a as i128 * *d as i128 + *c as i128 * *b as i128;
                let den = *b as i128 * *d as i128;
                Q::from_i128(n, den)
            }
            _ => Q::from_big(self.to_big() + rhs.to_big()),
        }
    }
}

impl<'a> Sub<&'a Q> for &'a Q {
    type Output = Q;
    fn sub(self, rhs: &Q) -> Q {
        self + &(-rhs.clone())
    }
}

impl<'a> Mul<&'a Q> for &'a Q {
    type Output = Q;
    fn mul(self, rhs: &Q) -> Q {
        match (self, rhs) {
            (Q::Small(a, b), Q::Small(c, d)) => {
                if *b == 1 && *d == 1 {
                    if let Some(p) = a.checked_mul(*c) {
                        return Q::Small(p, 1);
                    }
                }
                Q::from_i128(*a as i128 * *c as i128, *b as i128 * *d as i128)
            }
            _ => Q::from_big(self.to_big() * rhs.to_big()),
        }
    }
}

impl<'a> Div<&'a Q> for &'a Q {
    type Output = Q;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, rhs: &Q) -> Q {
        self * &rhs.recip()
    }
}

impl Neg for Q {
    type Output = Q;
    fn neg(self) -> Q {
        match self {
            Q::Small(n, d) => match n.checked_neg() {
                Some(m) => Q::Small(m, d),
                None => Q::from_i128(-(n as i128), d as i128),
            },
            Q::Big(b) => Q::from_big(-*b),
        }
    }
}

macro_rules! owned_ops {
    ($tr:ident, $m:ident) => {
        impl $tr<Q> for Q {
            type Output = Q;
            fn $m(self, rhs: Q) -> Q {
                (&self).$m(&rhs)
            }
        }
    };
}
owned_ops!(Add, add);
owned_ops!(Sub, sub);
owned_ops!(Mul, mul);
owned_ops!(Div, div);

impl Zero for Q {
    fn zero() -> Q {
        Q::ZERO
    }
    fn is_zero(&self) -> bool {
        Q::is_zero(self)
    }
}

impl One for Q {
    fn one() -> Q {
        Q::ONE
    }
}

impl fmt::Display for Q {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Q::Small(n, 1) => write!(f, "{n}"),
            Q::Small(n, d) => write!(f, "{n}/{d}"),
            Q::Big(b) => {
                if b.is_integer() {
                    write!(f, "{}", b.numer())
                } else {
                    write!(f, "{}/{}", b.numer(), b.denom())
                }
            }
        }
    }
}

impl fmt::Debug for Q {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

/// Greatest common divisor of two rationals: gcd of numerators over lcm of
/// denominators, always non-negative.
pub fn q_gcd(a: &Q, b: &Q) -> Q {
    if a.is_zero() {
        return b.abs();
    }
    if b.is_zero() {
        return a.abs();
    }
    match (a, b) {
        (Q::Small(n1, d1), Q::Small(n2, d2)) => {
            let n = (*n1 as i128).gcd(&(*n2 as i128));
            let d = (*d1 as i128).lcm(&(*d2 as i128));
            Q::from_i128(n, d)
        }
        _ => {
            let n = a.numer_big().gcd(&b.numer_big());
            let d = a.denom_big().lcm(&b.denom_big());
            Q::from_big(BigRational::new(n, d))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_arithmetic_reduces() {
        assert_eq!(Q::new(2, 4), Q::new(1, 2));
        assert_eq!(&Q::new(1, 2) + &Q::new(1, 3), Q::new(5, 6));
        assert_eq!(&Q::new(1, 2) * &Q::new(-2, 3), Q::new(-1, 3));
        assert_eq!(Q::new(3, -6), Q::new(-1, 2));
    }

    #[test]
    fn overflow_promotes_and_demotes() {
        let big = Q::int(i64::MAX);
        let sq = &big * &big;
        assert!(matches!(sq, Q::Big(_)));
        let back = &sq / &big;
        assert_eq!(back, big);
        assert!(matches!(back, Q::Small(_, _)));
    }

    #[test]
    fn gcd_of_rationals() {
        assert_eq!(q_gcd(&Q::new(4, 3), &Q::new(6, 5)), Q::new(2, 15));
    }

    #[test]
    fn modular_image() {
        let p = 1_000_000_007;
        let half = Q::new(1, 2).mod_p(p).unwrap();
        assert_eq!(crate::modp::mul(half, 2, p), 1);
    }
}
