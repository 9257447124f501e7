//! Arithmetic in Z/p for a word-size prime, plus dense univariate helpers
//! used by the coprimality certificate in `poly::gcd`.

pub const PRIME: u64 = 4_611_686_018_427_387_847; // 2^62 - 57

pub fn mul(a: u64, b: u64, p: u64) -> u64 {
    ((a as u128 * b as u128) % p as u128) as u64
}

pub fn add(a: u64, b: u64, p: u64) -> u64 {
    let s = a as u128 + b as u128;
    (s % p as u128) as u64
}

pub fn sub(a: u64, b: u64, p: u64) -> u64 {
    if a >= b {
        a - b
    } else {
        p - (b - a)
    }
}

pub fn pow(mut b: u64, mut e: u64, p: u64) -> u64 {
    let mut r = 1u64;
    b %= p;
    while e > 0 {
        if e & 1 == 1 {
            r = mul(r, b, p);
        }
        b = mul(b, b, p);
        e >>= 1;
    }
    r
}

pub fn inv(a: u64, p: u64) -> u64 {
    debug_assert!(!a.is_multiple_of(p));
    pow(a, p - 2, p)
}

/// Dense polynomial mod p, coefficient of x^i at index i, no trailing zeros.
pub fn trim(v: &mut Vec<u64>) {
    while v.last() == Some(&0) {
        v.pop();
    }
}

pub fn degree(v: &[u64]) -> Option<usize> {
    if v.is_empty() {
        None
    } else {
        Some(v.len() - 1)
    }
}

/// Monic gcd of two dense polynomials mod p.
pub fn gcd_dense(a: &[u64], b: &[u64], p: u64) -> Vec<u64> {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    trim(&mut a);
    trim(&mut b);
    while !b.is_empty() {
        let r = rem_dense(&a, &b, p);
        a = b;
        b = r;
    }
    if let Some(&lc) = a.last() {
        let li = inv(lc, p);
        for c in a.iter_mut() {
            *c = mul(*c, li, p);
        }
    }
    a
}

fn rem_dense(a: &[u64], b: &[u64], p: u64) -> Vec<u64> {
    let mut r = a.to_vec();
    let db = b.len() - 1;
    let lb = inv(b[db], p);
    while r.len() > db {
        let lr = *r.last().unwrap();
        if lr == 0 {
            r.pop();
            continue;
        }
        let q = mul(lr, lb, p);
        let shift = r.len() - 1 - db;
        for (i, &bc) in b.iter().enumerate() {
            r[shift + i] = sub(r[shift + i], mul(q, bc, p), p);
        }
        r.pop();
    }
    trim(&mut r);
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_roundtrip() {
        let p = PRIME;
        for a in [2u64, 3, 12345, p - 1] {
            assert_eq!(mul(a, inv(a, p), p), 1);
        }
    }

    #[test]
    fn gcd_of_products() {
        let p = 101;
        // (x+1)(x+2) and (x+1)(x+3)
        let a = vec![2, 3, 1];
        let b = vec![3, 4, 1];
        assert_eq!(gcd_dense(&a, &b, p), vec![1, 1]);
    }
}
