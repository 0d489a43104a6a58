//! Raw double-word modular arithmetic.
//!
//! Everything here works on plain `u128` values already reduced below the
//! modulus. Moduli are capped at 2^127 so that `a + b` never overflows; the
//! public wrappers in [`crate::modular`] enforce the cap at construction.

/// Largest modulus the crate accepts: products of reduced operands stay
/// representable with double-word tricks below this line.
pub(crate) const MAX_MODULUS: u128 = 1 << 127;

#[inline]
pub(crate) fn addmod(a: u128, b: u128, m: u128) -> u128 {
    // a, b < m < 2^127, so the sum fits in u128.
    let s = a + b;
    if s >= m { s - m } else { s }
}

#[inline]
pub(crate) fn submod(a: u128, b: u128, m: u128) -> u128 {
    if a >= b { a - b } else { a + m - b }
}

/// `a * b mod m` for reduced operands. Single hardware multiply when the
/// modulus fits 64 bits, shift-and-add otherwise.
#[inline]
pub(crate) fn mulmod(a: u128, b: u128, m: u128) -> u128 {
    debug_assert!(a < m && b < m);
    if m <= u64::MAX as u128 {
        // operands < 2^64, product < 2^128: exact.
        (a * b) % m
    } else {
        mulmod_wide(a, b, m)
    }
}

fn mulmod_wide(a: u128, b: u128, m: u128) -> u128 {
    // Double-and-add on the smaller factor; ~bit-length iterations.
    let (mut base, mut e) = if a < b { (b, a) } else { (a, b) };
    let mut acc = 0u128;
    while e > 0 {
        if e & 1 == 1 {
            acc = addmod(acc, base, m);
        }
        e >>= 1;
        if e > 0 {
            base = addmod(base, base, m);
        }
    }
    acc
}

pub(crate) fn powmod(mut base: u128, mut exp: u128, m: u128) -> u128 {
    if m == 1 {
        return 0;
    }
    base %= m;
    let mut acc = 1u128;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mulmod(acc, base, m);
        }
        exp >>= 1;
        if exp > 0 {
            base = mulmod(base, base, m);
        }
    }
    acc
}

pub(crate) fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Inverse of `a` modulo `m` via extended Euclid; `None` when gcd(a, m) > 1.
/// Bezout coefficients stay below m < 2^127 in magnitude, so i128 is safe.
pub(crate) fn invmod(a: u128, m: u128) -> Option<u128> {
    if m == 1 {
        return Some(0);
    }
    let (mut r0, mut r1) = (m as i128, (a % m) as i128);
    let (mut t0, mut t1) = (0i128, 1i128);
    while r1 != 0 {
        let q = r0 / r1;
        (r0, r1) = (r1, r0 - q * r1);
        (t0, t1) = (t1, t0 - q * t1);
    }
    if r0 != 1 {
        return None;
    }
    let mut t = t0 % m as i128;
    if t < 0 {
        t += m as i128;
    }
    Some(t as u128)
}

/// Deterministic Miller-Rabin. The seven-base set is exact for 64-bit
/// inputs; wider inputs fall back to a fixed battery of small-prime bases
/// (no random witnesses, so behaviour is reproducible).
pub(crate) fn is_prime(n: u128) -> bool {
    if n < 2 {
        return false;
    }
    for &p in &[2u128, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n == p {
            return true;
        }
        if n % p == 0 {
            return false;
        }
    }
    let d = n - 1;
    let s = d.trailing_zeros();
    let d = d >> s;
    let witness = |a: u128| -> bool {
        // true = composite witnessed
        let mut x = powmod(a % n, d, n);
        if x == 1 || x == n - 1 {
            return false;
        }
        for _ in 1..s {
            x = mulmod(x, x, n);
            if x == n - 1 {
                return false;
            }
        }
        true
    };
    let bases: &[u128] = if n <= u64::MAX as u128 {
        &[2, 325, 9375, 28178, 450775, 9780504, 1795265022]
    } else {
        &[
            2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79,
            83, 89, 97, 101, 103, 107, 109, 113,
        ]
    };
    !bases.iter().any(|&a| a % n != 0 && witness(a))
}

/// Trial-division factorization with a primality finish. Good for the sizes
/// this crate meets (prime powers, report moduli); gives up loudly past the
/// trial bound rather than returning something wrong.
pub(crate) fn factorize(mut n: u128) -> Option<Vec<(u128, u32)>> {
    const TRIAL_BOUND: u128 = 1 << 20;
    let mut out = Vec::new();
    for p in std::iter::once(2u128).chain((3..).step_by(2)) {
        if p > TRIAL_BOUND || p * p > n {
            break;
        }
        let mut e = 0;
        while n % p == 0 {
            n /= p;
            e += 1;
        }
        if e > 0 {
            out.push((p, e));
        }
    }
    if n == 1 {
        return Some(out);
    }
    if is_prime(n) {
        out.push((n, 1));
        return Some(out);
    }
    // Perfect-power remainder (p^e with p above the trial bound)?
    for e in (2..=7u32).rev() {
        if let Some(r) = iroot(n, e) {
            if r.checked_pow(e) == Some(n) && is_prime(r) {
                out.push((r, e));
                return Some(out);
            }
        }
    }
    None
}

/// Floor of the integer e-th root by Newton iteration; `None` only when an
/// intermediate power overflows. Callers verify exactness themselves.
pub(crate) fn iroot(n: u128, e: u32) -> Option<u128> {
    if n == 0 {
        return Some(0);
    }
    let bits = 128 - n.leading_zeros();
    let mut x = 1u128 << (bits / e + 1);
    loop {
        let xe1 = x.checked_pow(e - 1)?;
        let next = ((e as u128 - 1) * x + n / xe1) / e as u128;
        if next >= x {
            return Some(x);
        }
        x = next;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mulmod_wide_matches_bigint() {
        use num_bigint::BigUint;
        let m = (1u128 << 126) + 2731;
        let pairs = [
            (m - 1, m - 1),
            (m - 1, 2),
            (3, m / 2),
            (1u128 << 100, (1u128 << 90) + 7),
        ];
        for &(a, b) in &pairs {
            let want = (BigUint::from(a) * BigUint::from(b)) % BigUint::from(m);
            let got = BigUint::from(mulmod(a % m, b % m, m));
            assert_eq!(got, want, "a={a} b={b}");
        }
    }

    #[test]
    fn invmod_round_trips() {
        let m = 3u128.pow(30);
        for a in [1u128, 2, 7, 12346, m - 2] {
            let inv = invmod(a, m).unwrap();
            assert_eq!(mulmod(a, inv, m), 1);
        }
        assert_eq!(invmod(3, m), None);
        assert_eq!(invmod(5, 1), Some(0));
    }

    #[test]
    fn miller_rabin_small_range() {
        let sieve_limit = 10_000usize;
        let mut composite = vec![false; sieve_limit + 1];
        for i in 2..=sieve_limit {
            if !composite[i] {
                for j in (i * i..=sieve_limit).step_by(i) {
                    composite[j] = true;
                }
            }
        }
        for n in 2..=sieve_limit {
            assert_eq!(is_prime(n as u128), !composite[n], "n={n}");
        }
        assert!(is_prime((1u128 << 61) - 1));
        assert!(!is_prime((1u128 << 61) - 3));
    }

    #[test]
    fn factorize_prime_powers_and_mixed() {
        assert_eq!(factorize(1), Some(vec![]));
        assert_eq!(factorize(9), Some(vec![(3, 2)]));
        assert_eq!(factorize(3u128.pow(24)), Some(vec![(3, 24)]));
        assert_eq!(factorize(360), Some(vec![(2, 3), (3, 2), (5, 1)]));
        let p = 1_000_003u128;
        assert_eq!(factorize(p * p), Some(vec![(p, 2)]));
    }
}
