//! Arithmetic modulo a fixed odd prime power q = p^k.
//!
//! [`PrimePowerModulus`] validates its parameters once (p an odd prime,
//! p^k below 2^127) so the operations on [`Residue`] can stay unchecked and
//! fast. Square roots combine Tonelli-Shanks modulo p with precision-doubling
//! Newton lifting; factorials come in valuation ([`factorial_valuation`]) and
//! unit-part ([`PrimePowerModulus::factorial_unit`]) halves so that n! can be
//! handled modulo p^k even when p divides it.

use crate::arith::{self, addmod, invmod, mulmod, powmod, submod};
use crate::{Error, Result};

/// An odd prime power q = p^k with q < 2^127.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PrimePowerModulus {
    p: u128,
    k: u32,
    q: u128,
}

impl PrimePowerModulus {
    /// Validates that `p` is an odd prime, `k >= 1`, and p^k fits the
    /// supported width. Construction is the only place these checks run.
    pub fn new(p: u128, k: u32) -> Result<Self> {
        if k == 0 {
            return Err(Error::ZeroExponent);
        }
        if p < 3 || p % 2 == 0 || !arith::is_prime(p) {
            return Err(Error::NotOddPrime(p));
        }
        let mut q = 1u128;
        for _ in 0..k {
            q = q
                .checked_mul(p)
                .filter(|&q| q < arith::MAX_MODULUS)
                .ok_or(Error::ModulusTooWide { p, k })?;
        }
        Ok(Self { p, k, q })
    }

    pub fn p(&self) -> u128 {
        self.p
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn q(&self) -> u128 {
        self.q
    }

    /// Euler phi: p^(k-1) (p - 1).
    pub fn phi(&self) -> u128 {
        (self.q / self.p) * (self.p - 1)
    }

    pub fn is_unit(&self, n: u128) -> bool {
        n % self.p != 0
    }

    /// Reduces an unsigned integer into this modulus.
    pub fn residue(&self, n: u128) -> Residue {
        Residue {
            value: n % self.q,
            modulus: self.q,
        }
    }

    /// Reduces a signed integer (Euclidean remainder, result in [0, q)).
    pub fn residue_int(&self, n: i128) -> Residue {
        Residue {
            value: n.rem_euclid(self.q as i128) as u128,
            modulus: self.q,
        }
    }

    /// Same prime, exponent `k`; fails if the power leaves the supported
    /// width. Handy for moving to the buffered precision p^(k + delta).
    pub fn with_exponent(&self, k: u32) -> Result<Self> {
        if k == self.k {
            return Ok(*self);
        }
        if k == 0 {
            return Err(Error::ZeroExponent);
        }
        let mut q = 1u128;
        for _ in 0..k {
            q = q
                .checked_mul(self.p)
                .filter(|&q| q < arith::MAX_MODULUS)
                .ok_or(Error::ModulusTooWide { p: self.p, k })?;
        }
        Ok(Self { p: self.p, k, q })
    }

    /// Canonical square root of a unit `a` modulo q: the root r with
    /// 2r < q. Errors: [`Error::NotAUnit`] when p | a, [`Error::NotAResidue`]
    /// when a is a non-residue modulo p.
    pub fn sqrt(&self, a: u128) -> Result<Residue> {
        let a = a % self.q;
        if a % self.p == 0 {
            return Err(Error::NotAUnit {
                value: a,
                modulus: self.q,
            });
        }
        let r1 = sqrt_mod_prime(a % self.p, self.p).map_err(|_| Error::NotAResidue {
            value: a,
            modulus: self.q,
        })?;
        // Newton lifting x -> (x + a/x)/2 doubles the precision per step.
        let mut r = r1;
        let mut e = 1u32;
        while e < self.k {
            e = (2 * e).min(self.k);
            let m = self.p.pow(e);
            let rinv = invmod(r, m).expect("root of a unit is a unit");
            let half = invmod(2, m).expect("2 is a unit mod an odd prime power");
            r = mulmod(addmod(r % m, mulmod(a % m, rinv, m), m), half, m);
        }
        let r = r.min(self.q - r);
        Ok(self.residue(r))
    }

    /// Unit part of n! modulo q: the residue U with n! = p^v * U and
    /// v = [`factorial_valuation`]`(n, p)`.
    ///
    /// Works level by level on n, n/p, n/p^2, ...; within a level the
    /// prime-free product over a full period of length q is -1 (the
    /// generalized Wilson theorem for odd prime powers), so only the
    /// partial block at the end is multiplied out. O(n) overall.
    pub fn factorial_unit(&self, n: u64) -> Residue {
        let mut acc = 1u128;
        let mut m = n as u128;
        while m > 0 {
            let blocks = m / self.q;
            if blocks % 2 == 1 {
                acc = self.q - acc; // acc is a unit, never 0
            }
            let rem = m % self.q;
            let mut i = 1u128;
            while i <= rem {
                if i % self.p != 0 {
                    acc = mulmod(acc, i, self.q);
                }
                i += 1;
            }
            m /= self.p;
        }
        self.residue(acc)
    }
}

impl std::fmt::Display for PrimePowerModulus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}^{}", self.p, self.k)
    }
}

/// A value reduced modulo a prime power. Carries its modulus so mixed-modulus
/// arithmetic panics instead of silently wrapping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Residue {
    value: u128,
    modulus: u128,
}

impl Residue {
    pub fn value(&self) -> u128 {
        self.value
    }

    pub fn modulus(&self) -> u128 {
        self.modulus
    }

    /// Square-and-multiply power; exponent 0 gives 1.
    pub fn pow(self, exp: u128) -> Residue {
        Residue {
            value: powmod(self.value, exp, self.modulus),
            modulus: self.modulus,
        }
    }

    /// Inverse via extended Euclid; [`Error::NotInvertible`] off the units.
    pub fn inverse(self) -> Result<Residue> {
        let value = invmod(self.value, self.modulus).ok_or(Error::NotInvertible {
            value: self.value,
            modulus: self.modulus,
        })?;
        Ok(Residue {
            value,
            modulus: self.modulus,
        })
    }

    fn check_same(self, rhs: Residue) {
        assert_eq!(
            self.modulus, rhs.modulus,
            "residues of distinct moduli ({} vs {})",
            self.modulus, rhs.modulus
        );
    }
}

impl std::ops::Add for Residue {
    type Output = Residue;
    fn add(self, rhs: Residue) -> Residue {
        self.check_same(rhs);
        Residue {
            value: addmod(self.value, rhs.value, self.modulus),
            modulus: self.modulus,
        }
    }
}

impl std::ops::Sub for Residue {
    type Output = Residue;
    fn sub(self, rhs: Residue) -> Residue {
        self.check_same(rhs);
        Residue {
            value: submod(self.value, rhs.value, self.modulus),
            modulus: self.modulus,
        }
    }
}

impl std::ops::Mul for Residue {
    type Output = Residue;
    fn mul(self, rhs: Residue) -> Residue {
        self.check_same(rhs);
        Residue {
            value: mulmod(self.value, rhs.value, self.modulus),
            modulus: self.modulus,
        }
    }
}

impl std::ops::Neg for Residue {
    type Output = Residue;
    fn neg(self) -> Residue {
        Residue {
            value: if self.value == 0 {
                0
            } else {
                self.modulus - self.value
            },
            modulus: self.modulus,
        }
    }
}

impl std::fmt::Display for Residue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} mod {}", self.value, self.modulus)
    }
}

/// p-adic order with the order of 0 kept as a proper infinity instead of a
/// sentinel number. The derived `Ord` places every finite order below it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Valuation {
    Finite(u64),
    Infinite,
}

impl Valuation {
    pub fn is_finite(&self) -> bool {
        matches!(self, Valuation::Finite(_))
    }

    pub fn finite(&self) -> Option<u64> {
        match self {
            Valuation::Finite(v) => Some(*v),
            Valuation::Infinite => None,
        }
    }
}

impl std::fmt::Display for Valuation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Valuation::Finite(v) => write!(f, "{v}"),
            Valuation::Infinite => write!(f, "inf"),
        }
    }
}

/// Largest e with p^e | n; [`Valuation::Infinite`] for n = 0.
pub fn val_p(n: u128, p: u128) -> Valuation {
    assert!(p >= 2, "val_p needs p >= 2");
    if n == 0 {
        return Valuation::Infinite;
    }
    let mut n = n;
    let mut v = 0u64;
    while n % p == 0 {
        n /= p;
        v += 1;
    }
    Valuation::Finite(v)
}

/// Order of p in n!: sum of floor(n / p^j) over j >= 1 (Legendre).
pub fn factorial_valuation(n: u64, p: u128) -> u64 {
    assert!(p >= 2, "factorial_valuation needs p >= 2");
    let mut total = 0u64;
    let mut m = n as u128;
    while m > 0 {
        m /= p;
        total += m as u64;
    }
    total
}

/// Legendre symbol (n/p) for an odd prime p, via Euler's criterion.
/// `n` may be negative; the result is in {-1, 0, 1}.
pub fn legendre_symbol(n: i128, p: u128) -> i32 {
    debug_assert!(p >= 3 && p % 2 == 1);
    let n = n.rem_euclid(p as i128) as u128;
    if n == 0 {
        return 0;
    }
    let e = powmod(n, (p - 1) / 2, p);
    if e == 1 {
        1
    } else {
        -1
    }
}

/// Canonical square root modulo an odd prime: the root r with 2r < p.
/// Tonelli-Shanks with a deterministic non-residue scan, and the direct
/// exponent shortcut when p = 3 (mod 4).
pub fn sqrt_mod_prime(a: u128, p: u128) -> Result<u128> {
    let a = a % p;
    if a == 0 {
        return Ok(0);
    }
    if legendre_symbol(a as i128, p) == -1 {
        return Err(Error::NotAResidue { value: a, modulus: p });
    }
    let r = if p % 4 == 3 {
        powmod(a, (p + 1) / 4, p)
    } else {
        tonelli_shanks(a, p)
    };
    Ok(r.min(p - r))
}

fn tonelli_shanks(a: u128, p: u128) -> u128 {
    // p = 1 (mod 4), a a nonzero residue. Write p - 1 = 2^s * d, d odd.
    let s = (p - 1).trailing_zeros();
    let d = (p - 1) >> s;
    let z = (2u128..)
        .find(|&z| legendre_symbol(z as i128, p) == -1)
        .expect("an odd prime has a non-residue");
    let mut c = powmod(z, d, p);
    let mut x = powmod(a, (d + 1) / 2, p);
    let mut t = powmod(a, d, p);
    let mut m = s;
    while t != 1 {
        // order of t is 2^i with 0 < i < m
        let mut i = 0u32;
        let mut t2 = t;
        while t2 != 1 {
            t2 = mulmod(t2, t2, p);
            i += 1;
        }
        let b = powmod(c, 1u128 << (m - i - 1), p);
        x = mulmod(x, b, p);
        c = mulmod(b, b, p);
        t = mulmod(t, c, p);
        m = i;
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigUint;
    use proptest::prelude::*;

    #[test]
    fn construction_validates() {
        assert!(PrimePowerModulus::new(3, 2).is_ok());
        assert!(matches!(
            PrimePowerModulus::new(2, 5),
            Err(Error::NotOddPrime(2))
        ));
        assert!(matches!(
            PrimePowerModulus::new(9, 2),
            Err(Error::NotOddPrime(9))
        ));
        assert!(matches!(
            PrimePowerModulus::new(3, 0),
            Err(Error::ZeroExponent)
        ));
        // 3^81 has 129 bits
        assert!(matches!(
            PrimePowerModulus::new(3, 81),
            Err(Error::ModulusTooWide { .. })
        ));
        // 3^80 has ~126.8 bits and must construct
        assert!(PrimePowerModulus::new(3, 80).is_ok());
    }

    #[test]
    fn pow_inverse_legendre_frozen_values() {
        let m9 = PrimePowerModulus::new(3, 2).unwrap();
        assert_eq!(m9.residue(2).pow(3).value(), 8);
        let m7 = PrimePowerModulus::new(7, 1).unwrap();
        assert_eq!(m7.residue(3).inverse().unwrap().value(), 5);
        assert_eq!(legendre_symbol(2, 3), -1);
        assert_eq!(legendre_symbol(6, 3), 0);
        assert_eq!(legendre_symbol(-1, 5), 1);
        assert_eq!(legendre_symbol(-1, 7), -1);
    }

    #[test]
    fn inverse_rejects_non_units() {
        let m = PrimePowerModulus::new(3, 3).unwrap();
        assert!(matches!(
            m.residue(6).inverse(),
            Err(Error::NotInvertible { value: 6, modulus: 27 })
        ));
    }

    #[test]
    fn sqrt_frozen_values() {
        assert_eq!(sqrt_mod_prime(2, 7).unwrap(), 3);
        assert_eq!(sqrt_mod_prime(0, 7).unwrap(), 0);
        assert!(sqrt_mod_prime(3, 7).is_err());
        let m49 = PrimePowerModulus::new(7, 2).unwrap();
        // roots of 2 mod 49 are 10 and 39; canonical is the smaller
        assert_eq!(m49.sqrt(2).unwrap().value(), 10);
        assert!(matches!(m49.sqrt(7), Err(Error::NotAUnit { .. })));
        assert!(matches!(m49.sqrt(3), Err(Error::NotAResidue { .. })));
    }

    #[test]
    fn sqrt_all_units_small_moduli() {
        for (p, k) in [(3u128, 4u32), (5, 3), (7, 2), (11, 2), (13, 1)] {
            let m = PrimePowerModulus::new(p, k).unwrap();
            for a in 1..m.q() {
                if !m.is_unit(a) {
                    continue;
                }
                match m.sqrt(a) {
                    Ok(r) => {
                        assert_eq!((r * r).value(), a, "sqrt({a}) mod {m}");
                        assert!(2 * r.value() < m.q(), "canonical root");
                    }
                    Err(Error::NotAResidue { .. }) => {
                        assert_eq!(legendre_symbol(a as i128, p), -1);
                    }
                    Err(e) => panic!("unexpected error {e} for a={a}"),
                }
            }
        }
    }

    #[test]
    fn valuations() {
        assert_eq!(val_p(54, 3), Valuation::Finite(3));
        assert_eq!(val_p(1, 3), Valuation::Finite(0));
        assert_eq!(val_p(0, 3), Valuation::Infinite);
        assert!(Valuation::Finite(1_000_000) < Valuation::Infinite);
        assert_eq!(factorial_valuation(10, 3), 4);
        assert_eq!(factorial_valuation(100, 5), 24);
        assert_eq!(factorial_valuation(0, 3), 0);
        assert_eq!(factorial_valuation(2, 3), 0);
    }

    #[test]
    fn factorial_unit_frozen_and_exact() {
        let m9 = PrimePowerModulus::new(3, 2).unwrap();
        assert_eq!(m9.factorial_unit(3).value(), 2);

        // exact cross-check against big-integer factorials
        for (p, k) in [(3u128, 5u32), (5, 4), (7, 3)] {
            let m = PrimePowerModulus::new(p, k).unwrap();
            let q = BigUint::from(m.q());
            let mut fact = BigUint::from(1u32);
            for n in 1..=300u64 {
                fact *= n;
                let v = factorial_valuation(n, p);
                let unit = &fact / BigUint::from(p).pow(v as u32);
                let want = (unit % &q)
                    .to_u64_digits()
                    .first()
                    .copied()
                    .unwrap_or(0) as u128;
                assert_eq!(m.factorial_unit(n).value(), want, "n={n}, q={m}");
            }
        }
    }

    #[test]
    fn factorial_unit_crosses_block_boundary() {
        // n beyond q exercises the Wilson sign for full blocks
        let m = PrimePowerModulus::new(3, 2).unwrap();
        let q = BigUint::from(9u32);
        let mut fact = BigUint::from(1u32);
        for n in 1..=100u64 {
            fact *= n;
            let v = factorial_valuation(n, 3);
            let unit = &fact / BigUint::from(3u32).pow(v as u32);
            let want = (unit % &q).to_u64_digits().first().copied().unwrap_or(0) as u128;
            assert_eq!(m.factorial_unit(n).value(), want, "n={n}");
        }
    }

    #[test]
    fn wide_modulus_arithmetic_round_trips() {
        // 3^80 is wider than 64 bits: exercises the shift-and-add multiply
        let m = PrimePowerModulus::new(3, 80).unwrap();
        let a = m.residue(u128::MAX / 5 - 1);
        let inv = a.inverse().unwrap();
        assert_eq!((a * inv).value(), 1);
        let r = m.sqrt((a * a).value()).unwrap();
        assert!(r == a || r == -a);
    }

    proptest! {
        #[test]
        fn pow_matches_bigint(base in 0u128..10_000, exp in 0u128..10_000) {
            let m = PrimePowerModulus::new(7, 5).unwrap();
            let got = m.residue(base).pow(exp).value();
            let want = BigUint::from(base).modpow(&BigUint::from(exp), &BigUint::from(m.q()));
            prop_assert_eq!(BigUint::from(got), want);
        }

        #[test]
        fn inverse_round_trips(a in 1u128..100_000) {
            let m = PrimePowerModulus::new(11, 7).unwrap();
            let r = m.residue(a);
            if m.is_unit(r.value()) {
                let inv = r.inverse().unwrap();
                prop_assert_eq!((r * inv).value(), 1);
                prop_assert_eq!(inv.inverse().unwrap(), r);
            } else {
                prop_assert!(r.inverse().is_err());
            }
        }

        #[test]
        fn sqrt_squares_back(a in 1u128..1_000_000, pk in 0usize..4) {
            let (p, k) = [(3u128, 12u32), (5, 9), (7, 7), (13, 5)][pk];
            let m = PrimePowerModulus::new(p, k).unwrap();
            let sq = (m.residue(a).pow(2)).value();
            if m.is_unit(a % m.q()) {
                let r = m.sqrt(sq).unwrap();
                prop_assert_eq!((r * r).value(), sq);
                prop_assert!(2 * r.value() < m.q());
            }
        }
    }
}
