//! Kloosterman sums S(n, a; q) over odd prime powers.
//!
//! S(n, a; q) = sum over units b mod q of e((n b + a b*)/q), with b* the
//! inverse of b. The sum is real (b and b* pair up), and for q = p^k with
//! k >= 2 and p coprime to n a it collapses to a two-term closed form:
//!
//! ```text
//! S(n, a; q) = 2 (l|p)^k sqrt(q) * cos(4 pi l / q)      q = 1 (mod 4)
//!            = 2 (l|p)^k sqrt(q) * -sin(4 pi l / q)     q = 3 (mod 4)
//! ```
//!
//! where l^2 = n a (mod q), and S vanishes when n a is a non-residue.
//! When p | n (k >= 2 still) the sum vanishes; at n = 0 it degenerates to
//! a Ramanujan sum. [`KloostermanQuery::evaluate`] routes between these
//! cases; [`KloostermanQuery::brute_force`] is the direct-summation oracle
//! everything is checked against.

use rayon::prelude::*;

use crate::accum::{par_sum2, Neumaier};
use crate::arith::{factorize, gcd, invmod, mulmod};
use crate::modular::{legendre_symbol, PrimePowerModulus};
use crate::{Error, Result};

/// Direct summation refuses moduli past this point (the term count is q).
pub const BRUTE_FORCE_CEILING: u128 = 10_000_000;

/// Largest imaginary part tolerated when the (mathematically real) brute
/// sum is accumulated in floating point.
const IMAG_TOLERANCE: f64 = 1e-6;

/// How a Kloosterman value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum Method {
    BruteForce,
    ExplicitFormula,
    VanishingRule,
    RamanujanRule,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            Method::BruteForce => "BruteForce",
            Method::ExplicitFormula => "ExplicitFormula",
            Method::VanishingRule => "VanishingRule",
            Method::RamanujanRule => "RamanujanRule",
        };
        f.write_str(name)
    }
}

/// A Kloosterman value together with how it was computed. `exact_zero`
/// marks values that are zero by theorem, not by cancellation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KloostermanValue {
    pub value: f64,
    pub exact_zero: bool,
    pub method: Method,
}

/// S(n, a; q) with a a unit modulo p (checked at construction).
#[derive(Debug, Clone, Copy)]
pub struct KloostermanQuery {
    n: u128,
    a: u128,
    modulus: PrimePowerModulus,
}

impl KloostermanQuery {
    pub fn new(n: u128, a: u128, modulus: PrimePowerModulus) -> Result<Self> {
        if !modulus.is_unit(a % modulus.q()) {
            return Err(Error::NotAUnit {
                value: a % modulus.q(),
                modulus: modulus.q(),
            });
        }
        Ok(Self { n, a, modulus })
    }

    pub fn n(&self) -> u128 {
        self.n
    }

    pub fn a(&self) -> u128 {
        self.a
    }

    pub fn modulus(&self) -> &PrimePowerModulus {
        &self.modulus
    }

    /// Direct summation over the units, with the inverse found per term.
    /// The imaginary part is accumulated too and asserted small rather
    /// than assumed away. O(q log q); refuses q past
    /// [`BRUTE_FORCE_CEILING`].
    pub fn brute_force(&self) -> Result<KloostermanValue> {
        let q = self.modulus.q();
        if q > BRUTE_FORCE_CEILING {
            return Err(Error::TooLarge {
                what: "brute-force modulus",
                size: q,
                ceiling: BRUTE_FORCE_CEILING,
            });
        }
        let q64 = q as u64;
        let p64 = self.modulus.p() as u64;
        let n = (self.n % q) as u64;
        let a = (self.a % q) as u64;
        let (re, im) = par_sum2(1, q64, |b| {
            if b % p64 == 0 {
                return (0.0, 0.0);
            }
            let binv = invmod(b as u128, q).expect("unit") as u64;
            let r = (mulmod64(n, b, q64) + mulmod64(a, binv, q64)) % q64;
            angle_terms(r as u128, q)
        });
        assert!(
            im.abs() <= IMAG_TOLERANCE,
            "imaginary part {im} of a Kloosterman sum exceeds {IMAG_TOLERANCE}"
        );
        Ok(KloostermanValue {
            value: re,
            exact_zero: false,
            method: Method::BruteForce,
        })
    }

    /// The two-term closed form; k >= 2 and p coprime to n a only.
    /// Exact zero when n a is a quadratic non-residue mod p.
    pub fn explicit_formula(&self) -> Result<KloostermanValue> {
        let (p, k, q) = (self.modulus.p(), self.modulus.k(), self.modulus.q());
        if k < 2 {
            return Err(Error::NeedsBruteForce);
        }
        let v = mulmod(self.n % q, self.a % q, q);
        if v % p == 0 {
            return Err(Error::NotCoprimeToP { p });
        }
        if legendre_symbol(v as i128, p) == -1 {
            return Ok(KloostermanValue {
                value: 0.0,
                exact_zero: true,
                method: Method::ExplicitFormula,
            });
        }
        let l = self.modulus.sqrt(v).expect("v is a unit residue").value();
        let sign = if k % 2 == 1 {
            legendre_symbol(l as i128, p) as f64
        } else {
            1.0
        };
        let theta = 4.0 * std::f64::consts::PI * (l as f64) / (q as f64);
        let oscillation = if q % 4 == 1 { theta.cos() } else { -theta.sin() };
        Ok(KloostermanValue {
            value: 2.0 * sign * (q as f64).sqrt() * oscillation,
            exact_zero: false,
            method: Method::ExplicitFormula,
        })
    }

    /// Routes to the cheapest valid path: Ramanujan degeneration at
    /// q | n, the vanishing rule for p | n (k >= 2), the closed form for
    /// unit n a (k >= 2), and brute force for prime moduli.
    pub fn evaluate(&self) -> Result<KloostermanValue> {
        let (p, k, q) = (self.modulus.p(), self.modulus.k(), self.modulus.q());
        let n = self.n % q;
        if n == 0 {
            let c = ramanujan(self.a, q)?;
            return Ok(KloostermanValue {
                value: c as f64,
                exact_zero: c == 0,
                method: Method::RamanujanRule,
            });
        }
        if k == 1 {
            return self.brute_force();
        }
        if n % p == 0 {
            return Ok(KloostermanValue {
                value: 0.0,
                exact_zero: true,
                method: Method::VanishingRule,
            });
        }
        self.explicit_formula()
    }

    /// |S| against the divisor-bound envelope d(q) sqrt(gcd(n, q) q), and
    /// the sharper 2 sqrt(q) available from the closed form when k >= 2
    /// and n is a unit.
    pub fn weil_check(&self) -> Result<WeilCheck> {
        let q = self.modulus.q();
        let k = self.modulus.k();
        let value = self.evaluate()?.value;
        let g = gcd(self.n % q, q);
        let g = if g == 0 { q } else { g };
        let bound = (k as f64 + 1.0) * ((g as f64) * (q as f64)).sqrt();
        let sharp = (k >= 2 && g == 1).then(|| 2.0 * (q as f64).sqrt());
        Ok(WeilCheck {
            value,
            bound,
            ok: value.abs() <= bound,
            sharp_bound: sharp,
            sharp_ok: sharp.map(|b| value.abs() <= b).unwrap_or(true),
        })
    }
}

/// Result of [`KloostermanQuery::weil_check`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeilCheck {
    pub value: f64,
    pub bound: f64,
    pub ok: bool,
    /// 2 sqrt(q), present when the closed form applies (k >= 2, unit n).
    pub sharp_bound: Option<f64>,
    pub sharp_ok: bool,
}

/// Ramanujan sum c_q(a) = mu(q/g) phi(q) / phi(q/g) with g = gcd(a, q);
/// an exact integer for any q >= 1. Factors q by trial division, so very
/// wide q with no small factors are rejected as [`Error::Unfactorable`].
pub fn ramanujan(a: u128, q: u128) -> Result<i128> {
    if q == 0 {
        return Err(Error::BadInput {
            what: "ramanujan",
            why: "modulus must be positive".into(),
        });
    }
    if q == 1 {
        return Ok(1);
    }
    let g = match a % q {
        0 => q,
        r => gcd(r, q),
    };
    let qg = q / g;
    let factors = factorize(q).ok_or(Error::Unfactorable(q))?;
    // mu(q/g): zero on a repeated factor, else parity of the factor count
    let mut mu: i128 = 1;
    let mut phi_q: u128 = 1;
    let mut phi_qg: u128 = 1;
    for &(p, e) in &factors {
        phi_q *= (p - 1) * p.pow(e - 1);
        let mut eg = 0u32;
        let mut rest = qg;
        while rest % p == 0 {
            rest /= p;
            eg += 1;
        }
        match eg {
            0 => {}
            1 => {
                mu = -mu;
                phi_qg *= p - 1;
            }
            _ => return Ok(0),
        }
    }
    Ok(mu * (phi_q / phi_qg) as i128)
}

/// The oracle sweep table: S(v, 1; q) for every v in [0, q). Because
/// S(n, a; q) = S(n a, 1; q) (substitute b -> a b), this one vector holds
/// the brute-force value of every pair (n, a) with a a unit.
///
/// Built with a batch-inverted unit table and a shared cosine table;
/// chunk layout and term order are fixed, so the result does not depend
/// on the thread count. Memory is O(q); the ceiling is the same as for
/// single brute-force sums.
pub fn brute_force_table(modulus: &PrimePowerModulus) -> Result<Vec<f64>> {
    let q = modulus.q();
    if q > BRUTE_FORCE_CEILING {
        return Err(Error::TooLarge {
            what: "oracle table modulus",
            size: q,
            ceiling: BRUTE_FORCE_CEILING,
        });
    }
    let q64 = q as u64;
    let p64 = modulus.p() as u64;
    let inv = batch_inverses(q64, p64);
    let cos: Vec<f64> = (0..q64).map(|r| angle_terms(r as u128, q).0).collect();
    let units: Vec<u64> = (1..q64).filter(|b| b % p64 != 0).collect();
    let mut table = vec![0.0f64; q64 as usize];
    table
        .par_iter_mut()
        .enumerate()
        .for_each(|(v, out)| {
            let v = v as u64;
            let mut acc = Neumaier::default();
            for &b in &units {
                let r = (mulmod64(v, b, q64) + inv[b as usize] as u64) % q64;
                acc.add(cos[r as usize]);
            }
            *out = acc.total();
        });
    Ok(table)
}

/// Inverses of all units modulo q as a dense table (0 at non-units),
/// by blockwise Montgomery batch inversion: three multiplications plus a
/// shared egcd per block of units.
fn batch_inverses(q: u64, p: u64) -> Vec<u32> {
    debug_assert!(q <= u32::MAX as u64);
    const BLOCK: usize = 1 << 12;
    let mut inv = vec![0u32; q as usize];
    let blocks: Vec<(u64, u64)> = (1..q)
        .step_by(BLOCK)
        .map(|lo| (lo, (lo + BLOCK as u64).min(q)))
        .collect();
    let results: Vec<(u64, Vec<(u32, u32)>)> = blocks
        .into_par_iter()
        .map(|(lo, hi)| {
            let units: Vec<u64> = (lo..hi).filter(|b| b % p != 0).collect();
            let mut prefix = Vec::with_capacity(units.len());
            let mut acc = 1u64;
            for &u in &units {
                acc = mulmod64(acc, u, q);
                prefix.push(acc);
            }
            let mut run_inv = invmod(acc as u128, q as u128).expect("product of units") as u64;
            let mut out = Vec::with_capacity(units.len());
            for j in (0..units.len()).rev() {
                let before = if j == 0 { 1 } else { prefix[j - 1] };
                out.push((units[j] as u32, mulmod64(run_inv, before, q) as u32));
                run_inv = mulmod64(run_inv, units[j], q);
            }
            (lo, out)
        })
        .collect();
    for (_, pairs) in results {
        for (b, binv) in pairs {
            inv[b as usize] = binv;
        }
    }
    inv
}

#[inline]
fn mulmod64(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

/// cos and sin of 2 pi r / q, the single place the angle is formed so all
/// paths round identically.
#[inline]
pub(crate) fn angle_terms(r: u128, q: u128) -> (f64, f64) {
    let theta = std::f64::consts::TAU * (r as f64) / (q as f64);
    let (s, c) = theta.sin_cos();
    (c, s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn query(n: u128, a: u128, p: u128, k: u32) -> KloostermanQuery {
        KloostermanQuery::new(n, a, PrimePowerModulus::new(p, k).unwrap()).unwrap()
    }

    #[test]
    fn brute_force_frozen_values() {
        // S(1, 1; 3) = -1: the two unit terms are both cos(4 pi/3)
        let v = query(1, 1, 3, 1).brute_force().unwrap();
        assert!((v.value + 1.0).abs() < 1e-12);
        // S(0, 1; 9) = c_9(1) = 0
        let v = query(0, 1, 3, 2).brute_force().unwrap();
        assert!(v.value.abs() < 1e-12);
    }

    #[test]
    fn explicit_formula_frozen_value() {
        // S(1, 1; 9) = 6 cos(4 pi / 9)
        let want = 6.0 * (4.0 * std::f64::consts::PI / 9.0).cos();
        let v = query(1, 1, 3, 2).explicit_formula().unwrap();
        assert!((v.value - want).abs() < 1e-12);
        assert!((v.value - 1.041_889_066_001_582_5).abs() < 1e-12);
        let brute = query(1, 1, 3, 2).brute_force().unwrap();
        assert!((v.value - brute.value).abs() < 1e-9);
    }

    #[test]
    fn explicit_matches_brute_on_small_grids() {
        for (p, k) in [(3u128, 3u32), (5, 2), (7, 2), (3, 4)] {
            let m = PrimePowerModulus::new(p, k).unwrap();
            let q = m.q();
            for n in 1..q {
                for a in (1..q).filter(|a| a % p != 0) {
                    let query = KloostermanQuery::new(n, a, m).unwrap();
                    let fast = query.evaluate().unwrap();
                    let slow = query.brute_force().unwrap();
                    assert!(
                        (fast.value - slow.value).abs() <= 1e-6 * (q as f64).sqrt(),
                        "S({n},{a};{m}): {} vs {}",
                        fast.value,
                        slow.value
                    );
                }
            }
        }
    }

    #[test]
    fn vanishing_rule_and_ramanujan_route() {
        let v = query(3, 2, 3, 3).evaluate().unwrap();
        assert!(v.exact_zero && v.method == Method::VanishingRule);
        let brute = query(3, 2, 3, 3).brute_force().unwrap();
        assert!(brute.value.abs() < 1e-9);

        // n = 0 mod q degenerates to a Ramanujan sum
        let v = query(0, 5, 3, 2).evaluate().unwrap();
        assert!(v.exact_zero && v.method == Method::RamanujanRule);
        let v = query(27, 5, 3, 3).evaluate().unwrap();
        assert!(v.exact_zero && v.method == Method::RamanujanRule);
        // k = 1: S(0, a; p) = mu(p) = -1
        let v = query(0, 2, 7, 1).evaluate().unwrap();
        assert_eq!(v.value, -1.0);
        assert!(!v.exact_zero && v.method == Method::RamanujanRule);
    }

    #[test]
    fn ramanujan_frozen_values() {
        assert_eq!(ramanujan(1, 9).unwrap(), 0);
        assert_eq!(ramanujan(1, 3).unwrap(), -1);
        assert_eq!(ramanujan(9, 9).unwrap(), 6);
        assert_eq!(ramanujan(0, 9).unwrap(), 6);
        assert_eq!(ramanujan(5, 1).unwrap(), 1);
        assert_eq!(ramanujan(2, 12).unwrap(), 2);
        assert_eq!(ramanujan(6, 12).unwrap(), -4);
    }

    #[test]
    fn ramanujan_matches_brute_on_prime_powers() {
        for (p, k) in [(3u128, 1u32), (3, 2), (3, 3), (5, 2), (7, 1)] {
            let m = PrimePowerModulus::new(p, k).unwrap();
            for a in 0..m.q() {
                let g = if a == 0 { m.q() } else { gcd(a, m.q()) };
                // brute force: sum of cos(2 pi a x / q) over units x
                let mut acc = 0.0f64;
                for x in (1..m.q()).filter(|x| m.is_unit(*x)) {
                    acc += angle_terms(mulmod(a, x, m.q()), m.q()).0;
                }
                let want = ramanujan(a, m.q()).unwrap();
                assert!(
                    (acc - want as f64).abs() < 1e-8,
                    "c_{}({a}) = {want}, brute {acc}, g={g}",
                    m.q()
                );
            }
        }
    }

    #[test]
    fn query_rejects_non_unit_a() {
        let m = PrimePowerModulus::new(3, 2).unwrap();
        assert!(matches!(
            KloostermanQuery::new(1, 3, m),
            Err(Error::NotAUnit { value: 3, modulus: 9 })
        ));
    }

    #[test]
    fn explicit_formula_preconditions() {
        assert!(matches!(
            query(1, 1, 7, 1).explicit_formula(),
            Err(Error::NeedsBruteForce)
        ));
        assert!(matches!(
            query(3, 1, 3, 2).explicit_formula(),
            Err(Error::NotCoprimeToP { p: 3 })
        ));
    }

    #[test]
    fn brute_force_ceiling() {
        // 3^15 = 14 348 907 exceeds the ceiling
        let m = PrimePowerModulus::new(3, 15).unwrap();
        let q = KloostermanQuery::new(1, 1, m).unwrap();
        assert!(matches!(q.brute_force(), Err(Error::TooLarge { .. })));
        // ... but the closed form is still fine
        assert!(q.explicit_formula().is_ok());
    }

    #[test]
    fn multiplier_shift_is_exact() {
        // S(m n, a; q) and S(n, a m; q) share the product n m a mod q,
        // so the formula path returns bit-identical floats.
        let m = PrimePowerModulus::new(7, 3).unwrap();
        for (n, a, mult) in [(5u128, 2u128, 3u128), (11, 4, 9), (2, 1, 100)] {
            let lhs = KloostermanQuery::new(mult * n, a, m).unwrap();
            let rhs = KloostermanQuery::new(n, (a * mult) % m.q(), m).unwrap();
            assert_eq!(
                lhs.evaluate().unwrap().value.to_bits(),
                rhs.evaluate().unwrap().value.to_bits()
            );
        }
    }

    #[test]
    fn brute_force_symmetry_in_n_and_a() {
        let m = PrimePowerModulus::new(5, 3).unwrap();
        for (n, a) in [(2u128, 3u128), (7, 11), (4, 9)] {
            let lhs = KloostermanQuery::new(n, a, m).unwrap().brute_force().unwrap();
            let rhs = KloostermanQuery::new(a, n, m).unwrap().brute_force().unwrap();
            assert!((lhs.value - rhs.value).abs() < 1e-9);
        }
    }

    #[test]
    fn table_agrees_with_single_shots() {
        let m = PrimePowerModulus::new(3, 4).unwrap();
        let table = brute_force_table(&m).unwrap();
        assert_eq!(table.len(), 81);
        for (n, a) in [(1u128, 1u128), (2, 5), (10, 7), (0, 1), (27, 2)] {
            let direct = KloostermanQuery::new(n, a, m).unwrap().brute_force().unwrap();
            let v = mulmod(n % m.q(), a, m.q()) as usize;
            assert!(
                (table[v] - direct.value).abs() < 1e-9,
                "table[{v}] vs S({n},{a})"
            );
        }
    }

    #[test]
    fn weil_bound_holds_on_primes() {
        for p in [3u128, 5, 7, 11, 13, 97, 997] {
            let m = PrimePowerModulus::new(p, 1).unwrap();
            for n in [1u128, 2, 5] {
                let w = KloostermanQuery::new(n, 1, m).unwrap().weil_check().unwrap();
                assert!(w.ok, "p={p}, n={n}");
                assert!(w.value.abs() <= 2.0 * (p as f64).sqrt() + 1e-9);
            }
        }
    }
}
