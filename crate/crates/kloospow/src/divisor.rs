//! Divisor sums in arithmetic progressions and their error terms.
//!
//! D(X; q, a) sums the divisor function d(n) over n <= X in the class
//! n = a (mod q). Subtracting the equidistribution main term, the coprime
//! sum split evenly over the phi(q) unit classes, leaves the error
//!
//! ```text
//! E(X; q, a) = D(X; q, a) - (1/phi(q)) sum of d(n) over n <= X, p not | n
//! ```
//!
//! Both sums are exact integers computed by the hyperbola method in
//! O(sqrt(X)) arithmetic operations; [`divisor_sieve`] is the linear-space
//! oracle they are checked against. Only the final division by phi(q)
//! leaves the integers, with the quotient and remainder carried separately
//! so the near-total cancellation in E costs no precision.
//! [`error_scan`] maps E over all (or a seeded sample of) unit classes and
//! reports the scaling statistics.

use num_bigint::BigInt;
use num_traits::ToPrimitive;
use rayon::prelude::*;

use crate::arith::{invmod, iroot, mulmod};
use crate::modular::PrimePowerModulus;
use crate::sampler::Stream;
use crate::{Error, Result};

/// The sieve stores one 32-bit count per integer up to X.
pub const SIEVE_CEILING: u128 = 100_000_000;

/// Default residue budget for [`error_scan`].
pub const SCAN_BUDGET: u64 = 1_000_000;

/// The divisor sum D(X; q, a) over a fixed unit class a mod q.
#[derive(Debug, Clone, Copy)]
pub struct DivisorQuery {
    x: u128,
    a: u128,
    modulus: PrimePowerModulus,
}

impl DivisorQuery {
    /// X must be at least 2 and a must be a unit mod q.
    pub fn new(x: u128, a: u128, modulus: PrimePowerModulus) -> Result<Self> {
        if x < 2 {
            return Err(Error::BadInput {
                what: "divisor range bound",
                why: format!("X = {x} must be at least 2"),
            });
        }
        let a = a % modulus.q();
        if !modulus.is_unit(a) {
            return Err(Error::NotAUnit {
                value: a,
                modulus: modulus.q(),
            });
        }
        Ok(Self { x, a, modulus })
    }

    pub fn x(&self) -> u128 {
        self.x
    }

    pub fn a(&self) -> u128 {
        self.a
    }

    pub fn modulus(&self) -> &PrimePowerModulus {
        &self.modulus
    }
}

/// d(1..=X) by the double-loop sieve, exact in 32 bits; index 0 is unused.
/// Memory is 4(X+1) bytes, so X is capped at [`SIEVE_CEILING`].
pub fn divisor_sieve(x: u128) -> Result<Vec<u32>> {
    if x > SIEVE_CEILING {
        return Err(Error::TooLarge {
            what: "divisor sieve bound",
            size: x,
            ceiling: SIEVE_CEILING,
        });
    }
    let x = x as usize;
    let mut table = vec![0u32; x + 1];
    for u in 1..=x {
        for v in (u..=x).step_by(u) {
            table[v] += 1;
        }
    }
    Ok(table)
}

/// Exact D(X; q, a) by the hyperbola method: writing d(n) as the number of
/// pairs u v = n, the count splits into u <= sqrt(X) and v <= sqrt(X) legs
/// (identical by symmetry) minus the double-counted square block. Only u
/// coprime to p contribute, since u v = a (mod q) forces both factors to be
/// units. Runs in O(sqrt(X)) inversions mod q.
pub fn progression_sum(query: &DivisorQuery) -> u128 {
    let (x, a) = (query.x, query.a);
    let q = query.modulus.q();
    let p = query.modulus.p();
    let s = iroot(x, 2).expect("square root of a u128 never overflows");
    let mut legs: u128 = 0;
    let mut block: u128 = 0;
    for u in 1..=s {
        if u % p == 0 {
            continue;
        }
        let r = mulmod(a, invmod(u % q, q).expect("u is a unit"), q);
        legs += class_count(r, q, x / u);
        block += class_count(r, q, s);
    }
    2 * legs - block
}

/// Exact sum of d(n) over n <= X coprime to p, by the same hyperbola split
/// with both axes restricted: the count of v <= Y coprime to p is
/// Y - floor(Y/p). Returns 0 for X = 0.
pub fn coprime_sum(x: u128, modulus: &PrimePowerModulus) -> u128 {
    let p = modulus.p();
    let s = iroot(x, 2).expect("square root of a u128 never overflows");
    let mut legs: u128 = 0;
    for u in 1..=s {
        if u % p == 0 {
            continue;
        }
        let y = x / u;
        legs += y - y / p;
    }
    let side = s - s / p;
    2 * legs - side * side
}

/// D, the coprime total, and their exact-rational difference E evaluated
/// to floating precision.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ErrorTermResult {
    /// D(X; q, a), exact.
    pub d: u128,
    /// Numerator of the main term: the coprime divisor sum, exact.
    pub coprime_total: u128,
    /// phi(q), the main term's denominator.
    pub phi: u128,
    /// E = D - coprime_total / phi.
    pub e: f64,
    /// E q / X, the scale on which the error is expected to be O(1).
    pub normalized: f64,
}

/// E(X; q, a) = D(X; q, a) - coprime_sum(X) / phi(q). The difference is
/// formed exactly as (D phi - C) / phi, integer quotient and remainder
/// carried separately, so no cancellation happens in floating point.
pub fn error_term(query: &DivisorQuery) -> ErrorTermResult {
    let d = progression_sum(query);
    let coprime_total = coprime_sum(query.x, &query.modulus);
    let phi = query.modulus.phi();
    let num = BigInt::from(d) * BigInt::from(phi) - BigInt::from(coprime_total);
    let phib = BigInt::from(phi);
    let quot = &num / &phib;
    let rem = &num % &phib;
    let e = quot.to_f64().expect("BigInt to f64 is total")
        + rem.to_f64().expect("BigInt to f64 is total") / phi as f64;
    let normalized = e * query.modulus.q() as f64 / query.x as f64;
    ErrorTermResult {
        d,
        coprime_total,
        phi,
        e,
        normalized,
    }
}

/// One scanned residue class.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ResidueError {
    pub a: u128,
    pub d: u128,
    pub e: f64,
    pub normalized: f64,
}

/// A sweep of E(X; q, a) over unit classes with its summary statistics.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ErrorScan {
    pub x: u128,
    pub p: u128,
    pub k: u32,
    pub q: u128,
    pub phi: u128,
    /// Number of distinct residues scanned.
    pub scanned: u64,
    /// True when the units were sampled rather than enumerated.
    pub sampled: bool,
    /// The sampling seed; absent for exhaustive scans.
    pub seed: Option<u64>,
    pub max_abs_e: f64,
    pub max_normalized: f64,
    /// delta-hat = -log(max |E| q / X) / log X; infinite when E vanished
    /// everywhere. Report-only.
    pub delta_hat: f64,
    /// q / X^(2/3), the position in the admissible-modulus range.
    pub q_over_x23: f64,
    pub rows: Vec<ResidueError>,
}

/// Maps [`error_term`] over the unit classes mod q: all of them when
/// phi(q) fits the budget, otherwise a seeded sample of `budget` draws
/// (deduplicated, so `scanned` may come in slightly under). Rows are
/// ordered by residue and computed in parallel; every row is exact
/// integers plus one carried division, so the output is identical for any
/// thread count.
pub fn error_scan(x: u128, modulus: &PrimePowerModulus, budget: u64, seed: u64) -> Result<ErrorScan> {
    if budget == 0 {
        return Err(Error::BadInput {
            what: "scan budget",
            why: "budget must be at least 1".into(),
        });
    }
    // validate X once; per-residue queries below cannot fail
    DivisorQuery::new(x, 1, *modulus)?;
    let q = modulus.q();
    let phi = modulus.phi();
    let (units, sampled) = if phi <= budget as u128 {
        ((1..q).filter(|&a| modulus.is_unit(a)).collect::<Vec<_>>(), false)
    } else {
        let mut rng = Stream::new(seed, 0);
        let mut draws: Vec<u128> = (0..budget).map(|_| rng.unit(modulus)).collect();
        draws.sort_unstable();
        draws.dedup();
        (draws, true)
    };
    let rows: Vec<ResidueError> = units
        .par_iter()
        .map(|&a| {
            let query = DivisorQuery::new(x, a, *modulus).expect("unit residue");
            let result = error_term(&query);
            ResidueError {
                a,
                d: result.d,
                e: result.e,
                normalized: result.normalized,
            }
        })
        .collect();
    let max_abs_e = rows.iter().map(|r| r.e.abs()).fold(0.0, f64::max);
    let max_normalized = rows.iter().map(|r| r.normalized.abs()).fold(0.0, f64::max);
    let delta_hat = if max_normalized == 0.0 {
        f64::INFINITY
    } else {
        -max_normalized.ln() / (x as f64).ln()
    };
    Ok(ErrorScan {
        x,
        p: modulus.p(),
        k: modulus.k(),
        q,
        phi,
        scanned: rows.len() as u64,
        sampled,
        seed: sampled.then_some(seed),
        max_abs_e,
        max_normalized,
        delta_hat,
        q_over_x23: q as f64 / (x as f64).powf(2.0 / 3.0),
        rows,
    })
}

/// #{1 <= v <= bound : v = r (mod q)} for 0 <= r < q.
fn class_count(r: u128, q: u128, bound: u128) -> u128 {
    if r == 0 {
        bound / q
    } else if r > bound {
        0
    } else {
        (bound - r) / q + 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn modulus(p: u128, k: u32) -> PrimePowerModulus {
        PrimePowerModulus::new(p, k).unwrap()
    }

    fn sieve_progression(table: &[u32], x: u128, q: u128, a: u128) -> u128 {
        let mut total = 0u128;
        let mut n = if a == 0 { q } else { a };
        while n <= x {
            total += table[n as usize] as u128;
            n += q;
        }
        total
    }

    #[test]
    fn sieve_frozen_values() {
        let table = divisor_sieve(100).unwrap();
        assert_eq!(table[1], 1);
        assert_eq!(table[12], 6);
        assert_eq!(table[100], 9);
        let first_ten: u32 = table[1..=10].iter().sum();
        assert_eq!(first_ten, 27);
    }

    #[test]
    fn sieve_rejects_past_ceiling() {
        assert!(matches!(
            divisor_sieve(SIEVE_CEILING + 1),
            Err(Error::TooLarge { .. })
        ));
    }

    #[test]
    fn progression_frozen_value() {
        // n = 1, 4, 7, 10, 13, 16, 19: d-values 1 + 3 + 2 + 4 + 2 + 5 + 2
        let query = DivisorQuery::new(20, 1, modulus(3, 1)).unwrap();
        assert_eq!(progression_sum(&query), 19);
    }

    #[test]
    fn progression_empty_range() {
        let query = DivisorQuery::new(20, 25, modulus(3, 3)).unwrap();
        assert_eq!(progression_sum(&query), 0);
    }

    #[test]
    fn hyperbola_matches_sieve() {
        let x = 2000u128;
        let table = divisor_sieve(x).unwrap();
        for (p, k) in [(3u128, 2u32), (3, 3), (5, 2), (7, 1), (11, 1)] {
            let m = modulus(p, k);
            let q = m.q();
            for a in (1..q).filter(|&a| m.is_unit(a)) {
                let query = DivisorQuery::new(x, a, m).unwrap();
                assert_eq!(
                    progression_sum(&query),
                    sieve_progression(&table, x, q, a),
                    "D({x}; {q}, {a})"
                );
            }
            let coprime_oracle: u128 = (1..=x)
                .filter(|n| n % p != 0)
                .map(|n| table[n as usize] as u128)
                .sum();
            assert_eq!(coprime_sum(x, &m), coprime_oracle, "coprime sum mod {q}");
        }
    }

    #[test]
    fn coprime_frozen_values() {
        assert_eq!(coprime_sum(20, &modulus(3, 1)), 41);
        assert_eq!(coprime_sum(0, &modulus(3, 1)), 0);
        assert_eq!(coprime_sum(1, &modulus(3, 1)), 1);
    }

    #[test]
    fn error_term_frozen_value() {
        let query = DivisorQuery::new(20, 1, modulus(3, 1)).unwrap();
        let result = error_term(&query);
        assert_eq!(result.d, 19);
        assert_eq!(result.coprime_total, 41);
        assert_eq!(result.phi, 2);
        assert!((result.e + 1.5).abs() < 1e-15);
        assert!((result.normalized + 1.5 * 3.0 / 20.0).abs() < 1e-15);
    }

    #[test]
    fn degenerate_range_hits_a_single_term() {
        // X = q: the only n = a (mod q) with n <= X is a itself
        let m = modulus(3, 3);
        let table = divisor_sieve(27).unwrap();
        for a in [1u128, 5, 25] {
            let query = DivisorQuery::new(27, a, m).unwrap();
            assert_eq!(progression_sum(&query), table[a as usize] as u128);
        }
    }

    #[test]
    fn query_rejects_bad_inputs() {
        assert!(matches!(
            DivisorQuery::new(20, 3, modulus(3, 2)),
            Err(Error::NotAUnit { value: 3, modulus: 9 })
        ));
        assert!(matches!(
            DivisorQuery::new(1, 1, modulus(3, 2)),
            Err(Error::BadInput { .. })
        ));
    }

    #[test]
    fn partition_identity_over_all_classes() {
        let x = 1000u128;
        let table = divisor_sieve(x).unwrap();
        let total: u128 = table[1..=x as usize].iter().map(|&d| d as u128).sum();
        for (p, k) in [(3u128, 3u32), (5, 2)] {
            let m = modulus(p, k);
            let q = m.q();
            let mut partitioned = 0u128;
            let mut units = 0u128;
            for a in 0..q {
                if m.is_unit(a) {
                    partitioned += progression_sum(&DivisorQuery::new(x, a, m).unwrap());
                    units += 1;
                } else {
                    partitioned += sieve_progression(&table, x, q, a);
                }
            }
            assert_eq!(partitioned, total, "partition at q = {q}");
            assert_eq!(units, m.phi());
            assert_eq!(m.phi(), (p - 1) * p.pow(k - 1));
        }
    }

    #[test]
    fn progression_sum_is_monotone_in_x() {
        let m = modulus(3, 2);
        let mut rng = Stream::new(5, 0);
        for _ in 0..30 {
            let x1 = 2 + rng.below_u128(5000);
            let x2 = x1 + rng.below_u128(5000);
            let a = rng.unit(&m);
            let lo = progression_sum(&DivisorQuery::new(x1, a, m).unwrap());
            let hi = progression_sum(&DivisorQuery::new(x2, a, m).unwrap());
            assert!(lo <= hi, "D({x1}) = {lo} > D({x2}) = {hi} at a = {a}");
        }
    }

    #[test]
    fn full_scan_matches_per_residue_calls() {
        let m = modulus(3, 2);
        let scan = error_scan(500, &m, SCAN_BUDGET, 0).unwrap();
        assert!(!scan.sampled);
        assert_eq!(scan.seed, None);
        assert_eq!(scan.scanned, 6);
        assert_eq!(scan.rows.len(), 6);
        let mut expected_max = 0.0f64;
        for row in &scan.rows {
            let query = DivisorQuery::new(500, row.a, m).unwrap();
            let direct = error_term(&query);
            assert_eq!(row.e.to_bits(), direct.e.to_bits(), "a = {}", row.a);
            assert_eq!(row.d, direct.d);
            expected_max = expected_max.max(direct.e.abs());
        }
        assert_eq!(scan.max_abs_e.to_bits(), expected_max.to_bits());
        let sorted = scan.rows.windows(2).all(|w| w[0].a < w[1].a);
        assert!(sorted, "rows must be ordered by residue");
    }

    #[test]
    fn sampled_scan_is_deterministic() {
        let m = modulus(3, 6);
        let one = error_scan(300, &m, 50, 7).unwrap();
        let two = error_scan(300, &m, 50, 7).unwrap();
        assert!(one.sampled);
        assert_eq!(one.seed, Some(7));
        assert!(one.scanned <= 50);
        assert_eq!(one.rows.len(), two.rows.len());
        for (r1, r2) in one.rows.iter().zip(&two.rows) {
            assert_eq!(r1.a, r2.a);
            assert_eq!(r1.e.to_bits(), r2.e.to_bits());
        }
        let distinct = error_scan(300, &m, 50, 8).unwrap();
        assert_ne!(
            one.rows.iter().map(|r| r.a).collect::<Vec<_>>(),
            distinct.rows.iter().map(|r| r.a).collect::<Vec<_>>(),
            "different seeds should sample different residues"
        );
    }

    #[test]
    fn scan_reconciles_with_the_sieve_total() {
        let x = 2000u128;
        let m = modulus(3, 3);
        let table = divisor_sieve(x).unwrap();
        let total: u128 = table[1..=x as usize].iter().map(|&d| d as u128).sum();
        let scan = error_scan(x, &m, SCAN_BUDGET, 0).unwrap();
        let mut partitioned: u128 = scan.rows.iter().map(|r| r.d).sum();
        for a in (0..27u128).filter(|&a| a % 3 == 0) {
            partitioned += sieve_progression(&table, x, 27, a);
        }
        assert_eq!(partitioned, total);
    }

    #[test]
    fn scan_statistics_are_consistent() {
        let scan = error_scan(10_000, &modulus(3, 4), SCAN_BUDGET, 0).unwrap();
        assert!(scan.max_abs_e > 0.0);
        assert!(scan.max_normalized > 0.0);
        assert!(scan.delta_hat.is_finite());
        let recomputed = -scan.max_normalized.ln() / (10_000f64).ln();
        assert_eq!(scan.delta_hat.to_bits(), recomputed.to_bits());
        assert!((scan.q_over_x23 - 81.0 / 10_000f64.powf(2.0 / 3.0)).abs() < 1e-15);
    }

    #[test]
    fn scan_serializes_to_json() {
        // the struct carries u128 fields; the serializer must take them
        let scan = error_scan(100, &modulus(3, 2), SCAN_BUDGET, 0).unwrap();
        let text = serde_json::to_string(&scan).unwrap();
        let back: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(back["q"], 9);
        assert_eq!(back["rows"].as_array().unwrap().len(), 6);
    }

    #[test]
    fn scan_rejects_zero_budget() {
        assert!(matches!(
            error_scan(100, &modulus(3, 2), 0, 0),
            Err(Error::BadInput { .. })
        ));
    }
}
