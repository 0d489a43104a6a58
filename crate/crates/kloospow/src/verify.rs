//! Self-check suites behind `kloospow verify`.
//!
//! Each suite sweeps one module's oracle invariant at full scale and
//! reports how many checks ran, how many failed, and the first failing
//! witness. The suites exist so a build can prove itself on the machine
//! it runs on: the formula suite replays every closed-form Kloosterman
//! value against direct summation, the valuation suite replays both
//! half-binomial routes against each other, and so on. A clean build
//! passes every suite with zero failures.

use crate::arith::{mulmod, powmod};
use crate::averages::{
    count_roots_enumerated, count_roots_full, count_roots_ranged, PolyCongruenceQuery,
};
use crate::divisor::{
    coprime_sum, divisor_sieve, error_term, progression_sum, DivisorQuery,
};
use crate::kloosterman::{brute_force_table, ramanujan, KloostermanQuery};
use crate::modular::PrimePowerModulus;
use crate::padic::{
    build_reduction, half_binom, half_binom_sequence, valuation_bound_check, IntPolynomial,
};
use crate::sampler::Stream;

/// The named verification suites.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    /// Closed-form Kloosterman values against brute-force summation.
    Formula,
    /// Half-binomial coefficients: factorial route against the term-ratio
    /// recursion, and coefficient valuations against their envelope.
    Valuation,
    /// The truncated square-root substitution identity on seeded contexts.
    Reduction,
    /// Lifting-based root counts against enumeration and the rigid bound.
    Roots,
    /// Hyperbola-method divisor sums against the sieve.
    Hyperbola,
}

impl Suite {
    pub fn all() -> [Suite; 5] {
        [
            Suite::Formula,
            Suite::Valuation,
            Suite::Reduction,
            Suite::Roots,
            Suite::Hyperbola,
        ]
    }

    pub fn name(&self) -> &'static str {
        match self {
            Suite::Formula => "formula",
            Suite::Valuation => "valuation",
            Suite::Reduction => "reduction",
            Suite::Roots => "roots",
            Suite::Hyperbola => "hyperbola",
        }
    }

    /// Runs the suite at its default (full) scale.
    pub fn run(&self) -> SuiteReport {
        match self {
            Suite::Formula => formula_suite(50_000, 200, 0),
            Suite::Valuation => valuation_suite(200, 500),
            Suite::Reduction => reduction_suite(1_000, 1_000, 0),
            Suite::Roots => roots_suite(1_000, 0),
            Suite::Hyperbola => hyperbola_suite(100_000),
        }
    }
}

/// Outcome of one suite.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct SuiteReport {
    pub name: &'static str,
    pub checks: u64,
    pub failures: u64,
    /// The first failing check, formatted with enough context to replay it.
    pub first_witness: Option<String>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

/// Counts checks and keeps the first failure's witness.
struct Recorder {
    checks: u64,
    failures: u64,
    first_witness: Option<String>,
}

impl Recorder {
    fn new() -> Self {
        Recorder {
            checks: 0,
            failures: 0,
            first_witness: None,
        }
    }

    fn check(&mut self, ok: bool, witness: impl FnOnce() -> String) {
        self.checks += 1;
        if !ok {
            self.failures += 1;
            if self.first_witness.is_none() {
                self.first_witness = Some(witness());
            }
        }
    }

    fn pass_many(&mut self, n: u64) {
        self.checks += n;
    }

    fn finish(self, name: &'static str) -> SuiteReport {
        SuiteReport {
            name,
            checks: self.checks,
            failures: self.failures,
            first_witness: self.first_witness,
        }
    }
}

/// Sweeps every modulus q = p^k <= q_ceiling, p in {3,5,7,11,13},
/// k in [2,6]. Per modulus: the full brute-force table over v, the closed
/// form at every unit v within 1e-6 sqrt(q), exact vanishing at p | v
/// confirmed by the table within 1e-6, the Ramanujan value at v = 0, and
/// seeded (n, a) pair spot-checks through the public evaluation path.
pub fn formula_suite(q_ceiling: u128, pairs_per_modulus: u32, seed: u64) -> SuiteReport {
    let mut rec = Recorder::new();
    for p in [3u128, 5, 7, 11, 13] {
        for k in 2..=6u32 {
            let Ok(modulus) = PrimePowerModulus::new(p, k) else {
                break;
            };
            let q = modulus.q();
            if q > q_ceiling {
                break;
            }
            let table = brute_force_table(&modulus).expect("q under the brute-force ceiling");
            let tol = 1e-6 * (q as f64).sqrt();
            let c0 = ramanujan(1, q).expect("prime power factors");
            rec.check(c0 == 0 && table[0].abs() <= 1e-6, || {
                format!("q={q}: c_q(1) = {c0}, brute {:.3e}", table[0])
            });
            for v in 1..q {
                let query = KloostermanQuery::new(v, 1, modulus).expect("a = 1 is a unit");
                if v % p == 0 {
                    let value = query.evaluate().expect("vanishing path");
                    let ok = value.exact_zero && table[v as usize].abs() <= 1e-6;
                    rec.check(ok, || {
                        format!("q={q} v={v}: expected exact zero, brute {:.3e}", table[v as usize])
                    });
                } else {
                    let value = query.explicit_formula().expect("unit path, k >= 2");
                    let diff = (value.value - table[v as usize]).abs();
                    rec.check(diff <= tol, || {
                        format!(
                            "q={q} v={v}: formula {} vs brute {} (|diff| {diff:.3e})",
                            value.value, table[v as usize]
                        )
                    });
                }
            }
            let mut rng = Stream::new(seed, (p * 100) as u64 + k as u64);
            for _ in 0..pairs_per_modulus {
                let n = 1 + rng.below_u128(q - 1);
                let a = rng.unit(&modulus);
                let v = mulmod(n, a, q);
                let value = KloostermanQuery::new(n, a, modulus)
                    .expect("a is a unit")
                    .evaluate()
                    .expect("within ceiling");
                let diff = (value.value - table[v as usize]).abs();
                rec.check(diff <= tol, || {
                    format!("q={q} n={n} a={a}: |diff| {diff:.3e} > {tol:.3e}")
                });
            }
        }
    }
    rec.finish("formula")
}

/// Derivative-coefficient valuations against the analytic envelope for
/// p in {3,5,7}, 3 <= u <= i <= bound_index; then the factorial-form
/// half-binomials against the term-ratio recursion up to recursion_index
/// on a fixed wide-modulus grid.
pub fn valuation_suite(bound_index: u32, recursion_index: u32) -> SuiteReport {
    let mut rec = Recorder::new();
    for p in [3u128, 5, 7] {
        for i in 3..=bound_index {
            for u in 3..=i {
                let vb = valuation_bound_check(i, u, p);
                rec.check(vb.ok, || {
                    format!("p={p} i={i} u={u}: exact {} > bound {:.3}", vb.exact, vb.bound)
                });
            }
        }
    }
    for (p, k) in [(3u128, 18u32), (5, 12), (7, 10), (11, 8), (13, 8)] {
        let modulus = PrimePowerModulus::new(p, k).expect("odd prime power");
        let seq = half_binom_sequence(recursion_index, &modulus);
        for i in 0..=recursion_index {
            let direct = half_binom(i, &modulus, 0)
                .expect("within modulus width")
                .reduced(&modulus)
                .value();
            rec.check(direct == seq[i as usize], || {
                format!(
                    "q={} i={i}: factorial route {direct} vs recursion {}",
                    modulus.q(),
                    seq[i as usize]
                )
            });
        }
    }
    rec.finish("valuation")
}

/// Builds seeded square-root substitution contexts over p in {3,5,7,11},
/// k in [4,40], s in [1, k/4], and sweeps the defining identity over
/// t in [0, t_hi] on each. Every t is an exact integer comparison.
pub fn reduction_suite(contexts: u32, t_hi: u128, seed: u64) -> SuiteReport {
    let mut rec = Recorder::new();
    let mut rng = Stream::new(seed, 1);
    let mut built = 0u32;
    while built < contexts {
        let p = [3u128, 5, 7, 11][rng.below_u64(4) as usize];
        let k = 4 + rng.below_u64(37) as u32;
        let Ok(modulus) = PrimePowerModulus::new(p, k) else {
            continue;
        };
        let s = 1 + rng.below_u64((k / 4) as u64) as u32;
        let m = rng.unit(&modulus);
        let a = rng.unit(&modulus);
        let ps = p.pow(s);
        // alpha must be a unit square class mod p
        let alpha = loop {
            let c = 1 + rng.below_u128(ps - 1);
            if c % p != 0 && powmod(c % p, (p - 1) / 2, p) == 1 {
                break c;
            }
        };
        let ctx = build_reduction(m, a, alpha, &modulus, s).expect("inputs pre-screened");
        built += 1;
        match ctx.sqrt_consistency(0, t_hi) {
            Ok(()) => rec.pass_many(t_hi as u64 + 1),
            Err(t) => {
                rec.pass_many(t as u64);
                rec.check(false, || {
                    format!("p={p} k={k} s={s} m={m} a={a} alpha={alpha}: identity fails at t={t}")
                });
            }
        }
    }
    rec.finish("reduction")
}

/// Seeded polynomial corpus (degree 1..=8, coefficients in [-100, 100],
/// unit content) over prime powers p^mu <= 10^6, weighted toward small
/// moduli so the enumeration oracle stays cheap. Per polynomial: the
/// lifting count equals enumeration, the ranged count over one full
/// period agrees, and the rigid bound d (p^mu)^(1 - 1/d) holds.
pub fn roots_suite(count: u32, seed: u64) -> SuiteReport {
    let mut rec = Recorder::new();
    let mut rng = Stream::new(seed, 2);
    let primes = [3u128, 5, 7, 11, 13];
    let mut done = 0u32;
    while done < count {
        let p = primes[rng.below_u64(5) as usize];
        let cap: u128 = match rng.below_u64(10) {
            0..=5 => 10_000,
            6..=8 => 100_000,
            _ => 1_000_000,
        };
        let mut mu_max = 0u32;
        let mut t = 1u128;
        while t * p <= cap {
            t *= p;
            mu_max += 1;
        }
        let mu = 1 + rng.below_u64(mu_max as u64) as u32;
        let q = p.pow(mu);
        let degree = 1 + rng.below_u64(8) as usize;
        let coeffs: Vec<i64> = (0..=degree)
            .map(|_| rng.below_u64(201) as i64 - 100)
            .collect();
        if coeffs.iter().all(|&c| c.rem_euclid(p as i64) == 0) {
            continue; // content divisible by p; resample
        }
        let f = IntPolynomial::from_i64(&coeffs);
        let lifted = count_roots_full(&f, q).expect("prime power within range");
        let enumerated = count_roots_enumerated(&f, q).expect("modulus under ceiling");
        rec.check(lifted == enumerated, || {
            format!("f={coeffs:?} q={p}^{mu}: lifted {lifted} vs enumerated {enumerated}")
        });
        let d = f.degree() as f64;
        let rigid = d * (q as f64).powf(1.0 - 1.0 / d);
        rec.check((lifted as f64) <= rigid + 1e-9, || {
            format!("f={coeffs:?} q={p}^{mu}: {lifted} roots exceed rigid bound {rigid:.3}")
        });
        let query = PolyCongruenceQuery::new(f, p, mu, q).expect("bound is positive");
        let ranged = count_roots_ranged(&query).expect("same modulus");
        rec.check(ranged == lifted, || {
            format!("f={coeffs:?} q={p}^{mu}: ranged {ranged} vs full {lifted}")
        });
        done += 1;
    }
    rec.finish("roots")
}

/// Hyperbola-method progression and coprime sums against the sieve over a
/// staircase of X up to x_max, every unit class of the fixed modulus grid;
/// the all-classes partition identity for q <= 729; and the frozen value
/// E(20; 3, 1) = -3/2.
pub fn hyperbola_suite(x_max: u128) -> SuiteReport {
    let mut rec = Recorder::new();
    let table = divisor_sieve(x_max).expect("within sieve ceiling");
    let staircase: Vec<u128> = [10u128, 100, 1_000, 10_000, 100_000]
        .iter()
        .copied()
        .filter(|&x| x <= x_max)
        .chain((![10u128, 100, 1_000, 10_000, 100_000].contains(&x_max)).then_some(x_max))
        .collect();
    let mut moduli: Vec<PrimePowerModulus> = Vec::new();
    for k in 1..=8u32 {
        moduli.push(PrimePowerModulus::new(3, k).expect("odd prime power"));
    }
    for p in [5u128, 7] {
        for k in 1..=3u32 {
            moduli.push(PrimePowerModulus::new(p, k).expect("odd prime power"));
        }
    }
    for modulus in &moduli {
        let q = modulus.q();
        let p = modulus.p();
        for &x in &staircase {
            let mut class = vec![0u128; q as usize];
            for n in 1..=x as usize {
                class[n % q as usize] += table[n] as u128;
            }
            let mut unit_total = 0u128;
            for a in (1..q).filter(|&a| modulus.is_unit(a)) {
                let query = DivisorQuery::new(x, a, *modulus).expect("unit class, x >= 10");
                let fast = progression_sum(&query);
                rec.check(fast == class[a as usize], || {
                    format!("D({x}; {q}, {a}): hyperbola {fast} vs sieve {}", class[a as usize])
                });
                unit_total += fast;
            }
            let coprime_direct: u128 = class
                .iter()
                .enumerate()
                .filter(|(a, _)| *a as u128 % p != 0)
                .map(|(_, &s)| s)
                .sum();
            let coprime_fast = coprime_sum(x, modulus);
            rec.check(coprime_fast == coprime_direct, || {
                format!("coprime({x}, {p}): hyperbola {coprime_fast} vs sieve {coprime_direct}")
            });
            if q <= 729 {
                let grand: u128 = class.iter().sum();
                let nonunit: u128 = class
                    .iter()
                    .enumerate()
                    .filter(|(a, _)| *a as u128 % p == 0)
                    .map(|(_, &s)| s)
                    .sum();
                rec.check(unit_total + nonunit == grand, || {
                    format!("partition at X={x}, q={q}: {} vs {grand}", unit_total + nonunit)
                });
            }
        }
    }
    let frozen = error_term(
        &DivisorQuery::new(20, 1, PrimePowerModulus::new(3, 1).expect("3 is prime"))
            .expect("unit class"),
    );
    rec.check(frozen.e == -1.5, || {
        format!("E(20; 3, 1) = {} instead of -1.5", frozen.e)
    });
    rec.finish("hyperbola")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formula_suite_passes_on_a_small_grid() {
        let report = formula_suite(1_000, 20, 1);
        assert_eq!(report.name, "formula");
        assert!(report.checks > 2_000, "checks = {}", report.checks);
        assert_eq!(report.failures, 0, "witness: {:?}", report.first_witness);
        assert!(report.passed());
    }

    #[test]
    fn valuation_suite_passes_at_reduced_depth() {
        let report = valuation_suite(40, 60);
        assert_eq!(report.failures, 0, "witness: {:?}", report.first_witness);
        assert!(report.checks > 1_000);
    }

    #[test]
    fn reduction_suite_passes_on_seeded_contexts() {
        let report = reduction_suite(50, 100, 1);
        assert_eq!(report.failures, 0, "witness: {:?}", report.first_witness);
        assert_eq!(report.checks, 50 * 101);
    }

    #[test]
    fn roots_suite_passes_on_a_seeded_corpus() {
        let report = roots_suite(60, 1);
        assert_eq!(report.failures, 0, "witness: {:?}", report.first_witness);
        assert_eq!(report.checks, 180);
    }

    #[test]
    fn hyperbola_suite_passes_at_reduced_range() {
        let report = hyperbola_suite(2_000);
        assert_eq!(report.failures, 0, "witness: {:?}", report.first_witness);
        assert!(report.checks > 1_000);
    }

    #[test]
    fn recorder_keeps_the_first_witness_only() {
        let mut rec = Recorder::new();
        rec.check(true, || unreachable!("witness is lazy"));
        rec.check(false, || "first".into());
        rec.check(false, || "second".into());
        let report = rec.finish("formula");
        assert_eq!(report.checks, 3);
        assert_eq!(report.failures, 2);
        assert_eq!(report.first_witness.as_deref(), Some("first"));
        assert!(!report.passed());
    }

    #[test]
    fn suites_are_named_and_enumerable() {
        let names: Vec<&str> = Suite::all().iter().map(|s| s.name()).collect();
        assert_eq!(
            names,
            ["formula", "valuation", "reduction", "roots", "hyperbola"]
        );
    }
}
