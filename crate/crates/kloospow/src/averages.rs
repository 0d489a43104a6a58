//! Averages of Kloosterman sums, exponential sums with polynomial phases,
//! and polynomial congruence root counting.
//!
//! Three instruments share this module:
//! - [`sum_kloosterman`] forms sums over n <= N of S(m n, a; q) through the
//!   closed form, one modular square root per contributing term;
//! - [`exp_sum`] evaluates sums over x <= P of e(f(x)/p^mu) directly, the
//!   phase reduced with exact integer arithmetic before the one
//!   trigonometric call per term;
//! - [`count_roots_full`] / [`count_roots_ranged`] count solutions of
//!   f(x) = 0 (mod p^mu) by Hensel lifting, complete or restricted to an
//!   initial segment, with residue enumeration as the oracle.
//!
//! [`korobov_report`] ties the last two together: it measures an
//! exponential sum against the classical Korobov-style envelope
//! 3 P^(1 - c/r^2) + n R, where R is a worst-case ranged root count over
//! derivatives of the phase polynomial. The envelope's hypotheses are far
//! out of reach at desk scale, so the row reports both sides and flags
//! hypothesis satisfiability instead of asserting the inequality.

use std::sync::atomic::{AtomicU64, Ordering};

use num_bigint::BigInt;
use num_traits::One;

use crate::accum::{par_sum, par_sum2};
use crate::arith::{gcd, invmod, is_prime, mulmod, MAX_MODULUS};
use crate::kloosterman::{angle_terms, KloostermanQuery};
use crate::modular::{PrimePowerModulus, Valuation};
use crate::padic::{eval_mod_reduced, IntPolynomial, ReductionContext};
use crate::{Error, Result};

/// Term-count ceiling for [`sum_kloosterman`]; each term costs a modular
/// square root, so the sum is linear-time with a noticeable constant.
pub const SUM_TERM_CEILING: u128 = 1_000_000_000;

/// Range ceiling for [`exp_sum`]; one Horner pass plus one sin_cos per x.
pub const EXP_SUM_CEILING: u128 = 100_000_000;

/// Modulus ceiling for the enumeration path of root counting.
pub const ENUMERATION_CEILING: u128 = 1_000_000;

/// The lifting path scans residues modulo p to seed the tree, so the base
/// prime itself is capped even though the power p^mu is unrestricted.
pub const LIFTING_PRIME_CEILING: u128 = 10_000_000;

/// Largest root set [`list_roots`] will materialize.
pub const ROOT_LIST_CEILING: u128 = 1 << 20;

/// Candidate-verification ceiling for ranged counting below a full period.
const CANDIDATE_CEILING: u128 = 100_000_000;

/// A sum of Kloosterman values S(m n, a; q) over 1 <= n <= N. The exponent
/// lambda with N ~ q^lambda is carried for reporting only; m and a must be
/// units and N must stay within a single period.
#[derive(Debug, Clone, Copy)]
pub struct AverageQuery {
    n_bound: u128,
    m: u128,
    a: u128,
    modulus: PrimePowerModulus,
    lambda_exp: f64,
}

impl AverageQuery {
    pub fn new(
        n_bound: u128,
        m: u128,
        a: u128,
        modulus: PrimePowerModulus,
        lambda_exp: f64,
    ) -> Result<Self> {
        let q = modulus.q();
        if n_bound == 0 || n_bound > q {
            return Err(Error::BadInput {
                what: "average range bound",
                why: format!("N = {n_bound} must satisfy 1 <= N <= q = {q}"),
            });
        }
        for unit in [m % q, a % q] {
            if !modulus.is_unit(unit) {
                return Err(Error::NotAUnit {
                    value: unit,
                    modulus: q,
                });
            }
        }
        Ok(Self {
            n_bound,
            m,
            a,
            modulus,
            lambda_exp,
        })
    }

    /// The query with N = floor(q^lambda), clamped into [1, q].
    pub fn from_lambda(
        m: u128,
        a: u128,
        modulus: PrimePowerModulus,
        lambda_exp: f64,
    ) -> Result<Self> {
        let q = modulus.q();
        let n_bound = ((q as f64).powf(lambda_exp).floor() as u128).clamp(1, q);
        Self::new(n_bound, m, a, modulus, lambda_exp)
    }

    pub fn n_bound(&self) -> u128 {
        self.n_bound
    }

    pub fn m(&self) -> u128 {
        self.m
    }

    pub fn a(&self) -> u128 {
        self.a
    }

    pub fn modulus(&self) -> &PrimePowerModulus {
        &self.modulus
    }

    pub fn lambda_exp(&self) -> f64 {
        self.lambda_exp
    }
}

/// Sum over 1 <= n <= N of S(m n, a; q) through the closed form, plus the
/// count of terms that were not forced to zero by rule (p | n, quadratic
/// non-residue, or degenerate Ramanujan case). Fixed-size chunks with
/// per-chunk compensated accumulation and an in-order merge keep the float
/// bit-identical across thread counts. The trivial per-term envelope
/// |sum| <= 2 N sqrt(q) is asserted, not just reported.
pub fn sum_kloosterman(query: &AverageQuery) -> Result<(f64, u64)> {
    let modulus = query.modulus;
    let q = modulus.q();
    if modulus.k() < 2 {
        return Err(Error::NeedsBruteForce);
    }
    if query.n_bound > SUM_TERM_CEILING {
        return Err(Error::TooLarge {
            what: "average term count",
            size: query.n_bound,
            ceiling: SUM_TERM_CEILING,
        });
    }
    let (m, a) = (query.m % q, query.a % q);
    let contributing = AtomicU64::new(0);
    let sum = par_sum(1, query.n_bound as u64 + 1, |n| {
        let w = mulmod(m, n as u128 % q, q);
        let term = KloostermanQuery::new(w, a, modulus)
            .and_then(|s| s.evaluate())
            .expect("a is a unit and k >= 2, so every route is total");
        if !term.exact_zero {
            contributing.fetch_add(1, Ordering::Relaxed);
        }
        term.value
    });
    let envelope = 2.0 * query.n_bound as f64 * (q as f64).sqrt();
    assert!(
        sum.abs() <= envelope * (1.0 + 1e-12) + 1e-9,
        "|{sum}| breaks the 2 N sqrt(q) envelope {envelope}"
    );
    Ok((sum, contributing.load(Ordering::Relaxed)))
}

/// The empirical decay exponent: tau-hat with |sum| = N q^(1/2 - tau-hat),
/// that is -log(|sum| / (N sqrt(q))) / log(q). Positive infinity when the
/// sum is exactly zero. Reported only, never asserted: the true exponent
/// is asymptotic and desk-scale moduli say nothing binding about it.
pub fn empirical_tau(query: &AverageQuery, sum: f64) -> f64 {
    if sum == 0.0 {
        return f64::INFINITY;
    }
    let q = query.modulus.q() as f64;
    let normalized = sum.abs() / (query.n_bound as f64 * q.sqrt());
    -normalized.ln() / q.ln()
}

/// An exponential sum value kept as a complex pair, so both the magnitude
/// and the phase survive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpSumValue {
    pub re: f64,
    pub im: f64,
}

impl ExpSumValue {
    pub fn magnitude(&self) -> f64 {
        self.re.hypot(self.im)
    }

    pub fn phase(&self) -> f64 {
        self.im.atan2(self.re)
    }
}

/// Sum over 1 <= x <= P of e(f(x) / p^mu), evaluated directly: each term
/// reduces f(x) mod p^mu in integer arithmetic and spends one sin_cos
/// call. Chunking and merge order match [`sum_kloosterman`], so the result
/// is thread-count independent. The trivial bound magnitude <= P is
/// asserted. Refuses P beyond [`EXP_SUM_CEILING`].
pub fn exp_sum(f: &IntPolynomial, p: u128, mu: u32, range: u128) -> Result<ExpSumValue> {
    let q = prime_power(p, mu)?;
    if range == 0 {
        return Err(Error::BadInput {
            what: "exponential sum range",
            why: "P must be at least 1".into(),
        });
    }
    if range > EXP_SUM_CEILING {
        return Err(Error::TooLarge {
            what: "exponential sum range",
            size: range,
            ceiling: EXP_SUM_CEILING,
        });
    }
    let coeffs = f.reduced(q);
    let (re, im) = par_sum2(1, range as u64 + 1, |x| {
        angle_terms(eval_mod_reduced(&coeffs, x as u128 % q, q), q)
    });
    let value = ExpSumValue { re, im };
    assert!(
        value.magnitude() <= range as f64 * (1.0 + 1e-12) + 1e-9,
        "exponential sum magnitude {} breaks the trivial bound {range}",
        value.magnitude()
    );
    Ok(value)
}

/// A congruence f(x) = 0 (mod p^mu) restricted to 1 <= x <= Q. `beta`
/// records the auxiliary exponent floor(mu/10) + 1 when the query is built
/// inside the Korobov pipeline; it plays no role in the count itself.
#[derive(Debug, Clone)]
pub struct PolyCongruenceQuery {
    pub f: IntPolynomial,
    pub p: u128,
    pub mu: u32,
    pub q_bound: u128,
    pub beta: Option<u32>,
}

impl PolyCongruenceQuery {
    pub fn new(f: IntPolynomial, p: u128, mu: u32, q_bound: u128) -> Result<Self> {
        prime_power(p, mu)?;
        if q_bound == 0 {
            return Err(Error::BadInput {
                what: "congruence range bound",
                why: "Q must be at least 1".into(),
            });
        }
        Ok(Self {
            f,
            p,
            mu,
            q_bound,
            beta: None,
        })
    }
}

/// rho(f, m): how many x mod m satisfy f(x) = 0 (mod m). Prime-power
/// moduli with base prime under [`LIFTING_PRIME_CEILING`] go through
/// Hensel lifting and may be arbitrarily wide; anything else is counted by
/// enumeration up to [`ENUMERATION_CEILING`]. A coefficient vector sharing
/// a factor with m is rejected: the congruence would degenerate.
pub fn count_roots_full(f: &IntPolynomial, m: u128) -> Result<u128> {
    if m == 0 {
        return Err(Error::BadInput {
            what: "congruence modulus",
            why: "modulus must be positive".into(),
        });
    }
    if m == 1 {
        return Ok(1);
    }
    check_content(f, m)?;
    match factorize(m)?.as_slice() {
        [(p, mu)] if *p <= LIFTING_PRIME_CEILING => Ok(count_roots_lifting(f, *p, *mu)),
        _ => count_roots_enumerated(f, m),
    }
}

/// The enumeration oracle: walk every residue. O(m deg f), single-threaded
/// by design (corpus runs parallelize across queries, not inside them);
/// refuses moduli past [`ENUMERATION_CEILING`].
pub fn count_roots_enumerated(f: &IntPolynomial, m: u128) -> Result<u128> {
    if m == 0 {
        return Err(Error::BadInput {
            what: "congruence modulus",
            why: "modulus must be positive".into(),
        });
    }
    if m > ENUMERATION_CEILING {
        return Err(Error::TooLarge {
            what: "enumeration modulus",
            size: m,
            ceiling: ENUMERATION_CEILING,
        });
    }
    check_content(f, m)?;
    let coeffs = f.reduced(m);
    Ok((0..m).filter(|&x| eval_mod_reduced(&coeffs, x, m) == 0).count() as u128)
}

/// All roots of f(x) = 0 (mod p^mu), sorted ascending, refusing to
/// materialize more than `cap` of them. Same lifting tree as the counting
/// path, except that simple roots are lifted explicitly with one linear
/// correction per exponent level.
pub fn list_roots(f: &IntPolynomial, p: u128, mu: u32, cap: u128) -> Result<Vec<u128>> {
    let q = prime_power(p, mu)?;
    if p > LIFTING_PRIME_CEILING {
        return Err(Error::TooLarge {
            what: "lifting base prime",
            size: p,
            ceiling: LIFTING_PRIME_CEILING,
        });
    }
    check_content(f, q)?;
    let mut roots = Vec::new();
    let mut stack = vec![LiftFrame {
        g: f.clone(),
        nu: mu,
        level: 0,
        base: 0,
    }];
    while let Some(frame) = stack.pop() {
        let free = mu - frame.level;
        let step = pow_u128(p, frame.level);
        let gp = frame.g.reduced(p);
        let dgp = derivative_mod(&gp, p);
        for r in prime_roots(&gp, p) {
            if eval_mod_reduced(&dgp, r, p) != 0 {
                let y = lift_simple_root(&frame.g, r, p, frame.nu);
                push_class(
                    &mut roots,
                    frame.base + step * y,
                    step * pow_u128(p, frame.nu),
                    pow_u128(p, free - frame.nu),
                    cap,
                )?;
            } else {
                let (h, e) = shift_scale_reduce(&frame.g, r, p);
                if e >= frame.nu as u64 {
                    push_class(&mut roots, frame.base + step * r, step * p, pow_u128(p, free - 1), cap)?;
                } else {
                    stack.push(LiftFrame {
                        g: h,
                        nu: frame.nu - e as u32,
                        level: frame.level + 1,
                        base: frame.base + step * r,
                    });
                }
            }
        }
    }
    roots.sort_unstable();
    Ok(roots)
}

/// R(Q, p^mu): roots of f in the initial segment 1 <= x <= Q. With
/// Q >= p^mu the count tiles whole periods plus a partial one from the
/// root list; with Q < p^mu the roots modulo the largest power
/// p^omega <= Q cut the segment down to candidates, each verified modulo
/// p^mu. Exact in both regimes.
pub fn count_roots_ranged(query: &PolyCongruenceQuery) -> Result<u128> {
    let (f, p, mu) = (&query.f, query.p, query.mu);
    let q = prime_power(p, mu)?;
    let bound = query.q_bound;
    if bound == 0 {
        return Err(Error::BadInput {
            what: "congruence range bound",
            why: "Q must be at least 1".into(),
        });
    }
    check_content(f, q)?;
    if bound >= q {
        let roots = list_roots(f, p, mu, ROOT_LIST_CEILING)?;
        return Ok(roots.iter().map(|&r| class_count(r, q, bound)).sum());
    }
    // below one period: find the widest power inside the range
    let mut omega = 0u32;
    let mut w: u128 = 1;
    while w <= bound / p {
        w *= p;
        omega += 1;
    }
    let coeffs = f.reduced(q);
    if omega == 0 {
        // Q < p: every x is its own candidate
        if bound > CANDIDATE_CEILING {
            return Err(Error::TooLarge {
                what: "ranged root candidates",
                size: bound,
                ceiling: CANDIDATE_CEILING,
            });
        }
        return Ok((1..=bound).filter(|&x| eval_mod_reduced(&coeffs, x, q) == 0).count() as u128);
    }
    let roots = list_roots(f, p, omega, ROOT_LIST_CEILING)?;
    let candidates: u128 = roots.iter().map(|&r| class_count(r, w, bound)).sum();
    if candidates > CANDIDATE_CEILING {
        return Err(Error::TooLarge {
            what: "ranged root candidates",
            size: candidates,
            ceiling: CANDIDATE_CEILING,
        });
    }
    let mut count = 0u128;
    for &r in &roots {
        let mut x = if r == 0 { w } else { r };
        while x <= bound {
            if eval_mod_reduced(&coeffs, x, q) == 0 {
                count += 1;
            }
            x += w;
        }
    }
    Ok(count)
}

/// One row of the Korobov-envelope experiment: the measured sum magnitude
/// next to 3 P^(1 - c/r^2) + n R, with every derived quantity and
/// hypothesis flag spelled out. `n_used` records the convention n = deg f
/// for the envelope's root-count multiplier.
#[derive(Debug, Clone, serde::Serialize)]
pub struct KorobovRow {
    pub coefficients: Vec<String>,
    pub degree: u32,
    pub p: u128,
    pub mu: u32,
    pub range: u128,
    pub c: f64,
    pub lhs: f64,
    pub trivial_bound: f64,
    pub r: f64,
    pub beta: u32,
    pub big_r: u128,
    pub n_used: u32,
    pub rhs: f64,
    pub bound_holds: bool,
    pub hyp_degree_ok: bool,
    pub hyp_r_ok: bool,
    pub hyp_mu_log_ok: bool,
    pub hypotheses_ok: bool,
}

/// Default envelope constant; the classical statement only promises some
/// c > 1e-13, which makes the bound vacuous at desk scale.
pub const KOROBOV_DEFAULT_C: f64 = 1e-13;

/// Measures exp_sum(f, p, mu, P) against 3 P^(1 - c/r^2) + n R, where
/// r = mu log p / log P, beta = floor(mu/10) + 1, and R is the largest
/// ranged root count modulo p^beta over the derivatives f^(u) with
/// 25 r <= u <= 27 r (each derivative normalized by its p-power content).
/// Derivatives beyond the degree vanish identically, so every x counts as
/// a root and R degenerates to P. Hypothesis flags are evaluated literally
/// and reported; the inequality itself is never asserted.
pub fn korobov_report(f: &IntPolynomial, p: u128, mu: u32, range: u128, c: f64) -> Result<KorobovRow> {
    let value = exp_sum(f, p, mu, range)?;
    let lhs = value.magnitude();
    let degree = f.degree();
    // the envelope's own degree parameter: f = a_1 x + ... + a_(d+1) x^(d+1)
    let lemma_d = degree.saturating_sub(1) as f64;
    let r = if range <= 1 {
        f64::INFINITY
    } else {
        mu as f64 * (p as f64).ln() / (range as f64).ln()
    };
    let beta = mu / 10 + 1;
    let mut big_r: u128 = 0;
    if r.is_finite() {
        let lo = ((25.0 * r).ceil() as u32).max(1);
        let hi = (27.0 * r).floor() as u32;
        for u in lo..=hi {
            if u > degree {
                big_r = big_r.max(range);
                break;
            }
            let g = f.derivative(u);
            let count = if g.is_zero() {
                range
            } else {
                let query = PolyCongruenceQuery {
                    f: remove_content_power(&g, p),
                    p,
                    mu: beta,
                    q_bound: range,
                    beta: Some(beta),
                };
                count_roots_ranged(&query)?
            };
            big_r = big_r.max(count);
        }
    }
    let n_used = degree;
    let rhs = 3.0 * (range as f64).powf(1.0 - c / (r * r)) + n_used as f64 * big_r as f64;
    let hyp_degree_ok = lemma_d >= 300.0;
    let hyp_r_ok = r.is_finite() && 1.0 <= r && 300.0 * r <= lemma_d;
    let hyp_mu_log_ok =
        r.is_finite() && mu as f64 * (p as f64).ln() > 1e8 * r * lemma_d * lemma_d.ln();
    Ok(KorobovRow {
        coefficients: f.coeffs().iter().map(|c| c.to_string()).collect(),
        degree,
        p,
        mu,
        range,
        c,
        lhs,
        trivial_bound: range as f64,
        r,
        beta,
        big_r,
        n_used,
        rhs,
        bound_holds: lhs <= rhs,
        hyp_degree_ok,
        hyp_r_ok,
        hyp_mu_log_ok,
        hypotheses_ok: hyp_degree_ok && hyp_r_ok && hyp_mu_log_ok,
    })
}

/// Exact p-adic order of a derivative of the reduction series next to the
/// uniform envelope 27 r / (p - 1) + 3 ln(54 r) + 27 r s.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrdBound {
    pub exact: Valuation,
    pub bound: f64,
    pub ok: bool,
}

/// Compares ord_p of the u-th derivative of ctx's series polynomial with
/// the envelope above. `u` must sit inside the window [25 r, 27 r] and
/// within the series degree. An identically-zero derivative has infinite
/// order and reports `ok = false`: the envelope is finite.
pub fn ord_bound_check(ctx: &ReductionContext, u: u32, r: u32) -> Result<OrdBound> {
    if r == 0 || (u as u64) < 25 * r as u64 || (u as u64) > 27 * r as u64 {
        return Err(Error::BadInput {
            what: "derivative order",
            why: format!(
                "u = {u} must lie in [25 r, 27 r] = [{}, {}]",
                25 * r as u64,
                27 * r as u64
            ),
        });
    }
    let degree = ctx.degree();
    if u > degree {
        return Err(Error::DegreeTooSmall { u, degree });
    }
    let p = ctx.modulus().p();
    let exact = ctx.f_polynomial().derivative(u).ord_p(p);
    let rf = r as f64;
    let bound = 27.0 * rf / (p as f64 - 1.0) + 3.0 * (54.0 * rf).ln() + 27.0 * rf * ctx.s() as f64;
    let ok = match exact {
        Valuation::Finite(v) => (v as f64) <= bound,
        Valuation::Infinite => false,
    };
    Ok(OrdBound { exact, bound, ok })
}

/// p^mu under the modulus width ceiling; p must be prime, mu positive.
fn prime_power(p: u128, mu: u32) -> Result<u128> {
    if !is_prime(p) {
        return Err(Error::BadInput {
            what: "congruence prime",
            why: format!("{p} is not prime"),
        });
    }
    if mu == 0 {
        return Err(Error::ZeroExponent);
    }
    let mut q: u128 = 1;
    for _ in 0..mu {
        q = q
            .checked_mul(p)
            .filter(|&v| v <= MAX_MODULUS)
            .ok_or(Error::ModulusTooWide { p, k: mu })?;
    }
    Ok(q)
}

/// Rejects polynomials whose coefficient gcd shares a factor with m; for
/// such f the congruence collapses to a smaller modulus or to everything.
fn check_content(f: &IntPolynomial, m: u128) -> Result<()> {
    let mut g = m;
    for c in f.reduced(m) {
        g = gcd(g, c);
        if g == 1 {
            return Ok(());
        }
    }
    Err(Error::BadInput {
        what: "congruence polynomial",
        why: format!("coefficient gcd shares the factor {g} with the modulus"),
    })
}

fn factorize(m: u128) -> Result<Vec<(u128, u32)>> {
    crate::arith::factorize(m).ok_or(Error::Unfactorable(m))
}

/// Exact power; callers guarantee p^e fits because p^mu already did.
fn pow_u128(p: u128, e: u32) -> u128 {
    (0..e).fold(1u128, |acc, _| acc * p)
}

/// #{1 <= x <= bound : x = r (mod w)} for 0 <= r < w.
fn class_count(r: u128, w: u128, bound: u128) -> u128 {
    if r == 0 {
        bound / w
    } else if r > bound {
        0
    } else {
        (bound - r) / w + 1
    }
}

/// A pending branch of the lifting tree: roots y of g modulo p^nu refine
/// residues x = base + p^level y of the original congruence, with
/// base < p^level and nu <= mu - level.
struct LiftFrame {
    g: IntPolynomial,
    nu: u32,
    level: u32,
    base: u128,
}

/// Counting-only walk of the same tree as [`list_roots`]: a simple root
/// mod p pins a unique lift to every higher power; a singular root r is
/// rewritten as g(r + p y) = p^e h(y) and the tree recurses on h at
/// exponent nu - e. Stack depth is bounded by mu.
fn count_roots_lifting(f: &IntPolynomial, p: u128, mu: u32) -> u128 {
    let mut total: u128 = 0;
    let mut stack = vec![(f.clone(), mu, 0u32)];
    while let Some((g, nu, level)) = stack.pop() {
        let free = mu - level;
        let gp = g.reduced(p);
        let dgp = derivative_mod(&gp, p);
        for r in prime_roots(&gp, p) {
            if eval_mod_reduced(&dgp, r, p) != 0 {
                total += pow_u128(p, free - nu);
            } else {
                let (h, e) = shift_scale_reduce(&g, r, p);
                if e >= nu as u64 {
                    total += pow_u128(p, free - 1);
                } else {
                    stack.push((h, nu - e as u32, level + 1));
                }
            }
        }
    }
    total
}

/// Roots of the reduced polynomial modulo the base prime, by scanning.
fn prime_roots(coeffs_mod_p: &[u128], p: u128) -> Vec<u128> {
    (0..p)
        .filter(|&r| eval_mod_reduced(coeffs_mod_p, r, p) == 0)
        .collect()
}

/// Coefficients of the derivative, reduced mod m.
fn derivative_mod(coeffs: &[u128], m: u128) -> Vec<u128> {
    coeffs
        .iter()
        .enumerate()
        .skip(1)
        .map(|(i, &c)| mulmod(i as u128 % m, c, m))
        .collect()
}

/// g(r + p y) = p^e h(y) with h of p-free content: Taylor shift by r,
/// scale y -> p y, divide out the content power. Exact integer arithmetic
/// throughout. g must be nonzero.
fn shift_scale_reduce(g: &IntPolynomial, r: u128, p: u128) -> (IntPolynomial, u64) {
    let mut b: Vec<BigInt> = g.coeffs().to_vec();
    let n = b.len();
    let rb = BigInt::from(r);
    for i in 0..n {
        for j in (i..n.saturating_sub(1)).rev() {
            let add = &b[j + 1] * &rb;
            b[j] += add;
        }
    }
    let pb = BigInt::from(p);
    let mut scale = BigInt::one();
    for c in b.iter_mut().skip(1) {
        scale *= &pb;
        *c *= &scale;
    }
    let h = IntPolynomial::new(b);
    let e = match h.ord_p(p) {
        Valuation::Finite(e) => e,
        Valuation::Infinite => unreachable!("shift of a nonzero polynomial is nonzero"),
    };
    let pe = pb.pow(u32::try_from(e).expect("content order fits u32"));
    let reduced = h.coeffs().iter().map(|c| c / &pe).collect();
    (IntPolynomial::new(reduced), e)
}

/// The unique lift of a simple root r of g mod p up to p^nu, one linear
/// correction per level; 1 / g'(r) mod p stays valid along the whole lift.
fn lift_simple_root(g: &IntPolynomial, r: u128, p: u128, nu: u32) -> u128 {
    let q = pow_u128(p, nu);
    let coeffs = g.reduced(q);
    let gp = g.reduced(p);
    let dgp = derivative_mod(&gp, p);
    let inv = invmod(eval_mod_reduced(&dgp, r % p, p), p).expect("simple root has unit derivative");
    let mut y = r % p;
    let mut pt = p;
    while pt < q {
        let val = eval_mod_reduced(&coeffs, y, q);
        // y is a root mod pt, so pt divides the value
        let delta = (p - (val / pt) % p) % p * inv % p;
        y += delta * pt;
        pt *= p;
    }
    y
}

/// f divided by the largest power of p dividing every coefficient.
fn remove_content_power(f: &IntPolynomial, p: u128) -> IntPolynomial {
    match f.ord_p(p) {
        Valuation::Finite(e) if e > 0 => {
            let pe = BigInt::from(p).pow(u32::try_from(e).expect("content order fits u32"));
            IntPolynomial::new(f.coeffs().iter().map(|c| c / &pe).collect())
        }
        _ => f.clone(),
    }
}

/// Appends the arithmetic progression first, first + stride, ... of
/// `count` roots, refusing to grow past `cap`.
fn push_class(roots: &mut Vec<u128>, first: u128, stride: u128, count: u128, cap: u128) -> Result<()> {
    if roots.len() as u128 + count > cap {
        return Err(Error::TooManyRoots { cap });
    }
    for t in 0..count {
        roots.push(first + stride * t);
    }
    Ok(())
}
