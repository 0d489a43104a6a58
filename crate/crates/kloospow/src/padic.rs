//! Half-binomial coefficients and the p-adic square-root series.
//!
//! The series sqrt(1 + x) = sum_i C(1/2, i) x^i converges p-adically when
//! p | x, because for odd p every C(1/2, i) is a p-adic integer (its
//! denominator is a power of 2). [`half_binom`] computes one coefficient in
//! valuation/unit form from the closed factorial expression
//!
//! ```text
//! C(1/2, i) = (-1)^(i-1) (2i-3)! / (2^(2i-2) i! (i-2)!)      (i >= 3)
//! ```
//!
//! and [`ReductionContext`] packages the substitution that turns a
//! reciprocal residue `n*m*a = 1 (mod q)` into a polynomial square root:
//! a degree-floor(k/s) truncation f with (omega * f(t))^2 = m a (theta alpha
//! + p^s t) modulo p^k for every integer t.

use num_bigint::{BigInt, BigUint};
use num_traits::{One, Signed, Zero};

use crate::arith::{mulmod, powmod};
use crate::modular::{factorial_valuation, legendre_symbol, val_p, PrimePowerModulus, Residue, Valuation};
use crate::{Error, Result};

/// One series coefficient C(1/2, i) split as p^valuation * unit, the unit
/// carried modulo p^(k + buffer) so callers can keep working digits in hand.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HalfBinomial {
    index: u32,
    valuation: u64,
    unit: Residue,
}

impl HalfBinomial {
    pub fn index(&self) -> u32 {
        self.index
    }

    /// p-adic order of C(1/2, index). Finite for every index: the
    /// coefficients are nonzero rationals with dyadic denominators.
    pub fn valuation(&self) -> u64 {
        self.valuation
    }

    /// Unit cofactor modulo the buffered modulus p^(k + buffer).
    pub fn unit(&self) -> Residue {
        self.unit
    }

    /// The coefficient reduced modulo `target` (any exponent at most
    /// k + buffer): p^valuation * unit, or 0 once the valuation reaches
    /// the target exponent.
    pub fn reduced(&self, target: &PrimePowerModulus) -> Residue {
        assert_eq!(
            self.unit.modulus() % target.q(),
            0,
            "target modulus exceeds the buffered precision"
        );
        if self.valuation >= target.k() as u64 {
            return target.residue(0);
        }
        let pv = target.p().pow(self.valuation as u32) % target.q();
        let unit = self.unit.value() % target.q();
        target.residue(mulmod(pv, unit, target.q()))
    }
}

/// C(1/2, i) as valuation and unit modulo p^(k + buffer).
///
/// i = 1 and i = 2 are the closed forms 1/2 and -1/8; from i = 3 on the
/// factorial expression above is evaluated with [`factorial_valuation`] for
/// the p-part and [`PrimePowerModulus::factorial_unit`] for the unit parts.
/// Fails only if the buffered modulus p^(k + buffer) leaves the supported
/// width.
pub fn half_binom(i: u32, modulus: &PrimePowerModulus, buffer: u32) -> Result<HalfBinomial> {
    let ext = modulus.with_exponent(modulus.k() + buffer)?;
    let p = ext.p();
    let (valuation, unit) = match i {
        0 => (0u64, ext.residue(1)),
        1 => (0, ext.residue(2).inverse().expect("2 is a unit")),
        2 => (0, -ext.residue(8).inverse().expect("8 is a unit")),
        _ => {
            let i64_ = i as u64;
            let v_num = factorial_valuation(2 * i64_ - 3, p);
            let v_den = factorial_valuation(i64_, p) + factorial_valuation(i64_ - 2, p);
            debug_assert!(v_num >= v_den, "C(1/2,i) is p-integral for odd p");
            let numerator = ext.factorial_unit(2 * i64_ - 3);
            let denominator = ext.residue(2).pow(2 * i as u128 - 2)
                * ext.factorial_unit(i64_)
                * ext.factorial_unit(i64_ - 2);
            let mut unit = numerator * denominator.inverse().expect("factorial units");
            if i % 2 == 0 {
                unit = -unit;
            }
            (v_num - v_den, unit)
        }
    };
    Ok(HalfBinomial {
        index: i,
        valuation,
        unit,
    })
}

/// The coefficients C(1/2, 0..=d) reduced modulo q, computed by the
/// term-ratio recursion c_i = c_(i-1) (3 - 2i) / (2i) instead of the
/// factorial form, carried in big-integer arithmetic at initial precision
/// p^(k + v_p(d!) + 1). Every division by p costs one digit of precision;
/// the budget leaves at least k + 1 digits at the end, so all returned
/// values are exact modulo q.
///
/// Deliberately shares nothing with [`half_binom`]: the two routes
/// cross-check each other.
pub fn half_binom_sequence(d: u32, modulus: &PrimePowerModulus) -> Vec<u128> {
    let p = BigUint::from(modulus.p());
    let q = BigUint::from(modulus.q());
    let delta = factorial_valuation(d as u64, modulus.p()) + 1;
    let mut precision = modulus.k() as u64 + delta;
    let mut pm = p.pow(precision as u32);
    let mut c = BigUint::one();
    let mut out = Vec::with_capacity(d as usize + 1);
    out.push(1u128 % modulus.q());
    for i in 1..=d as u64 {
        // numerator 3 - 2i, as a residue (negative from i = 2 on)
        let num = if i == 1 {
            BigUint::one()
        } else {
            (&pm - BigUint::from(2 * i - 3) % &pm) % &pm
        };
        c = c * num % &pm;
        let e = val_p(i as u128, modulus.p())
            .finite()
            .expect("i > 0 has finite order");
        if e > 0 {
            let pe = p.pow(e as u32);
            debug_assert!((&c % &pe).is_zero(), "series term divisible by p^e");
            c /= &pe;
            precision -= e;
            pm = p.pow(precision as u32);
            c %= &pm;
        }
        let odd = BigUint::from(2 * (i / modulus.p().pow(e as u32) as u64)) % &pm;
        let inv = modinv_big(&odd, &pm);
        c = c * inv % &pm;
        debug_assert!(precision > modulus.k() as u64, "precision budget holds");
        out.push(u128::try_from(&c % &q).expect("reduced below q < 2^127"));
    }
    out
}

/// Inverse modulo a big odd prime power, via Euler (phi is p^(m-1)(p-1),
/// but x^(phi-1) needs phi; extended Euclid on BigInt is simpler).
fn modinv_big(x: &BigUint, m: &BigUint) -> BigUint {
    let (mut r0, mut r1) = (BigInt::from(m.clone()), BigInt::from(x.clone()));
    let (mut t0, mut t1) = (BigInt::zero(), BigInt::one());
    while !r1.is_zero() {
        let quot = &r0 / &r1;
        let r2 = &r0 - &quot * &r1;
        r0 = std::mem::replace(&mut r1, r2);
        let t2 = &t0 - &quot * &t1;
        t0 = std::mem::replace(&mut t1, t2);
    }
    assert!(r0.is_one(), "inverse of a non-unit");
    let m_int = BigInt::from(m.clone());
    let t = ((t0 % &m_int) + &m_int) % &m_int;
    t.to_biguint().expect("reduced to [0, m)")
}

/// Exact p-adic order of C(1/2, i) * i! / (i - u)! against the analytic
/// envelope u/(p-1) + 3 ln(2i)/ln(p).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValuationBound {
    pub i: u32,
    pub u: u32,
    pub exact: u64,
    pub bound: f64,
    pub ok: bool,
}

/// Checks the derivative-coefficient valuation against its envelope.
/// The exact value reduces to three Legendre-formula terms,
/// v(2i-3)! - v(i-2)! - v(i-u)!, with the 2-powers invisible to odd p.
/// Panics unless 3 <= u <= i (the factorial form needs i >= 3).
pub fn valuation_bound_check(i: u32, u: u32, p: u128) -> ValuationBound {
    assert!(3 <= u && u <= i, "need 3 <= u <= i");
    let (i64_, u64_) = (i as u64, u as u64);
    let exact = factorial_valuation(2 * i64_ - 3, p)
        - factorial_valuation(i64_ - 2, p)
        - factorial_valuation(i64_ - u64_, p);
    let bound = u as f64 / (p - 1) as f64 + 3.0 * (2.0 * i as f64).ln() / (p as f64).ln();
    ValuationBound {
        i,
        u,
        exact,
        bound,
        ok: (exact as f64) <= bound,
    }
}

/// Truncated square-root substitution for n m a = 1 (mod q): all the
/// residues needed to rewrite sqrt(m a n) as a polynomial in the offset t,
/// where n runs over theta alpha + p^s t.
#[derive(Debug, Clone)]
pub struct ReductionContext {
    modulus: PrimePowerModulus,
    m: u128,
    a: u128,
    s: u32,
    alpha: u128,
    theta: u128,
    kappa: u128,
    omega: Residue,
    g: Vec<u128>,
    f: Vec<u128>,
}

impl ReductionContext {
    pub fn modulus(&self) -> &PrimePowerModulus {
        &self.modulus
    }

    pub fn m(&self) -> u128 {
        self.m
    }

    pub fn a(&self) -> u128 {
        self.a
    }

    pub fn s(&self) -> u32 {
        self.s
    }

    pub fn alpha(&self) -> u128 {
        self.alpha
    }

    /// The residue theta = (m a)^(-1) mod q, cut down to [1, p^s).
    pub fn theta(&self) -> u128 {
        self.theta
    }

    /// kappa = (theta alpha)^(-1) mod q.
    pub fn kappa(&self) -> u128 {
        self.kappa
    }

    /// omega^2 = m a theta alpha mod q.
    pub fn omega(&self) -> Residue {
        self.omega
    }

    /// Truncation degree d = floor(k / s).
    pub fn degree(&self) -> u32 {
        self.f.len() as u32 - 1
    }

    /// Series coefficients g(i) = C(1/2, i) mod q, i = 0..=degree.
    pub fn g(&self) -> &[u128] {
        &self.g
    }

    /// Polynomial coefficients f_i = g(i) kappa^i p^(i s) mod q.
    pub fn f_coeffs(&self) -> &[u128] {
        &self.f
    }

    /// The truncation as an integer polynomial (coefficients lifted to
    /// their representatives in [0, q)), for derivative/valuation work.
    pub fn f_polynomial(&self) -> IntPolynomial {
        IntPolynomial::new(self.f.iter().map(|&c| BigInt::from(c)).collect())
    }

    /// f(t) mod q by Horner.
    pub fn eval_f(&self, t: u128) -> Residue {
        let q = self.modulus.q();
        let t = t % q;
        let mut acc = 0u128;
        for &c in self.f.iter().rev() {
            acc = (mulmod(acc, t, q) + c) % q;
        }
        self.modulus.residue(acc)
    }

    /// Does (omega f(t))^2 = m a (theta alpha + p^s t) hold modulo q at
    /// this t? Exact integer comparison.
    pub fn identity_holds_at(&self, t: u128) -> bool {
        let q = self.modulus.q();
        let lhs = (self.omega * self.eval_f(t)).pow(2).value();
        let ps = powmod(self.modulus.p(), self.s as u128, q);
        let n = (mulmod(self.theta, self.alpha, q) + mulmod(ps, t % q, q)) % q;
        let rhs = mulmod(mulmod(self.m, self.a, q), n, q);
        lhs == rhs
    }

    /// Sweeps the identity over an inclusive range of offsets, returning
    /// the first failing t as the error witness.
    pub fn sqrt_consistency(&self, t_lo: u128, t_hi: u128) -> std::result::Result<(), u128> {
        for t in t_lo..=t_hi {
            if !self.identity_holds_at(t) {
                return Err(t);
            }
        }
        Ok(())
    }
}

/// Builds the reduction for units m, a mod q and a base offset alpha in
/// [1, p^s) with (alpha/p) = 1.
///
/// Errors: [`Error::BadRange`] unless 1 <= s < k; [`Error::NotAUnit`] if
/// p divides m, a, or alpha; [`Error::NotAResidue`] if alpha is a
/// quadratic non-residue mod p (then m a theta alpha has no square root).
pub fn build_reduction(
    m: u128,
    a: u128,
    alpha: u128,
    modulus: &PrimePowerModulus,
    s: u32,
) -> Result<ReductionContext> {
    let (p, k, q) = (modulus.p(), modulus.k(), modulus.q());
    if s == 0 || s >= k {
        return Err(Error::BadRange { s, k });
    }
    let m = m % q;
    let a = a % q;
    for unit in [m, a] {
        if !modulus.is_unit(unit) {
            return Err(Error::NotAUnit {
                value: unit,
                modulus: q,
            });
        }
    }
    let ps = p.pow(s);
    let alpha = alpha % ps;
    if !modulus.is_unit(alpha) {
        return Err(Error::NotAUnit {
            value: alpha,
            modulus: q,
        });
    }
    if legendre_symbol(alpha as i128, p) != 1 {
        return Err(Error::NotAResidue {
            value: alpha,
            modulus: q,
        });
    }
    let ma = mulmod(m, a, q);
    let xi = modulus.residue(ma).inverse().expect("m a is a unit").value();
    let theta = xi % ps;
    let kappa = modulus
        .residue(mulmod(theta, alpha, q))
        .inverse()
        .expect("theta alpha is a unit")
        .value();
    let omega = modulus.sqrt(mulmod(ma, mulmod(theta, alpha, q), q))?;
    let d = k / s;
    let mut g = Vec::with_capacity(d as usize + 1);
    for i in 0..=d {
        g.push(half_binom(i, modulus, 0)?.reduced(modulus).value());
    }
    let mut f = Vec::with_capacity(d as usize + 1);
    let mut kp = 1u128; // kappa^i p^(i s) mod q
    let step = mulmod(kappa, powmod(p, s as u128, q), q);
    for (i, &gi) in g.iter().enumerate() {
        if i > 0 {
            kp = mulmod(kp, step, q);
        }
        f.push(mulmod(gi, kp, q));
    }
    Ok(ReductionContext {
        modulus: *modulus,
        m,
        a,
        s,
        alpha,
        theta,
        kappa,
        omega,
        g,
        f,
    })
}

/// Dense integer polynomial with arbitrary-precision coefficients.
/// The degree is syntactic (leading zeros are kept as written), which
/// matters when iterated derivatives are compared against analytic bounds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntPolynomial {
    coeffs: Vec<BigInt>,
}

impl IntPolynomial {
    /// Coefficients in ascending degree order; an empty list is the zero
    /// polynomial of degree 0.
    pub fn new(coeffs: Vec<BigInt>) -> Self {
        if coeffs.is_empty() {
            return Self {
                coeffs: vec![BigInt::zero()],
            };
        }
        Self { coeffs }
    }

    pub fn from_i64(coeffs: &[i64]) -> Self {
        Self::new(coeffs.iter().map(|&c| BigInt::from(c)).collect())
    }

    pub fn from_u128(coeffs: &[u128]) -> Self {
        Self::new(coeffs.iter().map(|&c| BigInt::from(c)).collect())
    }

    pub fn coeffs(&self) -> &[BigInt] {
        &self.coeffs
    }

    pub fn degree(&self) -> u32 {
        self.coeffs.len() as u32 - 1
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_zero())
    }

    /// u-th derivative: coefficient a_i moves to degree i - u scaled by the
    /// falling factorial i (i-1) ... (i-u+1). u = 0 is the identity.
    pub fn derivative(&self, u: u32) -> IntPolynomial {
        if u == 0 {
            return self.clone();
        }
        if (u as usize) >= self.coeffs.len() {
            return IntPolynomial::new(vec![]);
        }
        let mut out = Vec::with_capacity(self.coeffs.len() - u as usize);
        for (i, c) in self.coeffs.iter().enumerate().skip(u as usize) {
            let mut fall = BigInt::one();
            for j in 0..u as u64 {
                fall *= BigInt::from(i as u64 - j);
            }
            out.push(c * fall);
        }
        IntPolynomial::new(out)
    }

    /// Minimum p-adic order over the coefficients; infinite for the zero
    /// polynomial.
    pub fn ord_p(&self, p: u128) -> Valuation {
        let mut best = Valuation::Infinite;
        for c in &self.coeffs {
            best = best.min(bigint_val_p(c, p));
            if best == Valuation::Finite(0) {
                break;
            }
        }
        best
    }

    /// Coefficients reduced into [0, m).
    pub fn reduced(&self, m: u128) -> Vec<u128> {
        let mb = BigInt::from(m);
        self.coeffs
            .iter()
            .map(|c| {
                let r = ((c % &mb) + &mb) % &mb;
                u128::try_from(r.to_biguint().expect("non-negative")).expect("below m < 2^127")
            })
            .collect()
    }

    /// f(x) mod m by Horner on the reduced coefficients.
    pub fn eval_mod(&self, x: u128, m: u128) -> u128 {
        let coeffs = self.reduced(m);
        eval_mod_reduced(&coeffs, x % m, m)
    }
}

/// Horner evaluation over pre-reduced coefficients. Callers that evaluate
/// one polynomial at many points reduce once and loop on this.
pub fn eval_mod_reduced(coeffs: &[u128], x: u128, m: u128) -> u128 {
    debug_assert!(x < m);
    let mut acc = 0u128;
    for &c in coeffs.iter().rev() {
        debug_assert!(c < m);
        acc = (mulmod(acc, x, m) + c) % m;
    }
    acc
}

/// p-adic order of a big integer; infinite at 0.
pub fn bigint_val_p(n: &BigInt, p: u128) -> Valuation {
    if n.is_zero() {
        return Valuation::Infinite;
    }
    let p = BigInt::from(p);
    let mut n = n.abs();
    let mut v = 0u64;
    while (&n % &p).is_zero() {
        n /= &p;
        v += 1;
    }
    Valuation::Finite(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn half_binom_frozen_small_indices() {
        let m9 = PrimePowerModulus::new(3, 2).unwrap();
        assert_eq!(half_binom(1, &m9, 0).unwrap().reduced(&m9).value(), 5);
        assert_eq!(half_binom(2, &m9, 0).unwrap().reduced(&m9).value(), 1);
        assert_eq!(half_binom(0, &m9, 0).unwrap().reduced(&m9).value(), 1);
    }

    #[test]
    fn half_binom_valuation_at_five() {
        // C(1/2, 4) = -5/128: order 1 at p = 5, and -5/128 = 40 mod 125
        let m125 = PrimePowerModulus::new(5, 3).unwrap();
        let hb = half_binom(4, &m125, 0).unwrap();
        assert_eq!(hb.valuation(), 1);
        assert_eq!(hb.reduced(&m125).value(), 40);
    }

    #[test]
    fn buffered_unit_reduces_consistently() {
        let m = PrimePowerModulus::new(7, 3).unwrap();
        for i in 0..25u32 {
            let plain = half_binom(i, &m, 0).unwrap();
            let buffered = half_binom(i, &m, 5).unwrap();
            assert_eq!(plain.valuation(), buffered.valuation());
            assert_eq!(plain.reduced(&m), buffered.reduced(&m), "i={i}");
        }
    }

    #[test]
    fn recursion_route_agrees_with_factorial_route() {
        for (p, k) in [(3u128, 8u32), (5, 6), (7, 5), (11, 4)] {
            let m = PrimePowerModulus::new(p, k).unwrap();
            let seq = half_binom_sequence(80, &m);
            for i in 0..=80u32 {
                let direct = half_binom(i, &m, 0).unwrap().reduced(&m).value();
                assert_eq!(seq[i as usize], direct, "i={i}, q={m}");
            }
        }
    }

    #[test]
    fn valuation_bound_frozen_example() {
        let vb = valuation_bound_check(3, 3, 3);
        assert_eq!(vb.exact, 1);
        assert!((vb.bound - 6.392_789_26).abs() < 1e-5);
        assert!(vb.ok);
    }

    #[test]
    fn build_reduction_identity_small() {
        let m56 = PrimePowerModulus::new(5, 6).unwrap();
        let ctx = build_reduction(2, 3, 1, &m56, 2).unwrap();
        assert_eq!(ctx.degree(), 3);
        assert_eq!(ctx.g()[0], 1);
        // omega^2 = m a theta alpha by construction
        assert_eq!(
            ctx.omega().pow(2).value(),
            mulmod(mulmod(2, 3, m56.q()), mulmod(ctx.theta(), 1, m56.q()), m56.q())
        );
        assert_eq!(ctx.sqrt_consistency(0, 500), Ok(()));
    }

    #[test]
    fn f_is_one_mod_p_everywhere() {
        let m = PrimePowerModulus::new(7, 9).unwrap();
        let ctx = build_reduction(3, 5, 4, &m, 2).unwrap();
        for t in 0..200u128 {
            assert_eq!(ctx.eval_f(t).value() % 7, 1, "t={t}");
        }
    }

    #[test]
    fn build_reduction_rejects_bad_inputs() {
        let m = PrimePowerModulus::new(5, 6).unwrap();
        assert!(matches!(
            build_reduction(2, 3, 1, &m, 0),
            Err(Error::BadRange { s: 0, k: 6 })
        ));
        assert!(matches!(
            build_reduction(2, 3, 1, &m, 6),
            Err(Error::BadRange { s: 6, k: 6 })
        ));
        assert!(matches!(
            build_reduction(5, 3, 1, &m, 2),
            Err(Error::NotAUnit { .. })
        ));
        // 2 is a non-residue mod 5
        assert!(matches!(
            build_reduction(2, 3, 2, &m, 2),
            Err(Error::NotAResidue { .. })
        ));
    }

    #[test]
    fn derivative_and_ord() {
        // f = 1 + 3x + 9x^3
        let f = IntPolynomial::from_i64(&[1, 3, 0, 9]);
        assert_eq!(f.degree(), 3);
        let f1 = f.derivative(1);
        assert_eq!(f1.coeffs(), &[BigInt::from(3), BigInt::from(0), BigInt::from(27)]);
        let f3 = f.derivative(3);
        assert_eq!(f3.coeffs(), &[BigInt::from(54)]);
        assert_eq!(f.derivative(4).ord_p(3), Valuation::Infinite);
        assert_eq!(f1.ord_p(3), Valuation::Finite(1));
        assert_eq!(f.ord_p(3), Valuation::Finite(0));
        assert_eq!(f.eval_mod(2, 1000), 1 + 6 + 72);
    }

    proptest! {
        #[test]
        fn iterated_derivatives_compose(u in 0u32..4, v in 0u32..4,
                                        c0 in -50i64..50, c1 in -50i64..50,
                                        c2 in -50i64..50, c3 in -50i64..50,
                                        c4 in -50i64..50, c5 in -50i64..50) {
            let f = IntPolynomial::from_i64(&[c0, c1, c2, c3, c4, c5]);
            prop_assert_eq!(f.derivative(u).derivative(v), f.derivative(u + v));
        }

        #[test]
        fn reduction_identity_random_offsets(t in 0u128..100_000) {
            let m = PrimePowerModulus::new(3, 11).unwrap();
            let ctx = build_reduction(2, 5, 4, &m, 3).unwrap();
            prop_assert!(ctx.identity_holds_at(t));
        }
    }
}
