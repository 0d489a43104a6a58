//! Kloosterman sums, p-adic square roots, and divisor sums in arithmetic
//! progressions modulo odd prime powers.
//!
//! The library has three layers:
//! - [`modular`]: double-word modular arithmetic over a fixed odd prime
//!   power (powers, inverses, square roots, factorial valuations),
//! - [`padic`] / [`kloosterman`] / [`averages`] / [`divisor`]: the number
//!   theory proper (half-binomial series, closed-form Kloosterman values,
//!   complete-sum averages, polynomial root counting, hyperbola-method
//!   divisor sums),
//! - [`report`] / [`verify`]: reproducible experiment reports and the
//!   self-check suites behind `kloospow verify`.
//!
//! The `book/` directory of the repository walks through the same material
//! chapter by chapter; its code blocks compile as doc-tests of this crate.

pub mod averages;
pub mod divisor;
pub mod kloosterman;
pub mod modular;
pub mod padic;
pub mod report;
pub mod sampler;
pub mod verify;

mod accum;
mod arith;

pub use modular::{PrimePowerModulus, Residue, Valuation};

/// Errors shared across the crate. Math-domain failures carry enough
/// context to point at the offending value.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Error {
    #[error("{0} is not an odd prime")]
    NotOddPrime(u128),
    #[error("exponent must be at least 1")]
    ZeroExponent,
    #[error("{p}^{k} exceeds the supported modulus width (2^127)")]
    ModulusTooWide { p: u128, k: u32 },
    #[error("{value} is not invertible modulo {modulus}")]
    NotInvertible { value: u128, modulus: u128 },
    #[error("{value} is not a unit modulo {modulus}")]
    NotAUnit { value: u128, modulus: u128 },
    #[error("{value} is a quadratic non-residue modulo {modulus}")]
    NotAResidue { value: u128, modulus: u128 },
    #[error("argument shares a factor with the prime {p}")]
    NotCoprimeToP { p: u128 },
    #[error("residues of distinct moduli ({left} vs {right})")]
    ModulusMismatch { left: u128, right: u128 },
    #[error("{what} size {size} exceeds the ceiling {ceiling}")]
    TooLarge {
        what: &'static str,
        size: u128,
        ceiling: u128,
    },
    #[error("closed form needs modulus exponent k >= 2; use the brute-force path for k = 1")]
    NeedsBruteForce,
    #[error("{what}: {why}")]
    BadInput { what: &'static str, why: String },
    #[error("shift exponent s = {s} must satisfy 1 <= s < k = {k}")]
    BadRange { s: u32, k: u32 },
    #[error("derivative order {u} exceeds the context degree {degree}")]
    DegreeTooSmall { u: u32, degree: u32 },
    #[error("root set exceeds the listing cap {cap}")]
    TooManyRoots { cap: u128 },
    #[error("cannot factor {0} (trial bound exceeded)")]
    Unfactorable(u128),
}

pub type Result<T> = std::result::Result<T, Error>;

#[cfg(doctest)]
mod book {
    //! Keeps the guide honest: every fenced Rust block in `book/src/*.md`
    //! compiles and runs as a doc-test of this crate.
    #[doc = include_str!("../../../book/src/modular.md")]
    mod modular {}
    #[doc = include_str!("../../../book/src/kloosterman.md")]
    mod kloosterman {}
    #[doc = include_str!("../../../book/src/padic.md")]
    mod padic {}
    #[doc = include_str!("../../../book/src/averages.md")]
    mod averages {}
    #[doc = include_str!("../../../book/src/divisor.md")]
    mod divisor {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
