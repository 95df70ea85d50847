//! Partially homomorphic encryption over signed fixed-point rationals.
//!
//! This crate carries the algorithmic half of `phemu`:
//!
//! - [`numtheory`]: modular arithmetic, Miller–Rabin, prime and safe-prime
//!   generation over an injectable random source.
//! - [`encoding`]: the fixed-point `(x·10^k, 10^k)` rational pair and the
//!   two's-complement sign encoding modulo `z = 2^i`.
//! - [`paillier`]: additive scheme (add, subtract, multiply by constant).
//! - [`elgamal`]: multiplicative scheme (multiply, divide by swapping the
//!   numerator and denominator).
//! - [`planner`]: expression parsing, scheme assignment, staged execution
//!   plans and an in-process trusted re-encryption agent.
//!
//! Everything here is `no_std` with `alloc`. File formats, the benchmark
//! harness and the CLI live in the `phemu` crate.
//!
//! The ElGamal variant is the textbook one: messages are raw residues and
//! zero is encrypted with `c2 = 0`, so zero-ness of a ciphertext is visible.
//! Neither scheme is meant to protect real data.

#![cfg_attr(not(test), no_std)]
#![warn(missing_debug_implementations, rust_2018_idioms)]

extern crate alloc;

pub mod elgamal;
pub mod encoding;
mod error;
mod fingerprint;
pub mod numtheory;
pub mod paillier;
pub mod planner;

pub use num_bigint::{BigInt, BigUint};
pub use num_rational::BigRational;

pub use crate::encoding::{CodecParams, EncodedRational};
pub use crate::error::{Error, Result};
pub use crate::fingerprint::KeyFingerprint;

use core::fmt;

/// Key sizes accepted by both key generators.
pub const SUPPORTED_KEY_BITS: [u64; 5] = [256, 512, 1024, 2048, 3072];

/// One of the two partially homomorphic schemes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Scheme {
    Paillier,
    ElGamal,
}

impl Scheme {
    pub fn other(self) -> Scheme {
        match self {
            Scheme::Paillier => Scheme::ElGamal,
            Scheme::ElGamal => Scheme::Paillier,
        }
    }

    /// Lowercase identifier used in file formats and benchmark tables.
    pub fn id(self) -> &'static str {
        match self {
            Scheme::Paillier => "paillier",
            Scheme::ElGamal => "elgamal",
        }
    }

    pub fn from_id(id: &str) -> Option<Scheme> {
        match id {
            "paillier" => Some(Scheme::Paillier),
            "elgamal" => Some(Scheme::ElGamal),
            _ => None,
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Paillier => "Paillier",
            Scheme::ElGamal => "ElGamal",
        })
    }
}

pub(crate) fn check_key_bits(bits: u64) -> Result<()> {
    if SUPPORTED_KEY_BITS.contains(&bits) {
        Ok(())
    } else {
        Err(Error::Config(alloc::format!(
            "unsupported key size {bits}; allowed sizes are 256, 512, 1024, 2048, 3072"
        )))
    }
}
